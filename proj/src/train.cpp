#include "descdist/train.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace descdist {

void TrainConfig::validate() const {
  require<ConfigError>(stage == "teacher" || stage == "student",
                       "train config: stage must be 'teacher' or 'student', got '" + stage + "'");
  require<ConfigError>(epochs >= 1, "train config: epochs must be >= 1");
  require<ConfigError>(batch_size >= 2, "train config: batch_size must be >= 2");
  require<ConfigError>(lr >= 0.0, "train config: lr must be >= 0");
  require<ConfigError>(augment_fraction >= 0.0 && augment_fraction <= 1.0,
                       "train config: augment_fraction must be in [0,1]");
  loss.validate();
}

void TrainLog::save_csv(const std::string& path) const {
  std::ofstream out(path);
  require<Error>(out.good(), "cannot open train log for writing: " + path);
  out << "epoch,iter,loss_total,loss_triplet,loss_binarization,loss_distill_real,"
         "loss_distill_bin,grad_norm\n";
  out.precision(10);
  for (const auto& r : records)
    out << r.epoch << ',' << r.iter << ',' << r.total << ',' << r.triplet << ','
        << r.binarization << ',' << r.distill_real << ',' << r.distill_bin << ',' << r.grad_norm
        << '\n';
  require<Error>(out.good(), "train log write failed: " + path);
}

double TrainLog::epoch_mean_total(int epoch) const {
  double sum = 0;
  int n = 0;
  for (const auto& r : records)
    if (r.epoch == epoch) {
      sum += r.total;
      ++n;
    }
  return n ? sum / n : 0.0;
}

namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

CheckpointMeta make_meta(const TrainConfig& cfg, int epoch) {
  CheckpointMeta meta;
  meta.fields["stage"] = cfg.stage;
  meta.fields["epoch"] = std::to_string(epoch);
  meta.fields["seed"] = std::to_string(cfg.seed);
  meta.fields["lr"] = fmt_double(cfg.lr);
  meta.fields["batch_size"] = std::to_string(cfg.batch_size);
  meta.fields["augment_fraction"] = fmt_double(cfg.augment_fraction);
  meta.fields["loss.margin"] = fmt_double(cfg.loss.margin);
  meta.fields["loss.alpha_bin"] = fmt_double(cfg.loss.alpha_bin);
  meta.fields["loss.gamma_bin"] = fmt_double(cfg.loss.gamma_bin);
  meta.fields["loss.beta_distill"] = fmt_double(cfg.loss.beta_distill);
  meta.fields["loss.lambda_real"] = fmt_double(cfg.loss.lambda_real);
  meta.fields["loss.lambda_bin"] = fmt_double(cfg.loss.lambda_bin);
  meta.fields["loss.eps_soft"] = fmt_double(cfg.loss.eps_soft);
  return meta;
}

class Optimizer {
 public:
  Optimizer(Network& net, double lr) : net_(net) {
    cfg_.lr = lr;
    const auto params = net.params();
    for (const auto& p : params)
      if (p.trainable) targets_.push_back(p.tensor);
    states_.resize(targets_.size());
  }

  double grad_norm() const {
    double ssq = 0;
    for (const auto* t : targets_)
      for (float g : t->grad) ssq += static_cast<double>(g) * g;
    return std::sqrt(ssq);
  }

  void step() {
    for (std::size_t i = 0; i < targets_.size(); ++i) adam_step(*targets_[i], states_[i], cfg_);
  }

 private:
  Network& net_;
  AdamConfig cfg_;
  std::vector<Tensor<float>*> targets_;
  std::vector<AdamState<float>> states_;
};

struct StepOutcome {
  LossTerms terms;
  double grad_norm = 0;
};

// One optimizer step on one Siamese batch. Anchors and positives run through
// the net as a single 2N batch (shared weights, shared batch statistics);
// the output is split for the loss and the gradients flow back joined.
StepOutcome train_step(Network& net, Network* teacher, Optimizer& opt, const PatchBatch& batch,
                       const TrainConfig& cfg) {
  const int n = batch.size();
  const TensorF joined = concat_batch(batch.anchors, batch.positives);
  const TensorF out = net.forward(joined, /*training=*/true);
  const TensorF ra = slice_batch(out, 0, n);
  const TensorF rp = slice_batch(out, n, 2 * n);

  TensorF da, dp;
  LossTerms terms;
  if (teacher) {
    const TensorF t_out = teacher->forward(joined, /*training=*/false);
    terms = train_loss(slice_batch(t_out, 0, n), slice_batch(t_out, n, 2 * n), ra, rp, cfg.loss,
                       &da, &dp);
  } else {
    terms = basic_loss(ra, rp, cfg.loss, &da, &dp);
  }

  net.zero_grads();
  net.backward(concat_batch(da, dp));
  StepOutcome outcome;
  outcome.terms = terms;
  outcome.grad_norm = opt.grad_norm();
  opt.step();
  return outcome;
}

TrainResult run_stage(const PatchStore& store, Network net, Network* teacher,
                      const TrainConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto eligible = pairable_ids(store);
  require<Error>(static_cast<int>(eligible.size()) >= cfg.batch_size,
                 "dataset too small: " + std::to_string(eligible.size()) +
                     " pairable point ids for batch size " + std::to_string(cfg.batch_size));
  const int iters_per_epoch =
      std::max(1, static_cast<int>(eligible.size()) / cfg.batch_size);

  Rng rng(mix_seed(cfg.seed, 0xba7c4));
  Optimizer opt(net, cfg.lr);
  TrainResult result;
  result.log.records.reserve(static_cast<std::size_t>(cfg.epochs) * iters_per_epoch);

  int iter = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int it = 0; it < iters_per_epoch; ++it) {
      PatchBatch batch = sample_pair_batch(store, cfg.batch_size, rng);
      batch = augment_rotate(std::move(batch), cfg.augment_fraction, rng);
      const StepOutcome outcome = train_step(net, teacher, opt, batch, cfg);
      TrainRecord rec;
      rec.epoch = epoch;
      rec.iter = iter++;
      rec.total = outcome.terms.total(cfg.loss);
      rec.triplet = outcome.terms.triplet;
      rec.binarization = outcome.terms.binarization;
      rec.distill_real = outcome.terms.distill_real;
      rec.distill_bin = outcome.terms.distill_bin;
      rec.grad_norm = outcome.grad_norm;
      result.log.records.push_back(rec);
    }
    if (cfg.checkpoint_every > 0 && !cfg.checkpoint_dir.empty() &&
        (epoch + 1) % cfg.checkpoint_every == 0 && epoch + 1 < cfg.epochs) {
      namespace fs = std::filesystem;
      fs::create_directories(cfg.checkpoint_dir);
      CheckpointMeta meta = make_meta(cfg, epoch + 1);
      save_checkpoint(net, meta,
                      (fs::path(cfg.checkpoint_dir) /
                       (cfg.stage + "_epoch" + std::to_string(epoch + 1) + ".ckpt"))
                          .string());
    }
  }
  result.log.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  result.meta = make_meta(cfg, cfg.epochs);
  result.net = std::move(net);
  return result;
}

}  // namespace

TrainResult train_teacher(const PatchStore& store, const TrainConfig& cfg) {
  cfg.validate();
  require<ConfigError>(cfg.stage == "teacher", "train_teacher: config stage must be 'teacher'");
  return run_stage(store, build_teacher(cfg.seed), nullptr, cfg);
}

TrainResult train_student(const PatchStore& store, Network* teacher, const TrainConfig& cfg) {
  cfg.validate();
  require<ConfigError>(cfg.stage == "student", "train_student: config stage must be 'student'");
  require<ConfigError>(teacher != nullptr || cfg.loss.beta_distill == 0.0,
                       "train_student: a teacher network is required when beta_distill > 0");
  TrainConfig resolved = cfg;
  Network student = build_student(cfg.seed);
  if (teacher) {
    require<ConfigError>(teacher->output_dim > 0 && student.output_dim <= teacher->output_dim,
                         "train_student: teacher output dim must be >= student output dim");
    // default lambda_b is the dimension ratio D_s/D_t
    if (resolved.loss.lambda_bin <= 0.0)
      resolved.loss.lambda_bin =
          static_cast<double>(student.output_dim) / static_cast<double>(teacher->output_dim);
  }
  return run_stage(store, std::move(student), cfg.loss.beta_distill == 0.0 ? nullptr : teacher,
                   resolved);
}

void save_train_result(TrainResult& result, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::string stage = result.meta.get("stage", "net");
  save_checkpoint(result.net, result.meta, (fs::path(out_dir) / (stage + ".ckpt")).string());
  result.log.save_csv((fs::path(out_dir) / "log.csv").string());
}

}  // namespace descdist
