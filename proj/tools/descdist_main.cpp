// descdist: compact binary patch descriptors via teacher-student training,
// plus matching evaluation and a multi-robot keyframe-exchange simulator.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "descdist/checkpoint.hpp"
#include "descdist/descriptor.hpp"
#include "descdist/hash.hpp"
#include "descdist/manifest.hpp"
#include "descdist/patches.hpp"
#include "descdist/sim.hpp"
#include "descdist/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace descdist;

namespace {

std::vector<std::string> collect_argv(int argc, char** argv) {
  std::vector<std::string> out;
  for (int i = 0; i < argc; ++i) out.emplace_back(argv[i]);
  return out;
}

std::string train_config_json(const TrainConfig& cfg) {
  json j;
  j["stage"] = cfg.stage;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["lr"] = cfg.lr;
  j["seed"] = cfg.seed;
  j["augment_fraction"] = cfg.augment_fraction;
  j["checkpoint_every"] = cfg.checkpoint_every;
  j["teacher_checkpoint"] = cfg.teacher_checkpoint;
  j["loss"] = {{"margin", cfg.loss.margin},
               {"alpha_bin", cfg.loss.alpha_bin},
               {"gamma_bin", cfg.loss.gamma_bin},
               {"beta_distill", cfg.loss.beta_distill},
               {"lambda_real", cfg.loss.lambda_real},
               {"lambda_bin", cfg.loss.lambda_bin},
               {"eps_soft", cfg.loss.eps_soft}};
  return j.dump();
}

void apply_config_file(TrainConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  require<ConfigError>(in.good(), "cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file is not valid JSON: " + std::string(e.what()));
  }
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.lr = j.value("lr", cfg.lr);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.augment_fraction = j.value("augment_fraction", cfg.augment_fraction);
  cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
  cfg.teacher_checkpoint = j.value("teacher_checkpoint", cfg.teacher_checkpoint);
  if (j.contains("loss")) {
    const auto& l = j.at("loss");
    cfg.loss.margin = l.value("margin", cfg.loss.margin);
    cfg.loss.alpha_bin = l.value("alpha_bin", cfg.loss.alpha_bin);
    cfg.loss.gamma_bin = l.value("gamma_bin", cfg.loss.gamma_bin);
    cfg.loss.beta_distill = l.value("beta_distill", cfg.loss.beta_distill);
    cfg.loss.lambda_real = l.value("lambda_real", cfg.loss.lambda_real);
    cfg.loss.lambda_bin = l.value("lambda_bin", cfg.loss.lambda_bin);
    cfg.loss.eps_soft = l.value("eps_soft", cfg.loss.eps_soft);
  }
}

void write_timing(const std::string& dir, double seconds) {
  // wall time lives in its own file so the reproducible outputs stay
  // byte-identical across runs
  json j;
  j["wall_seconds"] = seconds;
  std::ofstream out((fs::path(dir) / "timing.json").string());
  out << j.dump(2) << "\n";
}

struct TrainCli {
  TrainConfig cfg;
  std::string store_dir;
  std::string out_dir;
  std::string config_file;
};

void add_train_flags(CLI::App* cmd, TrainCli& tc, bool student) {
  cmd->add_option("--store", tc.store_dir, "Patch store directory (grid bitmaps + info.txt)")
      ->required();
  cmd->add_option("-o,--out", tc.out_dir, "Output directory for checkpoint, log.csv, manifest")
      ->required();
  cmd->add_option("--config", tc.config_file,
                  "JSON config file; explicit flags override its values");
  cmd->add_option("--epochs", tc.cfg.epochs, "Training epochs (count)");
  cmd->add_option("--batch", tc.cfg.batch_size, "Pairs per iteration (count)");
  cmd->add_option("--lr", tc.cfg.lr, "Adam learning rate (dimensionless)");
  cmd->add_option("--seed", tc.cfg.seed, "Master RNG seed (uint64)");
  cmd->add_option("--augment", tc.cfg.augment_fraction,
                  "Fraction of pairs rotated by a right angle per batch, in [0,1]");
  cmd->add_option("--checkpoint-every", tc.cfg.checkpoint_every,
                  "Epochs between intermediate checkpoints; 0 keeps only the final one");
  cmd->add_option("--margin", tc.cfg.loss.margin, "Triplet margin t (descriptor distance units)");
  cmd->add_option("--alpha-bin", tc.cfg.loss.alpha_bin,
                  "Binarization loss weight in the basic loss (dimensionless)");
  if (student) {
    cmd->add_option("--teacher", tc.cfg.teacher_checkpoint, "Trained teacher checkpoint path")
        ->required();
    cmd->add_option("--beta", tc.cfg.loss.beta_distill,
                    "Distillation loss weight; 0 disables distillation (dimensionless)");
    cmd->add_option("--gamma", tc.cfg.loss.gamma_bin,
                    "Binary-term weight inside the distillation loss (dimensionless)");
    cmd->add_option("--lambda-real", tc.cfg.loss.lambda_real,
                    "Teacher-side distance scale (dimensionless)");
    cmd->add_option("--lambda-bin", tc.cfg.loss.lambda_bin,
                    "Teacher-side dot scale; <= 0 derives D_s/D_t (dimensionless)");
    cmd->add_option("--eps-soft", tc.cfg.loss.eps_soft, "Soft-sign epsilon (dimensionless)");
  }
}

// Values from --config apply first, then any explicitly passed flag wins.
void resolve_train_config(CLI::App* cmd, TrainCli& tc, bool student) {
  if (tc.config_file.empty()) return;
  TrainCli flags = tc;  // flag-resolved values
  TrainCli from_file;
  from_file.cfg.stage = tc.cfg.stage;
  apply_config_file(from_file.cfg, tc.config_file);
  TrainConfig merged = from_file.cfg;
  auto keep = [&](const char* name) { return cmd->count(name) > 0; };
  if (keep("--epochs")) merged.epochs = flags.cfg.epochs;
  if (keep("--batch")) merged.batch_size = flags.cfg.batch_size;
  if (keep("--lr")) merged.lr = flags.cfg.lr;
  if (keep("--seed")) merged.seed = flags.cfg.seed;
  if (keep("--augment")) merged.augment_fraction = flags.cfg.augment_fraction;
  if (keep("--checkpoint-every")) merged.checkpoint_every = flags.cfg.checkpoint_every;
  if (keep("--margin")) merged.loss.margin = flags.cfg.loss.margin;
  if (keep("--alpha-bin")) merged.loss.alpha_bin = flags.cfg.loss.alpha_bin;
  if (student) {
    merged.teacher_checkpoint = flags.cfg.teacher_checkpoint;  // flag is required
    if (keep("--beta")) merged.loss.beta_distill = flags.cfg.loss.beta_distill;
    if (keep("--gamma")) merged.loss.gamma_bin = flags.cfg.loss.gamma_bin;
    if (keep("--lambda-real")) merged.loss.lambda_real = flags.cfg.loss.lambda_real;
    if (keep("--lambda-bin")) merged.loss.lambda_bin = flags.cfg.loss.lambda_bin;
    if (keep("--eps-soft")) merged.loss.eps_soft = flags.cfg.loss.eps_soft;
  }
  tc.cfg = merged;
}

int cmd_synth(const std::vector<std::string>& argv, int points, int per_point,
              std::uint64_t seed, const std::string& out_dir) {
  const PatchStore store = generate_synthetic(points, per_point, seed);
  save_store(store, out_dir);
  RunManifest m;
  m.command = "synth";
  m.argv = argv;
  json cfg{{"points", points}, {"per_point", per_point}, {"seed", seed}};
  m.config_json = cfg.dump();
  for (const auto& f : fs::directory_iterator(out_dir))
    if (f.is_regular_file() && f.path().filename() != "manifest.json")
      m.output_paths.push_back(f.path().string());
  std::sort(m.output_paths.begin(), m.output_paths.end());
  m.write(out_dir);
  std::cout << "wrote store with " << store.count() << " patches ("
            << pairable_ids(store).size() << " pairable point ids) to " << out_dir << "\n";
  return 0;
}

int cmd_import_ubc(const std::vector<std::string>& argv, const std::string& input,
                   const std::string& out_dir) {
  const PatchStore store = load_ubc(input);
  save_store(store, out_dir);
  RunManifest m;
  m.command = "import-ubc";
  m.argv = argv;
  json cfg{{"input", input}};
  m.config_json = cfg.dump();
  m.input_paths = {input};
  for (const auto& f : fs::directory_iterator(out_dir))
    if (f.is_regular_file() && f.path().filename() != "manifest.json")
      m.output_paths.push_back(f.path().string());
  std::sort(m.output_paths.begin(), m.output_paths.end());
  m.write(out_dir);
  std::cout << "imported " << store.count() << " patches from " << input << "\n";
  return 0;
}

int cmd_train(const std::vector<std::string>& argv, TrainCli& tc, bool student) {
  const PatchStore store = load_ubc(tc.store_dir);
  if (tc.cfg.checkpoint_every > 0) tc.cfg.checkpoint_dir = tc.out_dir;
  TrainResult result;
  if (student) {
    auto teacher = load_checkpoint(tc.cfg.teacher_checkpoint);
    require<ConfigError>(teacher.net.arch == "teacher",
                         "--teacher must point at a teacher checkpoint, found arch '" +
                             teacher.net.arch + "'");
    result = train_student(store, &teacher.net, tc.cfg);
  } else {
    result = train_teacher(store, tc.cfg);
  }
  save_train_result(result, tc.out_dir);
  write_timing(tc.out_dir, result.log.wall_seconds);

  RunManifest m;
  m.command = student ? "train-student" : "train-teacher";
  m.argv = argv;
  m.config_json = train_config_json(tc.cfg);
  m.input_paths = {tc.store_dir};
  if (student) m.input_paths.push_back(tc.cfg.teacher_checkpoint);
  m.output_paths = {(fs::path(tc.out_dir) / (tc.cfg.stage + ".ckpt")).string(),
                    (fs::path(tc.out_dir) / "log.csv").string()};
  m.write(tc.out_dir);

  const double final_loss =
      result.log.records.empty() ? 0.0 : result.log.records.back().total;
  std::cout << tc.cfg.stage << " training done: " << result.log.records.size() << " steps, "
            << "final loss " << final_loss << ", params " << result.net.param_count() << ", "
            << result.log.wall_seconds << " s\n";
  return 0;
}

int cmd_eval(const std::vector<std::string>& argv, const std::string& ckpt,
             const std::string& store_dir, int pairs, std::uint64_t seed,
             const std::string& out_dir, bool dump_descriptors) {
  auto loaded = load_checkpoint(ckpt);
  const PatchStore store = load_ubc(store_dir);
  const BenchmarkResult bench = benchmark_pairs(loaded.net, store, pairs, seed);

  fs::create_directories(out_dir);
  {
    std::ofstream csv((fs::path(out_dir) / "fpr95.csv").string());
    csv << "mode,num_pairs,fpr95\n";
    csv.precision(10);
    csv << "real," << bench.pairs.size() << ',' << bench.fpr95_real << '\n';
    csv << "binary," << bench.pairs.size() << ',' << bench.fpr95_binary << '\n';
  }
  {
    std::ofstream csv((fs::path(out_dir) / "pairs.csv").string());
    csv << "index_a,index_b,matched,dist_real,dist_hamming\n";
    csv.precision(10);
    for (const auto& p : bench.pairs)
      csv << p.index_a << ',' << p.index_b << ',' << (p.matched ? 1 : 0) << ',' << p.dist_real
          << ',' << p.dist_hamming << '\n';
  }
  json metrics{{"fpr95_real", bench.fpr95_real},
               {"fpr95_binary", bench.fpr95_binary},
               {"num_pairs", bench.pairs.size()},
               {"checkpoint", ckpt},
               {"arch", loaded.net.arch},
               {"output_dim", loaded.net.output_dim}};
  {
    std::ofstream mj((fs::path(out_dir) / "metrics.json").string());
    mj << metrics.dump(2) << "\n";
  }
  std::vector<std::string> outputs = {(fs::path(out_dir) / "fpr95.csv").string(),
                                      (fs::path(out_dir) / "pairs.csv").string(),
                                      (fs::path(out_dir) / "metrics.json").string()};
  if (dump_descriptors) {
    std::vector<std::size_t> all(store.count());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const Tensor<float> real = describe(loaded.net, store_to_inputs(store, all));
    save_descriptors_real((fs::path(out_dir) / "descriptors_real.bin").string(), real);
    save_descriptors_binary((fs::path(out_dir) / "descriptors_binary.bin").string(),
                            binarize_batch(real));
    outputs.push_back((fs::path(out_dir) / "descriptors_real.bin").string());
    outputs.push_back((fs::path(out_dir) / "descriptors_binary.bin").string());
  }

  RunManifest m;
  m.command = "eval";
  m.argv = argv;
  json cfg{{"checkpoint", ckpt}, {"store", store_dir}, {"pairs", pairs}, {"seed", seed}};
  m.config_json = cfg.dump();
  m.input_paths = {ckpt, store_dir};
  m.output_paths = outputs;
  m.write(out_dir);

  std::cout << "fpr95 real " << bench.fpr95_real << ", binary " << bench.fpr95_binary << " over "
            << bench.pairs.size() << " pairs\n";
  return 0;
}

int cmd_profile(const std::vector<std::string>& argv, const std::string& teacher_ckpt,
                const std::string& student_ckpt, int runs, int batch, std::uint64_t seed,
                const std::string& out_dir) {
  Network teacher =
      teacher_ckpt.empty() ? build_teacher(seed) : std::move(load_checkpoint(teacher_ckpt).net);
  Network student =
      student_ckpt.empty() ? build_student(seed) : std::move(load_checkpoint(student_ckpt).net);
  const ProfileResult tp = profile_network(teacher, runs, batch, seed);
  const ProfileResult sp = profile_network(student, runs, batch, seed);

  json j;
  j["batch"] = batch;
  j["runs"] = runs;
  j["teacher"] = {{"params", tp.params},
                  {"ms_per_batch_median", tp.ms_per_500_median},
                  {"runs_ms", tp.runs_ms}};
  j["student"] = {{"params", sp.params},
                  {"ms_per_batch_median", sp.ms_per_500_median},
                  {"runs_ms", sp.runs_ms}};
  j["param_ratio_student_over_teacher"] =
      static_cast<double>(sp.params) / static_cast<double>(tp.params);
  j["runtime_ratio_student_over_teacher"] = sp.ms_per_500_median / tp.ms_per_500_median;
  fs::create_directories(out_dir);
  {
    std::ofstream out((fs::path(out_dir) / "profile.json").string());
    out << j.dump(2) << "\n";
  }

  RunManifest m;
  m.command = "profile";
  m.argv = argv;
  json cfg{{"runs", runs}, {"batch", batch}, {"seed", seed}};
  m.config_json = cfg.dump();
  if (!teacher_ckpt.empty()) m.input_paths.push_back(teacher_ckpt);
  if (!student_ckpt.empty()) m.input_paths.push_back(student_ckpt);
  m.output_paths = {(fs::path(out_dir) / "profile.json").string()};
  m.write(out_dir);

  std::cout << "teacher: " << tp.params << " params, " << tp.ms_per_500_median << " ms/"
            << batch << "\nstudent: " << sp.params << " params, " << sp.ms_per_500_median
            << " ms/" << batch << "\n";
  return 0;
}

int cmd_simulate(const std::vector<std::string>& argv, const std::string& scenario_path,
                 int tau, int min_matches, const std::string& out_dir) {
  const sim::Scenario scenario = sim::load_scenario(scenario_path);
  sim::MatcherConfig matcher;
  matcher.hamming_threshold = tau;
  matcher.min_matches = min_matches;
  const sim::SimReport report = sim::run(scenario, matcher);

  fs::create_directories(out_dir);
  {
    std::ofstream out((fs::path(out_dir) / "report.json").string());
    out << report.to_json();
  }
  report.save_timeline_csv((fs::path(out_dir) / "timeline.csv").string());

  RunManifest m;
  m.command = "simulate";
  m.argv = argv;
  json cfg{{"scenario", scenario_path},
           {"hamming_threshold", tau},
           {"min_matches", min_matches}};
  m.config_json = cfg.dump();
  m.input_paths = {scenario_path};
  m.output_paths = {(fs::path(out_dir) / "report.json").string(),
                    (fs::path(out_dir) / "timeline.csv").string()};
  m.write(out_dir);

  std::cout << report.loops.size() << " loop events, precision " << report.precision
            << ", recall " << report.recall << ", total " << report.total_bytes_sent
            << " bytes over " << report.duration_s << " s\n";
  return 0;
}

void flatten_json(const json& j, const std::string& prefix,
                  std::vector<std::pair<std::string, double>>& out) {
  if (j.is_number()) {
    out.emplace_back(prefix, j.get<double>());
  } else if (j.is_boolean()) {
    out.emplace_back(prefix, j.get<bool>() ? 1.0 : 0.0);
  } else if (j.is_object()) {
    for (const auto& [k, v] : j.items())
      flatten_json(v, prefix.empty() ? k : prefix + "." + k, out);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i)
      flatten_json(j[i], prefix + "[" + std::to_string(i) + "]", out);
  }
}

int cmd_report(const std::vector<std::string>& argv, const std::string& input_dir,
               const std::string& out_dir) {
  require<ConfigError>(fs::is_directory(input_dir), "report: input directory not found: " + input_dir);
  std::vector<std::string> sources;
  for (const auto& f : fs::recursive_directory_iterator(input_dir)) {
    if (!f.is_regular_file()) continue;
    const auto name = f.path().filename().string();
    if (name == "metrics.json" || name == "report.json" || name == "profile.json")
      sources.push_back(f.path().string());
  }
  std::sort(sources.begin(), sources.end());

  fs::create_directories(out_dir);
  json summary = json::array();
  std::ofstream csv((fs::path(out_dir) / "summary.csv").string());
  csv << "source,key,value\n";
  csv.precision(12);
  for (const auto& src : sources) {
    std::ifstream in(src);
    json j;
    try {
      in >> j;
    } catch (const json::exception&) {
      continue;  // unrelated json, skip
    }
    std::vector<std::pair<std::string, double>> flat;
    flatten_json(j, "", flat);
    json entry{{"source", src}, {"metrics", json::object()}};
    for (const auto& [k, v] : flat) {
      csv << src << ',' << k << ',' << v << '\n';
      entry["metrics"][k] = v;
    }
    summary.push_back(entry);
  }
  {
    std::ofstream out((fs::path(out_dir) / "summary.json").string());
    out << summary.dump(2) << "\n";
  }

  RunManifest m;
  m.command = "report";
  m.argv = argv;
  json cfg{{"input", input_dir}};
  m.config_json = cfg.dump();
  m.input_paths = sources;
  m.output_paths = {(fs::path(out_dir) / "summary.csv").string(),
                    (fs::path(out_dir) / "summary.json").string()};
  m.write(out_dir);

  std::cout << "aggregated " << sources.size() << " result files into " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compact binary patch descriptors: teacher-student training, matching "
               "evaluation, and a multi-robot keyframe-exchange bandwidth simulator"};
  app.require_subcommand(1);
  const auto raw_argv = collect_argv(argc, argv);

  // synth
  int sy_points = 100, sy_per_point = 2;
  std::uint64_t sy_seed = 1;
  std::string sy_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic labeled patch store");
  synth->add_option("--points", sy_points, "Number of distinct 3D points (count)")->required();
  synth->add_option("--per-point", sy_per_point, "Patches per point (count)")->required();
  synth->add_option("--seed", sy_seed, "RNG seed (uint64)");
  synth->add_option("-o,--out", sy_out, "Output store directory")->required();

  // import-ubc
  std::string iu_input, iu_out;
  auto* import_ubc =
      app.add_subcommand("import-ubc", "Validate and re-serialize a patch-grid dataset");
  import_ubc->add_option("--input", iu_input, "Source dataset directory")->required();
  import_ubc->add_option("-o,--out", iu_out, "Output store directory")->required();

  // train-teacher / train-student
  TrainCli teacher_cli;
  teacher_cli.cfg.stage = "teacher";
  auto* train_t = app.add_subcommand("train-teacher",
                                     "Train the 128-d teacher under the basic loss");
  add_train_flags(train_t, teacher_cli, /*student=*/false);

  TrainCli student_cli;
  student_cli.cfg.stage = "student";
  auto* train_s = app.add_subcommand(
      "train-student", "Train the 64-d student under a frozen teacher's supervision");
  add_train_flags(train_s, student_cli, /*student=*/true);

  // eval
  std::string ev_ckpt, ev_store, ev_out;
  int ev_pairs = 2000;
  std::uint64_t ev_seed = 1;
  bool ev_dump = false;
  auto* eval_cmd = app.add_subcommand("eval", "Matched/unmatched pair evaluation (FPR95)");
  eval_cmd->add_option("--ckpt", ev_ckpt, "Checkpoint to evaluate")->required();
  eval_cmd->add_option("--store", ev_store, "Patch store directory")->required();
  eval_cmd->add_option("--pairs", ev_pairs, "Evaluation pairs, half matched half not (count)");
  eval_cmd->add_option("--seed", ev_seed, "Pair sampling seed (uint64)");
  eval_cmd->add_option("-o,--out", ev_out, "Output directory")->required();
  eval_cmd->add_flag("--dump-descriptors", ev_dump,
                     "Also dump real and packed binary descriptors for the whole store");

  // profile
  std::string pr_teacher, pr_student, pr_out;
  int pr_runs = 5, pr_batch = 500;
  std::uint64_t pr_seed = 1234;
  auto* profile_cmd =
      app.add_subcommand("profile", "Parameter counts and per-batch descriptor wall time");
  profile_cmd->add_option("--teacher", pr_teacher,
                          "Teacher checkpoint (fresh seeded build when omitted)");
  profile_cmd->add_option("--student", pr_student,
                          "Student checkpoint (fresh seeded build when omitted)");
  profile_cmd->add_option("--runs", pr_runs, "Timed runs; the median is reported (count)");
  profile_cmd->add_option("--batch", pr_batch, "Patches described per run (count)");
  profile_cmd->add_option("--seed", pr_seed, "Seed for fresh builds and the timing batch");
  profile_cmd->add_option("-o,--out", pr_out, "Output directory")->required();

  // simulate
  std::string si_scenario, si_out;
  int si_tau = 16, si_min_matches = 12;
  auto* simulate_cmd = app.add_subcommand(
      "simulate", "Run the multi-robot keyframe-exchange simulation on a scenario file");
  simulate_cmd->add_option("--scenario", si_scenario, "Scenario JSON file")->required();
  simulate_cmd->add_option("--tau", si_tau, "Keypoint match threshold (Hamming bits)");
  simulate_cmd->add_option("--min-matches", si_min_matches,
                           "Mutual-NN matches required to declare a loop (count)");
  simulate_cmd->add_option("-o,--out", si_out, "Output directory")->required();

  // report
  std::string re_input, re_out;
  auto* report_cmd = app.add_subcommand(
      "report", "Aggregate metrics/profile/simulation JSON files into plot-ready CSV");
  report_cmd->add_option("--input", re_input, "Directory scanned recursively for result files")
      ->required();
  report_cmd->add_option("-o,--out", re_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(raw_argv, sy_points, sy_per_point, sy_seed, sy_out);
    if (import_ubc->parsed()) return cmd_import_ubc(raw_argv, iu_input, iu_out);
    if (train_t->parsed()) {
      resolve_train_config(train_t, teacher_cli, /*student=*/false);
      return cmd_train(raw_argv, teacher_cli, /*student=*/false);
    }
    if (train_s->parsed()) {
      resolve_train_config(train_s, student_cli, /*student=*/true);
      return cmd_train(raw_argv, student_cli, /*student=*/true);
    }
    if (eval_cmd->parsed())
      return cmd_eval(raw_argv, ev_ckpt, ev_store, ev_pairs, ev_seed, ev_out, ev_dump);
    if (profile_cmd->parsed())
      return cmd_profile(raw_argv, pr_teacher, pr_student, pr_runs, pr_batch, pr_seed, pr_out);
    if (simulate_cmd->parsed())
      return cmd_simulate(raw_argv, si_scenario, si_tau, si_min_matches, si_out);
    if (report_cmd->parsed()) return cmd_report(raw_argv, re_input, re_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
