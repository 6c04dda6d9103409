// Python bindings for the descriptor-distillation core: losses, networks,
// binary matching, FPR95 evaluation, training entry points and the
// keyframe-exchange simulator.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "json.hpp"

#include "descdist/checkpoint.hpp"
#include "descdist/descriptor.hpp"
#include "descdist/losses.hpp"
#include "descdist/manifest.hpp"
#include "descdist/patches.hpp"
#include "descdist/sim.hpp"
#include "descdist/train.hpp"

namespace py = pybind11;
using namespace descdist;

namespace {

template <typename T>
Tensor<T> tensor2d_from_array(const py::array_t<T, py::array::c_style | py::array::forcecast>& a,
                              const char* what) {
  require<ShapeError>(a.ndim() == 2, std::string(what) + ": expected a 2-D array");
  Tensor<T> t({static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1))});
  std::copy(a.data(), a.data() + a.size(), t.data.begin());
  return t;
}

template <typename T>
py::array_t<T> array_from_tensor(const Tensor<T>& t) {
  std::vector<py::ssize_t> shape(t.shape.begin(), t.shape.end());
  py::array_t<T> out(shape);
  std::copy(t.data.begin(), t.data.end(), out.mutable_data());
  return out;
}

using ArrayD = py::array_t<double, py::array::c_style | py::array::forcecast>;
using ArrayF = py::array_t<float, py::array::c_style | py::array::forcecast>;

LossConfig loss_config_from_dict(const py::dict& d) {
  LossConfig cfg;
  if (d.contains("margin")) cfg.margin = d["margin"].cast<double>();
  if (d.contains("alpha_bin")) cfg.alpha_bin = d["alpha_bin"].cast<double>();
  if (d.contains("gamma_bin")) cfg.gamma_bin = d["gamma_bin"].cast<double>();
  if (d.contains("beta_distill")) cfg.beta_distill = d["beta_distill"].cast<double>();
  if (d.contains("lambda_real")) cfg.lambda_real = d["lambda_real"].cast<double>();
  if (d.contains("lambda_bin")) cfg.lambda_bin = d["lambda_bin"].cast<double>();
  if (d.contains("eps_soft")) cfg.eps_soft = d["eps_soft"].cast<double>();
  return cfg;
}

TrainConfig train_config_from_dict(const py::dict& d, const std::string& stage) {
  TrainConfig cfg;
  cfg.stage = stage;
  if (d.contains("epochs")) cfg.epochs = d["epochs"].cast<int>();
  if (d.contains("batch_size")) cfg.batch_size = d["batch_size"].cast<int>();
  if (d.contains("lr")) cfg.lr = d["lr"].cast<double>();
  if (d.contains("seed")) cfg.seed = d["seed"].cast<std::uint64_t>();
  if (d.contains("augment_fraction")) cfg.augment_fraction = d["augment_fraction"].cast<double>();
  if (d.contains("loss")) cfg.loss = loss_config_from_dict(d["loss"].cast<py::dict>());
  return cfg;
}

py::dict terms_to_dict(const LossTerms& t, const LossConfig& cfg) {
  py::dict d;
  d["triplet"] = t.triplet;
  d["binarization"] = t.binarization;
  d["distill_real"] = t.distill_real;
  d["distill_bin"] = t.distill_bin;
  d["basic"] = t.basic(cfg);
  d["distillation"] = t.distillation(cfg);
  d["total"] = t.total(cfg);
  return d;
}

// Patch arrays: [N,32,32] or [N,1,32,32] float, already standardized or raw;
// raw patches get the canonical per-patch standardization.
Tensor<float> patches_to_tensor(const ArrayF& a, bool standardize_rows) {
  const bool squeezed = a.ndim() == 3;
  require<ShapeError>(squeezed || a.ndim() == 4, "patches: expected [N,32,32] or [N,1,32,32]");
  const int n = static_cast<int>(a.shape(0));
  const int h = static_cast<int>(a.shape(squeezed ? 1 : 2));
  const int w = static_cast<int>(a.shape(squeezed ? 2 : 3));
  require<ShapeError>(h == kInputPatchSize && w == kInputPatchSize,
                      "patches must be 32x32 network inputs");
  Tensor<float> t({n, 1, h, w});
  std::copy(a.data(), a.data() + a.size(), t.data.begin());
  if (standardize_rows)
    for (int i = 0; i < n; ++i)
      standardize(&t.data[t.idx4(i, 0, 0, 0)], static_cast<std::size_t>(h) * w);
  return t;
}

struct PyNetwork {
  Network net;
  CheckpointMeta meta;

  py::array_t<float> describe_patches(const ArrayF& patches, bool standardize_rows) {
    Tensor<float> x = patches_to_tensor(patches, standardize_rows);
    return array_from_tensor(describe(net, x));
  }
};

py::dict report_to_dict(const sim::SimReport& report) {
  const auto j = nlohmann::json::parse(report.to_json());
  py::object loads = py::module_::import("json").attr("loads");
  return loads(j.dump()).cast<py::dict>();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Compact binary patch descriptors: teacher-student training core, "
            "Hamming matching, FPR95 evaluation and a multi-robot keyframe simulator";
  m.attr("__version__") = kToolVersion;

  // ---- data ----
  m.def(
      "generate_synthetic",
      [](int points, int per_point, std::uint64_t seed) {
        const PatchStore store = generate_synthetic(points, per_point, seed);
        py::array_t<std::uint8_t> patches(
            {static_cast<py::ssize_t>(store.count()), static_cast<py::ssize_t>(store.patch_size),
             static_cast<py::ssize_t>(store.patch_size)});
        std::copy(store.pixels.begin(), store.pixels.end(), patches.mutable_data());
        py::array_t<std::int64_t> ids(std::vector<py::ssize_t>{static_cast<py::ssize_t>(store.count())},
                                       store.point_ids.data());
        return py::make_tuple(patches, ids);
      },
      py::arg("points"), py::arg("per_point"), py::arg("seed") = 1,
      "Procedural labeled 64x64 patch set; returns (patches uint8 [M,64,64], point_ids int64 [M])");

  m.def(
      "save_store",
      [](const std::string& dir, py::array_t<std::uint8_t, py::array::c_style> patches,
         py::array_t<std::int64_t, py::array::c_style | py::array::forcecast> ids) {
        require<ShapeError>(patches.ndim() == 3 && patches.shape(1) == kStoredPatchSize &&
                                patches.shape(2) == kStoredPatchSize,
                            "save_store: patches must be [M,64,64] uint8");
        require<ShapeError>(ids.ndim() == 1 && ids.shape(0) == patches.shape(0),
                            "save_store: one point id per patch required");
        PatchStore store;
        store.pixels.assign(patches.data(), patches.data() + patches.size());
        store.point_ids.assign(ids.data(), ids.data() + ids.size());
        save_store(store, dir);
      },
      py::arg("dir"), py::arg("patches"), py::arg("point_ids"));

  m.def(
      "load_store",
      [](const std::string& dir) {
        const PatchStore store = load_ubc(dir);
        py::array_t<std::uint8_t> patches(
            {static_cast<py::ssize_t>(store.count()), static_cast<py::ssize_t>(store.patch_size),
             static_cast<py::ssize_t>(store.patch_size)});
        std::copy(store.pixels.begin(), store.pixels.end(), patches.mutable_data());
        py::array_t<std::int64_t> ids(std::vector<py::ssize_t>{static_cast<py::ssize_t>(store.count())},
                                       store.point_ids.data());
        return py::make_tuple(patches, ids);
      },
      py::arg("dir"));

  m.def(
      "patch_to_input",
      [](py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> patch) {
        require<ShapeError>(patch.ndim() == 2 && patch.shape(0) == patch.shape(1),
                            "patch_to_input: expected a square patch");
        py::array_t<float> out({static_cast<py::ssize_t>(kInputPatchSize),
                                static_cast<py::ssize_t>(kInputPatchSize)});
        patch_to_input(patch.data(), static_cast<int>(patch.shape(0)), out.mutable_data());
        return out;
      },
      py::arg("patch"), "Resample a stored patch to the standardized 32x32 network input");

  // ---- losses ----
  m.def(
      "pairwise_distance_matrix",
      [](const ArrayD& anchors, const ArrayD& positives) {
        return array_from_tensor(pairwise_distance_matrix(
            tensor2d_from_array(anchors, "anchors"), tensor2d_from_array(positives, "positives")));
      },
      py::arg("anchors"), py::arg("positives"));

  m.def(
      "triplet_hard_loss",
      [](const ArrayD& dm, double margin) {
        return triplet_hard_loss(tensor2d_from_array(dm, "distance matrix"), margin);
      },
      py::arg("distance_matrix"), py::arg("margin") = 1.0);

  m.def(
      "binarization_loss",
      [](const ArrayD& r) { return binarization_loss(tensor2d_from_array(r, "descriptors")); },
      py::arg("descriptors"));

  m.def(
      "soft_sign",
      [](const ArrayD& r, double eps) {
        return array_from_tensor(soft_sign(tensor2d_from_array(r, "descriptors"), eps));
      },
      py::arg("descriptors"), py::arg("eps") = 1e-5);

  m.def(
      "distill_real",
      [](const ArrayD& dm_teacher, const ArrayD& dm_student, double lambda_real) {
        return distill_real(tensor2d_from_array(dm_teacher, "teacher distances"),
                            tensor2d_from_array(dm_student, "student distances"), lambda_real);
      },
      py::arg("dm_teacher"), py::arg("dm_student"), py::arg("lambda_real") = 0.95);

  m.def(
      "distill_binary",
      [](const ArrayD& bt_anchors, const ArrayD& bt_positives, const ArrayD& bs_anchors,
         const ArrayD& bs_positives, double lambda_bin) {
        return distill_binary(tensor2d_from_array(bt_anchors, "teacher anchors"),
                              tensor2d_from_array(bt_positives, "teacher positives"),
                              tensor2d_from_array(bs_anchors, "student anchors"),
                              tensor2d_from_array(bs_positives, "student positives"), lambda_bin);
      },
      py::arg("bt_anchors"), py::arg("bt_positives"), py::arg("bs_anchors"),
      py::arg("bs_positives"), py::arg("lambda_bin") = 0.5);

  m.def(
      "basic_loss",
      [](const ArrayD& anchors, const ArrayD& positives, const py::dict& config) {
        const LossConfig cfg = loss_config_from_dict(config);
        const LossTerms t = basic_loss(tensor2d_from_array(anchors, "anchors"),
                                       tensor2d_from_array(positives, "positives"), cfg);
        return terms_to_dict(t, cfg);
      },
      py::arg("anchors"), py::arg("positives"), py::arg("config") = py::dict());

  m.def(
      "train_loss",
      [](const ArrayD& teacher_anchors, const ArrayD& teacher_positives,
         const ArrayD& student_anchors, const ArrayD& student_positives, const py::dict& config) {
        const LossConfig cfg = loss_config_from_dict(config);
        const LossTerms t = train_loss(tensor2d_from_array(teacher_anchors, "teacher anchors"),
                                       tensor2d_from_array(teacher_positives, "teacher positives"),
                                       tensor2d_from_array(student_anchors, "student anchors"),
                                       tensor2d_from_array(student_positives, "student positives"),
                                       cfg);
        return terms_to_dict(t, cfg);
      },
      py::arg("teacher_anchors"), py::arg("teacher_positives"), py::arg("student_anchors"),
      py::arg("student_positives"), py::arg("config") = py::dict());

  // ---- networks ----
  py::class_<PyNetwork>(m, "Network")
      .def_property_readonly("arch", [](const PyNetwork& n) { return n.net.arch; })
      .def_property_readonly("output_dim", [](const PyNetwork& n) { return n.net.output_dim; })
      .def("param_count", [](PyNetwork& n) { return n.net.param_count(); })
      .def("layer_kinds",
           [](const PyNetwork& n) {
             std::vector<std::string> kinds;
             for (const auto& li : n.net.layer_infos()) kinds.push_back(li.kind);
             return kinds;
           })
      .def("describe", &PyNetwork::describe_patches, py::arg("patches"),
           py::arg("standardize") = false,
           "Descriptors for [N,32,32] or [N,1,32,32] float patches; set standardize=True "
           "for raw (non-standardized) inputs")
      .def("save",
           [](PyNetwork& n, const std::string& path) { save_checkpoint(n.net, n.meta, path); })
      .def("param_hash", [](PyNetwork& n) { return param_hash(n.net); });

  m.def("build_teacher", [](std::uint64_t seed) {
    return PyNetwork{build_teacher(seed), {}};
  }, py::arg("seed") = 1);
  m.def("build_student", [](std::uint64_t seed) {
    return PyNetwork{build_student(seed), {}};
  }, py::arg("seed") = 1);
  m.def("load_network", [](const std::string& path) {
    auto loaded = load_checkpoint(path);
    return PyNetwork{std::move(loaded.net), std::move(loaded.meta)};
  }, py::arg("path"));

  // ---- binary descriptors ----
  m.def(
      "binarize_pack",
      [](const ArrayF& descriptors) {
        Tensor<float> t = tensor2d_from_array(descriptors, "descriptors");
        const auto packed = binarize_batch(t);
        const py::ssize_t row = static_cast<py::ssize_t>(packed.front().bits.size());
        py::array_t<std::uint8_t> out({static_cast<py::ssize_t>(packed.size()), row});
        auto* dst = out.mutable_data();
        for (const auto& d : packed) dst = std::copy(d.bits.begin(), d.bits.end(), dst);
        return out;
      },
      py::arg("descriptors"),
      "Hard-binarize [N,D] rows (sign(0) = -1) and pack MSB-first into [N, D/8] bytes");

  m.def(
      "hamming",
      [](py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> a,
         py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> b, int dim) {
        require<ShapeError>(a.ndim() == 1 && b.ndim() == 1, "hamming: expected packed 1-D rows");
        DescriptorBinary da, db;
        da.dim = db.dim = dim;
        da.bits.assign(a.data(), a.data() + a.size());
        db.bits.assign(b.data(), b.data() + b.size());
        return hamming(da, db);
      },
      py::arg("a"), py::arg("b"), py::arg("dim"));

  m.def("eval_fpr95", &eval_fpr95, py::arg("pos_distances"), py::arg("neg_distances"),
        "False positive rate at the smallest threshold reaching 95% recall");

  // ---- training ----
  m.def(
      "train_teacher",
      [](const std::string& store_dir, const std::string& out_dir, const py::dict& config) {
        const PatchStore store = load_ubc(store_dir);
        const TrainConfig cfg = train_config_from_dict(config, "teacher");
        TrainResult result = train_teacher(store, cfg);
        save_train_result(result, out_dir);
        py::dict d;
        d["checkpoint"] = out_dir + "/teacher.ckpt";
        d["steps"] = result.log.records.size();
        d["final_loss"] = result.log.records.empty() ? 0.0 : result.log.records.back().total;
        d["wall_seconds"] = result.log.wall_seconds;
        d["params"] = result.net.param_count();
        return d;
      },
      py::arg("store_dir"), py::arg("out_dir"), py::arg("config") = py::dict());

  m.def(
      "train_student",
      [](const std::string& store_dir, const std::string& teacher_ckpt,
         const std::string& out_dir, const py::dict& config) {
        const PatchStore store = load_ubc(store_dir);
        const TrainConfig cfg = train_config_from_dict(config, "student");
        TrainResult result;
        if (teacher_ckpt.empty()) {
          result = train_student(store, nullptr, cfg);
        } else {
          auto teacher = load_checkpoint(teacher_ckpt);
          result = train_student(store, &teacher.net, cfg);
        }
        save_train_result(result, out_dir);
        py::dict d;
        d["checkpoint"] = out_dir + "/student.ckpt";
        d["steps"] = result.log.records.size();
        d["final_loss"] = result.log.records.empty() ? 0.0 : result.log.records.back().total;
        d["wall_seconds"] = result.log.wall_seconds;
        d["params"] = result.net.param_count();
        return d;
      },
      py::arg("store_dir"), py::arg("teacher_checkpoint"), py::arg("out_dir"),
      py::arg("config") = py::dict());

  // ---- evaluation / profiling ----
  m.def(
      "benchmark_pairs",
      [](const std::string& checkpoint, const std::string& store_dir, int pairs,
         std::uint64_t seed) {
        auto loaded = load_checkpoint(checkpoint);
        const PatchStore store = load_ubc(store_dir);
        const BenchmarkResult r = benchmark_pairs(loaded.net, store, pairs, seed);
        py::dict d;
        d["fpr95_real"] = r.fpr95_real;
        d["fpr95_binary"] = r.fpr95_binary;
        d["num_pairs"] = r.pairs.size();
        return d;
      },
      py::arg("checkpoint"), py::arg("store_dir"), py::arg("pairs") = 2000, py::arg("seed") = 1);

  m.def(
      "profile",
      [](std::uint64_t seed, int runs, int batch) {
        Network teacher = build_teacher(seed);
        Network student = build_student(seed);
        const ProfileResult tp = profile_network(teacher, runs, batch, seed);
        const ProfileResult sp = profile_network(student, runs, batch, seed);
        py::dict d;
        d["teacher_params"] = tp.params;
        d["student_params"] = sp.params;
        d["teacher_ms"] = tp.ms_per_500_median;
        d["student_ms"] = sp.ms_per_500_median;
        return d;
      },
      py::arg("seed") = 1234, py::arg("runs") = 5, py::arg("batch") = 500);

  // ---- simulator ----
  m.def(
      "simulate",
      [](const std::string& scenario_path, int hamming_threshold, int min_matches) {
        const sim::Scenario scenario = sim::load_scenario(scenario_path);
        sim::MatcherConfig matcher{hamming_threshold, min_matches};
        return report_to_dict(sim::run(scenario, matcher));
      },
      py::arg("scenario_path"), py::arg("hamming_threshold") = 16, py::arg("min_matches") = 12);

  m.def(
      "encode_keyframe",
      [](int robot_id, std::uint32_t kf_id, double timestamp, const std::vector<float>& pose,
         py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> descriptors,
         const ArrayF& uv, int dim) {
        require<ShapeError>(pose.size() == 7, "pose must have 7 floats (xyz + quaternion)");
        require<ShapeError>(descriptors.ndim() == 2 && uv.ndim() == 2 && uv.shape(1) == 2 &&
                                uv.shape(0) == descriptors.shape(0),
                            "descriptors must be [K,D/8] with matching [K,2] pixel coordinates");
        sim::KeyframeMessage msg;
        msg.robot_id = static_cast<std::uint8_t>(robot_id);
        msg.kf_id = kf_id;
        msg.timestamp = timestamp;
        std::copy(pose.begin(), pose.end(), msg.pose.begin());
        msg.keypoints.resize(static_cast<std::size_t>(descriptors.shape(0)));
        for (py::ssize_t k = 0; k < descriptors.shape(0); ++k) {
          auto& kp = msg.keypoints[static_cast<std::size_t>(k)];
          kp.u = uv.at(k, 0);
          kp.v = uv.at(k, 1);
          kp.descriptor.dim = dim;
          kp.descriptor.bits.assign(descriptors.data(k, 0),
                                    descriptors.data(k, 0) + descriptors.shape(1));
        }
        const auto bytes = sim::encode_keyframe(msg);
        return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
      },
      py::arg("robot_id"), py::arg("kf_id"), py::arg("timestamp"), py::arg("pose"),
      py::arg("descriptors"), py::arg("uv"), py::arg("dim"));

  m.def(
      "decode_keyframe",
      [](const py::bytes& data, int dim) {
        const std::string s = data;
        const sim::KeyframeMessage msg = sim::decode_keyframe(
            std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(s.data()),
                                          s.size()),
            dim);
        py::dict d;
        d["robot_id"] = msg.robot_id;
        d["kf_id"] = msg.kf_id;
        d["timestamp"] = msg.timestamp;
        d["pose"] = std::vector<float>(msg.pose.begin(), msg.pose.end());
        const py::ssize_t k = static_cast<py::ssize_t>(msg.keypoints.size());
        const py::ssize_t row = dim / 8;
        py::array_t<std::uint8_t> descs({k, row});
        py::array_t<float> uv({k, static_cast<py::ssize_t>(2)});
        for (py::ssize_t i = 0; i < k; ++i) {
          const auto& kp = msg.keypoints[static_cast<std::size_t>(i)];
          std::copy(kp.descriptor.bits.begin(), kp.descriptor.bits.end(),
                    descs.mutable_data(i, 0));
          uv.mutable_at(i, 0) = kp.u;
          uv.mutable_at(i, 1) = kp.v;
        }
        d["descriptors"] = descs;
        d["uv"] = uv;
        return d;
      },
      py::arg("data"), py::arg("dim"));

  m.def("encoded_size", &sim::encoded_size, py::arg("keypoints"), py::arg("descriptor_dim"),
        "Exact wire size in bytes of a keyframe message");
}
