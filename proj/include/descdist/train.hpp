#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "descdist/adam.hpp"
#include "descdist/batch.hpp"
#include "descdist/checkpoint.hpp"
#include "descdist/losses.hpp"
#include "descdist/network.hpp"
#include "descdist/patches.hpp"

namespace descdist {

struct TrainConfig {
  std::string stage = "teacher";  // teacher | student
  int epochs = 20;
  int batch_size = 128;
  double lr = 0.01;
  std::uint64_t seed = 1;
  LossConfig loss;
  double augment_fraction = 0.5;
  int checkpoint_every = 0;        // epochs between intermediate checkpoints; 0 = final only
  std::string checkpoint_dir;      // where intermediate checkpoints go (when cadence > 0)
  std::string teacher_checkpoint;  // required for the student stage

  void validate() const;
};

struct TrainRecord {
  int epoch = 0;
  int iter = 0;  // global optimizer step, monotone
  double total = 0;
  double triplet = 0;
  double binarization = 0;
  double distill_real = 0;
  double distill_bin = 0;
  double grad_norm = 0;
};

struct TrainLog {
  std::vector<TrainRecord> records;
  double wall_seconds = 0;  // reported separately; not part of the CSV so logs stay reproducible

  void save_csv(const std::string& path) const;
  double epoch_mean_total(int epoch) const;
};

struct TrainResult {
  Network net;
  TrainLog log;
  CheckpointMeta meta;
};

// Stage 1: optimizes the teacher architecture under the basic loss
// (triplet + weighted binarization). Deterministic in the seed.
TrainResult train_teacher(const PatchStore& store, const TrainConfig& cfg);

// Stage 2: freezes `teacher` and optimizes the student under
// basic + beta * distillation. `teacher` may be null only when
// cfg.loss.beta_distill == 0, which reduces to a plain basic-loss run.
TrainResult train_student(const PatchStore& store, Network* teacher, const TrainConfig& cfg);

// Writes checkpoint + log.csv under out_dir (names: <stage>.ckpt, log.csv).
void save_train_result(TrainResult& result, const std::string& out_dir);

}  // namespace descdist
