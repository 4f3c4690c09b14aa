#pragma once

#include <optional>
#include <string>
#include <vector>

#include "advlab/model.hpp"

namespace advlab {

// Snapshot of the best epoch seen so far, tracked by robust accuracy.
struct BestState {
  int epoch = 0;
  double clean_acc = 0.0;
  double robust_acc = 0.0;
  ParamVector params;
};

// Everything needed to either deploy a model or resume training bit-exactly.
// Binary layout: magic "ADVL", little-endian u16 version, little-endian u32
// header length, JSON header (model spec, parameter layout, block list,
// epoch counters), then the listed blocks as little-endian f64 arrays.
struct Checkpoint {
  MlpSpec model_spec;
  ParamVector params;
  std::optional<std::vector<double>> velocity;  // optimizer momentum buffers
  std::optional<BestState> best;
  int epoch = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace advlab
