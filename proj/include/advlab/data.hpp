#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "advlab/rng.hpp"
#include "advlab/tensor.hpp"

namespace advlab {

// Per-feature value bounds. Vectors of length 1 broadcast to every feature.
struct InputBox {
  std::vector<double> lo;
  std::vector<double> hi;

  void validate() const;
  double lo_at(int feature) const { return lo.size() == 1 ? lo[0] : lo[static_cast<size_t>(feature)]; }
  double hi_at(int feature) const { return hi.size() == 1 ? hi[0] : hi[static_cast<size_t>(feature)]; }
};

struct LabeledDataset {
  Tensor features;  // [N x d]
  std::vector<int> labels;
  int num_classes = 0;
  std::optional<InputBox> input_box;

  int size() const { return features.rank() == 2 ? features.shape()[0] : 0; }
  int dim() const { return features.rank() == 2 ? features.shape()[1] : 0; }
};

// Two concentric noisy circles in the (x1, x2) plane plus a third feature
// drawn uniformly from a narrow band. Class i sits at radius rho_i; the
// angle is uniform in [0, 2*pi) and both planar coordinates get independent
// N(0, sigma^2) noise.
struct ToyConfig {
  int n_per_class = 500;
  double sigma = 0.2;
  double rho1 = 0.35;
  double rho2 = 1.0;
  double alpha1 = 0.80;
  double beta1 = 0.85;
  double alpha2 = 0.80;
  double beta2 = 0.85;
  std::uint64_t seed = 1;

  void validate() const;
};

LabeledDataset generate_toy(const ToyConfig& cfg);

// CSV layout: one row per example, d feature columns then an integer label
// column. A single header line is tolerated on load and skipped.
struct CsvSchema {
  std::optional<int> feature_dim;  // enforced when set
};

LabeledDataset load_csv(const std::string& path, const CsvSchema& schema = {});
void save_csv(const LabeledDataset& ds, const std::string& path);

struct Batch {
  Tensor features;
  std::vector<int> labels;
};

// Splits the dataset into batches of batch_size (last one may be short).
// With shuffle the order comes from a Fisher-Yates pass driven by rng, so
// identical rng state yields the identical epoch order.
std::vector<Batch> batches(const LabeledDataset& ds, int batch_size, Rng& rng, bool shuffle);

}  // namespace advlab
