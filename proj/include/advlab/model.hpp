#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "advlab/tensor.hpp"

namespace advlab {

enum class Activation { relu, tanh };

std::string activation_to_string(Activation a);
Activation activation_from_string(const std::string& s);

// Fully connected architecture description. hidden_dims may be empty, which
// yields a single linear layer (useful for analytically solvable setups).
struct MlpSpec {
  int input_dim = 3;
  std::vector<int> hidden_dims{16};
  int output_dim = 2;
  Activation activation = Activation::tanh;

  void validate() const;
  bool operator==(const MlpSpec&) const = default;
};

struct ParamDesc {
  std::string name;
  Shape shape;
  bool operator==(const ParamDesc&) const = default;
};

// Flat view of all parameters, paired with the layout that gives each slice
// a name and shape. Two vectors are compatible when their layouts match
// exactly, element by element.
struct ParamVector {
  std::vector<double> values;
  std::vector<ParamDesc> layout;

  bool layout_compatible(const ParamVector& other) const { return layout == other.layout; }
};

// Multilayer perceptron over row-major batches. Parameters are owned as
// tensors; forward() never mutates them, so a const Model is safe to share
// across threads that each run their own tape.
class Model {
 public:
  // Initializes weights uniformly in +-sqrt(6 / (fan_in + fan_out)) and all
  // biases to zero, drawing in a fixed order so the result is a pure
  // function of (spec, seed).
  Model(MlpSpec spec, std::uint64_t seed);

  const MlpSpec& spec() const { return spec_; }

  // Registers every parameter as a leaf on the tape.
  void watch_params(Tape& tape);

  // Logits for a batch x [B x input_dim]; records on the active tape.
  Tensor forward(const Tensor& x) const;

  ParamVector params() const;

  // Replaces all parameters. The layout must match this model exactly;
  // the first differing descriptor is reported otherwise. Fresh tensors are
  // installed, so stale tape handles never survive a set_params call.
  void set_params(const ParamVector& p);

  // Concatenated parameter gradients in layout order, after backward().
  std::vector<double> flat_grads() const;

  int param_count() const;

 private:
  struct Layer {
    Tensor weight;  // [in x out]
    Tensor bias;    // [out]
  };
  MlpSpec spec_;
  std::vector<Layer> layers_;
};

}  // namespace advlab
