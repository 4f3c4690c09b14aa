#include "advlab/model.hpp"

#include <algorithm>
#include <cmath>

#include "advlab/error.hpp"
#include "advlab/rng.hpp"

namespace advlab {

std::string activation_to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  throw UsageError("unknown activation enum value");
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + s + "'; expected relu or tanh");
}

void MlpSpec::validate() const {
  if (input_dim <= 0) throw ConfigError("model.input_dim must be positive, got " + std::to_string(input_dim));
  if (output_dim <= 0) throw ConfigError("model.output_dim must be positive, got " + std::to_string(output_dim));
  for (size_t i = 0; i < hidden_dims.size(); ++i) {
    if (hidden_dims[i] <= 0) {
      throw ConfigError("model.hidden_dims[" + std::to_string(i) + "] must be positive, got " +
                        std::to_string(hidden_dims[i]));
    }
  }
}

namespace {

std::vector<std::pair<int, int>> layer_dims(const MlpSpec& spec) {
  std::vector<std::pair<int, int>> dims;
  int in = spec.input_dim;
  for (int h : spec.hidden_dims) {
    dims.emplace_back(in, h);
    in = h;
  }
  dims.emplace_back(in, spec.output_dim);
  return dims;
}

}  // namespace

Model::Model(MlpSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  spec_.validate();
  Rng rng(seed);
  for (auto [in, out] : layer_dims(spec_)) {
    const double bound = std::sqrt(6.0 / (in + out));
    std::vector<double> w(static_cast<size_t>(in) * out);
    for (auto& v : w) v = rng.uniform(-bound, bound);
    layers_.push_back(Layer{Tensor(Shape{in, out}, std::move(w)), Tensor(Shape{out})});
  }
}

void Model::watch_params(Tape& tape) {
  for (auto& layer : layers_) {
    tape.watch(layer.weight);
    tape.watch(layer.bias);
  }
}

Tensor Model::forward(const Tensor& x) const {
  if (x.rank() != 2 || x.shape()[1] != spec_.input_dim) {
    throw ShapeError("forward: expected input [B," + std::to_string(spec_.input_dim) +
                     "], got " + shape_str(x.shape()));
  }
  Tensor h = x;
  for (size_t l = 0; l < layers_.size(); ++l) {
    h = add_bias(matmul(h, layers_[l].weight), layers_[l].bias);
    if (l + 1 < layers_.size()) {
      h = spec_.activation == Activation::relu ? relu(h) : advlab::tanh(h);
    }
  }
  return h;
}

ParamVector Model::params() const {
  ParamVector p;
  for (size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    p.layout.push_back({"layer" + std::to_string(l) + ".weight", layer.weight.shape()});
    p.values.insert(p.values.end(), layer.weight.data().begin(), layer.weight.data().end());
    p.layout.push_back({"layer" + std::to_string(l) + ".bias", layer.bias.shape()});
    p.values.insert(p.values.end(), layer.bias.data().begin(), layer.bias.data().end());
  }
  return p;
}

void Model::set_params(const ParamVector& p) {
  const ParamVector own = params();
  if (!own.layout_compatible(p)) {
    const size_t n = std::min(own.layout.size(), p.layout.size());
    for (size_t i = 0; i < n; ++i) {
      if (!(own.layout[i] == p.layout[i])) {
        throw CompatError("param layout mismatch at index " + std::to_string(i) +
                          ": expected " + own.layout[i].name + shape_str(own.layout[i].shape) +
                          ", got " + p.layout[i].name + shape_str(p.layout[i].shape));
      }
    }
    throw CompatError("param layout mismatch: expected " + std::to_string(own.layout.size()) +
                      " entries, got " + std::to_string(p.layout.size()));
  }
  long long expect = 0;
  for (const auto& d : p.layout) expect += shape_numel(d.shape);
  if (expect != static_cast<long long>(p.values.size())) {
    throw CompatError("param vector holds " + std::to_string(p.values.size()) +
                      " values but its layout describes " + std::to_string(expect));
  }
  size_t off = 0;
  for (auto& layer : layers_) {
    const size_t wn = layer.weight.data().size();
    layer.weight = Tensor(layer.weight.shape(),
                          std::vector<double>(p.values.begin() + off, p.values.begin() + off + wn));
    off += wn;
    const size_t bn = layer.bias.data().size();
    layer.bias = Tensor(layer.bias.shape(),
                        std::vector<double>(p.values.begin() + off, p.values.begin() + off + bn));
    off += bn;
  }
}

std::vector<double> Model::flat_grads() const {
  std::vector<double> g;
  g.reserve(static_cast<size_t>(param_count()));
  for (const auto& layer : layers_) {
    for (const Tensor* t : {&layer.weight, &layer.bias}) {
      if (!t->has_grad()) {
        throw UsageError("flat_grads: parameter gradients not populated; "
                         "watch_params() and backward() must run first");
      }
      g.insert(g.end(), t->grad().begin(), t->grad().end());
    }
  }
  return g;
}

int Model::param_count() const {
  int n = 0;
  for (const auto& layer : layers_) {
    n += static_cast<int>(layer.weight.data().size() + layer.bias.data().size());
  }
  return n;
}

}  // namespace advlab
