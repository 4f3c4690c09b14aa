#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace advlab {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
long long shape_numel(const Shape& s);

// Guard for norm denominators (row_normalize, momentum normalization).
inline constexpr double kNormGuard = 1e-12;

class Tape;
class TapeOps;

// Dense row-major tensor of 64-bit floats. Plain value type: copying copies
// the data. While a Tape is active, results of operations on watched tensors
// carry a handle to their tape node; copies share that node's gradient
// buffer, so a watched parameter still sees its gradient after backward().
// Handles are keyed by a globally unique tape serial, so tensors left over
// from a destroyed tape silently degrade to constants.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);
  static Tensor scalar(double v);

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  long long size() const { return static_cast<long long>(data_.size()); }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  // Value of a one-element tensor.
  double item() const;

  bool has_grad() const { return grad_ != nullptr; }
  const std::vector<double>& grad() const;

 private:
  friend class Tape;
  friend class TapeOps;
  Shape shape_;
  std::vector<double> data_;
  std::shared_ptr<std::vector<double>> grad_;
  std::uint64_t tape_serial_ = 0;
  int node_ = -1;
};

// Records operations applied to watched tensors so backward() can traverse
// them in reverse. Constructing a Tape makes it the active tape of the
// current thread; at most one tape per thread may be active at a time.
// Each tape supports exactly one backward() pass.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  // Registers a leaf whose gradient buffer backward() populates.
  // Watching a tensor that is already on this tape is a no-op.
  void watch(Tensor& t);

 private:
  friend class TapeOps;
  friend void backward(const Tensor& loss);

  struct Node {
    std::shared_ptr<std::vector<double>> grad;
    // Accumulates into the gradients of this node's inputs; empty for leaves.
    std::function<void(const std::vector<double>& upstream)> back;
  };

  void run_backward(const Tensor& loss);

  std::vector<Node> nodes_;
  std::uint64_t serial_ = 0;
  bool backward_done_ = false;
};

// ---- differentiable operations -------------------------------------------
// All operations run eagerly on the values and, when a tape is active and at
// least one input lives on it, record a backward closure. Without an active
// tape they are plain forward computations.

Tensor matmul(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

// relu uses the subgradient 0 at the kink: relu'(0) == 0.
Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);

// x is [B x n], bias is [n]; the bias row is added to every row of x.
Tensor add_bias(const Tensor& x, const Tensor& bias);

Tensor sum(const Tensor& a);

enum class Reduction { mean, sum };

// Numerically stabilized (max-subtracted) softmax cross entropy over rows of
// logits [B x C] against integer labels in [0, C).
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                             Reduction reduction = Reduction::mean);

// Euclidean norm of all elements; the gradient at the origin is defined as 0.
Tensor l2_norm(const Tensor& v);

// Divides each row of x [B x C] by max(row l2 norm, kNormGuard).
Tensor row_normalize(const Tensor& x);

// Runs reverse-mode accumulation from a scalar recorded on the active tape.
void backward(const Tensor& loss);

// ---- tape-free utilities ---------------------------------------------------

// Row-wise stabilized softmax probabilities of logits [B x C].
std::vector<double> softmax_rows(const Tensor& logits);

// Row-wise argmax; ties resolve to the lowest index.
std::vector<int> argmax_rows(const Tensor& logits);

}  // namespace advlab
