#include "advlab/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "advlab/error.hpp"

namespace advlab {

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  out += "]";
  return out;
}

long long shape_numel(const Shape& s) {
  long long n = 1;
  for (int d : s) n *= d;
  return n;
}

namespace {

void check_shape_valid(const Shape& s) {
  for (int d : s) {
    if (d <= 0) throw ShapeError("dimension sizes must be positive, got " + shape_str(s));
  }
}

std::atomic<std::uint64_t> g_tape_serial{1};
thread_local Tape* g_active_tape = nullptr;

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  check_shape_valid(shape_);
  data_.assign(static_cast<size_t>(shape_numel(shape_)), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape_valid(shape_);
  if (shape_numel(shape_) != static_cast<long long>(data_.size())) {
    throw ShapeError("data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_str(shape_));
  }
}

Tensor Tensor::scalar(double v) { return Tensor(Shape{1}, std::vector<double>{v}); }

double Tensor::item() const {
  if (data_.size() != 1) {
    throw UsageError("item: tensor has " + std::to_string(data_.size()) +
                     " elements, expected exactly 1");
  }
  return data_[0];
}

const std::vector<double>& Tensor::grad() const {
  if (!grad_) throw UsageError("grad: tensor has no gradient buffer; watch it on a tape and run backward()");
  return *grad_;
}

Tape::Tape() {
  if (g_active_tape) throw UsageError("a tape is already active in this thread");
  serial_ = g_tape_serial.fetch_add(1, std::memory_order_relaxed);
  g_active_tape = this;
}

Tape::~Tape() { g_active_tape = nullptr; }

Tape* Tape::active() { return g_active_tape; }

// Shared internals of the operator implementations below.
class TapeOps {
 public:
  static bool on_tape(const Tape* t, const Tensor& x) {
    return t != nullptr && x.node_ >= 0 && x.tape_serial_ == t->serial_;
  }

  // Gradient buffer of x if x lives on the active tape, else null.
  static std::shared_ptr<std::vector<double>> grad_of(const Tape* t, const Tensor& x) {
    return on_tape(t, x) ? x.grad_ : nullptr;
  }

  static void bind(Tape* t, Tensor& out,
                   std::function<void(const std::vector<double>&)> back) {
    out.grad_ = std::make_shared<std::vector<double>>(out.data().size(), 0.0);
    out.tape_serial_ = t->serial_;
    out.node_ = static_cast<int>(t->nodes_.size());
    t->nodes_.push_back(Tape::Node{out.grad_, std::move(back)});
  }

  static void watch(Tape* t, Tensor& x) {
    if (on_tape(t, x)) return;
    x.grad_ = std::make_shared<std::vector<double>>(x.data().size(), 0.0);
    x.tape_serial_ = t->serial_;
    x.node_ = static_cast<int>(t->nodes_.size());
    t->nodes_.push_back(Tape::Node{x.grad_, nullptr});
  }
};

void Tape::watch(Tensor& t) { TapeOps::watch(this, t); }

void Tape::run_backward(const Tensor& loss) {
  (*nodes_[static_cast<size_t>(loss.node_)].grad)[0] = 1.0;
  for (int k = loss.node_; k >= 0; --k) {
    auto& node = nodes_[static_cast<size_t>(k)];
    if (node.back) node.back(*node.grad);
  }
  backward_done_ = true;
}

void backward(const Tensor& loss) {
  Tape* t = Tape::active();
  if (!t) throw UsageError("backward: no active tape");
  if (!TapeOps::on_tape(t, loss)) {
    throw UsageError("backward: loss was not recorded on the active tape");
  }
  if (loss.size() != 1) {
    throw UsageError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
  }
  if (t->backward_done_) {
    throw UsageError("backward: tape already differentiated; create a new tape");
  }
  t->run_backward(loss);
}

namespace {

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch: " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
}

using GradBuf = std::shared_ptr<std::vector<double>>;

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  Tensor out(a.shape());
  auto& o = out.data();
  for (size_t i = 0; i < o.size(); ++i) o[i] = a.data()[i] + b.data()[i];
  Tape* t = Tape::active();
  GradBuf ga = TapeOps::grad_of(t, a), gb = TapeOps::grad_of(t, b);
  if (t && (ga || gb)) {
    TapeOps::bind(t, out, [ga, gb](const std::vector<double>& up) {
      if (ga) for (size_t i = 0; i < up.size(); ++i) (*ga)[i] += up[i];
      if (gb) for (size_t i = 0; i < up.size(); ++i) (*gb)[i] += up[i];
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  Tensor out(a.shape());
  auto& o = out.data();
  for (size_t i = 0; i < o.size(); ++i) o[i] = a.data()[i] - b.data()[i];
  Tape* t = Tape::active();
  GradBuf ga = TapeOps::grad_of(t, a), gb = TapeOps::grad_of(t, b);
  if (t && (ga || gb)) {
    TapeOps::bind(t, out, [ga, gb](const std::vector<double>& up) {
      if (ga) for (size_t i = 0; i < up.size(); ++i) (*ga)[i] += up[i];
      if (gb) for (size_t i = 0; i < up.size(); ++i) (*gb)[i] -= up[i];
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  Tensor out(a.shape());
  auto& o = out.data();
  for (size_t i = 0; i < o.size(); ++i) o[i] = a.data()[i] * b.data()[i];
  Tape* t = Tape::active();
  GradBuf ga = TapeOps::grad_of(t, a), gb = TapeOps::grad_of(t, b);
  if (t && (ga || gb)) {
    // Saved input values; the closure owns its own copies.
    std::vector<double> av = a.data(), bv = b.data();
    TapeOps::bind(t, out, [ga, gb, av = std::move(av), bv = std::move(bv)](
                              const std::vector<double>& up) {
      if (ga) for (size_t i = 0; i < up.size(); ++i) (*ga)[i] += up[i] * bv[i];
      if (gb) for (size_t i = 0; i < up.size(); ++i) (*gb)[i] += up[i] * av[i];
    });
  }
  return out;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out(a.shape());
  auto& o = out.data();
  for (size_t i = 0; i < o.size(); ++i) o[i] = c * a.data()[i];
  Tape* t = Tape::active();
  GradBuf ga = TapeOps::grad_of(t, a);
  if (t && ga) {
    TapeOps::bind(t, out, [ga, c](const std::vector<double>& up) {
      for (size_t i = 0; i < up.size(); ++i) (*ga)[i] += c * up[i];
    });
  }
  return out;
}

Tensor relu(const Tensor& a) {
  Tensor out(a.shape());
  auto& o = out.data();
  for (size_t i = 0; i < o.size(); ++i) o[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
  Tape* t = Tape::active();
  GradBuf ga = TapeOps::grad_of(t, a);
  if (t && ga) {
    std::vector<double> av = a.data();
    TapeOps::bind(t, out, [ga, av = std::move(av)](const std::vector<double>& up) {
      for (size_t i = 0; i < up.size(); ++i) {
        if (av[i] > 0.0) (*ga)[i] += up[i];
      }
    });
  }
  return out;
}

Tensor tanh(const Tensor& a) {
  Tensor out(a.shape());
  auto& o = out.data();
  for (size_t i = 0; i < o.size(); ++i) o[i] = std::tanh(a.data()[i]);
  Tape* t = Tape::active();
  GradBuf ga = TapeOps::grad_of(t, a);
  if (t && ga) {
    std::vector<double> yv = out.data();
    TapeOps::bind(t, out, [ga, yv = std::move(yv)](const std::vector<double>& up) {
      for (size_t i = 0; i < up.size(); ++i) (*ga)[i] += up[i] * (1.0 - yv[i] * yv[i]);
    });
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError("matmul: operands must be rank-2, got " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()));
  }
  const int m = a.shape()[0], k = a.shape()[1], k2 = b.shape()[0], n = b.shape()[1];
  if (k != k2) {
    throw ShapeError("matmul: inner dimensions differ: " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
  Tensor out(Shape{m, n});
  auto& o = out.data();
  const auto& av = a.data();
  const auto& bv = b.data();
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int x = 0; x < k; ++x) acc += av[i * k + x] * bv[x * n + j];
      o[i * n + j] = acc;
    }
  }
  Tape* t = Tape::active();
  GradBuf ga = TapeOps::grad_of(t, a), gb = TapeOps::grad_of(t, b);
  if (t && (ga || gb)) {
    std::vector<double> as = av, bs = bv;
    TapeOps::bind(t, out, [ga, gb, as = std::move(as), bs = std::move(bs), m, k, n](
                              const std::vector<double>& up) {
      if (ga) {
        // dA = G * B^T
        for (int i = 0; i < m; ++i) {
          for (int x = 0; x < k; ++x) {
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += up[i * n + j] * bs[x * n + j];
            (*ga)[i * k + x] += acc;
          }
        }
      }
      if (gb) {
        // dB = A^T * G
        for (int x = 0; x < k; ++x) {
          for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int i = 0; i < m; ++i) acc += as[i * k + x] * up[i * n + j];
            (*gb)[x * n + j] += acc;
          }
        }
      }
    });
  }
  return out;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (x.rank() != 2) {
    throw ShapeError("add_bias: x must be rank-2, got " + shape_str(x.shape()));
  }
  if (bias.rank() != 1 || bias.shape()[0] != x.shape()[1]) {
    throw ShapeError("add_bias: bias shape " + shape_str(bias.shape()) +
                     " does not match columns of " + shape_str(x.shape()));
  }
  const int rows = x.shape()[0], cols = x.shape()[1];
  Tensor out(x.shape());
  auto& o = out.data();
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) o[i * cols + j] = x.data()[i * cols + j] + bias.data()[j];
  }
  Tape* t = Tape::active();
  GradBuf gx = TapeOps::grad_of(t, x), gb = TapeOps::grad_of(t, bias);
  if (t && (gx || gb)) {
    TapeOps::bind(t, out, [gx, gb, rows, cols](const std::vector<double>& up) {
      if (gx) for (size_t i = 0; i < up.size(); ++i) (*gx)[i] += up[i];
      if (gb) {
        for (int j = 0; j < cols; ++j) {
          double acc = 0.0;
          for (int i = 0; i < rows; ++i) acc += up[i * cols + j];
          (*gb)[j] += acc;
        }
      }
    });
  }
  return out;
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  Tensor out = Tensor::scalar(acc);
  Tape* t = Tape::active();
  GradBuf ga = TapeOps::grad_of(t, a);
  if (t && ga) {
    TapeOps::bind(t, out, [ga](const std::vector<double>& up) {
      for (auto& g : *ga) g += up[0];
    });
  }
  return out;
}

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                             Reduction reduction) {
  if (logits.rank() != 2) {
    throw ShapeError("softmax_cross_entropy: logits must be rank-2, got " +
                     shape_str(logits.shape()));
  }
  const int B = logits.shape()[0], C = logits.shape()[1];
  if (static_cast<int>(labels.size()) != B) {
    throw ShapeError("softmax_cross_entropy: got " + std::to_string(labels.size()) +
                     " labels for batch size " + std::to_string(B));
  }
  for (int b = 0; b < B; ++b) {
    if (labels[b] < 0 || labels[b] >= C) {
      throw DomainError("softmax_cross_entropy: label " + std::to_string(labels[b]) +
                        " out of range [0," + std::to_string(C) + ") at row " +
                        std::to_string(b));
    }
  }
  std::vector<double> probs(static_cast<size_t>(B) * C);
  double total = 0.0;
  const auto& z = logits.data();
  for (int b = 0; b < B; ++b) {
    const double* row = &z[static_cast<size_t>(b) * C];
    double m = row[0];
    for (int j = 1; j < C; ++j) m = std::max(m, row[j]);
    double s = 0.0;
    for (int j = 0; j < C; ++j) {
      const double e = std::exp(row[j] - m);
      probs[static_cast<size_t>(b) * C + j] = e;
      s += e;
    }
    for (int j = 0; j < C; ++j) probs[static_cast<size_t>(b) * C + j] /= s;
    total += std::log(s) - (row[labels[b]] - m);
  }
  const double denom = reduction == Reduction::mean ? static_cast<double>(B) : 1.0;
  Tensor out = Tensor::scalar(total / denom);
  Tape* t = Tape::active();
  GradBuf gl = TapeOps::grad_of(t, logits);
  if (t && gl) {
    TapeOps::bind(t, out, [gl, probs = std::move(probs), labels, B, C, denom](
                              const std::vector<double>& up) {
      for (int b = 0; b < B; ++b) {
        for (int j = 0; j < C; ++j) {
          const double onehot = j == labels[b] ? 1.0 : 0.0;
          (*gl)[static_cast<size_t>(b) * C + j] +=
              up[0] * (probs[static_cast<size_t>(b) * C + j] - onehot) / denom;
        }
      }
    });
  }
  return out;
}

Tensor l2_norm(const Tensor& v) {
  double sq = 0.0;
  for (double x : v.data()) sq += x * x;
  const double n = std::sqrt(sq);
  Tensor out = Tensor::scalar(n);
  Tape* t = Tape::active();
  GradBuf gv = TapeOps::grad_of(t, v);
  if (t && gv) {
    std::vector<double> xv = v.data();
    TapeOps::bind(t, out, [gv, xv = std::move(xv), n](const std::vector<double>& up) {
      if (n == 0.0) return;  // gradient defined as 0 at the origin
      for (size_t i = 0; i < xv.size(); ++i) (*gv)[i] += up[0] * xv[i] / n;
    });
  }
  return out;
}

Tensor row_normalize(const Tensor& x) {
  if (x.rank() != 2) {
    throw ShapeError("row_normalize: x must be rank-2, got " + shape_str(x.shape()));
  }
  const int B = x.shape()[0], C = x.shape()[1];
  Tensor out(x.shape());
  auto& o = out.data();
  std::vector<double> rs(static_cast<size_t>(B));
  std::vector<char> guarded(static_cast<size_t>(B));
  for (int b = 0; b < B; ++b) {
    double sq = 0.0;
    for (int j = 0; j < C; ++j) {
      const double v = x.data()[static_cast<size_t>(b) * C + j];
      sq += v * v;
    }
    const double n = std::sqrt(sq);
    guarded[static_cast<size_t>(b)] = n < kNormGuard ? 1 : 0;
    const double r = guarded[static_cast<size_t>(b)] ? kNormGuard : n;
    rs[static_cast<size_t>(b)] = r;
    for (int j = 0; j < C; ++j) {
      o[static_cast<size_t>(b) * C + j] = x.data()[static_cast<size_t>(b) * C + j] / r;
    }
  }
  Tape* t = Tape::active();
  GradBuf gx = TapeOps::grad_of(t, x);
  if (t && gx) {
    std::vector<double> yv = out.data();
    TapeOps::bind(t, out, [gx, yv = std::move(yv), rs = std::move(rs),
                           guarded = std::move(guarded), B, C](const std::vector<double>& up) {
      for (int b = 0; b < B; ++b) {
        const size_t off = static_cast<size_t>(b) * C;
        const double r = rs[static_cast<size_t>(b)];
        if (guarded[static_cast<size_t>(b)]) {
          // Below the guard the denominator is the constant kNormGuard.
          for (int j = 0; j < C; ++j) (*gx)[off + j] += up[off + j] / r;
          continue;
        }
        double dot = 0.0;
        for (int j = 0; j < C; ++j) dot += up[off + j] * yv[off + j];
        for (int j = 0; j < C; ++j) {
          (*gx)[off + j] += (up[off + j] - yv[off + j] * dot) / r;
        }
      }
    });
  }
  return out;
}

std::vector<double> softmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) {
    throw ShapeError("softmax_rows: logits must be rank-2, got " + shape_str(logits.shape()));
  }
  const int B = logits.shape()[0], C = logits.shape()[1];
  std::vector<double> p(static_cast<size_t>(B) * C);
  for (int b = 0; b < B; ++b) {
    const double* row = &logits.data()[static_cast<size_t>(b) * C];
    double m = row[0];
    for (int j = 1; j < C; ++j) m = std::max(m, row[j]);
    double s = 0.0;
    for (int j = 0; j < C; ++j) {
      const double e = std::exp(row[j] - m);
      p[static_cast<size_t>(b) * C + j] = e;
      s += e;
    }
    for (int j = 0; j < C; ++j) p[static_cast<size_t>(b) * C + j] /= s;
  }
  return p;
}

std::vector<int> argmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) {
    throw ShapeError("argmax_rows: logits must be rank-2, got " + shape_str(logits.shape()));
  }
  const int B = logits.shape()[0], C = logits.shape()[1];
  std::vector<int> out(static_cast<size_t>(B));
  for (int b = 0; b < B; ++b) {
    const double* row = &logits.data()[static_cast<size_t>(b) * C];
    int best = 0;
    for (int j = 1; j < C; ++j) {
      if (row[j] > row[best]) best = j;
    }
    out[static_cast<size_t>(b)] = best;
  }
  return out;
}

}  // namespace advlab
