#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <vector>

namespace hlsf::ad {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <typename S>
class Tape;

/// Handle into a tape. Cheap to copy; valid until the tape is cleared.
template <typename S>
struct Var {
  Tape<S>* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Mat<S>& value() const { return tape->value(id); }
  int rows() const { return static_cast<int>(value().rows()); }
  int cols() const { return static_cast<int>(value().cols()); }
};

/// Dynamic computation graph with reverse-mode differentiation. Values are
/// dense matrices; a column dimension > 1 batches independent items
/// through the same operation. Nodes only reference earlier nodes, so the
/// reverse creation order is a valid topological order for the sweep.
template <typename S>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  Tape() { nodes_.reserve(1024); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable leaf (a parameter binding).
  Var<S> leaf(Mat<S> value) { return push(std::move(value), true, nullptr); }

  /// Non-differentiable input.
  Var<S> constant(Mat<S> value) { return push(std::move(value), false, nullptr); }

  Var<S> push(Mat<S> value, bool requires_grad, BackwardFn fn) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Var<S>{this, static_cast<int>(nodes_.size()) - 1};
  }

  const Mat<S>& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

  /// Accumulated gradient of the last backward() w.r.t. node `v`.
  const Mat<S>& grad(const Var<S>& v) {
    Node& n = nodes_[static_cast<std::size_t>(v.id)];
    if (!n.grad_live) {
      n.grad.setZero(n.value.rows(), n.value.cols());
      n.grad_live = true;
    }
    return n.grad;
  }

  /// Gradient sink used by backward functions.
  Mat<S>& grad_ref(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.grad_live) {
      n.grad.setZero(n.value.rows(), n.value.cols());
      n.grad_live = true;
    }
    return n.grad;
  }

  /// Reverse sweep from a scalar root. Gradients from previous sweeps are
  /// cleared first, so one tape can score several objectives in sequence.
  void backward(const Var<S>& root) {
    if (root.tape != this) throw std::invalid_argument("backward: foreign var");
    if (root.value().size() != 1) throw std::invalid_argument("backward: root must be scalar");
    for (auto& n : nodes_) n.grad_live = false;
    grad_ref(root.id)(0, 0) = S(1);
    for (int i = root.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.grad_live && n.requires_grad && n.backward) n.backward(*this, i);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat<S> value;
    Mat<S> grad;
    BackwardFn backward;
    bool requires_grad = false;
    bool grad_live = false;
  };
  std::vector<Node> nodes_;
};

namespace detail {

template <typename S>
Tape<S>& same_tape(const Var<S>& a, const Var<S>& b) {
  if (a.tape != b.tape || a.tape == nullptr) throw std::invalid_argument("vars on different tapes");
  return *a.tape;
}

template <typename S>
void check_same_shape(const Var<S>& a, const Var<S>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace detail

// ---- structural ----

template <typename S>
Var<S> detach(const Var<S>& a) {
  return a.tape->constant(a.value());
}

template <typename S>
Var<S> matmul(const Var<S>& a, const Var<S>& b) {
  Tape<S>& t = detail::same_tape(a, b);
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  Mat<S> v = a.value() * b.value();
  const int ia = a.id, ib = b.id;
  const bool ga = t.requires_grad(ia), gb = t.requires_grad(ib);
  return t.push(std::move(v), ga || gb, [ia, ib, ga, gb](Tape<S>& tp, int self) {
    const Mat<S>& g = tp.grad_ref(self);
    if (ga) tp.grad_ref(ia).noalias() += g * tp.value(ib).transpose();
    if (gb) tp.grad_ref(ib).noalias() += tp.value(ia).transpose() * g;
  });
}

template <typename S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
  Tape<S>& t = detail::same_tape(a, b);
  detail::check_same_shape(a, b, "add");
  const int ia = a.id, ib = b.id;
  const bool ga = t.requires_grad(ia), gb = t.requires_grad(ib);
  return t.push(a.value() + b.value(), ga || gb, [ia, ib, ga, gb](Tape<S>& tp, int self) {
    const Mat<S>& g = tp.grad_ref(self);
    if (ga) tp.grad_ref(ia) += g;
    if (gb) tp.grad_ref(ib) += g;
  });
}

template <typename S>
Var<S> sub(const Var<S>& a, const Var<S>& b) {
  Tape<S>& t = detail::same_tape(a, b);
  detail::check_same_shape(a, b, "sub");
  const int ia = a.id, ib = b.id;
  const bool ga = t.requires_grad(ia), gb = t.requires_grad(ib);
  return t.push(a.value() - b.value(), ga || gb, [ia, ib, ga, gb](Tape<S>& tp, int self) {
    const Mat<S>& g = tp.grad_ref(self);
    if (ga) tp.grad_ref(ia) += g;
    if (gb) tp.grad_ref(ib) -= g;
  });
}

/// x + b replicated over the columns of x; b must be a column vector.
template <typename S>
Var<S> add_bias(const Var<S>& x, const Var<S>& b) {
  Tape<S>& t = detail::same_tape(x, b);
  if (b.cols() != 1 || b.rows() != x.rows()) throw std::invalid_argument("add_bias: bad bias shape");
  Mat<S> v = x.value().colwise() + Eigen::Matrix<S, Eigen::Dynamic, 1>(b.value().col(0));
  const int ix = x.id, ib = b.id;
  const bool gx = t.requires_grad(ix), gb = t.requires_grad(ib);
  return t.push(std::move(v), gx || gb, [ix, ib, gx, gb](Tape<S>& tp, int self) {
    const Mat<S>& g = tp.grad_ref(self);
    if (gx) tp.grad_ref(ix) += g;
    if (gb) tp.grad_ref(ib) += g.rowwise().sum();
  });
}

template <typename S>
Var<S> hadamard(const Var<S>& a, const Var<S>& b) {
  Tape<S>& t = detail::same_tape(a, b);
  detail::check_same_shape(a, b, "hadamard");
  const int ia = a.id, ib = b.id;
  const bool ga = t.requires_grad(ia), gb = t.requires_grad(ib);
  return t.push(a.value().cwiseProduct(b.value()), ga || gb,
                [ia, ib, ga, gb](Tape<S>& tp, int self) {
                  const Mat<S>& g = tp.grad_ref(self);
                  if (ga) tp.grad_ref(ia) += g.cwiseProduct(tp.value(ib));
                  if (gb) tp.grad_ref(ib) += g.cwiseProduct(tp.value(ia));
                });
}

template <typename S>
Var<S> div(const Var<S>& a, const Var<S>& b) {
  Tape<S>& t = detail::same_tape(a, b);
  detail::check_same_shape(a, b, "div");
  const int ia = a.id, ib = b.id;
  const bool ga = t.requires_grad(ia), gb = t.requires_grad(ib);
  return t.push(a.value().cwiseQuotient(b.value()), ga || gb,
                [ia, ib, ga, gb](Tape<S>& tp, int self) {
                  const Mat<S>& g = tp.grad_ref(self);
                  const Mat<S>& bv = tp.value(ib);
                  if (ga) tp.grad_ref(ia) += g.cwiseQuotient(bv);
                  if (gb)
                    tp.grad_ref(ib) -=
                        g.cwiseProduct(tp.value(ia)).cwiseQuotient(bv.cwiseProduct(bv));
                });
}

template <typename S>
Var<S> scale(const Var<S>& a, S k) {
  Tape<S>& t = *a.tape;
  const int ia = a.id;
  return t.push(a.value() * k, t.requires_grad(ia), [ia, k](Tape<S>& tp, int self) {
    tp.grad_ref(ia) += tp.grad_ref(self) * k;
  });
}

template <typename S>
Var<S> add_scalar(const Var<S>& a, S k) {
  Tape<S>& t = *a.tape;
  const int ia = a.id;
  return t.push(a.value().array() + k, t.requires_grad(ia), [ia](Tape<S>& tp, int self) {
    tp.grad_ref(ia) += tp.grad_ref(self);
  });
}

template <typename S>
Var<S> neg(const Var<S>& a) {
  return scale(a, S(-1));
}

/// Stacks parts vertically (same column count).
template <typename S>
Var<S> vcat(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw std::invalid_argument("vcat: no parts");
  Tape<S>& t = *parts.front().tape;
  const int cols = parts.front().cols();
  int rows = 0;
  bool any_grad = false;
  for (const auto& p : parts) {
    if (p.tape != &t) throw std::invalid_argument("vcat: vars on different tapes");
    if (p.cols() != cols) throw std::invalid_argument("vcat: column mismatch");
    rows += p.rows();
    any_grad = any_grad || t.requires_grad(p.id);
  }
  Mat<S> v(rows, cols);
  std::vector<int> ids;
  std::vector<int> offsets;
  int at = 0;
  for (const auto& p : parts) {
    v.middleRows(at, p.rows()) = p.value();
    ids.push_back(p.id);
    offsets.push_back(at);
    at += p.rows();
  }
  return t.push(std::move(v), any_grad,
                [ids = std::move(ids), offsets = std::move(offsets)](Tape<S>& tp, int self) {
                  const Mat<S>& g = tp.grad_ref(self);
                  for (std::size_t i = 0; i < ids.size(); ++i) {
                    if (!tp.requires_grad(ids[i])) continue;
                    const int r = static_cast<int>(tp.value(ids[i]).rows());
                    tp.grad_ref(ids[i]) += g.middleRows(offsets[i], r);
                  }
                });
}

template <typename S>
Var<S> vcat(const Var<S>& a, const Var<S>& b) {
  return vcat(std::vector<Var<S>>{a, b});
}

/// Concatenates parts side by side (same row count).
template <typename S>
Var<S> hcat(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw std::invalid_argument("hcat: no parts");
  Tape<S>& t = *parts.front().tape;
  const int rows_n = parts.front().rows();
  int cols_n = 0;
  bool any_grad = false;
  for (const auto& p : parts) {
    if (p.tape != &t) throw std::invalid_argument("hcat: vars on different tapes");
    if (p.rows() != rows_n) throw std::invalid_argument("hcat: row mismatch");
    cols_n += p.cols();
    any_grad = any_grad || t.requires_grad(p.id);
  }
  Mat<S> v(rows_n, cols_n);
  std::vector<int> ids, offsets;
  int at = 0;
  for (const auto& p : parts) {
    v.middleCols(at, p.cols()) = p.value();
    ids.push_back(p.id);
    offsets.push_back(at);
    at += p.cols();
  }
  return t.push(std::move(v), any_grad,
                [ids = std::move(ids), offsets = std::move(offsets)](Tape<S>& tp, int self) {
                  const Mat<S>& g = tp.grad_ref(self);
                  for (std::size_t i = 0; i < ids.size(); ++i) {
                    if (!tp.requires_grad(ids[i])) continue;
                    const int c = static_cast<int>(tp.value(ids[i]).cols());
                    tp.grad_ref(ids[i]) += g.middleCols(offsets[i], c);
                  }
                });
}

/// Replicates a single column n times.
template <typename S>
Var<S> broadcast_cols(const Var<S>& a, int n) {
  Tape<S>& t = *a.tape;
  if (a.cols() != 1) throw std::invalid_argument("broadcast_cols: input must be one column");
  if (n < 1) throw std::invalid_argument("broadcast_cols: n must be >= 1");
  Mat<S> v = a.value().replicate(1, n);
  const int ia = a.id;
  return t.push(std::move(v), t.requires_grad(ia), [ia](Tape<S>& tp, int self) {
    tp.grad_ref(ia) += tp.grad_ref(self).rowwise().sum();
  });
}

template <typename S>
Var<S> rows(const Var<S>& a, int start, int n) {
  Tape<S>& t = *a.tape;
  if (start < 0 || n <= 0 || start + n > a.rows()) throw std::invalid_argument("rows: out of range");
  const int ia = a.id;
  return t.push(a.value().middleRows(start, n), t.requires_grad(ia),
                [ia, start, n](Tape<S>& tp, int self) {
                  tp.grad_ref(ia).middleRows(start, n) += tp.grad_ref(self);
                });
}

template <typename S>
Var<S> cols(const Var<S>& a, int start, int n) {
  Tape<S>& t = *a.tape;
  if (start < 0 || n <= 0 || start + n > a.cols()) throw std::invalid_argument("cols: out of range");
  const int ia = a.id;
  return t.push(a.value().middleCols(start, n), t.requires_grad(ia),
                [ia, start, n](Tape<S>& tp, int self) {
                  tp.grad_ref(ia).middleCols(start, n) += tp.grad_ref(self);
                });
}

// ---- elementwise nonlinearities ----

template <typename S>
Var<S> relu(const Var<S>& a) {
  Tape<S>& t = *a.tape;
  const int ia = a.id;
  return t.push(a.value().cwiseMax(S(0)), t.requires_grad(ia), [ia](Tape<S>& tp, int self) {
    const Mat<S>& g = tp.grad_ref(self);
    tp.grad_ref(ia) +=
        g.cwiseProduct((tp.value(ia).array() > S(0)).template cast<S>().matrix());
  });
}

template <typename S>
Var<S> tanh_(const Var<S>& a) {
  Tape<S>& t = *a.tape;
  Mat<S> v = a.value().array().tanh();
  const int ia = a.id;
  return t.push(std::move(v), t.requires_grad(ia), [ia](Tape<S>& tp, int self) {
    const Mat<S>& y = tp.value(self);
    tp.grad_ref(ia) +=
        tp.grad_ref(self).cwiseProduct((Mat<S>::Ones(y.rows(), y.cols()) - y.cwiseProduct(y)));
  });
}

template <typename S>
Var<S> sigmoid(const Var<S>& a) {
  Tape<S>& t = *a.tape;
  Mat<S> v = ((a.value().array() * S(0.5)).tanh() * S(0.5) + S(0.5));
  const int ia = a.id;
  return t.push(std::move(v), t.requires_grad(ia), [ia](Tape<S>& tp, int self) {
    const Mat<S>& y = tp.value(self);
    tp.grad_ref(ia) += tp.grad_ref(self).cwiseProduct(
        y.cwiseProduct(Mat<S>::Ones(y.rows(), y.cols()) - y));
  });
}

/// softplus(x) = log(1 + e^x), computed stably.
template <typename S>
Var<S> softplus(const Var<S>& a) {
  Tape<S>& t = *a.tape;
  Mat<S> v = a.value().unaryExpr([](S x) {
    const S m = x > S(0) ? x : S(0);
    return m + std::log1p(std::exp(-std::abs(x)));
  });
  const int ia = a.id;
  return t.push(std::move(v), t.requires_grad(ia), [ia](Tape<S>& tp, int self) {
    const Mat<S>& x = tp.value(ia);
    Mat<S> sig = ((x.array() * S(0.5)).tanh() * S(0.5) + S(0.5));
    tp.grad_ref(ia) += tp.grad_ref(self).cwiseProduct(sig);
  });
}

template <typename S>
Var<S> exp_(const Var<S>& a) {
  Tape<S>& t = *a.tape;
  Mat<S> v = a.value().array().exp();
  const int ia = a.id;
  return t.push(std::move(v), t.requires_grad(ia), [ia](Tape<S>& tp, int self) {
    tp.grad_ref(ia) += tp.grad_ref(self).cwiseProduct(tp.value(self));
  });
}

template <typename S>
Var<S> log_(const Var<S>& a) {
  Tape<S>& t = *a.tape;
  Mat<S> v = a.value().array().log();
  const int ia = a.id;
  return t.push(std::move(v), t.requires_grad(ia), [ia](Tape<S>& tp, int self) {
    tp.grad_ref(ia) += tp.grad_ref(self).cwiseQuotient(tp.value(ia));
  });
}

template <typename S>
Var<S> square(const Var<S>& a) {
  Tape<S>& t = *a.tape;
  const int ia = a.id;
  return t.push(a.value().cwiseProduct(a.value()), t.requires_grad(ia),
                [ia](Tape<S>& tp, int self) {
                  tp.grad_ref(ia) += S(2) * tp.grad_ref(self).cwiseProduct(tp.value(ia));
                });
}

// ---- reductions & distributions ----

template <typename S>
Var<S> sum_all(const Var<S>& a) {
  Tape<S>& t = *a.tape;
  Mat<S> v(1, 1);
  v(0, 0) = a.value().sum();
  const int ia = a.id;
  return t.push(std::move(v), t.requires_grad(ia), [ia](Tape<S>& tp, int self) {
    tp.grad_ref(ia).array() += tp.grad_ref(self)(0, 0);
  });
}

template <typename S>
Var<S> mean_all(const Var<S>& a) {
  const S n = static_cast<S>(a.value().size());
  return scale(sum_all(a), S(1) / n);
}

/// Column-wise softmax (each column a distribution over the rows).
template <typename S>
Var<S> softmax(const Var<S>& a) {
  Tape<S>& t = *a.tape;
  Mat<S> v = a.value();
  for (int c = 0; c < v.cols(); ++c) {
    const S m = v.col(c).maxCoeff();
    v.col(c) = (v.col(c).array() - m).exp();
    v.col(c) /= v.col(c).sum();
  }
  const int ia = a.id;
  return t.push(std::move(v), t.requires_grad(ia), [ia](Tape<S>& tp, int self) {
    const Mat<S>& y = tp.value(self);
    const Mat<S>& g = tp.grad_ref(self);
    Mat<S>& out = tp.grad_ref(ia);
    for (int c = 0; c < y.cols(); ++c) {
      const S dot = y.col(c).dot(g.col(c));
      out.col(c) += y.col(c).cwiseProduct(g.col(c).array().matrix() -
                                          Mat<S>::Constant(y.rows(), 1, dot));
    }
  });
}

/// W * x + b with the bias broadcast over columns.
template <typename S>
Var<S> affine(const Var<S>& w, const Var<S>& x, const Var<S>& b) {
  return add_bias(matmul(w, x), b);
}

}  // namespace hlsf::ad
