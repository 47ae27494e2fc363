#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "hlsf/autodiff.hpp"
#include "hlsf/rng.hpp"

namespace hlsf::nn {

/// Named parameter matrices in a fixed (insertion) order. The order is the
/// contract for checkpoints, optimizer state and gradient accumulators.
template <typename S>
class ParamStore {
 public:
  struct Item {
    std::string name;
    ad::Mat<S> value;
    int fan_in = 1;
    int lstm_hidden = 0;  // > 0 marks an LSTM bias needing forget-gate init
  };

  ad::Mat<S>& add(const std::string& name, int rows, int cols, int fan_in, int lstm_hidden = 0) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
    index_[name] = static_cast<int>(items_.size());
    items_.push_back(Item{name, ad::Mat<S>::Zero(rows, cols), fan_in, lstm_hidden});
    return items_.back().value;
  }

  const ad::Mat<S>& at(const std::string& name) const { return items_[find(name)].value; }
  ad::Mat<S>& at(const std::string& name) { return items_[find(name)].value; }
  bool has(const std::string& name) const { return index_.count(name) > 0; }

  const std::vector<Item>& items() const { return items_; }
  std::vector<Item>& items() { return items_; }
  std::size_t count() const { return items_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& it : items_) n += static_cast<std::size_t>(it.value.size());
    return n;
  }

  /// Uniform fan-in init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)), in insertion
  /// order from the given stream; LSTM forget-gate biases are then set to 1.
  void init(Rng& rng) {
    for (auto& it : items_) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(it.fan_in));
      for (int c = 0; c < it.value.cols(); ++c)
        for (int r = 0; r < it.value.rows(); ++r)
          it.value(r, c) = static_cast<S>(rng.uniform(-bound, bound));
      if (it.lstm_hidden > 0)
        it.value.middleRows(it.lstm_hidden, it.lstm_hidden).setConstant(S(1));
    }
  }

 private:
  int find(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("unknown parameter: " + name);
    return it->second;
  }

  std::vector<Item> items_;
  std::unordered_map<std::string, int> index_;
};

/// All parameters of a store bound to one tape as leaves, aligned with the
/// store's item order.
template <typename S>
struct Bound {
  ad::Tape<S>* tape = nullptr;
  const ParamStore<S>* store = nullptr;
  std::vector<ad::Var<S>> vars;

  ad::Var<S> operator[](const std::string& name) const {
    for (std::size_t i = 0; i < store->items().size(); ++i)
      if (store->items()[i].name == name) return vars[i];
    throw std::invalid_argument("unbound parameter: " + name);
  }
};

template <typename S>
Bound<S> bind(ad::Tape<S>& tape, const ParamStore<S>& store) {
  Bound<S> b;
  b.tape = &tape;
  b.store = &store;
  b.vars.reserve(store.count());
  for (const auto& it : store.items()) b.vars.push_back(tape.leaf(it.value));
  return b;
}

/// Binding without gradient tracking, for forward-only passes.
template <typename S>
Bound<S> bind_const(ad::Tape<S>& tape, const ParamStore<S>& store) {
  Bound<S> b;
  b.tape = &tape;
  b.store = &store;
  b.vars.reserve(store.count());
  for (const auto& it : store.items()) b.vars.push_back(tape.constant(it.value));
  return b;
}

/// Flat gradient accumulator aligned with a store's item order.
template <typename S>
struct GradAccum {
  std::vector<ad::Mat<S>> grads;

  explicit GradAccum(const ParamStore<S>& store) {
    for (const auto& it : store.items())
      grads.push_back(ad::Mat<S>::Zero(it.value.rows(), it.value.cols()));
  }
  void add_from(ad::Tape<S>& tape, const Bound<S>& bound, S weight = S(1)) {
    for (std::size_t i = 0; i < bound.vars.size(); ++i)
      grads[i] += weight * tape.grad(bound.vars[i]);
  }
  void zero() {
    for (auto& g : grads) g.setZero();
  }
};

// ---- registration ----

inline void register_linear(auto& store, const std::string& prefix, int in, int out) {
  store.add(prefix + ".W", out, in, in);
  store.add(prefix + ".b", out, 1, in);
}

inline void register_lstm(auto& store, const std::string& prefix, int in, int hidden) {
  store.add(prefix + ".W_ih", 4 * hidden, in, in);
  store.add(prefix + ".W_hh", 4 * hidden, hidden, hidden);
  store.add(prefix + ".b", 4 * hidden, 1, hidden, hidden);
}

inline void register_gru(auto& store, const std::string& prefix, int in, int hidden) {
  store.add(prefix + ".W_ih", 3 * hidden, in, in);
  store.add(prefix + ".W_hh", 3 * hidden, hidden, hidden);
  store.add(prefix + ".b_ih", 3 * hidden, 1, in);
  store.add(prefix + ".b_hh", 3 * hidden, 1, hidden);
}

// ---- forward steps ----

template <typename S>
ad::Var<S> linear(const Bound<S>& p, const std::string& prefix, const ad::Var<S>& x) {
  return ad::affine(p[prefix + ".W"], x, p[prefix + ".b"]);
}

template <typename S>
ad::Var<S> linear_relu(const Bound<S>& p, const std::string& prefix, const ad::Var<S>& x) {
  return ad::relu(linear(p, prefix, x));
}

template <typename S>
struct LstmState {
  ad::Var<S> h, c;
};

template <typename S>
LstmState<S> lstm_zero_state(ad::Tape<S>& tape, int hidden, int batch) {
  return {tape.constant(ad::Mat<S>::Zero(hidden, batch)),
          tape.constant(ad::Mat<S>::Zero(hidden, batch))};
}

/// One LSTM step; gate layout in the stacked weights is [i, f, g, o].
template <typename S>
LstmState<S> lstm_step(const Bound<S>& p, const std::string& prefix, const ad::Var<S>& x,
                       const LstmState<S>& prev) {
  const ad::Var<S> gates =
      ad::add(ad::affine(p[prefix + ".W_ih"], x, p[prefix + ".b"]),
              ad::matmul(p[prefix + ".W_hh"], prev.h));
  const int h = prev.h.rows();
  const ad::Var<S> i = ad::sigmoid(ad::rows(gates, 0, h));
  const ad::Var<S> f = ad::sigmoid(ad::rows(gates, h, h));
  const ad::Var<S> g = ad::tanh_(ad::rows(gates, 2 * h, h));
  const ad::Var<S> o = ad::sigmoid(ad::rows(gates, 3 * h, h));
  const ad::Var<S> c = ad::add(ad::hadamard(f, prev.c), ad::hadamard(i, g));
  return {ad::hadamard(o, ad::tanh_(c)), c};
}

/// One GRU step; gate layout is [r, z, n].
template <typename S>
ad::Var<S> gru_step(const Bound<S>& p, const std::string& prefix, const ad::Var<S>& x,
                    const ad::Var<S>& prev_h) {
  const int h = prev_h.rows();
  const ad::Var<S> gi = ad::affine(p[prefix + ".W_ih"], x, p[prefix + ".b_ih"]);
  const ad::Var<S> gh = ad::affine(p[prefix + ".W_hh"], prev_h, p[prefix + ".b_hh"]);
  const ad::Var<S> r = ad::sigmoid(ad::add(ad::rows(gi, 0, h), ad::rows(gh, 0, h)));
  const ad::Var<S> z = ad::sigmoid(ad::add(ad::rows(gi, h, h), ad::rows(gh, h, h)));
  const ad::Var<S> n =
      ad::tanh_(ad::add(ad::rows(gi, 2 * h, h), ad::hadamard(r, ad::rows(gh, 2 * h, h))));
  // h' = (1 - z) * n + z * h
  const ad::Var<S> one = prev_h.tape->constant(ad::Mat<S>::Ones(h, prev_h.cols()));
  return ad::add(ad::hadamard(ad::sub(one, z), n), ad::hadamard(z, prev_h));
}

/// Runs an embedding + ReLU + LSTM over a row-major sequence (steps x
/// features), returning the final hidden state. Columns of `batch` carry
/// independent sequences of the same length when width > 1.
template <typename S>
ad::Var<S> encode_rows(const Bound<S>& p, const std::string& embed_prefix,
                       const std::string& lstm_prefix, const std::vector<ad::Var<S>>& steps,
                       int hidden) {
  if (steps.empty()) throw std::invalid_argument("encode_rows: empty sequence");
  auto state = lstm_zero_state(*steps.front().tape, hidden, steps.front().cols());
  for (const auto& x : steps)
    state = lstm_step(p, lstm_prefix, linear_relu(p, embed_prefix, x), state);
  return state.h;
}

}  // namespace hlsf::nn
