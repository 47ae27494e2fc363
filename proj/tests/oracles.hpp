#pragma once

// Plain-Eigen reference implementations used as independent oracles for
// the tape-based networks. Everything here is written directly from the
// layer definitions and never touches the autodiff path.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "hlsf/nn.hpp"

namespace oracle {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline Mat P(const hlsf::nn::ParamStore<double>& s, const std::string& name) {
  return s.at(name);
}

inline Vec relu(const Vec& x) { return x.cwiseMax(0.0); }
inline Vec sigmoid(const Vec& x) {
  return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

inline Vec linear(const hlsf::nn::ParamStore<double>& s, const std::string& prefix, const Vec& x) {
  return P(s, prefix + ".W") * x + P(s, prefix + ".b");
}

struct LstmState {
  Vec h, c;
};

inline LstmState lstm_step(const hlsf::nn::ParamStore<double>& s, const std::string& prefix,
                           const Vec& x, const LstmState& prev) {
  const Vec gates = P(s, prefix + ".W_ih") * x + P(s, prefix + ".W_hh") * prev.h + P(s, prefix + ".b");
  const int h = static_cast<int>(prev.h.size());
  const Vec i = sigmoid(gates.segment(0, h));
  const Vec f = sigmoid(gates.segment(h, h));
  const Vec g = gates.segment(2 * h, h).array().tanh();
  const Vec o = sigmoid(gates.segment(3 * h, h));
  LstmState next;
  next.c = f.cwiseProduct(prev.c) + i.cwiseProduct(g);
  next.h = o.cwiseProduct(next.c.array().tanh().matrix());
  return next;
}

inline Vec gru_step(const hlsf::nn::ParamStore<double>& s, const std::string& prefix, const Vec& x,
                    const Vec& prev_h) {
  const int h = static_cast<int>(prev_h.size());
  const Vec gi = P(s, prefix + ".W_ih") * x + P(s, prefix + ".b_ih");
  const Vec gh = P(s, prefix + ".W_hh") * prev_h + P(s, prefix + ".b_hh");
  const Vec r = sigmoid(gi.segment(0, h) + gh.segment(0, h));
  const Vec z = sigmoid(gi.segment(h, h) + gh.segment(h, h));
  const Vec n = (gi.segment(2 * h, h) + r.cwiseProduct(gh.segment(2 * h, h))).array().tanh();
  return (Vec::Ones(h) - z).cwiseProduct(n) + z.cwiseProduct(prev_h);
}

/// Embedding + ReLU + LSTM over sequence rows, final hidden state.
inline Vec encode(const hlsf::nn::ParamStore<double>& s, const std::string& embed,
                  const std::string& lstm, const Mat& rows, int width, int hidden) {
  LstmState st{Vec::Zero(hidden), Vec::Zero(hidden)};
  for (int t = 0; t < rows.rows(); ++t)
    st = lstm_step(s, lstm, relu(linear(s, embed, rows.row(t).head(width).transpose())), st);
  return st.h;
}

/// Additive attention weights of x against lane columns, softmax over the
/// given index subset.
inline Vec attention_weights(const hlsf::nn::ParamStore<double>& s, const Vec& x, const Mat& lanes,
                             const std::vector<int>& subset) {
  Vec scores(subset.size());
  for (std::size_t i = 0; i < subset.size(); ++i) {
    const Vec key = (P(s, "vli.W_x") * x + P(s, "vli.W_l") * lanes.col(subset[i])).array().tanh();
    scores[static_cast<int>(i)] = (P(s, "vli.v") * key)(0, 0);
  }
  const double m = scores.maxCoeff();
  Vec e = (scores.array() - m).exp();
  return e / e.sum();
}

/// One full round of message passing + GRU updates, then the neighbor sum.
inline Vec v2i(const hlsf::nn::ParamStore<double>& s, const std::vector<Vec>& h0,
               const std::vector<Eigen::Vector2d>& pos, int rounds) {
  std::vector<Vec> h = h0;
  const int n = static_cast<int>(h.size());
  for (int round = 0; round < rounds; ++round) {
    std::vector<Vec> next(h.size());
    for (int i = 0; i < n; ++i) {
      Vec incoming = Vec::Zero(P(s, "v2i.msg.W").rows());
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        Vec in(2 + 2 * h[static_cast<std::size_t>(i)].size());
        in << (pos[static_cast<std::size_t>(j)] - pos[static_cast<std::size_t>(i)]),
            h[static_cast<std::size_t>(i)], h[static_cast<std::size_t>(j)];
        incoming += relu(P(s, "v2i.msg.W") * in + P(s, "v2i.msg.b"));
      }
      next[static_cast<std::size_t>(i)] = gru_step(s, "v2i.gru", incoming, h[static_cast<std::size_t>(i)]);
    }
    h = std::move(next);
  }
  Vec b = Vec::Zero(h[0].size());
  for (int i = 1; i < n; ++i) b += h[static_cast<std::size_t>(i)];
  return b;
}

}  // namespace oracle
