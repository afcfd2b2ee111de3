// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sentmatch/autodiff.hpp"

namespace sentmatch {

/// Gate blocks are stored fused, in the row order i, f, o, u:
/// W is (4d x input), U is (4d x d), b is (4d).
struct LstmParams {
  enum Gate : std::size_t { input_gate = 0, forget_gate = 1, output_gate = 2, candidate = 3 };

  std::size_t input_dim;
  std::size_t memory_dim;
  Parameter W, U, b;

  LstmParams(const std::string &name, std::size_t in, std::size_t d)
      : input_dim(in), memory_dim(d), W(name + ".W", {4 * d, in}), U(name + ".U", {4 * d, d}),
        b(name + ".b", {4 * d}) {}

  void init(Rng &rng, double forget_bias = 1.0) {
    glorot_uniform(W, input_dim, memory_dim, rng);
    glorot_uniform(U, memory_dim, memory_dim, rng);
    fill(b, 0.0);
    for (std::size_t k = 0; k < memory_dim; ++k) b.value[forget_gate * memory_dim + k] = forget_bias;
  }

  ParameterList parameters() { return {&W, &U, &b}; }
};

struct LstmState {
  Var h, c;
};

inline LstmState zero_state(Graph &g, std::size_t d) {
  return {g.constant(Tensor({d})), g.constant(Tensor({d}))};
}

/// One LSTM transition:
///   i, f, o = sigmoid(W x + U h_prev + b) per gate block, u = tanh(...),
///   c = i*u + f*c_prev, h = o*tanh(c).
inline LstmState lstm_step(Graph &g, LstmParams &p, Var x, const LstmState &prev) {
  const std::size_t d = p.memory_dim;
  if (g.size(x) != p.input_dim)
    throw ShapeError("lstm_step input " + shape_str(g.shape(x)) + " does not match input dim " +
                     std::to_string(p.input_dim));
  if (g.size(prev.h) != d || g.size(prev.c) != d)
    throw ShapeError("lstm_step state does not match memory dim " + std::to_string(d));
  Var z = add(add(matvec(g.param(p.W), x), matvec(g.param(p.U), prev.h)), g.param(p.b));
  Var gates = sigmoid(slice(z, 0, 0, 3 * d));
  Var i = slice(gates, 0, 0, d);
  Var f = slice(gates, 0, d, 2 * d);
  Var o = slice(gates, 0, 2 * d, 3 * d);
  Var u = tanh(slice(z, 0, 3 * d, 4 * d));
  Var c = add(mul(i, u), mul(f, prev.c));
  Var h = mul(o, tanh(c));
  return {h, c};
}

/// Runs one direction over a sequence; returns the hidden state of every step
/// in input-index order. reverse=true sweeps t = T..1.
inline std::vector<Var> run_lstm(Graph &g, LstmParams &p, const std::vector<Var> &inputs, bool reverse) {
  std::vector<Var> hidden(inputs.size());
  LstmState s = zero_state(g, p.memory_dim);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const std::size_t t = reverse ? inputs.size() - 1 - k : k;
    s = lstm_step(g, p, inputs[t], s);
    hidden[t] = s.h;
  }
  return hidden;
}

struct EncoderConfig {
  std::size_t word_dim = 300;
  std::size_t char_dim = 100;
  std::size_t memory_dim = 100;
  std::size_t layers = 2;
  bool bidirectional = true;
};

/// Stacked LSTM with asymmetric inputs: the forward direction reads word
/// vectors, the backward direction reads char vectors. Upper layers read the
/// hidden sequence of the same direction one layer down.
class StackedEncoder {
 public:
  explicit StackedEncoder(const EncoderConfig &cfg) : cfg_(cfg) {
    if (cfg.layers == 0 || cfg.memory_dim == 0) throw std::invalid_argument("encoder needs layers and memory dim");
    forward_.reserve(cfg.layers);
    backward_.reserve(cfg.layers);
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      const std::string tag = "encoder.l" + std::to_string(l);
      forward_.emplace_back(tag + ".fwd", l == 0 ? cfg.word_dim : cfg.memory_dim, cfg.memory_dim);
      if (cfg.bidirectional)
        backward_.emplace_back(tag + ".bwd", l == 0 ? cfg.char_dim : cfg.memory_dim, cfg.memory_dim);
    }
  }

  StackedEncoder(const StackedEncoder &) = delete;
  StackedEncoder &operator=(const StackedEncoder &) = delete;

  const EncoderConfig &config() const { return cfg_; }

  /// Width of a sentence matrix row.
  std::size_t row_dim() const { return cfg_.bidirectional ? 2 * cfg_.memory_dim : cfg_.memory_dim; }

  void init(Rng &rng) {
    for (auto &p : forward_) p.init(rng);
    for (auto &p : backward_) p.init(rng);
  }

  ParameterList parameters() {
    ParameterList out;
    for (std::size_t l = 0; l < forward_.size(); ++l) {
      for (auto *p : forward_[l].parameters()) out.push_back(p);
      if (cfg_.bidirectional)
        for (auto *p : backward_[l].parameters()) out.push_back(p);
    }
    return out;
  }

  LstmParams &forward(std::size_t layer) { return forward_.at(layer); }
  LstmParams &backward(std::size_t layer) { return backward_.at(layer); }

  /// Sentence matrix (layers x row_dim): row r is the final forward state of
  /// layer r (t = T) joined with the final backward state of layer r (t = 1).
  Var encode(Graph &g, const std::vector<Var> &words, const std::vector<Var> &chars) {
    if (words.empty()) throw std::invalid_argument("encode: empty sentence");
    if (cfg_.bidirectional && chars.size() != words.size())
      throw std::invalid_argument("encode: word stream has " + std::to_string(words.size()) +
                                  " tokens but char stream has " + std::to_string(chars.size()));
    std::vector<Var> rows;
    std::vector<Var> fwd_in = words, bwd_in = chars;
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
      auto fwd = run_lstm(g, forward_[l], fwd_in, false);
      if (cfg_.bidirectional) {
        auto bwd = run_lstm(g, backward_[l], bwd_in, true);
        rows.push_back(concat(0, {fwd.back(), bwd.front()}));
        bwd_in = std::move(bwd);
      } else {
        rows.push_back(fwd.back());
      }
      fwd_in = std::move(fwd);
    }
    return stack(rows);
  }

 private:
  EncoderConfig cfg_;
  std::vector<LstmParams> forward_;
  std::vector<LstmParams> backward_;
};

}  // namespace sentmatch
