// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sentmatch/char_cnn.hpp"

namespace sentmatch {

enum class EntailmentLabel : std::size_t { neutral = 0, entailment = 1, contradiction = 2 };

inline constexpr std::size_t entailment_classes = 3;

inline std::string to_string(EntailmentLabel l) {
  switch (l) {
    case EntailmentLabel::neutral: return "NEUTRAL";
    case EntailmentLabel::entailment: return "ENTAILMENT";
    case EntailmentLabel::contradiction: return "CONTRADICTION";
  }
  return "?";
}

/// Case-insensitive label parse.
inline EntailmentLabel parse_label(std::string_view s) {
  std::string up;
  for (char c : s) up += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (up == "NEUTRAL") return EntailmentLabel::neutral;
  if (up == "ENTAILMENT") return EntailmentLabel::entailment;
  if (up == "CONTRADICTION") return EntailmentLabel::contradiction;
  throw std::invalid_argument("unknown entailment label '" + std::string(s) + "'");
}

/// Two-point target on the ordinal scale 1..K with r . p = y.
/// p[floor(y)] = floor(y) - y + 1 and p[floor(y)+1] = y - floor(y) (1-based).
inline std::vector<double> sparse_target(double y, std::size_t K) {
  if (K < 2) throw std::invalid_argument("sparse_target: K must exceed 1");
  if (!(y >= 1.0 && y <= static_cast<double>(K)))
    throw std::invalid_argument("sparse_target: score " + std::to_string(y) + " outside [1, " + std::to_string(K) +
                                "]");
  std::vector<double> p(K, 0.0);
  const double fl = std::floor(y);
  const auto lo = static_cast<std::size_t>(fl);  // 1-based
  p[lo - 1] = fl - y + 1.0;
  if (lo < K) p[lo] = y - fl;
  return p;
}

/// Softmax classifier over the hidden matching vector.
struct SoftmaxHead {
  DenseParams dense;  // (classes x x_h)

  SoftmaxHead(const std::string &name, std::size_t input_dim, std::size_t classes)
      : dense(name, input_dim, classes) {}

  std::size_t classes() const { return dense.bias.size(); }
  void init(Rng &rng) { dense.init(rng); }
  ParameterList parameters() { return {&dense.weight, &dense.bias}; }

  Var logits(Graph &g, Var x_h) { return affine(g, dense, x_h); }
};

/// Ordinal relatedness head: y_hat = r . softmax(W x_h + b), r = [1..K].
struct OrdinalHead : SoftmaxHead {
  OrdinalHead(std::size_t input_dim, std::size_t K = 5) : SoftmaxHead("head.relatedness", input_dim, K) {
    if (K < 2) throw std::invalid_argument("ordinal head needs K > 1");
  }
};

struct ClassHead : SoftmaxHead {
  explicit ClassHead(std::size_t input_dim) : SoftmaxHead("head.entailment", input_dim, entailment_classes) {}
};

/// KL(p || softmax(logits)); terms with p_i = 0 contribute nothing.
inline Var kl_to_target(Graph &g, Var logits, const std::vector<double> &target) {
  if (g.size(logits) != target.size())
    throw ShapeError("target has " + std::to_string(target.size()) + " classes, logits " + shape_str(g.shape(logits)));
  double entropy_term = 0.0;
  std::vector<double> neg_p(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] > 0.0) entropy_term += target[i] * std::log(target[i]);
    neg_p[i] = -target[i];
  }
  Var cross = dot(g.constant({target.size()}, std::move(neg_p)), log_softmax(logits));
  return add_scalar(cross, entropy_term);
}

inline Var nll(Graph &g, Var logits, std::size_t label) {
  if (label >= g.size(logits))
    throw std::invalid_argument("label " + std::to_string(label) + " out of range for " +
                                std::to_string(g.size(logits)) + " classes");
  return neg(pick(log_softmax(logits), label));
}

/// (lambda / 2) * sum of squares over trainable parameters, as graph nodes.
inline Var l2_term(Graph &g, const ParameterList &theta, double lambda) {
  Var total = g.scalar(0.0);
  for (auto *p : theta)
    if (!p->constant) total = add(total, sum_squares(g.param(*p)));
  return scale(total, 0.5 * lambda);
}

/// Plain-value L2 penalty (lambda / 2) * ||theta||^2.
inline double l2_penalty(const ParameterList &theta, double lambda) {
  double s = 0.0;
  for (auto *p : theta)
    if (!p->constant) s += kernel::dot(p->value.data.data(), p->value.data.data(), p->size());
  return 0.5 * lambda * s;
}

/// grad += lambda * theta
inline void add_l2_gradient(const ParameterList &theta, double lambda) {
  for (auto *p : theta) {
    if (p->constant) continue;
    if (p->grad.size() != p->size()) p->grad.assign(p->size(), 0.0);
    kernel::axpy(lambda, p->value.data.data(), p->grad.data(), p->size());
  }
}

/// J = (1/m) sum_k KL(p_k || p_hat_k) + (lambda/2)||theta||^2 over one graph.
inline Var relatedness_loss(Graph &g, std::span<const Var> x_h, std::span<const double> scores, OrdinalHead &head,
                            double lambda, const ParameterList &theta) {
  if (x_h.empty()) throw std::invalid_argument("relatedness_loss: empty batch");
  if (x_h.size() != scores.size()) throw std::invalid_argument("relatedness_loss: batch size mismatch");
  if (lambda < 0.0) throw std::invalid_argument("relatedness_loss: negative lambda");
  Var total = g.scalar(0.0);
  for (std::size_t k = 0; k < x_h.size(); ++k)
    total = add(total, kl_to_target(g, head.logits(g, x_h[k]), sparse_target(scores[k], head.classes())));
  Var loss = scale(total, 1.0 / static_cast<double>(x_h.size()));
  if (!std::isfinite(g.item(loss))) throw std::domain_error("relatedness_loss: non-finite loss");
  return lambda > 0.0 ? add(loss, l2_term(g, theta, lambda)) : loss;
}

/// J = -(1/m) sum_k log p_hat(y_k) + (lambda/2)||theta||^2 over one graph.
inline Var entailment_loss(Graph &g, std::span<const Var> x_h, std::span<const std::size_t> labels, ClassHead &head,
                           double lambda, const ParameterList &theta) {
  if (x_h.empty()) throw std::invalid_argument("entailment_loss: empty batch");
  if (x_h.size() != labels.size()) throw std::invalid_argument("entailment_loss: batch size mismatch");
  if (lambda < 0.0) throw std::invalid_argument("entailment_loss: negative lambda");
  Var total = g.scalar(0.0);
  for (std::size_t k = 0; k < x_h.size(); ++k) total = add(total, nll(g, head.logits(g, x_h[k]), labels[k]));
  Var loss = scale(total, 1.0 / static_cast<double>(x_h.size()));
  if (!std::isfinite(g.item(loss))) throw std::domain_error("entailment_loss: non-finite loss");
  return lambda > 0.0 ? add(loss, l2_term(g, theta, lambda)) : loss;
}

/// r . softmax(logits) with r = [1..K].
inline double expected_score(std::span<const double> logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double z = 0.0, s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double e = std::exp(logits[i] - mx);
    z += e;
    s += static_cast<double>(i + 1) * e;
  }
  return s / z;
}

inline double predict_score(Graph &g, OrdinalHead &head, Var x_h) {
  return expected_score(g.value(head.logits(g, x_h)));
}

/// argmax with ties broken toward the lowest index.
inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline std::size_t predict_label(Graph &g, ClassHead &head, Var x_h) { return argmax(g.value(head.logits(g, x_h))); }

}  // namespace sentmatch
