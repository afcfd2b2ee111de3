// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sentmatch/metrics.hpp"
#include "sentmatch/model.hpp"

namespace sentmatch {

class NonFiniteGradient : public std::runtime_error {
 public:
  NonFiniteGradient(const std::string &param, std::size_t index)
      : std::runtime_error("non-finite gradient in " + param + "[" + std::to_string(index) + "]"),
        parameter(param),
        index(index) {}
  std::string parameter;
  std::size_t index;
};

/// Sum of squared gradients per parameter, aligned with a ParameterList.
struct AdaGradState {
  std::vector<std::vector<double>> acc;

  explicit AdaGradState(const ParameterList &params = {}) { reset(params); }

  void reset(const ParameterList &params) {
    acc.clear();
    for (auto *p : params) acc.emplace_back(p->size(), 0.0);
  }
};

/// acc += g^2; theta -= rate * g / (sqrt(acc) + eps). Frozen parameters are
/// skipped. All gradients are checked before anything is written, so a
/// rejected step leaves parameters and state untouched.
inline void adagrad_step(const ParameterList &params, AdaGradState &state, double rate, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("adagrad: eps must be positive");
  if (state.acc.size() != params.size()) throw std::invalid_argument("adagrad: state does not match parameter list");
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Parameter &p = *params[k];
    if (p.constant) continue;
    if (state.acc[k].size() != p.size() || (!p.grad.empty() && p.grad.size() != p.size()))
      throw ShapeError("adagrad: shape mismatch for " + p.name);
    for (std::size_t i = 0; i < p.grad.size(); ++i)
      if (!std::isfinite(p.grad[i])) throw NonFiniteGradient(p.name, i);
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter &p = *params[k];
    if (p.constant || p.grad.empty()) continue;
    double *theta = p.value.data.data();
    double *acc = state.acc[k].data();
    const double *g = p.grad.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (g[i] == 0.0) continue;
      acc[i] += g[i] * g[i];
      theta[i] -= rate * g[i] / (std::sqrt(acc[i]) + eps);
    }
  }
}

inline double grad_norm(const ParameterList &params) {
  double s = 0.0;
  for (auto *p : params) s += kernel::dot(p->grad.data(), p->grad.data(), p->grad.size());
  return std::sqrt(s);
}

inline void clip_grad_norm(const ParameterList &params, double max_norm) {
  const double n = grad_norm(params);
  if (max_norm <= 0.0 || n <= max_norm) return;
  const double c = max_norm / n;
  for (auto *p : params)
    for (double &g : p->grad) g *= c;
}

/// Runs the model over `examples` without recording a tape.
inline MetricsReport evaluate(Model &model, const std::vector<PairExample> &examples) {
  if (examples.empty()) throw std::invalid_argument("evaluate: no examples");
  MetricsReport report;
  report.examples = examples.size();
  const Task task = model.config().task;
  std::vector<double> pred, gold;
  std::vector<std::size_t> pred_label, gold_label;
  double kl_sum = 0.0;
  for (const auto &ex : examples) {
    Graph g(false);
    auto out = model.forward(g, ex.tokens_a, ex.tokens_b);
    if (uses_relatedness(task)) {
      pred.push_back(expected_score(g.value(out.relatedness)));
      gold.push_back(ex.score);
      kl_sum += g.item(kl_to_target(g, out.relatedness, sparse_target(ex.score, g.size(out.relatedness))));
    }
    if (uses_entailment(task)) {
      pred_label.push_back(argmax(g.value(out.entailment)));
      gold_label.push_back(static_cast<std::size_t>(ex.label));
    }
  }
  if (uses_relatedness(task))
    report.relatedness = relatedness_metrics(pred, gold, kl_sum / static_cast<double>(examples.size()));
  if (uses_entailment(task)) report.entailment = entailment_metrics(pred_label, gold_label);
  return report;
}

inline nlohmann::ordered_json to_json(const MetricsReport &m) {
  nlohmann::ordered_json j;
  j["examples"] = m.examples;
  if (m.relatedness) {
    j["pearson"] = m.relatedness->pearson;
    j["spearman"] = m.relatedness->spearman;
    j["mse"] = m.relatedness->mse;
    j["kl"] = m.relatedness->mean_kl;
  }
  if (m.entailment) {
    j["accuracy"] = m.entailment->accuracy;
    j["confusion"] = m.entailment->confusion;
  }
  return j;
}

struct EpochSummary {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // mean objective over the epoch's batches, L2 included
  std::size_t rejected_steps = 0;
  std::optional<MetricsReport> train_metrics;
  std::optional<MetricsReport> dev_metrics;
};

struct TrainOptions {
  std::ostream *log = nullptr;  // JSON lines
  bool log_steps = false;
  const std::vector<PairExample> *dev = nullptr;
  bool eval_train = false;
  /// Called after each epoch; returning false stops training.
  std::function<bool(const EpochSummary &, Model &)> on_epoch;
};

struct TrainResult {
  std::vector<EpochSummary> epochs;
  std::size_t steps = 0;
  std::size_t rejected_steps = 0;
  std::size_t truncated_sentences = 0;
};

inline void validate_examples(const std::vector<PairExample> &examples, std::size_t K) {
  if (examples.empty()) throw std::invalid_argument("training set is empty");
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto &ex = examples[i];
    const std::string where = "example " + std::to_string(i) + " (" + ex.id + ")";
    if (ex.tokens_a.empty() || ex.tokens_b.empty()) throw std::invalid_argument(where + ": empty sentence");
    if (!(ex.score >= 1.0 && ex.score <= static_cast<double>(K)))
      throw std::invalid_argument(where + ": score out of range");
    if (static_cast<std::size_t>(ex.label) >= entailment_classes) throw std::invalid_argument(where + ": bad label");
  }
}

/// Minibatch AdaGrad over shuffled batches. Each example gets its own tape;
/// gradients are summed into the parameters in batch order, so results are
/// reproducible bit for bit.
inline TrainResult train(Model &model, const std::vector<PairExample> &examples, const TrainOptions &opt = {}) {
  const Config &cfg = model.config();
  validate_examples(examples, cfg.relatedness_scale);
  ParameterList theta = model.parameters();
  AdaGradState state(theta);
  TrainResult result;

  for (const auto &ex : examples)
    result.truncated_sentences +=
        (ex.tokens_a.size() > cfg.max_length ? 1 : 0) + (ex.tokens_b.size() > cfg.max_length ? 1 : 0);
  if (opt.log) {
    nlohmann::ordered_json j;
    j["event"] = "start";
    j["examples"] = examples.size();
    j["parameters"] = [&] {
      std::size_t n = 0;
      for (auto *p : theta) n += p->size();
      return n;
    }();
    j["truncated_sentences"] = result.truncated_sentences;
    *opt.log << j.dump() << '\n';
  }

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochSummary summary;
    summary.epoch = epoch;
    double loss_sum = 0.0;
    std::size_t batches_done = 0;
    for (const auto &batch : batch_iter(examples.size(), cfg.batch_size, cfg.seed, epoch)) {
      zero_grads(theta);
      const double inv_m = 1.0 / static_cast<double>(batch.size());
      double batch_loss = 0.0;
      for (std::size_t idx : batch) {
        Graph g;
        Var loss = model.example_loss(g, examples[idx]);
        batch_loss += g.item(loss);
        g.backward(loss);
        g.accumulate_param_grads(inv_m);
      }
      batch_loss = batch_loss * inv_m + l2_penalty(theta, cfg.l2);
      if (cfg.l2 > 0.0) add_l2_gradient(theta, cfg.l2);
      if (cfg.clip_norm > 0.0) clip_grad_norm(theta, cfg.clip_norm);
      ++result.steps;
      try {
        adagrad_step(theta, state, cfg.learning_rate, cfg.adagrad_eps);
      } catch (const NonFiniteGradient &e) {
        ++summary.rejected_steps;
        if (opt.log) {
          nlohmann::ordered_json j;
          j["event"] = "rejected";
          j["epoch"] = epoch;
          j["step"] = result.steps;
          j["reason"] = e.what();
          j["batch"] = batch;
          *opt.log << j.dump() << '\n';
        }
        continue;
      }
      loss_sum += batch_loss;
      ++batches_done;
      if (opt.log && opt.log_steps) {
        nlohmann::ordered_json j;
        j["event"] = "step";
        j["epoch"] = epoch;
        j["step"] = result.steps;
        j["loss"] = batch_loss;
        *opt.log << j.dump() << '\n';
      }
    }
    summary.loss = batches_done ? loss_sum / static_cast<double>(batches_done) : std::nan("");
    result.rejected_steps += summary.rejected_steps;
    if (opt.eval_train) summary.train_metrics = evaluate(model, examples);
    if (opt.dev && !opt.dev->empty()) summary.dev_metrics = evaluate(model, *opt.dev);
    if (opt.log) {
      nlohmann::ordered_json j;
      j["event"] = "epoch";
      j["epoch"] = epoch;
      j["step"] = result.steps;
      j["loss"] = summary.loss;
      j["rejected_steps"] = summary.rejected_steps;
      if (summary.train_metrics) j["train"] = to_json(*summary.train_metrics);
      if (summary.dev_metrics) j["dev"] = to_json(*summary.dev_metrics);
      *opt.log << j.dump() << '\n';
      opt.log->flush();
    }
    result.epochs.push_back(summary);
    if (opt.on_epoch && !opt.on_epoch(result.epochs.back(), model)) break;
  }
  return result;
}

}  // namespace sentmatch
