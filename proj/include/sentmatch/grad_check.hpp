// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sentmatch/autodiff.hpp"

namespace sentmatch {

/// |a - n| / max(1e-8, |a| + |n|)
inline double relative_error(double analytic, double numeric) {
  return std::fabs(analytic - numeric) / std::max(1e-8, std::fabs(analytic) + std::fabs(numeric));
}

struct GradCheckOptions {
  double epsilon = 1e-5;
  /// Also difference at 100, 10 and 1/10 times epsilon and keep the pair of
  /// neighbouring steps that agree best. Large steps win where roundoff
  /// swamps tiny gradients; small steps win near kinks.
  bool adaptive_step = true;
  /// Entries checked per parameter; 0 checks every entry.
  std::size_t max_entries = 0;
  std::uint64_t seed = 1;
};

struct GradCheckEntry {
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t entries_checked = 0;
  GradCheckEntry worst;
  /// Worst entry of each checked parameter, in parameter order.
  std::vector<GradCheckEntry> per_param;
  /// Largest |gradient| observed on a constant parameter (must stay 0).
  double constant_grad_max = 0.0;

  bool passed(double tolerance) const { return max_rel_error <= tolerance && constant_grad_max == 0.0; }
};

/// Builds the loss into the supplied graph and returns its scalar node.
using LossBuilder = std::function<Var(Graph &)>;

/// Central-difference check of every (or a sample of every) parameter entry
/// against the reverse-mode gradient. Parameter values are restored exactly.
inline GradCheckReport grad_check(const LossBuilder &build, const ParameterList &params,
                                  const GradCheckOptions &opt = {}) {
  for (auto *p : params) p->zero_grad();
  {
    Graph g;
    Var loss = build(g);
    const double value = g.item(loss);
    if (!std::isfinite(value)) throw std::domain_error("grad_check: non-finite loss");
    g.backward(loss);
    g.accumulate_param_grads();
  }

  auto evaluate = [&]() {
    Graph g(false);
    const double v = g.item(build(g));
    if (!std::isfinite(v)) throw std::domain_error("grad_check: non-finite loss under perturbation");
    return v;
  };

  GradCheckReport report;
  Rng rng(opt.seed);
  for (auto *p : params) {
    if (p->constant) {
      for (double gv : p->grad) report.constant_grad_max = std::max(report.constant_grad_max, std::fabs(gv));
      continue;
    }
    std::vector<std::size_t> indices;
    if (opt.max_entries == 0 || opt.max_entries >= p->size()) {
      indices.resize(p->size());
      for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    } else {
      for (std::size_t k = 0; k < opt.max_entries; ++k) indices.push_back(rng.below(p->size()));
    }
    GradCheckEntry worst{p->name, 0, 0.0, 0.0, -1.0};
    for (auto i : indices) {
      double &x = p->value.data[i];
      const double saved = x;
      auto central = [&](double h) {
        x = saved + h;
        const double up = evaluate();
        x = saved - h;
        const double down = evaluate();
        x = saved;
        return (up - down) / (2.0 * h);
      };
      double numeric = 0.0;
      if (!opt.adaptive_step) {
        numeric = central(opt.epsilon);
      } else {
        const double d[4] = {central(100 * opt.epsilon), central(10 * opt.epsilon), central(opt.epsilon),
                             central(opt.epsilon / 10)};
        std::size_t best = 0;
        for (std::size_t k = 1; k < 3; ++k)
          if (std::fabs(d[k] - d[k + 1]) < std::fabs(d[best] - d[best + 1])) best = k;
        numeric = 0.5 * (d[best] + d[best + 1]);
      }
      const double analytic = p->grad[i];
      const double err = relative_error(analytic, numeric);
      ++report.entries_checked;
      if (err > worst.rel_error) worst = {p->name, i, analytic, numeric, err};
    }
    if (worst.rel_error < 0.0) worst.rel_error = 0.0;
    report.per_param.push_back(worst);
    if (worst.rel_error >= report.max_rel_error) {
      report.max_rel_error = worst.rel_error;
      report.worst = worst;
    }
  }
  return report;
}

}  // namespace sentmatch
