// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sentmatch/char_cnn.hpp"

namespace sentmatch {

enum class Topology { I, II };

inline std::string to_string(Topology t) { return t == Topology::I ? "I" : "II"; }

inline Topology parse_topology(std::string_view s) {
  if (s == "I" || s == "1") return Topology::I;
  if (s == "II" || s == "2") return Topology::II;
  throw std::invalid_argument("unknown topology '" + std::string(s) + "' (expected I or II)");
}

struct MatchCnnConfig {
  Topology topology = Topology::I;
  std::size_t frames1 = 150;
  std::size_t frames2 = 150;
  /// Stage 1 uses one filter bank per feature plane instead of a shared bank
  /// over the folded frames.
  bool per_plane = false;
};

/// Temporal CNN over the matching feature tensor. Topology I applies a
/// width-1 conv+tanh stage then a width-2 stage; Topology II the reverse.
class MatchCnn {
 public:
  static constexpr std::size_t planes = 3;

  MatchCnn(const MatchCnnConfig &cfg, std::size_t row_dim) : cfg_(cfg), row_dim_(row_dim) {
    if (cfg.frames1 == 0 || cfg.frames2 == 0 || row_dim == 0)
      throw std::invalid_argument("match cnn dimensions must be positive");
    const std::size_t w1 = width(0), w2 = width(1);
    if (cfg.per_plane) {
      stage1_.reserve(planes);
      for (std::size_t p = 0; p < planes; ++p)
        stage1_.emplace_back("match.stage1.plane" + std::to_string(p), w1 * row_dim, cfg.frames1);
    } else {
      stage1_.emplace_back("match.stage1", w1 * planes * row_dim, cfg.frames1);
    }
    const std::size_t mid = cfg.per_plane ? planes * cfg.frames1 : cfg.frames1;
    stage2_.emplace("match.stage2", w2 * mid, cfg.frames2);
  }

  MatchCnn(const MatchCnn &) = delete;
  MatchCnn &operator=(const MatchCnn &) = delete;

  const MatchCnnConfig &config() const { return cfg_; }

  /// Kernel width of stage 0 or 1.
  std::size_t width(std::size_t stage) const {
    const bool first = stage == 0;
    return (cfg_.topology == Topology::I) == first ? 1 : 2;
  }

  /// Output length of the stacked stages for n layers: n - 1 time steps.
  std::size_t output_dim(std::size_t layers) const {
    const std::size_t receptive = width(0) + width(1) - 1;
    if (layers < receptive) return 0;
    return (layers - receptive + 1) * cfg_.frames2;
  }

  void init(Rng &rng) {
    for (auto &s : stage1_) s.init(rng);
    stage2_->init(rng);
  }

  ParameterList parameters() {
    ParameterList out;
    for (auto &s : stage1_) out.insert(out.end(), {&s.weight, &s.bias});
    out.insert(out.end(), {&stage2_->weight, &stage2_->bias});
    return out;
  }

  DenseParams &stage1(std::size_t bank = 0) { return stage1_.at(bank); }
  DenseParams &stage2() { return *stage2_; }

  /// Folds (planes x n x row) into a (n x planes*row) sequence, plane-major
  /// within each time step.
  static Var fold(Var features) {
    const Shape s = features.graph->shape(features);
    if (s.size() != 3 || s[0] != planes)
      throw ShapeError("feature tensor must be (3 x n x row), got " + shape_str(s));
    return reshape(permute(features, {1, 0, 2}), {s[1], s[0] * s[2]});
  }

  /// Output of the first conv+tanh stage.
  Var first_stage(Graph &g, Var features) {
    const Shape s = g.shape(features);
    if (s.size() != 3 || s[0] != planes || s[2] != row_dim_)
      throw ShapeError("feature tensor must be (3 x n x " + std::to_string(row_dim_) + "), got " + shape_str(s));
    check_time(s[1]);
    if (!cfg_.per_plane) {
      auto &p = stage1_[0];
      return tanh(conv1d(fold(features), g.param(p.weight), g.param(p.bias), width(0)));
    }
    std::vector<Var> outs;
    for (std::size_t p = 0; p < planes; ++p) {
      Var plane = reshape(slice(features, 0, p, p + 1), {s[1], s[2]});
      auto &bank = stage1_[p];
      outs.push_back(tanh(conv1d(plane, g.param(bank.weight), g.param(bank.bias), width(0))));
    }
    return concat(1, outs);
  }

  /// x_h: both stages, flattened.
  Var forward(Graph &g, Var features) {
    Var h = first_stage(g, features);
    h = tanh(conv1d(h, g.param(stage2_->weight), g.param(stage2_->bias), width(1)));
    return reshape(h, {g.size(h)});
  }

 private:
  void check_time(std::size_t layers) const {
    if (output_dim(layers) == 0)
      throw ShapeError("match cnn topology " + to_string(cfg_.topology) + " needs at least " +
                       std::to_string(width(0) + width(1) - 1) + " time steps, got " + std::to_string(layers));
  }

  MatchCnnConfig cfg_;
  std::size_t row_dim_;
  std::vector<DenseParams> stage1_;
  std::optional<DenseParams> stage2_;
};

}  // namespace sentmatch
