// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "sentmatch/autodiff.hpp"
#include "sentmatch/embeddings.hpp"

namespace sentmatch {

struct CharCnnConfig {
  std::size_t token_length = 16;  // l0
  std::size_t frames = 100;       // conv output frames; also the char vector size
  std::size_t kernel_width = 3;
  std::size_t stages = 1;
  std::size_t highway_hidden = 50;
};

struct DenseParams {
  Parameter weight;  // (out x in)
  Parameter bias;    // (out)

  DenseParams(const std::string &name, std::size_t in, std::size_t out)
      : weight(name + ".weight", {out, in}), bias(name + ".bias", {out}) {}

  void init(Rng &rng) {
    glorot_uniform(weight, weight.value.shape[1], weight.value.shape[0], rng);
    fill(bias, 0.0);
  }
};

/// W y + b
inline Var affine(Graph &g, DenseParams &p, Var y) {
  return add(matvec(g.param(p.weight), y), g.param(p.bias));
}

/// Temporal convolution followed by the threshold (relu) activation.
/// `weight` is (frames x width*in_frames).
inline Var temporal_conv(Var input, Var weight, Var bias, std::size_t width) {
  return relu(conv1d(input, weight, bias, width, 1));
}

/// Per-frame maximum over the time axis of a (time x frames) feature map.
inline Var max_over_time(Var features) {
  if (features.graph->shape(features).size() != 2)
    throw ShapeError("max_over_time expects (time x frames), got " + shape_str(features.graph->shape(features)));
  return max_over_axis(features, 0);
}

struct HighwayParams {
  DenseParams transform;  // W_H, b_H
  DenseParams gate;       // W_T, b_T

  HighwayParams(const std::string &name, std::size_t dim)
      : transform(name + ".transform", dim, dim), gate(name + ".gate", dim, dim) {}

  void init(Rng &rng, double gate_bias) {
    transform.init(rng);
    gate.init(rng);
    fill(gate.bias, gate_bias);
  }
};

/// t * relu(W_H y + b_H) + (1 - t) * y with t = sigmoid(W_T y + b_T).
inline Var highway(Graph &g, HighwayParams &p, Var y) {
  Var t = sigmoid(affine(g, p.gate, y));
  Var h = relu(affine(g, p.transform, y));
  return add(mul(t, h), mul(one_minus(t), y));
}

/// Character-level word encoder: quantize, conv+relu stages, max over time,
/// then a highway layer. When the highway width differs from the conv frame
/// count, the highway sits between relu projections frames->hidden->frames.
class CharCnn {
 public:
  explicit CharCnn(const CharCnnConfig &cfg) : cfg_(cfg) {
    if (cfg.kernel_width == 0 || cfg.stages == 0 || cfg.frames == 0 || cfg.highway_hidden == 0)
      throw std::invalid_argument("char cnn dimensions must be positive");
    if (cfg.token_length < cfg.stages * (cfg.kernel_width - 1) + 1)
      throw std::invalid_argument("token length " + std::to_string(cfg.token_length) +
                                  " is shorter than the convolution stack's receptive field");
    conv_.reserve(cfg.stages);
    std::size_t in = Alphabet::size;
    for (std::size_t s = 0; s < cfg.stages; ++s) {
      conv_.emplace_back("char.conv" + std::to_string(s), in * cfg.kernel_width, cfg.frames);
      in = cfg.frames;
    }
    if (projected()) {
      proj_in_.emplace("char.proj_in", cfg.frames, cfg.highway_hidden);
      proj_out_.emplace("char.proj_out", cfg.highway_hidden, cfg.frames);
    }
    highway_.emplace("char.highway", cfg.highway_hidden);
  }

  CharCnn(const CharCnn &) = delete;
  CharCnn &operator=(const CharCnn &) = delete;

  const CharCnnConfig &config() const { return cfg_; }
  std::size_t output_dim() const { return cfg_.frames; }
  bool projected() const { return cfg_.highway_hidden != cfg_.frames; }

  void init(Rng &rng) {
    for (auto &c : conv_) c.init(rng);
    if (projected()) {
      proj_in_->init(rng);
      proj_out_->init(rng);
    }
    highway_->init(rng, -2.0);
  }

  ParameterList parameters() {
    ParameterList out;
    for (auto &c : conv_) out.insert(out.end(), {&c.weight, &c.bias});
    if (projected()) out.insert(out.end(), {&proj_in_->weight, &proj_in_->bias});
    out.insert(out.end(), {&highway_->transform.weight, &highway_->transform.bias, &highway_->gate.weight,
                           &highway_->gate.bias});
    if (projected()) out.insert(out.end(), {&proj_out_->weight, &proj_out_->bias});
    return out;
  }

  DenseParams &conv(std::size_t stage) { return conv_.at(stage); }
  HighwayParams &highway_params() { return *highway_; }

  /// Max-pooled conv features of a token, before the highway block.
  Var pooled(Graph &g, std::string_view token) {
    Var x = g.constant(quantize(token, cfg_.token_length));
    for (auto &c : conv_) x = temporal_conv(x, g.param(c.weight), g.param(c.bias), cfg_.kernel_width);
    return max_over_time(x);
  }

  Var embed(Graph &g, std::string_view token) {
    Var y = pooled(g, token);
    if (!projected()) return highway(g, *highway_, y);
    Var z = relu(affine(g, *proj_in_, y));
    z = highway(g, *highway_, z);
    return relu(affine(g, *proj_out_, z));
  }

 private:
  CharCnnConfig cfg_;
  std::vector<DenseParams> conv_;
  std::optional<DenseParams> proj_in_, proj_out_;
  std::optional<HighwayParams> highway_;
};

}  // namespace sentmatch
