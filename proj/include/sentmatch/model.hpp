// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sentmatch/char_cnn.hpp"
#include "sentmatch/config.hpp"
#include "sentmatch/data_io.hpp"
#include "sentmatch/embeddings.hpp"
#include "sentmatch/lstm.hpp"
#include "sentmatch/match_cnn.hpp"
#include "sentmatch/matching.hpp"
#include "sentmatch/objectives.hpp"

namespace sentmatch {

struct PairOutputs {
  Var m1, m2;       // sentence matrices
  Var features;     // (3 x n x row)
  Var x_h;          // hidden matching vector
  Var relatedness;  // logits over the ordinal scale, when the task uses them
  Var entailment;   // class logits, when the task uses them
};

struct Prediction {
  std::optional<double> score;
  std::optional<EntailmentLabel> label;
  std::vector<double> relatedness_probs;
  std::vector<double> entailment_probs;
};

inline std::vector<std::string> truncate_tokens(const std::vector<std::string> &tokens, std::size_t max_length) {
  if (tokens.size() <= max_length) return tokens;
  return {tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(max_length)};
}

inline std::unique_ptr<WordEmbeddings> make_word_embeddings(const Config &cfg) {
  if (cfg.glove_path.empty()) return WordEmbeddings::hashed(cfg.word_dim, cfg.embedding_seed);
  return WordEmbeddings::from_glove(cfg.glove_path, cfg.word_dim);
}

/// Full sentence-pair network: word + char-CNN token streams, stacked
/// (bi)LSTM sentence matrices, matching planes, matching CNN, task heads.
class Model {
 public:
  Model(const Config &cfg, std::shared_ptr<WordEmbeddings> words) : cfg_(cfg), words_(std::move(words)) {
    if (!words_) throw std::invalid_argument("model needs word embeddings");
    if (words_->dim() != cfg.word_dim)
      throw ConfigError("word_dim " + std::to_string(cfg.word_dim) + " does not match embeddings of dim " +
                        std::to_string(words_->dim()));
    if (cfg.bidirectional) char_cnn_.emplace(cfg.char_cnn());
    encoder_.emplace(EncoderConfig{cfg.word_dim, cfg.char_frames, cfg.memory_dim, cfg.layers, cfg.bidirectional});
    const std::size_t row = encoder_->row_dim();
    fp3_.emplace(row);
    match_.emplace(cfg.match_cnn(), row);
    const std::size_t xh = match_->output_dim(cfg.layers);
    if (xh == 0)
      throw ConfigError("topology " + to_string(cfg.topology) + " cannot run on " + std::to_string(cfg.layers) +
                        " layer(s): a width-2 stage needs at least 2");
    if (uses_relatedness(cfg.task)) relatedness_.emplace(xh, cfg.relatedness_scale);
    if (uses_entailment(cfg.task)) entailment_.emplace(xh);
  }

  Model(const Model &) = delete;
  Model &operator=(const Model &) = delete;

  const Config &config() const { return cfg_; }
  const WordEmbeddings &word_embeddings() const { return *words_; }
  std::shared_ptr<WordEmbeddings> word_embeddings_ptr() const { return words_; }
  std::size_t hidden_dim() const { return match_->output_dim(cfg_.layers); }

  CharCnn *char_cnn() { return char_cnn_ ? &*char_cnn_ : nullptr; }
  StackedEncoder &encoder() { return *encoder_; }
  FpConvParams &fp_conv_params() { return *fp3_; }
  MatchCnn &match_cnn() { return *match_; }
  OrdinalHead *relatedness_head() { return relatedness_ ? &*relatedness_ : nullptr; }
  ClassHead *entailment_head() { return entailment_ ? &*entailment_ : nullptr; }

  void init(std::uint64_t seed) {
    Rng rng(seed);
    if (char_cnn_) char_cnn_->init(rng);
    encoder_->init(rng);
    fp3_->init(rng);
    match_->init(rng);
    if (relatedness_) relatedness_->init(rng);
    if (entailment_) entailment_->init(rng);
  }

  /// Trainable parameters in a fixed order (the frozen word table is excluded).
  ParameterList parameters() {
    ParameterList out;
    auto append = [&](ParameterList ps) { out.insert(out.end(), ps.begin(), ps.end()); };
    if (char_cnn_) append(char_cnn_->parameters());
    append(encoder_->parameters());
    append(fp3_->parameters());
    append(match_->parameters());
    if (relatedness_) append(relatedness_->parameters());
    if (entailment_) append(entailment_->parameters());
    return out;
  }

  using CharCache = std::unordered_map<std::string, Var>;

  /// Sentence matrix for one tokenized sentence. With a cache, repeated
  /// tokens share one char-CNN evaluation within the graph.
  Var encode(Graph &g, const std::vector<std::string> &tokens, CharCache *cache = nullptr) {
    const auto toks = truncate_tokens(tokens, cfg_.max_length);
    if (toks.empty()) throw std::invalid_argument("cannot encode an empty sentence");
    std::vector<Var> words, chars;
    words.reserve(toks.size());
    for (const auto &t : toks) words.push_back(words_->lookup(g, t));
    if (char_cnn_) {
      CharCache local;
      CharCache &memo = cache ? *cache : local;
      for (const auto &t : toks) {
        auto it = memo.find(t);
        if (it == memo.end()) it = memo.emplace(t, char_cnn_->embed(g, t)).first;
        chars.push_back(it->second);
      }
    }
    return encoder_->encode(g, words, chars);
  }

  PairOutputs forward(Graph &g, const std::vector<std::string> &tokens_a, const std::vector<std::string> &tokens_b) {
    PairOutputs out;
    CharCache cache;
    out.m1 = encode(g, tokens_a, &cache);
    out.m2 = encode(g, tokens_b, &cache);
    out.features = assemble(g, *fp3_, out.m1, out.m2);
    out.x_h = match_->forward(g, out.features);
    if (relatedness_) out.relatedness = relatedness_->logits(g, out.x_h);
    if (entailment_) out.entailment = entailment_->logits(g, out.x_h);
    return out;
  }

  /// Unregularized per-example objective: KL to the sparse target, class NLL,
  /// or their sum for the joint task.
  Var example_loss(Graph &g, const PairExample &ex) {
    auto out = forward(g, ex.tokens_a, ex.tokens_b);
    Var loss;
    if (relatedness_) loss = kl_to_target(g, out.relatedness, sparse_target(ex.score, relatedness_->classes()));
    if (entailment_) {
      Var l = nll(g, out.entailment, static_cast<std::size_t>(ex.label));
      loss = loss.valid() ? add(loss, l) : l;
    }
    return loss;
  }

  Prediction predict(const std::vector<std::string> &tokens_a, const std::vector<std::string> &tokens_b) {
    Graph g(false);
    auto out = forward(g, tokens_a, tokens_b);
    Prediction p;
    if (relatedness_) {
      auto logits = g.value(out.relatedness);
      p.score = expected_score(logits);
      auto probs = g.value(softmax(out.relatedness));
      p.relatedness_probs.assign(probs.begin(), probs.end());
    }
    if (entailment_) {
      auto logits = g.value(out.entailment);
      p.label = static_cast<EntailmentLabel>(argmax(logits));
      auto probs = g.value(softmax(out.entailment));
      p.entailment_probs.assign(probs.begin(), probs.end());
    }
    return p;
  }

 private:
  Config cfg_;
  std::shared_ptr<WordEmbeddings> words_;
  std::optional<CharCnn> char_cnn_;
  std::optional<StackedEncoder> encoder_;
  std::optional<FpConvParams> fp3_;
  std::optional<MatchCnn> match_;
  std::optional<OrdinalHead> relatedness_;
  std::optional<ClassHead> entailment_;
};

}  // namespace sentmatch
