// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sentmatch/autodiff.hpp"
#include "sentmatch/io.hpp"

namespace sentmatch {

/// 26 lowercase letters followed by the 10 digits.
struct Alphabet {
  static constexpr std::size_t size = 36;

  static constexpr char symbol(std::size_t i) {
    return i < 26 ? static_cast<char>('a' + i) : static_cast<char>('0' + (i - 26));
  }

  /// Index of an already lowercased code point, or nullopt when out of alphabet.
  static constexpr std::optional<std::size_t> index(char32_t cp) {
    if (cp >= U'a' && cp <= U'z') return static_cast<std::size_t>(cp - U'a');
    if (cp >= U'0' && cp <= U'9') return static_cast<std::size_t>(26 + (cp - U'0'));
    return std::nullopt;
  }
};

/// Decodes UTF-8 into code points. Invalid bytes become U+FFFD, one per byte.
inline std::vector<char32_t> utf8_code_points(std::string_view text) {
  std::vector<char32_t> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    std::size_t len = b0 < 0x80 ? 1 : (b0 >> 5) == 0x6 ? 2 : (b0 >> 4) == 0xE ? 3 : (b0 >> 3) == 0x1E ? 4 : 0;
    if (len == 0 || i + len > text.size()) {
      out.push_back(U'�');
      ++i;
      continue;
    }
    char32_t cp = len == 1 ? b0 : len == 2 ? (b0 & 0x1F) : len == 3 ? (b0 & 0x0F) : (b0 & 0x07);
    bool ok = true;
    for (std::size_t k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(text[i + k]);
      if ((b & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (b & 0x3F);
    }
    if (!ok) {
      out.push_back(U'�');
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto &c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

/// One-hot character grid of a token: (l0 x 36). Rows past the token, and
/// rows of characters outside the alphabet, are all zero.
inline Tensor quantize(std::string_view token, std::size_t l0) {
  if (l0 == 0) throw std::invalid_argument("quantize: l0 must be at least 1");
  Tensor grid({l0, Alphabet::size});
  const auto cps = utf8_code_points(ascii_lower(token));
  for (std::size_t pos = 0; pos < cps.size() && pos < l0; ++pos)
    if (auto idx = Alphabet::index(cps[pos])) grid.at(pos, *idx) = 1.0;
  return grid;
}

/// Whitespace split, then strip leading and trailing ASCII punctuation.
/// Tokens that are pure punctuation disappear.
inline std::vector<std::string> tokenize(std::string_view sentence) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  const auto is_punct = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; };
  while (i < sentence.size()) {
    while (i < sentence.size() && is_space(sentence[i])) ++i;
    std::size_t j = i;
    while (j < sentence.size() && !is_space(sentence[j])) ++j;
    std::string_view tok = sentence.substr(i, j - i);
    while (!tok.empty() && is_punct(tok.front())) tok.remove_prefix(1);
    while (!tok.empty() && is_punct(tok.back())) tok.remove_suffix(1);
    if (!tok.empty()) out.emplace_back(tok);
    i = j;
  }
  return out;
}

class Vocabulary {
 public:
  static constexpr std::size_t pad = 0;
  static constexpr std::size_t unk = 1;
  static constexpr std::string_view pad_token = "<pad>";
  static constexpr std::string_view unk_token = "<unk>";

  Vocabulary() : tokens_{std::string(pad_token), std::string(unk_token)} {}

  /// Adds a token; returns false (and leaves the vocabulary unchanged) for duplicates.
  bool add(std::string token) {
    if (index_.count(token) || token == pad_token || token == unk_token) return false;
    index_.emplace(token, tokens_.size());
    tokens_.push_back(std::move(token));
    return true;
  }

  std::optional<std::size_t> find(std::string_view token) const {
    if (auto it = index_.find(std::string(token)); it != index_.end()) return it->second;
    return std::nullopt;
  }

  /// Exact match, then lowercase match, then UNK.
  std::size_t lookup(std::string_view token) const {
    if (auto i = find(token)) return *i;
    if (auto i = find(ascii_lower(token))) return *i;
    return unk;
  }

  const std::string &token(std::size_t i) const { return tokens_.at(i); }
  std::size_t size() const { return tokens_.size(); }

  std::uint64_t fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto &t : tokens_) h = fnv1a(t, fnv1a("\n", h));
    return h;
  }

  /// Two-column text dump: token, tab, index.
  void write(std::ostream &out) const {
    for (std::size_t i = 0; i < tokens_.size(); ++i) out << tokens_[i] << '\t' << i << '\n';
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct GloveLoadStats {
  std::size_t loaded = 0;
  /// Lines skipped: blank, unparseable numbers, or duplicate tokens.
  std::size_t malformed = 0;
};

/// Frozen word vectors: either a GloVe table, or deterministic pseudo-random
/// vectors keyed by token hash when no table is configured.
class WordEmbeddings {
 public:
  WordEmbeddings(const WordEmbeddings &) = delete;
  WordEmbeddings &operator=(const WordEmbeddings &) = delete;

  static std::unique_ptr<WordEmbeddings> hashed(std::size_t dim, std::uint64_t seed) {
    auto e = std::unique_ptr<WordEmbeddings>(new WordEmbeddings());
    e->dim_ = dim;
    e->seed_ = seed;
    return e;
  }

  /// Reads "token v1 ... v_dim" lines. A line with the wrong number of
  /// fields aborts the load with its line number.
  static std::unique_ptr<WordEmbeddings> from_glove(const std::string &path, std::size_t dim = 300,
                                                    GloveLoadStats *stats = nullptr) {
    LineReader reader(path);
    auto e = std::unique_ptr<WordEmbeddings>(new WordEmbeddings());
    e->dim_ = dim;
    e->vocab_ = std::make_unique<Vocabulary>();
    std::vector<double> rows;
    GloveLoadStats st;
    std::string line;
    while (reader.next(line)) {
      if (trim(line).empty()) {
        ++st.malformed;
        continue;
      }
      auto fields = split(trim(line), ' ');
      if (fields.size() != dim + 1)
        throw std::runtime_error(path + ":" + std::to_string(reader.line_number()) + ": expected " +
                                 std::to_string(dim) + " values, found " + std::to_string(fields.size() - 1));
      std::vector<double> vec(dim);
      bool ok = true;
      for (std::size_t k = 0; k < dim && ok; ++k) {
        auto f = fields[k + 1];
        auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), vec[k]);
        ok = ec == std::errc() && ptr == f.data() + f.size() && std::isfinite(vec[k]);
      }
      if (!ok || !e->vocab_->add(std::string(fields[0]))) {
        ++st.malformed;
        continue;
      }
      rows.insert(rows.end(), vec.begin(), vec.end());
      ++st.loaded;
    }
    if (st.loaded == 0) throw std::runtime_error(path + ": no word vectors loaded");
    e->table_ = std::make_unique<Parameter>("word_embeddings", Shape{st.loaded + 2, dim}, true);
    auto &t = e->table_->value;
    std::copy(rows.begin(), rows.end(), t.data.begin() + 2 * dim);
    for (std::size_t r = 0; r < st.loaded; ++r)
      for (std::size_t k = 0; k < dim; ++k) t.at(Vocabulary::unk, k) += rows[r * dim + k];
    for (std::size_t k = 0; k < dim; ++k) t.at(Vocabulary::unk, k) /= static_cast<double>(st.loaded);
    if (stats) *stats = st;
    return e;
  }

  std::size_t dim() const { return dim_; }
  bool is_hashed() const { return !vocab_; }
  const Vocabulary *vocabulary() const { return vocab_.get(); }
  Parameter *table() { return table_.get(); }
  const Parameter *table() const { return table_.get(); }

  /// Identifies the vector source for checkpoint compatibility checks.
  std::uint64_t fingerprint() const {
    if (vocab_) return vocab_->fingerprint();
    return fnv1a("hashed:" + std::to_string(dim_) + ":" + std::to_string(seed_));
  }

  /// Word vector as a graph constant (a row of the frozen table, or a hashed vector).
  Var lookup(Graph &g, std::string_view token) const {
    if (vocab_) return row(g.param(*table_), vocab_->lookup(token));
    return g.constant({dim_}, hashed_vector(token));
  }

  std::vector<double> vector(std::string_view token) const {
    if (vocab_) {
      auto r = table_->value.row(vocab_->lookup(token));
      return {r.begin(), r.end()};
    }
    return hashed_vector(token);
  }

 private:
  WordEmbeddings() = default;

  std::vector<double> hashed_vector(std::string_view token) const {
    Rng rng(fnv1a(ascii_lower(token)) ^ (seed_ * 0x9E3779B97F4A7C15ull));
    std::vector<double> v(dim_);
    for (auto &x : v) x = rng.uniform(-0.5, 0.5);
    return v;
  }

  std::size_t dim_ = 0;
  std::uint64_t seed_ = 0;
  std::unique_ptr<Vocabulary> vocab_;
  std::unique_ptr<Parameter> table_;
};

}  // namespace sentmatch
