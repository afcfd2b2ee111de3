// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "sentmatch/io.hpp"
#include "sentmatch/match_cnn.hpp"

namespace sentmatch {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Task { relatedness, entailment, joint };

inline std::string to_string(Task t) {
  switch (t) {
    case Task::relatedness: return "relatedness";
    case Task::entailment: return "entailment";
    case Task::joint: return "joint";
  }
  return "?";
}

inline Task parse_task(std::string_view s) {
  if (s == "relatedness") return Task::relatedness;
  if (s == "entailment") return Task::entailment;
  if (s == "joint") return Task::joint;
  throw ConfigError("unknown task '" + std::string(s) + "'");
}

inline bool uses_relatedness(Task t) { return t != Task::entailment; }
inline bool uses_entailment(Task t) { return t != Task::relatedness; }

/// Everything needed to rebuild a model and rerun its training.
///
/// Text form is one `key = value` per line; `#` starts a comment and string
/// values may be double-quoted.
struct Config {
  // model
  Task task = Task::relatedness;
  Topology topology = Topology::I;
  bool bidirectional = true;
  std::string glove_path;
  std::size_t word_dim = 300;
  std::uint64_t embedding_seed = 0;
  std::size_t char_length = 16;
  std::size_t char_frames = 100;
  std::size_t char_kernel = 3;
  std::size_t char_stages = 1;
  std::size_t highway_hidden = 50;
  std::size_t memory_dim = 100;
  std::size_t layers = 2;
  std::size_t match_frames1 = 150;
  std::size_t match_frames2 = 150;
  bool match_per_plane = false;
  std::size_t relatedness_scale = 5;

  // training
  double learning_rate = 0.05;
  std::size_t batch_size = 25;
  double l2 = 1e-4;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  double adagrad_eps = 1e-8;
  std::size_t max_length = 37;
  double clip_norm = 0.0;

  std::string to_text() const {
    std::ostringstream os;
    os.precision(17);
    for_each_field([&](const std::string &key, auto &value) { os << key << " = " << format(value) << '\n'; });
    return os.str();
  }

  static Config parse(std::string_view text) {
    Config c;
    std::size_t line_no = 0;
    for (auto raw : split(text, '\n')) {
      ++line_no;
      auto line = raw;
      if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos)
        throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
      const std::string key(trim(line.substr(0, eq)));
      auto value = trim(line.substr(eq + 1));
      if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
      bool found = false;
      c.for_each_field([&](const std::string &k, auto &field) {
        if (k != key) return;
        found = true;
        try {
          assign(field, value);
        } catch (const std::exception &e) {
          throw ConfigError("config line " + std::to_string(line_no) + " (" + key + "): " + e.what());
        }
      });
      if (!found) throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    c.validate();
    return c;
  }

  static Config load(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  void validate() const {
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (l2 < 0.0) throw ConfigError("l2 must be non-negative");
    if (adagrad_eps <= 0.0) throw ConfigError("adagrad_eps must be positive");
    if (max_length == 0) throw ConfigError("max_length must be positive");
    if (layers == 0 || memory_dim == 0 || word_dim == 0) throw ConfigError("model dimensions must be positive");
    if (relatedness_scale < 2) throw ConfigError("relatedness_scale must exceed 1");
    if (clip_norm < 0.0) throw ConfigError("clip_norm must be non-negative");
  }

  CharCnnConfig char_cnn() const { return {char_length, char_frames, char_kernel, char_stages, highway_hidden}; }

  MatchCnnConfig match_cnn() const { return {topology, match_frames1, match_frames2, match_per_plane}; }

 private:
  template <class F>
  void for_each_field(F &&f) {
    f("task", task);
    f("topology", topology);
    f("bidirectional", bidirectional);
    f("glove_path", glove_path);
    f("word_dim", word_dim);
    f("embedding_seed", embedding_seed);
    f("char_length", char_length);
    f("char_frames", char_frames);
    f("char_kernel", char_kernel);
    f("char_stages", char_stages);
    f("highway_hidden", highway_hidden);
    f("memory_dim", memory_dim);
    f("layers", layers);
    f("match_frames1", match_frames1);
    f("match_frames2", match_frames2);
    f("match_per_plane", match_per_plane);
    f("relatedness_scale", relatedness_scale);
    f("learning_rate", learning_rate);
    f("batch_size", batch_size);
    f("l2", l2);
    f("epochs", epochs);
    f("seed", seed);
    f("adagrad_eps", adagrad_eps);
    f("max_length", max_length);
    f("clip_norm", clip_norm);
  }

  template <class F>
  void for_each_field(F &&f) const {
    const_cast<Config *>(this)->for_each_field([&](const std::string &k, auto &v) { f(k, std::as_const(v)); });
  }

  static std::string format(Task t) { return to_string(t); }
  static std::string format(Topology t) { return '"' + to_string(t) + '"'; }
  static std::string format(bool b) { return b ? "true" : "false"; }
  static std::string format(const std::string &s) { return '"' + s + '"'; }
  static std::string format(std::size_t v) { return std::to_string(v); }
  static std::string format(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  }

  static void assign(Task &t, std::string_view v) { t = parse_task(v); }
  static void assign(Topology &t, std::string_view v) { t = parse_topology(v); }
  static void assign(std::string &s, std::string_view v) { s = std::string(v); }
  static void assign(bool &b, std::string_view v) {
    if (v == "true" || v == "1") b = true;
    else if (v == "false" || v == "0") b = false;
    else throw ConfigError("expected true or false");
  }
  static void assign(std::size_t &n, std::string_view v) {
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
    if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("expected a non-negative integer");
  }
  static void assign(double &d, std::string_view v) {
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
    if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("expected a number");
  }
};

}  // namespace sentmatch
