// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "sentmatch/embeddings.hpp"
#include "sentmatch/io.hpp"
#include "sentmatch/objectives.hpp"

namespace sentmatch {

enum class Split { train, trial, test };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "TRAIN";
    case Split::trial: return "TRIAL";
    case Split::test: return "TEST";
  }
  return "?";
}

inline Split parse_split(std::string_view s) {
  const std::string up = [&] {
    std::string r;
    for (char c : s) r += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return r;
  }();
  if (up == "TRAIN") return Split::train;
  if (up == "TRIAL" || up == "DEV") return Split::trial;
  if (up == "TEST") return Split::test;
  throw std::invalid_argument("unknown split '" + std::string(s) + "'");
}

struct PairExample {
  std::string id;
  std::string sentence_a, sentence_b;
  std::vector<std::string> tokens_a, tokens_b;
  double score = 1.0;
  EntailmentLabel label = EntailmentLabel::neutral;
  Split split = Split::train;
};

struct RowError {
  std::size_t row = 0;  // 1-based file line
  std::string message;
};

struct SickData {
  std::vector<PairExample> examples;
  std::vector<RowError> rejected;

  std::size_t count(Split s) const {
    return static_cast<std::size_t>(
        std::count_if(examples.begin(), examples.end(), [s](const PairExample &e) { return e.split == s; }));
  }

  std::vector<PairExample> subset(Split s) const {
    std::vector<PairExample> out;
    for (const auto &e : examples)
      if (e.split == s) out.push_back(e);
    return out;
  }
};

/// Tab-separated SICK file (plain or gzip). Columns are resolved from the
/// header; pair_ID, sentence_A, sentence_B, relatedness_score and
/// entailment_judgment (or entailment_label) are required, SemEval_set is
/// optional and otherwise `default_split` applies. Bad rows are skipped and
/// listed in `rejected`.
inline SickData load_sick(const std::string &path, Split default_split = Split::train) {
  LineReader reader(path);
  std::string line;
  if (!reader.next(line)) throw std::runtime_error(path + ": empty file");
  std::map<std::string, std::size_t, std::less<>> column;
  {
    auto header = split(line, '\t');
    for (std::size_t i = 0; i < header.size(); ++i) column.emplace(std::string(trim(header[i])), i);
  }
  auto need = [&](std::initializer_list<std::string_view> names) -> std::size_t {
    for (auto n : names)
      if (auto it = column.find(n); it != column.end()) return it->second;
    throw std::runtime_error(path + ": missing required column '" + std::string(*names.begin()) + "'");
  };
  const std::size_t c_id = need({"pair_ID"}), c_a = need({"sentence_A"}), c_b = need({"sentence_B"}),
                    c_score = need({"relatedness_score"}),
                    c_label = need({"entailment_judgment", "entailment_label"});
  const auto split_it = column.find("SemEval_set");
  const std::size_t width = column.size();

  SickData data;
  while (reader.next(line)) {
    if (trim(line).empty()) continue;
    const std::size_t row = reader.line_number();
    auto fields = split(line, '\t');
    if (fields.size() < width) {
      data.rejected.push_back({row, "expected " + std::to_string(width) + " columns, found " +
                                        std::to_string(fields.size())});
      continue;
    }
    try {
      PairExample ex;
      ex.id = std::string(trim(fields[c_id]));
      ex.sentence_a = std::string(trim(fields[c_a]));
      ex.sentence_b = std::string(trim(fields[c_b]));
      const auto score_text = trim(fields[c_score]);
      auto [ptr, ec] = std::from_chars(score_text.data(), score_text.data() + score_text.size(), ex.score);
      if (ec != std::errc() || ptr != score_text.data() + score_text.size())
        throw std::invalid_argument("unparseable relatedness score '" + std::string(score_text) + "'");
      if (!(ex.score >= 1.0 && ex.score <= 5.0))
        throw std::invalid_argument("relatedness score " + std::string(score_text) + " outside [1, 5]");
      ex.label = parse_label(trim(fields[c_label]));
      ex.split = split_it != column.end() ? parse_split(trim(fields[split_it->second])) : default_split;
      ex.tokens_a = tokenize(ex.sentence_a);
      ex.tokens_b = tokenize(ex.sentence_b);
      if (ex.tokens_a.empty() || ex.tokens_b.empty()) throw std::invalid_argument("empty sentence");
      data.examples.push_back(std::move(ex));
    } catch (const std::invalid_argument &e) {
      data.rejected.push_back({row, e.what()});
    }
  }
  return data;
}

/// Resolves a data location: a single file, a directory holding SICK.txt,
/// or a directory holding the SICK_train / SICK_trial / SICK_test_annotated
/// distribution files (each optionally .gz).
inline SickData load_sick_location(const std::string &location) {
  namespace fs = std::filesystem;
  if (fs::is_regular_file(location)) return load_sick(location);
  if (!fs::is_directory(location)) throw std::runtime_error("data path not found: " + location);
  auto find = [&](const std::string &stem) -> std::optional<std::string> {
    for (const auto *ext : {"", ".gz"}) {
      const auto p = fs::path(location) / (stem + ext);
      if (fs::is_regular_file(p)) return p.string();
    }
    return std::nullopt;
  };
  if (auto full = find("SICK.txt")) return load_sick(*full);
  SickData all;
  bool any = false;
  const std::pair<const char *, Split> parts[] = {
      {"SICK_train.txt", Split::train}, {"SICK_trial.txt", Split::trial}, {"SICK_test_annotated.txt", Split::test}};
  for (const auto &[name, split] : parts) {
    auto file = find(name);
    if (!file) continue;
    any = true;
    auto d = load_sick(*file, split);
    for (auto &e : d.examples) all.examples.push_back(std::move(e));
    for (auto &r : d.rejected) all.rejected.push_back({r.row, *file + ": " + r.message});
  }
  if (!any) throw std::runtime_error("no SICK files found in " + location);
  return all;
}

/// Writes the consumed columns back in SICK layout.
inline void write_sick(std::ostream &out, const std::vector<PairExample> &examples) {
  out << "pair_ID\tsentence_A\tsentence_B\trelatedness_score\tentailment_judgment\tSemEval_set\n";
  out.precision(17);
  for (const auto &e : examples)
    out << e.id << '\t' << e.sentence_a << '\t' << e.sentence_b << '\t' << e.score << '\t' << to_string(e.label)
        << '\t' << to_string(e.split) << '\n';
}

/// Seeded permutation of 0..n-1 for a given (seed, epoch).
inline std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed * 0x9E3779B97F4A7C15ull + epoch * 0xD1B54A32D192ED03ull + 1);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

/// Shuffled mini-batches of example indices; the last batch may be short.
inline std::vector<std::vector<std::size_t>> batch_iter(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                        std::uint64_t epoch) {
  if (batch_size == 0) throw std::invalid_argument("batch size must be at least 1");
  const auto order = epoch_permutation(n, seed, epoch);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < n; i += batch_size)
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
  return batches;
}

}  // namespace sentmatch
