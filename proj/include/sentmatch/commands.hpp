// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdio>
#include <iomanip>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "sentmatch/checkpoint.hpp"
#include "sentmatch/grad_check.hpp"
#include "sentmatch/trainer.hpp"
#include "sentmatch/tree_lstm.hpp"

// Command implementations behind the sentmatch executable. Each returns a
// process exit code and writes only to the streams it is handed.

namespace sentmatch {

inline std::vector<PairExample> examples_for(const SickData &data, Split split) {
  auto out = data.subset(split);
  if (out.empty()) throw std::runtime_error("no examples in split " + to_string(split));
  return out;
}

inline void report_load(std::ostream &err, const std::string &where, const SickData &data) {
  err << "loaded " << data.examples.size() << " pairs from " << where << " (train " << data.count(Split::train)
      << ", trial " << data.count(Split::trial) << ", test " << data.count(Split::test) << ")";
  if (!data.rejected.empty()) err << ", rejected " << data.rejected.size() << " rows";
  err << '\n';
  for (std::size_t i = 0; i < std::min<std::size_t>(5, data.rejected.size()); ++i)
    err << "  row " << data.rejected[i].row << ": " << data.rejected[i].message << '\n';
}

inline void print_metrics(std::ostream &out, const MetricsReport &m) {
  out << std::fixed << std::setprecision(4);
  out << "examples: " << m.examples << '\n';
  if (m.relatedness) {
    out << "pearson:  " << m.relatedness->pearson << '\n';
    out << "spearman: " << m.relatedness->spearman << '\n';
    out << "mse:      " << m.relatedness->mse << '\n';
    out << "mean KL:  " << m.relatedness->mean_kl << '\n';
  }
  if (m.entailment) {
    out << "accuracy: " << m.entailment->accuracy << '\n';
    out << "confusion (rows gold, cols predicted: NEUTRAL ENTAILMENT CONTRADICTION)\n";
    for (std::size_t r = 0; r < entailment_classes; ++r) {
      out << "  " << std::left << std::setw(14) << to_string(static_cast<EntailmentLabel>(r)) << std::right;
      for (auto c : m.entailment->confusion[r]) out << std::setw(6) << c;
      out << '\n';
    }
  }
  out << std::defaultfloat << std::setprecision(6);
}

struct TrainCommand {
  std::string config_path;
  std::string data;
  std::string out;
  std::string log;  // defaults to <out>.log.jsonl
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> seed;
  bool keep_best = false;  // write the best-on-trial epoch instead of the last
};

inline int cmd_train(const TrainCommand &c, std::ostream &out, std::ostream &err) {
  Config cfg = Config::load(c.config_path);
  if (c.epochs) cfg.epochs = *c.epochs;
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  const auto data = load_sick_location(c.data);
  report_load(err, c.data, data);
  const auto train_set = examples_for(data, Split::train);
  const auto dev_set = data.subset(Split::trial);

  auto model = std::make_unique<Model>(cfg, make_word_embeddings(cfg));
  model->init(cfg.seed);

  const std::string log_path = c.log.empty() ? c.out + ".log.jsonl" : c.log;
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw std::runtime_error("cannot write log " + log_path);

  TrainOptions opt;
  opt.log = &log;
  if (!dev_set.empty()) opt.dev = &dev_set;
  std::optional<Checkpoint> best;
  double best_score = -std::numeric_limits<double>::infinity();
  opt.on_epoch = [&](const EpochSummary &s, Model &m) {
    out << "epoch " << s.epoch << " loss " << s.loss;
    if (s.dev_metrics) {
      const auto &d = *s.dev_metrics;
      double score = 0.0;
      if (d.relatedness) {
        out << " dev pearson " << d.relatedness->pearson;
        score += std::isnan(d.relatedness->pearson) ? -1.0 : d.relatedness->pearson;
      }
      if (d.entailment) {
        out << " dev accuracy " << d.entailment->accuracy;
        score += d.entailment->accuracy;
      }
      if (c.keep_best && score > best_score) {
        best_score = score;
        best = snapshot(m);
      }
    }
    out << '\n';
    return true;
  };
  const auto result = train(*model, train_set, opt);
  if (c.keep_best && best) restore(*model, *best);
  save_checkpoint(c.out, *model);
  out << "wrote " << c.out << " after " << result.epochs.size() << " epochs, " << result.steps << " steps";
  if (result.truncated_sentences) out << ", " << result.truncated_sentences << " sentences truncated";
  if (result.rejected_steps) out << ", " << result.rejected_steps << " steps rejected";
  out << '\n';
  return 0;
}

inline int cmd_eval(const std::string &ckpt, const std::string &data_path, Split split, std::ostream &out,
                    std::ostream &err) {
  auto model = load_model(ckpt);
  const auto data = load_sick_location(data_path);
  report_load(err, data_path, data);
  print_metrics(out, evaluate(*model, examples_for(data, split)));
  return 0;
}

/// Reads "sentence A<TAB>sentence B" lines; prints the raw relatedness score
/// and/or label for each. Bad lines are reported and yield a nonzero exit.
inline int cmd_predict(const std::string &ckpt, std::istream &in, std::ostream &out, std::ostream &err) {
  auto model = load_model(ckpt);
  std::string line;
  std::size_t line_no = 0;
  int status = 0;
  out << std::setprecision(6);
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      err << "line " << line_no << ": expected two tab-separated sentences\n";
      status = 1;
      continue;
    }
    const auto a = tokenize(std::string_view(line).substr(0, tab));
    const auto b = tokenize(std::string_view(line).substr(tab + 1));
    if (a.empty() || b.empty()) {
      err << "line " << line_no << ": empty sentence\n";
      status = 1;
      continue;
    }
    const auto p = model->predict(a, b);
    bool first = true;
    if (p.score) {
      out << *p.score;
      first = false;
    }
    if (p.label) out << (first ? "" : "\t") << to_string(*p.label);
    out << '\n';
  }
  return status;
}

/// Small dimensions that keep an exhaustive finite-difference sweep cheap
/// while exercising every module.
inline Config gradcheck_config(Topology topology) {
  Config c;
  c.task = Task::joint;
  c.topology = topology;
  c.word_dim = 6;
  c.char_length = 6;
  c.char_frames = 5;
  c.highway_hidden = 3;
  c.memory_dim = 3;
  c.layers = 2;
  c.match_frames1 = 4;
  c.match_frames2 = 4;
  return c;
}

inline std::vector<PairExample> gradcheck_batch() {
  auto make = [](std::string id, std::string a, std::string b, double score, EntailmentLabel label) {
    PairExample e;
    e.id = std::move(id);
    e.sentence_a = std::move(a);
    e.sentence_b = std::move(b);
    e.tokens_a = tokenize(e.sentence_a);
    e.tokens_b = tokenize(e.sentence_b);
    e.score = score;
    e.label = label;
    return e;
  };
  return {make("g1", "A man is playing a guitar", "A man plays the guitar", 4.6, EntailmentLabel::entailment),
          make("g2", "Two kids run in the park", "Nobody is cooking rice", 1.3, EntailmentLabel::neutral)};
}

/// Moves parameters off exact relu kinks: zero biases over all-zero padding
/// rows would otherwise put pre-activations exactly at 0.
inline void jitter(const ParameterList &params, Rng &rng, double amount) {
  for (auto *p : params)
    if (!p->constant)
      for (double &v : p->value.data) v += rng.uniform(-amount, amount);
}

struct GradCheckCase {
  std::string name;
  GradCheckReport report;
};

inline std::vector<GradCheckCase> run_gradchecks(std::uint64_t seed, double epsilon = 1e-5) {
  std::vector<GradCheckCase> cases;
  const auto batch = gradcheck_batch();
  GradCheckOptions opt;
  opt.epsilon = epsilon;
  opt.seed = seed;

  for (Topology topo : {Topology::I, Topology::II}) {
    const Config cfg = gradcheck_config(topo);
    Model model(cfg, make_word_embeddings(cfg));
    model.init(seed);
    auto theta = model.parameters();
    Rng rng(seed ^ 0xA5A5A5A5ull);
    jitter(theta, rng, 0.1);
    auto build = [&](Graph &g) {
      Var total = g.scalar(0.0);
      for (const auto &ex : batch) total = add(total, model.example_loss(g, ex));
      return add(scale(total, 1.0 / static_cast<double>(batch.size())), l2_term(g, theta, cfg.l2));
    };
    cases.push_back({"model/topology " + to_string(topo), grad_check(build, theta, opt)});
  }

  {
    // Dependency-tree encoder over word vectors of the first pair.
    const Config cfg = gradcheck_config(Topology::I);
    auto words = make_word_embeddings(cfg);
    LstmParams lstm("tree", cfg.word_dim, cfg.memory_dim);
    Rng rng(seed);
    lstm.init(rng);
    const auto &tokens = batch[0].tokens_a;
    // "man" is the root with children 1, 3, 5; "is" heads 4 and 6.
    const DepTree tree = DepTree::from_heads({2, 0, 2, 3, 2, 3});
    auto build = [&](Graph &g) {
      std::vector<Var> xs;
      for (const auto &t : tokens) xs.push_back(words->lookup(g, t));
      const Var h = tree_lstm_encode(g, lstm, xs, tree);
      return sum(square(add_scalar(h, -0.3)));
    };
    cases.push_back({"tree-lstm", grad_check(build, lstm.parameters(), opt)});
  }
  return cases;
}

inline int cmd_gradcheck(std::uint64_t seed, std::ostream &out, double tolerance = 1e-4) {
  const auto start = std::chrono::steady_clock::now();
  const auto cases = run_gradchecks(seed);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  bool ok = true;
  double overall = 0.0;
  out << std::scientific << std::setprecision(3);
  for (const auto &c : cases) {
    out << c.name << ": " << c.report.entries_checked << " entries, max relative error " << c.report.max_rel_error
        << " (" << c.report.worst.param << "[" << c.report.worst.index << "]: analytic " << c.report.worst.analytic
        << ", numeric " << c.report.worst.numeric << ")";
    if (c.report.constant_grad_max != 0.0) out << ", frozen-parameter gradient " << c.report.constant_grad_max;
    out << '\n';
    for (const auto &e : c.report.per_param)
      out << "  " << std::left << std::setw(28) << e.param << std::right << e.rel_error << '\n';
    ok = ok && c.report.passed(tolerance);
    overall = std::max(overall, c.report.max_rel_error);
  }
  out << "max relative error " << overall << " (tolerance " << tolerance << ") in " << std::fixed
      << std::setprecision(2) << secs << " s: " << (ok ? "PASS" : "FAIL") << '\n';
  out << std::defaultfloat << std::setprecision(6);
  return ok ? 0 : 1;
}

struct CompareRow {
  Topology topology;
  MetricsReport metrics;
  double seconds = 0.0;
};

/// Trains one model per topology under otherwise identical settings and
/// evaluates each on the test split (falling back to trial, then train).
inline std::vector<CompareRow> compare_topologies(const Config &base, const SickData &data, std::ostream *progress) {
  const auto train_set = examples_for(data, Split::train);
  std::vector<PairExample> eval_set = data.subset(Split::test);
  if (eval_set.empty()) eval_set = data.subset(Split::trial);
  if (eval_set.empty()) eval_set = train_set;
  auto words = std::shared_ptr<WordEmbeddings>(make_word_embeddings(base));
  std::vector<CompareRow> rows;
  for (Topology topo : {Topology::I, Topology::II}) {
    Config cfg = base;
    cfg.topology = topo;
    Model model(cfg, words);
    model.init(cfg.seed);
    const auto start = std::chrono::steady_clock::now();
    TrainOptions opt;
    if (progress)
      opt.on_epoch = [&](const EpochSummary &s, Model &) {
        *progress << "topology " << to_string(topo) << " epoch " << s.epoch << " loss " << s.loss << '\n';
        return true;
      };
    train(model, train_set, opt);
    rows.push_back({topo, evaluate(model, eval_set),
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()});
  }
  return rows;
}

inline int cmd_compare_topologies(const std::string &config_path, const std::string &data_path, std::ostream &out,
                                  std::ostream &err) {
  const Config cfg = Config::load(config_path);
  const auto data = load_sick_location(data_path);
  report_load(err, data_path, data);
  const auto rows = compare_topologies(cfg, data, &err);
  out << "| topology | stage widths | pearson | spearman | mse | accuracy | train s |\n";
  out << "|---|---|---|---|---|---|---|\n";
  out << std::fixed << std::setprecision(4);
  for (const auto &r : rows) {
    auto cell = [&](std::optional<double> v) { return v ? std::to_string(*v).substr(0, 6) : std::string("-"); };
    const auto &m = r.metrics;
    out << "| " << to_string(r.topology) << " | " << (r.topology == Topology::I ? "1 then 2" : "2 then 1") << " | "
        << cell(m.relatedness ? std::optional(m.relatedness->pearson) : std::nullopt) << " | "
        << cell(m.relatedness ? std::optional(m.relatedness->spearman) : std::nullopt) << " | "
        << cell(m.relatedness ? std::optional(m.relatedness->mse) : std::nullopt) << " | "
        << cell(m.entailment ? std::optional(m.entailment->accuracy) : std::nullopt) << " | " << std::setprecision(1)
        << r.seconds << std::setprecision(4) << " |\n";
  }
  out << std::defaultfloat;
  return 0;
}

}  // namespace sentmatch
