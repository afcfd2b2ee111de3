// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite. Prints one PASS/FAIL line per criterion; the exit status
// reflects the gating criteria (1-5 and 8). Criterion 6 needs the real SICK
// corpus (SICK_DIR, optionally GLOVE_PATH) and criterion 7 is reported only.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sentmatch/sentmatch.hpp"

using namespace sentmatch;
namespace fs = std::filesystem;

namespace {

enum class Status { pass, fail, not_run };

struct Outcome {
  Status status = Status::fail;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

std::string data_file(const std::string &name) { return std::string(SENTMATCH_TEST_DATA) + "/" + name; }

std::vector<double> random_values(Rng &rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto &x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

Tensor random_tensor(Rng &rng, Shape shape) {
  const auto n = shape_size(shape);
  return Tensor(std::move(shape), random_values(rng, n));
}

void randomize(const ParameterList &ps, Rng &rng) {
  for (auto *p : ps)
    for (auto &x : p->value.data) x = rng.uniform(-1.0, 1.0);
}

// 1 ---------------------------------------------------------------------------

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  std::ostringstream log;
  const int status = cmd_gradcheck(7, log);
  const double secs = seconds_since(t0);
  std::istringstream lines(log.str());
  std::string line, worst;
  while (std::getline(lines, line))
    if (line.rfind("max relative error", 0) == 0) worst = line;
  Outcome o;
  o.status = status == 0 && secs < 60.0 ? Status::pass : Status::fail;
  o.detail = (worst.empty() ? "see gradcheck output" : worst) + ", " + fmt(secs) + " s (limit 60 s)";
  if (status != 0) std::cerr << log.str();
  return o;
}

// 2 ---------------------------------------------------------------------------

struct MaxDiff {
  double worst = 0.0;
  std::size_t trials = 0;
  void add(double a, double b) { worst = std::max(worst, std::fabs(a - b)); }
};

MaxDiff temporal_conv_oracle(std::size_t trials) {
  MaxDiff m;
  Rng rng(201);
  const std::string letters = "abcdefghijklmnopqrstuvwxyz0123456789-";
  for (std::size_t t = 0; t < trials; ++t, ++m.trials) {
    const std::size_t l0 = 3 + rng.below(14), frames = 1 + rng.below(8);
    std::string tok;
    for (std::size_t i = 0, n = rng.below(l0 + 3); i < n; ++i) tok += letters[rng.below(letters.size())];
    const auto grid = quantize(tok, l0);
    const auto w = random_tensor(rng, {frames, 3 * Alphabet::size});
    const auto b = random_tensor(rng, {frames});
    Graph g(false);
    const auto out = g.tensor(temporal_conv(g.constant(grid), g.constant(w), g.constant(b), 3));
    const auto ref = oracle::conv(oracle::to_mat(grid), w, b, 3, 1);
    for (std::size_t i = 0; i < ref.size(); ++i)
      for (std::size_t f = 0; f < frames; ++f) m.add(out.at(i, f), std::max(0.0, ref[i][f]));
  }
  return m;
}

MaxDiff lstm_step_oracle(std::size_t trials) {
  MaxDiff m;
  Rng rng(202);
  for (std::size_t t = 0; t < trials; ++t, ++m.trials) {
    const std::size_t in = 1 + rng.below(8), d = 1 + rng.below(8);
    LstmParams p("l", in, d);
    randomize(p.parameters(), rng);
    const auto x = random_values(rng, in), h = random_values(rng, d), c = random_values(rng, d);
    Graph g(false);
    const auto s = lstm_step(g, p, g.constant({in}, x), {g.constant({d}, h), g.constant({d}, c)});
    const auto ref = oracle::lstm_step(p, x, {h, c});
    const auto hv = g.value(s.h), cv = g.value(s.c);
    for (std::size_t k = 0; k < d; ++k) {
      m.add(hv[k], ref.h[k]);
      m.add(cv[k], ref.c[k]);
    }
  }
  return m;
}

DepTree random_tree(Rng &rng, std::size_t n) {
  std::vector<std::size_t> order(n), heads(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  heads[order[0]] = 0;
  for (std::size_t i = 1; i < n; ++i) heads[order[i]] = order[rng.below(i)] + 1;
  return DepTree::from_heads(heads);
}

MaxDiff tree_node_oracle(std::size_t trials) {
  MaxDiff m;
  Rng rng(203);
  for (std::size_t t = 0; t < trials; ++t, ++m.trials) {
    const std::size_t n = 1 + rng.below(8), in = 1 + rng.below(5), d = 1 + rng.below(5);
    const auto tree = random_tree(rng, n);
    LstmParams p("t", in, d);
    randomize(p.parameters(), rng);
    std::vector<oracle::Vec> xs;
    Graph g(false);
    std::vector<Var> vars;
    for (std::size_t i = 0; i < n; ++i) {
      xs.push_back(random_values(rng, in));
      vars.push_back(g.constant({in}, xs.back()));
    }
    const auto h = g.value(tree_lstm_encode(g, p, vars, tree));
    const auto ref = oracle::tree_node(p, xs, tree, tree.root);
    for (std::size_t k = 0; k < d; ++k) m.add(h[k], ref.h[k]);
  }
  return m;
}

MaxDiff feature_plane_oracle(std::size_t trials) {
  MaxDiff m;
  Rng rng(204);
  for (std::size_t t = 0; t < trials; ++t, ++m.trials) {
    const std::size_t n = 1 + rng.below(5), w = 1 + rng.below(8);
    FpConvParams fp(w);
    randomize(fp.parameters(), rng);
    const auto a = random_tensor(rng, {n, w}), b = random_tensor(rng, {n, w});
    Graph g(false);
    const auto planes = g.tensor(assemble(g, fp, g.constant(a), g.constant(b)));
    oracle::Mat joined;
    for (std::size_t r = 0; r < n; ++r) {
      joined.emplace_back(a.row(r).begin(), a.row(r).end());
      joined.emplace_back(b.row(r).begin(), b.row(r).end());
    }
    const auto fp3 = oracle::tanh_of(oracle::conv(joined, fp.conv.weight.value, fp.conv.bias.value, 2, 2));
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < w; ++c) {
        m.add(planes.data[(0 * n + r) * w + c], a.at(r, c) * b.at(r, c));
        m.add(planes.data[(1 * n + r) * w + c], std::fabs(a.at(r, c) - b.at(r, c)));
        m.add(planes.data[(2 * n + r) * w + c], fp3[r][c]);
      }
  }
  return m;
}

MaxDiff match_cnn_oracle(std::size_t trials) {
  MaxDiff m;
  Rng rng(205);
  for (std::size_t t = 0; t < trials; ++t, ++m.trials) {
    const auto topo = t % 2 ? Topology::II : Topology::I;
    const bool per_plane = t % 4 >= 2;
    const std::size_t n = 2 + rng.below(4), w = 1 + rng.below(6);
    const std::size_t f1 = 1 + rng.below(6), f2 = 1 + rng.below(6);
    MatchCnn cnn(MatchCnnConfig{topo, f1, f2, per_plane}, w);
    randomize(cnn.parameters(), rng);
    const auto features = random_tensor(rng, {3, n, w});
    Graph g(false);
    const auto out = g.value(cnn.forward(g, g.constant(features)));
    const auto ref = oracle::match_cnn(cnn, features);
    if (out.size() != ref.size()) {
      m.worst = INFINITY;
      continue;
    }
    for (std::size_t i = 0; i < ref.size(); ++i) m.add(out[i], ref[i]);
  }
  return m;
}

Outcome oracle_equivalence() {
  const std::size_t trials = 200;
  const std::vector<std::pair<std::string, std::function<MaxDiff(std::size_t)>>> checks = {
      {"temporal conv", temporal_conv_oracle}, {"lstm step", lstm_step_oracle},
      {"tree-lstm node", tree_node_oracle},    {"feature planes", feature_plane_oracle},
      {"match cnn", match_cnn_oracle},
  };
  Outcome o{Status::pass, ""};
  for (const auto &[name, run] : checks) {
    const auto m = run(trials);
    if (!(m.worst <= 1e-12) || m.trials < 100) o.status = Status::fail;
    o.detail += (o.detail.empty() ? "" : "; ") + name + " " + fmt(m.worst) + " over " + std::to_string(m.trials);
  }
  o.detail += " (limit 1e-12)";
  return o;
}

// 3 ---------------------------------------------------------------------------

Outcome sparse_target_property() {
  Rng rng(301);
  double worst_sum = 0.0, worst_mean = 0.0;
  bool one_hot = true;
  for (int i = 0; i < 10000; ++i) {
    const double y = rng.uniform(1.0, 5.0);
    const auto p = sparse_target(y, 5);
    double s = 0.0, mean = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      s += p[k];
      mean += static_cast<double>(k + 1) * p[k];
    }
    worst_sum = std::max(worst_sum, std::fabs(s - 1.0));
    worst_mean = std::max(worst_mean, std::fabs(mean - y));
  }
  for (int y = 1; y <= 5; ++y) {
    const auto p = sparse_target(y, 5);
    for (int k = 0; k < 5; ++k) one_hot = one_hot && p[k] == (k + 1 == y ? 1.0 : 0.0);
  }
  Outcome o;
  o.status = worst_sum <= 1e-12 && worst_mean <= 1e-12 && one_hot ? Status::pass : Status::fail;
  o.detail = "10000 draws: max |sum p - 1| " + fmt(worst_sum) + ", max |r.p - y| " + fmt(worst_mean) +
             ", integer targets one-hot: " + (one_hot ? "yes" : "no");
  return o;
}

// 4 ---------------------------------------------------------------------------

struct OverfitRun {
  std::size_t epochs = 0;
  bool reached = false;
  double final_metric = 0.0;
};

OverfitRun overfit(Task task, const std::vector<PairExample> &data) {
  Config cfg;
  cfg.task = task;
  cfg.epochs = 200;
  cfg.seed = 1;
  Model model(cfg, make_word_embeddings(cfg));
  model.init(cfg.seed);
  OverfitRun run;
  TrainOptions opt;
  opt.eval_train = true;
  opt.on_epoch = [&](const EpochSummary &s, Model &) {
    const auto &m = *s.train_metrics;
    run.epochs = s.epoch;
    run.final_metric = task == Task::entailment ? m.entailment->accuracy : m.relatedness->mean_kl;
    run.reached = task == Task::entailment ? m.entailment->accuracy == 1.0 : m.relatedness->mean_kl <= 0.05;
    return !run.reached;
  };
  train(model, data, opt);
  return run;
}

Outcome overfit_check() {
  const auto data = load_sick(data_file("sick_sample64.tsv"), Split::train);
  const auto t0 = Clock::now();
  const auto ent = overfit(Task::entailment, data.examples);
  const double t_ent = seconds_since(t0);
  const auto rel = overfit(Task::relatedness, data.examples);
  const double total = seconds_since(t0);
  Outcome o;
  o.status = ent.reached && rel.reached && total < 600.0 ? Status::pass : Status::fail;
  o.detail = std::to_string(data.examples.size()) + " pairs; entailment accuracy " + fmt(ent.final_metric) +
             " at epoch " + std::to_string(ent.epochs) + " (" + fmt(t_ent) + " s); relatedness KL " +
             fmt(rel.final_metric) + " at epoch " + std::to_string(rel.epochs) + " (" + fmt(total - t_ent) +
             " s); total " + fmt(total) + " s (limit 600 s)";
  return o;
}

// 5 ---------------------------------------------------------------------------

Outcome chain_degeneracy() {
  Rng rng(501);
  std::size_t mismatches = 0, trials = 0;
  auto one = [&](std::size_t in, std::size_t d, std::size_t T) {
    LstmParams p("t", in, d);
    randomize(p.parameters(), rng);
    Graph g(false);
    std::vector<Var> xs;
    for (std::size_t t = 0; t < T; ++t) xs.push_back(g.constant(random_tensor(rng, {in})));
    const auto tree = g.tensor(tree_lstm_encode(g, p, xs, DepTree::chain(T)));
    const auto seq = g.tensor(run_lstm(g, p, xs, false).back());
    ++trials;
    if (tree.data.size() != seq.data.size() ||
        std::memcmp(tree.data.data(), seq.data.data(), tree.data.size() * sizeof(double)) != 0)
      ++mismatches;
  };
  for (int t = 0; t < 200; ++t) one(1 + rng.below(8), 1 + rng.below(8), 1 + rng.below(12));
  one(400, 100, 37);  // model-sized
  Outcome o;
  o.status = mismatches == 0 ? Status::pass : Status::fail;
  o.detail = std::to_string(trials - mismatches) + "/" + std::to_string(trials) + " chains bit-identical";
  return o;
}

// 6 ---------------------------------------------------------------------------

struct BestRun {
  double dev = -INFINITY;
  MetricsReport test;
  std::size_t epoch = 0;
};

/// Trains, keeps the epoch with the best trial-split score, evaluates it on test.
BestRun train_best_on_dev(Config cfg, std::shared_ptr<WordEmbeddings> words, const std::vector<PairExample> &train_set,
                          const std::vector<PairExample> &dev, const std::vector<PairExample> &test) {
  Model model(cfg, std::move(words));
  model.init(cfg.seed);
  BestRun best;
  std::optional<Checkpoint> snap;
  TrainOptions opt;
  opt.dev = &dev;
  opt.on_epoch = [&](const EpochSummary &s, Model &m) {
    const auto &d = *s.dev_metrics;
    const double score = d.relatedness ? d.relatedness->pearson : d.entailment->accuracy;
    if (score > best.dev) {
      best.dev = score;
      best.epoch = s.epoch;
      snap = snapshot(m);
    }
    return true;
  };
  train(model, train_set, opt);
  if (snap) restore(model, *snap);
  best.test = evaluate(model, test);
  return best;
}

Outcome full_sick() {
  const char *dir = std::getenv("SICK_DIR");
  if (!dir || !*dir) return {Status::not_run, "set SICK_DIR (and optionally GLOVE_PATH) to the SICK corpus to run"};
  const auto data = load_sick_location(dir);
  const auto train_set = data.subset(Split::train), dev = data.subset(Split::trial), test = data.subset(Split::test);
  if (train_set.empty() || dev.empty() || test.empty()) return {Status::fail, std::string(dir) + ": missing a split"};
  Config base;
  if (const char *glove = std::getenv("GLOVE_PATH")) base.glove_path = glove;
  base.epochs = 30;
  std::shared_ptr<WordEmbeddings> words = make_word_embeddings(base);
  double best_pearson = -INFINITY, best_acc = -INFINITY;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Config rel = base, ent = base;
    rel.task = Task::relatedness;
    ent.task = Task::entailment;
    rel.seed = ent.seed = seed;
    const auto r = train_best_on_dev(rel, words, train_set, dev, test);
    const auto e = train_best_on_dev(ent, words, train_set, dev, test);
    std::cerr << "seed " << seed << ": test pearson " << r.test.relatedness->pearson << " (epoch " << r.epoch
              << "), test accuracy " << e.test.entailment->accuracy << " (epoch " << e.epoch << ")\n";
    if (r.dev > -INFINITY) best_pearson = std::max(best_pearson, r.test.relatedness->pearson);
    best_acc = std::max(best_acc, e.test.entailment->accuracy);
  }
  Outcome o;
  o.status = best_pearson >= 0.82 && best_acc >= 0.80 ? Status::pass : Status::fail;
  o.detail = "best of 3 seeds: test pearson " + fmt(best_pearson) + " (target 0.82), accuracy " + fmt(best_acc) +
             " (target 0.80)";
  return o;
}

// 7 ---------------------------------------------------------------------------

Outcome direction_ordering() {
  const char *dir = std::getenv("SICK_DIR");
  const std::string source = dir && *dir ? std::string(dir) : data_file("synthetic_900.tsv");
  const auto data = load_sick_location(source);
  const auto train_set = data.subset(Split::train), dev = data.subset(Split::trial), test = data.subset(Split::test);
  Config cfg;
  cfg.task = Task::relatedness;
  cfg.epochs = dir && *dir ? 30 : 8;
  auto words = std::shared_ptr<WordEmbeddings>(make_word_embeddings(cfg));
  cfg.bidirectional = true;
  const auto bi = train_best_on_dev(cfg, words, train_set, dev, test);
  cfg.bidirectional = false;
  const auto uni = train_best_on_dev(cfg, words, train_set, dev, test);
  const double pb = bi.test.relatedness->pearson, pu = uni.test.relatedness->pearson;
  Outcome o;
  o.status = pb >= pu ? Status::pass : Status::fail;
  o.detail = fs::path(source).filename().string() + ": test pearson bidirectional " + fmt(pb, 4) +
             " vs unidirectional " + fmt(pu, 4);
  return o;
}

// 8 ---------------------------------------------------------------------------

Outcome deterministic_checkpoints() {
  const auto dir = fs::temp_directory_path() / "sentmatch_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  Config cfg;
  cfg.task = Task::joint;
  cfg.epochs = 2;
  cfg.seed = 11;
  std::ofstream(dir / "config.txt") << cfg.to_text();
  std::vector<std::string> bytes;
  for (const char *name : {"a.ckpt", "b.ckpt"}) {
    TrainCommand c;
    c.config_path = (dir / "config.txt").string();
    c.data = data_file("sick_sample64.tsv");
    c.out = (dir / name).string();
    std::ostringstream out, err;
    if (cmd_train(c, out, err) != 0) return {Status::fail, "cmd_train failed: " + err.str()};
    std::ifstream in(c.out, std::ios::binary);
    bytes.emplace_back(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  fs::remove_all(dir);
  Outcome o;
  o.status = !bytes[0].empty() && bytes[0] == bytes[1] ? Status::pass : Status::fail;
  o.detail = "two runs, " + std::to_string(bytes[0].size()) + " bytes each, " +
             (bytes[0] == bytes[1] ? "identical" : "different");
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char *name;
    bool gating;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "gradient suite", true, gradient_suite},
      {2, "oracle equivalence", true, oracle_equivalence},
      {3, "sparse target property", true, sparse_target_property},
      {4, "overfit 64 pairs", true, overfit_check},
      {5, "chain tree-lstm degeneracy", true, chain_degeneracy},
      {6, "full SICK reproduction (stretch)", false, full_sick},
      {7, "bidirectional >= unidirectional (reported)", false, direction_ordering},
      {8, "deterministic checkpoints", true, deterministic_checkpoints},
  };
  bool ok = true;
  for (const auto &c : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception &e) {
      o = {Status::fail, std::string("exception: ") + e.what()};
    }
    const char *tag = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "NOT RUN";
    std::cout << "criterion " << c.id << " " << tag << "  " << c.name << ": " << o.detail << " [" << fmt(seconds_since(t0))
              << " s]" << std::endl;
    if (c.gating && o.status != Status::pass) ok = false;
  }
  std::cout << (ok ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL") << std::endl;
  return ok ? 0 : 1;
}
