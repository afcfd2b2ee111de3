// SPDX-License-Identifier: Apache-2.0
#include <bit>
#include <set>
#include <sstream>

#include "test_util.hpp"

using namespace sentmatch;
using namespace sentmatch::testing;

TEST(AdaGrad, FirstUnitGradientStep) {
  Parameter p("p", {1});
  p.value.data = {1.0};
  p.grad = {1.0};
  AdaGradState st({&p});
  adagrad_step({&p}, st, 0.05, 1e-8);
  EXPECT_NEAR(p.value[0] - 1.0, -0.05, 1e-9);
  EXPECT_EQ(st.acc[0][0], 1.0);
}

TEST(AdaGrad, ZeroGradientChangesNothing) {
  Parameter p("p", {2});
  p.value.data = {0.7, -0.2};
  p.grad = {0.0, 0.0};
  AdaGradState st({&p});
  adagrad_step({&p}, st, 0.05, 1e-8);
  EXPECT_EQ(p.value.data, (std::vector<double>{0.7, -0.2}));
  EXPECT_EQ(st.acc[0], (std::vector<double>{0.0, 0.0}));
}

TEST(AdaGrad, ScriptedStepsMatchHandSequence) {
  // Values computed with 40-digit arithmetic.
  const double expect_theta[] = {0.2500000009999999800000004, 0.2947213601499957775058926,
                                 0.2510777822932734908975573};
  const double expect_acc[] = {0.25, 1.25, 5.25};
  const double grads[] = {0.5, -1.0, 2.0};
  Parameter p("p", {1});
  p.value.data = {0.3};
  AdaGradState st({&p});
  for (int k = 0; k < 3; ++k) {
    p.grad = {grads[k]};
    adagrad_step({&p}, st, 0.05, 1e-8);
    EXPECT_NEAR(p.value[0], expect_theta[k], 1e-12);
    EXPECT_EQ(st.acc[0][0], expect_acc[k]);
  }
}

TEST(AdaGrad, FrozenUntouchedAndNonFiniteRejected) {
  Parameter w("w", {2}), frozen("frozen", {2}, true);
  w.value.data = {1, 2};
  frozen.value.data = {3, 4};
  w.grad = {0.5, NAN};
  frozen.grad = {1, 1};
  AdaGradState st({&w, &frozen});
  EXPECT_THROW(adagrad_step({&w, &frozen}, st, 0.05, 1e-8), NonFiniteGradient);
  EXPECT_EQ(w.value.data, (std::vector<double>{1, 2}));
  EXPECT_EQ(st.acc[0], (std::vector<double>{0, 0}));
  w.grad = {0.5, 0.5};
  adagrad_step({&w, &frozen}, st, 0.05, 1e-8);
  EXPECT_EQ(frozen.value.data, (std::vector<double>{3, 4}));
  EXPECT_NE(w.value.data, (std::vector<double>{1, 2}));
  EXPECT_THROW(adagrad_step({&w}, st, 0.05, 0.0), std::invalid_argument);
}

TEST(AdaGrad, AccumulatorMonotoneAndRateNonIncreasing) {
  Rng rng(3);
  Parameter p("p", {5});
  AdaGradState st({&p});
  std::vector<double> prev_acc(5, 0.0), prev_rate(5, std::numeric_limits<double>::infinity());
  for (int step = 0; step < 200; ++step) {
    p.grad = random_values(rng, 5, -2, 2);
    if (step % 7 == 0) p.grad[step % 5] = 0.0;
    adagrad_step({&p}, st, 0.05, 1e-8);
    for (int i = 0; i < 5; ++i) {
      EXPECT_GE(st.acc[0][i], prev_acc[i]);
      const double rate = 0.05 / (std::sqrt(st.acc[0][i]) + 1e-8);
      EXPECT_LE(rate, prev_rate[i]);
      prev_acc[i] = st.acc[0][i];
      prev_rate[i] = rate;
    }
  }
}

namespace {

std::vector<PairExample> sample(std::size_t n) {
  auto data = load_sick(data_file("sick_sample64.tsv"));
  data.examples.resize(std::min(n, data.examples.size()));
  return data.examples;
}

std::vector<std::uint64_t> bits(Model &m) {
  std::vector<std::uint64_t> out;
  for (auto *p : m.parameters())
    for (double v : p->value.data) out.push_back(std::bit_cast<std::uint64_t>(v));
  return out;
}

}  // namespace

TEST(Train, RejectsEmptyAndInvalidData) {
  const auto cfg = tiny_config();
  Model model(cfg, make_word_embeddings(cfg));
  model.init(1);
  EXPECT_THROW(train(model, {}), std::invalid_argument);
  auto ex = sample(2);
  ex[1].label = static_cast<EntailmentLabel>(7);
  EXPECT_THROW(train(model, ex), std::invalid_argument);
  ex = sample(2);
  ex[0].score = 5.5;
  EXPECT_THROW(train(model, ex), std::invalid_argument);
}

TEST(Train, IdenticalSeedsGiveBitIdenticalRuns) {
  const auto cfg = tiny_config();
  const auto ex = sample(10);
  std::string logs[2];
  std::vector<std::uint64_t> params[2];
  for (int run = 0; run < 2; ++run) {
    Model model(cfg, make_word_embeddings(cfg));
    model.init(cfg.seed);
    std::ostringstream log;
    TrainOptions opt;
    opt.log = &log;
    opt.log_steps = true;
    auto r = train(model, ex, opt);
    EXPECT_EQ(r.epochs.size(), 2u);
    EXPECT_EQ(r.steps, 6u);  // ceil(10 / 4) per epoch
    logs[run] = log.str();
    params[run] = bits(model);
  }
  EXPECT_EQ(logs[0], logs[1]);
  EXPECT_EQ(params[0], params[1]);
  EXPECT_NE(logs[0].find("\"event\":\"epoch\""), std::string::npos);
}

TEST(Train, DifferentSeedsDiffer) {
  auto cfg = tiny_config();
  const auto ex = sample(8);
  Model a(cfg, make_word_embeddings(cfg));
  a.init(1);
  train(a, ex);
  cfg.seed = 2;
  Model b(cfg, make_word_embeddings(cfg));
  b.init(1);
  train(b, ex);
  EXPECT_NE(bits(a), bits(b));
}

TEST(Train, FrozenWordTableReceivesNoGradient) {
  auto cfg = tiny_config();
  // a small GloVe-format table covering part of the vocabulary
  const auto path = std::filesystem::temp_directory_path() / "sentmatch_trainer_glove.txt";
  {
    std::ofstream out(path);
    Rng rng(5);
    for (const char *w : {"a", "man", "is", "playing", "guitar", "cat", "dog"}) {
      out << w;
      for (std::size_t k = 0; k < cfg.word_dim; ++k) out << ' ' << rng.uniform(-1, 1);
      out << '\n';
    }
  }
  cfg.glove_path = path.string();
  auto words = std::shared_ptr<WordEmbeddings>(make_word_embeddings(cfg));
  std::filesystem::remove(path);
  const auto before = words->table()->value.data;
  Model model(cfg, words);
  model.init(1);
  TrainOptions opt;
  double max_table_grad = 0.0;
  opt.on_epoch = [&](const EpochSummary &, Model &m) {
    for (double g : m.word_embeddings_ptr()->table()->grad) max_table_grad = std::max(max_table_grad, std::fabs(g));
    return true;
  };
  train(model, sample(8), opt);
  EXPECT_EQ(max_table_grad, 0.0);
  EXPECT_EQ(words->table()->value.data, before);
  for (auto *p : model.parameters()) EXPECT_FALSE(p->constant) << p->name;
}

TEST(Train, LossTrendsDownOnFixedBatch) {
  auto cfg = tiny_config(Task::entailment);
  cfg.batch_size = 8;
  cfg.epochs = 6;
  Model model(cfg, make_word_embeddings(cfg));
  model.init(3);
  auto r = train(model, sample(8));
  ASSERT_EQ(r.epochs.size(), 6u);
  // AdaGrad's first steps are sign-like and may overshoot once; the trend
  // over the run must still be down, past the uniform-guess loss.
  EXPECT_LT(r.epochs.back().loss, r.epochs.front().loss);
  EXPECT_LT(r.epochs.back().loss, std::log(3.0));
}

TEST(Train, TruncationCountedAndEarlyStop) {
  auto cfg = tiny_config();
  cfg.max_length = 5;
  cfg.epochs = 5;
  Model model(cfg, make_word_embeddings(cfg));
  model.init(1);
  auto ex = sample(6);
  std::size_t expect = 0;
  for (auto &e : ex) expect += (e.tokens_a.size() > 5) + (e.tokens_b.size() > 5);
  ASSERT_GT(expect, 0u);
  TrainOptions opt;
  opt.on_epoch = [](const EpochSummary &s, Model &) { return s.epoch < 2; };
  auto r = train(model, ex, opt);
  EXPECT_EQ(r.truncated_sentences, expect);
  EXPECT_EQ(r.epochs.size(), 2u);
}

TEST(Model, RejectsImpossibleTopologyAndDimMismatch) {
  auto cfg = tiny_config();
  cfg.layers = 1;
  EXPECT_THROW(Model(cfg, make_word_embeddings(cfg)), ConfigError);
  cfg = tiny_config();
  EXPECT_THROW(Model(cfg, WordEmbeddings::hashed(cfg.word_dim + 1, 0)), ConfigError);
}

TEST(Model, PredictionsStayInRange) {
  auto cfg = tiny_config();
  Model model(cfg, make_word_embeddings(cfg));
  model.init(2);
  for (const auto &ex : sample(16)) {
    auto p = model.predict(ex.tokens_a, ex.tokens_b);
    ASSERT_TRUE(p.score && p.label);
    EXPECT_GE(*p.score, 1.0);
    EXPECT_LE(*p.score, 5.0);
  }
}

TEST(Model, SymmetricWhenJointPlaneIsZeroed) {
  auto cfg = tiny_config(Task::relatedness);
  Model model(cfg, make_word_embeddings(cfg));
  model.init(4);
  // Zero the stage-1 weights reading the joint-conv plane.
  auto &w = model.match_cnn().stage1().weight.value;
  const std::size_t row = model.encoder().row_dim();
  for (std::size_t f = 0; f < w.shape[0]; ++f)
    for (std::size_t c = 2 * row; c < 3 * row; ++c) w.at(f, c) = 0.0;
  for (const auto &ex : sample(6)) {
    auto ab = model.predict(ex.tokens_a, ex.tokens_b), ba = model.predict(ex.tokens_b, ex.tokens_a);
    EXPECT_EQ(*ab.score, *ba.score);
  }
}
