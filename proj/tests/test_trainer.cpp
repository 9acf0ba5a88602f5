#include <doctest.h>

#include <cmath>
#include <random>

#include "testutil.hpp"
#include "tlp/decoder.hpp"
#include "tlp/trainer.hpp"

using namespace tlp;

namespace {

// Tiny deterministic corpus: distinct per-token features, simple chains and
// fans as gold trees.
std::vector<TrainingInstance> toy_corpus(int sentences, int max_len, Index f,
                                         std::uint64_t seed, LossMode loss) {
  std::mt19937_64 engine(seed);
  std::vector<TrainingInstance> out;
  for (int s = 0; s < sentences; ++s) {
    const int w = 2 + static_cast<int>(engine() % static_cast<size_t>(max_len - 1));
    TrainingInstance inst;
    inst.id = "s" + std::to_string(s);
    inst.features = FeatureMatrix{testutil::random_tensor({w, f}, engine)};
    inst.gold_heads = testutil::random_tree(w, engine);
    if (loss == LossMode::MeanSquaredError) inst.target_scores = heads_to_matrix(*inst.gold_heads);
    out.push_back(std::move(inst));
  }
  return out;
}

GradientContext single_param_context(std::vector<Index> shape, double grad_value) {
  GradientContext ctx;
  ctx.add("theta", Tensord(std::move(shape)));
  ctx.grad("theta").vec().setConstant(grad_value);
  return ctx;
}

}  // namespace

TEST_SUITE_BEGIN("trainer");

TEST_CASE("glorot bound for fans 3/3 is exactly 1") {
  std::mt19937_64 engine(101);
  Tensord t = glorot_init({50, 50}, 3, 3, engine);
  for (double v : t.data()) {
    CHECK(v <= 1.0);
    CHECK(v >= -1.0);
  }
}

TEST_CASE("glorot respects the fan formula") {
  std::mt19937_64 engine(102);
  const double bound = std::sqrt(6.0 / (10 + 20));
  Tensord t = glorot_init({30, 30}, 10, 20, engine);
  for (double v : t.data()) CHECK(std::abs(v) <= bound);
}

TEST_CASE("seeded glorot draws are reproducible") {
  Tensord a = glorot_init({4, 6}, 10, 4, std::uint64_t{123});
  Tensord b = glorot_init({4, 6}, 10, 4, std::uint64_t{123});
  CHECK(a == b);
  CHECK(a != glorot_init({4, 6}, 10, 4, std::uint64_t{124}));
}

TEST_CASE("seeded noise draws are reproducible") {
  GradientContext a = single_param_context({50}, 0.0);
  GradientContext b = single_param_context({50}, 0.0);
  add_gradient_noise(a, 2, std::uint64_t{9});
  add_gradient_noise(b, 2, std::uint64_t{9});
  CHECK(a.grad("theta") == b.grad("theta"));
}

TEST_CASE("same seed gives identical initialization") {
  ModelParams a = init_model({3, 4, 2}, 42);
  ModelParams b = init_model({3, 4, 2}, 42);
  GradientContext ca = model_context(a), cb = model_context(b);
  for (const std::string& name : ca.names()) CHECK(ca.param(name) == cb.param(name));
  ModelParams c = init_model({3, 4, 2}, 43);
  CHECK(model_context(c).param("layer0.row_fwd.w_input") != ca.param("layer0.row_fwd.w_input"));
}

TEST_CASE("forget gate biases start at one, everything else at zero") {
  ModelParams m = init_model({2, 3, 1}, 7);
  for (const LayerParams& lp : m.layers)
    for (const LstmParams* p : {&lp.row_fwd, &lp.row_bwd, &lp.col_fwd, &lp.col_bwd}) {
      for (double v : p->b_forget.data()) CHECK(v == 1.0);
      for (double v : p->b_input.data()) CHECK(v == 0.0);
      for (double v : p->b_output.data()) CHECK(v == 0.0);
      for (double v : p->b_cell.data()) CHECK(v == 0.0);
    }
  CHECK(m.output_bias(0) == 0.0);
}

TEST_CASE("clipping is a no-op below the threshold") {
  GradientContext ctx = single_param_context({4}, 5.0);  // norm 10
  const Tensord before = ctx.grad("theta");
  CHECK(clip_gradients(ctx, 15.0) == doctest::Approx(10.0));
  CHECK(ctx.grad("theta") == before);
}

TEST_CASE("clipping rescales norm 30 to exactly 15") {
  GradientContext ctx = single_param_context({4}, 15.0);  // norm 30
  CHECK(clip_gradients(ctx, 15.0) == doctest::Approx(30.0));
  double sq = ctx.grad("theta").vec().squaredNorm();
  CHECK(std::sqrt(sq) == doctest::Approx(15.0).epsilon(1e-12));
  for (double v : ctx.grad("theta").data()) CHECK(v == doctest::Approx(7.5));
}

TEST_CASE("clipping spans parameters and preserves direction") {
  std::mt19937_64 engine(103);
  GradientContext ctx;
  ctx.add("a", Tensord({3}));
  ctx.add("b", Tensord({2, 2}));
  ctx.grad("a") = testutil::random_tensor({3}, engine, -4.0, 4.0);
  ctx.grad("b") = testutil::random_tensor({2, 2}, engine, -4.0, 4.0);
  const Tensord ga = ctx.grad("a"), gb = ctx.grad("b");
  const double norm = clip_gradients(ctx, 1.0);
  CHECK(norm > 1.0);
  double sq = ctx.grad("a").vec().squaredNorm() + ctx.grad("b").vec().squaredNorm();
  CHECK(std::sqrt(sq) == doctest::Approx(1.0).epsilon(1e-12));
  // Same direction: elementwise ratio equals 1/norm everywhere.
  for (Index i = 0; i < 3; ++i)
    CHECK(ctx.grad("a")(i) == doctest::Approx(ga(i) / norm).epsilon(1e-12));
  for (Index i = 0; i < 4; ++i)
    CHECK(ctx.grad("b").data()[static_cast<size_t>(i)] ==
          doctest::Approx(gb.data()[static_cast<size_t>(i)] / norm).epsilon(1e-12));
}

TEST_CASE("zero gradients are unchanged by clipping") {
  GradientContext ctx = single_param_context({4}, 0.0);
  CHECK(clip_gradients(ctx, 15.0) == 0.0);
  for (double v : ctx.grad("theta").data()) CHECK(v == 0.0);
}

TEST_CASE("gradient noise variance follows the schedule") {
  std::mt19937_64 engine(104);
  auto empirical_variance = [&](std::int64_t t) {
    GradientContext ctx = single_param_context({100000}, 0.0);
    add_gradient_noise(ctx, t, engine);
    const auto v = ctx.grad("theta").vec();
    const double mean = v.mean();
    return (v.array() - mean).square().sum() / static_cast<double>(v.size());
  };
  // Variance 1 at t=0, (1/4)^0.55 = 0.466516... at t=3.
  CHECK(empirical_variance(0) == doctest::Approx(1.0).epsilon(0.05));
  CHECK(empirical_variance(3) == doctest::Approx(0.4665164957).epsilon(0.05));
  // The schedule itself decreases monotonically.
  double prev = 1.0;
  for (int t = 1; t < 50; ++t) {
    const double var = 1.0 / std::pow(1.0 + t, 0.55);
    CHECK(var < prev);
    prev = var;
  }
  GradientContext neg = single_param_context({1}, 0.0);
  CHECK_THROWS_AS(add_gradient_noise(neg, -1, engine), Error);
}

TEST_CASE("rmsprop first step from a fresh state") {
  GradientContext ctx = single_param_context({2}, 1.0);
  OptimizerState st = init_optimizer(ctx);
  rmsprop_step(ctx, st, 0.1, 0.9);
  CHECK(st.updates == 1);
  CHECK(st.mean_square[0].second(0) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(ctx.param("theta")(0) == doctest::Approx(-0.316228).epsilon(1e-5));
}

TEST_CASE("rmsprop with zero gradient decays the accumulator only") {
  GradientContext ctx = single_param_context({1}, 1.0);
  OptimizerState st = init_optimizer(ctx);
  rmsprop_step(ctx, st, 0.1, 0.9);
  const double theta_after_one = ctx.param("theta")(0);
  ctx.grad("theta")(0) = 0.0;
  rmsprop_step(ctx, st, 0.1, 0.9);
  CHECK(ctx.param("theta")(0) == theta_after_one);
  CHECK(st.mean_square[0].second(0) == doctest::Approx(0.09).epsilon(1e-12));
}

TEST_CASE("rmsprop second unit-gradient step") {
  GradientContext ctx = single_param_context({1}, 1.0);
  OptimizerState st = init_optimizer(ctx);
  rmsprop_step(ctx, st, 0.1, 0.9);
  const double first = ctx.param("theta")(0);
  ctx.grad("theta")(0) = 1.0;
  rmsprop_step(ctx, st, 0.1, 0.9);
  CHECK(st.mean_square[0].second(0) == doctest::Approx(0.19).epsilon(1e-12));
  CHECK(ctx.param("theta")(0) - first == doctest::Approx(-0.229416).epsilon(1e-5));
}

TEST_CASE("one rmsprop step decreases a quadratic objective") {
  // loss = (theta - 3)^2 starting at theta = 0.
  GradientContext ctx;
  ctx.add("theta", Tensord({1}));
  auto loss = [&]() {
    const double d = ctx.param("theta")(0) - 3.0;
    return d * d;
  };
  const double before = loss();
  ctx.grad("theta")(0) = 2.0 * (ctx.param("theta")(0) - 3.0);
  OptimizerState st = init_optimizer(ctx);
  rmsprop_step(ctx, st, 0.1, 0.9);
  CHECK(loss() < before);
}

TEST_CASE("dropout is the identity in evaluation mode and at p=0") {
  std::mt19937_64 engine(105);
  Tensord t = testutil::random_tensor({4, 5}, engine);
  CHECK(apply_dropout(t, 0.5, engine, false) == t);
  CHECK(apply_dropout(t, 0.0, engine, true) == t);
  CHECK_THROWS_AS(apply_dropout(t, 1.0, engine, true), ArgumentError);
  CHECK_THROWS_AS(apply_dropout(t, -0.5, engine, true), ArgumentError);
}

TEST_CASE("inverted dropout keeps the expected value") {
  Tensord ones({100000});
  ones.vec().setOnes();
  for (double p : {0.2, 0.5}) {
    Tensord dropped = apply_dropout(ones, p, static_cast<std::uint64_t>(1000 * p), true);
    CHECK(dropped.vec().mean() == doctest::Approx(1.0).epsilon(0.02));
    for (double v : dropped.data()) CHECK((v == 0.0 || v == doctest::Approx(1.0 / (1.0 - p))));
  }
}

TEST_CASE("same seed reproduces the same dropout mask") {
  std::mt19937_64 engine(106);
  Tensord t = testutil::random_tensor({6, 6}, engine);
  CHECK(apply_dropout(t, 0.5, std::uint64_t{9}, true) ==
        apply_dropout(t, 0.5, std::uint64_t{9}, true));
  CHECK(apply_dropout(t, 0.5, std::uint64_t{9}, true) !=
        apply_dropout(t, 0.5, std::uint64_t{10}, true));
}

TEST_CASE("training is deterministic for a fixed seed") {
  auto data = toy_corpus(6, 4, 3, 500, LossMode::CrossEntropy);
  TrainConfig cfg;
  cfg.loss = LossMode::CrossEntropy;
  cfg.schedule = Schedule::FixedEpochs;
  cfg.epochs = 2;
  cfg.hidden = 2;
  cfg.layers = 1;
  cfg.batch_size = 4;
  cfg.seed = 11;
  TrainResult a = train(data, nullptr, cfg);
  TrainResult b = train(data, nullptr, cfg);
  GradientContext ca = model_context(a.model), cb = model_context(b.model);
  for (const std::string& name : ca.names()) CHECK(ca.param(name) == cb.param(name));
  CHECK(a.history.size() == 2);
  for (size_t e = 0; e < a.history.size(); ++e)
    CHECK(a.history[e].train_loss == b.history[e].train_loss);
}

TEST_CASE("mse training runs the same pipeline") {
  auto data = toy_corpus(5, 4, 3, 501, LossMode::MeanSquaredError);
  TrainConfig cfg;
  cfg.loss = LossMode::MeanSquaredError;
  cfg.schedule = Schedule::FixedEpochs;
  cfg.epochs = 2;
  cfg.hidden = 2;
  cfg.layers = 1;
  cfg.seed = 12;
  TrainResult r = train(data, nullptr, cfg);
  CHECK(r.history.size() == 2);
  CHECK(std::isfinite(r.history.back().train_loss));
}

TEST_CASE("early stopping requires a dev set") {
  auto data = toy_corpus(3, 3, 2, 502, LossMode::CrossEntropy);
  TrainConfig cfg;
  cfg.schedule = Schedule::EarlyStopping;
  CHECK_THROWS_AS(train(data, nullptr, cfg), ConfigError);
  std::vector<TrainingInstance> empty;
  CHECK_THROWS_AS(train(data, &empty, cfg), ConfigError);
}

TEST_CASE("a tiny model overfits a tiny corpus") {
  auto data = toy_corpus(3, 3, 4, 503, LossMode::CrossEntropy);
  TrainConfig cfg;
  cfg.loss = LossMode::CrossEntropy;
  cfg.schedule = Schedule::EarlyStopping;
  cfg.epochs = 150;
  cfg.patience = 150;
  cfg.hidden = 6;
  cfg.layers = 1;
  cfg.batch_size = 3;
  cfg.seed = 1;
  TrainResult r = train(data, &data, cfg);
  double best = 0.0;
  for (const EpochMetrics& m : r.history) best = std::max(best, m.dev_uas.value_or(0.0));
  CHECK(best == 1.0);
  // The returned model is the best-dev one.
  CHECK(evaluate_uas(r.model, data) == 1.0);
}

TEST_CASE("evaluate_uas counts matching heads over all tokens") {
  auto data = toy_corpus(4, 4, 3, 504, LossMode::CrossEntropy);
  ModelParams m = init_model({3, 2, 1}, 9);
  const double uas = evaluate_uas(m, data);
  CHECK(uas >= 0.0);
  CHECK(uas <= 1.0);
  std::vector<TrainingInstance> empty;
  CHECK_THROWS_AS(evaluate_uas(m, empty), ArgumentError);
  auto no_gold = data;
  no_gold[0].gold_heads.reset();
  CHECK_THROWS_AS(evaluate_uas(m, no_gold), ValidityError);
}

TEST_SUITE_END();
