#include "tlp/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "tlp/decoder.hpp"

namespace tlp {

Tensord glorot_init(std::vector<Index> shape, Index fan_in, Index fan_out,
                    std::mt19937_64& engine) {
  if (fan_in < 1 || fan_out < 1) throw ArgumentError("glorot_init: fans must be >= 1");
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensord t(std::move(shape));
  for (double& v : t.data()) v = dist(engine);
  return t;
}

Tensord glorot_init(std::vector<Index> shape, Index fan_in, Index fan_out, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  return glorot_init(std::move(shape), fan_in, fan_out, engine);
}

ModelParams init_model(const ModelDims& dims, std::uint64_t seed) {
  if (dims.feature_width < 1 || dims.hidden < 1 || dims.layers < 1)
    throw ArgumentError("init_model: dims must be positive");
  std::mt19937_64 engine(seed);
  ModelParams m;
  m.dims = dims;
  for (Index k = 0; k < dims.layers; ++k) {
    const Index x = dims.layer_input_width(k);
    const Index h = dims.hidden;
    auto direction = [&]() {
      LstmParams p;
      for (Tensord* w : {&p.w_input, &p.w_forget, &p.w_output, &p.w_cell})
        *w = glorot_init({h, x + h}, x + h, h, engine);
      p.b_input = Tensord({h});
      p.b_forget = Tensord({h});
      p.b_forget.vec().setOnes();  // forget-gate bias starts at 1
      p.b_output = Tensord({h});
      p.b_cell = Tensord({h});
      return p;
    };
    LayerParams lp;
    lp.row_fwd = direction();
    lp.row_bwd = direction();
    lp.col_fwd = direction();
    lp.col_bwd = direction();
    m.layers.push_back(std::move(lp));
  }
  m.output_weights = glorot_init({4 * dims.hidden}, 4 * dims.hidden, 1, engine);
  m.output_bias = Tensord({1});
  return m;
}

double clip_gradients(GradientContext& ctx, double threshold) {
  double sq = 0.0;
  for (const std::string& name : ctx.names()) sq += ctx.grad(name).vec().squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > threshold) {
    const double factor = threshold / norm;
    for (const std::string& name : ctx.names()) ctx.grad(name).vec() *= factor;
  }
  return norm;
}

void add_gradient_noise(GradientContext& ctx, std::int64_t t, std::mt19937_64& engine,
                        double exponent) {
  if (t < 0) throw ArgumentError("add_gradient_noise: t must be >= 0");
  const double variance = 1.0 / std::pow(1.0 + static_cast<double>(t), exponent);
  std::normal_distribution<double> noise(0.0, std::sqrt(variance));
  for (const std::string& name : ctx.names()) {
    Tensord& g = ctx.grad(name);
    for (double& v : g.data()) v += noise(engine);
  }
}

void add_gradient_noise(GradientContext& ctx, std::int64_t t, std::uint64_t seed,
                        double exponent) {
  std::mt19937_64 engine(seed);
  add_gradient_noise(ctx, t, engine, exponent);
}

OptimizerState init_optimizer(const GradientContext& params) {
  OptimizerState st;
  for (const std::string& name : params.names())
    st.mean_square.emplace_back(name, Tensord(params.param(name).shape()));
  return st;
}

void rmsprop_step(GradientContext& ctx, OptimizerState& state, double alpha, double gamma) {
  constexpr double kEps = 1e-8;
  for (auto& [name, ms] : state.mean_square) {
    const Tensord& g = ctx.grad(name);
    Tensord& theta = ctx.param(name);
    if (!g.same_shape(ms) || !theta.same_shape(ms))
      throw ShapeError("rmsprop_step: shape mismatch for " + name);
    ms.vec() = gamma * ms.vec() + (1.0 - gamma) * g.vec().cwiseProduct(g.vec());
    theta.vec() -= alpha * g.vec().cwiseQuotient((ms.vec().array() + kEps).sqrt().matrix());
    if (!theta.all_finite()) throw NumericError("rmsprop_step: non-finite update for " + name);
  }
  ++state.updates;
}

Tensord apply_dropout(const Tensord& t, double p, std::mt19937_64& engine, bool train_mode) {
  if (p < 0.0 || p >= 1.0) throw ArgumentError("apply_dropout: p must be in [0,1)");
  if (!train_mode || p == 0.0) return t;
  std::bernoulli_distribution drop(p);
  const double keep_scale = 1.0 / (1.0 - p);
  Tensord out(t.shape());
  for (Index i = 0; i < t.size(); ++i)
    out.data()[static_cast<size_t>(i)] =
        drop(engine) ? 0.0 : t.data()[static_cast<size_t>(i)] * keep_scale;
  return out;
}

Tensord apply_dropout(const Tensord& t, double p, std::uint64_t seed, bool train_mode) {
  std::mt19937_64 engine(seed);
  return apply_dropout(t, p, engine, train_mode);
}

namespace {

// Multiplicative mask with the same draw semantics as apply_dropout.
Tensord draw_mask(const std::vector<Index>& shape, double p, std::mt19937_64& engine) {
  std::bernoulli_distribution drop(p);
  const double keep_scale = 1.0 / (1.0 - p);
  Tensord mask(shape);
  for (double& v : mask.data()) v = drop(engine) ? 0.0 : keep_scale;
  return mask;
}

DropoutMasks draw_dropout_masks(const TrainConfig& cfg, Index w, Index feature_width,
                                std::mt19937_64& engine) {
  DropoutMasks masks;
  masks.input = draw_mask({w, w + 1, 2 * feature_width + 1}, cfg.dropout_input, engine);
  for (Index k = 0; k < cfg.layers; ++k)
    masks.layer_output.push_back(draw_mask({w, w + 1, 4 * cfg.hidden}, cfg.dropout_hidden, engine));
  return masks;
}

Var instance_loss(Tape& tape, const ModelVars& vars, const TrainingInstance& inst,
                  LossMode mode, const DropoutMasks* masks) {
  Var scores = score_graph(tape, inst.features, vars, masks);
  const Mask mask = self_arc_mask(inst.features.tokens());
  if (mode == LossMode::CrossEntropy) {
    if (!inst.gold_heads)
      throw ConfigError("instance " + inst.id + ": cross-entropy training needs gold heads");
    return tape.softmax_cross_entropy(scores, *inst.gold_heads, mask);
  }
  if (!inst.target_scores)
    throw ConfigError("instance " + inst.id + ": MSE training needs target scores");
  return tape.masked_mse(scores, *inst.target_scores, mask);
}

}  // namespace

double evaluate_uas(const ModelParams& model, const std::vector<TrainingInstance>& instances) {
  if (instances.empty()) throw ArgumentError("evaluate_uas: empty evaluation set");
  std::int64_t correct = 0, total = 0;
  for (const TrainingInstance& inst : instances) {
    if (!inst.gold_heads)
      throw ValidityError("evaluate_uas: instance " + inst.id + " has no gold heads");
    const std::vector<int> predicted = decode(score_sentence(inst.features, model));
    const std::vector<int>& gold = *inst.gold_heads;
    for (size_t i = 0; i < gold.size(); ++i) {
      if (predicted[i] == gold[i]) ++correct;
      ++total;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

TrainResult train(const std::vector<TrainingInstance>& data,
                  const std::vector<TrainingInstance>* dev, const TrainConfig& cfg) {
  if (data.empty()) throw ConfigError("train: empty training set");
  if (cfg.schedule == Schedule::EarlyStopping && (!dev || dev->empty()))
    throw ConfigError("train: early stopping requires a non-empty dev set");
  if (cfg.schedule == Schedule::FixedEpochs && cfg.epochs < 1)
    throw ConfigError("train: fixed-epoch schedule needs epochs >= 1");
  if (cfg.batch_size < 1) throw ConfigError("train: batch size must be >= 1");

  const Index f = data.front().features.width();
  for (const TrainingInstance& inst : data)
    if (inst.features.width() != f)
      throw ShapeError("train: instance " + inst.id + " feature width differs");

  ModelParams model = init_model({f, cfg.hidden, cfg.layers}, cfg.seed);
  GradientContext ctx = model_context(model);
  OptimizerState opt = init_optimizer(ctx);
  // Separate stream from initialization: shuffling, dropout, noise.
  std::mt19937_64 engine(cfg.seed + 1);

  const int max_epochs =
      cfg.schedule == Schedule::FixedEpochs ? cfg.epochs : (cfg.epochs > 0 ? cfg.epochs : 100);

  TrainResult result;
  double best_uas = -1.0;
  int best_epoch = -1;
  int since_best = 0;

  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), engine);

    double loss_sum = 0.0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      // Masks are drawn outside the loss builder, in sentence order, so the
      // random stream does not depend on tape internals.
      std::vector<DropoutMasks> masks;
      for (size_t b = start; b < end; ++b)
        masks.push_back(
            draw_dropout_masks(cfg, data[order[b]].features.tokens(), f, engine));

      double batch_loss = 0.0;
      GradientContext grads = compute_gradients(
          [&](Tape& tape, const BoundParams& bound) {
            const ModelVars vars = bind_model(bound, cfg.layers);
            std::vector<Var> losses;
            for (size_t b = start; b < end; ++b)
              losses.push_back(instance_loss(tape, vars, data[order[b]], cfg.loss,
                                             &masks[b - start]));
            return tape.scale(tape.add_n(losses), 1.0 / static_cast<double>(losses.size()));
          },
          ctx, &batch_loss);
      loss_sum += batch_loss * static_cast<double>(end - start);

      clip_gradients(grads, cfg.clip_threshold);
      add_gradient_noise(grads, opt.updates, engine, cfg.noise_exponent);
      for (const std::string& name : ctx.names()) ctx.grad(name) = grads.grad(name);
      rmsprop_step(ctx, opt, cfg.alpha, cfg.gamma);
    }

    EpochMetrics metrics;
    metrics.epoch = epoch;
    metrics.train_loss = loss_sum / static_cast<double>(data.size());

    update_model(model, ctx);
    if (dev && !dev->empty()) metrics.dev_uas = evaluate_uas(model, *dev);
    metrics.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(metrics);

    if (cfg.schedule == Schedule::EarlyStopping) {
      if (*metrics.dev_uas > best_uas) {
        best_uas = *metrics.dev_uas;
        best_epoch = epoch;
        result.model = model;
        since_best = 0;
      } else {
        ++since_best;
      }
      if (best_uas >= 1.0) break;  // cannot improve further
      if (since_best >= cfg.patience) break;
    }
  }

  if (cfg.schedule == Schedule::FixedEpochs || best_epoch < 0) result.model = model;
  return result;
}

}  // namespace tlp
