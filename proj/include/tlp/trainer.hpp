#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "tlp/autodiff.hpp"
#include "tlp/encoder.hpp"
#include "tlp/tensor.hpp"

namespace tlp {

enum class LossMode { CrossEntropy, MeanSquaredError };

// EarlyStopping watches dev UAS with a patience window (monolingual);
// FixedEpochs runs exactly `epochs` (cross-lingual).
enum class Schedule { EarlyStopping, FixedEpochs };

struct TrainConfig {
  LossMode loss = LossMode::CrossEntropy;
  Schedule schedule = Schedule::EarlyStopping;
  double alpha = 0.1;            // RMSprop learning rate
  double gamma = 0.9;            // RMSprop decay
  int batch_size = 64;
  double noise_exponent = 0.55;  // gradient noise variance 1/(1+t)^exponent
  double clip_threshold = 15.0;
  double dropout_hidden = 0.5;
  double dropout_input = 0.2;
  Index hidden = 100;
  Index layers = 4;
  int epochs = 0;    // FixedEpochs: exact count; EarlyStopping: cap (0 = 100)
  int patience = 5;  // EarlyStopping: epochs without dev-UAS improvement
  std::uint64_t seed = 1;
};

// One featurized sentence with its training target. Cross-entropy reads
// gold_heads, mean squared error reads target_scores.
struct TrainingInstance {
  std::string id;
  FeatureMatrix features;
  std::optional<std::vector<int>> gold_heads;
  std::optional<Tensord> target_scores;  // w x (w+1)
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> dev_uas;
  double wall_seconds = 0.0;
};

struct TrainResult {
  ModelParams model;
  std::vector<EpochMetrics> history;
};

// Uniform on +-sqrt(6 / (fan_in + fan_out)).
Tensord glorot_init(std::vector<Index> shape, Index fan_in, Index fan_out, std::mt19937_64& engine);
Tensord glorot_init(std::vector<Index> shape, Index fan_in, Index fan_out, std::uint64_t seed);

// Glorot weights, zero biases except the forget-gate bias at 1.
ModelParams init_model(const ModelDims& dims, std::uint64_t seed);

// Scales all gradients by threshold/norm when the global L2 norm across every
// parameter exceeds the threshold. Returns the pre-clip norm.
double clip_gradients(GradientContext& ctx, double threshold);

// Adds elementwise Gaussian noise with variance 1/(1+t)^exponent.
void add_gradient_noise(GradientContext& ctx, std::int64_t t, std::mt19937_64& engine,
                        double exponent = 0.55);
void add_gradient_noise(GradientContext& ctx, std::int64_t t, std::uint64_t seed,
                        double exponent = 0.55);

struct OptimizerState {
  std::vector<std::pair<std::string, Tensord>> mean_square;  // running E[g^2]
  std::int64_t updates = 0;
};

OptimizerState init_optimizer(const GradientContext& params);

// E <- gamma E + (1-gamma) g^2; theta <- theta - alpha g / sqrt(E + 1e-8).
void rmsprop_step(GradientContext& ctx, OptimizerState& state, double alpha, double gamma);

// Zeroes each element with probability p and scales survivors by 1/(1-p);
// identity when train_mode is off.
Tensord apply_dropout(const Tensord& t, double p, std::mt19937_64& engine, bool train_mode);
Tensord apply_dropout(const Tensord& t, double p, std::uint64_t seed, bool train_mode);

// Fraction of tokens whose decoded head matches gold, over all tokens of all
// instances.
double evaluate_uas(const ModelParams& model, const std::vector<TrainingInstance>& instances);

// Full optimization loop: shuffled minibatches; per update the batch-mean
// gradients are clipped, perturbed with annealed noise, and applied with
// RMSprop. Early stopping returns the best-dev model, fixed epochs the final
// one. Deterministic for a given (seed, data, config).
TrainResult train(const std::vector<TrainingInstance>& data,
                  const std::vector<TrainingInstance>* dev, const TrainConfig& cfg);

}  // namespace tlp
