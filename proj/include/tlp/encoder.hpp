#pragma once

#include <string>
#include <vector>

#include "tlp/autodiff.hpp"
#include "tlp/lstm.hpp"
#include "tlp/tensor.hpp"

namespace tlp {

// Per-token feature rows: w x f, one row per word.
struct FeatureMatrix {
  Tensord values;
  Index tokens() const { return values.dim(0); }
  Index width() const { return values.dim(1); }
};

// Real-valued edge scores, w x (w+1). Column 0 scores attachment to the root,
// column j > 0 attachment to token j. Cell (i, i+1) is the self-arc of token
// i+1; it is computed like any other cell but excluded from softmax, loss,
// and decoding.
struct ScoreMatrix {
  Tensord values;
  Index tokens() const { return values.dim(0); }
  static bool self_arc(Index row, Index col) { return col == row + 1; }
};

// Mask with 1 at every self-arc cell of a w x (w+1) matrix.
Mask self_arc_mask(Index w);

// Directions of one stacked layer: forward/backward along rows, and
// forward/backward along columns (realized by transposing the tensor).
struct LayerParams {
  LstmParams row_fwd, row_bwd, col_fwd, col_bwd;
};

struct ModelDims {
  Index feature_width = 0;  // f
  Index hidden = 0;         // h, units per direction
  Index layers = 0;         // L
  Index layer_input_width(Index layer) const {
    return layer == 0 ? 2 * feature_width + 1 : 4 * hidden;
  }
};

// All learned weights. Layers do not share parameters; the output map is a
// single affine functional applied pointwise to every cell's 4h channels.
struct ModelParams {
  ModelDims dims;
  std::vector<LayerParams> layers;
  Tensord output_weights;  // 4h
  Tensord output_bias;     // shape {1}
};

// Throws ShapeError unless every tensor matches dims.
void validate_model(const ModelParams& m);

// Builds the w x (w+1) x (2f+1) edge tensor. The head-side matrix extends the
// features with a root row (zero word features, root flag 1) placed first so
// its row index matches the parse-matrix column convention; token rows carry
// root flag 0. Cell (i, j) is dependent row i's features followed by head row
// j's extended features.
Tensord build_edge_tensor(const FeatureMatrix& s);

// LSTM over the rows in both directions, halves concatenated along axis 2.
Tensord bidirectional_matrix_lstm(const Tensord& x, const LstmParams& fwd, const LstmParams& bwd);

// Applies the bidirectional LSTM to every rank-2 slice along the first axis
// with one shared parameter pair: a x b x c -> a x b x 2h.
Tensord tensor_lstm_2d(const Tensord& t, const LstmParams& fwd, const LstmParams& bwd);

// Row-direction pass concatenated with the transpose-sandwiched
// column-direction pass: a x b x c -> a x b x 4h.
Tensord tensor_lstm_4d(const Tensord& t, const LayerParams& p);

// Multiplicative dropout masks for one training-mode forward pass (0 for a
// dropped element, 1/(1-p) for a kept one). The trainer draws these; scoring
// with masks == nullptr is the deterministic evaluation path.
struct DropoutMasks {
  Tensord input;                      // shape of the edge tensor
  std::vector<Tensord> layer_output;  // one per layer, w x (w+1) x 4h
};

// Full encoder: edge tensor, L stacked four-directional layers, pointwise
// affine output map.
ScoreMatrix score_sentence(const FeatureMatrix& s, const ModelParams& m,
                           const DropoutMasks* masks = nullptr);

// --- training-graph variants -----------------------------------------------

struct LayerVars {
  LstmVars row_fwd, row_bwd, col_fwd, col_bwd;
};

struct ModelVars {
  std::vector<LayerVars> layers;
  Var output_weights, output_bias;
};

// Canonical parameter naming: layer<k>.<direction>.<tensor>, output.weights,
// output.bias. Iteration order is fixed, so optimizer reductions are
// reproducible.
GradientContext model_context(const ModelParams& m);
void update_model(ModelParams& m, const GradientContext& ctx);
ModelVars bind_model(const BoundParams& bound, Index layer_count);

// Same computation as score_sentence, recorded on a tape.
Var score_graph(Tape& tape, const FeatureMatrix& s, const ModelVars& vars,
                const DropoutMasks* masks = nullptr);

// --- model files -------------------------------------------------------------

// How raw sentences become feature rows: embedding lookup, optionally
// concatenated with a POS one-hot block over a vocabulary frozen at training
// time.
struct FeatureConfig {
  Index embedding_width = 0;
  bool use_pos = true;
  std::vector<std::string> pos_vocab;
  Index feature_width() const {
    return embedding_width + (use_pos ? static_cast<Index>(pos_vocab.size()) : 0);
  }
};

struct ParserModel {
  ModelParams params;
  FeatureConfig features;
};

// Versioned JSON document with dims, all parameter tensors as shape +
// row-major values, and the feature configuration. Round-trips are
// value-exact at 64-bit.
void save_model(const ParserModel& model, const std::string& path);
ParserModel load_model(const std::string& path);

}  // namespace tlp
