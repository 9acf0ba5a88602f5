#include "tlp/encoder.hpp"

#include <fstream>

#include <json.hpp>

namespace tlp {

Mask self_arc_mask(Index w) {
  Mask m({w, w + 1});
  for (Index i = 0; i < w; ++i) m(i, i + 1) = 1;
  return m;
}

void validate_model(const ModelParams& m) {
  if (m.dims.layers != static_cast<Index>(m.layers.size()))
    throw ShapeError("model: layer count does not match dims");
  if (m.dims.layers < 1) throw ShapeError("model: needs at least one layer");
  for (Index k = 0; k < m.dims.layers; ++k) {
    const LayerParams& lp = m.layers[static_cast<size_t>(k)];
    for (const LstmParams* p : {&lp.row_fwd, &lp.row_bwd, &lp.col_fwd, &lp.col_bwd}) {
      validate_lstm_params(*p);
      if (p->hidden() != m.dims.hidden)
        throw ShapeError("model: layer " + std::to_string(k) + " hidden width mismatch");
      if (p->input_width() != m.dims.layer_input_width(k))
        throw ShapeError("model: layer " + std::to_string(k) + " input width mismatch");
    }
  }
  m.output_weights.require_rank(1, "output weights");
  if (m.output_weights.dim(0) != 4 * m.dims.hidden)
    throw ShapeError("model: output weights must have length 4h");
  if (m.output_bias.rank() != 1 || m.output_bias.dim(0) != 1)
    throw ShapeError("model: output bias must have shape {1}");
}

Tensord build_edge_tensor(const FeatureMatrix& s) {
  const Index w = s.tokens();
  const Index f = s.width();
  Tensord out({w, w + 1, 2 * f + 1});
  for (Index i = 0; i < w; ++i) {
    for (Index j = 0; j <= w; ++j) {
      double* cell = out.data().data() + ((i * (w + 1) + j) * (2 * f + 1));
      for (Index k = 0; k < f; ++k) cell[k] = s.values(i, k);
      if (j == 0) {
        // Root head: zero word features, root flag set.
        cell[2 * f] = 1.0;
      } else {
        for (Index k = 0; k < f; ++k) cell[f + k] = s.values(j - 1, k);
      }
    }
  }
  return out;
}

// The forward composition is written once against a carrier: plain tensors
// for scoring, tape vars for training. Both walk identical op sequences, so
// the value path and the gradient path cannot drift apart.
namespace {

struct ValueCarrier {
  using V = Tensord;
  using P = const LstmParams*;
  using OutP = const Tensord&;
  V row_reverse(const V& x) { return tlp::row_reverse(x); }
  V tensor_transpose(const V& x, const std::array<int, 3>& perm) {
    return tlp::tensor_transpose(x, perm);
  }
  V concat(const V& a, const V& b, int axis) { return tlp::concat(a, b, axis); }
  V slice_first(const V& t, Index i) {
    V out({t.dim(1), t.dim(2)});
    out.mat() = t.slice(i);
    return out;
  }
  V stack_first(const std::vector<V>& slices) {
    V out({static_cast<Index>(slices.size()), slices[0].dim(0), slices[0].dim(1)});
    for (size_t i = 0; i < slices.size(); ++i) out.slice(static_cast<Index>(i)) = slices[i].mat();
    return out;
  }
  V matrix_lstm(const V& x, P p) { return tlp::matrix_lstm(x, *p); }
  V dropout(const V& x, const Tensord& mask) {
    if (!x.same_shape(mask)) throw ShapeError("dropout mask shape mismatch");
    V out(x.shape());
    out.vec() = x.vec().cwiseProduct(mask.vec());
    return out;
  }
  V affine_last_axis(const V& t, const Tensord& w, const Tensord& b) {
    V out({t.dim(0), t.dim(1)});
    for (Index i = 0; i < t.dim(0); ++i) {
      Vector<double> scores = t.slice(i) * w.vec();
      scores.array() += b(0);
      out.mat().row(i) = scores.transpose();
    }
    return out;
  }
};

struct TapeCarrier {
  Tape* tape;
  using V = Var;
  using P = const LstmVars*;
  using OutP = Var;
  V row_reverse(V x) { return tape->row_reverse(x); }
  V tensor_transpose(V x, const std::array<int, 3>& perm) {
    return tape->tensor_transpose(x, perm);
  }
  V concat(V a, V b, int axis) { return tape->concat(a, b, axis); }
  V slice_first(V t, Index i) { return tape->slice_first(t, i); }
  V stack_first(const std::vector<V>& slices) { return tape->stack_first(slices); }
  V matrix_lstm(V x, P p) { return tape->matrix_lstm(x, *p); }
  V dropout(V x, const Tensord& mask) { return tape->mul(x, tape->constant(mask)); }
  V affine_last_axis(V t, Var w, Var b) { return tape->affine_last_axis(t, w, b); }
};

template <typename C>
typename C::V bidirectional(C& c, const typename C::V& x, typename C::P fwd, typename C::P bwd) {
  auto forward = c.matrix_lstm(x, fwd);
  auto backward = c.row_reverse(c.matrix_lstm(c.row_reverse(x), bwd));
  return c.concat(forward, backward, 2);
}

template <typename C>
typename C::V lstm_2d(C& c, const typename C::V& t, Index first_dim, typename C::P fwd,
                      typename C::P bwd) {
  std::vector<typename C::V> slices;
  slices.reserve(static_cast<size_t>(first_dim));
  for (Index i = 0; i < first_dim; ++i)
    slices.push_back(bidirectional(c, c.slice_first(t, i), fwd, bwd));
  return c.stack_first(slices);
}

constexpr std::array<int, 3> kSwapAxes{2, 1, 3};

template <typename C>
typename C::V lstm_4d(C& c, const typename C::V& t, Index dim0, Index dim1, typename C::P row_f,
                      typename C::P row_b, typename C::P col_f, typename C::P col_b) {
  auto rows = lstm_2d(c, t, dim0, row_f, row_b);
  auto cols = c.tensor_transpose(
      lstm_2d(c, c.tensor_transpose(t, kSwapAxes), dim1, col_f, col_b), kSwapAxes);
  return c.concat(rows, cols, 3);
}

template <typename C, typename Layers>
typename C::V model_forward(C& c, typename C::V edge_tensor, Index w, const Layers& layers,
                            typename C::OutP out_weights, typename C::OutP out_bias,
                            const DropoutMasks* masks) {
  auto h = edge_tensor;
  if (masks) {
    if (masks->layer_output.size() != layers.size())
      throw ShapeError("dropout masks: one mask per layer required");
    h = c.dropout(h, masks->input);
  }
  for (size_t k = 0; k < layers.size(); ++k) {
    const auto& lp = layers[k];
    h = lstm_4d(c, h, w, w + 1, &lp.row_fwd, &lp.row_bwd, &lp.col_fwd, &lp.col_bwd);
    if (masks) h = c.dropout(h, masks->layer_output[k]);
  }
  return c.affine_last_axis(h, out_weights, out_bias);
}

}  // namespace

Tensord bidirectional_matrix_lstm(const Tensord& x, const LstmParams& fwd, const LstmParams& bwd) {
  ValueCarrier c;
  return bidirectional(c, x, &fwd, &bwd);
}

Tensord tensor_lstm_2d(const Tensord& t, const LstmParams& fwd, const LstmParams& bwd) {
  t.require_rank(3, "tensor_lstm_2d");
  ValueCarrier c;
  return lstm_2d(c, t, t.dim(0), &fwd, &bwd);
}

Tensord tensor_lstm_4d(const Tensord& t, const LayerParams& p) {
  t.require_rank(3, "tensor_lstm_4d");
  ValueCarrier c;
  return lstm_4d(c, t, t.dim(0), t.dim(1), &p.row_fwd, &p.row_bwd, &p.col_fwd, &p.col_bwd);
}

ScoreMatrix score_sentence(const FeatureMatrix& s, const ModelParams& m,
                           const DropoutMasks* masks) {
  validate_model(m);
  if (s.width() != m.dims.feature_width)
    throw ShapeError("score_sentence: feature width does not match model");
  ValueCarrier c;
  Tensord scores = model_forward(c, build_edge_tensor(s), s.tokens(), m.layers, m.output_weights,
                                 m.output_bias, masks);
  return ScoreMatrix{std::move(scores)};
}

// --- parameter naming --------------------------------------------------------

namespace {

const char* kGateTensors[] = {"w_input", "w_forget", "w_output", "w_cell",
                              "b_input", "b_forget", "b_output", "b_cell"};

template <typename Model, typename Fn>
void for_each_param_impl(Model& m, Fn&& fn) {
  for (size_t k = 0; k < m.layers.size(); ++k) {
    auto& lp = m.layers[k];
    auto direction = [&](const char* dir, auto& p) {
      const std::string prefix = "layer" + std::to_string(k) + "." + dir + ".";
      fn(prefix + "w_input", p.w_input);
      fn(prefix + "w_forget", p.w_forget);
      fn(prefix + "w_output", p.w_output);
      fn(prefix + "w_cell", p.w_cell);
      fn(prefix + "b_input", p.b_input);
      fn(prefix + "b_forget", p.b_forget);
      fn(prefix + "b_output", p.b_output);
      fn(prefix + "b_cell", p.b_cell);
    };
    direction("row_fwd", lp.row_fwd);
    direction("row_bwd", lp.row_bwd);
    direction("col_fwd", lp.col_fwd);
    direction("col_bwd", lp.col_bwd);
  }
  fn(std::string("output.weights"), m.output_weights);
  fn(std::string("output.bias"), m.output_bias);
}

}  // namespace

GradientContext model_context(const ModelParams& m) {
  GradientContext ctx;
  for_each_param_impl(m, [&](const std::string& name, const Tensord& t) { ctx.add(name, t); });
  return ctx;
}

void update_model(ModelParams& m, const GradientContext& ctx) {
  for_each_param_impl(m, [&](const std::string& name, Tensord& t) { t = ctx.param(name); });
}

ModelVars bind_model(const BoundParams& bound, Index layer_count) {
  ModelVars vars;
  for (Index k = 0; k < layer_count; ++k) {
    LayerVars lv;
    auto direction = [&](const char* dir) {
      const std::string prefix = "layer" + std::to_string(k) + "." + dir + ".";
      return LstmVars{bound.at(prefix + "w_input"),  bound.at(prefix + "w_forget"),
                      bound.at(prefix + "w_output"), bound.at(prefix + "w_cell"),
                      bound.at(prefix + "b_input"),  bound.at(prefix + "b_forget"),
                      bound.at(prefix + "b_output"), bound.at(prefix + "b_cell")};
    };
    lv.row_fwd = direction("row_fwd");
    lv.row_bwd = direction("row_bwd");
    lv.col_fwd = direction("col_fwd");
    lv.col_bwd = direction("col_bwd");
    vars.layers.push_back(lv);
  }
  vars.output_weights = bound.at("output.weights");
  vars.output_bias = bound.at("output.bias");
  return vars;
}

Var score_graph(Tape& tape, const FeatureMatrix& s, const ModelVars& vars,
                const DropoutMasks* masks) {
  TapeCarrier c{&tape};
  Var edge = tape.constant(build_edge_tensor(s));
  return model_forward(c, edge, s.tokens(), vars.layers, vars.output_weights, vars.output_bias,
                       masks);
}

// --- model files -------------------------------------------------------------

namespace {

using nlohmann::json;

json tensor_to_json(const Tensord& t) {
  return json{{"shape", t.shape()}, {"data", t.data()}};
}

Tensord tensor_from_json(const json& j) {
  std::vector<Index> shape = j.at("shape").get<std::vector<Index>>();
  std::vector<double> data = j.at("data").get<std::vector<double>>();
  return Tensord(std::move(shape), std::move(data));
}

json lstm_to_json(const LstmParams& p) {
  json j;
  const Tensord* ts[] = {&p.w_input, &p.w_forget, &p.w_output, &p.w_cell,
                         &p.b_input, &p.b_forget, &p.b_output, &p.b_cell};
  for (int i = 0; i < 8; ++i) j[kGateTensors[i]] = tensor_to_json(*ts[i]);
  return j;
}

LstmParams lstm_from_json(const json& j) {
  LstmParams p;
  Tensord* ts[] = {&p.w_input, &p.w_forget, &p.w_output, &p.w_cell,
                   &p.b_input, &p.b_forget, &p.b_output, &p.b_cell};
  for (int i = 0; i < 8; ++i) *ts[i] = tensor_from_json(j.at(kGateTensors[i]));
  return p;
}

}  // namespace

void save_model(const ParserModel& model, const std::string& path) {
  validate_model(model.params);
  json j;
  j["format"] = "tlp-model";
  j["version"] = 1;
  j["dims"] = {{"feature_width", model.params.dims.feature_width},
               {"hidden", model.params.dims.hidden},
               {"layers", model.params.dims.layers}};
  j["features"] = {{"embedding_width", model.features.embedding_width},
                   {"use_pos", model.features.use_pos},
                   {"pos_vocab", model.features.pos_vocab}};
  json layers = json::array();
  for (const LayerParams& lp : model.params.layers) {
    layers.push_back(json{{"row_fwd", lstm_to_json(lp.row_fwd)},
                          {"row_bwd", lstm_to_json(lp.row_bwd)},
                          {"col_fwd", lstm_to_json(lp.col_fwd)},
                          {"col_bwd", lstm_to_json(lp.col_bwd)}});
  }
  j["layers"] = std::move(layers);
  j["output"] = {{"weights", tensor_to_json(model.params.output_weights)},
                 {"bias", tensor_to_json(model.params.output_bias)}};

  std::ofstream out(path);
  if (!out) throw DataError("cannot write model file: " + path);
  out << j.dump(1) << "\n";
}

ParserModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read model file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("malformed model file " + path + ": " + e.what());
  }
  try {
    if (j.at("format") != "tlp-model") throw DataError("not a model file: " + path);
    if (j.at("version") != 1)
      throw DataError("unsupported model version in " + path);
    ParserModel model;
    model.params.dims.feature_width = j.at("dims").at("feature_width").get<Index>();
    model.params.dims.hidden = j.at("dims").at("hidden").get<Index>();
    model.params.dims.layers = j.at("dims").at("layers").get<Index>();
    model.features.embedding_width = j.at("features").at("embedding_width").get<Index>();
    model.features.use_pos = j.at("features").at("use_pos").get<bool>();
    model.features.pos_vocab = j.at("features").at("pos_vocab").get<std::vector<std::string>>();
    for (const json& layer : j.at("layers")) {
      model.params.layers.push_back(LayerParams{
          lstm_from_json(layer.at("row_fwd")), lstm_from_json(layer.at("row_bwd")),
          lstm_from_json(layer.at("col_fwd")), lstm_from_json(layer.at("col_bwd"))});
    }
    model.params.output_weights = tensor_from_json(j.at("output").at("weights"));
    model.params.output_bias = tensor_from_json(j.at("output").at("bias"));
    if (model.features.feature_width() != model.params.dims.feature_width)
      throw DataError("model file " + path + ": feature config disagrees with dims");
    validate_model(model.params);
    return model;
  } catch (const json::exception& e) {
    throw DataError("malformed model file " + path + ": " + e.what());
  }
}

}  // namespace tlp
