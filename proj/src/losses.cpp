#include "tlp/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace tlp {

Tensord masked_row_softmax(const ScoreMatrix& scores) {
  const Tensord& v = scores.values;
  v.require_rank(2, "score matrix");
  const Index rows = v.dim(0), cols = v.dim(1);
  Tensord out({rows, cols});
  for (Index i = 0; i < rows; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < cols; ++j)
      if (!ScoreMatrix::self_arc(i, j)) mx = std::max(mx, v(i, j));
    double z = 0.0;
    for (Index j = 0; j < cols; ++j)
      if (!ScoreMatrix::self_arc(i, j)) z += std::exp(v(i, j) - mx);
    for (Index j = 0; j < cols; ++j)
      if (!ScoreMatrix::self_arc(i, j)) out(i, j) = std::exp(v(i, j) - mx) / z;
  }
  return out;
}

double cross_entropy_loss(const ScoreMatrix& pred, const std::vector<int>& gold_heads) {
  const Index w = pred.tokens();
  if (static_cast<Index>(gold_heads.size()) != w)
    throw ShapeError("cross_entropy_loss: gold length mismatch");
  for (Index i = 0; i < w; ++i) {
    const int g = gold_heads[static_cast<size_t>(i)];
    if (g < 0 || g > w)
      throw DataError("cross_entropy_loss: row " + std::to_string(i) + ": head out of range");
    if (ScoreMatrix::self_arc(i, g))
      throw DataError("cross_entropy_loss: row " + std::to_string(i) +
                      ": gold head cell is masked");
  }
  const Tensord probs = masked_row_softmax(pred);
  double loss = 0.0;
  for (Index i = 0; i < w; ++i) loss -= std::log(probs(i, gold_heads[static_cast<size_t>(i)]));
  return loss;
}

double mse_loss(const ScoreMatrix& pred, const Tensord& target) {
  if (!pred.values.same_shape(target)) throw ShapeError("mse_loss: shape mismatch");
  const Index rows = pred.values.dim(0), cols = pred.values.dim(1);
  double acc = 0.0;
  Index n = 0;
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      if (ScoreMatrix::self_arc(i, j)) continue;
      const double d = pred.values(i, j) - target(i, j);
      acc += d * d;
      ++n;
    }
  }
  return acc / static_cast<double>(n);
}

double mse_loss(const ScoreMatrix& pred, const ScoreMatrix& target) {
  return mse_loss(pred, target.values);
}

}  // namespace tlp
