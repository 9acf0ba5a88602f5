#pragma once

#include <vector>

#include "tlp/encoder.hpp"
#include "tlp/tensor.hpp"

namespace tlp {

// Row-wise softmax over unmasked cells; masked cells come back as exactly 0,
// every row sums to 1.
Tensord masked_row_softmax(const ScoreMatrix& scores);

// Negative log-likelihood of the gold heads under the row-wise softmax,
// summed over rows. gold_heads[i] is the head column of token i+1 (0 = root);
// a masked gold cell is a data error naming the row.
double cross_entropy_loss(const ScoreMatrix& pred, const std::vector<int>& gold_heads);

// Mean squared difference over unmasked cells. Zero-valued targets are
// ordinary regression targets: a 0 encodes "no evidence", not "skip".
double mse_loss(const ScoreMatrix& pred, const ScoreMatrix& target);
double mse_loss(const ScoreMatrix& pred, const Tensord& target);

}  // namespace tlp
