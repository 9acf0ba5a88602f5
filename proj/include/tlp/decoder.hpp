#pragma once

#include <vector>

#include "tlp/encoder.hpp"
#include "tlp/tensor.hpp"

namespace tlp {

// heads[i] is the head of token i+1; 0 means the root. Throws ValidityError
// unless every head is in range, no token heads itself, and every token
// reaches the root (i.e. the graph is a tree).
void validate_heads(const std::vector<int>& heads);

// Binary w x (w+1) parse matrix: row i is one-hot at column heads[i].
Tensord heads_to_matrix(const std::vector<int>& heads);

// Inverse of heads_to_matrix; rejects rows that are not exactly one-hot
// (naming the row) and head assignments that are not a tree.
std::vector<int> matrix_to_heads(const Tensord& m);

// Maximum spanning arborescence over the edge scores (Chu-Liu-Edmonds with
// greedy selection and cycle contraction). Self-arc cells are treated as
// -inf. Ties prefer the lower head index, so decoding is deterministic.
// Multiple root attachments are permitted.
std::vector<int> decode(const ScoreMatrix& scores);

}  // namespace tlp
