#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tlp/corpus.hpp"
#include "tlp/tensor.hpp"

namespace tlp {

// A source-language corpus parsed by a monolingual parser.
struct SourceCorpus {
  std::string language;
  std::vector<ScoreRecord> sentences;
};

// A target-language sentence with its projected scores. Cells that received
// no aligned evidence are exactly 0.
struct ProjectedInstance {
  ScoreRecord record;
  double missing_fraction = 0.0;
};

// Share of unmasked cells that are exactly 0.
double missing_fraction(const Tensord& scores);

// Affine rescale of the corpus's pooled unmasked scores to mean 0, population
// standard deviation 1. A corpus with fewer than two distinct score values is
// degenerate (DataError).
SourceCorpus standardize(SourceCorpus corpus);

// One source edge's vote for one target edge: both alignment confidences
// times the source edge's score.
inline double edge_vote(double head_confidence, double dep_confidence, double score) {
  return head_confidence * dep_confidence * score;
}

// Highest vote over all edges of the source sentence. walign is the dense
// (w_s+1) x (w_t+1) confidence matrix with index 0 = root.
double sentence_vote(const ScoreRecord& source, const Tensord& walign, Index target_head,
                     Index target_dep);

// Full multi-source projection. sources[k] pairs with sentence_alignments[k]
// and word_alignments[k]. Every target sentence gets
//   score(head, dep) = sum_k sum_s A(s, t) * vote_s(head, dep) / Z(t)
// with Z(t) the sum of all sentence-alignment confidences onto t; when Z = 0
// the whole matrix is 0. Alignments that reference unknown sentence ids or
// out-of-range token indices raise DataError with a file/line locus.
std::vector<ProjectedInstance> project(
    const std::vector<Sentence>& targets, const std::vector<SourceCorpus>& sources,
    const std::vector<std::vector<SentenceAlignmentEntry>>& sentence_alignments,
    const std::vector<std::vector<WordAlignmentEntry>>& word_alignments);

// Zeroes exactly floor(fraction * N) of the N nonzero unmasked cells pooled
// across the corpus, chosen by a seeded shuffle; recomputes missing
// fractions.
void blankout(std::vector<ProjectedInstance>& instances, double fraction, std::uint64_t seed);

// Seeded shuffle, then the first min(n, size) elements.
template <typename T>
std::vector<T> subsample(std::vector<T> items, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ArgumentError("subsample: n must be >= 1");
  std::mt19937_64 engine(seed);
  std::shuffle(items.begin(), items.end(), engine);
  if (items.size() > n) items.resize(n);
  return items;
}

}  // namespace tlp
