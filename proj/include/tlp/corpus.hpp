#pragma once

#include <array>
#include <optional>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "tlp/encoder.hpp"
#include "tlp/tensor.hpp"

namespace tlp {

// One sentence as read from a treebank. gold_heads uses 0 for the root and is
// absent when the file carries no annotation. raw_columns preserves the
// original CoNLL-U token lines for pass-through on write.
struct Sentence {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<std::string> pos;
  std::optional<std::vector<int>> gold_heads;
  std::vector<std::array<std::string, 10>> raw_columns;

  Index size() const { return static_cast<Index>(tokens.size()); }
};

// Reads CoNLL-U: comments and multiword-range lines are skipped, columns
// ID/FORM/UPOS/HEAD are consumed, blank lines separate sentences.
// `# sent_id = ...` comments become ids; otherwise sentences are numbered
// from 1. Malformed lines raise ParseError with the line number.
std::vector<Sentence> read_treebank(const std::string& path);

// Writes CoNLL-U. When predicted_heads is given it must align with sentences
// and replaces the HEAD column; original columns are preserved where present,
// `_` elsewhere.
void write_treebank(const std::vector<Sentence>& sentences,
                    const std::vector<std::vector<int>>* predicted_heads,
                    const std::string& path);

// Fixed word-vector table. Lookup of an unknown word yields the zero vector.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(Index width, std::unordered_map<std::string, std::vector<double>> vectors)
      : width_(width), vectors_(std::move(vectors)) {}

  Index width() const { return width_; }
  std::size_t size() const { return vectors_.size(); }
  // Returns the vector for `word`, or nullptr for unknown words.
  const std::vector<double>* find(const std::string& word) const;

 private:
  Index width_ = 0;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

// Whitespace-separated `word v1 ... vk`, one entry per line; the first line
// fixes k. Duplicate words: last wins. Empty file or inconsistent width is a
// ParseError with the line number.
EmbeddingTable read_embeddings(const std::string& path);

// Sorted unique UPOS tags of a treebank; the training-time vocabulary.
std::vector<std::string> collect_pos_vocab(const std::vector<Sentence>& sentences);

// Feature row i = embedding(token_i) ++ one-hot(pos_i). Unknown words map to
// the zero embedding, unknown tags to an all-zero one-hot block; with use_pos
// off the POS block is omitted entirely.
FeatureMatrix featurize(const Sentence& s, const EmbeddingTable& emb, const FeatureConfig& cfg);

// One sentence of a score corpus: edge scores produced by a parser or by
// projection.
struct ScoreRecord {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<std::string> pos;
  Tensord scores;  // w x (w+1); self-arc cells are 0 and masked

  Index size() const { return static_cast<Index>(tokens.size()); }
};

// Score corpus files hold one JSON record per line with fields id, tokens,
// pos, scores; self-arc cells are written as null. Values survive a
// write/read cycle exactly.
std::vector<ScoreRecord> read_score_corpus(const std::string& path);
void write_score_corpus(const std::vector<ScoreRecord>& records, const std::string& path);

// Tab-separated `source_id target_id confidence` lines. Entries remember
// where they came from so later id/index errors can point at the file.
struct SentenceAlignmentEntry {
  std::string source_id;
  std::string target_id;
  double confidence = 0.0;
  int line = 0;
  std::string file;
};
std::vector<SentenceAlignmentEntry> read_sentence_alignments(const std::string& path);

// Per line: `source_id target_id i-j:conf i-j:conf ...` with 1-based token
// indices; 0 is the root.
struct WordAlignmentEntry {
  std::string source_id;
  std::string target_id;
  std::vector<std::tuple<int, int, double>> links;
  int line = 0;
  std::string file;
};
std::vector<WordAlignmentEntry> read_word_alignments(const std::string& path);

}  // namespace tlp
