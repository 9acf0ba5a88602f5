#include "tlp/projection.hpp"

#include <cmath>
#include <limits>
#include <unordered_map>

namespace tlp {

double missing_fraction(const Tensord& scores) {
  const Index w = scores.dim(0);
  Index zero = 0;
  for (Index i = 0; i < w; ++i)
    for (Index j = 0; j <= w; ++j)
      if (!ScoreMatrix::self_arc(i, j) && scores(i, j) == 0.0) ++zero;
  return static_cast<double>(zero) / static_cast<double>(w * w);
}

SourceCorpus standardize(SourceCorpus corpus) {
  // Pool every unmasked edge score of the language.
  double sum = 0.0;
  Index count = 0;
  bool two_distinct = false;
  double first = std::numeric_limits<double>::quiet_NaN();
  for (const ScoreRecord& rec : corpus.sentences) {
    const Index w = rec.size();
    for (Index i = 0; i < w; ++i)
      for (Index j = 0; j <= w; ++j) {
        if (ScoreMatrix::self_arc(i, j)) continue;
        const double v = rec.scores(i, j);
        sum += v;
        ++count;
        if (std::isnan(first))
          first = v;
        else if (v != first)
          two_distinct = true;
      }
  }
  if (count == 0 || !two_distinct)
    throw DataError("standardize: degenerate corpus (" + corpus.language +
                    "): needs at least two distinct scores");
  const double mean = sum / static_cast<double>(count);
  double var = 0.0;
  for (const ScoreRecord& rec : corpus.sentences) {
    const Index w = rec.size();
    for (Index i = 0; i < w; ++i)
      for (Index j = 0; j <= w; ++j)
        if (!ScoreMatrix::self_arc(i, j)) {
          const double d = rec.scores(i, j) - mean;
          var += d * d;
        }
  }
  var /= static_cast<double>(count);  // population variance
  const double sd = std::sqrt(var);
  if (sd == 0.0)
    throw DataError("standardize: degenerate corpus (" + corpus.language + "): zero variance");
  for (ScoreRecord& rec : corpus.sentences) {
    const Index w = rec.size();
    for (Index i = 0; i < w; ++i)
      for (Index j = 0; j <= w; ++j)
        if (!ScoreMatrix::self_arc(i, j)) rec.scores(i, j) = (rec.scores(i, j) - mean) / sd;
  }
  return corpus;
}

double sentence_vote(const ScoreRecord& source, const Tensord& walign, Index target_head,
                     Index target_dep) {
  const Index ws = source.size();
  double best = -std::numeric_limits<double>::infinity();
  // Every source edge votes: heads range over root and tokens, dependents
  // over tokens, self-arcs excluded.
  for (Index head = 0; head <= ws; ++head) {
    for (Index dep = 1; dep <= ws; ++dep) {
      if (head == dep) continue;
      const double v = edge_vote(walign(head, target_head), walign(dep, target_dep),
                                 source.scores(dep - 1, head));
      if (v > best) best = v;
    }
  }
  return best;
}

namespace {

// Dense word-alignment confidences for one sentence pair, (w_s+1) x (w_t+1)
// with index 0 = root. Root aligns to root with confidence 1 unless the file
// says otherwise.
Tensord dense_word_alignment(const WordAlignmentEntry* entry, Index ws, Index wt) {
  Tensord m({ws + 1, wt + 1});
  m(0, 0) = 1.0;
  if (!entry) return m;
  for (const auto& [i, j, conf] : entry->links) {
    if (i > ws || j > wt)
      throw DataError(entry->file + ":" + std::to_string(entry->line) + ": token index " +
                      std::to_string(i) + "-" + std::to_string(j) +
                      " out of range for sentences " + entry->source_id + "/" +
                      entry->target_id);
    m(i, j) = conf;
  }
  return m;
}

}  // namespace

std::vector<ProjectedInstance> project(
    const std::vector<Sentence>& targets, const std::vector<SourceCorpus>& sources,
    const std::vector<std::vector<SentenceAlignmentEntry>>& sentence_alignments,
    const std::vector<std::vector<WordAlignmentEntry>>& word_alignments) {
  const size_t n = sources.size();
  if (sentence_alignments.size() != n || word_alignments.size() != n)
    throw ArgumentError("project: one sentence/word alignment set per source required");

  std::unordered_map<std::string, size_t> target_index;
  for (size_t t = 0; t < targets.size(); ++t) target_index[targets[t].id] = t;

  // Resolve alignments up front so bad ids fail before any scoring.
  struct Aligned {
    size_t source_sentence;
    double confidence;
    const WordAlignmentEntry* words;
  };
  std::vector<std::vector<std::vector<Aligned>>> aligned(
      n, std::vector<std::vector<Aligned>>(targets.size()));
  for (size_t k = 0; k < n; ++k) {
    std::unordered_map<std::string, size_t> source_index;
    for (size_t s = 0; s < sources[k].sentences.size(); ++s)
      source_index[sources[k].sentences[s].id] = s;

    std::unordered_map<std::string, const WordAlignmentEntry*> words_by_pair;
    for (const WordAlignmentEntry& e : word_alignments[k]) {
      if (!source_index.count(e.source_id))
        throw DataError(e.file + ":" + std::to_string(e.line) +
                        ": unknown source sentence id '" + e.source_id + "'");
      if (!target_index.count(e.target_id))
        throw DataError(e.file + ":" + std::to_string(e.line) +
                        ": unknown target sentence id '" + e.target_id + "'");
      words_by_pair[e.source_id + "\t" + e.target_id] = &e;
    }
    for (const SentenceAlignmentEntry& e : sentence_alignments[k]) {
      auto src = source_index.find(e.source_id);
      if (src == source_index.end())
        throw DataError(e.file + ":" + std::to_string(e.line) +
                        ": unknown source sentence id '" + e.source_id + "'");
      auto tgt = target_index.find(e.target_id);
      if (tgt == target_index.end())
        throw DataError(e.file + ":" + std::to_string(e.line) +
                        ": unknown target sentence id '" + e.target_id + "'");
      auto wit = words_by_pair.find(e.source_id + "\t" + e.target_id);
      aligned[k][tgt->second].push_back(
          {src->second, e.confidence, wit == words_by_pair.end() ? nullptr : wit->second});
    }
  }

  std::vector<ProjectedInstance> out;
  out.reserve(targets.size());
  for (size_t t = 0; t < targets.size(); ++t) {
    const Sentence& target = targets[t];
    const Index wt = target.size();
    ProjectedInstance inst;
    inst.record.id = target.id;
    inst.record.tokens = target.tokens;
    inst.record.pos = target.pos;
    inst.record.scores = Tensord({wt, wt + 1});

    double z = 0.0;
    for (size_t k = 0; k < n; ++k)
      for (const Aligned& a : aligned[k][t]) z += a.confidence;

    if (z != 0.0) {
      for (size_t k = 0; k < n; ++k) {
        for (const Aligned& a : aligned[k][t]) {
          const ScoreRecord& src = sources[k].sentences[a.source_sentence];
          const Tensord walign = dense_word_alignment(a.words, src.size(), wt);
          for (Index head = 0; head <= wt; ++head) {
            for (Index dep = 1; dep <= wt; ++dep) {
              if (head == dep) continue;
              inst.record.scores(dep - 1, head) +=
                  a.confidence * sentence_vote(src, walign, head, dep);
            }
          }
        }
      }
      inst.record.scores.vec() /= z;
    }
    inst.missing_fraction = missing_fraction(inst.record.scores);
    out.push_back(std::move(inst));
  }
  return out;
}

void blankout(std::vector<ProjectedInstance>& instances, double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0)
    throw ArgumentError("blankout: fraction must be in [0,1]");
  struct Cell {
    size_t instance;
    Index row, col;
  };
  std::vector<Cell> nonzero;
  for (size_t s = 0; s < instances.size(); ++s) {
    const Tensord& scores = instances[s].record.scores;
    const Index w = scores.dim(0);
    for (Index i = 0; i < w; ++i)
      for (Index j = 0; j <= w; ++j)
        if (!ScoreMatrix::self_arc(i, j) && scores(i, j) != 0.0) nonzero.push_back({s, i, j});
  }
  std::mt19937_64 engine(seed);
  std::shuffle(nonzero.begin(), nonzero.end(), engine);
  // floor(fraction * N), nudged so decimal fractions hit exact counts.
  const size_t kill =
      static_cast<size_t>(std::floor(fraction * static_cast<double>(nonzero.size()) + 1e-9));
  for (size_t c = 0; c < kill; ++c)
    instances[nonzero[c].instance].record.scores(nonzero[c].row, nonzero[c].col) = 0.0;
  for (ProjectedInstance& inst : instances)
    inst.missing_fraction = missing_fraction(inst.record.scores);
}

}  // namespace tlp
