#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "testutil.hpp"
#include "tlp/projection.hpp"

using namespace tlp;

namespace {

ScoreRecord make_record(const std::string& id, Index w, std::mt19937_64& engine) {
  return testutil::random_score_record(id, w, engine);
}

Sentence make_sentence(const std::string& id, Index w) {
  Sentence s;
  s.id = id;
  for (Index i = 0; i < w; ++i) {
    s.tokens.push_back("w" + std::to_string(i));
    s.pos.push_back("X");
  }
  return s;
}

}  // namespace

TEST_SUITE_BEGIN("projection");

TEST_CASE("standardize maps pooled {1,2,3} onto +-sqrt(3/2) and 0") {
  SourceCorpus corpus;
  corpus.language = "a";
  std::mt19937_64 engine(81);
  for (double v : {1.0, 2.0, 3.0}) {
    ScoreRecord rec = make_record("s" + std::to_string(static_cast<int>(v)), 1, engine);
    rec.scores(0, 0) = v;  // the only unmasked cell of a 1-token sentence
    corpus.sentences.push_back(rec);
  }
  SourceCorpus out = standardize(corpus);
  CHECK(out.sentences[0].scores(0, 0) == doctest::Approx(-1.2247448714).epsilon(1e-9));
  CHECK(out.sentences[1].scores(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(out.sentences[2].scores(0, 0) == doctest::Approx(1.2247448714).epsilon(1e-9));
}

TEST_CASE("standardize leaves pooled mean 0 and sd 1, and is idempotent") {
  std::mt19937_64 engine(82);
  SourceCorpus corpus;
  corpus.language = "b";
  for (int s = 0; s < 5; ++s)
    corpus.sentences.push_back(make_record("s" + std::to_string(s), 1 + (s % 4), engine));
  SourceCorpus once = standardize(corpus);

  double sum = 0.0, sq = 0.0;
  Index n = 0;
  for (const auto& rec : once.sentences) {
    const Index w = rec.size();
    for (Index i = 0; i < w; ++i)
      for (Index j = 0; j <= w; ++j)
        if (!ScoreMatrix::self_arc(i, j)) {
          sum += rec.scores(i, j);
          sq += rec.scores(i, j) * rec.scores(i, j);
          ++n;
        }
  }
  const double mean = sum / static_cast<double>(n);
  const double sd = std::sqrt(sq / static_cast<double>(n) - mean * mean);
  CHECK(std::abs(mean) < 1e-9);
  CHECK(std::abs(sd - 1.0) < 1e-9);

  SourceCorpus twice = standardize(once);
  for (size_t s = 0; s < twice.sentences.size(); ++s)
    for (Index i = 0; i < twice.sentences[s].scores.size(); ++i)
      CHECK(twice.sentences[s].scores.data()[static_cast<size_t>(i)] ==
            doctest::Approx(once.sentences[s].scores.data()[static_cast<size_t>(i)])
                .epsilon(1e-12));
}

TEST_CASE("constant scores are a degenerate corpus") {
  SourceCorpus corpus;
  corpus.language = "c";
  std::mt19937_64 engine(83);
  for (int s = 0; s < 3; ++s) {
    ScoreRecord rec = make_record("s" + std::to_string(s), 1, engine);
    rec.scores(0, 0) = 4.2;
    corpus.sentences.push_back(rec);
  }
  CHECK_THROWS_AS(standardize(corpus), DataError);
  CHECK_THROWS_AS(standardize(SourceCorpus{"empty", {}}), DataError);
}

TEST_CASE("edge_vote multiplies confidences and the score") {
  CHECK(edge_vote(0.9, 0.8, 1.5) == doctest::Approx(1.08).epsilon(1e-12));
  CHECK(edge_vote(0.0, 0.8, 1.5) == 0.0);
  CHECK(edge_vote(0.9, 0.0, 1.5) == 0.0);
  // Root-headed edge with the implicit root-root pair.
  CHECK(edge_vote(1.0, 0.7, 2.0) == doctest::Approx(1.4).epsilon(1e-12));
}

TEST_CASE("sentence_vote takes the maximum over source edges") {
  std::mt19937_64 engine(84);
  ScoreRecord src = make_record("s", 2, engine);
  src.scores = Tensord::from_rows({{1.5, 0.0, 0.5}, {0.2, 0.7, 0.0}});
  // Alignment: source token 1 -> target token 1 at 0.9,
  //            source token 2 -> target token 2 at 0.8.
  Tensord walign({3, 3});
  walign(0, 0) = 1.0;
  walign(1, 1) = 0.9;
  walign(2, 2) = 0.8;
  // Target edge root -> token 1: best source vote is root->tok1 edge:
  // 1.0 * 0.9 * 1.5 = 1.35 (tok2->tok1 gives 0.8*0.9*0.5 = 0.36).
  CHECK(sentence_vote(src, walign, 0, 1) == doctest::Approx(1.35).epsilon(1e-12));
  // Target edge tok1 -> tok2: only aligned source edge is tok1->tok2:
  // 0.9 * 0.8 * 0.7 = 0.504.
  CHECK(sentence_vote(src, walign, 1, 2) == doctest::Approx(0.504).epsilon(1e-12));
  // Target edge tok2 -> tok1 maps to source tok2 -> tok1: 0.8*0.9*0.5.
  CHECK(sentence_vote(src, walign, 2, 1) == doctest::Approx(0.36).epsilon(1e-12));
  // A dependent no source token aligns to: every vote is 0.
  Tensord sparse({3, 3});
  sparse(0, 0) = 1.0;
  sparse(1, 1) = 0.9;  // only token 1 aligned, target token 2 unreachable
  CHECK(sentence_vote(src, sparse, 0, 2) == 0.0);
}

TEST_CASE("single-edge source sentence votes with its only edge") {
  std::mt19937_64 engine(85);
  ScoreRecord src = make_record("s", 1, engine);
  src.scores(0, 0) = 2.0;
  Tensord walign({2, 2});
  walign(0, 0) = 1.0;
  walign(1, 1) = 0.6;
  CHECK(sentence_vote(src, walign, 0, 1) == doctest::Approx(1.2).epsilon(1e-12));
}

TEST_CASE("project: one aligned source with one relevant edge") {
  std::mt19937_64 engine(86);
  ScoreRecord src = make_record("src1", 1, engine);
  src.scores(0, 0) = 1.5;
  SourceCorpus corpus{"L1", {src}};
  std::vector<Sentence> targets{make_sentence("tgt1", 1)};
  std::vector<SentenceAlignmentEntry> sent{{"src1", "tgt1", 1.0, 1, "salign"}};
  std::vector<WordAlignmentEntry> words{
      {"src1", "tgt1", {{0, 0, 0.9}, {1, 1, 0.8}}, 1, "walign"}};

  auto out = project(targets, {corpus}, {sent}, {words});
  REQUIRE(out.size() == 1);
  // Root->token edge: vote = W(0,0)*W(1,1)*1.5 = 0.9*0.8*1.5 = 1.08, Z = 1.
  CHECK(out[0].record.scores(0, 0) == doctest::Approx(1.08).epsilon(1e-12));
  CHECK(out[0].missing_fraction == 0.0);
}

TEST_CASE("project: unaligned target sentences come back all zero") {
  std::mt19937_64 engine(87);
  SourceCorpus corpus{"L1", {make_record("src1", 2, engine)}};
  std::vector<Sentence> targets{make_sentence("tgt1", 3)};
  auto out = project(targets, {corpus}, {{}}, {{}});
  REQUIRE(out.size() == 1);
  for (double v : out[0].record.scores.data()) CHECK(v == 0.0);
  CHECK(out[0].missing_fraction == 1.0);
}

TEST_CASE("project: normalization averages over the alignment mass") {
  // Two source sentences, A = 0.5 each, sentence votes 2.0 and 0.0:
  // projected score = (0.5*2.0 + 0.5*0.0) / 1.0 = 1.0.
  ScoreRecord s1;
  s1.id = "a";
  s1.tokens = {"x"};
  s1.pos = {"X"};
  s1.scores = Tensord({1, 2}, {2.0, 0.0});
  ScoreRecord s2 = s1;
  s2.id = "b";
  SourceCorpus corpus{"L1", {s1, s2}};
  std::vector<Sentence> targets{make_sentence("t", 1)};
  std::vector<SentenceAlignmentEntry> sent{{"a", "t", 0.5, 1, "f"}, {"b", "t", 0.5, 2, "f"}};
  // Only sentence "a" has word alignments; "b" contributes vote 0.
  std::vector<WordAlignmentEntry> words{{"a", "t", {{1, 1, 1.0}}, 1, "f"}};
  auto out = project(targets, {corpus}, {sent}, {words});
  CHECK(out[0].record.scores(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("project rejects alignments with unknown ids or bad indices") {
  std::mt19937_64 engine(88);
  SourceCorpus corpus{"L1", {make_record("src1", 2, engine)}};
  std::vector<Sentence> targets{make_sentence("tgt1", 2)};
  {
    std::vector<SentenceAlignmentEntry> sent{{"nosuch", "tgt1", 1.0, 7, "align.txt"}};
    CHECK_THROWS_WITH_AS(project(targets, {corpus}, {sent}, {{}}),
                         doctest::Contains("align.txt:7"), DataError);
  }
  {
    std::vector<SentenceAlignmentEntry> sent{{"src1", "missing", 1.0, 3, "align.txt"}};
    CHECK_THROWS_WITH_AS(project(targets, {corpus}, {sent}, {{}}),
                         doctest::Contains("align.txt:3"), DataError);
  }
  {
    std::vector<SentenceAlignmentEntry> sent{{"src1", "tgt1", 1.0, 1, "salign.txt"}};
    std::vector<WordAlignmentEntry> words{{"src1", "tgt1", {{5, 1, 0.5}}, 9, "walign.txt"}};
    CHECK_THROWS_WITH_AS(project(targets, {corpus}, {sent}, {words}),
                         doctest::Contains("walign.txt:9"), DataError);
  }
}

TEST_CASE("project matches the nested-loop oracle on random toy setups") {
  std::mt19937_64 engine(89);
  for (int rep = 0; rep < 30; ++rep) {
    auto setup = testutil::random_projection_setup(engine);
    auto out = project(setup.targets, setup.sources, setup.sent_aligns, setup.word_aligns);
    REQUIRE(out.size() == setup.targets.size());
    for (size_t t = 0; t < setup.targets.size(); ++t) {
      Tensord expect = testutil::oracle_project_sentence(setup.targets[t], setup.sources,
                                                         setup.sent_aligns, setup.word_aligns);
      for (Index i = 0; i < expect.size(); ++i)
        CHECK(std::abs(out[t].record.scores.data()[static_cast<size_t>(i)] -
                       expect.data()[static_cast<size_t>(i)]) < 1e-12);
      CHECK(out[t].missing_fraction ==
            doctest::Approx(missing_fraction(out[t].record.scores)).epsilon(1e-15));
    }
  }
}

TEST_CASE("scaling standardized scores scales projections linearly") {
  std::mt19937_64 engine(90);
  SourceCorpus corpus{"L1", {make_record("s0", 3, engine), make_record("s1", 2, engine)}};
  std::vector<Sentence> targets{make_sentence("t0", 2)};
  std::vector<SentenceAlignmentEntry> sent{{"s0", "t0", 0.7, 1, "f"}, {"s1", "t0", 0.4, 2, "f"}};
  std::vector<WordAlignmentEntry> words{
      {"s0", "t0", {{1, 1, 0.9}, {2, 2, 0.5}, {3, 1, 0.2}}, 1, "f"},
      {"s1", "t0", {{1, 2, 0.8}, {2, 1, 0.3}}, 2, "f"}};
  auto base = project(targets, {corpus}, {sent}, {words});

  SourceCorpus scaled = corpus;
  for (auto& rec : scaled.sentences) rec.scores.vec() *= 3.0;
  auto tripled = project(targets, {scaled}, {sent}, {words});
  for (Index i = 0; i < base[0].record.scores.size(); ++i)
    CHECK(tripled[0].record.scores.data()[static_cast<size_t>(i)] ==
          doctest::Approx(3.0 * base[0].record.scores.data()[static_cast<size_t>(i)])
              .epsilon(1e-12));
}

TEST_CASE("a source language with zero alignment mass changes nothing") {
  std::mt19937_64 engine(91);
  SourceCorpus active{"L1", {make_record("s0", 2, engine)}};
  SourceCorpus inert{"L2", {make_record("q0", 3, engine)}};
  std::vector<Sentence> targets{make_sentence("t0", 2)};
  std::vector<SentenceAlignmentEntry> sent1{{"s0", "t0", 0.8, 1, "f1"}};
  std::vector<WordAlignmentEntry> words1{{"s0", "t0", {{1, 1, 1.0}, {2, 2, 1.0}}, 1, "f1"}};

  auto solo = project(targets, {active}, {sent1}, {words1});
  auto with_inert = project(targets, {active, inert}, {sent1, {}}, {words1, {}});
  CHECK(solo[0].record.scores == with_inert[0].record.scores);
}

TEST_CASE("blankout zeroes an exact count, deterministically") {
  std::mt19937_64 engine(92);
  auto build = [&]() {
    std::vector<ProjectedInstance> instances;
    // 10 nonzero cells: 5 sentences of w=1 (1 cell), plus one w=2 with 5
    // nonzero cells... keep it simple: 10 one-token sentences.
    for (int i = 0; i < 10; ++i) {
      ScoreRecord rec = make_record("r" + std::to_string(i), 1, engine);
      rec.scores(0, 0) = 1.0 + i;
      instances.push_back(ProjectedInstance{rec, 0.0});
    }
    return instances;
  };

  auto a = build();
  blankout(a, 0.4, 1234);
  int zeros = 0;
  for (const auto& inst : a) {
    if (inst.record.scores(0, 0) == 0.0) ++zeros;
    CHECK(inst.missing_fraction == (inst.record.scores(0, 0) == 0.0 ? 1.0 : 0.0));
  }
  CHECK(zeros == 4);

  auto b = build();
  blankout(b, 0.4, 1234);
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].record.scores == b[i].record.scores);

  auto c = build();
  blankout(c, 0.0, 77);
  for (size_t i = 0; i < c.size(); ++i) CHECK(c[i].record.scores(0, 0) == 1.0 + static_cast<double>(i));

  auto d = build();
  blankout(d, 1.0, 77);
  for (const auto& inst : d) {
    CHECK(inst.record.scores(0, 0) == 0.0);
    CHECK(inst.missing_fraction == 1.0);
  }

  auto e = build();
  CHECK_THROWS_AS(blankout(e, 1.5, 1), ArgumentError);
  CHECK_THROWS_AS(blankout(e, -0.1, 1), ArgumentError);
}

TEST_CASE("subsample is a seeded choice of min(n, size) items") {
  std::vector<int> items{1, 2, 3, 4, 5, 6, 7, 8};
  auto big = subsample(items, 20, 5);
  CHECK(big.size() == 8);
  CHECK(std::set<int>(big.begin(), big.end()).size() == 8);

  auto one = subsample(items, 1, 5);
  CHECK(one.size() == 1);

  auto again = subsample(items, 3, 99);
  CHECK(subsample(items, 3, 99) == again);
  CHECK_THROWS_AS(subsample(items, 0, 1), ArgumentError);
}

TEST_SUITE_END();
