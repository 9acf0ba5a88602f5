#include "tlp/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace tlp {

namespace {

std::string locus(const std::string& path, int line) {
  return path + ":" + std::to_string(line);
}

std::vector<std::string> split_tabs(const std::string& s) {
  std::vector<std::string> out;
  std::string::size_type pos = 0;
  while (true) {
    auto tab = s.find('\t', pos);
    if (tab == std::string::npos) {
      out.push_back(s.substr(pos));
      break;
    }
    out.push_back(s.substr(pos, tab - pos));
    pos = tab + 1;
  }
  return out;
}

bool parse_int(const std::string& s, int& out) {
  if (s.empty()) return false;
  size_t idx = 0;
  try {
    out = std::stoi(s, &idx);
  } catch (const std::exception&) {
    return false;
  }
  return idx == s.size();
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  size_t idx = 0;
  try {
    out = std::stod(s, &idx);
  } catch (const std::exception&) {
    return false;
  }
  return idx == s.size();
}

std::ifstream open_for_read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  return in;
}

std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  return out;
}

}  // namespace

// --- treebanks ---------------------------------------------------------------

std::vector<Sentence> read_treebank(const std::string& path) {
  std::ifstream in = open_for_read(path);
  std::vector<Sentence> sentences;

  Sentence current;
  std::vector<std::optional<int>> heads;
  std::string pending_id;
  int line_no = 0;
  int sentence_start = 1;

  auto flush = [&](int at_line) {
    if (current.tokens.empty()) return;
    const int w = static_cast<int>(current.tokens.size());
    const bool any = std::any_of(heads.begin(), heads.end(), [](auto& h) { return h.has_value(); });
    const bool all = std::all_of(heads.begin(), heads.end(), [](auto& h) { return h.has_value(); });
    if (any && !all)
      throw ParseError(locus(path, at_line) + ": sentence mixes annotated and missing heads");
    if (all) {
      std::vector<int> hv;
      for (auto& h : heads) {
        if (*h < 0 || *h > w)
          throw ParseError(locus(path, sentence_start) + ": head out of range");
        hv.push_back(*h);
      }
      current.gold_heads = std::move(hv);
    }
    if (current.id.empty()) current.id = std::to_string(sentences.size() + 1);
    sentences.push_back(std::move(current));
    current = Sentence{};
    heads.clear();
  };

  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush(line_no);
      pending_id.clear();
      continue;
    }
    if (line[0] == '#') {
      const std::string prefix = "# sent_id = ";
      if (line.rfind(prefix, 0) == 0) pending_id = line.substr(prefix.size());
      continue;
    }
    std::vector<std::string> cols = split_tabs(line);
    if (cols.size() != 10)
      throw ParseError(locus(path, line_no) + ": expected 10 tab-separated columns, got " +
                       std::to_string(cols.size()));
    // Multiword ranges (1-2) and empty nodes (8.1) are not tokens.
    if (cols[0].find('-') != std::string::npos || cols[0].find('.') != std::string::npos)
      continue;
    int tok_id = 0;
    if (!parse_int(cols[0], tok_id))
      throw ParseError(locus(path, line_no) + ": non-integer token id '" + cols[0] + "'");
    if (current.tokens.empty()) {
      sentence_start = line_no;
      current.id = pending_id;
    }
    current.tokens.push_back(cols[1]);
    current.pos.push_back(cols[3]);
    if (cols[6] == "_") {
      heads.push_back(std::nullopt);
    } else {
      int h = 0;
      if (!parse_int(cols[6], h))
        throw ParseError(locus(path, line_no) + ": non-integer head '" + cols[6] + "'");
      heads.push_back(h);
    }
    std::array<std::string, 10> raw;
    std::copy_n(cols.begin(), 10, raw.begin());
    current.raw_columns.push_back(std::move(raw));
  }
  flush(line_no + 1);
  return sentences;
}

void write_treebank(const std::vector<Sentence>& sentences,
                    const std::vector<std::vector<int>>* predicted_heads,
                    const std::string& path) {
  if (predicted_heads && predicted_heads->size() != sentences.size())
    throw ArgumentError("write_treebank: prediction count does not match sentence count");
  std::ofstream out = open_for_write(path);
  for (size_t s = 0; s < sentences.size(); ++s) {
    const Sentence& sent = sentences[s];
    const std::vector<int>* pred = predicted_heads ? &(*predicted_heads)[s] : nullptr;
    if (pred && pred->size() != sent.tokens.size())
      throw ArgumentError("write_treebank: prediction length mismatch in sentence " + sent.id);
    out << "# sent_id = " << sent.id << "\n";
    for (size_t i = 0; i < sent.tokens.size(); ++i) {
      std::array<std::string, 10> cols;
      if (i < sent.raw_columns.size()) {
        cols = sent.raw_columns[i];
      } else {
        cols.fill("_");
        cols[0] = std::to_string(i + 1);
        cols[1] = sent.tokens[i];
        cols[3] = sent.pos[i];
      }
      if (pred) {
        cols[6] = std::to_string((*pred)[i]);
      } else if (sent.gold_heads) {
        cols[6] = std::to_string((*sent.gold_heads)[i]);
      }
      for (int c = 0; c < 10; ++c) {
        if (c) out << '\t';
        out << cols[static_cast<size_t>(c)];
      }
      out << "\n";
    }
    out << "\n";
  }
}

// --- embeddings ----------------------------------------------------------------

const std::vector<double>* EmbeddingTable::find(const std::string& word) const {
  auto it = vectors_.find(word);
  return it == vectors_.end() ? nullptr : &it->second;
}

EmbeddingTable read_embeddings(const std::string& path) {
  std::ifstream in = open_for_read(path);
  std::unordered_map<std::string, std::vector<double>> vectors;
  Index width = -1;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    std::vector<double> values;
    double v;
    while (ss >> v) values.push_back(v);
    if (!ss.eof())
      throw ParseError(locus(path, line_no) + ": malformed embedding value");
    if (width < 0) {
      if (values.empty())
        throw ParseError(locus(path, line_no) + ": embedding line has no values");
      width = static_cast<Index>(values.size());
    } else if (static_cast<Index>(values.size()) != width) {
      throw ParseError(locus(path, line_no) + ": embedding width " +
                       std::to_string(values.size()) + " != " + std::to_string(width));
    }
    vectors[word] = std::move(values);  // duplicate words: last wins
  }
  if (width < 0) throw ParseError(path + ": empty embedding file");
  return EmbeddingTable(width, std::move(vectors));
}

std::vector<std::string> collect_pos_vocab(const std::vector<Sentence>& sentences) {
  std::set<std::string> tags;
  for (const Sentence& s : sentences) tags.insert(s.pos.begin(), s.pos.end());
  return {tags.begin(), tags.end()};
}

FeatureMatrix featurize(const Sentence& s, const EmbeddingTable& emb, const FeatureConfig& cfg) {
  if (emb.width() != cfg.embedding_width)
    throw ShapeError("featurize: embedding table width does not match feature config");
  const Index w = s.size();
  const Index f = cfg.feature_width();
  Tensord values({w, f});
  for (Index i = 0; i < w; ++i) {
    const auto* vec = emb.find(s.tokens[static_cast<size_t>(i)]);
    if (vec)
      for (Index k = 0; k < cfg.embedding_width; ++k) values(i, k) = (*vec)[static_cast<size_t>(k)];
    if (cfg.use_pos) {
      const auto& vocab = cfg.pos_vocab;
      auto it = std::find(vocab.begin(), vocab.end(), s.pos[static_cast<size_t>(i)]);
      if (it != vocab.end())
        values(i, cfg.embedding_width + static_cast<Index>(it - vocab.begin())) = 1.0;
    }
  }
  return FeatureMatrix{std::move(values)};
}

// --- score corpora --------------------------------------------------------------

using nlohmann::json;

std::vector<ScoreRecord> read_score_corpus(const std::string& path) {
  std::ifstream in = open_for_read(path);
  std::vector<ScoreRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(locus(path, line_no) + ": bad score record: " + e.what());
    }
    ScoreRecord rec;
    try {
      rec.id = j.at("id").get<std::string>();
      rec.tokens = j.at("tokens").get<std::vector<std::string>>();
      rec.pos = j.at("pos").get<std::vector<std::string>>();
      const json& rows = j.at("scores");
      const Index w = static_cast<Index>(rec.tokens.size());
      if (w < 1) throw DataError("record " + rec.id + ": no tokens");
      if (rec.pos.size() != rec.tokens.size())
        throw DataError("record " + rec.id + ": pos/tokens length mismatch");
      if (static_cast<Index>(rows.size()) != w)
        throw DataError("record " + rec.id + ": expected " + std::to_string(w) +
                        " score rows, got " + std::to_string(rows.size()));
      rec.scores = Tensord({w, w + 1});
      for (Index i = 0; i < w; ++i) {
        const json& row = rows[static_cast<size_t>(i)];
        if (static_cast<Index>(row.size()) != w + 1)
          throw DataError("record " + rec.id + ": row " + std::to_string(i) + " has " +
                          std::to_string(row.size()) + " columns, expected " +
                          std::to_string(w + 1));
        for (Index k = 0; k <= w; ++k) {
          const json& cell = row[static_cast<size_t>(k)];
          if (ScoreMatrix::self_arc(i, k)) {
            if (!cell.is_null())
              throw DataError("record " + rec.id + ": self-arc cell (" + std::to_string(i) +
                              "," + std::to_string(k) + ") must be null");
          } else {
            if (!cell.is_number())
              throw DataError("record " + rec.id + ": cell (" + std::to_string(i) + "," +
                              std::to_string(k) + ") must be a number");
            rec.scores(i, k) = cell.get<double>();
          }
        }
      }
    } catch (const json::exception& e) {
      throw DataError(locus(path, line_no) + ": bad score record: " + e.what());
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void write_score_corpus(const std::vector<ScoreRecord>& records, const std::string& path) {
  std::ofstream out = open_for_write(path);
  for (const ScoreRecord& rec : records) {
    const Index w = rec.size();
    if (rec.scores.rank() != 2 || rec.scores.dim(0) != w || rec.scores.dim(1) != w + 1)
      throw DataError("record " + rec.id + ": scores must be w x (w+1)");
    json rows = json::array();
    for (Index i = 0; i < w; ++i) {
      json row = json::array();
      for (Index k = 0; k <= w; ++k) {
        if (ScoreMatrix::self_arc(i, k))
          row.push_back(nullptr);
        else
          row.push_back(rec.scores(i, k));
      }
      rows.push_back(std::move(row));
    }
    json j{{"id", rec.id}, {"tokens", rec.tokens}, {"pos", rec.pos}, {"scores", std::move(rows)}};
    out << j.dump() << "\n";
  }
}

// --- alignments ------------------------------------------------------------------

std::vector<SentenceAlignmentEntry> read_sentence_alignments(const std::string& path) {
  std::ifstream in = open_for_read(path);
  std::vector<SentenceAlignmentEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols = split_tabs(line);
    if (cols.size() != 3)
      throw DataError(locus(path, line_no) + ": expected `source_id target_id confidence`");
    double conf = 0.0;
    if (!parse_double(cols[2], conf))
      throw DataError(locus(path, line_no) + ": bad confidence '" + cols[2] + "'");
    if (conf < 0.0 || conf > 1.0)
      throw DataError(locus(path, line_no) + ": confidence outside [0,1]");
    entries.push_back({cols[0], cols[1], conf, line_no, path});
  }
  return entries;
}

std::vector<WordAlignmentEntry> read_word_alignments(const std::string& path) {
  std::ifstream in = open_for_read(path);
  std::vector<WordAlignmentEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols = split_tabs(line);
    if (cols.size() < 2)
      throw DataError(locus(path, line_no) + ": expected `source_id target_id links...`");
    WordAlignmentEntry entry;
    entry.source_id = cols[0];
    entry.target_id = cols[1];
    entry.line = line_no;
    entry.file = path;
    for (size_t c = 2; c < cols.size(); ++c) {
      std::istringstream ss(cols[c]);
      std::string item;
      while (ss >> item) {
        const auto dash = item.find('-');
        const auto colon = item.find(':', dash == std::string::npos ? 0 : dash);
        if (dash == std::string::npos || colon == std::string::npos)
          throw DataError(locus(path, line_no) + ": bad link '" + item + "', expected i-j:conf");
        int i = 0, jdx = 0;
        double conf = 0.0;
        if (!parse_int(item.substr(0, dash), i) ||
            !parse_int(item.substr(dash + 1, colon - dash - 1), jdx) ||
            !parse_double(item.substr(colon + 1), conf))
          throw DataError(locus(path, line_no) + ": bad link '" + item + "', expected i-j:conf");
        if (i < 0 || jdx < 0)
          throw DataError(locus(path, line_no) + ": negative token index in '" + item + "'");
        if (conf < 0.0 || conf > 1.0)
          throw DataError(locus(path, line_no) + ": confidence outside [0,1] in '" + item + "'");
        entry.links.emplace_back(i, jdx, conf);
      }
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

}  // namespace tlp
