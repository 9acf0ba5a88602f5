#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "tlp/corpus.hpp"
#include "tlp/decoder.hpp"
#include "tlp/encoder.hpp"
#include "tlp/losses.hpp"
#include "tlp/projection.hpp"
#include "tlp/trainer.hpp"

namespace {

using namespace tlp;

LossMode parse_loss(const std::string& name) {
  if (name == "xent") return LossMode::CrossEntropy;
  if (name == "mse") return LossMode::MeanSquaredError;
  throw ArgumentError("unknown loss '" + name + "', expected xent or mse");
}

int default_epochs(LossMode loss) {
  // Fixed-epoch defaults for cross-lingual training, tuned on dev data:
  // 6 with cross entropy, 5 with mean squared error.
  return loss == LossMode::CrossEntropy ? 6 : 5;
}

Sentence record_sentence(const ScoreRecord& rec) {
  Sentence s;
  s.id = rec.id;
  s.tokens = rec.tokens;
  s.pos = rec.pos;
  return s;
}

std::vector<TrainingInstance> treebank_instances(const std::vector<Sentence>& sentences,
                                                 const EmbeddingTable& emb,
                                                 const FeatureConfig& features, LossMode loss,
                                                 bool need_targets) {
  std::vector<TrainingInstance> out;
  for (const Sentence& s : sentences) {
    if (!s.gold_heads)
      throw DataError("sentence " + s.id + " has no gold heads");
    TrainingInstance inst;
    inst.id = s.id;
    inst.features = featurize(s, emb, features);
    inst.gold_heads = s.gold_heads;
    if (need_targets && loss == LossMode::MeanSquaredError)
      inst.target_scores = heads_to_matrix(*s.gold_heads);
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<TrainingInstance> score_corpus_instances(const std::vector<ScoreRecord>& records,
                                                     const EmbeddingTable& emb,
                                                     const FeatureConfig& features,
                                                     LossMode loss) {
  std::vector<TrainingInstance> out;
  for (const ScoreRecord& rec : records) {
    TrainingInstance inst;
    inst.id = rec.id;
    inst.features = featurize(record_sentence(rec), emb, features);
    if (loss == LossMode::MeanSquaredError) {
      inst.target_scores = rec.scores;
    } else {
      // Early decoding: commit to the best tree under the projected scores
      // once, before training.
      inst.gold_heads = decode(ScoreMatrix{rec.scores});
    }
    out.push_back(std::move(inst));
  }
  return out;
}

void write_metrics(const std::vector<EpochMetrics>& history, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write metrics file: " + path);
  for (const EpochMetrics& m : history) {
    nlohmann::json j{{"epoch", m.epoch}, {"train_loss", m.train_loss},
                     {"wall_seconds", m.wall_seconds}};
    if (m.dev_uas)
      j["dev_uas"] = *m.dev_uas;
    else
      j["dev_uas"] = nullptr;
    out << j.dump() << "\n";
  }
}

std::string format_uas(double uas) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(2) << 100.0 * uas;
  return ss.str();
}

// --- subcommand payloads ------------------------------------------------------

struct TrainArgs {
  std::string mode, loss = "xent", train, dev, embeddings, out, metrics;
  int epochs = 0, subsample = 0, batch = 64, patience = 5;
  Index hidden = 100, layers = 4;
  std::uint64_t seed = 1;
  bool no_pos = false;
};

int cmd_train(const TrainArgs& a) {
  const LossMode loss = parse_loss(a.loss);
  const EmbeddingTable emb = read_embeddings(a.embeddings);

  TrainConfig cfg;
  cfg.loss = loss;
  cfg.batch_size = a.batch;
  cfg.hidden = a.hidden;
  cfg.layers = a.layers;
  cfg.patience = a.patience;
  cfg.seed = a.seed;

  FeatureConfig features;
  features.embedding_width = emb.width();
  features.use_pos = !a.no_pos;

  std::vector<TrainingInstance> instances;
  if (a.mode == "mono") {
    std::vector<Sentence> sentences = read_treebank(a.train);
    if (a.subsample > 0)
      sentences = subsample(std::move(sentences), static_cast<size_t>(a.subsample), a.seed);
    features.pos_vocab = collect_pos_vocab(sentences);
    instances = treebank_instances(sentences, emb, features, loss, true);
    if (!a.dev.empty()) {
      cfg.schedule = Schedule::EarlyStopping;
      cfg.epochs = a.epochs;  // cap; 0 keeps the default
    } else {
      if (a.epochs < 1)
        throw ConfigError("mono training without --dev needs an explicit --epochs count");
      cfg.schedule = Schedule::FixedEpochs;
      cfg.epochs = a.epochs;
    }
  } else if (a.mode == "xling") {
    std::vector<ScoreRecord> records = read_score_corpus(a.train);
    if (a.subsample > 0)
      records = subsample(std::move(records), static_cast<size_t>(a.subsample), a.seed);
    std::vector<Sentence> plain;
    for (const ScoreRecord& r : records) plain.push_back(record_sentence(r));
    features.pos_vocab = collect_pos_vocab(plain);
    instances = score_corpus_instances(records, emb, features, loss);
    cfg.schedule = Schedule::FixedEpochs;
    cfg.epochs = a.epochs > 0 ? a.epochs : default_epochs(loss);
  } else {
    throw ArgumentError("unknown mode '" + a.mode + "', expected mono or xling");
  }

  std::vector<TrainingInstance> dev;
  if (!a.dev.empty())
    dev = treebank_instances(read_treebank(a.dev), emb, features, loss, false);

  TrainResult result = train(instances, dev.empty() ? nullptr : &dev, cfg);

  save_model(ParserModel{result.model, features}, a.out);
  write_metrics(result.history, a.metrics.empty() ? a.out + ".metrics.jsonl" : a.metrics);

  for (const EpochMetrics& m : result.history) {
    std::cout << "epoch " << m.epoch << "  loss " << m.train_loss;
    if (m.dev_uas) std::cout << "  dev-uas " << format_uas(*m.dev_uas);
    std::cout << "\n";
  }
  return 0;
}

struct PathArgs {
  std::string model, input, embeddings, out;
};

void check_embedding_width(const ParserModel& model, const EmbeddingTable& emb) {
  if (emb.width() != model.features.embedding_width)
    throw DataError("embedding width " + std::to_string(emb.width()) +
                    " does not match the model's " +
                    std::to_string(model.features.embedding_width));
}

int cmd_export_scores(const PathArgs& a) {
  const ParserModel model = load_model(a.model);
  const EmbeddingTable emb = read_embeddings(a.embeddings);
  check_embedding_width(model, emb);
  const std::vector<Sentence> sentences = read_treebank(a.input);
  std::vector<ScoreRecord> records;
  for (const Sentence& s : sentences) {
    ScoreMatrix scores = score_sentence(featurize(s, emb, model.features), model.params);
    ScoreRecord rec;
    rec.id = s.id;
    rec.tokens = s.tokens;
    rec.pos = s.pos;
    rec.scores = std::move(scores.values);
    for (Index i = 0; i < rec.scores.dim(0); ++i) rec.scores(i, i + 1) = 0.0;
    records.push_back(std::move(rec));
  }
  write_score_corpus(records, a.out);
  std::cout << "wrote " << records.size() << " score matrices to " << a.out << "\n";
  return 0;
}

int cmd_parse(const PathArgs& a) {
  const ParserModel model = load_model(a.model);
  const EmbeddingTable emb = read_embeddings(a.embeddings);
  check_embedding_width(model, emb);
  const std::vector<Sentence> sentences = read_treebank(a.input);
  std::vector<std::vector<int>> heads;
  for (const Sentence& s : sentences)
    heads.push_back(decode(score_sentence(featurize(s, emb, model.features), model.params)));
  write_treebank(sentences, &heads, a.out);
  std::cout << "parsed " << sentences.size() << " sentences to " << a.out << "\n";
  return 0;
}

struct ProjectArgs {
  std::string target, out;
  std::vector<std::string> sources, sent_align, word_align;
  bool no_standardize = false;
};

int cmd_project(const ProjectArgs& a) {
  if (a.sources.empty()) throw ArgumentError("project: at least one --sources file required");
  if (a.sent_align.size() != a.sources.size() || a.word_align.size() != a.sources.size())
    throw ArgumentError("project: need one --sent-align and one --word-align per source");

  const std::vector<Sentence> targets = read_treebank(a.target);
  std::vector<SourceCorpus> sources;
  std::vector<std::vector<SentenceAlignmentEntry>> sent_aligns;
  std::vector<std::vector<WordAlignmentEntry>> word_aligns;
  for (size_t k = 0; k < a.sources.size(); ++k) {
    SourceCorpus corpus{a.sources[k], read_score_corpus(a.sources[k])};
    sources.push_back(a.no_standardize ? std::move(corpus) : standardize(std::move(corpus)));
    sent_aligns.push_back(read_sentence_alignments(a.sent_align[k]));
    word_aligns.push_back(read_word_alignments(a.word_align[k]));
  }

  const std::vector<ProjectedInstance> projected =
      project(targets, sources, sent_aligns, word_aligns);

  std::vector<ScoreRecord> records;
  double missing_sum = 0.0;
  for (const ProjectedInstance& inst : projected) {
    std::cout << inst.record.id << "\t" << std::fixed << std::setprecision(4)
              << inst.missing_fraction << "\n";
    missing_sum += inst.missing_fraction;
    records.push_back(inst.record);
  }
  if (!projected.empty())
    std::cout << "# mean missing fraction\t" << std::fixed << std::setprecision(4)
              << missing_sum / static_cast<double>(projected.size()) << "\n";
  write_score_corpus(records, a.out);
  return 0;
}

struct EvalArgs {
  std::string gold, pred;
};

int cmd_eval(const EvalArgs& a) {
  const std::vector<Sentence> gold = read_treebank(a.gold);
  const std::vector<Sentence> pred = read_treebank(a.pred);
  if (gold.size() != pred.size())
    throw DataError("gold has " + std::to_string(gold.size()) + " sentences, predictions " +
                    std::to_string(pred.size()));
  if (gold.empty()) throw DataError("empty treebank");
  std::int64_t correct = 0, total = 0;
  for (size_t s = 0; s < gold.size(); ++s) {
    if (!gold[s].gold_heads) throw DataError("gold sentence " + gold[s].id + " has no heads");
    if (!pred[s].gold_heads) throw DataError("predicted sentence " + pred[s].id + " has no heads");
    const auto& g = *gold[s].gold_heads;
    const auto& p = *pred[s].gold_heads;
    if (g.size() != p.size())
      throw DataError("sentence " + gold[s].id + ": token count mismatch");
    for (size_t i = 0; i < g.size(); ++i) {
      if (g[i] == p[i]) ++correct;
      ++total;
    }
  }
  std::cout << format_uas(static_cast<double>(correct) / static_cast<double>(total)) << "\n";
  return 0;
}

struct BlankoutArgs {
  std::string train, test, embeddings, out, loss = "both", fractions = "0,0.1,0.2,0.3,0.4";
  int epochs = 0, subsample = 0, batch = 64;
  Index hidden = 100, layers = 4;
  std::uint64_t seed = 1;
  bool no_pos = false;
};

int cmd_blankout_experiment(const BlankoutArgs& a) {
  std::vector<std::string> fraction_tokens;
  std::vector<double> fractions;
  {
    std::stringstream ss(a.fractions);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      size_t idx = 0;
      double v = std::stod(item, &idx);
      if (idx != item.size() || v < 0.0 || v > 1.0)
        throw ArgumentError("bad fraction '" + item + "'");
      fraction_tokens.push_back(item);
      fractions.push_back(v);
    }
    if (fractions.empty()) throw ArgumentError("no fractions given");
  }
  std::vector<LossMode> losses;
  if (a.loss == "both")
    losses = {LossMode::MeanSquaredError, LossMode::CrossEntropy};
  else
    losses = {parse_loss(a.loss)};

  const EmbeddingTable emb = read_embeddings(a.embeddings);
  std::vector<ScoreRecord> records = read_score_corpus(a.train);
  if (a.subsample > 0)
    records = subsample(std::move(records), static_cast<size_t>(a.subsample), a.seed);

  FeatureConfig features;
  features.embedding_width = emb.width();
  features.use_pos = !a.no_pos;
  std::vector<Sentence> plain;
  for (const ScoreRecord& r : records) plain.push_back(record_sentence(r));
  features.pos_vocab = collect_pos_vocab(plain);

  std::vector<Sentence> test_sentences = read_treebank(a.test);
  std::vector<TrainingInstance> test_set;
  for (const Sentence& s : test_sentences) {
    if (!s.gold_heads) throw DataError("test sentence " + s.id + " has no gold heads");
    TrainingInstance inst;
    inst.id = s.id;
    inst.features = featurize(s, emb, features);
    inst.gold_heads = s.gold_heads;
    test_set.push_back(std::move(inst));
  }

  std::ostringstream table;
  table << "fraction\tloss\tuas\n";
  for (size_t fi = 0; fi < fractions.size(); ++fi) {
    for (LossMode loss : losses) {
      std::vector<ProjectedInstance> instances;
      for (const ScoreRecord& r : records)
        instances.push_back(ProjectedInstance{r, missing_fraction(r.scores)});
      blankout(instances, fractions[fi], a.seed);

      std::vector<ScoreRecord> blanked;
      for (ProjectedInstance& inst : instances) blanked.push_back(std::move(inst.record));

      TrainConfig cfg;
      cfg.loss = loss;
      cfg.schedule = Schedule::FixedEpochs;
      cfg.epochs = a.epochs > 0 ? a.epochs : default_epochs(loss);
      cfg.batch_size = a.batch;
      cfg.hidden = a.hidden;
      cfg.layers = a.layers;
      cfg.seed = a.seed;

      TrainResult result =
          train(score_corpus_instances(blanked, emb, features, loss), nullptr, cfg);
      const double uas = evaluate_uas(result.model, test_set);
      table << fraction_tokens[fi] << "\t"
            << (loss == LossMode::MeanSquaredError ? "mse" : "xent") << "\t" << format_uas(uas)
            << "\n";
    }
  }

  std::ofstream out(a.out);
  if (!out) throw DataError("cannot write table: " + a.out);
  out << table.str();
  std::cout << table.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-based dependency parser with four-directional tensor-LSTM edge scoring"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Train a parser");
  train->add_option("--mode", train_args.mode, "mono (treebank) or xling (score corpus)")
      ->required();
  train->add_option("--loss", train_args.loss, "xent or mse")->required();
  train->add_option("--train", train_args.train, "training file")->required();
  train->add_option("--dev", train_args.dev, "development treebank (enables early stopping)");
  train->add_option("--embeddings", train_args.embeddings, "embedding text file")->required();
  train->add_option("--out", train_args.out, "output model file")->required();
  train->add_option("--seed", train_args.seed, "random seed")->required();
  train->add_option("--epochs", train_args.epochs, "epoch count (or cap with --dev)");
  train->add_option("--subsample", train_args.subsample, "train on n sampled sentences");
  train->add_option("--hidden", train_args.hidden, "units per direction")->capture_default_str();
  train->add_option("--layers", train_args.layers, "stacked layers")->capture_default_str();
  train->add_option("--batch", train_args.batch, "minibatch size")->capture_default_str();
  train->add_option("--patience", train_args.patience, "early-stopping patience")->capture_default_str();
  train->add_option("--metrics", train_args.metrics, "metrics log path");
  train->add_flag("--no-pos", train_args.no_pos, "drop the POS one-hot block");

  PathArgs export_args;
  CLI::App* exp = app.add_subcommand("export-scores", "Write raw edge-score matrices");
  exp->add_option("--model", export_args.model)->required();
  exp->add_option("--input", export_args.input)->required();
  exp->add_option("--embeddings", export_args.embeddings)->required();
  exp->add_option("--out", export_args.out)->required();

  PathArgs parse_args;
  CLI::App* parse = app.add_subcommand("parse", "Parse a corpus");
  parse->add_option("--model", parse_args.model)->required();
  parse->add_option("--input", parse_args.input)->required();
  parse->add_option("--embeddings", parse_args.embeddings)->required();
  parse->add_option("--out", parse_args.out)->required();

  ProjectArgs project_args;
  CLI::App* project = app.add_subcommand("project", "Project source scores across alignments");
  project->add_option("--target", project_args.target, "target treebank (tokens + POS)")
      ->required();
  project->add_option("--sources", project_args.sources, "source score corpora")->required();
  project->add_option("--sent-align", project_args.sent_align, "sentence alignment files")
      ->required();
  project->add_option("--word-align", project_args.word_align, "word alignment files")
      ->required();
  project->add_option("--out", project_args.out)->required();
  project->add_flag("--no-standardize", project_args.no_standardize,
                    "skip per-language standardization");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "Unlabeled attachment score");
  eval->add_option("--gold", eval_args.gold)->required();
  eval->add_option("--pred", eval_args.pred)->required();

  BlankoutArgs blankout_args;
  CLI::App* blank = app.add_subcommand("blankout-experiment",
                                       "Train per blankout fraction per loss, tabulate UAS");
  blank->add_option("--train", blankout_args.train, "projected score corpus")->required();
  blank->add_option("--test", blankout_args.test, "gold treebank for UAS")->required();
  blank->add_option("--embeddings", blankout_args.embeddings)->required();
  blank->add_option("--fractions", blankout_args.fractions, "comma-separated fractions")->capture_default_str();
  blank->add_option("--seed", blankout_args.seed)->required();
  blank->add_option("--loss", blankout_args.loss, "mse, xent, or both")->capture_default_str();
  blank->add_option("--out", blankout_args.out, "output TSV table")->required();
  blank->add_option("--epochs", blankout_args.epochs, "epochs per run");
  blank->add_option("--subsample", blankout_args.subsample, "train on n sampled sentences");
  blank->add_option("--hidden", blankout_args.hidden, "units per direction")->capture_default_str();
  blank->add_option("--layers", blankout_args.layers, "stacked layers")->capture_default_str();
  blank->add_option("--batch", blankout_args.batch, "minibatch size")->capture_default_str();
  blank->add_flag("--no-pos", blankout_args.no_pos, "drop the POS one-hot block");

  try {
    app.parse(argc, argv);
    if (train->parsed()) return cmd_train(train_args);
    if (exp->parsed()) return cmd_export_scores(export_args);
    if (parse->parsed()) return cmd_parse(parse_args);
    if (project->parsed()) return cmd_project(project_args);
    if (eval->parsed()) return cmd_eval(eval_args);
    if (blank->parsed()) return cmd_blankout_experiment(blankout_args);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 4;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 4;
  } catch (const ValidityError& e) {
    std::cerr << "invalid structure: " << e.what() << "\n";
    return 4;
  } catch (const ShapeError& e) {
    std::cerr << "shape error: " << e.what() << "\n";
    return 4;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const ArgumentError& e) {
    std::cerr << "argument error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
