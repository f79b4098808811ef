// stylo: single binary tying the pipeline together.
// Exit codes: 0 success, 2 input error, 3 numeric failure.

#include <CLI11.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "stylo/baselines.hpp"
#include "stylo/corpus.hpp"
#include "stylo/embeddings.hpp"
#include "stylo/eval.hpp"
#include "stylo/model.hpp"
#include "stylo/model_io.hpp"
#include "stylo/synthetic.hpp"
#include "stylo/tagger.hpp"
#include "stylo/training.hpp"

namespace fs = std::filesystem;
using namespace stylo;

namespace {

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

int worker_count() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  if (const char* env = std::getenv("STYLO_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0 && cap < n) n = cap;
  }
  return n;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

// Everything the subcommands share; CLI flags override config-file values
// (CLI11 handles the precedence), and the fully resolved set is echoed into
// the run directory.
struct RunConfig {
  std::string corpus;     // raw text root with train/ and test/ author dirs
  std::string pretagged;  // token/TAG root with train/ and test/
  std::string tagger;     // .sttag checkpoint for raw corpora
  std::string embeddings; // GloVe-style text file, lexical mode
  std::string out = "run";
  std::string mode = "syntactic-cnn";

  int M = 100;
  int N = 30;
  int d_p = 64;
  int d_l = 128;
  int filters = 100;
  std::vector<int> windows = {3, 5};
  int layers = 1;
  int vocab_cap = 20000;

  TrainingConfig tcfg;

  std::string resolved;  // filled after parse, written to out/config.ini
  std::string config_hash;
};

void parse_mode(const std::string& mode, FeatureMode& fm, EncoderKind& ek) {
  const auto dash = mode.find('-');
  const std::string feat = mode.substr(0, dash);
  const std::string enc = dash == std::string::npos ? "" : mode.substr(dash + 1);
  if (feat == "syntactic")
    fm = FeatureMode::syntactic;
  else if (feat == "lexical")
    fm = FeatureMode::lexical;
  else
    throw InputError("unknown mode: " + mode + " (want {syntactic,lexical}-{cnn,lstm})");
  if (enc == "cnn")
    ek = EncoderKind::cnn;
  else if (enc == "lstm")
    ek = EncoderKind::lstm;
  else
    throw InputError("unknown encoder in mode: " + mode);
}

// ---- data loading ----------------------------------------------------------------

struct TokTagDoc {
  int author_id = 0;
  std::string doc_id;
  // per sentence: (token, tag id)
  std::vector<std::vector<std::pair<std::string, int>>> sentences;
};

int author_index(std::vector<std::string>& authors, const std::string& name) {
  for (std::size_t i = 0; i < authors.size(); ++i)
    if (authors[i] == name) return static_cast<int>(i);
  authors.push_back(name);
  return static_cast<int>(authors.size()) - 1;
}

std::vector<TokTagDoc> load_pretagged_docs(const std::string& root,
                                           std::vector<std::string>& authors) {
  if (!fs::is_directory(root)) throw InputError("not a directory: " + root);
  std::vector<TokTagDoc> docs;
  std::vector<std::string> dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) dirs.push_back(e.path().filename().string());
  std::sort(dirs.begin(), dirs.end());
  for (const auto& author : dirs) {
    const int id = author_index(authors, author);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(fs::path(root) / author))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      TokTagDoc doc;
      doc.author_id = id;
      doc.doc_id = file.stem().string();
      doc.sentences = load_pretagged(file.string());
      if (!doc.sentences.empty()) docs.push_back(std::move(doc));
    }
  }
  return docs;
}

std::vector<TokTagDoc> load_raw_docs(const std::string& root, const PerceptronTagger& tagger,
                                     std::vector<std::string>& authors) {
  const CorpusDir cd = load_corpus_dir(root);
  std::vector<TokTagDoc> docs;
  for (const auto& raw : cd.documents) {
    TokTagDoc doc;
    doc.author_id = author_index(authors, cd.author_names[static_cast<std::size_t>(raw.author_id)]);
    doc.doc_id = raw.doc_id;
    for (const auto& sent : split_sentences(normalize_nfc(raw.text))) {
      const TokenizedSentence toks = tokenize(sent);
      if (toks.tokens.empty()) continue;
      const std::vector<int> tags = tagger.tag(toks.tokens);
      std::vector<std::pair<std::string, int>> pairs;
      for (std::size_t t = 0; t < toks.tokens.size(); ++t)
        pairs.emplace_back(toks.tokens[t], tags[t]);
      doc.sentences.push_back(std::move(pairs));
    }
    if (!doc.sentences.empty()) docs.push_back(std::move(doc));
  }
  return docs;
}

struct Dataset {
  std::vector<std::string> authors;
  std::vector<Segment> train_pool, test;
  // token text aligned with the segments above (only when requested)
  std::vector<std::vector<std::vector<std::string>>> train_words, test_words;
  WordVocab vocab;  // lexical mode
};

// word_to_id: nullptr in syntactic mode.
void docs_to_segments(const std::vector<TokTagDoc>& docs, int M, int N,
                      const std::function<int(const std::string&)>* word_to_id,
                      std::vector<Segment>& segments,
                      std::vector<std::vector<std::vector<std::string>>>* words_out) {
  for (const auto& doc : docs) {
    std::vector<TaggedSentence> padded;
    for (const auto& sent : doc.sentences) {
      TaggedSentence t;
      for (const auto& [tok, tag] : sent) {
        t.tag_ids.push_back(tag);
        if (word_to_id) t.word_ids.push_back((*word_to_id)(tok));
      }
      t.true_length = static_cast<int>(t.tag_ids.size());
      padded.push_back(pad_or_truncate(t, N));
    }
    auto segs = segment_document(padded, M, doc.author_id, doc.doc_id);
    if (words_out) {
      for (const auto& seg : segs) {
        std::vector<std::vector<std::string>> seg_words(static_cast<std::size_t>(M));
        const std::size_t base = static_cast<std::size_t>(seg.position) * static_cast<std::size_t>(M);
        for (std::size_t i = 0; i < static_cast<std::size_t>(M); ++i) {
          if (base + i >= doc.sentences.size()) break;
          for (const auto& [tok, tag] : doc.sentences[base + i]) seg_words[i].push_back(tok);
        }
        words_out->push_back(std::move(seg_words));
      }
    }
    segments.insert(segments.end(), segs.begin(), segs.end());
  }
}

struct LoadedDocs {
  std::vector<std::string> authors;
  std::vector<TokTagDoc> train, test;
};

LoadedDocs load_docs(const RunConfig& rc) {
  LoadedDocs out;
  if (!rc.pretagged.empty()) {
    out.train = load_pretagged_docs(rc.pretagged + "/train", out.authors);
    out.test = load_pretagged_docs(rc.pretagged + "/test", out.authors);
  } else if (!rc.corpus.empty()) {
    if (rc.tagger.empty())
      throw InputError("raw --corpus input needs a trained --tagger checkpoint");
    const PerceptronTagger tagger = PerceptronTagger::load(rc.tagger);
    out.train = load_raw_docs(rc.corpus + "/train", tagger, out.authors);
    out.test = load_raw_docs(rc.corpus + "/test", tagger, out.authors);
  } else {
    throw InputError("need --pretagged or --corpus");
  }
  if (out.train.empty()) throw InputError("training corpus yielded no documents");
  return out;
}

Dataset build_dataset(const RunConfig& rc, const LoadedDocs& docs, bool lexical, bool keep_words) {
  Dataset ds;
  ds.authors = docs.authors;
  std::function<int(const std::string&)> word_to_id;
  if (lexical) {
    std::vector<TokenizedSentence> sents;
    for (const auto& doc : docs.train)
      for (const auto& sent : doc.sentences) {
        TokenizedSentence t;
        for (const auto& [tok, tag] : sent) t.tokens.push_back(tok);
        sents.push_back(std::move(t));
      }
    ds.vocab = WordVocab::build(sents, static_cast<std::size_t>(rc.vocab_cap));
    word_to_id = [&ds](const std::string& w) { return ds.vocab.id(w); };
  }
  const auto* ptr = lexical ? &word_to_id : nullptr;
  docs_to_segments(docs.train, rc.M, rc.N, ptr, ds.train_pool,
                   keep_words ? &ds.train_words : nullptr);
  docs_to_segments(docs.test, rc.M, rc.N, ptr, ds.test,
                   keep_words ? &ds.test_words : nullptr);
  if (ds.train_pool.empty()) throw InputError("no training segments (documents shorter than M?)");
  return ds;
}

// ---- model plumbing --------------------------------------------------------------

ModelConfig model_config(const RunConfig& rc, int classes) {
  ModelConfig cfg;
  parse_mode(rc.mode, cfg.mode, cfg.encoder);
  cfg.M = rc.M;
  cfg.N = rc.N;
  cfg.d_p = rc.d_p;
  cfg.d_l = rc.d_l;
  cfg.filters_per_width = rc.filters;
  cfg.windows = rc.windows;
  cfg.cnn_layers = rc.layers;
  cfg.classes = classes;
  return cfg;
}

SyntacticModel<float> make_model(const RunConfig& rc, const ModelConfig& cfg, const Dataset& ds) {
  ModelConfig c = cfg;
  if (c.mode == FeatureMode::lexical) c.word_vocab = static_cast<int>(ds.vocab.size());
  SyntacticModel<float> model(c);
  Rng rng(rc.tcfg.seed);
  model.init(rng);
  if (c.mode == FeatureMode::lexical && !rc.embeddings.empty()) {
    std::vector<float> table(model.word_table.v.size(), 0.0f);
    Rng erng(rc.tcfg.seed, /*stream=*/7);
    const auto rep = load_pretrained_embeddings(rc.embeddings, ds.vocab,
                                                static_cast<std::size_t>(c.word_dim), table, erng);
    model.word_table.v.data = table;
    std::cerr << "embeddings: " << rep.hits << "/" << rep.hits + rep.misses
              << " vocabulary hits (coverage " << rep.coverage() << ")\n";
  }
  return model;
}

std::vector<SegmentPrediction> predict_segments(SyntacticModel<float>& model,
                                                const std::vector<Segment>& segments) {
  std::vector<SegmentPrediction> preds;
  ForwardCache<float> cache;
  for (const auto& seg : segments) {
    const Vec<float> probs = model.forward(seg, cache);
    SegmentPrediction p;
    p.source_doc = seg.source_doc;
    p.position = seg.position;
    p.true_label = seg.author_id;
    p.probabilities.assign(probs.begin(), probs.end());
    p.predicted_label = 0;
    for (std::size_t c = 1; c < probs.size(); ++c)
      if (probs[c] > probs[static_cast<std::size_t>(p.predicted_label)])
        p.predicted_label = static_cast<int>(c);
    preds.push_back(std::move(p));
  }
  return preds;
}

void write_history_csv(const std::vector<EpochStats>& history, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "epoch,train_loss,train_acc,val_loss,val_acc,seconds\n";
  for (const auto& e : history)
    out << e.epoch << ',' << e.train_loss << ',' << e.train_acc << ',' << e.val_loss << ','
        << e.val_acc << ',' << e.seconds << '\n';
}

void write_run_config(const RunConfig& rc) {
  fs::create_directories(rc.out);
  std::ofstream out(fs::path(rc.out) / "config.ini");
  out << rc.resolved;
}

void print_report(const MetricsReport& rep, const std::vector<std::string>& authors) {
  std::cout << "segment accuracy:  " << rep.segment_accuracy << "\n"
            << "document accuracy: " << rep.document_accuracy << " (" << rep.documents_correct
            << "/" << rep.documents_total << ")\n";
  for (std::size_t c = 0; c < rep.per_class_recall.size(); ++c)
    std::cout << "  recall[" << (c < authors.size() ? authors[c] : std::to_string(c))
              << "] = " << rep.per_class_recall[c] << "\n";
}

// ---- subcommands -----------------------------------------------------------------

int cmd_stats(const RunConfig& rc) {
  std::string root = rc.corpus;
  if (root.empty()) throw InputError("stats needs --corpus");
  if (fs::is_directory(root + "/train")) root += "/train";
  const CorpusDir cd = load_corpus_dir(root);
  std::vector<std::pair<std::string, std::vector<TokenizedSentence>>> docs_by_author;
  for (const auto& doc : cd.documents) {
    std::vector<TokenizedSentence> sents;
    for (const auto& s : split_sentences(normalize_nfc(doc.text))) {
      TokenizedSentence t = tokenize(s);
      if (!t.tokens.empty()) sents.push_back(std::move(t));
    }
    docs_by_author.emplace_back(cd.author_names[static_cast<std::size_t>(doc.author_id)],
                                std::move(sents));
  }
  std::ostringstream csv;
  csv << "author,word_count,mean_sentence_length\n";
  for (const auto& s : compute_corpus_stats(docs_by_author))
    csv << s.author << ',' << s.word_count << ',' << s.mean_sentence_length << '\n';
  std::cout << csv.str();
  if (!rc.out.empty()) {
    fs::create_directories(rc.out);
    std::ofstream out(fs::path(rc.out) / "stats.csv");
    out << csv.str();
  }
  return 0;
}

int cmd_tag(const RunConfig& rc, const std::string& gold, int tagger_epochs) {
  if (!gold.empty()) {
    // train a tagger on gold token/TAG sentences and save it
    const auto corpus = load_gold_tagged(gold);
    const PerceptronTagger tagger = PerceptronTagger::train(corpus, tagger_epochs, rc.tcfg.seed);
    tagger.save(rc.out);
    std::cout << "tagger: " << tagger.feature_count() << " features -> " << rc.out << "\n";
    return 0;
  }
  if (rc.corpus.empty() || rc.tagger.empty())
    throw InputError("tag needs --corpus and --tagger (or --gold to train one)");
  const PerceptronTagger tagger = PerceptronTagger::load(rc.tagger);
  std::vector<std::string> authors;
  const auto docs = load_raw_docs(rc.corpus, tagger, authors);
  for (const auto& doc : docs) {
    const fs::path dir = fs::path(rc.out) / authors[static_cast<std::size_t>(doc.author_id)];
    fs::create_directories(dir);
    save_pretagged((dir / (doc.doc_id + ".txt")).string(), doc.sentences);
  }
  std::cout << "tagged " << docs.size() << " documents -> " << rc.out << "\n";
  return 0;
}

int cmd_train(const RunConfig& rc) {
  FeatureMode fm;
  EncoderKind ek;
  parse_mode(rc.mode, fm, ek);
  const LoadedDocs docs = load_docs(rc);
  const Dataset ds = build_dataset(rc, docs, fm == FeatureMode::lexical, false);
  const int classes = static_cast<int>(ds.authors.size());
  std::cout << "authors: " << classes << ", train segments: " << ds.train_pool.size()
            << ", test segments: " << ds.test.size() << "\n";

  const DatasetSplit split =
      make_split(ds.train_pool, ds.test, rc.tcfg.validation_fraction, rc.tcfg.seed);
  const ModelConfig mcfg = model_config(rc, classes);
  SyntacticModel<float> model = make_model(rc, mcfg, ds);
  std::cout << "trainable parameters: " << model.trainable_param_count() << "\n";

  write_run_config(rc);
  const auto result = fit(model, split, rc.tcfg, [](const EpochStats& e) {
    std::cout << "epoch " << e.epoch << "  loss " << e.train_loss << "  acc " << e.train_acc
              << "  val_acc " << e.val_acc << "  (" << e.seconds << "s)\n";
  });
  restore_params(model, result.best_params);

  write_history_csv(result.history, (fs::path(rc.out) / "history.csv").string());
  const auto preds = predict_segments(model, split.test);
  const MetricsReport rep = preds.empty() ? MetricsReport{} : report(preds, classes);
  if (!preds.empty()) {
    write_metrics_json(rep, (fs::path(rc.out) / "metrics.json").string());
    write_confusion_csv(rep.confusion, ds.authors, (fs::path(rc.out) / "confusion.csv").string());
    print_report(rep, ds.authors);
  } else {
    std::cout << "no test segments; skipping metrics\n";
  }

  nlohmann::json extra;
  extra["epoch"] = result.best_epoch;
  extra["val_acc"] = result.best_val_acc;
  extra["config_hash"] = rc.config_hash;
  extra["seed"] = rc.tcfg.seed;
  extra["authors"] = ds.authors;
  if (model.cfg.mode == FeatureMode::lexical) extra["words"] = ds.vocab.words();
  save_model(model, (fs::path(rc.out) / "model.stmod").string(), extra);
  std::cout << "run directory: " << rc.out << "\n";
  return 0;
}

// Rebuilds the word-id mapping stored in a lexical checkpoint header.
std::function<int(const std::string&)> header_word_map(const nlohmann::json& header) {
  auto index = std::make_shared<std::unordered_map<std::string, int>>();
  if (header.contains("words")) {
    const auto words = header.at("words").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < words.size(); ++i)
      (*index)[words[i]] = static_cast<int>(i) + 2;  // 0 PAD, 1 UNK
  }
  return [index](const std::string& w) {
    std::string lower = w;
    for (auto& c : lower)
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    const auto it = index->find(lower);
    return it == index->end() ? 1 : it->second;
  };
}

int cmd_eval(const RunConfig& rc, const std::string& model_path) {
  if (model_path.empty()) throw InputError("eval needs --model");
  nlohmann::json header;
  SyntacticModel<float> model = load_model<float>(model_path, &header);
  RunConfig data_rc = rc;
  data_rc.M = model.cfg.M;
  data_rc.N = model.cfg.N;

  const LoadedDocs docs = load_docs(data_rc);
  std::vector<Segment> test;
  if (model.cfg.mode == FeatureMode::lexical) {
    const auto word_to_id = header_word_map(header);
    docs_to_segments(docs.test, data_rc.M, data_rc.N, &word_to_id, test, nullptr);
  } else {
    docs_to_segments(docs.test, data_rc.M, data_rc.N, nullptr, test, nullptr);
  }
  if (test.empty()) throw InputError("evaluation corpus yielded no test segments");

  std::vector<std::string> authors = docs.authors;
  if (header.contains("authors")) authors = header.at("authors").get<std::vector<std::string>>();
  const auto preds = predict_segments(model, test);
  const MetricsReport rep = report(preds, model.cfg.classes);
  fs::create_directories(rc.out);
  write_metrics_json(rep, (fs::path(rc.out) / "metrics.json").string());
  write_confusion_csv(rep.confusion, authors, (fs::path(rc.out) / "confusion.csv").string());
  print_report(rep, authors);
  return 0;
}

int cmd_baseline(const RunConfig& rc, const std::string& features, int nmin, int nmax,
                 std::size_t max_features, bool idf, double c_reg, int svm_epochs) {
  const bool word_features = features == "word";
  if (!word_features && features != "pos")
    throw InputError("unknown --features: " + features + " (want pos or word)");
  const LoadedDocs docs = load_docs(rc);
  const Dataset ds = build_dataset(rc, docs, false, word_features);
  const int classes = static_cast<int>(ds.authors.size());

  auto symbols = [&](const Segment& seg, std::size_t idx, bool train) {
    if (!word_features) return segment_symbols_pos(seg);
    return segment_symbols_words(seg, train ? ds.train_words[idx] : ds.test_words[idx]);
  };

  NgramVocabulary vocab;
  vocab.n_min = nmin;
  vocab.n_max = nmax;
  vocab.max_features = max_features;
  vocab.use_idf = idf;
  std::vector<std::vector<std::string>> seqs;
  for (std::size_t i = 0; i < ds.train_pool.size(); ++i)
    seqs.push_back(symbols(ds.train_pool[i], i, true));
  vocab.build(seqs);
  std::cout << features << " n-grams [" << nmin << "," << nmax << "], vocabulary " << vocab.size()
            << "\n";

  std::vector<SparseVec> xs;
  std::vector<int> ys;
  for (std::size_t i = 0; i < ds.train_pool.size(); ++i) {
    xs.push_back(vocab.extract(seqs[i]));
    ys.push_back(ds.train_pool[i].author_id);
  }
  const LinearSvmModel svm =
      LinearSvmModel::train(xs, ys, vocab.size(), c_reg, svm_epochs, rc.tcfg.seed);

  std::vector<SegmentPrediction> preds;
  for (std::size_t i = 0; i < ds.test.size(); ++i) {
    SegmentPrediction p;
    p.source_doc = ds.test[i].source_doc;
    p.position = ds.test[i].position;
    p.true_label = ds.test[i].author_id;
    p.predicted_label = svm.predict(vocab.extract(symbols(ds.test[i], i, false)));
    preds.push_back(std::move(p));
  }
  if (preds.empty()) throw InputError("baseline corpus yielded no test segments");
  const MetricsReport rep = report(preds, classes);
  fs::create_directories(rc.out);
  write_run_config(rc);
  write_metrics_json(rep, (fs::path(rc.out) / "metrics.json").string());
  write_confusion_csv(rep.confusion, ds.authors, (fs::path(rc.out) / "confusion.csv").string());
  svm.save((fs::path(rc.out) / "svm.stsvm").string(), vocab);
  print_report(rep, ds.authors);
  return 0;
}

int cmd_sweep(const RunConfig& rc, std::vector<int> Ms, std::vector<int> Ns,
              std::vector<int> layer_grid, const std::string& window_grid,
              std::vector<std::uint64_t> seeds) {
  if (Ms.empty()) Ms = {rc.M};
  if (Ns.empty()) Ns = {rc.N};
  if (layer_grid.empty()) layer_grid = {rc.layers};
  if (seeds.empty()) seeds = {rc.tcfg.seed};
  std::vector<std::vector<int>> window_sets;
  if (window_grid.empty()) {
    window_sets = {rc.windows};
  } else {
    // semicolon-separated sets of comma-separated widths: "3,5;4"
    std::stringstream sets(window_grid);
    std::string set;
    while (std::getline(sets, set, ';')) {
      std::vector<int> ws;
      std::stringstream ss(set);
      std::string w;
      while (std::getline(ss, w, ',')) ws.push_back(std::stoi(w));
      if (!ws.empty()) window_sets.push_back(ws);
    }
  }

  struct Cell {
    int M, N, layers;
    std::vector<int> windows;
    std::uint64_t seed;
    double seg_acc = 0.0, doc_acc = 0.0;
    std::string status = "ok";
  };
  std::vector<Cell> cells;
  for (int M : Ms)
    for (int N : Ns)
      for (int L : layer_grid)
        for (const auto& ws : window_sets)
          for (std::uint64_t s : seeds) cells.push_back({M, N, L, ws, s});

  const LoadedDocs docs = load_docs(rc);
  FeatureMode fm;
  EncoderKind ek;
  parse_mode(rc.mode, fm, ek);

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      Cell& cell = cells[i];
      try {
        RunConfig cfg = rc;
        cfg.M = cell.M;
        cfg.N = cell.N;
        cfg.layers = cell.layers;
        cfg.windows = cell.windows;
        cfg.tcfg.seed = cell.seed;
        const Dataset ds = build_dataset(cfg, docs, fm == FeatureMode::lexical, false);
        const DatasetSplit split =
            make_split(ds.train_pool, ds.test, cfg.tcfg.validation_fraction, cell.seed);
        SyntacticModel<float> model =
            make_model(cfg, model_config(cfg, static_cast<int>(ds.authors.size())), ds);
        const auto result = fit(model, split, cfg.tcfg);
        restore_params(model, result.best_params);
        const auto preds = predict_segments(model, split.test);
        if (preds.empty()) throw InputError("no test segments");
        const MetricsReport rep = report(preds, static_cast<int>(ds.authors.size()));
        cell.seg_acc = rep.segment_accuracy;
        cell.doc_acc = rep.document_accuracy;
      } catch (const std::exception& e) {
        cell.status = e.what();  // failed cells are recorded; the sweep continues
      }
    }
  };
  std::vector<std::thread> pool;
  const int n_workers = std::min<int>(worker_count(), static_cast<int>(cells.size()));
  for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  fs::create_directories(rc.out);
  std::ofstream out(fs::path(rc.out) / "sweep.csv");
  out << "M,N,layers,windows,seed,segment_accuracy,document_accuracy,status\n";
  auto window_str = [](const std::vector<int>& ws) {
    std::string s;
    for (int w : ws) s += (s.empty() ? "" : "|") + std::to_string(w);
    return s;
  };
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell& c = cells[i];
    out << c.M << ',' << c.N << ',' << c.layers << ',' << window_str(c.windows) << ',' << c.seed
        << ',' << c.seg_acc << ',' << c.doc_acc << ',' << c.status << '\n';
    // mean row after the last seed of each configuration
    const bool config_end = (i + 1) % seeds.size() == 0;
    if (config_end && seeds.size() > 1) {
      double sum_seg = 0, sum_doc = 0;
      int ok = 0;
      for (std::size_t j = i + 1 - seeds.size(); j <= i; ++j)
        if (cells[j].status == "ok") {
          sum_seg += cells[j].seg_acc;
          sum_doc += cells[j].doc_acc;
          ++ok;
        }
      out << c.M << ',' << c.N << ',' << c.layers << ',' << window_str(c.windows) << ",mean,"
          << (ok ? sum_seg / ok : 0.0) << ',' << (ok ? sum_doc / ok : 0.0) << ',' << ok << "/"
          << seeds.size() << " ok\n";
    }
  }
  std::cout << "sweep: " << cells.size() << " cells -> " << (fs::path(rc.out) / "sweep.csv").string()
            << "\n";
  return 0;
}

int cmd_ablate(const RunConfig& rc, const std::vector<double>& fractions) {
  FeatureMode fm;
  EncoderKind ek;
  parse_mode(rc.mode, fm, ek);
  const LoadedDocs docs = load_docs(rc);
  const Dataset ds = build_dataset(rc, docs, fm == FeatureMode::lexical, false);
  const int classes = static_cast<int>(ds.authors.size());

  fs::create_directories(rc.out);
  write_run_config(rc);
  std::ofstream out(fs::path(rc.out) / "ablation.csv");
  out << "train_fraction,segment_accuracy,document_accuracy,documents_correct,documents_total\n";
  for (double f : fractions) {
    if (f <= 0.0 || f > 1.0) throw InputError("train fraction must be in (0,1]");
    const auto kept = leading_fraction(ds.train_pool, f, ds.authors);
    const DatasetSplit split = make_split(kept, ds.test, rc.tcfg.validation_fraction, rc.tcfg.seed);
    SyntacticModel<float> model = make_model(rc, model_config(rc, classes), ds);
    const auto result = fit(model, split, rc.tcfg);
    restore_params(model, result.best_params);
    const auto preds = predict_segments(model, split.test);
    const MetricsReport rep = report(preds, classes);
    out << f << ',' << rep.segment_accuracy << ',' << rep.document_accuracy << ','
        << rep.documents_correct << ',' << rep.documents_total << '\n';
    std::cout << "fraction " << f << ": seg acc " << rep.segment_accuracy << ", docs "
              << rep.documents_correct << "/" << rep.documents_total << "\n";
  }
  return 0;
}

int cmd_export_attention(const RunConfig& rc, const std::string& model_path, int limit) {
  if (model_path.empty()) throw InputError("export-attention needs --model");
  nlohmann::json header;
  SyntacticModel<float> model = load_model<float>(model_path, &header);
  RunConfig data_rc = rc;
  data_rc.M = model.cfg.M;
  data_rc.N = model.cfg.N;
  const LoadedDocs docs = load_docs(data_rc);

  std::vector<Segment> test;
  std::vector<std::vector<std::vector<std::string>>> words;
  if (model.cfg.mode == FeatureMode::lexical) {
    const auto word_to_id = header_word_map(header);
    docs_to_segments(docs.test, data_rc.M, data_rc.N, &word_to_id, test, &words);
  } else {
    docs_to_segments(docs.test, data_rc.M, data_rc.N, nullptr, test, &words);
  }
  if (test.empty()) throw InputError("corpus yielded no test segments");

  std::vector<AttentionRow> rows;
  ForwardCache<float> cache;
  const std::size_t n = std::min<std::size_t>(test.size(), static_cast<std::size_t>(limit));
  for (std::size_t i = 0; i < n; ++i) {
    model.forward(test[i], cache);
    for (std::size_t s = 0; s < cache.alpha.size(); ++s) {
      AttentionRow row;
      row.doc = test[i].source_doc;
      row.segment = test[i].position;
      row.sentence_index = static_cast<int>(s);
      row.alpha = static_cast<double>(cache.alpha[s]);
      std::string text;
      for (const auto& tok : words[i][s]) text += (text.empty() ? "" : " ") + tok;
      row.text = text;
      rows.push_back(std::move(row));
    }
  }
  fs::create_directories(rc.out);
  write_attention_csv(rows, (fs::path(rc.out) / "attention.csv").string());
  std::cout << rows.size() << " attention rows -> " << (fs::path(rc.out) / "attention.csv").string()
            << "\n";
  return 0;
}

int cmd_synth(const RunConfig& rc, int segments, int test_segments, double separation) {
  SyntheticConfig scfg;
  scfg.segments_per_author = segments;
  scfg.test_segments_per_author = test_segments;
  scfg.M = rc.M;
  scfg.N = rc.N;
  scfg.separation = separation;
  scfg.seed = rc.tcfg.seed;
  write_synthetic_pretagged(scfg, rc.out);
  std::cout << "synthetic pretagged corpus -> " << rc.out << "\n";
  return 0;
}

void add_data_flags(CLI::App* cmd, RunConfig& rc) {
  cmd->add_option("--corpus", rc.corpus, "raw text corpus root (train/ and test/ author dirs)");
  cmd->add_option("--pretagged", rc.pretagged, "token/TAG corpus root (train/ and test/)");
  cmd->add_option("--tagger", rc.tagger, "tagger checkpoint for raw corpora");
  cmd->add_option("--M", rc.M, "sentences per segment");
  cmd->add_option("--N", rc.N, "tokens per sentence (pad/truncate)");
  cmd->add_option("--out", rc.out, "output directory");
}

void add_model_flags(CLI::App* cmd, RunConfig& rc) {
  cmd->add_option("--mode", rc.mode, "{syntactic,lexical}-{cnn,lstm}");
  cmd->add_option("--dp", rc.d_p, "tag embedding width");
  cmd->add_option("--dl", rc.d_l, "LSTM hidden width");
  cmd->add_option("--filters", rc.filters, "CNN filters per window width");
  cmd->add_option("--windows", rc.windows, "CNN window widths")->delimiter(',');
  cmd->add_option("--layers", rc.layers, "stacked CNN layers");
  cmd->add_option("--embeddings", rc.embeddings, "pretrained word vectors (lexical mode)");
  cmd->add_option("--vocab", rc.vocab_cap, "lexical vocabulary cap");
}

void add_train_flags(CLI::App* cmd, RunConfig& rc) {
  cmd->add_option("--epochs", rc.tcfg.epochs, "training epochs");
  cmd->add_option("--batch", rc.tcfg.batch_size, "minibatch size");
  cmd->add_option("--lr", rc.tcfg.learning_rate, "learning rate");
  cmd->add_option("--lambda", rc.tcfg.lambda, "L2 strength");
  cmd->add_option("--clip", rc.tcfg.clip_norm, "gradient clip norm");
  cmd->add_option("--val-fraction", rc.tcfg.validation_fraction, "validation split fraction");
  cmd->add_option("--seed", rc.tcfg.seed, "master random seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"syntactic recurrent network authorship attribution"};
  app.require_subcommand(1);
  app.set_config("--config", "", "config file; command-line flags take precedence");
  app.option_defaults()->always_capture_default();
  RunConfig rc;

  auto* stats = app.add_subcommand("stats", "per-author corpus statistics CSV");
  stats->add_option("--corpus", rc.corpus, "raw text corpus root")->required();
  stats->add_option("--out", rc.out, "output directory");

  std::string gold;
  int tagger_epochs = 5;
  auto* tag = app.add_subcommand("tag", "tag a raw corpus, or train a tagger from gold data");
  tag->add_option("--corpus", rc.corpus, "raw text corpus root (author dirs)");
  tag->add_option("--tagger", rc.tagger, "tagger checkpoint to apply");
  tag->add_option("--gold", gold, "gold token/TAG file; trains a tagger saved to --out");
  tag->add_option("--epochs", tagger_epochs, "tagger training epochs");
  tag->add_option("--seed", rc.tcfg.seed, "shuffle seed");
  tag->add_option("--out", rc.out, "output directory (or tagger path with --gold)");

  auto* train = app.add_subcommand("train", "train a model and evaluate on the test set");
  add_data_flags(train, rc);
  add_model_flags(train, rc);
  add_train_flags(train, rc);

  std::string model_path;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a test corpus");
  add_data_flags(eval, rc);
  eval->add_option("--model", model_path, "model checkpoint")->required();

  std::string features = "pos";
  int nmin = 1, nmax = 3, svm_epochs = 10;
  std::size_t max_features = 50000;
  bool use_idf = false;
  double c_reg = 1.0;
  auto* baseline = app.add_subcommand("baseline", "n-gram SVM baseline");
  add_data_flags(baseline, rc);
  baseline->add_option("--features", features, "pos or word");
  baseline->add_option("--nmin", nmin, "minimum n-gram order");
  baseline->add_option("--nmax", nmax, "maximum n-gram order");
  baseline->add_option("--max-features", max_features, "vocabulary cap");
  baseline->add_flag("--idf", use_idf, "apply idf weighting");
  baseline->add_option("--C", c_reg, "SVM C");
  baseline->add_option("--svm-epochs", svm_epochs, "SVM epochs");
  baseline->add_option("--seed", rc.tcfg.seed, "shuffle seed");

  std::vector<int> grid_M, grid_N, grid_layers;
  std::vector<std::uint64_t> grid_seeds;
  std::string window_grid;
  auto* sweep = app.add_subcommand("sweep", "grid sweep over M, N, layers, windows, seeds");
  add_data_flags(sweep, rc);
  add_model_flags(sweep, rc);
  add_train_flags(sweep, rc);
  sweep->add_option("--grid-M", grid_M, "M values")->delimiter(',');
  sweep->add_option("--grid-N", grid_N, "N values")->delimiter(',');
  sweep->add_option("--grid-layers", grid_layers, "CNN layer counts")->delimiter(',');
  sweep->add_option("--grid-windows", window_grid, "window sets, e.g. \"3,5;4\"");
  sweep->add_option("--seeds", grid_seeds, "seeds to average over")->delimiter(',');

  std::vector<double> fractions = {0.25, 0.5, 0.75, 1.0};
  auto* ablate = app.add_subcommand("ablate", "train-fraction ablation curve");
  add_data_flags(ablate, rc);
  add_model_flags(ablate, rc);
  add_train_flags(ablate, rc);
  ablate->add_option("--fractions", fractions, "leading train fractions")->delimiter(',');

  int attn_limit = 50;
  auto* exattn = app.add_subcommand("export-attention", "per-sentence attention weights CSV");
  add_data_flags(exattn, rc);
  exattn->add_option("--model", model_path, "model checkpoint")->required();
  exattn->add_option("--limit", attn_limit, "max segments to export");

  int synth_segments = 200, synth_test = 50;
  double synth_separation = 1.0;
  auto* synth = app.add_subcommand("synth", "write a synthetic pretagged two-author corpus");
  synth->add_option("--segments", synth_segments, "train segments per author");
  synth->add_option("--test-segments", synth_test, "test segments per author");
  synth->add_option("--separation", synth_separation, "author chain separation in (0,1]");
  synth->add_option("--M", rc.M, "sentences per segment");
  synth->add_option("--N", rc.N, "max tokens per sentence");
  synth->add_option("--seed", rc.tcfg.seed, "generator seed");
  synth->add_option("--out", rc.out, "corpus root to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  // Echo only the parsed subcommand's resolved options; empty-list values
  // are dropped because the config reader cannot round-trip them.
  CLI::App* sub = app.get_subcommands().front();
  std::ostringstream resolved;
  resolved << "[" << sub->get_name() << "]\n";
  std::istringstream lines(sub->config_to_str(true, false));
  std::string line;
  while (std::getline(lines, line))
    if (line.find("={}") == std::string::npos) resolved << line << "\n";
  rc.resolved = resolved.str();
  rc.config_hash = hex64(fnv1a(rc.resolved));

  try {
    if (stats->parsed()) return cmd_stats(rc);
    if (tag->parsed()) return cmd_tag(rc, gold, tagger_epochs);
    if (train->parsed()) return cmd_train(rc);
    if (eval->parsed()) return cmd_eval(rc, model_path);
    if (baseline->parsed())
      return cmd_baseline(rc, features, nmin, nmax, max_features, use_idf, c_reg, svm_epochs);
    if (sweep->parsed()) return cmd_sweep(rc, grid_M, grid_N, grid_layers, window_grid, grid_seeds);
    if (ablate->parsed()) return cmd_ablate(rc, fractions);
    if (exattn->parsed()) return cmd_export_attention(rc, model_path, attn_limit);
    if (synth->parsed()) return cmd_synth(rc, synth_segments, synth_test, synth_separation);
  } catch (const Diverged& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const NumericOverflow& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const NonFiniteGradient& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return 0;
}
