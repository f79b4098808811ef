#include "stylo/eval.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace stylo {

int majority_vote(const std::vector<SegmentPrediction>& doc_predictions, int classes) {
  if (doc_predictions.empty()) throw NoSegments();
  std::vector<std::uint64_t> votes(static_cast<std::size_t>(classes), 0);
  std::vector<double> mass(static_cast<std::size_t>(classes), 0.0);
  for (const auto& p : doc_predictions) {
    ++votes[static_cast<std::size_t>(p.predicted_label)];
    for (int c = 0; c < classes && c < static_cast<int>(p.probabilities.size()); ++c)
      mass[static_cast<std::size_t>(c)] += p.probabilities[static_cast<std::size_t>(c)];
  }
  int best = 0;
  for (int c = 1; c < classes; ++c) {
    const auto sc = static_cast<std::size_t>(c), sb = static_cast<std::size_t>(best);
    if (votes[sc] > votes[sb] || (votes[sc] == votes[sb] && mass[sc] > mass[sb])) best = c;
  }
  return best;
}

ConfusionMatrix confusion(const std::vector<SegmentPrediction>& predictions, int classes) {
  ConfusionMatrix cm;
  cm.classes = classes;
  cm.counts.assign(static_cast<std::size_t>(classes) * classes, 0);
  for (const auto& p : predictions) ++cm.at(p.true_label, p.predicted_label);
  return cm;
}

MetricsReport report(const std::vector<SegmentPrediction>& predictions, int classes) {
  MetricsReport rep;
  rep.confusion = confusion(predictions, classes);

  std::uint64_t correct = 0;
  for (const auto& p : predictions)
    if (p.predicted_label == p.true_label) ++correct;
  rep.segment_accuracy =
      predictions.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(predictions.size());

  rep.per_class_recall.assign(static_cast<std::size_t>(classes), 0.0);
  for (int c = 0; c < classes; ++c) {
    std::uint64_t row = 0;
    for (int j = 0; j < classes; ++j) row += rep.confusion.at(c, j);
    rep.per_class_recall[static_cast<std::size_t>(c)] =
        row == 0 ? 0.0 : static_cast<double>(rep.confusion.at(c, c)) / static_cast<double>(row);
  }

  // document-level: group by source_doc
  std::map<std::string, std::vector<SegmentPrediction>> docs;
  for (const auto& p : predictions) docs[p.source_doc].push_back(p);
  for (const auto& [doc, preds] : docs) {
    const int label = majority_vote(preds, classes);
    ++rep.documents_total;
    if (label == preds.front().true_label) ++rep.documents_correct;
  }
  rep.document_accuracy = rep.documents_total == 0
                              ? 0.0
                              : static_cast<double>(rep.documents_correct) /
                                    static_cast<double>(rep.documents_total);
  return rep;
}

std::string metrics_to_json(const MetricsReport& rep) {
  nlohmann::json j;
  j["segment_accuracy"] = rep.segment_accuracy;
  j["document_accuracy"] = rep.document_accuracy;
  j["documents_correct"] =
      std::to_string(rep.documents_correct) + "/" + std::to_string(rep.documents_total);
  j["per_class_recall"] = rep.per_class_recall;
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < rep.confusion.classes; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < rep.confusion.classes; ++c) row.push_back(rep.confusion.at(i, c));
    rows.push_back(std::move(row));
  }
  j["confusion"] = std::move(rows);
  return j.dump(2);
}

void write_metrics_json(const MetricsReport& rep, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write metrics: " + path);
  out << metrics_to_json(rep) << "\n";
}

void write_confusion_csv(const ConfusionMatrix& cm, const std::vector<std::string>& class_names,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write confusion matrix: " + path);
  out << "true\\pred";
  for (int c = 0; c < cm.classes; ++c)
    out << "," << (c < static_cast<int>(class_names.size()) ? class_names[static_cast<std::size_t>(c)]
                                                            : std::to_string(c));
  out << "\n";
  for (int i = 0; i < cm.classes; ++i) {
    out << (i < static_cast<int>(class_names.size()) ? class_names[static_cast<std::size_t>(i)]
                                                     : std::to_string(i));
    for (int c = 0; c < cm.classes; ++c) out << "," << cm.at(i, c);
    out << "\n";
  }
}

void write_attention_csv(const std::vector<AttentionRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write attention export: " + path);
  out << "doc,segment,sentence_index,alpha,text\n";
  for (const auto& r : rows) {
    std::string text = r.text;
    for (auto& ch : text)
      if (ch == ',' || ch == '\n') ch = ' ';
    out << r.doc << "," << r.segment << "," << r.sentence_index << "," << r.alpha << "," << text
        << "\n";
  }
}

std::vector<Segment> leading_fraction(const std::vector<Segment>& segments, double fraction,
                                      const std::vector<std::string>& author_names) {
  // per-document segment counts
  std::map<std::string, int> per_doc;
  for (const auto& s : segments) per_doc[s.source_doc] = std::max(per_doc[s.source_doc], s.position + 1);
  std::vector<Segment> kept;
  for (const auto& s : segments) {
    const int total = per_doc[s.source_doc];
    const int keep = std::max(0, static_cast<int>(fraction * total + 1e-9));
    if (s.position < keep) kept.push_back(s);
  }
  std::vector<bool> has(author_names.size(), false);
  for (const auto& s : kept)
    if (s.author_id >= 0 && s.author_id < static_cast<int>(has.size())) has[static_cast<std::size_t>(s.author_id)] = true;
  for (std::size_t a = 0; a < author_names.size(); ++a)
    if (!has[a]) throw InsufficientData(author_names[a]);
  return kept;
}

}  // namespace stylo
