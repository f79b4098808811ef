#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "stylo/corpus.hpp"

namespace stylo {

struct NoSegments : std::runtime_error {
  NoSegments() : std::runtime_error("majority vote over zero segment predictions") {}
};

struct SegmentPrediction {
  std::string source_doc;
  int position = 0;
  int true_label = 0;
  int predicted_label = 0;
  std::vector<double> probabilities;
};

struct ConfusionMatrix {
  int classes = 0;
  std::vector<std::uint64_t> counts;  // row i = true, col j = predicted

  std::uint64_t& at(int i, int j) { return counts[static_cast<std::size_t>(i * classes + j)]; }
  std::uint64_t at(int i, int j) const { return counts[static_cast<std::size_t>(i * classes + j)]; }
};

struct MetricsReport {
  double segment_accuracy = 0.0;
  double document_accuracy = 0.0;
  int documents_correct = 0;
  int documents_total = 0;
  std::vector<double> per_class_recall;  // segment-level
  ConfusionMatrix confusion;
};

// Most frequent predicted class over one document's segments; ties broken by
// the larger summed probability mass across the segments, then lowest index.
int majority_vote(const std::vector<SegmentPrediction>& doc_predictions, int classes);

ConfusionMatrix confusion(const std::vector<SegmentPrediction>& predictions, int classes);
MetricsReport report(const std::vector<SegmentPrediction>& predictions, int classes);

std::string metrics_to_json(const MetricsReport& report);
void write_metrics_json(const MetricsReport& report, const std::string& path);
void write_confusion_csv(const ConfusionMatrix& cm, const std::vector<std::string>& class_names,
                         const std::string& path);

struct AttentionRow {
  std::string doc;
  int segment = 0;
  int sentence_index = 0;
  double alpha = 0.0;
  std::string text;
};
void write_attention_csv(const std::vector<AttentionRow>& rows, const std::string& path);

struct InsufficientData : std::runtime_error {
  explicit InsufficientData(const std::string& author)
      : std::runtime_error("training fraction leaves zero segments for author: " + author) {}
};

// Keeps the leading `fraction` of each document's segments (at least is
// checked per author; zero for any author throws).
std::vector<Segment> leading_fraction(const std::vector<Segment>& segments, double fraction,
                                      const std::vector<std::string>& author_names);

}  // namespace stylo
