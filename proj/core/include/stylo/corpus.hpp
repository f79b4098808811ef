#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "stylo/rng.hpp"
#include "stylo/tagset.hpp"

namespace stylo {

struct SentenceEmpty : std::runtime_error {
  SentenceEmpty() : std::runtime_error("sentence contains no tokens") {}
};
struct EmptyDocument : std::runtime_error {
  explicit EmptyDocument(const std::string& doc)
      : std::runtime_error("document has zero sentences: " + doc) {}
};

struct RawDocument {
  int author_id = 0;
  std::string doc_id;
  std::string text;  // UTF-8
};

struct TokenizedSentence {
  std::vector<std::string> tokens;
  std::size_t length() const { return tokens.size(); }
};

// A sentence after tagging and padding to N slots. word_ids is filled only in
// lexical mode (0 = PAD, 1 = UNK there; tag PAD/UNK use TagSet indices).
struct TaggedSentence {
  std::vector<int> tag_ids;
  std::vector<int> word_ids;
  int true_length = 0;

  bool is_filler() const { return true_length == 0; }
};

struct Segment {
  std::vector<TaggedSentence> sentences;  // exactly M entries
  int author_id = 0;
  std::string source_doc;
  int position = 0;  // segment index within document
};

struct DatasetSplit {
  std::vector<Segment> train;
  std::vector<Segment> validation;
  std::vector<Segment> test;
  std::uint64_t seed = 0;
};

struct AuthorStats {
  std::string author;
  std::uint64_t word_count = 0;
  double mean_sentence_length = 0.0;
};

// Light NFC pass: composes the common Latin letter + combining diacritic
// pairs; full normalization tables are out of scope for English corpora.
std::string normalize_nfc(const std::string& text);

std::vector<std::string> split_sentences(const std::string& text);
std::vector<std::string> split_sentences(const std::string& text,
                                         const std::vector<std::string>& abbreviations);
const std::vector<std::string>& default_abbreviations();

TokenizedSentence tokenize(const std::string& sentence);

// Non-overlapping windows of M sentences; a remainder of >= ceil(M/2)
// sentences is padded with all-PAD fillers and kept, shorter tails dropped.
std::vector<Segment> segment_document(const std::vector<TaggedSentence>& doc, int M,
                                      int author_id, const std::string& doc_id);

std::vector<AuthorStats> compute_corpus_stats(
    const std::vector<std::pair<std::string, std::vector<TokenizedSentence>>>& docs_by_author);

// Shuffles segments with the given seed and carves off validation_fraction at
// segment granularity.
DatasetSplit make_split(std::vector<Segment> train_pool, std::vector<Segment> test,
                        double validation_fraction, std::uint64_t seed);

// corpus/<author>/<doc>.txt layout; author ids are sorted directory names.
struct CorpusDir {
  std::vector<std::string> author_names;  // index = author_id
  std::vector<RawDocument> documents;
};
CorpusDir load_corpus_dir(const std::string& root);

}  // namespace stylo
