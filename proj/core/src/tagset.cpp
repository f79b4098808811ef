#include "stylo/tagset.hpp"

#include <cstdint>

namespace stylo {

namespace {
// Paper-order inventory. The paired quote tags are canonicalized as `` and ''.
const char* kTags[TagSet::kNumRealTags] = {
    "CC", "CD",  "DT",  "EX",  "FW",  "IN",   "JJ",  "JJR", "JJS", "LS",  "MD", "NN",
    "NNS", "NNP", "NNPS", "PDT", "POS", "PRP", "PRP$", "RB", "RBR", "RBS", "RP", "SYM",
    "TO",  "UH",  "VB",  "VBD", "VBG", "VBN",  "VBP", "VBZ", "WDT", "WP",  "WP$", "WRB",
    ",",   ":",   "...", ";",   "?",   "!",    ".",   "$",   "(",   ")",   "``"};
// 47th slot:
const char* kClosingQuote = "''";
}  // namespace

TagSet::TagSet() {
  tags_.reserve(kSize);
  for (int i = 0; i < kNumRealTags - 1; ++i) tags_.push_back(kTags[i]);
  tags_.push_back(kClosingQuote);
  tags_.push_back("PAD");
  tags_.push_back("UNK");
  for (int i = 0; i < kSize; ++i) index_[tags_[i]] = i;
  // Static aliases for common foreign renderings of the same tags.
  index_["-LRB-"] = index_["("];
  index_["-RRB-"] = index_[")"];
  index_["--"] = index_[":"];
  index_["`"] = index_["``"];
  index_["'"] = index_["''"];
}

int TagSet::index(const std::string& tag) const {
  auto it = index_.find(tag);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& TagSet::name(int id) const { return tags_.at(static_cast<std::size_t>(id)); }

bool TagSet::is_punct_tag(const std::string& tag) const {
  auto it = index_.find(tag);
  return it != index_.end() && it->second >= 36 && it->second < kNumRealTags;
}

int TagSet::punct_token_tag(const std::string& token) const {
  if (token == "," || token == ":" || token == "..." || token == ";" || token == "?" ||
      token == "!" || token == "." || token == "$" || token == "(" || token == ")")
    return index(token);
  if (token == "``" || token == "“")  // opening quotes
    return index("``");
  if (token == "''" || token == "”") return index("''");
  if (token == "…") return index("...");
  return -1;
}

std::uint64_t TagSet::hash() const {
  // FNV-1a over the ordered tag names.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& t : tags_) {
    for (char c : t) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    h ^= '|';
    h *= 0x100000001b3ULL;
  }
  return h;
}

const TagSet& tagset() {
  static const TagSet instance;
  return instance;
}

}  // namespace stylo
