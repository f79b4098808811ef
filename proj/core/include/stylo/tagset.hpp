#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace stylo {

// The 47-tag Penn-style inventory used throughout, in fixed order, plus PAD
// and UNK sentinels. Indices are stable across runs and recorded in
// checkpoint headers as a hash.
class TagSet {
 public:
  static constexpr int kNumRealTags = 47;
  static constexpr int kPad = 47;
  static constexpr int kUnk = 48;
  static constexpr int kSize = 49;

  TagSet();

  int index(const std::string& tag) const;  // kUnk when unknown
  const std::string& name(int id) const;
  bool is_punct_tag(const std::string& tag) const;

  // Punctuation tokens that are themselves tags map to their own tag id
  // without consulting any model; returns -1 for ordinary tokens.
  int punct_token_tag(const std::string& token) const;

  const std::vector<std::string>& tags() const { return tags_; }
  std::uint64_t hash() const;

 private:
  std::vector<std::string> tags_;
  std::unordered_map<std::string, int> index_;
};

const TagSet& tagset();

}  // namespace stylo
