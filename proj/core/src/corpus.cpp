#include "stylo/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace stylo {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Decodes one code point at i, advances i. Invalid bytes pass through as-is.
std::uint32_t decode_utf8(const std::string& s, std::size_t& i) {
  const unsigned char c = static_cast<unsigned char>(s[i]);
  if (c < 0x80) {
    ++i;
    return c;
  }
  std::size_t len = (c >= 0xF0) ? 4 : (c >= 0xE0) ? 3 : (c >= 0xC0) ? 2 : 1;
  if (i + len > s.size()) len = 1;
  std::uint32_t cp = 0;
  switch (len) {
    case 2: cp = c & 0x1F; break;
    case 3: cp = c & 0x0F; break;
    case 4: cp = c & 0x07; break;
    default:
      ++i;
      return c;
  }
  for (std::size_t k = 1; k < len; ++k) {
    const unsigned char cc = static_cast<unsigned char>(s[i + k]);
    if ((cc & 0xC0) != 0x80) {
      ++i;
      return c;
    }
    cp = (cp << 6) | (cc & 0x3F);
  }
  i += len;
  return cp;
}

// base letter + combining mark -> precomposed code point (common Latin pairs).
std::uint32_t compose_pair(std::uint32_t base, std::uint32_t mark) {
  struct Entry {
    char base;
    std::uint32_t mark;
    std::uint32_t composed;
  };
  static const Entry kTable[] = {
      {'a', 0x300, 0xE0}, {'a', 0x301, 0xE1}, {'a', 0x302, 0xE2}, {'a', 0x303, 0xE3},
      {'a', 0x308, 0xE4}, {'e', 0x300, 0xE8}, {'e', 0x301, 0xE9}, {'e', 0x302, 0xEA},
      {'e', 0x308, 0xEB}, {'i', 0x300, 0xEC}, {'i', 0x301, 0xED}, {'i', 0x302, 0xEE},
      {'i', 0x308, 0xEF}, {'o', 0x300, 0xF2}, {'o', 0x301, 0xF3}, {'o', 0x302, 0xF4},
      {'o', 0x303, 0xF5}, {'o', 0x308, 0xF6}, {'u', 0x300, 0xF9}, {'u', 0x301, 0xFA},
      {'u', 0x302, 0xFB}, {'u', 0x308, 0xFC}, {'n', 0x303, 0xF1}, {'c', 0x327, 0xE7},
      {'y', 0x301, 0xFD}, {'y', 0x308, 0xFF}, {'A', 0x300, 0xC0}, {'A', 0x301, 0xC1},
      {'A', 0x302, 0xC2}, {'A', 0x303, 0xC3}, {'A', 0x308, 0xC4}, {'E', 0x300, 0xC8},
      {'E', 0x301, 0xC9}, {'E', 0x302, 0xCA}, {'E', 0x308, 0xCB}, {'I', 0x300, 0xCC},
      {'I', 0x301, 0xCD}, {'I', 0x302, 0xCE}, {'I', 0x308, 0xCF}, {'O', 0x300, 0xD2},
      {'O', 0x301, 0xD3}, {'O', 0x302, 0xD4}, {'O', 0x303, 0xD5}, {'O', 0x308, 0xD6},
      {'U', 0x300, 0xD9}, {'U', 0x301, 0xDA}, {'U', 0x302, 0xDB}, {'U', 0x308, 0xDC},
      {'N', 0x303, 0xD1}, {'C', 0x327, 0xC7}, {'Y', 0x301, 0xDD},
  };
  if (base >= 0x80) return 0;
  for (const auto& e : kTable)
    if (static_cast<std::uint32_t>(e.base) == base && e.mark == mark) return e.composed;
  return 0;
}

bool is_quote_char(std::uint32_t cp) {
  return cp == '"' || cp == '\'' || cp == '`' || cp == 0x2018 || cp == 0x2019 || cp == 0x201C ||
         cp == 0x201D;
}

bool is_opening_char(std::uint32_t cp) {
  return (cp < 0x80 && std::isupper(static_cast<int>(cp))) || is_quote_char(cp) || cp == '(';
}

// Last whitespace-delimited token ending at position end (exclusive).
std::string token_before(const std::string& s, std::size_t end) {
  std::size_t b = end;
  while (b > 0 && !is_space(s[b - 1])) --b;
  return s.substr(b, end - b);
}

std::string lower_ascii(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

}  // namespace

std::string normalize_nfc(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  std::uint32_t pending = 0xFFFFFFFF;
  while (i < text.size()) {
    const std::uint32_t cp = decode_utf8(text, i);
    if (pending != 0xFFFFFFFF) {
      const std::uint32_t composed = compose_pair(pending, cp);
      if (composed) {
        append_utf8(out, composed);
        pending = 0xFFFFFFFF;
        continue;
      }
      append_utf8(out, pending);
      pending = 0xFFFFFFFF;
    }
    if (cp < 0x80) {
      pending = cp;
    } else {
      append_utf8(out, cp);
    }
  }
  if (pending != 0xFFFFFFFF) append_utf8(out, pending);
  return out;
}

const std::vector<std::string>& default_abbreviations() {
  static const std::vector<std::string> kAbbrevs = {
      "mr",   "mrs",  "ms",   "dr",  "prof", "rev",  "hon",  "st",   "sr",   "jr",
      "vs",   "etc",  "e.g",  "i.e", "cf",   "al",   "inc",  "ltd",  "co",   "corp",
      "no",   "vol",  "pp",   "p",   "ch",   "fig",  "dept", "univ", "assn", "approx",
      "jan",  "feb",  "mar",  "apr", "jun",  "jul",  "aug",  "sep",  "sept", "oct",
      "nov",  "dec",  "mon",  "tue", "wed",  "thu",  "fri",  "sat",  "sun",  "capt",
      "col",  "gen",  "lt",   "sgt", "maj",  "gov",  "sen",  "rep",  "pres", "supt",
      "mt",   "ft",   "ave",  "blvd", "rd",  "hwy",  "est",  "min",  "max",  "misc"};
  return kAbbrevs;
}

std::vector<std::string> split_sentences(const std::string& text) {
  return split_sentences(text, default_abbreviations());
}

std::vector<std::string> split_sentences(const std::string& text,
                                         const std::vector<std::string>& abbreviations) {
  std::unordered_set<std::string> guard(abbreviations.begin(), abbreviations.end());
  std::vector<std::string> out;
  std::string current;
  std::size_t i = 0;
  const std::string norm = normalize_nfc(text);
  while (i < norm.size()) {
    const std::size_t start = i;
    const std::uint32_t cp = decode_utf8(norm, i);
    std::string chunk = norm.substr(start, i - start);
    current += chunk;

    const bool terminal = cp == '.' || cp == '!' || cp == '?' || cp == 0x2026;
    if (!terminal) continue;

    if (cp == '.') {
      // Abbreviation guard: "Mr. Smith", "J. K. Rowling", "i.e." stay joined.
      std::string tok = token_before(norm, start);
      if (!tok.empty()) {
        while (!tok.empty() && !std::isalnum(static_cast<unsigned char>(tok.front()))) tok.erase(tok.begin());
        std::string low = lower_ascii(tok);
        const bool single_initial = tok.size() == 1 && std::isupper(static_cast<unsigned char>(tok[0]));
        if (guard.count(low) || single_initial) continue;
      }
    }

    // Absorb closing quotes/brackets directly after the terminal.
    std::size_t j = i;
    while (j < norm.size()) {
      std::size_t k = j;
      const std::uint32_t q = decode_utf8(norm, k);
      if (is_quote_char(q) || q == ')') {
        current += norm.substr(j, k - j);
        j = k;
      } else {
        break;
      }
    }
    i = j;

    // Boundary only before whitespace followed by an uppercase letter or quote.
    if (i >= norm.size()) break;
    if (!is_space(norm[i])) continue;
    std::size_t k = i;
    while (k < norm.size() && is_space(norm[k])) ++k;
    if (k >= norm.size()) break;
    std::size_t k2 = k;
    const std::uint32_t nxt = decode_utf8(norm, k2);
    if (!is_opening_char(nxt)) continue;

    const std::string sent = trim(current);
    if (!sent.empty()) out.push_back(sent);
    current.clear();
    i = k;
  }
  const std::string sent = trim(current);
  if (!sent.empty()) out.push_back(sent);
  return out;
}

TokenizedSentence tokenize(const std::string& sentence) {
  std::vector<std::string> raw;
  std::istringstream iss(sentence);
  std::string w;
  while (iss >> w) raw.push_back(w);
  if (raw.empty()) throw SentenceEmpty();

  std::unordered_set<std::string> guard(default_abbreviations().begin(),
                                        default_abbreviations().end());
  TokenizedSentence out;
  for (const auto& tok : raw) {
    std::string core = tok;
    std::vector<std::string> lead, tail;

    auto take_front = [&](const std::string& piece, const std::string& as) {
      lead.push_back(as);
      core.erase(0, piece.size());
    };
    auto take_back = [&](const std::string& piece, const std::string& as) {
      tail.push_back(as);
      core.erase(core.size() - piece.size());
    };

    bool changed = true;
    while (changed && !core.empty()) {
      changed = false;
      if (core.rfind("\"", 0) == 0 || core.rfind("“", 0) == 0) {
        take_front(core[0] == '"' ? "\"" : "“", "``");
        changed = true;
      } else if (core.rfind("``", 0) == 0) {
        take_front("``", "``");
        changed = true;
      } else if (core.front() == '(' || core.front() == ')' || core.front() == '$' ||
                 core.front() == ',' || core.front() == ';' || core.front() == ':') {
        take_front(std::string(1, core.front()), std::string(1, core.front()));
        changed = true;
      }
    }
    changed = true;
    while (changed && !core.empty()) {
      changed = false;
      auto ends_with = [&](const std::string& suf) {
        return core.size() >= suf.size() && core.compare(core.size() - suf.size(), suf.size(), suf) == 0;
      };
      if (ends_with("\"") || ends_with("”")) {
        take_back(core.back() == '"' ? "\"" : "”", "''");
        changed = true;
      } else if (ends_with("''")) {
        take_back("''", "''");
        changed = true;
      } else if (ends_with("...")) {
        take_back("...", "...");
        changed = true;
      } else if (ends_with("…")) {
        take_back("…", "...");
        changed = true;
      } else if (!core.empty() && (core.back() == ',' || core.back() == ';' || core.back() == ':' ||
                                   core.back() == '?' || core.back() == '!' || core.back() == ')' ||
                                   core.back() == '(' || core.back() == '$')) {
        take_back(std::string(1, core.back()), std::string(1, core.back()));
        changed = true;
      } else if (core.back() == '.') {
        // Keep abbreviation periods attached ("Mr.", "J.", "i.e.").
        std::string stem = core.substr(0, core.size() - 1);
        const bool single_initial =
            stem.size() == 1 && std::isupper(static_cast<unsigned char>(stem[0]));
        if (!single_initial && !guard.count(lower_ascii(stem))) {
          take_back(".", ".");
          changed = true;
        }
      }
    }

    for (const auto& t : lead) out.tokens.push_back(t);
    if (!core.empty()) out.tokens.push_back(core);
    for (auto it = tail.rbegin(); it != tail.rend(); ++it) out.tokens.push_back(*it);
  }
  if (out.tokens.empty()) throw SentenceEmpty();
  return out;
}

std::vector<Segment> segment_document(const std::vector<TaggedSentence>& doc, int M,
                                      int author_id, const std::string& doc_id) {
  if (doc.empty()) throw EmptyDocument(doc_id);
  const std::size_t m = static_cast<std::size_t>(M);
  const std::size_t n_slots = doc.front().tag_ids.size();
  const bool lexical = !doc.front().word_ids.empty();

  TaggedSentence filler;
  filler.tag_ids.assign(n_slots, TagSet::kPad);
  if (lexical) filler.word_ids.assign(n_slots, 0);
  filler.true_length = 0;

  std::vector<Segment> out;
  std::size_t pos = 0;
  int index = 0;
  while (pos + m <= doc.size()) {
    Segment seg;
    seg.sentences.assign(doc.begin() + pos, doc.begin() + pos + m);
    seg.author_id = author_id;
    seg.source_doc = doc_id;
    seg.position = index++;
    out.push_back(std::move(seg));
    pos += m;
  }
  const std::size_t rem = doc.size() - pos;
  if (rem >= (m + 1) / 2) {
    Segment seg;
    seg.sentences.assign(doc.begin() + pos, doc.end());
    seg.sentences.resize(m, filler);
    seg.author_id = author_id;
    seg.source_doc = doc_id;
    seg.position = index;
    out.push_back(std::move(seg));
  }
  return out;
}

std::vector<AuthorStats> compute_corpus_stats(
    const std::vector<std::pair<std::string, std::vector<TokenizedSentence>>>& docs_by_author) {
  std::vector<AuthorStats> out;
  // Aggregate by author name, preserving first-seen order.
  for (const auto& [author, sentences] : docs_by_author) {
    AuthorStats* slot = nullptr;
    for (auto& s : out)
      if (s.author == author) slot = &s;
    if (!slot) {
      out.push_back({author, 0, 0.0});
      slot = &out.back();
    }
    for (const auto& sent : sentences) slot->word_count += sent.length();
    // mean recomputed below; stash sentence counts in mean field temporarily
    slot->mean_sentence_length += static_cast<double>(sentences.size());
  }
  for (auto& s : out) {
    const double n_sent = s.mean_sentence_length;
    s.mean_sentence_length = n_sent > 0 ? static_cast<double>(s.word_count) / n_sent : 0.0;
  }
  return out;
}

DatasetSplit make_split(std::vector<Segment> train_pool, std::vector<Segment> test,
                        double validation_fraction, std::uint64_t seed) {
  DatasetSplit split;
  split.seed = seed;
  Rng rng(seed, /*stream=*/1);
  rng.shuffle(train_pool);
  const std::size_t n_val =
      static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(train_pool.size())));
  split.validation.assign(train_pool.begin(), train_pool.begin() + n_val);
  split.train.assign(train_pool.begin() + n_val, train_pool.end());
  split.test = std::move(test);
  return split;
}

CorpusDir load_corpus_dir(const std::string& root) {
  namespace fs = std::filesystem;
  CorpusDir out;
  if (!fs::is_directory(root)) throw std::runtime_error("corpus directory not found: " + root);
  std::vector<fs::path> authors;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) authors.push_back(e.path());
  std::sort(authors.begin(), authors.end());
  for (std::size_t a = 0; a < authors.size(); ++a) {
    out.author_names.push_back(authors[a].filename().string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(authors[a]))
      if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      std::ifstream in(f, std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      RawDocument doc;
      doc.author_id = static_cast<int>(a);
      doc.doc_id = f.stem().string();
      doc.text = ss.str();
      if (doc.text.empty()) continue;
      out.documents.push_back(std::move(doc));
    }
  }
  return out;
}

}  // namespace stylo
