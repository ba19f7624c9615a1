#pragma once

// Dependency treebanks (CoNLL-U / CoNLL-X), coreference documents
// (JSON lines), word-embedding tables, and word/token alignment checks.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "attnprobe/error.hpp"
#include "attnprobe/interchange.hpp"

namespace attnprobe {

inline constexpr int kRoot = -1;

struct DepSentence {
  std::vector<std::string> words;
  std::vector<int> gold_head;  // kRoot for the root word
  std::vector<std::string> relation;

  std::size_t size() const { return words.size(); }
};

using DepCorpus = std::vector<DepSentence>;

enum class MentionType { Pronoun, Proper, Nominal };

inline std::string_view to_string(MentionType t) {
  switch (t) {
    case MentionType::Pronoun: return "PRONOUN";
    case MentionType::Proper: return "PROPER";
    case MentionType::Nominal: return "NOMINAL";
  }
  return "NOMINAL";
}

inline std::optional<MentionType> parse_mention_type(std::string_view s) {
  for (auto t : {MentionType::Pronoun, MentionType::Proper, MentionType::Nominal}) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

struct Mention {
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive
  int cluster_id = 0;
  std::size_t head_index = 0;
  MentionType mention_type = MentionType::Nominal;
};

struct CorefDoc {
  std::string doc_id;
  std::vector<std::string> tokens;
  std::vector<Mention> mentions;
};

using CorefCorpus = std::vector<CorefDoc>;

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline bool is_pronoun(std::string_view word) {
  static const std::set<std::string, std::less<>> kPronouns = {
      "i",    "me",     "my",         "mine",  "myself",   "we",       "us",
      "our",  "ours",   "ourselves",  "you",   "your",     "yours",    "yourself",
      "yourselves",     "he",         "him",   "his",      "himself",  "she",
      "her",  "hers",   "herself",    "it",    "its",      "itself",   "they",
      "them", "their",  "theirs",     "themselves"};
  return kPronouns.contains(to_lower(word));
}

// ---------------------------------------------------------------------------
// Dependency corpus

inline void validate(const DepSentence& s) {
  const auto n = static_cast<int>(s.size());
  if (s.gold_head.size() != s.size() || s.relation.size() != s.size()) {
    throw Error(ErrorCode::Validation, "dependency sentence has ragged columns");
  }
  int roots = 0;
  for (int i = 0; i < n; ++i) {
    const int h = s.gold_head[static_cast<std::size_t>(i)];
    if (h == kRoot) {
      ++roots;
    } else if (h < 0 || h >= n) {
      throw Error(ErrorCode::Validation, "head index out of range");
    } else if (h == i) {
      throw Error(ErrorCode::Validation, "self-loop at word " + std::to_string(i));
    }
  }
  if (n > 0 && roots == 0) throw Error(ErrorCode::Validation, "sentence has no root");
}

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

inline std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

}  // namespace detail

/// CoNLL-U / CoNLL-X: tab-separated; falls back to whitespace splitting for
/// lines without tabs. Comment lines, multiword ranges ("1-2") and empty
/// nodes ("1.1") are skipped.
inline DepCorpus parse_dep_corpus(std::istream& in) {
  DepCorpus corpus;
  DepSentence current;
  std::vector<long> heads;
  std::vector<std::size_t> line_of;
  std::size_t line_no = 0;

  auto finish = [&] {
    if (current.words.empty()) return;
    const auto n = static_cast<long>(current.words.size());
    for (std::size_t i = 0; i < heads.size(); ++i) {
      const long h = heads[i];
      if (h < 0 || h > n) {
        throw Error(ErrorCode::Parse, "line " + std::to_string(line_of[i]) +
                                          ": HEAD " + std::to_string(h) +
                                          " out of range for sentence of " +
                                          std::to_string(n) + " words");
      }
      if (h == static_cast<long>(i) + 1) {
        throw Error(ErrorCode::Parse,
                    "line " + std::to_string(line_of[i]) + ": word is its own head");
      }
      current.gold_head.push_back(h == 0 ? kRoot : static_cast<int>(h - 1));
    }
    if (std::find(current.gold_head.begin(), current.gold_head.end(), kRoot) ==
        current.gold_head.end()) {
      throw Error(ErrorCode::Parse,
                  "sentence ending at line " + std::to_string(line_no) + " has no root");
    }
    corpus.push_back(std::move(current));
    current = DepSentence{};
    heads.clear();
    line_of.clear();
  };

  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) {
      finish();
      continue;
    }
    if (line[0] == '#') continue;
    auto fields = line.find('\t') != std::string::npos ? detail::split_tabs(line)
                                                       : detail::split_whitespace(line);
    if (fields.size() < 8) {
      throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": expected at least 8 columns, got " +
                                        std::to_string(fields.size()));
    }
    if (fields[0].find_first_of("-.") != std::string_view::npos) continue;
    const auto id = detail::parse_number<long>(fields[0]);
    if (!id || *id != static_cast<long>(current.words.size()) + 1) {
      throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": unexpected ID '" +
                                        std::string(fields[0]) + "'");
    }
    const auto head = detail::parse_number<long>(fields[6]);
    if (!head) {
      throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": non-integer HEAD '" +
                                        std::string(fields[6]) + "'");
    }
    current.words.emplace_back(fields[1]);
    current.relation.emplace_back(fields[7]);
    heads.push_back(*head);
    line_of.push_back(line_no);
  }
  finish();
  return corpus;
}

inline DepCorpus load_dep_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return parse_dep_corpus(in);
}

inline void write_dep_corpus(std::ostream& out, const DepCorpus& corpus) {
  for (const auto& s : corpus) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      const int h = s.gold_head[i];
      out << (i + 1) << '\t' << s.words[i] << "\t_\t_\t_\t_\t" << (h == kRoot ? 0 : h + 1)
          << '\t' << s.relation[i] << "\t_\t_\n";
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Coreference corpus

/// Heuristic when the file gives no type: closed pronoun list, then
/// capitalization away from sentence start, else nominal.
inline MentionType guess_mention_type(const std::vector<std::string>& tokens,
                                      std::size_t head_index) {
  const auto& head = tokens[head_index];
  if (is_pronoun(head)) return MentionType::Pronoun;
  const bool capitalized = !head.empty() && std::isupper(static_cast<unsigned char>(head[0]));
  bool sentence_initial = head_index == 0;
  if (head_index > 0) {
    const auto& prev = tokens[head_index - 1];
    sentence_initial = prev == "." || prev == "!" || prev == "?";
  }
  if (capitalized && !sentence_initial) return MentionType::Proper;
  return MentionType::Nominal;
}

inline void sort_mentions(std::vector<Mention>& mentions) {
  std::stable_sort(mentions.begin(), mentions.end(), [](const Mention& a, const Mention& b) {
    return std::tie(a.start, a.end) < std::tie(b.start, b.end);
  });
}

inline CorefDoc parse_coref_doc(const nlohmann::json& j, std::size_t line_no) {
  const auto where = "line " + std::to_string(line_no);
  CorefDoc doc;
  try {
    doc.doc_id = j.value("doc_id", std::string{});
    doc.tokens = j.at("tokens").get<std::vector<std::string>>();
    for (const auto& m : j.at("mentions")) {
      Mention mention;
      mention.start = m.at("start").get<std::size_t>();
      mention.end = m.at("end").get<std::size_t>();
      mention.cluster_id = m.at("cluster").get<int>();
      mention.head_index = m.at("head").get<std::size_t>();
      if (mention.start > mention.end || mention.end >= doc.tokens.size() ||
          mention.head_index < mention.start || mention.head_index > mention.end) {
        throw Error(ErrorCode::Parse, where + ": mention span [" + std::to_string(mention.start) +
                                          ", " + std::to_string(mention.end) + "] head " +
                                          std::to_string(mention.head_index) +
                                          " out of range for " +
                                          std::to_string(doc.tokens.size()) + " tokens");
      }
      if (m.contains("type") && !m.at("type").is_null()) {
        auto t = parse_mention_type(m.at("type").get<std::string>());
        if (!t) throw Error(ErrorCode::Parse, where + ": unknown mention type " + m.at("type").dump());
        mention.mention_type = *t;
      } else {
        mention.mention_type = guess_mention_type(doc.tokens, mention.head_index);
      }
      doc.mentions.push_back(mention);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, where + ": " + e.what());
  }
  sort_mentions(doc.mentions);
  return doc;
}

inline CorefCorpus parse_coref_corpus(std::istream& in) {
  CorefCorpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": " + e.what());
    }
    corpus.push_back(parse_coref_doc(j, line_no));
  }
  return corpus;
}

inline CorefCorpus load_coref_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return parse_coref_corpus(in);
}

inline void write_coref_corpus(std::ostream& out, const CorefCorpus& corpus) {
  for (const auto& doc : corpus) {
    nlohmann::json mentions = nlohmann::json::array();
    for (const auto& m : doc.mentions) {
      mentions.push_back({{"start", m.start},
                          {"end", m.end},
                          {"cluster", m.cluster_id},
                          {"head", m.head_index},
                          {"type", std::string(to_string(m.mention_type))}});
    }
    out << nlohmann::json{{"doc_id", doc.doc_id}, {"tokens", doc.tokens}, {"mentions", mentions}}.dump()
        << '\n';
  }
}

struct TruncatedDoc {
  CorefDoc doc;
  std::size_t dropped_mentions = 0;
};

/// Keeps the first max_words tokens; mentions reaching past the cut are dropped.
inline TruncatedDoc truncate_doc(const CorefDoc& doc, std::size_t max_words) {
  TruncatedDoc out;
  out.doc.doc_id = doc.doc_id;
  const std::size_t n = std::min(max_words, doc.tokens.size());
  out.doc.tokens.assign(doc.tokens.begin(), doc.tokens.begin() + static_cast<long>(n));
  for (const auto& m : doc.mentions) {
    if (m.end < n) {
      out.doc.mentions.push_back(m);
    } else {
      ++out.dropped_mentions;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Embeddings

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }

  void insert(std::string word, std::vector<double> vec) {
    if (vec.size() != dim_) {
      throw Error(ErrorCode::InvalidArgument, "embedding for '" + word + "' has length " +
                                                  std::to_string(vec.size()) + ", expected " +
                                                  std::to_string(dim_));
    }
    entries_.insert_or_assign(std::move(word), std::move(vec));
  }

  bool contains(const std::string& word) const { return entries_.contains(word); }

  /// Unknown words map to the zero vector.
  std::vector<double> lookup(const std::string& word) const {
    auto it = entries_.find(word);
    if (it == entries_.end()) return std::vector<double>(dim_, 0.0);
    return it->second;
  }

  /// Exact lookup first, then lowercase.
  std::vector<double> lookup_folded(const std::string& word) const {
    if (auto it = entries_.find(word); it != entries_.end()) return it->second;
    return lookup(to_lower(word));
  }

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> entries_;
};

inline EmbeddingTable parse_embeddings(std::istream& in) {
  std::optional<EmbeddingTable> table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = detail::split_whitespace(line);
    if (fields.empty()) continue;
    std::vector<double> vec;
    vec.reserve(fields.size() - 1);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      auto v = detail::parse_number<double>(fields[i]);
      if (!v) {
        throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": bad number '" +
                                          std::string(fields[i]) + "'");
      }
      vec.push_back(*v);
    }
    if (!table) {
      if (vec.empty()) throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": no vector");
      table.emplace(vec.size());
    }
    if (vec.size() != table->dim()) {
      throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": dimension " +
                                        std::to_string(vec.size()) + " differs from " +
                                        std::to_string(table->dim()));
    }
    table->insert(std::string(fields[0]), std::move(vec));
  }
  return table ? std::move(*table) : EmbeddingTable{};
}

inline EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return parse_embeddings(in);
}

// ---------------------------------------------------------------------------
// Alignment

struct AlignOptions {
  std::string continuation_marker = "##";
  bool ignore_case = false;
};

inline std::string strip_marker(const std::string& token, std::string_view marker) {
  if (!marker.empty() && token.size() > marker.size() && token.starts_with(marker)) {
    return token.substr(marker.size());
  }
  return token;
}

/// Per word, the token positions that spell it.
struct WordAlignment {
  std::vector<std::vector<std::size_t>> word_tokens;
};

/// Checks that the segment's non-special tokens spell the corpus words and
/// that word_index groups them word by word.
inline WordAlignment align(const Segment& segment, const std::vector<std::string>& words,
                           const AlignOptions& opts = {}) {
  auto norm = [&](std::string s) { return opts.ignore_case ? to_lower(s) : s; };

  std::string spelled;
  for (std::size_t t = 0; t < segment.length(); ++t) {
    if (is_special(segment.special_flags[t])) continue;
    spelled += norm(strip_marker(segment.tokens[t], opts.continuation_marker));
  }
  std::string joined;
  for (const auto& w : words) joined += norm(w);
  if (spelled != joined) {
    std::size_t pos = 0;
    while (pos < spelled.size() && pos < joined.size() && spelled[pos] == joined[pos]) ++pos;
    throw Error(ErrorCode::Alignment, "segment '" + segment.id +
                                          "' diverges from corpus text at character " +
                                          std::to_string(pos));
  }

  WordAlignment out;
  out.word_tokens.resize(words.size());
  std::vector<std::string> rebuilt(words.size());
  for (std::size_t t = 0; t < segment.length(); ++t) {
    const auto& w = segment.word_index[t];
    if (!w) continue;
    if (*w >= words.size()) {
      throw Error(ErrorCode::Alignment, "segment '" + segment.id + "' token " + std::to_string(t) +
                                            " maps to word " + std::to_string(*w) +
                                            " beyond the sentence");
    }
    out.word_tokens[*w].push_back(t);
    rebuilt[*w] += norm(strip_marker(segment.tokens[t], opts.continuation_marker));
  }
  for (std::size_t w = 0; w < words.size(); ++w) {
    if (rebuilt[w] != norm(words[w])) {
      throw Error(ErrorCode::Alignment, "segment '" + segment.id + "' word " + std::to_string(w) +
                                            " spelled '" + rebuilt[w] + "' but corpus has '" +
                                            words[w] + "'");
    }
  }
  return out;
}

}  // namespace attnprobe
