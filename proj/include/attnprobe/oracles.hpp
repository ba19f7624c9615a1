#pragma once

// Definition-level reference implementations for tests. Deliberately naive
// and sharing no code with wordmap/headprobe: every quantity is recomputed
// from raw token attention by direct enumeration. Small inputs only.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "attnprobe/corpora.hpp"
#include "attnprobe/error.hpp"
#include "attnprobe/interchange.hpp"

namespace attnprobe::oracle {

inline constexpr std::size_t kMaxWords = 30;
inline constexpr std::size_t kMaxHeads = 4;

inline void guard(std::size_t words, std::size_t heads) {
  if (words > kMaxWords || heads > kMaxHeads) {
    throw Error(ErrorCode::InvalidArgument, "oracle input too large (" + std::to_string(words) + " words, " +
                                                std::to_string(heads) + " heads)");
  }
}

/// Word-to-word attention straight from the definition: mean over the source
/// word's tokens of the summed weight on the target word's tokens.
inline double word_attention(const Segment& seg, std::size_t layer, std::size_t head, std::size_t from_word,
                             std::size_t to_word) {
  double total = 0.0;
  std::size_t from_tokens = 0;
  for (std::size_t a = 0; a < seg.tokens.size(); ++a) {
    if (!seg.word_index[a] || *seg.word_index[a] != from_word) continue;
    ++from_tokens;
    double into = 0.0;
    for (std::size_t b = 0; b < seg.tokens.size(); ++b) {
      if (seg.word_index[b] && *seg.word_index[b] == to_word) {
        into += static_cast<double>(seg.attention[((layer * seg.n_heads + head) * seg.tokens.size() + a) *
                                                      seg.tokens.size() + b]);
      }
    }
    total += into;
  }
  return total / static_cast<double>(from_tokens);
}

inline std::size_t count_words(const Segment& seg) {
  std::size_t n = 0;
  for (const auto& w : seg.word_index)
    if (w && *w + 1 > n) n = *w + 1;
  return n;
}

struct ArgmaxOutcome {
  std::vector<std::size_t> maxima;  // all tied maximisers, ascending
  std::size_t chosen = 0;           // lowest of them
};

inline ArgmaxOutcome argmax(const Segment& seg, std::size_t layer, std::size_t head, std::size_t from_word) {
  const std::size_t n = count_words(seg);
  guard(n, 1);
  std::vector<double> scores(n, 0.0);
  for (std::size_t w = 0; w < n; ++w) scores[w] = word_attention(seg, layer, head, from_word, w);
  double best = -1.0;
  for (std::size_t w = 0; w < n; ++w)
    if (w != from_word && scores[w] > best) best = scores[w];
  ArgmaxOutcome out;
  for (std::size_t w = 0; w < n; ++w)
    if (w != from_word && scores[w] == best) out.maxima.push_back(w);
  if (out.maxima.empty()) throw Error(ErrorCode::NoCandidate, "no candidate");
  out.chosen = *std::min_element(out.maxima.begin(), out.maxima.end());
  return out;
}

struct Count {
  std::size_t correct = 0;
  std::size_t total = 0;
  friend bool operator==(const Count&, const Count&) = default;
};

/// dep_to_head: word d predicts its gold head; otherwise the head predicts d.
inline Count dependency(const ExtractSet& set, const DepCorpus& corpus, std::size_t layer, std::size_t head,
                        bool dep_to_head, std::optional<std::string> relation = std::nullopt) {
  guard(0, set.n_layers * set.n_heads);
  Count c;
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    const auto& sent = corpus[s];
    guard(sent.words.size(), 1);
    for (std::size_t d = 0; d < sent.words.size(); ++d) {
      if (sent.gold_head[d] < 0) continue;
      if (relation && sent.relation[d] != *relation) continue;
      const auto h = static_cast<std::size_t>(sent.gold_head[d]);
      const bool ok = dep_to_head ? argmax(set.segments[s], layer, head, d).chosen == h
                                  : argmax(set.segments[s], layer, head, h).chosen == d;
      ++c.total;
      if (ok) ++c.correct;
    }
  }
  return c;
}

struct OffsetResult {
  int offset = 0;
  Count count;
};

/// Tries every offset against every pair, keeps the best by
/// (more correct, smaller |offset|, negative first).
inline OffsetResult offset_search(const DepCorpus& corpus, std::optional<std::string> relation, int range) {
  std::optional<OffsetResult> best;
  for (int off = -range; off <= range; ++off) {
    if (off == 0) continue;
    Count c;
    for (const auto& sent : corpus) {
      guard(sent.words.size(), 0);
      for (std::size_t d = 0; d < sent.words.size(); ++d) {
        if (sent.gold_head[d] < 0) continue;
        if (relation && sent.relation[d] != *relation) continue;
        ++c.total;
        const long predicted = static_cast<long>(d) + off;
        if (predicted >= 0 && predicted < static_cast<long>(sent.words.size()) && predicted == sent.gold_head[d]) {
          ++c.correct;
        }
      }
    }
    auto key = [](const OffsetResult& r) {
      return std::make_tuple(-static_cast<long>(r.count.correct), std::abs(r.offset), r.offset);
    };
    OffsetResult candidate{off, c};
    if (!best || key(candidate) < key(*best)) best = candidate;
  }
  return *best;
}

// --- coreference -----------------------------------------------------------

inline std::string fold(const std::string& s) {
  std::string out;
  for (char ch : s) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  return out;
}

/// Indices of mentions that may serve as predictions for mention m: strictly
/// earlier in (start, end) order and not sharing m's head word.
inline std::vector<std::size_t> candidates(const CorefDoc& doc, std::size_t m) {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < doc.mentions.size(); ++c) {
    const auto& a = doc.mentions[c];
    const auto& b = doc.mentions[m];
    const bool earlier = a.start < b.start || (a.start == b.start && a.end < b.end) ||
                         (a.start == b.start && a.end == b.end && c < m);
    if (earlier && a.head_index != b.head_index) out.push_back(c);
  }
  return out;
}

struct CorefCount {
  Count all;
  std::map<MentionType, Count> by_type;
};

inline void add(CorefCount& cc, MentionType t, bool ok) {
  ++cc.all.total;
  ++cc.by_type[t].total;
  if (ok) {
    ++cc.all.correct;
    ++cc.by_type[t].correct;
  }
}

/// Antecedent accuracy of one head, argmax over candidate mention heads.
inline CorefCount coref(const ExtractSet& set, const CorefCorpus& corpus, std::size_t layer, std::size_t head) {
  guard(0, set.n_layers * set.n_heads);
  CorefCount cc;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    const auto& doc = corpus[d];
    guard(doc.tokens.size(), 1);
    for (std::size_t m = 0; m < doc.mentions.size(); ++m) {
      const auto cands = candidates(doc, m);
      std::set<std::size_t> gold_words, cand_words;
      for (auto c : cands) {
        cand_words.insert(doc.mentions[c].head_index);
        if (doc.mentions[c].cluster_id == doc.mentions[m].cluster_id) gold_words.insert(doc.mentions[c].head_index);
      }
      if (gold_words.empty()) continue;
      double best = -1.0;
      std::size_t chosen = 0;
      for (auto w : cand_words) {
        const double v = word_attention(set.segments[d], layer, head, doc.mentions[m].head_index, w);
        if (v > best) {
          best = v;
          chosen = w;
        }
      }
      add(cc, doc.mentions[m].mention_type, gold_words.count(chosen) > 0);
    }
  }
  return cc;
}

struct Attr {
  char number = '?', gender = '?';
  int person = 0;
};

inline Attr attributes(const std::string& word) {
  const std::string w = fold(word);
  auto in = [&](std::initializer_list<const char*> l) {
    for (const char* x : l)
      if (w == x) return true;
    return false;
  };
  if (in({"i", "me", "my", "mine", "myself"})) return {'s', '?', 1};
  if (in({"we", "us", "our", "ours", "ourselves"})) return {'p', '?', 1};
  if (in({"you", "your", "yours"})) return {'?', '?', 2};
  if (in({"yourself"})) return {'s', '?', 2};
  if (in({"yourselves"})) return {'p', '?', 2};
  if (in({"he", "him", "his", "himself"})) return {'s', 'm', 3};
  if (in({"she", "her", "hers", "herself"})) return {'s', 'f', 3};
  if (in({"it", "its", "itself"})) return {'s', 'n', 3};
  if (in({"they", "them", "their", "theirs", "themselves"})) return {'p', '?', 3};
  return {};
}

inline bool agree(const Attr& a, const Attr& b) {
  return (a.number == '?' || b.number == '?' || a.number == b.number) &&
         (a.gender == '?' || b.gender == '?' || a.gender == b.gender) &&
         (a.person == 0 || b.person == 0 || a.person == b.person);
}

enum class Baseline { Nearest, HeadMatch, RuleSieve };

/// Predicted antecedent mention for m under a baseline.
inline std::size_t baseline_choice(const CorefDoc& doc, std::size_t m, Baseline which) {
  auto cands = candidates(doc, m);
  // nearest first
  std::sort(cands.begin(), cands.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = doc.mentions[a];
    const auto& y = doc.mentions[b];
    return std::tie(x.start, x.end, a) > std::tie(y.start, y.end, b);
  });
  auto text = [&](std::size_t i) {
    std::string s;
    for (std::size_t k = doc.mentions[i].start; k <= doc.mentions[i].end; ++k) s += fold(doc.tokens[k]) + " ";
    return s;
  };
  auto head = [&](std::size_t i) { return fold(doc.tokens[doc.mentions[i].head_index]); };
  if (which == Baseline::Nearest) return cands.front();
  if (which == Baseline::HeadMatch) {
    for (auto c : cands)
      if (head(c) == head(m)) return c;
    return cands.front();
  }
  for (auto c : cands)
    if (text(c) == text(m)) return c;
  for (auto c : cands)
    if (head(c) == head(m)) return c;
  for (auto c : cands)
    if (agree(attributes(doc.tokens[doc.mentions[c].head_index]), attributes(doc.tokens[doc.mentions[m].head_index])))
      return c;
  return cands.front();
}

inline CorefCount coref_baseline(const CorefCorpus& corpus, Baseline which) {
  CorefCount cc;
  for (const auto& doc : corpus) {
    guard(doc.tokens.size(), 0);
    for (std::size_t m = 0; m < doc.mentions.size(); ++m) {
      bool has = false;
      for (auto c : candidates(doc, m)) has = has || doc.mentions[c].cluster_id == doc.mentions[m].cluster_id;
      if (!has) continue;
      const auto c = baseline_choice(doc, m, which);
      add(cc, doc.mentions[m].mention_type, doc.mentions[c].cluster_id == doc.mentions[m].cluster_id);
    }
  }
  return cc;
}

}  // namespace attnprobe::oracle
