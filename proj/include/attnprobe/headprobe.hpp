#pragma once

// Each attention head as a no-training classifier: a word's prediction is
// the other word it attends to most. Evaluated on dependency relations and
// coreference antecedent selection, with fixed-offset and rule baselines.

#include <algorithm>
#include <array>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "attnprobe/corpora.hpp"
#include "attnprobe/error.hpp"
#include "attnprobe/interchange.hpp"
#include "attnprobe/wordmap.hpp"

namespace attnprobe {

/// Argmax over the word columns other than `from`; lowest index on ties.
/// Retained special columns are never candidates.
inline std::size_t predict_most_attended(const WordAttentionMatrix& m, std::size_t from) {
  const std::size_t n = m.n_words();
  if (from >= n) {
    throw Error(ErrorCode::Index, "word " + std::to_string(from) + " out of range for " +
                                      std::to_string(n) + " words");
  }
  if (n < 2) throw Error(ErrorCode::NoCandidate, "single-word sentence has no candidate");
  std::optional<std::size_t> best;
  double best_value = 0.0;
  const auto r = static_cast<Eigen::Index>(from);
  for (std::size_t i = 0; i < n; ++i) {
    if (i == from) continue;
    const double v = m.matrix(r, static_cast<Eigen::Index>(i));
    if (!best || v > best_value) {
      best = i;
      best_value = v;
    }
  }
  return *best;
}

/// Pairs segments with sentences by position and checks each alignment.
template <typename WordsOf, typename Corpus>
void align_corpus(const ExtractSet& set, const Corpus& corpus, WordsOf words_of,
                  const AlignOptions& opts = {}) {
  if (set.segments.size() != corpus.size()) {
    throw Error(ErrorCode::Alignment, "extract has " + std::to_string(set.segments.size()) +
                                          " segments but corpus has " +
                                          std::to_string(corpus.size()) + " entries");
  }
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    try {
      align(set.segments[i], words_of(corpus[i]), opts);
    } catch (const Error& e) {
      throw Error(ErrorCode::Alignment, "entry " + std::to_string(i) + ": " + e.what());
    }
  }
}

inline void align_dep_corpus(const ExtractSet& set, const DepCorpus& corpus,
                             const AlignOptions& opts = {}) {
  align_corpus(set, corpus, [](const DepSentence& s) -> const auto& { return s.words; }, opts);
}

inline void align_coref_corpus(const ExtractSet& set, const CorefCorpus& corpus,
                               const AlignOptions& opts = {}) {
  align_corpus(set, corpus, [](const CorefDoc& d) -> const auto& { return d.tokens; }, opts);
}

// ---------------------------------------------------------------------------
// Dependency relations

enum class Direction { DepToHead, HeadToDep };

inline std::string_view to_string(Direction d) {
  return d == Direction::DepToHead ? "DEP_TO_HEAD" : "HEAD_TO_DEP";
}

inline constexpr std::string_view kAllRelations = "All";

struct RelationScore {
  std::string relation;
  HeadId head;
  Direction direction = Direction::DepToHead;
  std::size_t correct = 0;
  std::size_t support = 0;

  double accuracy() const {
    return support == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(support);
  }
};

struct DependencyEval {
  HeadId head;
  Direction direction = Direction::DepToHead;
  RelationScore all;
  std::map<std::string, RelationScore> per_relation;
  /// poss scored with the possessive-clitic equivalence, when enabled.
  std::optional<RelationScore> poss_lenient;
};

struct DependencyOptions {
  AlignOptions align;
  /// Also count the possessive clitic ('s) standing in for the gold poss
  /// dependent as correct; reported separately in poss_lenient.
  bool possessive_equivalence = false;
  std::string poss_label = "poss";
  std::string clitic_label = "possessive";
};

namespace detail {

inline void tally(RelationScore& score, bool correct) {
  ++score.support;
  if (correct) ++score.correct;
}

/// Predictions of one head for every word of one sentence.
inline std::vector<std::size_t> sentence_predictions(const Segment& seg, HeadId head,
                                                     const std::string& marker) {
  WordMapOptions wm;
  wm.continuation_marker = marker;
  const auto m = to_word_attention(seg, head, wm);
  std::vector<std::size_t> pred(m.n_words(), 0);
  if (m.n_words() < 2) return pred;
  for (std::size_t w = 0; w < m.n_words(); ++w) pred[w] = predict_most_attended(m, w);
  return pred;
}

inline void score_sentence(DependencyEval& eval, const DepSentence& s,
                           const std::vector<std::size_t>& pred, const DependencyOptions& opts) {
  for (std::size_t d = 0; d < s.size(); ++d) {
    const int h = s.gold_head[d];
    if (h == kRoot) continue;
    const auto hi = static_cast<std::size_t>(h);
    const bool correct =
        eval.direction == Direction::DepToHead ? pred[d] == hi : pred[hi] == d;
    tally(eval.all, correct);
    auto [it, inserted] = eval.per_relation.try_emplace(s.relation[d]);
    if (inserted) {
      it->second.relation = s.relation[d];
      it->second.head = eval.head;
      it->second.direction = eval.direction;
    }
    tally(it->second, correct);

    if (opts.possessive_equivalence && s.relation[d] == opts.poss_label) {
      bool lenient = correct;
      for (std::size_t c = 0; c < s.size() && !lenient; ++c) {
        if (s.gold_head[c] == static_cast<int>(d) && s.relation[c] == opts.clitic_label) {
          lenient = eval.direction == Direction::DepToHead ? pred[c] == hi : pred[hi] == c;
        }
      }
      tally(*eval.poss_lenient, lenient);
    }
  }
}

inline DependencyEval empty_eval(HeadId head, Direction direction, const DependencyOptions& opts) {
  DependencyEval eval;
  eval.head = head;
  eval.direction = direction;
  eval.all.relation = std::string(kAllRelations);
  eval.all.head = head;
  eval.all.direction = direction;
  if (opts.possessive_equivalence) {
    eval.poss_lenient = RelationScore{opts.poss_label + "+clitic", head, direction, 0, 0};
  }
  return eval;
}

}  // namespace detail

inline DependencyEval eval_dependency(const ExtractSet& set, const DepCorpus& corpus, HeadId head,
                                      Direction direction, const DependencyOptions& opts = {}) {
  if (head.layer >= set.n_layers || head.head >= set.n_heads) {
    throw Error(ErrorCode::Index, "head " + head.display() + " out of range");
  }
  align_dep_corpus(set, corpus, opts.align);
  auto eval = detail::empty_eval(head, direction, opts);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto pred = detail::sentence_predictions(set.segments[i], head, opts.align.continuation_marker);
    detail::score_sentence(eval, corpus[i], pred, opts);
  }
  return eval;
}

/// Every head in both directions; index = 2 * flat_head + direction.
inline std::vector<DependencyEval> eval_all_heads(const ExtractSet& set, const DepCorpus& corpus,
                                                  const DependencyOptions& opts = {}) {
  align_dep_corpus(set, corpus, opts.align);
  std::vector<DependencyEval> evals;
  for (std::size_t k = 0; k < set.total_heads(); ++k) {
    const HeadId h = HeadId::from_flat(k, set.n_heads);
    evals.push_back(detail::empty_eval(h, Direction::DepToHead, opts));
    evals.push_back(detail::empty_eval(h, Direction::HeadToDep, opts));
  }
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (std::size_t k = 0; k < set.total_heads(); ++k) {
      const HeadId h = HeadId::from_flat(k, set.n_heads);
      const auto pred = detail::sentence_predictions(set.segments[i], h, opts.align.continuation_marker);
      detail::score_sentence(evals[2 * k], corpus[i], pred, opts);
      detail::score_sentence(evals[2 * k + 1], corpus[i], pred, opts);
    }
  }
  return evals;
}

struct OffsetBaseline {
  std::string relation;
  int best_offset = 0;
  std::size_t correct = 0;
  std::size_t support = 0;

  double accuracy() const {
    return support == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(support);
  }
};

/// Best fixed offset (predicted head = dependent + offset) over
/// [-scan_range, scan_range] \ {0}. Ties go to the smaller |offset|, then to
/// the negative one. An empty relation means all relations.
inline OffsetBaseline offset_baseline(const DepCorpus& corpus, std::optional<std::string> relation,
                                      int scan_range = 10) {
  if (scan_range < 1) throw Error(ErrorCode::InvalidArgument, "offset scan range must be >= 1");
  std::vector<std::size_t> hits(static_cast<std::size_t>(2 * scan_range + 1), 0);
  std::size_t support = 0;
  for (const auto& s : corpus) {
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (s.gold_head[d] == kRoot) continue;
      if (relation && s.relation[d] != *relation) continue;
      ++support;
      const int diff = s.gold_head[d] - static_cast<int>(d);
      if (diff != 0 && diff >= -scan_range && diff <= scan_range) {
        ++hits[static_cast<std::size_t>(diff + scan_range)];
      }
    }
  }
  if (support == 0) {
    throw Error(ErrorCode::InvalidArgument,
                "relation '" + relation.value_or(std::string(kAllRelations)) + "' not in corpus");
  }
  OffsetBaseline out;
  out.relation = relation.value_or(std::string(kAllRelations));
  out.support = support;
  bool first = true;
  for (int mag = 1; mag <= scan_range; ++mag) {
    for (int off : {-mag, mag}) {
      const std::size_t c = hits[static_cast<std::size_t>(off + scan_range)];
      if (first || c > out.correct) {
        out.best_offset = off;
        out.correct = c;
        first = false;
      }
    }
  }
  return out;
}

struct RelationTableRow {
  RelationScore best;
  OffsetBaseline baseline;
};

/// Best head per relation ("All" restricted to DEP_TO_HEAD), most frequent
/// relations first. Ties between heads go to the lower head, then DEP_TO_HEAD.
inline std::vector<RelationTableRow> relation_table(const std::vector<DependencyEval>& evals,
                                                    const DepCorpus& corpus, int scan_range = 10) {
  std::vector<RelationTableRow> rows;
  if (evals.empty()) return rows;

  auto better = [](const RelationScore& a, const RelationScore& b) {
    return a.correct * b.support > b.correct * a.support;
  };

  RelationTableRow all_row;
  bool have_all = false;
  for (const auto& e : evals) {
    if (e.direction != Direction::DepToHead) continue;
    if (!have_all || better(e.all, all_row.best)) all_row.best = e.all;
    have_all = true;
  }
  if (all_row.best.support == 0) return rows;
  all_row.baseline = offset_baseline(corpus, std::nullopt, scan_range);
  rows.push_back(all_row);

  std::map<std::string, RelationScore> best;
  for (const auto& e : evals) {
    for (const auto& [rel, score] : e.per_relation) {
      auto it = best.find(rel);
      if (it == best.end() || better(score, it->second)) best[rel] = score;
    }
  }
  std::vector<RelationTableRow> rel_rows;
  for (const auto& [rel, score] : best) {
    rel_rows.push_back({score, offset_baseline(corpus, rel, scan_range)});
  }
  std::stable_sort(rel_rows.begin(), rel_rows.end(), [](const auto& a, const auto& b) {
    return a.best.support > b.best.support;
  });
  rows.insert(rows.end(), rel_rows.begin(), rel_rows.end());
  return rows;
}

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline void write_relation_table(std::ostream& out, const std::vector<RelationTableRow>& rows) {
  out << "relation,head,direction,accuracy,support,baseline_accuracy,best_offset\n";
  for (const auto& r : rows) {
    out << r.best.relation << ',' << r.best.head.display() << ',' << to_string(r.best.direction)
        << ',' << format_fixed(r.best.accuracy(), 4) << ',' << r.best.support << ','
        << format_fixed(r.baseline.accuracy(), 4) << ',' << r.baseline.best_offset << '\n';
  }
}

inline void write_head_scores(std::ostream& out, const std::vector<DependencyEval>& evals) {
  out << "head,direction,relation,accuracy,correct,support\n";
  auto row = [&](const RelationScore& s) {
    out << s.head.display() << ',' << to_string(s.direction) << ',' << s.relation << ','
        << format_fixed(s.accuracy(), 4) << ',' << s.correct << ',' << s.support << '\n';
  };
  for (const auto& e : evals) {
    row(e.all);
    for (const auto& [rel, s] : e.per_relation) row(s);
    if (e.poss_lenient) row(*e.poss_lenient);
  }
}

// ---------------------------------------------------------------------------
// Coreference

struct CorefAccuracy {
  std::size_t correct = 0;
  std::size_t total = 0;

  double accuracy() const {
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  }
  void add(bool ok) {
    ++total;
    if (ok) ++correct;
  }
};

struct CorefScores {
  CorefAccuracy all;
  std::array<CorefAccuracy, 3> by_type{};  // indexed by MentionType
  std::size_t skipped_docs = 0;

  const CorefAccuracy& of(MentionType t) const { return by_type[static_cast<std::size_t>(t)]; }
  void add(MentionType t, bool ok) {
    all.add(ok);
    by_type[static_cast<std::size_t>(t)].add(ok);
  }
};

enum class CorefCandidates {
  MentionHeads,  // head words of earlier mentions
  AllWords,      // every other word
};

struct CorefOptions {
  CorefCandidates candidates = CorefCandidates::MentionHeads;
  AlignOptions align;
};

/// Earlier mentions whose head word differs from the mention's own head.
inline std::vector<std::size_t> earlier_mentions(const CorefDoc& doc, std::size_t m) {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < m; ++c) {
    if (doc.mentions[c].head_index != doc.mentions[m].head_index) out.push_back(c);
  }
  return out;
}

/// A mention is evaluable when some earlier mention of its cluster qualifies.
inline bool has_antecedent(const CorefDoc& doc, std::size_t m) {
  for (auto c : earlier_mentions(doc, m)) {
    if (doc.mentions[c].cluster_id == doc.mentions[m].cluster_id) return true;
  }
  return false;
}

inline CorefScores eval_coref(const ExtractSet& set, const CorefCorpus& corpus, HeadId head,
                              const CorefOptions& opts = {}) {
  if (head.layer >= set.n_layers || head.head >= set.n_heads) {
    throw Error(ErrorCode::Index, "head " + head.display() + " out of range");
  }
  align_coref_corpus(set, corpus, opts.align);
  CorefScores scores;
  WordMapOptions wm;
  wm.continuation_marker = opts.align.continuation_marker;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    const auto& doc = corpus[d];
    bool any = false;
    std::optional<WordAttentionMatrix> matrix;
    for (std::size_t m = 0; m < doc.mentions.size(); ++m) {
      if (!has_antecedent(doc, m)) continue;
      if (!matrix) matrix = to_word_attention(set.segments[d], head, wm);
      const auto& mention = doc.mentions[m];
      std::set<std::size_t> gold;
      std::set<std::size_t> candidates;
      for (auto c : earlier_mentions(doc, m)) {
        candidates.insert(doc.mentions[c].head_index);
        if (doc.mentions[c].cluster_id == mention.cluster_id) gold.insert(doc.mentions[c].head_index);
      }
      std::size_t predicted = 0;
      if (opts.candidates == CorefCandidates::AllWords) {
        predicted = predict_most_attended(*matrix, mention.head_index);
      } else {
        std::optional<std::size_t> best;
        double best_value = 0.0;
        for (auto c : candidates) {  // ascending word index
          const double v = matrix->matrix(static_cast<Eigen::Index>(mention.head_index),
                                          static_cast<Eigen::Index>(c));
          if (!best || v > best_value) {
            best = c;
            best_value = v;
          }
        }
        predicted = *best;
      }
      scores.add(mention.mention_type, gold.contains(predicted));
      any = true;
    }
    if (!any) ++scores.skipped_docs;
  }
  return scores;
}

// Pronoun attributes for the rule-based sieve. Missing fields are unknown and
// compatible with anything.
struct MentionAttributes {
  std::optional<char> number;  // 's' / 'p'
  std::optional<char> gender;  // 'm' / 'f' / 'n'
  std::optional<int> person;   // 1 / 2 / 3
};

inline MentionAttributes pronoun_attributes(const std::string& word) {
  static const std::map<std::string, MentionAttributes, std::less<>> kTable = [] {
    std::map<std::string, MentionAttributes, std::less<>> t;
    auto add = [&](std::initializer_list<const char*> words, MentionAttributes a) {
      for (const char* w : words) t[w] = a;
    };
    add({"i", "me", "my", "mine", "myself"}, {'s', std::nullopt, 1});
    add({"we", "us", "our", "ours", "ourselves"}, {'p', std::nullopt, 1});
    add({"you", "your", "yours"}, {std::nullopt, std::nullopt, 2});
    add({"yourself"}, {'s', std::nullopt, 2});
    add({"yourselves"}, {'p', std::nullopt, 2});
    add({"he", "him", "his", "himself"}, {'s', 'm', 3});
    add({"she", "her", "hers", "herself"}, {'s', 'f', 3});
    add({"it", "its", "itself"}, {'s', 'n', 3});
    add({"they", "them", "their", "theirs", "themselves"}, {'p', std::nullopt, 3});
    return t;
  }();
  auto it = kTable.find(to_lower(word));
  return it == kTable.end() ? MentionAttributes{} : it->second;
}

inline bool compatible(const MentionAttributes& a, const MentionAttributes& b) {
  auto ok = [](const auto& x, const auto& y) { return !x || !y || *x == *y; };
  return ok(a.number, b.number) && ok(a.gender, b.gender) && ok(a.person, b.person);
}

inline std::string mention_text(const CorefDoc& doc, const Mention& m) {
  std::string s;
  for (std::size_t i = m.start; i <= m.end; ++i) {
    if (i > m.start) s += ' ';
    s += to_lower(doc.tokens[i]);
  }
  return s;
}

struct CorefBaselines {
  CorefScores nearest;
  CorefScores head_match;
  CorefScores rule_sieve;
};

namespace detail {

/// Nearest earlier candidate satisfying pred, if any.
template <typename Pred>
std::optional<std::size_t> nearest_where(const std::vector<std::size_t>& candidates, Pred pred) {
  for (auto it = candidates.rbegin(); it != candidates.rend(); ++it) {
    if (pred(*it)) return *it;
  }
  return std::nullopt;
}

}  // namespace detail

/// Sieve order: full string match, head word match, number/gender/person
/// agreement, anything. The nearest mention of the first firing sieve wins.
inline std::size_t rule_sieve_antecedent(const CorefDoc& doc, std::size_t m) {
  const auto candidates = earlier_mentions(doc, m);
  const auto& mention = doc.mentions[m];
  const auto text = mention_text(doc, mention);
  const auto head = to_lower(doc.tokens[mention.head_index]);
  const auto attrs = pronoun_attributes(doc.tokens[mention.head_index]);
  if (auto c = detail::nearest_where(candidates, [&](std::size_t c) {
        return mention_text(doc, doc.mentions[c]) == text;
      }))
    return *c;
  if (auto c = detail::nearest_where(candidates, [&](std::size_t c) {
        return to_lower(doc.tokens[doc.mentions[c].head_index]) == head;
      }))
    return *c;
  if (auto c = detail::nearest_where(candidates, [&](std::size_t c) {
        return compatible(attrs, pronoun_attributes(doc.tokens[doc.mentions[c].head_index]));
      }))
    return *c;
  return candidates.back();
}

inline std::size_t head_match_antecedent(const CorefDoc& doc, std::size_t m) {
  const auto candidates = earlier_mentions(doc, m);
  const auto head = to_lower(doc.tokens[doc.mentions[m].head_index]);
  auto c = detail::nearest_where(candidates, [&](std::size_t c) {
    return to_lower(doc.tokens[doc.mentions[c].head_index]) == head;
  });
  return c.value_or(candidates.back());
}

inline std::size_t nearest_antecedent(const CorefDoc& doc, std::size_t m) {
  return earlier_mentions(doc, m).back();
}

inline CorefBaselines coref_baselines(const CorefCorpus& corpus) {
  CorefBaselines out;
  for (const auto& doc : corpus) {
    bool any = false;
    for (std::size_t m = 0; m < doc.mentions.size(); ++m) {
      if (!has_antecedent(doc, m)) continue;
      any = true;
      const auto& mention = doc.mentions[m];
      auto same = [&](std::size_t c) { return doc.mentions[c].cluster_id == mention.cluster_id; };
      out.nearest.add(mention.mention_type, same(nearest_antecedent(doc, m)));
      out.head_match.add(mention.mention_type, same(head_match_antecedent(doc, m)));
      out.rule_sieve.add(mention.mention_type, same(rule_sieve_antecedent(doc, m)));
    }
    if (!any) {
      ++out.nearest.skipped_docs;
      ++out.head_match.skipped_docs;
      ++out.rule_sieve.skipped_docs;
    }
  }
  return out;
}

inline void write_coref_header(std::ostream& out) {
  out << "model,all,pronoun,proper,nominal,support\n";
}

inline void write_coref_row(std::ostream& out, const std::string& model, const CorefScores& s) {
  out << model << ',' << format_fixed(s.all.accuracy(), 4) << ','
      << format_fixed(s.of(MentionType::Pronoun).accuracy(), 4) << ','
      << format_fixed(s.of(MentionType::Proper).accuracy(), 4) << ','
      << format_fixed(s.of(MentionType::Nominal).accuracy(), 4) << ',' << s.all.total << '\n';
}

}  // namespace attnprobe
