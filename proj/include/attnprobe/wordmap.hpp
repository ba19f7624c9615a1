#pragma once

// Token-token attention -> word-word attention. Attention TO a split word is
// the sum over its tokens; attention FROM a split word is the mean over its
// tokens. [CLS]/[SEP] rows are always dropped; their columns are appended
// after the word columns only when requested.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "attnprobe/corpora.hpp"
#include "attnprobe/error.hpp"
#include "attnprobe/interchange.hpp"

namespace attnprobe {

enum class MergeOrder { ColumnsFirst, RowsFirst };

struct WordMapOptions {
  bool keep_special = false;
  std::string continuation_marker = "##";
  MergeOrder order = MergeOrder::ColumnsFirst;
};

struct WordAttentionMatrix {
  std::vector<std::string> words;
  /// [from-word][to-column]; columns are words, then retained specials.
  Eigen::MatrixXd matrix;
  bool kept_special = false;
  std::vector<std::size_t> special_tokens;  // token position of each retained column

  std::size_t n_words() const { return words.size(); }
};

/// Token positions of each word plus the special token positions.
struct TokenGroups {
  std::vector<std::vector<std::size_t>> word_tokens;
  std::vector<std::size_t> specials;
};

inline TokenGroups token_groups(const Segment& segment) {
  TokenGroups g;
  g.word_tokens.resize(segment.n_words());
  for (std::size_t t = 0; t < segment.length(); ++t) {
    if (const auto& w = segment.word_index[t]) {
      g.word_tokens[*w].push_back(t);
    } else {
      g.specials.push_back(t);
    }
  }
  return g;
}

inline std::vector<std::string> segment_words(const Segment& segment,
                                              const std::string& marker = "##") {
  std::vector<std::string> words(segment.n_words());
  for (std::size_t t = 0; t < segment.length(); ++t) {
    if (const auto& w = segment.word_index[t]) words[*w] += strip_marker(segment.tokens[t], marker);
  }
  return words;
}

namespace detail {

inline void check_head(const Segment& segment, HeadId head) {
  if (head.layer >= segment.n_layers || head.head >= segment.n_heads) {
    throw Error(ErrorCode::Index, "head " + head.display() + " out of range for " +
                                      std::to_string(segment.n_layers) + " layers x " +
                                      std::to_string(segment.n_heads) + " heads");
  }
}

/// Column groups: each word's tokens, then one group per retained special.
inline std::vector<std::vector<std::size_t>> column_groups(const TokenGroups& g,
                                                           bool keep_special) {
  auto cols = g.word_tokens;
  if (keep_special) {
    for (auto t : g.specials) cols.push_back({t});
  }
  return cols;
}

}  // namespace detail

inline WordAttentionMatrix to_word_attention(const Segment& segment, HeadId head,
                                             const WordMapOptions& opts) {
  detail::check_head(segment, head);
  const TokenGroups g = token_groups(segment);
  const auto cols = detail::column_groups(g, opts.keep_special);
  const auto& rows = g.word_tokens;
  const std::size_t n_tokens = segment.length();

  WordAttentionMatrix out;
  out.words = segment_words(segment, opts.continuation_marker);
  out.kept_special = opts.keep_special;
  if (opts.keep_special) out.special_tokens = g.specials;
  out.matrix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                     static_cast<Eigen::Index>(cols.size()));

  if (opts.order == MergeOrder::ColumnsFirst) {
    // token rows x word columns, then average rows per word
    Eigen::MatrixXd merged(static_cast<Eigen::Index>(n_tokens), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t t = 0; t < n_tokens; ++t) {
      const auto row = segment.row(head, t);
      for (std::size_t c = 0; c < cols.size(); ++c) {
        double s = 0.0;
        for (auto k : cols[c]) s += static_cast<double>(row[k]);
        merged(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) = s;
      }
    }
    for (std::size_t w = 0; w < rows.size(); ++w) {
      for (auto t : rows[w]) out.matrix.row(static_cast<Eigen::Index>(w)) += merged.row(static_cast<Eigen::Index>(t));
      out.matrix.row(static_cast<Eigen::Index>(w)) /= static_cast<double>(rows[w].size());
    }
  } else {
    Eigen::MatrixXd merged = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                                   static_cast<Eigen::Index>(n_tokens));
    for (std::size_t w = 0; w < rows.size(); ++w) {
      for (auto t : rows[w]) {
        const auto row = segment.row(head, t);
        for (std::size_t k = 0; k < n_tokens; ++k) {
          merged(static_cast<Eigen::Index>(w), static_cast<Eigen::Index>(k)) += static_cast<double>(row[k]);
        }
      }
      merged.row(static_cast<Eigen::Index>(w)) /= static_cast<double>(rows[w].size());
    }
    for (std::size_t c = 0; c < cols.size(); ++c) {
      for (auto k : cols[c]) out.matrix.col(static_cast<Eigen::Index>(c)) += merged.col(static_cast<Eigen::Index>(k));
    }
  }
  return out;
}

inline WordAttentionMatrix to_word_attention(const Segment& segment, HeadId head,
                                             bool keep_special = false) {
  WordMapOptions opts;
  opts.keep_special = keep_special;
  return to_word_attention(segment, head, opts);
}

/// Word-level map extended with the first [CLS] token as an extra row and
/// column at index n_words. Used when root attachments are scored against
/// [CLS]. Other specials are dropped.
inline Eigen::MatrixXd word_attention_with_cls(const Segment& segment, HeadId head) {
  detail::check_head(segment, head);
  TokenGroups g = token_groups(segment);
  std::optional<std::size_t> cls;
  for (std::size_t t = 0; t < segment.length(); ++t) {
    if (segment.special_flags[t] == TokenCategory::Cls) {
      cls = t;
      break;
    }
  }
  if (!cls) throw Error(ErrorCode::InvalidArgument, "segment '" + segment.id + "' has no [CLS] token");
  auto groups = g.word_tokens;
  groups.push_back({*cls});
  const auto n = static_cast<Eigen::Index>(groups.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& row_tokens = groups[static_cast<std::size_t>(r)];
    for (auto t : row_tokens) {
      const auto row = segment.row(head, t);
      for (Eigen::Index c = 0; c < n; ++c) {
        double s = 0.0;
        for (auto k : groups[static_cast<std::size_t>(c)]) s += static_cast<double>(row[k]);
        m(r, c) += s;
      }
    }
    m.row(r) /= static_cast<double>(row_tokens.size());
  }
  return m;
}

}  // namespace attnprobe
