#pragma once

// Surface-level statistics over an ExtractSet: relative-position shares,
// attention mass per token category, attention entropy, and the gradient
// importance report. All averages are token-weighted across segments.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "attnprobe/error.hpp"
#include "attnprobe/interchange.hpp"

namespace attnprobe {

struct HeadStat {
  HeadId head;
  double value = 0.0;
};

using HeadStats = std::vector<HeadStat>;

namespace detail {

inline void require_nonempty(const ExtractSet& set, const char* what) {
  std::size_t tokens = 0;
  for (const auto& s : set.segments) tokens += s.length();
  if (tokens == 0 || set.total_heads() == 0) {
    throw Error(ErrorCode::InvalidArgument, std::string(what) + ": extract set is empty");
  }
}

inline HeadStats finalize(const ExtractSet& set, const std::vector<double>& sum,
                          const std::vector<double>& count) {
  HeadStats out;
  out.reserve(sum.size());
  for (std::size_t k = 0; k < sum.size(); ++k) {
    out.push_back({HeadId::from_flat(k, set.n_heads), count[k] > 0 ? sum[k] / count[k] : 0.0});
  }
  return out;
}

}  // namespace detail

/// Entropy in nats with 0 ln 0 = 0.
template <typename Row>
double entropy(const Row& row) {
  double h = 0.0;
  for (auto p : row) {
    const double v = static_cast<double>(p);
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

/// Mean attention weight at from+offset. Source tokens with no neighbour at
/// that offset are left out of the denominator.
inline HeadStats offset_stats(const ExtractSet& set, int offset) {
  detail::require_nonempty(set, "offset_stats");
  const std::size_t n = set.total_heads();
  std::vector<double> sum(n, 0.0), count(n, 0.0);
  for (const auto& s : set.segments) {
    const auto t = static_cast<long>(s.length());
    for (std::size_t k = 0; k < n; ++k) {
      const HeadId h = HeadId::from_flat(k, set.n_heads);
      for (long from = 0; from < t; ++from) {
        const long to = from + offset;
        if (to < 0 || to >= t) continue;
        sum[k] += static_cast<double>(s.at(h, static_cast<std::size_t>(from), static_cast<std::size_t>(to)));
        count[k] += 1.0;
      }
    }
  }
  return detail::finalize(set, sum, count);
}

struct CategoryStats {
  TokenCategory category = TokenCategory::Sep;
  HeadStats mass;              // over all source tokens
  HeadStats from_category;     // sources that are themselves in the category
  HeadStats from_other;        // all remaining sources
};

inline CategoryStats category_stats(const ExtractSet& set, TokenCategory category) {
  detail::require_nonempty(set, "category_stats");
  const std::size_t n = set.total_heads();
  std::vector<double> all(n, 0.0), all_n(n, 0.0), in(n, 0.0), in_n(n, 0.0), out(n, 0.0), out_n(n, 0.0);
  for (const auto& s : set.segments) {
    std::vector<std::size_t> targets;
    for (std::size_t t = 0; t < s.length(); ++t) {
      if (s.special_flags[t] == category) targets.push_back(t);
    }
    for (std::size_t k = 0; k < n; ++k) {
      const HeadId h = HeadId::from_flat(k, set.n_heads);
      for (std::size_t from = 0; from < s.length(); ++from) {
        const auto row = s.row(h, from);
        double mass = 0.0;
        for (auto t : targets) mass += static_cast<double>(row[t]);
        all[k] += mass;
        all_n[k] += 1.0;
        if (s.special_flags[from] == category) {
          in[k] += mass;
          in_n[k] += 1.0;
        } else {
          out[k] += mass;
          out_n[k] += 1.0;
        }
      }
    }
  }
  return {category, detail::finalize(set, all, all_n), detail::finalize(set, in, in_n),
          detail::finalize(set, out, out_n)};
}

/// Mean entropy of every attention row, per head.
inline HeadStats head_entropy(const ExtractSet& set) {
  detail::require_nonempty(set, "head_entropy");
  const std::size_t n = set.total_heads();
  std::vector<double> sum(n, 0.0), count(n, 0.0);
  for (const auto& s : set.segments) {
    for (std::size_t k = 0; k < n; ++k) {
      const HeadId h = HeadId::from_flat(k, set.n_heads);
      for (std::size_t from = 0; from < s.length(); ++from) {
        sum[k] += entropy(s.row(h, from));
        count[k] += 1.0;
      }
    }
  }
  return detail::finalize(set, sum, count);
}

/// Per layer: mean entropy of [CLS] source rows, averaged over heads.
inline std::vector<double> cls_entropy(const ExtractSet& set) {
  detail::require_nonempty(set, "cls_entropy");
  std::vector<double> sum(set.n_layers, 0.0), count(set.n_layers, 0.0);
  for (const auto& s : set.segments) {
    for (std::size_t from = 0; from < s.length(); ++from) {
      if (s.special_flags[from] != TokenCategory::Cls) continue;
      for (std::size_t l = 0; l < set.n_layers; ++l) {
        for (std::size_t h = 0; h < set.n_heads; ++h) {
          sum[l] += entropy(s.row({l, h}, from));
          count[l] += 1.0;
        }
      }
    }
  }
  if (std::all_of(count.begin(), count.end(), [](double c) { return c == 0.0; })) {
    throw Error(ErrorCode::InvalidArgument, "cls_entropy: no [CLS] tokens in extract set");
  }
  std::vector<double> out(set.n_layers);
  for (std::size_t l = 0; l < set.n_layers; ++l) out[l] = sum[l] / count[l];
  return out;
}

struct GradientCurves {
  /// [layer] -> {SEP, PERIOD_COMMA, OTHER}
  std::vector<std::array<double, 3>> per_layer;
  /// [layer] -> category positions sorted by ascending magnitude (stable)
  std::vector<std::array<std::size_t, 3>> ascending;
};

inline GradientCurves aggregate_gradients(const GradientReport& report,
                                          std::optional<std::size_t> expected_layers = std::nullopt) {
  if (expected_layers && report.n_layers() != *expected_layers) {
    throw Error(ErrorCode::InvalidArgument,
                "gradient report has " + std::to_string(report.n_layers()) + " layers, expected " +
                    std::to_string(*expected_layers));
  }
  GradientCurves curves;
  curves.per_layer = report.per_layer;
  for (const auto& row : report.per_layer) {
    for (double v : row) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw Error(ErrorCode::Validation, "gradient magnitudes must be finite and >= 0");
      }
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return row[a] < row[b]; });
    curves.ascending.push_back(order);
  }
  return curves;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline void write_head_stats_header(std::ostream& out) { out << "layer,head,statistic,value\n"; }

/// Layer and head are written 1-based.
inline void write_head_stats(std::ostream& out, const std::string& statistic, const HeadStats& stats) {
  for (const auto& s : stats) {
    out << (s.head.layer + 1) << ',' << (s.head.head + 1) << ',' << statistic << ','
        << format_value(s.value) << '\n';
  }
}

inline void write_gradient_curves(std::ostream& out, const GradientCurves& curves) {
  out << "layer,SEP,PERIOD_COMMA,OTHER,smallest\n";
  for (std::size_t l = 0; l < curves.per_layer.size(); ++l) {
    const auto& row = curves.per_layer[l];
    out << (l + 1) << ',' << format_value(row[0]) << ',' << format_value(row[1]) << ','
        << format_value(row[2]) << ','
        << to_string(GradientReport::kCategories[curves.ascending[l][0]]) << '\n';
  }
}

}  // namespace attnprobe
