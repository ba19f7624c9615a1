#pragma once

// Head-to-head Jensen-Shannon distances and a 2-D embedding of the heads by
// metric multidimensional scaling (SMACOF, seeded from classical MDS).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "attnprobe/error.hpp"
#include "attnprobe/interchange.hpp"

namespace attnprobe {

inline constexpr double kDistributionTolerance = 1e-6;

/// JS divergence in nats. No validation; zero-probability terms vanish.
template <typename P, typename Q>
double js_divergence_unchecked(const P& p, const Q& q) {
  double total = 0.0;
  const std::size_t n = std::size(p);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = static_cast<double>(p[i]);
    const double b = static_cast<double>(q[i]);
    const double m = 0.5 * (a + b);
    double term = 0.0;
    if (a > 0.0) term += a * std::log(a / m);
    if (b > 0.0) term += b * std::log(b / m);
    total += term;
  }
  return 0.5 * total;
}

inline double js_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw Error(ErrorCode::InvalidArgument, "distributions differ in length");
  for (auto dist : {p, q}) {
    double s = 0.0;
    for (double v : dist) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "negative or non-finite probability");
      s += v;
    }
    if (std::abs(s - 1.0) > kDistributionTolerance) {
      throw Error(ErrorCode::InvalidArgument, "distribution sums to " + std::to_string(s));
    }
  }
  return js_divergence_unchecked(p, q);
}

struct HeadDistanceMatrix {
  std::size_t n_layers = 0;
  std::size_t n_heads = 0;
  Eigen::MatrixXd d;

  std::size_t size() const { return static_cast<std::size_t>(d.rows()); }
};

struct DistanceOptions {
  /// Sum over tokens instead of the mean.
  bool raw_sum = false;
  unsigned threads = 1;
};

/// Entry (i, j): mean (or sum) over every token of every segment of the JS
/// divergence between heads i and j's attention rows for that token.
inline HeadDistanceMatrix head_distances(const ExtractSet& set, const DistanceOptions& opts = {}) {
  std::size_t tokens = 0;
  for (const auto& s : set.segments) tokens += s.length();
  if (tokens == 0 || set.total_heads() == 0) {
    throw Error(ErrorCode::InvalidArgument, "head_distances: extract set is empty");
  }
  const std::size_t n = set.total_heads();
  HeadDistanceMatrix out{set.n_layers, set.n_heads, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n))};

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      const auto [i, j] = pairs[p];
      const HeadId a = HeadId::from_flat(i, set.n_heads), b = HeadId::from_flat(j, set.n_heads);
      double sum = 0.0;
      for (const auto& s : set.segments) {
        for (std::size_t t = 0; t < s.length(); ++t) sum += js_divergence_unchecked(s.row(a, t), s.row(b, t));
      }
      const double v = opts.raw_sum ? sum : sum / static_cast<double>(tokens);
      out.d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      out.d(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  };

  const unsigned threads = std::max(1u, opts.threads);
  if (threads == 1 || pairs.size() < 2) {
    work(0, pairs.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (pairs.size() + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t b = t * chunk, e = std::min(pairs.size(), b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }
  return out;
}

inline void validate_distances(const Eigen::MatrixXd& d) {
  if (d.rows() != d.cols()) throw Error(ErrorCode::InvalidArgument, "distance matrix is not square");
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    if (d(i, i) != 0.0) throw Error(ErrorCode::InvalidArgument, "distance matrix has a nonzero diagonal");
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      if (!(d(i, j) >= 0.0) || !std::isfinite(d(i, j))) {
        throw Error(ErrorCode::InvalidArgument, "distance matrix has a negative or non-finite entry");
      }
      if (d(i, j) != d(j, i)) throw Error(ErrorCode::InvalidArgument, "distance matrix is not symmetric");
    }
  }
}

struct MdsConfig {
  std::size_t dims = 2;
  std::size_t max_iterations = 500;
  double relative_tolerance = 1e-9;
};

struct Embedding2D {
  Eigen::MatrixXd coordinates;  // n x dims
  double stress = 0.0;          // raw stress / sum d_ij^2
  double raw_stress = 0.0;
  std::vector<double> stress_history;  // raw stress: initial, then per iteration
};

inline double raw_stress(const Eigen::MatrixXd& d, const Eigen::MatrixXd& x) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < d.rows(); ++j) {
      const double r = d(i, j) - (x.row(i) - x.row(j)).norm();
      s += r * r;
    }
  }
  return s;
}

/// Classical (Torgerson) MDS: top eigenvectors of the double-centred Gram matrix.
inline Eigen::MatrixXd classical_mds(const Eigen::MatrixXd& d, std::size_t dims) {
  const Eigen::Index n = d.rows();
  const auto k = static_cast<Eigen::Index>(dims);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, k);
  if (n == 0) return x;
  const Eigen::MatrixXd sq = d.array().square().matrix();
  const Eigen::MatrixXd j = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  const Eigen::MatrixXd b = -0.5 * j * sq * j;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b);
  // eigenvalues ascending
  for (Eigen::Index c = 0; c < std::min(k, n); ++c) {
    const Eigen::Index idx = n - 1 - c;
    const double lambda = eig.eigenvalues()[idx];
    if (lambda > 0.0) x.col(c) = eig.eigenvectors().col(idx) * std::sqrt(lambda);
  }
  return x;
}

/// SMACOF with unit weights: Guttman transform X <- B(X) X / n.
inline Embedding2D mds_embed(const HeadDistanceMatrix& dist, const MdsConfig& cfg = {}) {
  const Eigen::MatrixXd& d = dist.d;
  validate_distances(d);
  const Eigen::Index n = d.rows();
  Embedding2D out;
  out.coordinates = classical_mds(d, cfg.dims);
  double denom = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) denom += d(i, j) * d(i, j);

  double stress = raw_stress(d, out.coordinates);
  out.stress_history.push_back(stress);
  for (std::size_t it = 0; it < cfg.max_iterations && stress > 0.0; ++it) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        const double e = (out.coordinates.row(i) - out.coordinates.row(j)).norm();
        if (e > 0.0) b(i, j) = -d(i, j) / e;
      }
      b(i, i) = -b.row(i).sum();
    }
    const Eigen::MatrixXd next = b * out.coordinates / static_cast<double>(n);
    const double next_stress = raw_stress(d, next);
    out.coordinates = next;
    out.stress_history.push_back(next_stress);
    const double change = (stress - next_stress) / stress;
    stress = next_stress;
    if (change < cfg.relative_tolerance) break;
  }
  out.raw_stress = stress;
  out.stress = denom > 0.0 ? stress / denom : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Reports

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace detail

inline void write_distance_csv(std::ostream& out, const HeadDistanceMatrix& m) {
  out << "head_a,head_b,distance\n";
  char buf[64];
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.9f", m.d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      out << HeadId::from_flat(i, m.n_heads).display() << ',' << HeadId::from_flat(j, m.n_heads).display()
          << ',' << buf << '\n';
    }
  }
}

inline void write_embedding_csv(std::ostream& out, const HeadDistanceMatrix& m, const Embedding2D& e,
                                const std::map<std::string, std::string>& tags = {}) {
  out << "head,layer,x,y,tag\n";
  char buf[96];
  for (std::size_t i = 0; i < m.size(); ++i) {
    const HeadId h = HeadId::from_flat(i, m.n_heads);
    const auto r = static_cast<Eigen::Index>(i);
    std::snprintf(buf, sizeof buf, "%.9f,%.9f", e.coordinates(r, 0), e.coordinates.cols() > 1 ? e.coordinates(r, 1) : 0.0);
    auto it = tags.find(h.display());
    out << h.display() << ',' << (h.layer + 1) << ',' << buf << ',' << (it == tags.end() ? "" : detail::csv_field(it->second)) << '\n';
  }
}

/// Scatter of the embedding, one colour per layer, labelled "<layer>-<head>".
inline void write_embedding_svg(std::ostream& out, const HeadDistanceMatrix& m, const Embedding2D& e,
                                const std::map<std::string, std::string>& tags = {}) {
  constexpr double kSize = 600.0, kMargin = 40.0;
  const Eigen::Index n = e.coordinates.rows();
  double min_x = 0, max_x = 0, min_y = 0, max_y = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = e.coordinates(i, 0), y = e.coordinates.cols() > 1 ? e.coordinates(i, 1) : 0.0;
    if (i == 0 || x < min_x) min_x = x;
    if (i == 0 || x > max_x) max_x = x;
    if (i == 0 || y < min_y) min_y = y;
    if (i == 0 || y > max_y) max_y = y;
  }
  const double span = std::max({max_x - min_x, max_y - min_y, 1e-12});
  const double scale = (kSize - 2 * kMargin) / span;
  char buf[256];
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"600\" viewBox=\"0 0 600 600\">\n";
  out << "<rect width=\"600\" height=\"600\" fill=\"white\"/>\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    const HeadId h = HeadId::from_flat(static_cast<std::size_t>(i), m.n_heads);
    const double px = kMargin + (e.coordinates(i, 0) - min_x) * scale;
    const double py = kSize - kMargin - ((e.coordinates.cols() > 1 ? e.coordinates(i, 1) : 0.0) - min_y) * scale;
    const double hue = m.n_layers > 1 ? 300.0 * static_cast<double>(h.layer) / static_cast<double>(m.n_layers - 1) : 0.0;
    std::snprintf(buf, sizeof buf,
                  "<circle class=\"head\" cx=\"%.3f\" cy=\"%.3f\" r=\"5\" fill=\"hsl(%.0f,70%%,45%%)\"/>\n", px, py, hue);
    out << buf;
    std::string label = h.display();
    if (auto it = tags.find(label); it != tags.end()) label += " " + it->second;
    std::snprintf(buf, sizeof buf, "<text x=\"%.3f\" y=\"%.3f\" font-size=\"9\">", px + 6, py - 6);
    out << buf << detail::xml_escape(label) << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace attnprobe
