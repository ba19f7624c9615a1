#pragma once

// Attention-based dependency probes. For dependent j and candidate head i:
//
//   attention-only:       logit(i) = sum_k w_k a^k(i->j) + u_k a^k(j->i)
//   attention-and-words:  logit(i) = sum_k W_k.(v_i ++ v_j) a^k(i->j)
//                                       + U_k.(v_i ++ v_j) a^k(j->i)
//   distances + words:    logit(i) = v . tanh(A [v_j ++ v_i ++ dist(i - j)] + c)
//
// p(i|j) is the softmax over candidates i != j. All arithmetic is 64-bit.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "attnprobe/corpora.hpp"
#include "attnprobe/error.hpp"
#include "attnprobe/headprobe.hpp"
#include "attnprobe/interchange.hpp"
#include "attnprobe/wordmap.hpp"

namespace attnprobe {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class RootMode {
  Exclude,    // root words contribute nothing
  ClsColumn,  // root words are trained/scored to attach to [CLS]
};

/// One sentence in probe-ready form.
struct ProbeSentence {
  std::size_t n_words = 0;
  std::size_t n_candidates = 0;  // n_words, or n_words + 1 with a [CLS] candidate
  /// Per word: gold candidate index, or -1 when the word is not scored.
  std::vector<int> gold;
  /// into[j](i, k) = attention of head k from candidate i to word j.
  std::vector<Eigen::MatrixXd> into;
  /// outof[j](i, k) = attention of head k from word j to candidate i.
  std::vector<Eigen::MatrixXd> outof;
  /// Row per candidate; the [CLS] row is zero. Empty when unused.
  Eigen::MatrixXd embeddings;

  std::size_t n_heads() const { return into.empty() ? 0 : static_cast<std::size_t>(into.front().cols()); }
  std::size_t embed_dim() const { return static_cast<std::size_t>(embeddings.cols()); }
};

struct ProbeDataOptions {
  RootMode root_mode = RootMode::Exclude;
  AlignOptions align;
  bool with_attention = true;
};

namespace detail {

inline void fill_attention(ProbeSentence& ps, const std::vector<Eigen::MatrixXd>& per_head) {
  const auto n = static_cast<Eigen::Index>(per_head.size());
  const auto c = static_cast<Eigen::Index>(ps.n_candidates);
  ps.into.assign(ps.n_words, Eigen::MatrixXd(c, n));
  ps.outof.assign(ps.n_words, Eigen::MatrixXd(c, n));
  for (std::size_t j = 0; j < ps.n_words; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto& m = per_head[static_cast<std::size_t>(k)];
      ps.into[j].col(k) = m.col(jj).head(c);
      ps.outof[j].col(k) = m.row(jj).head(c).transpose();
    }
  }
}

inline Eigen::MatrixXd embedding_rows(const std::vector<std::string>& words, std::size_t n_candidates,
                                      const EmbeddingTable& table) {
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_candidates),
                                            static_cast<Eigen::Index>(table.dim()));
  for (std::size_t w = 0; w < words.size(); ++w) {
    const auto v = table.lookup_folded(words[w]);
    for (std::size_t d = 0; d < v.size(); ++d) e(static_cast<Eigen::Index>(w), static_cast<Eigen::Index>(d)) = v[d];
  }
  return e;
}

}  // namespace detail

/// Probe sentence from per-head word matrices (word columns only). gold may
/// be empty when the sentence is only scored.
inline ProbeSentence probe_sentence(std::span<const WordAttentionMatrix> heads,
                                    const std::vector<int>& gold = {},
                                    const EmbeddingTable* embeddings = nullptr) {
  ProbeSentence ps;
  if (heads.empty()) throw Error(ErrorCode::InvalidArgument, "no attention heads given");
  ps.n_words = heads.front().n_words();
  ps.n_candidates = ps.n_words;
  std::vector<Eigen::MatrixXd> per_head;
  for (const auto& h : heads) {
    if (h.n_words() != ps.n_words || h.matrix.rows() != static_cast<Eigen::Index>(ps.n_words) ||
        h.matrix.cols() < static_cast<Eigen::Index>(ps.n_words)) {
      throw Error(ErrorCode::InvalidArgument, "attention matrices differ in dimensions");
    }
    per_head.push_back(h.matrix.leftCols(static_cast<Eigen::Index>(ps.n_words)));
  }
  detail::fill_attention(ps, per_head);
  ps.gold = gold.empty() ? std::vector<int>(ps.n_words, -1) : gold;
  if (ps.gold.size() != ps.n_words) throw Error(ErrorCode::InvalidArgument, "gold length differs from word count");
  if (embeddings) ps.embeddings = detail::embedding_rows(heads.front().words, ps.n_candidates, *embeddings);
  return ps;
}

inline ProbeSentence probe_sentence(const Segment& segment, const DepSentence& sentence,
                                    const EmbeddingTable* embeddings, const ProbeDataOptions& opts) {
  ProbeSentence ps;
  ps.n_words = sentence.size();
  const bool cls = opts.root_mode == RootMode::ClsColumn;
  ps.n_candidates = ps.n_words + (cls ? 1 : 0);
  ps.gold.resize(ps.n_words);
  for (std::size_t w = 0; w < ps.n_words; ++w) {
    const int h = sentence.gold_head[w];
    ps.gold[w] = h != kRoot ? h : (cls ? static_cast<int>(ps.n_words) : -1);
  }
  if (opts.with_attention) {
    std::vector<Eigen::MatrixXd> per_head;
    WordMapOptions wm;
    wm.continuation_marker = opts.align.continuation_marker;
    for (std::size_t k = 0; k < segment.n_layers * segment.n_heads; ++k) {
      const HeadId h = HeadId::from_flat(k, segment.n_heads);
      if (cls) {
        per_head.push_back(word_attention_with_cls(segment, h));
      } else {
        per_head.push_back(to_word_attention(segment, h, wm).matrix);
      }
    }
    detail::fill_attention(ps, per_head);
  }
  if (embeddings) ps.embeddings = detail::embedding_rows(sentence.words, ps.n_candidates, *embeddings);
  return ps;
}

/// Aligns every segment with its sentence, then converts.
inline std::vector<ProbeSentence> build_probe_data(const ExtractSet* set, const DepCorpus& corpus,
                                                   const EmbeddingTable* embeddings,
                                                   const ProbeDataOptions& opts = {}) {
  std::vector<ProbeSentence> data;
  data.reserve(corpus.size());
  if (opts.with_attention) {
    if (!set) throw Error(ErrorCode::InvalidArgument, "attention features need an extract set");
    align_dep_corpus(*set, corpus, opts.align);
  }
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    static const Segment kEmpty{};
    data.push_back(probe_sentence(opts.with_attention ? set->segments[i] : kEmpty, corpus[i],
                                  embeddings, opts));
  }
  return data;
}

// ---------------------------------------------------------------------------
// Softmax helpers

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// In place: logits -> probabilities. Entries at -inf get probability 0.
inline double log_softmax_normalizer(const Eigen::VectorXd& logits) {
  const double mx = logits.maxCoeff();
  double z = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    if (logits[i] != kNegInf) z += std::exp(logits[i] - mx);
  }
  return mx + std::log(z);
}

inline Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double lse = log_softmax_normalizer(logits);
  Eigen::VectorXd p(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    p[i] = logits[i] == kNegInf ? 0.0 : std::exp(logits[i] - lse);
  }
  return p;
}

/// Lowest index among the maxima, skipping -inf.
inline std::size_t argmax_lowest(const Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return static_cast<std::size_t>(best);
}

// ---------------------------------------------------------------------------
// Models

template <typename M>
concept ProbeModel = requires(const M& m, const ProbeSentence& s, std::size_t j, Eigen::VectorXd& out,
                              Eigen::VectorXd& dtheta) {
  { m.logits(s, j, out) };
  { m.accumulate_gradient(s, j, out, dtheta) };
  { m.theta } -> std::convertible_to<Eigen::VectorXd>;
};

class AttnOnlyProbe {
 public:
  static constexpr std::uint32_t kKind = 1;

  AttnOnlyProbe() = default;
  explicit AttnOnlyProbe(std::size_t n_heads)
      : n_(n_heads), theta(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * n_heads))) {}

  std::size_t n_heads() const { return n_; }
  auto w() { return theta.head(static_cast<Eigen::Index>(n_)); }
  auto u() { return theta.tail(static_cast<Eigen::Index>(n_)); }
  auto w() const { return theta.head(static_cast<Eigen::Index>(n_)); }
  auto u() const { return theta.tail(static_cast<Eigen::Index>(n_)); }

  void check(const ProbeSentence& s) const {
    if (s.n_heads() != n_) {
      throw Error(ErrorCode::InvalidArgument, "probe has " + std::to_string(n_) + " heads, data has " +
                                                  std::to_string(s.n_heads()));
    }
  }

  void logits(const ProbeSentence& s, std::size_t j, Eigen::VectorXd& out) const {
    check(s);
    out = s.into[j] * w() + s.outof[j] * u();
    out[static_cast<Eigen::Index>(j)] = kNegInf;
  }

  /// dtheta += sum_i coef_i d logit_i / d theta
  void accumulate_gradient(const ProbeSentence& s, std::size_t j, const Eigen::VectorXd& coef,
                           Eigen::VectorXd& dtheta) const {
    dtheta.head(static_cast<Eigen::Index>(n_)) += s.into[j].transpose() * coef;
    dtheta.tail(static_cast<Eigen::Index>(n_)) += s.outof[j].transpose() * coef;
  }

 private:
  std::size_t n_ = 0;

 public:
  Eigen::VectorXd theta;
};

class AttnWordsProbe {
 public:
  static constexpr std::uint32_t kKind = 2;

  AttnWordsProbe() = default;
  AttnWordsProbe(std::size_t n_heads, std::size_t embed_dim)
      : n_(n_heads), d_(embed_dim),
        theta(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * n_heads * 2 * embed_dim))) {}

  std::size_t n_heads() const { return n_; }
  std::size_t embed_dim() const { return d_; }

  /// n x 2d, row-major views into theta.
  Eigen::Map<const RowMajorMatrix> W() const { return {theta.data(), rows(), cols()}; }
  Eigen::Map<const RowMajorMatrix> U() const { return {theta.data() + rows() * cols(), rows(), cols()}; }
  Eigen::Map<RowMajorMatrix> W() { return {theta.data(), rows(), cols()}; }
  Eigen::Map<RowMajorMatrix> U() { return {theta.data() + rows() * cols(), rows(), cols()}; }

  void check(const ProbeSentence& s) const {
    if (s.n_heads() != n_ || s.embed_dim() != d_) {
      throw Error(ErrorCode::InvalidArgument, "probe dimensions differ from data (heads " +
                                                  std::to_string(s.n_heads()) + ", embedding dim " +
                                                  std::to_string(s.embed_dim()) + ")");
    }
  }

  /// Rows (v_i ++ v_j) for every candidate i.
  Eigen::MatrixXd pair_inputs(const ProbeSentence& s, std::size_t j) const {
    const auto c = static_cast<Eigen::Index>(s.n_candidates);
    const auto d = static_cast<Eigen::Index>(d_);
    Eigen::MatrixXd x(c, 2 * d);
    x.leftCols(d) = s.embeddings;
    x.rightCols(d) = s.embeddings.row(static_cast<Eigen::Index>(j)).replicate(c, 1);
    return x;
  }

  void logits(const ProbeSentence& s, std::size_t j, Eigen::VectorXd& out) const {
    check(s);
    const Eigen::MatrixXd x = pair_inputs(s, j);
    const Eigen::MatrixXd z = s.into[j] * W() + s.outof[j] * U();
    out = (z.array() * x.array()).rowwise().sum().matrix();
    out[static_cast<Eigen::Index>(j)] = kNegInf;
  }

  void accumulate_gradient(const ProbeSentence& s, std::size_t j, const Eigen::VectorXd& coef,
                           Eigen::VectorXd& dtheta) const {
    const Eigen::MatrixXd cx = coef.asDiagonal() * pair_inputs(s, j);
    Eigen::Map<RowMajorMatrix> gw(dtheta.data(), rows(), cols());
    Eigen::Map<RowMajorMatrix> gu(dtheta.data() + rows() * cols(), rows(), cols());
    gw += s.into[j].transpose() * cx;
    gu += s.outof[j].transpose() * cx;
  }

 private:
  Eigen::Index rows() const { return static_cast<Eigen::Index>(n_); }
  Eigen::Index cols() const { return static_cast<Eigen::Index>(2 * d_); }

  std::size_t n_ = 0;
  std::size_t d_ = 0;

 public:
  Eigen::VectorXd theta;
};

inline constexpr int kDistanceIndicatorSpan = 4;
inline constexpr double kDistanceCap = 40.0;
inline constexpr std::size_t kDistanceFeatures = 2 * kDistanceIndicatorSpan + 2;

/// Indicators for offsets -4..-1, +1..+4, then |distance| behind and ahead
/// (capped at 40). offset = candidate - dependent.
inline std::array<double, kDistanceFeatures> distance_features(std::size_t dependent, std::size_t candidate) {
  std::array<double, kDistanceFeatures> f{};
  const long off = static_cast<long>(candidate) - static_cast<long>(dependent);
  if (off >= -kDistanceIndicatorSpan && off <= kDistanceIndicatorSpan && off != 0) {
    const long slot = off < 0 ? off + kDistanceIndicatorSpan : off + kDistanceIndicatorSpan - 1;
    f[static_cast<std::size_t>(slot)] = 1.0;
  }
  const double mag = std::min(static_cast<double>(std::labs(off)), kDistanceCap);
  f[2 * kDistanceIndicatorSpan] = off < 0 ? mag : 0.0;
  f[2 * kDistanceIndicatorSpan + 1] = off > 0 ? mag : 0.0;
  return f;
}

/// One-hidden-layer scorer over embeddings and distance features.
class DistanceWordsBaseline {
 public:
  static constexpr std::uint32_t kKind = 3;
  static constexpr std::size_t kDefaultHidden = 64;

  DistanceWordsBaseline() = default;
  DistanceWordsBaseline(std::size_t embed_dim, std::size_t hidden = kDefaultHidden)
      : d_(embed_dim), hidden_(hidden), theta(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size()))) {}

  /// Glorot-uniform hidden and output weights, zero biases.
  void initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const double a = std::sqrt(6.0 / static_cast<double>(inputs() + hidden_));
    const double b = std::sqrt(6.0 / static_cast<double>(hidden_ + 1));
    std::uniform_real_distribution<double> ua(-a, a), ub(-b, b);
    theta.setZero();
    auto A = hidden_weights();
    for (Eigen::Index r = 0; r < A.rows(); ++r)
      for (Eigen::Index c = 0; c < A.cols(); ++c) A(r, c) = ua(rng);
    for (Eigen::Index r = 0; r < h(); ++r) theta[theta.size() - h() + r] = ub(rng);
  }

  std::size_t embed_dim() const { return d_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t inputs() const { return 2 * d_ + kDistanceFeatures; }

  Eigen::Map<RowMajorMatrix> hidden_weights() { return {theta.data(), h(), in()}; }
  Eigen::Map<const RowMajorMatrix> hidden_weights() const { return {theta.data(), h(), in()}; }
  auto hidden_bias() { return theta.segment(h() * in(), h()); }
  auto hidden_bias() const { return theta.segment(h() * in(), h()); }
  auto output_weights() { return theta.tail(h()); }
  auto output_weights() const { return theta.tail(h()); }

  Eigen::MatrixXd inputs_for(const ProbeSentence& s, std::size_t j) const {
    if (s.embed_dim() != d_) throw Error(ErrorCode::InvalidArgument, "embedding dimension differs from baseline");
    if (s.n_candidates != s.n_words) {
      throw Error(ErrorCode::InvalidArgument, "distance baseline does not score [CLS] attachments");
    }
    const auto c = static_cast<Eigen::Index>(s.n_candidates);
    const auto d = static_cast<Eigen::Index>(d_);
    Eigen::MatrixXd x(c, in());
    x.leftCols(d) = s.embeddings.row(static_cast<Eigen::Index>(j)).replicate(c, 1);
    x.middleCols(d, d) = s.embeddings;
    for (Eigen::Index i = 0; i < c; ++i) {
      const auto f = distance_features(j, static_cast<std::size_t>(i));
      for (std::size_t k = 0; k < f.size(); ++k) x(i, 2 * d + static_cast<Eigen::Index>(k)) = f[k];
    }
    return x;
  }

  void logits(const ProbeSentence& s, std::size_t j, Eigen::VectorXd& out) const {
    const Eigen::MatrixXd hid = activations(inputs_for(s, j));
    out = hid * output_weights();
    out[static_cast<Eigen::Index>(j)] = kNegInf;
  }

  void accumulate_gradient(const ProbeSentence& s, std::size_t j, const Eigen::VectorXd& coef,
                           Eigen::VectorXd& dtheta) const {
    const Eigen::MatrixXd x = inputs_for(s, j);
    const Eigen::MatrixXd hid = activations(x);
    Eigen::Map<RowMajorMatrix> gA(dtheta.data(), h(), in());
    auto gc = dtheta.segment(h() * in(), h());
    auto gv = dtheta.tail(h());
    gv += hid.transpose() * coef;
    const Eigen::MatrixXd dz =
        ((coef * output_weights().transpose()).array() * (1.0 - hid.array().square())).matrix();
    gA += dz.transpose() * x;
    gc += dz.transpose() * Eigen::VectorXd::Ones(x.rows());
  }

 private:
  Eigen::MatrixXd activations(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd z = x * hidden_weights().transpose();
    z.rowwise() += hidden_bias().transpose();
    return z.array().tanh().matrix();
  }

  std::size_t size() const { return hidden_ * (2 * d_ + kDistanceFeatures) + 2 * hidden_; }
  Eigen::Index h() const { return static_cast<Eigen::Index>(hidden_); }
  Eigen::Index in() const { return static_cast<Eigen::Index>(inputs()); }

  std::size_t d_ = 0;
  std::size_t hidden_ = kDefaultHidden;

 public:
  Eigen::VectorXd theta;
};

/// p(i|j) over all candidates; entry j is 0.
template <ProbeModel Model>
Eigen::VectorXd score(const Model& model, const ProbeSentence& s, std::size_t j) {
  if (j >= s.n_words) throw Error(ErrorCode::Index, "dependent index out of range");
  if (s.n_candidates < 2) throw Error(ErrorCode::NoCandidate, "no candidate heads");
  Eigen::VectorXd logits;
  model.logits(s, j, logits);
  return softmax(logits);
}

inline Eigen::VectorXd score_attn_only(const AttnOnlyProbe& probe, std::span<const WordAttentionMatrix> heads,
                                       std::size_t j) {
  return score(probe, probe_sentence(heads), j);
}

inline Eigen::VectorXd score_attn_words(const AttnWordsProbe& probe, std::span<const WordAttentionMatrix> heads,
                                        const EmbeddingTable& embeddings, std::size_t j) {
  return score(probe, probe_sentence(heads, {}, &embeddings), j);
}

// ---------------------------------------------------------------------------
// Objective and training

struct Objective {
  double loss = 0.0;       // mean NLL + (l2/2) |theta|^2
  double mean_nll = 0.0;
  std::size_t count = 0;
  Eigen::VectorXd gradient;
};

/// Mean negative log-likelihood of the gold heads over scored words, plus the
/// L2 penalty. The gradient is filled when requested.
template <ProbeModel Model>
Objective objective(const Model& model, std::span<const ProbeSentence> data, double l2,
                    bool with_gradient = true) {
  Objective obj;
  if (with_gradient) obj.gradient = Eigen::VectorXd::Zero(model.theta.size());
  Eigen::VectorXd logits, coef;
  double nll = 0.0;
  for (const auto& s : data) {
    for (std::size_t j = 0; j < s.n_words; ++j) {
      const int g = s.gold[j];
      if (g < 0) continue;
      model.logits(s, j, logits);
      const double lse = log_softmax_normalizer(logits);
      nll += lse - logits[g];
      ++obj.count;
      if (with_gradient) {
        coef = softmax(logits);
        coef[g] -= 1.0;
        model.accumulate_gradient(s, j, coef, obj.gradient);
      }
    }
  }
  const double n = obj.count > 0 ? static_cast<double>(obj.count) : 1.0;
  obj.mean_nll = nll / n;
  obj.loss = obj.mean_nll + 0.5 * l2 * model.theta.squaredNorm();
  if (with_gradient) {
    obj.gradient /= n;
    obj.gradient += l2 * model.theta;
  }
  return obj;
}

struct TrainConfig {
  double learning_rate = 0.1;
  std::size_t epochs = 20;
  double l2 = 1e-5;
  std::uint64_t seed = 0;
  /// Accumulated squared-gradient step scaling; otherwise lr / (1 + epoch).
  bool adaptive = true;

  void validate() const {
    if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be > 0");
  }
};

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;
  std::optional<double> dev_uas;
};

template <ProbeModel Model>
double eval_uas(const Model& model, std::span<const ProbeSentence> data) {
  std::size_t correct = 0, total = 0;
  Eigen::VectorXd logits;
  for (const auto& s : data) {
    for (std::size_t j = 0; j < s.n_words; ++j) {
      if (s.gold[j] < 0) continue;
      ++total;
      model.logits(s, j, logits);
      if (argmax_lowest(logits) == static_cast<std::size_t>(s.gold[j])) ++correct;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

/// Per-sentence stochastic updates in a seeded shuffled order. The reported
/// loss is the full training objective after each epoch.
template <ProbeModel Model>
std::vector<EpochLog> train_probe(Model& model, std::span<const ProbeSentence> train, const TrainConfig& cfg,
                                  std::span<const ProbeSentence> dev = {}) {
  cfg.validate();
  std::vector<EpochLog> log;
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  Eigen::VectorXd accum = Eigen::VectorXd::Zero(model.theta.size());
  constexpr double kEps = 1e-8;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const double rate = cfg.adaptive ? cfg.learning_rate : cfg.learning_rate / static_cast<double>(1 + epoch);
    for (std::size_t idx : order) {
      const auto obj = objective(model, train.subspan(idx, 1), cfg.l2);
      if (obj.count == 0) continue;
      if (!std::isfinite(obj.loss) || !obj.gradient.allFinite()) {
        throw Error(ErrorCode::Numeric, "non-finite loss at epoch " + std::to_string(epoch + 1) +
                                            ", sentence " + std::to_string(idx) + " (loss " +
                                            std::to_string(obj.loss) + ")");
      }
      if (cfg.adaptive) {
        accum += obj.gradient.cwiseAbs2();
        model.theta.array() -= rate * obj.gradient.array() / (accum.array().sqrt() + kEps);
      } else {
        model.theta -= rate * obj.gradient;
      }
    }
    const auto full = objective(model, train, cfg.l2, false);
    if (!std::isfinite(full.loss)) {
      throw Error(ErrorCode::Numeric, "non-finite training loss after epoch " + std::to_string(epoch + 1));
    }
    EpochLog entry{epoch + 1, full.loss, std::nullopt};
    if (!dev.empty()) entry.dev_uas = eval_uas(model, dev);
    log.push_back(entry);
  }
  return log;
}

inline void write_train_log(std::ostream& out, const std::vector<EpochLog>& log) {
  out << "epoch,loss,dev_uas\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << format_fixed(e.loss, 6) << ',';
    if (e.dev_uas) out << format_fixed(*e.dev_uas, 4);
    out << '\n';
  }
}

/// Predicted head = next word; the last word of a sentence is always wrong.
inline double right_branching(const DepCorpus& corpus) {
  std::size_t correct = 0, total = 0;
  for (const auto& s : corpus) {
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (s.gold_head[d] == kRoot) continue;
      ++total;
      if (d + 1 < s.size() && s.gold_head[d] == static_cast<int>(d + 1)) ++correct;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

struct BaselineRun {
  DistanceWordsBaseline model;
  std::vector<EpochLog> log;
  double uas = 0.0;
};

/// Trains the distances + embeddings baseline on `train` and scores `dev`.
inline BaselineRun distance_words_baseline(const DepCorpus& train, const DepCorpus& dev,
                                           const EmbeddingTable& embeddings, const TrainConfig& cfg,
                                           std::size_t hidden = DistanceWordsBaseline::kDefaultHidden) {
  ProbeDataOptions opts;
  opts.with_attention = false;
  const auto train_data = build_probe_data(nullptr, train, &embeddings, opts);
  const auto dev_data = build_probe_data(nullptr, dev, &embeddings, opts);
  BaselineRun run{DistanceWordsBaseline(embeddings.dim(), hidden), {}, 0.0};
  run.model.initialize(cfg.seed);
  run.log = train_probe(run.model, std::span<const ProbeSentence>(train_data), cfg,
                        std::span<const ProbeSentence>(dev_data));
  run.uas = eval_uas(run.model, std::span<const ProbeSentence>(dev_data));
  return run;
}

// ---------------------------------------------------------------------------
// Checkpoints
//
//   "ATNPROBE", u32 version, u32 kind, u32 n_heads, u32 embed_dim,
//   u32 hidden, u64 n_params, f64 x n_params      (little-endian)

inline constexpr std::string_view kProbeMagic = "ATNPROBE";
inline constexpr std::uint32_t kProbeVersion = 1;

struct ProbeCheckpoint {
  std::uint32_t kind = 0;
  std::uint32_t n_heads = 0;
  std::uint32_t embed_dim = 0;
  std::uint32_t hidden = 0;
  Eigen::VectorXd theta;
};

inline ProbeCheckpoint checkpoint_of(const AttnOnlyProbe& p) {
  return {AttnOnlyProbe::kKind, static_cast<std::uint32_t>(p.n_heads()), 0, 0, p.theta};
}
inline ProbeCheckpoint checkpoint_of(const AttnWordsProbe& p) {
  return {AttnWordsProbe::kKind, static_cast<std::uint32_t>(p.n_heads()),
          static_cast<std::uint32_t>(p.embed_dim()), 0, p.theta};
}
inline ProbeCheckpoint checkpoint_of(const DistanceWordsBaseline& p) {
  return {DistanceWordsBaseline::kKind, 0, static_cast<std::uint32_t>(p.embed_dim()),
          static_cast<std::uint32_t>(p.hidden()), p.theta};
}

inline std::string encode_checkpoint(const ProbeCheckpoint& c) {
  std::string out(kProbeMagic);
  detail::put_u32(out, kProbeVersion);
  detail::put_u32(out, c.kind);
  detail::put_u32(out, c.n_heads);
  detail::put_u32(out, c.embed_dim);
  detail::put_u32(out, c.hidden);
  const auto n = static_cast<std::uint64_t>(c.theta.size());
  detail::put_u32(out, static_cast<std::uint32_t>(n & 0xffffffffu));
  detail::put_u32(out, static_cast<std::uint32_t>(n >> 32));
  for (Eigen::Index i = 0; i < c.theta.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(c.theta[i]);
    detail::put_u32(out, static_cast<std::uint32_t>(bits & 0xffffffffu));
    detail::put_u32(out, static_cast<std::uint32_t>(bits >> 32));
  }
  return out;
}

inline ProbeCheckpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < kProbeMagic.size() || std::string_view(bytes).substr(0, kProbeMagic.size()) != kProbeMagic) {
    throw Error(ErrorCode::Format, "not a probe checkpoint (bad magic)");
  }
  detail::ByteReader r(bytes);
  r.take(kProbeMagic.size(), "magic");
  if (const auto v = r.u32("version"); v != kProbeVersion) {
    throw Error(ErrorCode::Format, "unsupported checkpoint version " + std::to_string(v));
  }
  ProbeCheckpoint c;
  c.kind = r.u32("kind");
  c.n_heads = r.u32("header");
  c.embed_dim = r.u32("header");
  c.hidden = r.u32("header");
  const std::uint64_t lo = r.u32("header"), hi = r.u32("header");
  const std::uint64_t n = lo | (hi << 32);
  if (n > (bytes.size() / 8)) throw Error(ErrorCode::CorruptFile, "checkpoint payload truncated");
  c.theta.resize(static_cast<Eigen::Index>(n));
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint64_t a = r.u32("payload"), b = r.u32("payload");
    c.theta[static_cast<Eigen::Index>(i)] = std::bit_cast<double>(a | (b << 32));
  }
  if (!r.at_end()) throw Error(ErrorCode::CorruptFile, "trailing bytes in checkpoint");
  return c;
}

inline void save_checkpoint(const ProbeCheckpoint& c, const std::string& path) {
  const auto bytes = encode_checkpoint(c);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

inline ProbeCheckpoint load_checkpoint(const std::string& path) {
  return decode_checkpoint(read_file_bytes(path));
}

template <typename Model>
Model restore(const ProbeCheckpoint& c);

template <>
inline AttnOnlyProbe restore<AttnOnlyProbe>(const ProbeCheckpoint& c) {
  if (c.kind != AttnOnlyProbe::kKind) throw Error(ErrorCode::Format, "checkpoint is not an attention-only probe");
  AttnOnlyProbe p(c.n_heads);
  if (p.theta.size() != c.theta.size()) throw Error(ErrorCode::CorruptFile, "checkpoint size mismatch");
  p.theta = c.theta;
  return p;
}

template <>
inline AttnWordsProbe restore<AttnWordsProbe>(const ProbeCheckpoint& c) {
  if (c.kind != AttnWordsProbe::kKind) throw Error(ErrorCode::Format, "checkpoint is not an attention-and-words probe");
  AttnWordsProbe p(c.n_heads, c.embed_dim);
  if (p.theta.size() != c.theta.size()) throw Error(ErrorCode::CorruptFile, "checkpoint size mismatch");
  p.theta = c.theta;
  return p;
}

template <>
inline DistanceWordsBaseline restore<DistanceWordsBaseline>(const ProbeCheckpoint& c) {
  if (c.kind != DistanceWordsBaseline::kKind) throw Error(ErrorCode::Format, "checkpoint is not a distance baseline");
  DistanceWordsBaseline p(c.embed_dim, c.hidden);
  if (p.theta.size() != c.theta.size()) throw Error(ErrorCode::CorruptFile, "checkpoint size mismatch");
  p.theta = c.theta;
  return p;
}

}  // namespace attnprobe
