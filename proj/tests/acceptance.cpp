// Acceptance run: one PASS/FAIL line per criterion, exit status 1 on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>

#include "attnprobe/cli.hpp"
#include "attnprobe/oracles.hpp"
#include "checks.hpp"
#include "fixtures.hpp"

using namespace attnprobe;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

ExtractSet synth(const std::vector<Behavior>& b, std::size_t layers, const DepCorpus& corpus, double split,
                 std::uint64_t seed) {
  SynthSpec spec;
  spec.n_layers = layers;
  spec.n_heads = b.size() / layers;
  spec.behaviors = b;
  spec.split_probability = split;
  spec.seed = seed;
  return generate(spec, sentences_from(corpus));
}

// P1: word-level conversion keeps rows stochastic, fast.
Outcome p1() {
  Outcome o;
  std::mt19937_64 rng(101);
  std::vector<Segment> segs;
  for (int i = 0; i < 1000; ++i) segs.push_back(fixtures::random_segment(rng, 1 + i % 40, 1, 1, 0.5));
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (const auto& s : segs) {
    const auto m = to_word_attention(s, {0, 0}, true);
    for (Eigen::Index r = 0; r < m.matrix.rows(); ++r) worst = std::max(worst, std::abs(m.matrix.row(r).sum() - 1.0));
  }
  const double secs = seconds_since(t0);
  o.require(worst <= 1e-4, "row sum off by " + fmt("%.3g", worst));
  o.require(secs < 10.0, "took " + fmt("%.2f", secs) + " s");
  if (o.ok) o.detail = "max row deviation " + fmt("%.2e", worst) + ", " + fmt("%.3f", secs) + " s";
  return o;
}

// P2: no-split identity and merge-order agreement.
Outcome p2() {
  Outcome o;
  std::mt19937_64 rng(102);
  for (int i = 0; i < 200 && o.ok; ++i) {
    auto s = fixtures::random_segment(rng, 1 + i % 20, 1, 1, 0.0);
    const auto m = to_word_attention(s, {0, 0});
    const std::size_t n = m.n_words();
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        o.require(m.matrix(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) ==
                      static_cast<double>(s.at(0, 0, a + 1, b + 1)),
                  "no-split matrix differs from token matrix");
  }
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const auto s = fixtures::random_segment(rng, 1 + i % 25, 1, 1, 0.6);
    for (bool keep : {false, true}) {
      WordMapOptions a, b;
      a.keep_special = b.keep_special = keep;
      b.order = MergeOrder::RowsFirst;
      worst = std::max(worst, (to_word_attention(s, {0, 0}, a).matrix - to_word_attention(s, {0, 0}, b).matrix)
                                  .cwiseAbs()
                                  .maxCoeff());
    }
  }
  o.require(worst <= 1e-7, "merge orders differ by " + fmt("%.3g", worst));
  if (o.ok) o.detail = "merge-order gap " + fmt("%.2e", worst);
  return o;
}

// P3: offset heads and the exhaustive offset search.
Outcome p3() {
  Outcome o;
  const auto corpus = random_dep_corpus(50, 2, 30, 103);
  const auto set = synth({Behavior::offset_by(1), Behavior::offset_by(-1)}, 1, corpus, 0.3, 103);
  const double next = offset_stats(set, 1)[0].value, prev = offset_stats(set, -1)[1].value;
  o.require(next >= 0.99 && prev >= 0.99, "offset shares " + fmt("%.4f", next) + " / " + fmt("%.4f", prev));
  int compared = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto c = random_dep_corpus(1 + seed % 6, 2, 12, 1000 + seed);
    const auto b = offset_baseline(c, std::nullopt, 10);
    const auto r = oracle::offset_search(c, std::nullopt, 10);
    o.require(b.best_offset == r.offset && b.correct == r.count.correct && b.support == r.count.total,
              "offset baseline differs from oracle on corpus " + std::to_string(seed));
    ++compared;
  }
  if (o.ok) o.detail = "shares " + fmt("%.4f", next) + "/" + fmt("%.4f", prev) + ", " + std::to_string(compared) + " corpora";
  return o;
}

// P4: gold head is perfect, chance heads equal the tie-aware oracle.
Outcome p4() {
  Outcome o;
  const auto corpus = random_dep_corpus(60, 2, 25, 104);
  const auto set = synth({Behavior::gold_head(0.9), Behavior::uniform(), Behavior::noise(4), Behavior::sep_sink()}, 1,
                         corpus, 0.3, 104);
  const auto gold = eval_dependency(set, corpus, {0, 0}, Direction::DepToHead);
  o.require(gold.all.correct == gold.all.support && gold.all.support > 0, "gold head accuracy below 1");
  for (std::size_t h = 1; h < 4; ++h) {
    for (bool d2h : {true, false}) {
      const auto e = eval_dependency(set, corpus, {0, h}, d2h ? Direction::DepToHead : Direction::HeadToDep);
      const auto r = oracle::dependency(set, corpus, 0, h, d2h);
      o.require(e.all.correct == r.correct && e.all.support == r.total,
                "head " + std::to_string(h) + " differs from oracle");
    }
  }
  if (o.ok) o.detail = "gold head " + std::to_string(gold.all.correct) + "/" + std::to_string(gold.all.support);
  return o;
}

// P5: attention-only probe learns the gold head.
Outcome p5() {
  Outcome o;
  const auto corpus = random_dep_corpus(300, 3, 15, 105);
  const auto set = synth({Behavior::uniform(), Behavior::noise(5), Behavior::offset_by(1), Behavior::offset_by(-1),
                          Behavior::gold_head(0.9), Behavior::sep_sink()},
                         2, corpus, 0.2, 105);
  const auto t0 = std::chrono::steady_clock::now();
  const auto all = build_probe_data(&set, corpus, nullptr);
  const std::vector<ProbeSentence> train(all.begin(), all.begin() + 200), dev(all.begin() + 200, all.end());
  AttnOnlyProbe probe(set.total_heads());
  TrainConfig cfg;
  cfg.epochs = 20;
  const auto log = train_probe(probe, std::span<const ProbeSentence>(train), cfg, std::span<const ProbeSentence>(dev));
  const double secs = seconds_since(t0);
  double best = 0.0;
  for (const auto& e : log) best = std::max(best, e.dev_uas.value_or(0.0));
  o.require(best >= 0.95, "dev UAS " + fmt("%.4f", best));
  o.require(secs < 60.0, "took " + fmt("%.1f", secs) + " s");
  if (o.ok) o.detail = "dev UAS " + fmt("%.4f", best) + " in " + fmt("%.2f", secs) + " s";
  return o;
}

std::vector<WordAttentionMatrix> heads_of(const Segment& s) {
  std::vector<WordAttentionMatrix> out;
  for (std::size_t k = 0; k < s.n_heads; ++k) out.push_back(to_word_attention(s, {0, k}));
  return out;
}

std::vector<int> random_gold(std::mt19937_64& rng, std::size_t n) {
  std::vector<int> gold(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::uniform_int_distribution<std::size_t> pick(0, n - 2);
    std::size_t g = pick(rng);
    gold[j] = static_cast<int>(g >= j ? g + 1 : g);
  }
  return gold;
}

void randomize_theta(Eigen::VectorXd& theta, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = n(rng);
}

EmbeddingTable random_table(std::mt19937_64& rng, const std::vector<std::string>& words, std::size_t d) {
  std::normal_distribution<double> n(0.0, 1.0);
  EmbeddingTable t(d);
  for (const auto& w : words) {
    std::vector<double> v(d);
    for (auto& x : v) x = n(rng);
    t.insert(w, v);
  }
  return t;
}

// P6: finite-difference gradient checks.
Outcome p6() {
  Outcome o;
  std::mt19937_64 rng(106);
  double worst = 0.0;
  for (int inst = 0; inst < 10; ++inst) {
    std::vector<ProbeSentence> a, w, d;
    for (int s = 0; s < 3; ++s) {
      const std::size_t n = 2 + (inst + s) % 7;
      std::vector<std::string> words;
      const auto seg = fixtures::random_segment(rng, n, 1, 3, 0.3, &words);
      const auto heads = heads_of(seg);
      const auto emb = random_table(rng, words, 3);
      a.push_back(probe_sentence(heads, random_gold(rng, n)));
      w.push_back(probe_sentence(heads, random_gold(rng, n), &emb));
      auto plain = probe_sentence(heads, random_gold(rng, n), &emb);
      d.push_back(plain);
    }
    AttnOnlyProbe pa(3);
    AttnWordsProbe pw(3, 3);
    DistanceWordsBaseline pd(3, 6);
    randomize_theta(pa.theta, rng, 0.5);
    randomize_theta(pw.theta, rng, 0.5);
    pd.initialize(static_cast<std::uint64_t>(inst));
    randomize_theta(pd.theta, rng, 0.3);
    for (double e : {checks::gradient_error(pa, a, 1e-3), checks::gradient_error(pw, w, 1e-3),
                     checks::gradient_error(pd, d, 1e-3)}) {
      worst = std::max(worst, e);
    }
  }
  o.require(worst <= 1e-3, "relative error " + fmt("%.3g", worst));
  if (o.ok) o.detail = "max relative error " + fmt("%.2e", worst) + " over 30 instances";
  return o;
}

// P7: probe distributions and the attention-only reduction.
Outcome p7() {
  Outcome o;
  std::mt19937_64 rng(107);
  double sum_gap = 0.0, reduce_gap = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> words;
    const auto seg = fixtures::random_segment(rng, 2 + trial % 20, 1, 4, 0.3, &words);
    const auto heads = heads_of(seg);
    const auto emb = random_table(rng, words, 2);
    EmbeddingTable ones(1);
    for (const auto& w : words) ones.insert(w, {1.0});
    AttnOnlyProbe pa(4);
    AttnWordsProbe pw(4, 2), pw1(4, 1);
    randomize_theta(pa.theta, rng, 3.0);
    randomize_theta(pw.theta, rng, 3.0);
    randomize_theta(pw1.theta, rng, 1.0);
    AttnOnlyProbe reduced(4);
    for (Eigen::Index k = 0; k < 4; ++k) {
      reduced.w()[k] = pw1.W()(k, 0) + pw1.W()(k, 1);
      reduced.u()[k] = pw1.U()(k, 0) + pw1.U()(k, 1);
    }
    for (std::size_t j = 0; j < words.size(); ++j) {
      sum_gap = std::max(sum_gap, std::abs(score_attn_only(pa, heads, j).sum() - 1.0));
      sum_gap = std::max(sum_gap, std::abs(score_attn_words(pw, heads, emb, j).sum() - 1.0));
      reduce_gap = std::max(
          reduce_gap, (score_attn_words(pw1, heads, ones, j) - score_attn_only(reduced, heads, j)).cwiseAbs().maxCoeff());
    }
  }
  o.require(sum_gap <= 1e-9, "distribution sum off by " + fmt("%.3g", sum_gap));
  o.require(reduce_gap <= 1e-12, "reduction gap " + fmt("%.3g", reduce_gap));
  if (o.ok) o.detail = "sum gap " + fmt("%.2e", sum_gap) + ", reduction gap " + fmt("%.2e", reduce_gap);
  return o;
}

// P8: JS properties and head distances against the naive oracle.
Outcome p8() {
  Outcome o;
  std::mt19937_64 rng(108);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double sym = 0.0, self = 0.0, over = -1.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + trial % 40;
    std::vector<double> p(n), q(n);
    double sp = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sp += (p[i] = u(rng) < 0.3 ? 0.0 : u(rng));
      sq += (q[i] = u(rng) < 0.3 ? 0.0 : u(rng));
    }
    if (sp == 0.0) p[0] = sp = 1.0;
    if (sq == 0.0) q[n - 1] = sq = 1.0;
    for (auto& v : p) v /= sp;
    for (auto& v : q) v /= sq;
    const double pq = js_divergence(p, q);
    sym = std::max(sym, std::abs(pq - js_divergence(q, p)));
    self = std::max(self, std::abs(js_divergence(p, p)));
    over = std::max(over, pq - std::log(2.0));
  }
  o.require(sym <= 1e-12, "asymmetry " + fmt("%.3g", sym));
  o.require(self <= 1e-12, "JS(p,p) = " + fmt("%.3g", self));
  o.require(over <= 1e-9, "JS exceeds ln 2 by " + fmt("%.3g", over));
  double gap = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    ExtractSet set;
    set.n_layers = 2;
    set.n_heads = 2;
    for (int s = 0; s < 4; ++s) set.segments.push_back(fixtures::random_segment(rng, 1 + (trial + s) % 10, 2, 2, 0.3));
    gap = std::max(gap, (head_distances(set).d - checks::naive_distances(set)).cwiseAbs().maxCoeff());
  }
  o.require(gap <= 1e-9, "head distances differ from oracle by " + fmt("%.3g", gap));
  if (o.ok) o.detail = "asymmetry " + fmt("%.1e", sym) + ", oracle gap " + fmt("%.1e", gap);
  return o;
}

double pair_error(const Eigen::MatrixXd& d, const Eigen::MatrixXd& x) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.rows(); ++j) worst = std::max(worst, std::abs((x.row(i) - x.row(j)).norm() - d(i, j)));
  return worst;
}

// P9: SMACOF monotone, planar recovery, equilateral triangle.
Outcome p9() {
  Outcome o;
  std::mt19937_64 rng(109);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::normal_distribution<double> nrm(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index n = 3 + trial % 15;
    HeadDistanceMatrix m{1, static_cast<std::size_t>(n), Eigen::MatrixXd::Zero(n, n)};
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) m.d(i, j) = m.d(j, i) = u(rng);
    const auto e = mds_embed(m);
    for (std::size_t k = 1; k < e.stress_history.size(); ++k)
      o.require(e.stress_history[k] <= e.stress_history[k - 1] + 1e-9, "stress increased");
  }
  double worst_stress = 0.0, worst_pair = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd x(3 + trial, 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nrm(rng);
    HeadDistanceMatrix m{1, static_cast<std::size_t>(x.rows()), Eigen::MatrixXd::Zero(x.rows(), x.rows())};
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < x.rows(); ++j) m.d(i, j) = (x.row(i) - x.row(j)).norm();
    const auto e = mds_embed(m);
    worst_stress = std::max(worst_stress, e.stress);
    worst_pair = std::max(worst_pair, pair_error(m.d, e.coordinates));
  }
  o.require(worst_stress <= 1e-6, "normalized stress " + fmt("%.3g", worst_stress));
  o.require(worst_pair <= 1e-3, "pairwise error " + fmt("%.3g", worst_pair));
  HeadDistanceMatrix tri{1, 3, Eigen::MatrixXd::Ones(3, 3) - Eigen::MatrixXd::Identity(3, 3)};
  const double tri_err = pair_error(tri.d, mds_embed(tri).coordinates);
  o.require(tri_err <= 1e-6, "equilateral error " + fmt("%.3g", tri_err));
  if (o.ok) o.detail = "stress " + fmt("%.1e", worst_stress) + ", pair error " + fmt("%.1e", worst_pair);
  return o;
}

// P10: coreference evaluation and baselines.
Outcome p10() {
  Outcome o;
  const auto doc = checks::sieve_doc();
  const auto b = coref_baselines({doc});
  o.require(b.rule_sieve.all.correct == 4 && b.rule_sieve.all.total == 5, "sieve trace: rule-based");
  o.require(b.nearest.all.correct == 3 && b.head_match.all.correct == 4, "sieve trace: nearest / head match");
  o.require(rule_sieve_antecedent(doc, 1) == 0 && rule_sieve_antecedent(doc, 3) == 2 &&
                rule_sieve_antecedent(doc, 4) == 3 && rule_sieve_antecedent(doc, 5) == 3 &&
                rule_sieve_antecedent(doc, 6) == 3,
            "sieve trace: antecedents");

  std::mt19937_64 rng(110);
  static const std::vector<std::string> vocab = {"he", "she", "it", "they", "John", "Mary", "the", "man",
                                                 "bank", "her", "him", "company", "I", "we", "Mr."};
  CorefCorpus corpus{doc};
  ExtractSet set;
  set.n_layers = 1;
  set.n_heads = 3;
  {
    auto seg = fixtures::simple_segment(doc.tokens, 1, 3);
    fixtures::randomize(seg, rng);
    set.segments.push_back(seg);
  }
  for (int d = 0; d < 150; ++d) {
    CorefDoc x;
    const std::size_t n = 3 + d % 25;
    for (std::size_t i = 0; i < n; ++i) x.tokens.push_back(vocab[rng() % vocab.size()]);
    const std::size_t mentions = 2 + rng() % 7;
    for (std::size_t k = 0; k < mentions; ++k) {
      Mention m;
      m.start = rng() % n;
      m.end = std::min(n - 1, m.start + rng() % 3);
      m.head_index = m.end;
      m.cluster_id = static_cast<int>(rng() % 4);
      m.mention_type = guess_mention_type(x.tokens, m.head_index);
      x.mentions.push_back(m);
    }
    sort_mentions(x.mentions);
    auto seg = fixtures::simple_segment(x.tokens, 1, 3);
    fixtures::randomize(seg, rng, d % 2 == 0);
    corpus.push_back(x);
    set.segments.push_back(seg);
  }
  for (std::size_t h = 0; h < 3; ++h) {
    const auto s = eval_coref(set, corpus, {0, h});
    const auto r = oracle::coref(set, corpus, 0, h);
    o.require(s.all.correct == r.all.correct && s.all.total == r.all.total, "eval_coref differs from oracle");
  }
  const auto all = coref_baselines(corpus);
  const std::pair<oracle::Baseline, const CorefScores*> cases[] = {{oracle::Baseline::Nearest, &all.nearest},
                                                                   {oracle::Baseline::HeadMatch, &all.head_match},
                                                                   {oracle::Baseline::RuleSieve, &all.rule_sieve}};
  for (const auto& [which, sc] : cases) {
    const auto r = oracle::coref_baseline(corpus, which);
    o.require(sc->all.correct == r.all.correct && sc->all.total == r.all.total, "baseline differs from oracle");
  }
  if (o.ok) o.detail = "trace 4/5 rule-based, " + std::to_string(corpus.size()) + " docs match oracles";
  return o;
}

// P11: entropy bounds and category partition.
Outcome p11() {
  Outcome o;
  for (std::size_t t : {2u, 7u, 128u, 512u}) {
    const std::vector<double> uniform(t, 1.0 / static_cast<double>(t));
    o.require(std::abs(entropy(uniform) - std::log(static_cast<double>(t))) <= 1e-9, "uniform entropy");
    std::vector<double> one_hot(t, 0.0);
    one_hot[t / 2] = 1.0;
    o.require(entropy(one_hot) == 0.0, "one-hot entropy");
  }
  const auto corpus = random_dep_corpus(40, 2, 20, 111);
  const auto set = synth({Behavior::noise(1), Behavior::gold_head(0.6), Behavior::sep_sink(), Behavior::uniform(),
                          Behavior::offset_by(1), Behavior::offset_by(-1)},
                         2, corpus, 0.3, 111);
  std::vector<double> total(set.total_heads(), 0.0);
  for (auto c : kAllCategories) {
    const auto cs = category_stats(set, c);
    for (std::size_t k = 0; k < total.size(); ++k) total[k] += cs.mass[k].value;
  }
  double worst = 0.0;
  for (double v : total) worst = std::max(worst, std::abs(v - 1.0));
  o.require(worst <= 1e-4, "category shares sum off by " + fmt("%.3g", worst));
  if (o.ok) o.detail = "partition gap " + fmt("%.2e", worst);
  return o;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Numeric;
}

// P12: interchange round trip, rejection codes, reproducible CLI output.
Outcome p12() {
  Outcome o;
  std::mt19937_64 rng(112);
  ExtractSet set;
  set.n_layers = 3;
  set.n_heads = 2;
  for (int i = 0; i < 10; ++i) set.segments.push_back(fixtures::random_segment(rng, 1 + i * 3, 3, 2, 0.4));
  const auto bytes = encode_extract(set);
  o.require(encode_extract(decode_extract(bytes)) == bytes, "round trip is not bit-identical");
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  o.require(code_of([&] { decode_extract(bad_magic); }) == ErrorCode::Format, "bad magic code");
  o.require(code_of([&] { decode_extract(bytes.substr(0, bytes.size() - 5)); }) == ErrorCode::CorruptFile,
            "truncation code");
  auto scaled = set;
  for (auto& v : scaled.segments[2].row({1, 1}, 1)) v *= 3.0f;
  o.require(code_of([&] { decode_extract(encode_extract(scaled)); }) == ErrorCode::Validation, "validation code");

  const auto root = fixtures::scratch_dir("acceptance_p12");
  auto run = [&](const fs::path& dir) {
    std::ostringstream out, err;
    int rc = cli::run({"synth", "--out", dir.string(), "--seed", "42"}, out, err);
    const auto extract = (dir / "extract.atnx").string(), corpus = (dir / "corpus.conllu").string();
    rc |= cli::run({"probe-heads", "--extract", extract, "--dep-corpus", corpus, "--out", (dir / "h").string()}, out, err);
    rc |= cli::run({"cluster", "--extract", extract, "--out", (dir / "c").string()}, out, err);
    rc |= cli::run({"train-probe", "--extract", extract, "--dep-corpus", corpus, "--epochs", "3", "--out",
                    (dir / "t").string()},
                   out, err);
    return rc;
  };
  o.require(run(root / "a") == 0 && run(root / "b") == 0, "CLI run failed");
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    if (!entry.is_regular_file() || entry.path().filename() == "manifest.json") continue;
    const auto twin = root / "b" / fs::relative(entry.path(), root / "a");
    o.require(read_file_bytes(entry.path().string()) == read_file_bytes(twin.string()),
              "output differs: " + entry.path().filename().string());
    ++files;
  }
  if (o.ok) o.detail = std::to_string(bytes.size()) + "-byte round trip, " + std::to_string(files) + " CLI outputs identical";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"P1", p1}, {"P2", p2}, {"P3", p3}, {"P4", p4},   {"P5", p5},   {"P6", p6},
      {"P7", p7}, {"P8", p8}, {"P9", p9}, {"P10", p10}, {"P11", p11}, {"P12", p12}};
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::printf("%-4s %s  %s\n", name, o.ok ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    if (!o.ok) ++failures;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
