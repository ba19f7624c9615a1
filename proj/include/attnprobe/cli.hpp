#pragma once

// Command-line front end. Every subcommand writes its reports plus a
// manifest.json (config, input digests, toolkit version) into --out.
// Failures print one JSON line {"error": code, "message": ...} to stderr.
// Exit codes: 0 ok, 1 failure, 2 usage error.

#include <openssl/evp.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "attnprobe/cluster.hpp"
#include "attnprobe/corpora.hpp"
#include "attnprobe/error.hpp"
#include "attnprobe/headprobe.hpp"
#include "attnprobe/interchange.hpp"
#include "attnprobe/probeclf.hpp"
#include "attnprobe/surface.hpp"
#include "attnprobe/synth.hpp"

namespace attnprobe::cli {

inline constexpr std::string_view kToolkitVersion = "0.1.0";

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::Io, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xf]);
  }
  return out;
}

struct RunConfig {
  std::string extract, dep_corpus, coref_corpus, embeddings, out_dir;
  std::string dev_extract, dev_corpus, grad_report, checkpoint, tags;
  std::string kind = "attn";
  std::string behaviors = "GOLD_HEAD:0.9,UNIFORM,OFFSET:1,OFFSET:-1";
  std::string continuation_marker = "##";
  bool keep_special = false;
  bool raw_sum = false;
  bool possessive_equivalence = false;
  bool all_words = false;
  bool ignore_case = false;
  bool plain_sgd = false;
  int offset_range = 10;
  std::uint64_t seed = 0;
  std::size_t epochs = 20;
  double lr = 0.1;
  double l2 = 1e-5;
  std::size_t layers = 2;
  std::size_t sentences = 50;
  std::size_t min_len = 4;
  std::size_t max_len = 12;
  double split_prob = 0.2;
  unsigned threads = 1;
};

namespace detail {

class Session {
 public:
  Session(std::string subcommand, const RunConfig& cfg, nlohmann::json config)
      : subcommand_(std::move(subcommand)), cfg_(cfg), config_(std::move(config)) {}

  void input(const std::string& path) {
    if (!path.empty()) inputs_[path] = sha256_hex(read_file_bytes(path));
  }

  void note(const std::string& key, nlohmann::json value) { notes_[key] = std::move(value); }

  std::filesystem::path out_path(const std::string& name) const {
    return std::filesystem::path(cfg_.out_dir) / name;
  }

  void write(const std::string& name, const std::function<void(std::ostream&)>& body) {
    std::ostringstream ss;
    body(ss);
    write_bytes(name, ss.str());
  }

  void write_bytes(const std::string& name, const std::string& bytes) {
    std::ofstream f(out_path(name), std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::Io, "cannot write " + out_path(name).string());
    f << bytes;
    outputs_.push_back(name);
  }

  void finish() {
    if (cfg_.out_dir.empty()) return;
    nlohmann::json m{{"tool", "attnprobe"},
                     {"version", std::string(kToolkitVersion)},
                     {"subcommand", subcommand_},
                     {"config", config_},
                     {"inputs", inputs_},
                     {"outputs", outputs_}};
    if (!notes_.empty()) m["notes"] = notes_;
    std::ofstream f(out_path("manifest.json"), std::ios::trunc);
    if (!f) throw Error(ErrorCode::Io, "cannot write manifest");
    f << m.dump(2) << '\n';
  }

 private:
  std::string subcommand_;
  const RunConfig& cfg_;
  nlohmann::json config_;
  nlohmann::json inputs_ = nlohmann::json::object();
  nlohmann::json notes_ = nlohmann::json::object();
  std::vector<std::string> outputs_;
};

inline void require(const std::string& value, const char* flag) {
  if (value.empty()) throw CLI::RequiredError(flag);
}

inline AlignOptions align_options(const RunConfig& c) {
  return {c.continuation_marker, c.ignore_case};
}

inline std::map<std::string, std::string> load_tags(const std::string& path) {
  std::map<std::string, std::string> tags;
  if (path.empty()) return tags;
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(ErrorCode::Parse, "tag line needs 'head,tag': " + line);
    tags[line.substr(0, comma)] = line.substr(comma + 1);
  }
  return tags;
}

// --- subcommands -------------------------------------------------------------

inline void cmd_surface(const RunConfig& c, Session& s) {
  require(c.extract, "--extract");
  s.input(c.extract);
  const auto set = load_extract(c.extract);
  s.write("surface.csv", [&](std::ostream& out) {
    write_head_stats_header(out);
    for (int off : {-1, 0, 1}) {
      write_head_stats(out, "offset_" + std::string(off > 0 ? "+" : "") + std::to_string(off), offset_stats(set, off));
    }
    for (auto cat : kAllCategories) {
      const auto cs = category_stats(set, cat);
      const std::string name(to_string(cat));
      write_head_stats(out, "attn_" + name, cs.mass);
      write_head_stats(out, "attn_" + name + "_from_" + name, cs.from_category);
      write_head_stats(out, "attn_" + name + "_from_other", cs.from_other);
    }
    write_head_stats(out, "entropy", head_entropy(set));
  });
  s.write("cls_entropy.csv", [&](std::ostream& out) {
    out << "layer,cls_entropy\n";
    const auto e = cls_entropy(set);
    for (std::size_t l = 0; l < e.size(); ++l) out << (l + 1) << ',' << format_value(e[l]) << '\n';
  });
}

inline void cmd_grad_report(const RunConfig& c, Session& s) {
  require(c.grad_report, "--grad-report");
  s.input(c.grad_report);
  std::optional<std::size_t> layers;
  if (!c.extract.empty()) {
    s.input(c.extract);
    layers = load_extract(c.extract).n_layers;
  }
  const auto curves = aggregate_gradients(load_gradient_report(c.grad_report), layers);
  s.write("gradients.csv", [&](std::ostream& out) { write_gradient_curves(out, curves); });
}

inline void cmd_probe_heads(const RunConfig& c, Session& s) {
  require(c.extract, "--extract");
  require(c.dep_corpus, "--dep-corpus");
  s.input(c.extract);
  s.input(c.dep_corpus);
  const auto set = load_extract(c.extract);
  const auto corpus = load_dep_corpus(c.dep_corpus);
  DependencyOptions opts;
  opts.align = align_options(c);
  opts.possessive_equivalence = c.possessive_equivalence;
  const auto evals = eval_all_heads(set, corpus, opts);
  s.write("relations.csv", [&](std::ostream& out) {
    write_relation_table(out, relation_table(evals, corpus, c.offset_range));
  });
  s.write("head_scores.csv", [&](std::ostream& out) { write_head_scores(out, evals); });
}

inline void cmd_probe_coref(const RunConfig& c, Session& s) {
  require(c.extract, "--extract");
  require(c.coref_corpus, "--coref-corpus");
  s.input(c.extract);
  s.input(c.coref_corpus);
  const auto set = load_extract(c.extract);
  auto corpus = load_coref_corpus(c.coref_corpus);
  if (corpus.size() != set.segments.size()) {
    throw Error(ErrorCode::Alignment, "extract has " + std::to_string(set.segments.size()) +
                                          " segments but corpus has " + std::to_string(corpus.size()) + " documents");
  }
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto t = truncate_doc(corpus[i], set.segments[i].n_words());
    dropped += t.dropped_mentions;
    corpus[i] = std::move(t.doc);
  }
  s.note("dropped_mentions", dropped);
  CorefOptions opts;
  opts.align = align_options(c);
  opts.candidates = c.all_words ? CorefCandidates::AllWords : CorefCandidates::MentionHeads;

  std::vector<std::pair<HeadId, CorefScores>> heads;
  for (std::size_t k = 0; k < set.total_heads(); ++k) {
    const HeadId h = HeadId::from_flat(k, set.n_heads);
    heads.emplace_back(h, eval_coref(set, corpus, h, opts));
  }
  const auto baselines = coref_baselines(corpus);
  std::size_t best = 0;
  for (std::size_t k = 1; k < heads.size(); ++k) {
    const auto& a = heads[k].second.all;
    const auto& b = heads[best].second.all;
    if (a.correct * b.total > b.correct * a.total) best = k;
  }
  s.write("coref.csv", [&](std::ostream& out) {
    write_coref_header(out);
    write_coref_row(out, "Nearest", baselines.nearest);
    write_coref_row(out, "Head match", baselines.head_match);
    write_coref_row(out, "Rule-based", baselines.rule_sieve);
    if (!heads.empty()) write_coref_row(out, "Head " + heads[best].first.display(), heads[best].second);
  });
  s.write("coref_heads.csv", [&](std::ostream& out) {
    write_coref_header(out);
    for (const auto& [h, sc] : heads) write_coref_row(out, h.display(), sc);
  });
}

inline ProbeDataOptions probe_options(const RunConfig& c, bool with_attention) {
  ProbeDataOptions o;
  o.root_mode = c.keep_special ? RootMode::ClsColumn : RootMode::Exclude;
  o.align = align_options(c);
  o.with_attention = with_attention;
  return o;
}

inline TrainConfig train_config(const RunConfig& c) {
  TrainConfig t;
  t.learning_rate = c.lr;
  t.epochs = c.epochs;
  t.l2 = c.l2;
  t.seed = c.seed;
  t.adaptive = !c.plain_sgd;
  return t;
}

struct LoadedData {
  std::vector<ProbeSentence> data;
  DepCorpus corpus;
};

inline LoadedData load_probe_data(const RunConfig& c, Session& s, const std::string& extract,
                                  const std::string& corpus_path, const EmbeddingTable* emb, bool with_attention) {
  LoadedData out;
  s.input(corpus_path);
  out.corpus = load_dep_corpus(corpus_path);
  std::optional<ExtractSet> set;
  if (with_attention) {
    require(extract, "--extract");
    s.input(extract);
    set = load_extract(extract);
  }
  out.data = build_probe_data(set ? &*set : nullptr, out.corpus, emb, probe_options(c, with_attention));
  return out;
}

inline void cmd_train_probe(const RunConfig& c, Session& s) {
  require(c.dep_corpus, "--dep-corpus");
  const bool attention = c.kind != "distance-words";
  const bool words = c.kind != "attn";
  if (c.kind != "attn" && c.kind != "attn-words" && c.kind != "distance-words") {
    throw CLI::ValidationError("--kind", "must be attn, attn-words or distance-words");
  }
  std::optional<EmbeddingTable> emb;
  if (words) {
    require(c.embeddings, "--embeddings");
    s.input(c.embeddings);
    emb = load_embeddings(c.embeddings);
  }
  const EmbeddingTable* e = emb ? &*emb : nullptr;
  const auto train = load_probe_data(c, s, c.extract, c.dep_corpus, e, attention);
  std::optional<LoadedData> dev;
  if (!c.dev_corpus.empty()) dev = load_probe_data(c, s, c.dev_extract, c.dev_corpus, e, attention);
  const std::span<const ProbeSentence> dev_span = dev ? std::span<const ProbeSentence>(dev->data)
                                                      : std::span<const ProbeSentence>{};
  const auto cfg = train_config(c);

  std::vector<EpochLog> log;
  ProbeCheckpoint ckpt;
  double dev_uas = 0.0;
  auto run = [&](auto model) {
    log = train_probe(model, std::span<const ProbeSentence>(train.data), cfg, dev_span);
    ckpt = checkpoint_of(model);
    if (dev) dev_uas = eval_uas(model, dev_span);
  };
  if (c.kind == "attn") {
    const std::size_t n = train.data.empty() ? 0 : train.data.front().n_heads();
    run(AttnOnlyProbe(n));
  } else if (c.kind == "attn-words") {
    const std::size_t n = train.data.empty() ? 0 : train.data.front().n_heads();
    run(AttnWordsProbe(n, e->dim()));
  } else {
    DistanceWordsBaseline model(e->dim());
    model.initialize(c.seed);
    run(model);
  }
  s.write_bytes("probe.ckpt", encode_checkpoint(ckpt));
  s.write("train_log.csv", [&](std::ostream& out) { write_train_log(out, log); });
  if (dev) {
    s.write("probe_results.csv", [&](std::ostream& out) {
      out << "model,uas\n";
      out << "Right-branching," << format_fixed(right_branching(dev->corpus), 4) << '\n';
      out << c.kind << ',' << format_fixed(dev_uas, 4) << '\n';
    });
  }
}

inline void cmd_eval_probe(const RunConfig& c, Session& s) {
  require(c.checkpoint, "--checkpoint");
  require(c.dep_corpus, "--dep-corpus");
  s.input(c.checkpoint);
  const auto ckpt = load_checkpoint(c.checkpoint);
  std::optional<EmbeddingTable> emb;
  if (ckpt.kind != AttnOnlyProbe::kKind) {
    require(c.embeddings, "--embeddings");
    s.input(c.embeddings);
    emb = load_embeddings(c.embeddings);
  }
  const EmbeddingTable* e = emb ? &*emb : nullptr;
  const bool attention = ckpt.kind != DistanceWordsBaseline::kKind;
  const auto data = load_probe_data(c, s, c.extract, c.dep_corpus, e, attention);
  const std::span<const ProbeSentence> span(data.data);
  double uas = 0.0;
  std::string name;
  if (ckpt.kind == AttnOnlyProbe::kKind) {
    uas = eval_uas(restore<AttnOnlyProbe>(ckpt), span);
    name = "attn";
  } else if (ckpt.kind == AttnWordsProbe::kKind) {
    uas = eval_uas(restore<AttnWordsProbe>(ckpt), span);
    name = "attn-words";
  } else {
    uas = eval_uas(restore<DistanceWordsBaseline>(ckpt), span);
    name = "distance-words";
  }
  s.write("probe_eval.csv", [&](std::ostream& out) {
    out << "model,uas\n";
    out << "Right-branching," << format_fixed(right_branching(data.corpus), 4) << '\n';
    out << name << ',' << format_fixed(uas, 4) << '\n';
  });
}

inline void cmd_cluster(const RunConfig& c, Session& s) {
  require(c.extract, "--extract");
  s.input(c.extract);
  s.input(c.tags);
  const auto set = load_extract(c.extract);
  const auto tags = load_tags(c.tags);
  DistanceOptions opts;
  opts.raw_sum = c.raw_sum;
  opts.threads = c.threads;
  const auto dist = head_distances(set, opts);
  const auto emb = mds_embed(dist);
  s.note("normalized_stress", emb.stress);
  s.write("distances.csv", [&](std::ostream& out) { write_distance_csv(out, dist); });
  s.write("mds.csv", [&](std::ostream& out) { write_embedding_csv(out, dist, emb, tags); });
  s.write("mds.svg", [&](std::ostream& out) { write_embedding_svg(out, dist, emb, tags); });
}

inline void cmd_synth(const RunConfig& c, Session& s) {
  SynthSpec spec;
  std::stringstream list(c.behaviors);
  std::string item;
  while (std::getline(list, item, ',')) {
    if (!item.empty()) spec.behaviors.push_back(parse_behavior(item));
  }
  if (c.layers == 0 || spec.behaviors.size() % c.layers != 0) {
    throw Error(ErrorCode::InvalidArgument, "behavior count must be a multiple of --layers");
  }
  spec.n_layers = c.layers;
  spec.n_heads = spec.behaviors.size() / c.layers;
  spec.split_probability = c.split_prob;
  spec.continuation_marker = c.continuation_marker;
  spec.seed = c.seed;

  std::vector<SynthSentence> source;
  std::optional<DepCorpus> corpus;
  if (!c.coref_corpus.empty()) {
    s.input(c.coref_corpus);
    source = sentences_from(load_coref_corpus(c.coref_corpus));
  } else {
    if (!c.dep_corpus.empty()) {
      s.input(c.dep_corpus);
      corpus = load_dep_corpus(c.dep_corpus);
    } else {
      corpus = random_dep_corpus(c.sentences, c.min_len, c.max_len, c.seed);
    }
    source = sentences_from(*corpus);
  }
  const auto set = generate(spec, source);
  s.write_bytes("extract.atnx", encode_extract(set));
  if (corpus) s.write("corpus.conllu", [&](std::ostream& out) { write_dep_corpus(out, *corpus); });
  nlohmann::json behaviors = nlohmann::json::array();
  for (const auto& b : spec.behaviors) behaviors.push_back(b.describe());
  s.note("behaviors", behaviors);
}

inline void cmd_validate(const RunConfig& c, Session& s, std::ostream& out) {
  bool any = false;
  auto check = [&](const std::string& path, const char* what, const std::function<std::string()>& body) {
    if (path.empty()) return;
    any = true;
    s.input(path);
    out << "ok " << what << ' ' << path << ": " << body() << '\n';
  };
  check(c.extract, "extract", [&] {
    const auto set = load_extract(c.extract);
    return std::to_string(set.segments.size()) + " segments, " + std::to_string(set.n_layers) + "x" +
           std::to_string(set.n_heads) + " heads";
  });
  check(c.dep_corpus, "dep-corpus", [&] { return std::to_string(load_dep_corpus(c.dep_corpus).size()) + " sentences"; });
  check(c.coref_corpus, "coref-corpus",
        [&] { return std::to_string(load_coref_corpus(c.coref_corpus).size()) + " documents"; });
  check(c.embeddings, "embeddings", [&] {
    const auto t = load_embeddings(c.embeddings);
    return std::to_string(t.size()) + " entries, dim " + std::to_string(t.dim());
  });
  check(c.grad_report, "grad-report",
        [&] { return std::to_string(load_gradient_report(c.grad_report).n_layers()) + " layers"; });
  check(c.checkpoint, "checkpoint",
        [&] { return std::to_string(load_checkpoint(c.checkpoint).theta.size()) + " parameters"; });
  if (!c.extract.empty() && !c.dep_corpus.empty()) {
    align_dep_corpus(load_extract(c.extract), load_dep_corpus(c.dep_corpus), align_options(c));
    out << "ok alignment extract/dep-corpus\n";
  }
  if (!any) throw CLI::ValidationError("validate", "give at least one input to check");
}

inline nlohmann::json option_record(const CLI::App& sub) {
  nlohmann::json j = nlohmann::json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->count() == 0 || opt->get_name() == "--help") continue;
    const auto& results = opt->results();
    if (results.empty() || opt->get_type_size() == 0) {
      j[opt->get_name()] = true;
    } else {
      j[opt->get_name()] = results.size() == 1 ? nlohmann::json(results.front()) : nlohmann::json(results);
    }
  }
  return j;
}

inline void emit_error(std::ostream& err, std::string_view code, const std::string& message) {
  err << nlohmann::json{{"error", std::string(code)}, {"message", message}}.dump() << '\n';
}

}  // namespace detail

/// args excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig c;
  CLI::App app{"attnprobe: analysis of transformer attention maps", "attnprobe"};
  app.require_subcommand(1);

  auto inputs = [&](CLI::App* sub) {
    sub->add_option("--extract", c.extract, "ATNX1 attention extract");
    sub->add_option("--dep-corpus", c.dep_corpus, "CoNLL-U/X dependency corpus");
    sub->add_option("--coref-corpus", c.coref_corpus, "JSON-lines coreference corpus");
    sub->add_option("--embeddings", c.embeddings, "word embeddings (text format)");
    sub->add_option("--out", c.out_dir, "output directory");
    sub->add_option("--continuation-marker", c.continuation_marker, "subword continuation prefix");
    sub->add_flag("--ignore-case", c.ignore_case, "case-insensitive token/word alignment");
    sub->add_option("--seed", c.seed, "random seed");
  };

  auto* surface = app.add_subcommand("surface", "offset, token-category and entropy statistics");
  auto* grad = app.add_subcommand("grad-report", "per-layer gradient importance curves");
  auto* heads = app.add_subcommand("probe-heads", "per-head dependency accuracy with offset baselines");
  auto* coref = app.add_subcommand("probe-coref", "per-head antecedent selection with baselines");
  auto* train = app.add_subcommand("train-probe", "train an attention probe or the distance baseline");
  auto* eval = app.add_subcommand("eval-probe", "score a probe checkpoint");
  auto* cluster = app.add_subcommand("cluster", "JS head distances and 2-D MDS embedding");
  auto* synth = app.add_subcommand("synth", "generate a synthetic extract");
  auto* validate = app.add_subcommand("validate", "check input files");
  for (auto* sub : {surface, grad, heads, coref, train, eval, cluster, synth, validate}) inputs(sub);

  grad->add_option("--grad-report", c.grad_report, "gradient report JSON")->required();
  validate->add_option("--grad-report", c.grad_report, "gradient report JSON");
  heads->add_option("--offset-range", c.offset_range, "fixed-offset scan range")->check(CLI::PositiveNumber);
  heads->add_flag("--possessive-equivalence", c.possessive_equivalence, "also score poss with the 's clitic");
  coref->add_flag("--all-words", c.all_words, "argmax over all words instead of mention heads");
  for (auto* sub : {train, eval}) {
    sub->add_flag("--keep-special", c.keep_special, "attach root words to [CLS]");
  }
  train->add_option("--kind", c.kind, "attn | attn-words | distance-words");
  train->add_option("--dev-extract", c.dev_extract, "dev ATNX1 extract");
  train->add_option("--dev-corpus", c.dev_corpus, "dev dependency corpus");
  train->add_option("--epochs", c.epochs, "training epochs");
  train->add_option("--lr", c.lr, "base learning rate")->check(CLI::PositiveNumber);
  train->add_option("--l2", c.l2, "L2 coefficient");
  train->add_flag("--plain-sgd", c.plain_sgd, "decayed plain SGD instead of adaptive steps");
  eval->add_option("--checkpoint", c.checkpoint, "probe checkpoint")->required();
  validate->add_option("--checkpoint", c.checkpoint, "probe checkpoint");
  cluster->add_flag("--raw-sum-distances", c.raw_sum, "sum JS over tokens instead of averaging");
  cluster->add_option("--tags", c.tags, "CSV of head,tag labels for the scatter");
  cluster->add_option("--threads", c.threads, "worker threads for distances");
  synth->add_option("--behaviors", c.behaviors, "comma-separated head behaviors, layer-major");
  synth->add_option("--layers", c.layers, "layer count");
  synth->add_option("--sentences", c.sentences, "random sentences when no corpus is given");
  synth->add_option("--min-len", c.min_len, "minimum random sentence length");
  synth->add_option("--max-len", c.max_len, "maximum random sentence length");
  synth->add_option("--split-prob", c.split_prob, "probability a word is split in two tokens");

  std::vector<std::string> argv_storage{"attnprobe"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    detail::emit_error(err, "usage", e.what());
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    const std::string name = sub->get_name();
    if (name != "validate") detail::require(c.out_dir, "--out");
    if (!c.out_dir.empty()) std::filesystem::create_directories(c.out_dir);
    detail::Session session(name, c, detail::option_record(*sub));
    if (name == "surface") detail::cmd_surface(c, session);
    else if (name == "grad-report") detail::cmd_grad_report(c, session);
    else if (name == "probe-heads") detail::cmd_probe_heads(c, session);
    else if (name == "probe-coref") detail::cmd_probe_coref(c, session);
    else if (name == "train-probe") detail::cmd_train_probe(c, session);
    else if (name == "eval-probe") detail::cmd_eval_probe(c, session);
    else if (name == "cluster") detail::cmd_cluster(c, session);
    else if (name == "synth") detail::cmd_synth(c, session);
    else detail::cmd_validate(c, session, out);
    session.finish();
  } catch (const CLI::ParseError& e) {
    detail::emit_error(err, "usage", e.what());
    return 2;
  } catch (const Error& e) {
    detail::emit_error(err, to_string(e.code()), e.what());
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    detail::emit_error(err, "io", e.what());
    return 1;
  }
  return 0;
}

}  // namespace attnprobe::cli
