#pragma once

// Synthetic attention extracts with known per-head behaviour, so every
// analysis can be checked without a real model.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "attnprobe/corpora.hpp"
#include "attnprobe/error.hpp"
#include "attnprobe/interchange.hpp"

namespace attnprobe {

struct Behavior {
  enum class Kind { Uniform, Offset, GoldHead, SepSink, Noise };

  Kind kind = Kind::Uniform;
  int offset = 0;          // Offset
  double mass = 1.0;       // GoldHead
  std::uint64_t seed = 0;  // Noise

  static Behavior uniform() { return {}; }
  static Behavior offset_by(int k) { return {Kind::Offset, k, 1.0, 0}; }
  static Behavior gold_head(double m) { return {Kind::GoldHead, 0, m, 0}; }
  static Behavior sep_sink() { return {Kind::SepSink, 0, 1.0, 0}; }
  static Behavior noise(std::uint64_t s) { return {Kind::Noise, 0, 1.0, s}; }

  std::string describe() const {
    switch (kind) {
      case Kind::Uniform: return "UNIFORM";
      case Kind::Offset: return "OFFSET:" + std::to_string(offset);
      case Kind::GoldHead: return "GOLD_HEAD:" + std::to_string(mass);
      case Kind::SepSink: return "SEP_SINK";
      case Kind::Noise: return "NOISE:" + std::to_string(seed);
    }
    return "UNIFORM";
  }
};

/// "UNIFORM", "OFFSET:-1", "GOLD_HEAD:0.9", "SEP_SINK", "NOISE:7".
inline Behavior parse_behavior(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  auto need_arg = [&] {
    if (arg.empty()) throw Error(ErrorCode::InvalidArgument, "behavior " + name + " needs an argument");
  };
  try {
    if (name == "UNIFORM") return Behavior::uniform();
    if (name == "SEP_SINK") return Behavior::sep_sink();
    if (name == "OFFSET") {
      need_arg();
      return Behavior::offset_by(std::stoi(arg));
    }
    if (name == "GOLD_HEAD") {
      need_arg();
      return Behavior::gold_head(std::stod(arg));
    }
    if (name == "NOISE") {
      need_arg();
      return Behavior::noise(std::stoull(arg));
    }
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::InvalidArgument, "bad behavior argument in '" + text + "'");
  }
  throw Error(ErrorCode::InvalidArgument, "unknown behavior '" + text + "'");
}

struct SynthSpec {
  std::size_t n_layers = 1;
  std::size_t n_heads = 1;
  std::vector<Behavior> behaviors;  // flat, layer-major
  double split_probability = 0.0;
  std::string continuation_marker = "##";
  std::uint64_t seed = 0;

  void validate() const {
    if (n_layers == 0 || n_heads == 0) throw Error(ErrorCode::InvalidArgument, "need at least one head");
    if (behaviors.size() != n_layers * n_heads) {
      throw Error(ErrorCode::InvalidArgument, "expected " + std::to_string(n_layers * n_heads) +
                                                  " behaviors, got " + std::to_string(behaviors.size()));
    }
    for (const auto& b : behaviors) {
      if (b.kind == Behavior::Kind::GoldHead && !(b.mass > 0.0 && b.mass <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "GOLD_HEAD mass must lie in (0, 1]");
      }
    }
    if (!(split_probability >= 0.0 && split_probability <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "split probability must lie in [0, 1]");
    }
  }
};

struct SynthSentence {
  std::vector<std::string> words;
  std::vector<int> gold_head;  // empty when unknown
};

inline std::vector<SynthSentence> sentences_from(const DepCorpus& corpus) {
  std::vector<SynthSentence> out;
  for (const auto& s : corpus) out.push_back({s.words, s.gold_head});
  return out;
}

inline std::vector<SynthSentence> sentences_from(const CorefCorpus& corpus) {
  std::vector<SynthSentence> out;
  for (const auto& d : corpus) out.push_back({d.tokens, {}});
  return out;
}

/// Random sentences over a small vocabulary with random well-formed trees.
inline DepCorpus random_dep_corpus(std::size_t n_sentences, std::size_t min_len, std::size_t max_len,
                                   std::uint64_t seed) {
  static const std::vector<std::string> kVocab = {
      "the",   "a",      "cat",     "dog",     "saw",    "ran",   "quickly", "playing", "house",
      "green", "market", "economy", "shares",  "rose",   "fell",  "investor", "report",  "of",
      "in",    "on",     "with",    "company", "said",   "new",   "year",    "percent", "bank",
      "price", "stock",  "trading", "analyst", "expect", "large", "small",   ",",       "."};
  static const std::vector<std::string> kRelations = {"det", "nsubj", "dobj", "amod", "prep", "pobj", "advmod", "nn"};
  if (min_len == 0 || max_len < min_len) throw Error(ErrorCode::InvalidArgument, "bad sentence length range");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> len_dist(min_len, max_len);
  std::uniform_int_distribution<std::size_t> vocab_dist(0, kVocab.size() - 1);
  std::uniform_int_distribution<std::size_t> rel_dist(0, kRelations.size() - 1);
  DepCorpus corpus;
  for (std::size_t s = 0; s < n_sentences; ++s) {
    DepSentence sent;
    const std::size_t n = len_dist(rng);
    for (std::size_t i = 0; i < n; ++i) sent.words.push_back(kVocab[vocab_dist(rng)]);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    sent.gold_head.assign(n, kRoot);
    sent.relation.assign(n, "root");
    for (std::size_t k = 1; k < n; ++k) {
      std::uniform_int_distribution<std::size_t> parent(0, k - 1);
      sent.gold_head[order[k]] = static_cast<int>(order[parent(rng)]);
      sent.relation[order[k]] = sent.words[order[k]] == "," || sent.words[order[k]] == "."
                                    ? "punct"
                                    : kRelations[rel_dist(rng)];
    }
    corpus.push_back(std::move(sent));
  }
  return corpus;
}

namespace detail {

inline TokenCategory category_of_word(const std::string& w) {
  return w == "." || w == "," ? TokenCategory::PeriodComma : TokenCategory::Other;
}

inline void fill_head(Segment& seg, HeadId head, const Behavior& b, const SynthSentence& sentence,
                      const std::vector<std::size_t>& first_token, std::mt19937_64& noise_rng) {
  const std::size_t t = seg.length();
  std::vector<double> row(t);
  for (std::size_t from = 0; from < t; ++from) {
    std::fill(row.begin(), row.end(), 0.0);
    switch (b.kind) {
      case Behavior::Kind::Uniform:
        std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(t));
        break;
      case Behavior::Kind::Offset: {
        const long to = static_cast<long>(from) + b.offset;
        row[to >= 0 && to < static_cast<long>(t) ? static_cast<std::size_t>(to) : from] = 1.0;
        break;
      }
      case Behavior::Kind::GoldHead: {
        const auto& w = seg.word_index[from];
        const int gold = w ? sentence.gold_head[*w] : kRoot;
        if (gold == kRoot) {
          std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(t));
        } else {
          const std::size_t target = first_token[static_cast<std::size_t>(gold)];
          std::fill(row.begin(), row.end(), (1.0 - b.mass) / static_cast<double>(t - 1));
          row[target] = b.mass;
        }
        break;
      }
      case Behavior::Kind::SepSink:
        row[t - 1] = 1.0;
        break;
      case Behavior::Kind::Noise: {
        std::exponential_distribution<double> e(1.0);
        double s = 0.0;
        for (auto& v : row) s += (v = e(noise_rng));
        for (auto& v : row) v /= s;
        break;
      }
    }
    auto out = seg.row(head, from);
    for (std::size_t k = 0; k < t; ++k) out[k] = static_cast<float>(row[k]);
  }
}

}  // namespace detail

/// Segments "[CLS] tokens [SEP]" whose heads realise their declared behaviour.
inline ExtractSet generate(const SynthSpec& spec, const std::vector<SynthSentence>& source) {
  spec.validate();
  ExtractSet set;
  set.n_layers = spec.n_layers;
  set.n_heads = spec.n_heads;
  std::mt19937_64 split_rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (std::size_t si = 0; si < source.size(); ++si) {
    const auto& sentence = source[si];
    Segment seg;
    seg.id = "synth-" + std::to_string(si);
    seg.n_layers = spec.n_layers;
    seg.n_heads = spec.n_heads;
    seg.tokens.push_back("[CLS]");
    seg.special_flags.push_back(TokenCategory::Cls);
    seg.word_index.emplace_back(std::nullopt);
    std::vector<std::size_t> first_token;
    for (std::size_t w = 0; w < sentence.words.size(); ++w) {
      const auto& word = sentence.words[w];
      first_token.push_back(seg.tokens.size());
      std::vector<std::string> pieces{word};
      if (word.size() >= 2 && unit(split_rng) < spec.split_probability) {
        const std::size_t cut = word.size() / 2;
        pieces = {word.substr(0, cut), spec.continuation_marker + word.substr(cut)};
      }
      for (const auto& p : pieces) {
        seg.tokens.push_back(p);
        seg.special_flags.push_back(detail::category_of_word(word));
        seg.word_index.emplace_back(w);
      }
    }
    seg.tokens.push_back("[SEP]");
    seg.special_flags.push_back(TokenCategory::Sep);
    seg.word_index.emplace_back(std::nullopt);

    const std::size_t t = seg.length();
    seg.attention.assign(spec.n_layers * spec.n_heads * t * t, 0.0f);
    for (std::size_t k = 0; k < spec.behaviors.size(); ++k) {
      const auto& b = spec.behaviors[k];
      if (b.kind == Behavior::Kind::Offset && static_cast<std::size_t>(std::abs(b.offset)) >= t) {
        throw Error(ErrorCode::InvalidArgument, "OFFSET:" + std::to_string(b.offset) +
                                                    " does not fit segment " + seg.id + " of " +
                                                    std::to_string(t) + " tokens");
      }
      if (b.kind == Behavior::Kind::GoldHead && sentence.gold_head.size() != sentence.words.size()) {
        throw Error(ErrorCode::InvalidArgument, "GOLD_HEAD needs gold heads for every sentence");
      }
      std::mt19937_64 noise_rng(b.seed ^ (spec.seed * 0x9E3779B97F4A7C15ull) ^ (si + 1) * 0xBF58476D1CE4E5B9ull ^ k);
      detail::fill_head(seg, HeadId::from_flat(k, spec.n_heads), b, sentence, first_token, noise_rng);
    }
    set.segments.push_back(std::move(seg));
  }
  return set;
}

}  // namespace attnprobe
