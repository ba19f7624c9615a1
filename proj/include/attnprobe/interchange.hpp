#pragma once

// ATNX1 attention-extract container and the in-memory data model shared by
// every analysis module.
//
// Layout (little-endian):
//   "ATNX1"
//   u32 n_layers, u32 n_heads, u32 n_segments
//   per segment:
//     u32 metadata length, UTF-8 JSON {id, tokens, special_flags, word_index}
//     f32 attention, row-major layer -> head -> from -> to
//
// word_index uses JSON null for [CLS]/[SEP] tokens.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "attnprobe/error.hpp"

namespace attnprobe {

inline constexpr std::string_view kExtractMagic = "ATNX1";
inline constexpr double kRowSumTolerance = 1e-3;

struct HeadId {
  std::size_t layer = 0;
  std::size_t head = 0;

  /// 1-based "<layer>-<head>" form used in reports.
  std::string display() const {
    return std::to_string(layer + 1) + "-" + std::to_string(head + 1);
  }

  std::size_t flat(std::size_t n_heads) const { return layer * n_heads + head; }

  static HeadId from_flat(std::size_t index, std::size_t n_heads) {
    return {index / n_heads, index % n_heads};
  }

  friend bool operator==(const HeadId&, const HeadId&) = default;
  friend auto operator<=>(const HeadId&, const HeadId&) = default;
};

enum class TokenCategory { Cls, Sep, PeriodComma, Other };

inline constexpr std::array<TokenCategory, 4> kAllCategories = {
    TokenCategory::Cls, TokenCategory::Sep, TokenCategory::PeriodComma,
    TokenCategory::Other};

inline std::string_view to_string(TokenCategory c) {
  switch (c) {
    case TokenCategory::Cls: return "CLS";
    case TokenCategory::Sep: return "SEP";
    case TokenCategory::PeriodComma: return "PERIOD_COMMA";
    case TokenCategory::Other: return "OTHER";
  }
  return "OTHER";
}

inline std::optional<TokenCategory> parse_category(std::string_view s) {
  for (auto c : kAllCategories) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

/// [CLS] and [SEP] carry no source word.
inline bool is_special(TokenCategory c) {
  return c == TokenCategory::Cls || c == TokenCategory::Sep;
}

struct Segment {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<TokenCategory> special_flags;
  std::vector<std::optional<std::size_t>> word_index;
  std::size_t n_layers = 0;
  std::size_t n_heads = 0;
  /// [layer][head][from][to], row-major.
  std::vector<float> attention;

  std::size_t length() const { return tokens.size(); }

  std::size_t n_words() const {
    std::size_t n = 0;
    for (const auto& w : word_index) {
      if (w) n = std::max(n, *w + 1);
    }
    return n;
  }

  std::size_t offset(std::size_t layer, std::size_t head, std::size_t from,
                     std::size_t to) const {
    const std::size_t t = length();
    return ((layer * n_heads + head) * t + from) * t + to;
  }

  float at(std::size_t layer, std::size_t head, std::size_t from,
           std::size_t to) const {
    return attention[offset(layer, head, from, to)];
  }

  float at(HeadId h, std::size_t from, std::size_t to) const {
    return at(h.layer, h.head, from, to);
  }

  std::span<const float> row(HeadId h, std::size_t from) const {
    return {attention.data() + offset(h.layer, h.head, from, 0), length()};
  }

  std::span<float> row(HeadId h, std::size_t from) {
    return {attention.data() + offset(h.layer, h.head, from, 0), length()};
  }
};

struct ExtractSet {
  std::size_t n_layers = 0;
  std::size_t n_heads = 0;
  std::vector<Segment> segments;

  std::size_t total_heads() const { return n_layers * n_heads; }
};

/// Mean masked-LM gradient magnitude per (layer, target category).
struct GradientReport {
  static constexpr std::array<TokenCategory, 3> kCategories = {
      TokenCategory::Sep, TokenCategory::PeriodComma, TokenCategory::Other};

  std::vector<std::array<double, 3>> per_layer;

  std::size_t n_layers() const { return per_layer.size(); }
};

namespace detail {

inline std::string segment_label(const Segment& s, std::size_t index) {
  return "segment " + std::to_string(index) + " ('" + s.id + "')";
}

}  // namespace detail

/// Structural checks (shapes, flags, word indices). Throws CorruptFile.
inline void validate_structure(const Segment& s, std::size_t index = 0) {
  const auto label = detail::segment_label(s, index);
  const std::size_t t = s.length();
  if (s.special_flags.size() != t || s.word_index.size() != t) {
    throw Error(ErrorCode::CorruptFile,
                label + ": tokens/special_flags/word_index lengths differ");
  }
  if (s.attention.size() != s.n_layers * s.n_heads * t * t) {
    throw Error(ErrorCode::CorruptFile,
                label + ": attention tensor does not match (n_layers, n_heads, T, T)");
  }
  std::optional<std::size_t> previous;
  for (std::size_t i = 0; i < t; ++i) {
    const bool special = is_special(s.special_flags[i]);
    const auto& w = s.word_index[i];
    if (special && w) {
      throw Error(ErrorCode::CorruptFile,
                  label + ": special token " + std::to_string(i) + " has a word index");
    }
    if (!special) {
      if (!w) {
        throw Error(ErrorCode::CorruptFile,
                    label + ": token " + std::to_string(i) + " lacks a word index");
      }
      const std::size_t expected_min = previous ? *previous : 0;
      const std::size_t expected_max = previous ? *previous + 1 : 0;
      if (*w < expected_min || *w > expected_max) {
        throw Error(ErrorCode::CorruptFile,
                    label + ": word_index not nondecreasing/contiguous at token " +
                        std::to_string(i));
      }
      previous = w;
    }
  }
}

/// Row-stochasticity check. Throws Validation naming the offending row.
inline void validate_rows(const Segment& s, std::size_t index = 0,
                          double tolerance = kRowSumTolerance) {
  const std::size_t t = s.length();
  for (std::size_t l = 0; l < s.n_layers; ++l) {
    for (std::size_t h = 0; h < s.n_heads; ++h) {
      for (std::size_t from = 0; from < t; ++from) {
        double sum = 0.0;
        for (float v : s.row({l, h}, from)) {
          if (!(v >= 0.0f) || !std::isfinite(v)) {
            throw Error(ErrorCode::Validation,
                        detail::segment_label(s, index) + " layer " + std::to_string(l) +
                            " head " + std::to_string(h) + " row " + std::to_string(from) +
                            ": negative or non-finite entry");
          }
          sum += v;
        }
        if (std::abs(sum - 1.0) > tolerance) {
          std::ostringstream msg;
          msg << detail::segment_label(s, index) << " layer " << l << " head " << h
              << " row " << from << ": sums to " << sum;
          throw Error(ErrorCode::Validation, msg.str());
        }
      }
    }
  }
}

inline void validate(const ExtractSet& set) {
  for (std::size_t i = 0; i < set.segments.size(); ++i) {
    const auto& s = set.segments[i];
    if (s.n_layers != set.n_layers || s.n_heads != set.n_heads) {
      throw Error(ErrorCode::Validation,
                  detail::segment_label(s, i) + ": layer/head counts differ from the set");
    }
    validate_structure(s, i);
    validate_rows(s, i);
  }
}

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline nlohmann::json segment_metadata(const Segment& s) {
  nlohmann::json flags = nlohmann::json::array();
  for (auto f : s.special_flags) flags.push_back(std::string(to_string(f)));
  nlohmann::json words = nlohmann::json::array();
  for (const auto& w : s.word_index) {
    if (w) {
      words.push_back(*w);
    } else {
      words.push_back(nullptr);
    }
  }
  return {{"id", s.id}, {"tokens", s.tokens}, {"special_flags", flags}, {"word_index", words}};
}

class ByteReader {
 public:
  explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}

  const unsigned char* take(std::size_t n, std::string_view what) {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorCode::CorruptFile, "truncated file while reading " + std::string(what));
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data() + pos_);
    pos_ += n;
    return p;
  }

  std::uint32_t u32(std::string_view what) { return get_u32(take(4, what)); }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

inline Segment parse_segment_metadata(const nlohmann::json& meta, std::size_t index) {
  Segment s;
  try {
    s.id = meta.at("id").get<std::string>();
    s.tokens = meta.at("tokens").get<std::vector<std::string>>();
    for (const auto& f : meta.at("special_flags")) {
      auto c = parse_category(f.get<std::string>());
      if (!c) {
        throw Error(ErrorCode::CorruptFile, "segment " + std::to_string(index) +
                                                ": unknown special flag " + f.dump());
      }
      s.special_flags.push_back(*c);
    }
    for (const auto& w : meta.at("word_index")) {
      if (w.is_null()) {
        s.word_index.emplace_back(std::nullopt);
      } else {
        s.word_index.emplace_back(w.get<std::size_t>());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptFile,
                "segment " + std::to_string(index) + ": bad metadata: " + e.what());
  }
  return s;
}

}  // namespace detail

/// Serializes without touching the filesystem.
inline std::string encode_extract(const ExtractSet& set) {
  for (std::size_t i = 0; i < set.segments.size(); ++i) {
    const auto& s = set.segments[i];
    if (s.n_layers != set.n_layers || s.n_heads != set.n_heads) {
      throw Error(ErrorCode::Validation,
                  detail::segment_label(s, i) + ": layer/head counts differ from the set");
    }
    validate_structure(s, i);
  }
  std::string out(kExtractMagic);
  detail::put_u32(out, static_cast<std::uint32_t>(set.n_layers));
  detail::put_u32(out, static_cast<std::uint32_t>(set.n_heads));
  detail::put_u32(out, static_cast<std::uint32_t>(set.segments.size()));
  for (const auto& s : set.segments) {
    const std::string meta = detail::segment_metadata(s).dump();
    detail::put_u32(out, static_cast<std::uint32_t>(meta.size()));
    out += meta;
    out.reserve(out.size() + s.attention.size() * 4);
    for (float v : s.attention) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

inline ExtractSet decode_extract(const std::string& bytes) {
  if (bytes.size() < kExtractMagic.size() ||
      std::string_view(bytes).substr(0, kExtractMagic.size()) != kExtractMagic) {
    throw Error(ErrorCode::Format, "not an ATNX1 file (bad magic)");
  }
  detail::ByteReader reader(bytes);
  reader.take(kExtractMagic.size(), "magic");
  ExtractSet set;
  set.n_layers = reader.u32("header");
  set.n_heads = reader.u32("header");
  const std::uint32_t n_segments = reader.u32("header");
  for (std::uint32_t i = 0; i < n_segments; ++i) {
    const std::uint32_t meta_len = reader.u32("segment header");
    const auto* meta_bytes = reader.take(meta_len, "segment metadata");
    nlohmann::json meta;
    try {
      meta = nlohmann::json::parse(meta_bytes, meta_bytes + meta_len);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::CorruptFile,
                  "segment " + std::to_string(i) + ": metadata is not JSON: " + e.what());
    }
    Segment s = detail::parse_segment_metadata(meta, i);
    s.n_layers = set.n_layers;
    s.n_heads = set.n_heads;
    const std::size_t t = s.tokens.size();
    const std::size_t count = set.n_layers * set.n_heads * t * t;
    const auto* payload = reader.take(count * 4, "attention payload");
    s.attention.resize(count);
    for (std::size_t k = 0; k < count; ++k) {
      s.attention[k] = std::bit_cast<float>(detail::get_u32(payload + 4 * k));
    }
    validate_structure(s, i);
    validate_rows(s, i);
    set.segments.push_back(std::move(s));
  }
  if (!reader.at_end()) {
    throw Error(ErrorCode::CorruptFile, "trailing bytes after last segment");
  }
  return set;
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline ExtractSet load_extract(const std::string& path) {
  return decode_extract(read_file_bytes(path));
}

inline void save_extract(const ExtractSet& set, const std::string& path) {
  const std::string bytes = encode_extract(set);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

// Gradient report JSON:
//   {"n_layers": L, "categories": ["SEP","PERIOD_COMMA","OTHER"],
//    "values": [[sep, period_comma, other], ...]}   one row per layer

inline GradientReport parse_gradient_report(const nlohmann::json& j) {
  GradientReport report;
  try {
    const auto n_layers = j.at("n_layers").get<std::size_t>();
    const auto categories = j.at("categories").get<std::vector<std::string>>();
    if (categories.size() != 3) {
      throw Error(ErrorCode::Parse, "gradient report must list exactly 3 categories");
    }
    std::array<std::size_t, 3> column{};
    for (std::size_t c = 0; c < 3; ++c) {
      std::optional<std::size_t> found;
      for (std::size_t k = 0; k < 3; ++k) {
        if (categories[k] == to_string(GradientReport::kCategories[c])) found = k;
      }
      if (!found) {
        throw Error(ErrorCode::Parse, "gradient report missing category " +
                                          std::string(to_string(GradientReport::kCategories[c])));
      }
      column[c] = *found;
    }
    const auto& values = j.at("values");
    if (values.size() != n_layers) {
      throw Error(ErrorCode::Parse, "gradient report has " + std::to_string(values.size()) +
                                        " rows for n_layers " + std::to_string(n_layers));
    }
    for (const auto& row : values) {
      const auto v = row.get<std::vector<double>>();
      if (v.size() != 3) throw Error(ErrorCode::Parse, "gradient report row must have 3 values");
      std::array<double, 3> entry{};
      for (std::size_t c = 0; c < 3; ++c) {
        entry[c] = v[column[c]];
        if (!(entry[c] >= 0.0) || !std::isfinite(entry[c])) {
          throw Error(ErrorCode::Validation, "gradient magnitudes must be finite and >= 0");
        }
      }
      report.per_layer.push_back(entry);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("bad gradient report: ") + e.what());
  }
  return report;
}

inline GradientReport load_gradient_report(const std::string& path) {
  const std::string text = read_file_bytes(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, path + ": " + e.what());
  }
  return parse_gradient_report(j);
}

}  // namespace attnprobe
