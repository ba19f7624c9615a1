#include <gtest/gtest.h>

#include <cstring>
#include <random>

#include "attnprobe/interchange.hpp"
#include "fixtures.hpp"

using namespace attnprobe;

namespace {

ExtractSet minimal_set() {
  // 1 segment, 2 layers x 2 heads, 4 tokens, rows uniform at 0.25.
  ExtractSet set;
  set.n_layers = 2;
  set.n_heads = 2;
  set.segments.push_back(fixtures::simple_segment({"the", "cat"}, 2, 2));
  return set;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::Numeric;
}

}  // namespace

TEST(HeadId, DisplayIsOneBased) {
  EXPECT_EQ((HeadId{7, 10}.display()), "8-11");
  EXPECT_EQ((HeadId{0, 0}.display()), "1-1");
  const HeadId h = HeadId::from_flat(13, 12);
  EXPECT_EQ(h.layer, 1u);
  EXPECT_EQ(h.head, 1u);
  EXPECT_EQ(h.flat(12), 13u);
}

TEST(TokenCategory, NamesRoundTrip) {
  for (auto c : kAllCategories) EXPECT_EQ(parse_category(to_string(c)), c);
  EXPECT_FALSE(parse_category("MASK"));
  EXPECT_TRUE(is_special(TokenCategory::Cls));
  EXPECT_TRUE(is_special(TokenCategory::Sep));
  EXPECT_FALSE(is_special(TokenCategory::PeriodComma));
}

TEST(Extract, MinimalUniformFileLoads) {
  const auto set = minimal_set();
  const auto back = decode_extract(encode_extract(set));
  ASSERT_EQ(back.segments.size(), 1u);
  EXPECT_EQ(back.n_layers, 2u);
  EXPECT_EQ(back.n_heads, 2u);
  EXPECT_EQ(back.segments[0].length(), 4u);
  EXPECT_NO_THROW(validate(back));
}

TEST(Extract, RoundTripIsBitExact) {
  std::mt19937_64 rng(3);
  ExtractSet set;
  set.n_layers = 2;
  set.n_heads = 3;
  for (int i = 0; i < 5; ++i) set.segments.push_back(fixtures::random_segment(rng, 7, 2, 3, 0.4));
  const auto bytes = encode_extract(set);
  const auto back = decode_extract(bytes);
  ASSERT_EQ(back.segments.size(), set.segments.size());
  for (std::size_t i = 0; i < set.segments.size(); ++i) {
    const auto& a = set.segments[i].attention;
    const auto& b = back.segments[i].attention;
    ASSERT_EQ(a.size(), b.size());
    EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)), 0);
    EXPECT_EQ(back.segments[i].tokens, set.segments[i].tokens);
    EXPECT_EQ(back.segments[i].word_index, set.segments[i].word_index);
    EXPECT_EQ(back.segments[i].special_flags, set.segments[i].special_flags);
  }
  EXPECT_EQ(encode_extract(back), bytes);
}

TEST(Extract, FileRoundTrip) {
  const auto dir = fixtures::scratch_dir("interchange_file");
  const auto path = (dir / "x.atnx").string();
  const auto set = minimal_set();
  save_extract(set, path);
  EXPECT_EQ(read_file_bytes(path), encode_extract(set));
  EXPECT_EQ(load_extract(path).segments[0].attention, set.segments[0].attention);
}

TEST(Extract, EmptySegmentListIsValid) {
  ExtractSet set;
  set.n_layers = 12;
  set.n_heads = 12;
  const auto bytes = encode_extract(set);
  EXPECT_EQ(bytes.size(), 5u + 12u);
  const auto back = decode_extract(bytes);
  EXPECT_TRUE(back.segments.empty());
  EXPECT_EQ(back.n_layers, 12u);
}

TEST(Extract, ScaledRowIsRejectedByName) {
  auto set = minimal_set();
  for (auto& v : set.segments[0].row({1, 0}, 2)) v *= 2.0f;
  try {
    decode_extract(encode_extract(set));
    FAIL() << "expected validation error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Validation);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("layer 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("head 0"), std::string::npos) << msg;
    EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
  }
}

TEST(Extract, NegativeEntryRejected) {
  auto set = minimal_set();
  auto row = set.segments[0].row({0, 0}, 0);
  row[0] = -0.25f;
  row[1] = 0.75f;
  EXPECT_EQ(code_of([&] { decode_extract(encode_extract(set)); }), ErrorCode::Validation);
}

TEST(Extract, BadMagicIsFormatError) {
  auto bytes = encode_extract(minimal_set());
  bytes.replace(0, 5, "XXXX1");
  EXPECT_EQ(code_of([&] { decode_extract(bytes); }), ErrorCode::Format);
  EXPECT_EQ(code_of([&] { decode_extract("AT"); }), ErrorCode::Format);
}

TEST(Extract, TruncationIsCorruptFile) {
  const auto bytes = encode_extract(minimal_set());
  for (std::size_t cut : {6ul, 12ul, 17ul, 25ul, bytes.size() - 1}) {
    EXPECT_EQ(code_of([&] { decode_extract(bytes.substr(0, cut)); }), ErrorCode::CorruptFile) << cut;
  }
  EXPECT_EQ(code_of([&] { decode_extract(bytes + "x"); }), ErrorCode::CorruptFile);
}

TEST(Extract, DimensionMismatchIsCorruptFile) {
  // Header promises 3 layers while the payload holds 2.
  auto bytes = encode_extract(minimal_set());
  bytes[5] = 3;
  EXPECT_EQ(code_of([&] { decode_extract(bytes); }), ErrorCode::CorruptFile);
}

TEST(Extract, BadMetadataIsCorruptFile) {
  auto set = minimal_set();
  set.segments[0].word_index[1] = 1;  // first word must be index 0
  EXPECT_EQ(code_of([&] { decode_extract(encode_extract(set)); }), ErrorCode::CorruptFile);
  set = minimal_set();
  set.segments[0].word_index[0] = 0;  // [CLS] carries a word
  EXPECT_EQ(code_of([&] { decode_extract(encode_extract(set)); }), ErrorCode::CorruptFile);
}

TEST(Extract, WordIndexGapRejected) {
  auto s = fixtures::simple_segment({"a", "b", "c"});
  s.word_index[3] = 3;
  EXPECT_EQ(code_of([&] { validate_structure(s); }), ErrorCode::CorruptFile);
}

TEST(Extract, MismatchedLayersRefusedOnSave) {
  auto set = minimal_set();
  set.segments.push_back(fixtures::simple_segment({"x"}, 3, 2));
  EXPECT_EQ(code_of([&] { encode_extract(set); }), ErrorCode::Validation);
  EXPECT_EQ(code_of([&] { validate(set); }), ErrorCode::Validation);
}

TEST(Extract, UnwritablePathIsIoError) {
  EXPECT_EQ(code_of([&] { save_extract(minimal_set(), "/nonexistent-dir/x.atnx"); }), ErrorCode::Io);
  EXPECT_EQ(code_of([&] { load_extract("/nonexistent-dir/x.atnx"); }), ErrorCode::Io);
}

TEST(Extract, AcceptedFilesPassIndependentChecks) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    ExtractSet set;
    set.n_layers = 1 + trial % 3;
    set.n_heads = 1 + trial % 2;
    for (int i = 0; i < 3; ++i) {
      set.segments.push_back(fixtures::random_segment(rng, 1 + (trial + i) % 9, set.n_layers, set.n_heads, 0.5));
    }
    const auto back = decode_extract(encode_extract(set));
    for (const auto& s : back.segments) {
      const std::size_t t = s.length();
      for (std::size_t l = 0; l < s.n_layers; ++l)
        for (std::size_t h = 0; h < s.n_heads; ++h)
          for (std::size_t f = 0; f < t; ++f) {
            double sum = 0;
            for (std::size_t k = 0; k < t; ++k) {
              const float v = s.at(l, h, f, k);
              ASSERT_GE(v, 0.0f);
              sum += v;
            }
            ASSERT_NEAR(sum, 1.0, 1e-3);
          }
    }
  }
}

TEST(GradientReport, ParsesAnyColumnOrder) {
  const auto j = nlohmann::json::parse(
      R"({"n_layers":2,"categories":["OTHER","SEP","PERIOD_COMMA"],"values":[[3,1,2],[6,4,5]]})");
  const auto r = parse_gradient_report(j);
  ASSERT_EQ(r.n_layers(), 2u);
  EXPECT_EQ(r.per_layer[0], (std::array<double, 3>{1, 2, 3}));
  EXPECT_EQ(r.per_layer[1], (std::array<double, 3>{4, 5, 6}));
}

TEST(GradientReport, RejectsBadShapesAndValues) {
  EXPECT_EQ(code_of([] {
              parse_gradient_report(nlohmann::json::parse(
                  R"({"n_layers":2,"categories":["SEP","PERIOD_COMMA","OTHER"],"values":[[1,2,3]]})"));
            }),
            ErrorCode::Parse);
  EXPECT_EQ(code_of([] {
              parse_gradient_report(nlohmann::json::parse(
                  R"({"n_layers":1,"categories":["SEP","PERIOD_COMMA","OTHER"],"values":[[1,-2,3]]})"));
            }),
            ErrorCode::Validation);
  EXPECT_EQ(code_of([] {
              parse_gradient_report(
                  nlohmann::json::parse(R"({"n_layers":1,"categories":["SEP","CLS","OTHER"],"values":[[1,2,3]]})"));
            }),
            ErrorCode::Parse);
}
