#pragma once

// Builders shared by the test suites.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "attnprobe/corpora.hpp"
#include "attnprobe/interchange.hpp"

namespace fixtures {

using namespace attnprobe;

/// "[CLS] w0 w1 ... [SEP]" with one token per word and uniform rows.
inline Segment simple_segment(const std::vector<std::string>& words, std::size_t layers = 1,
                              std::size_t heads = 1) {
  Segment s;
  s.id = "seg";
  s.n_layers = layers;
  s.n_heads = heads;
  s.tokens.push_back("[CLS]");
  s.special_flags.push_back(TokenCategory::Cls);
  s.word_index.emplace_back(std::nullopt);
  for (std::size_t w = 0; w < words.size(); ++w) {
    s.tokens.push_back(words[w]);
    s.special_flags.push_back(words[w] == "." || words[w] == "," ? TokenCategory::PeriodComma
                                                                 : TokenCategory::Other);
    s.word_index.emplace_back(w);
  }
  s.tokens.push_back("[SEP]");
  s.special_flags.push_back(TokenCategory::Sep);
  s.word_index.emplace_back(std::nullopt);
  const std::size_t t = s.length();
  s.attention.assign(layers * heads * t * t, 1.0f / static_cast<float>(t));
  return s;
}

/// Random normalised rows for every head of a segment.
inline void randomize(Segment& s, std::mt19937_64& rng, bool sparse = false) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t t = s.length();
  for (std::size_t l = 0; l < s.n_layers; ++l) {
    for (std::size_t h = 0; h < s.n_heads; ++h) {
      for (std::size_t from = 0; from < t; ++from) {
        std::vector<double> row(t);
        double sum = 0.0;
        for (auto& v : row) {
          v = sparse && u(rng) < 0.5 ? 0.0 : -std::log(1.0 - u(rng));
          sum += v;
        }
        if (sum == 0.0) {
          row[from] = 1.0;
          sum = 1.0;
        }
        auto out = s.row({l, h}, from);
        for (std::size_t k = 0; k < t; ++k) out[k] = static_cast<float>(row[k] / sum);
      }
    }
  }
}

/// Random words of 1..6 letters; each word split into 1..3 tokens with
/// probability split_prob. Random rows.
inline Segment random_segment(std::mt19937_64& rng, std::size_t n_words, std::size_t layers, std::size_t heads,
                              double split_prob, std::vector<std::string>* words_out = nullptr) {
  std::uniform_int_distribution<int> letter('a', 'z');
  std::uniform_int_distribution<std::size_t> len(1, 6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Segment s;
  s.id = "rand";
  s.n_layers = layers;
  s.n_heads = heads;
  s.tokens.push_back("[CLS]");
  s.special_flags.push_back(TokenCategory::Cls);
  s.word_index.emplace_back(std::nullopt);
  std::vector<std::string> words;
  for (std::size_t w = 0; w < n_words; ++w) {
    std::string word;
    const std::size_t n = len(rng);
    for (std::size_t i = 0; i < n; ++i) word.push_back(static_cast<char>(letter(rng)));
    words.push_back(word);
    std::vector<std::string> pieces{word};
    if (word.size() >= 2 && u(rng) < split_prob) {
      const std::size_t cut = 1 + static_cast<std::size_t>(u(rng) * static_cast<double>(word.size() - 1));
      pieces = {word.substr(0, cut), "##" + word.substr(cut)};
      if (pieces[1].size() > 3 && u(rng) < 0.5) {
        const std::string rest = pieces[1].substr(2);
        pieces[1] = "##" + rest.substr(0, 1);
        pieces.push_back("##" + rest.substr(1));
      }
    }
    for (const auto& p : pieces) {
      s.tokens.push_back(p);
      s.special_flags.push_back(TokenCategory::Other);
      s.word_index.emplace_back(w);
    }
  }
  s.tokens.push_back("[SEP]");
  s.special_flags.push_back(TokenCategory::Sep);
  s.word_index.emplace_back(std::nullopt);
  s.attention.assign(layers * heads * s.length() * s.length(), 0.0f);
  randomize(s, rng);
  if (words_out) *words_out = words;
  return s;
}

inline DepSentence dep_sentence(std::vector<std::string> words, std::vector<int> heads,
                                std::vector<std::string> relations) {
  DepSentence s;
  s.words = std::move(words);
  s.gold_head = std::move(heads);
  s.relation = std::move(relations);
  return s;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("attnprobe_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace fixtures
