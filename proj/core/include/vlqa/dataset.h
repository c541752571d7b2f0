#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vlqa/language_encoder.h"
#include "vlqa/visual_encoder.h"

namespace vlqa {

struct RegionRecord {
  BBox bbox;
  std::vector<std::vector<double>> features;  // per scale
  std::string cls;
  std::string state;
  double reading = 0.0;
};

// One image-question-answer triple.
struct SampleRecord {
  std::vector<RegionRecord> regions;
  std::string question;
  std::string category;
  std::string template_id;
  SyntaxTree tree;  // leaf tokens index Manifest::vocab
  std::size_t answer = 0;
  std::string answer_category;
};

struct TemplateInfo {
  std::string id;
  std::string category;
  std::string pattern;
};

// Closed vocabularies and feature layout shared by a corpus and every model
// trained on it.
struct Manifest {
  std::vector<std::string> vocab;
  std::vector<std::string> answer_vocab;
  std::vector<std::string> answer_categories;  // aligned with answer_vocab
  std::vector<std::string> categories;
  std::vector<std::string> classes;
  std::vector<std::string> states;
  std::vector<std::size_t> feature_widths;  // K_s; S = size()
  std::size_t channels = 0;                 // C
  std::vector<TemplateInfo> templates;
  std::uint64_t seed = 0;
  std::size_t count = 0;
  double noise_level = 0.0;

  std::size_t TokenId(const std::string& token) const;
  std::size_t AnswerId(const std::string& answer) const;
  std::size_t CategoryId(const std::string& category) const;
  std::size_t ClassId(const std::string& cls) const;
  std::size_t StateId(const std::string& state) const;
  std::size_t AnswerCategoryId(std::size_t answer) const;

  // Answer strings split on '-' into a closed token list; answer_tokens[a]
  // indexes into the returned `tokens`.
  struct AnswerTokens {
    std::vector<std::string> tokens;
    std::vector<std::vector<std::size_t>> answer_tokens;
  };
  AnswerTokens SplitAnswerTokens() const;
};

std::vector<std::string> Tokenize(const std::string& text);

}  // namespace vlqa
