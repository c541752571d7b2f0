#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vlqa/dataset.h"

// Deterministic synthetic industrial scenes with templated questions. Every
// answer follows from the scene through a fixed rule table, so the
// generator doubles as a ground-truth oracle.
namespace vlqa::synth {

inline constexpr std::size_t kGridSide = 4;
inline constexpr std::size_t kMaxObjects = 12;
inline constexpr double kBucketWidth = 25.0;

const std::vector<std::string>& Classes();
const std::vector<std::string>& States();
const std::vector<std::string>& Categories();
// Three-step procedure per class, indexed [class][step - 1].
const std::vector<std::vector<std::string>>& Procedures();
const std::vector<std::string>& Tools();  // per class
const std::vector<std::string>& Buckets();

struct SceneObject {
  std::size_t cls = 0;
  std::size_t state = 0;
  double reading = 0.0;  // gauges only
  BBox bbox;
  std::size_t slot = 0;
};

struct SceneSpec {
  std::vector<SceneObject> objects;
  std::uint64_t seed = 0;
};

struct Template {
  std::string id;
  std::string category;
  // Phrases separated by '|'; '*' marks a phrase's head token and a leading
  // '!' marks the head phrase. {class} and {k} are slots.
  std::string pattern;
};

const std::vector<Template>& Templates();

// Reading bucket with half-open boundaries: [0,25) -> "0-25", ..., [75,100] -> "75-100".
std::string BucketName(double reading);

// Manifest for the built-in vocabularies. Feature widths must hold the
// one-hot class/state block and the four geometry/reading values.
Manifest BuildManifest(const std::vector<std::size_t>& feature_widths, std::size_t channels);

struct GeneratorOptions {
  std::uint64_t seed = 1;
  std::size_t count = 100;
  double noise_level = 0.0;
  std::vector<std::size_t> feature_widths{9, 4};
  std::size_t channels = 8;
  std::size_t min_objects = 3;
  std::size_t max_objects = 10;
};

struct Corpus {
  Manifest manifest;
  std::vector<SampleRecord> samples;
};

// Sample i draws from its own stream MixSeed(seed, i), so shards of the
// index range can be generated independently.
Corpus Generate(const GeneratorOptions& options);
SampleRecord GenerateSample(const GeneratorOptions& options, const Manifest& manifest, std::size_t index);

// Ground truth from the rule table. Throws a template error when the question
// matches no template or its presupposition (a unique referent) fails.
std::string OracleAnswer(const SceneSpec& scene, const std::string& question);
std::size_t OracleAnswerIndex(const SceneSpec& scene, const std::string& question, const Manifest& manifest);

// Rebuilds the scene from a record's region annotations.
SceneSpec SceneFromRecord(const SampleRecord& record, const Manifest& manifest);

// Region raw features: scale 1 is one-hot(class) + one-hot(state), scale 2 is
// [reading/100, cx, cy, area]; zero padded, then Gaussian noise.
std::vector<std::vector<double>> RegionFeatures(const SceneObject& object,
                                                const std::vector<std::size_t>& feature_widths);

// Inverse of the noiseless scale-1 encoding.
struct DecodedRegion {
  std::size_t cls;
  std::size_t state;
};
DecodedRegion DecodeRegion(const std::vector<std::vector<double>>& features);

// Tree for a templated question: phrases under the root, tokens under their
// phrase; heads get twice the weight of their siblings before normalization.
SyntaxTree TemplateTree(const std::string& pattern, const std::map<std::string, std::string>& slots,
                        const Manifest& manifest);

}  // namespace vlqa::synth
