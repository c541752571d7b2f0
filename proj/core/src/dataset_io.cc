#include "vlqa/dataset_io.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "vlqa/errors.h"

namespace vlqa {
namespace {

using nlohmann::json;

std::size_t Find(const std::vector<std::string>& names, const std::string& name, ErrorKind kind,
                 const std::string& what) {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw Error(kind, "unknown " + what + " '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

template <typename T>
T Field(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw Error(ErrorKind::kSchema, where + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kSchema, where + ": bad field '" + key + "': " + e.what());
  }
}

}  // namespace

std::size_t Manifest::TokenId(const std::string& token) const {
  return Find(vocab, token, ErrorKind::kVocabulary, "token");
}
std::size_t Manifest::AnswerId(const std::string& answer) const {
  return Find(answer_vocab, answer, ErrorKind::kVocabulary, "answer");
}
std::size_t Manifest::CategoryId(const std::string& category) const {
  return Find(categories, category, ErrorKind::kCategory, "question category");
}
std::size_t Manifest::ClassId(const std::string& cls) const {
  return Find(classes, cls, ErrorKind::kSchema, "object class");
}
std::size_t Manifest::StateId(const std::string& state) const {
  return Find(states, state, ErrorKind::kSchema, "object state");
}
std::size_t Manifest::AnswerCategoryId(std::size_t answer) const {
  if (answer >= answer_categories.size()) {
    throw Error(ErrorKind::kVocabulary, "answer index " + std::to_string(answer) + " out of range");
  }
  return CategoryId(answer_categories[answer]);
}

Manifest::AnswerTokens Manifest::SplitAnswerTokens() const {
  AnswerTokens out;
  for (const std::string& answer : answer_vocab) {
    std::vector<std::size_t> ids;
    std::stringstream ss(answer);
    std::string piece;
    while (std::getline(ss, piece, '-')) {
      if (piece.empty()) continue;
      auto it = std::find(out.tokens.begin(), out.tokens.end(), piece);
      if (it == out.tokens.end()) {
        out.tokens.push_back(piece);
        it = out.tokens.end() - 1;
      }
      ids.push_back(static_cast<std::size_t>(it - out.tokens.begin()));
    }
    if (ids.empty()) throw Error(ErrorKind::kVocabulary, "answer '" + answer + "' has no tokens");
    out.answer_tokens.push_back(std::move(ids));
  }
  return out;
}

std::vector<std::string> Tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch)) || ch == '?' || ch == ',' || ch == '.') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

json ManifestToJson(const Manifest& m) {
  json templates = json::array();
  for (const TemplateInfo& t : m.templates)
    templates.push_back({{"id", t.id}, {"category", t.category}, {"pattern", t.pattern}});
  return {
      {"vocab", m.vocab},
      {"answer_vocab", m.answer_vocab},
      {"answer_categories", m.answer_categories},
      {"categories", m.categories},
      {"classes", m.classes},
      {"states", m.states},
      {"dims", {{"S", m.feature_widths.size()}, {"K", m.feature_widths}, {"C", m.channels}}},
      {"templates", templates},
      {"seed", m.seed},
      {"count", m.count},
      {"noise_level", m.noise_level},
  };
}

Manifest ManifestFromJson(const json& j) {
  const std::string where = "manifest";
  if (!j.is_object()) throw Error(ErrorKind::kSchema, "manifest is not a JSON object");
  Manifest m;
  m.vocab = Field<std::vector<std::string>>(j, "vocab", where);
  m.answer_vocab = Field<std::vector<std::string>>(j, "answer_vocab", where);
  m.categories = Field<std::vector<std::string>>(j, "categories", where);
  m.answer_categories = Field<std::vector<std::string>>(j, "answer_categories", where);
  m.classes = Field<std::vector<std::string>>(j, "classes", where);
  m.states = Field<std::vector<std::string>>(j, "states", where);
  const json dims = Field<json>(j, "dims", where);
  m.feature_widths = Field<std::vector<std::size_t>>(dims, "K", "manifest dims");
  m.channels = Field<std::size_t>(dims, "C", "manifest dims");
  if (Field<std::size_t>(dims, "S", "manifest dims") != m.feature_widths.size()) {
    throw Error(ErrorKind::kSchema, "manifest dims: S disagrees with the length of K");
  }
  for (const json& t : Field<json>(j, "templates", where)) {
    m.templates.push_back({Field<std::string>(t, "id", "template"), Field<std::string>(t, "category", "template"),
                           Field<std::string>(t, "pattern", "template")});
  }
  m.seed = j.value("seed", std::uint64_t{0});
  m.count = j.value("count", std::size_t{0});
  m.noise_level = j.value("noise_level", 0.0);
  if (m.answer_categories.size() != m.answer_vocab.size()) {
    throw Error(ErrorKind::kSchema, "manifest: answer_categories and answer_vocab differ in length");
  }
  for (const std::string& c : m.answer_categories) m.CategoryId(c);
  return m;
}

json SampleToJson(const SampleRecord& s, const Manifest& manifest) {
  json regions = json::array();
  for (const RegionRecord& r : s.regions) {
    json region = {{"bbox", {r.bbox.x0, r.bbox.y0, r.bbox.x1, r.bbox.y1}}};
    for (std::size_t k = 0; k < r.features.size(); ++k) region["feats_s" + std::to_string(k + 1)] = r.features[k];
    region["class"] = r.cls;
    region["state"] = r.state;
    region["reading"] = r.reading;
    regions.push_back(std::move(region));
  }
  json nodes = json::array();
  for (const TreeNode& n : s.tree.nodes) {
    json node = {{"id", n.id}, {"children", n.children}, {"scores", n.scores}};
    if (n.token) node["token"] = manifest.vocab.at(*n.token);
    nodes.push_back(std::move(node));
  }
  return {
      {"regions", regions},
      {"question", s.question},
      {"category", s.category},
      {"template", s.template_id},
      {"tree", {{"nodes", nodes}, {"root", s.tree.root}}},
      {"answer", s.answer},
      {"answer_category", s.answer_category},
  };
}

SampleRecord SampleFromJson(const json& j, const Manifest& manifest) {
  const std::string where = "sample";
  SampleRecord s;
  for (const json& r : Field<json>(j, "regions", where)) {
    RegionRecord region;
    const auto box = Field<std::vector<double>>(r, "bbox", "region");
    if (box.size() != 4) throw Error(ErrorKind::kSchema, "region bbox needs 4 numbers");
    region.bbox = {box[0], box[1], box[2], box[3]};
    for (std::size_t k = 0; k < manifest.feature_widths.size(); ++k)
      region.features.push_back(Field<std::vector<double>>(r, ("feats_s" + std::to_string(k + 1)).c_str(), "region"));
    region.cls = r.value("class", std::string());
    region.state = r.value("state", std::string());
    region.reading = r.value("reading", 0.0);
    s.regions.push_back(std::move(region));
  }
  s.question = Field<std::string>(j, "question", where);
  s.category = Field<std::string>(j, "category", where);
  manifest.CategoryId(s.category);
  s.template_id = j.value("template", std::string());
  s.answer = Field<std::size_t>(j, "answer", where);
  if (s.answer >= manifest.answer_vocab.size()) {
    throw Error(ErrorKind::kVocabulary, "answer index " + std::to_string(s.answer) + " outside the answer vocabulary");
  }
  s.answer_category = j.value("answer_category", manifest.answer_categories[s.answer]);
  if (auto t = j.find("tree"); t != j.end() && !t->is_null()) {
    for (const json& n : Field<json>(*t, "nodes", "tree")) {
      TreeNode node;
      node.id = Field<int>(n, "id", "tree node");
      node.children = n.value("children", std::vector<int>{});
      node.scores = n.value("scores", std::vector<double>{});
      if (auto tok = n.find("token"); tok != n.end() && !tok->is_null()) {
        node.token = tok->is_string() ? manifest.TokenId(tok->get<std::string>()) : tok->get<std::size_t>();
      }
      s.tree.nodes.push_back(std::move(node));
    }
    s.tree.root = Field<int>(*t, "root", "tree");
  } else {
    std::vector<std::size_t> ids;
    for (const std::string& tok : Tokenize(s.question)) ids.push_back(manifest.TokenId(tok));
    s.tree = RightBranchingTree(ids);
  }
  return s;
}

std::string DumpLine(const json& j) { return j.dump(); }
std::string DumpPretty(const json& j) { return j.dump(2) + "\n"; }

void WriteTextFile(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorKind::kIo, "cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

std::string ReadTextFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json ReadJsonFile(const std::filesystem::path& path) {
  try {
    return json::parse(ReadTextFile(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kSchema, path.string() + ": " + e.what());
  }
}

void WriteDataset(const std::filesystem::path& dir, const Manifest& manifest,
                  const std::vector<SampleRecord>& samples) {
  std::string lines;
  for (const SampleRecord& s : samples) lines += DumpLine(SampleToJson(s, manifest)) + "\n";
  WriteTextFile(dir / kSamplesFile, lines);
  WriteTextFile(dir / kManifestFile, DumpPretty(ManifestToJson(manifest)));
}

Manifest ReadManifest(const std::filesystem::path& dir) { return ManifestFromJson(ReadJsonFile(dir / kManifestFile)); }

Dataset ReadDataset(const std::filesystem::path& dir) {
  Dataset d;
  d.manifest = ReadManifest(dir);
  std::istringstream in(ReadTextFile(dir / kSamplesFile));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      d.samples.push_back(SampleFromJson(json::parse(line), d.manifest));
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::kSchema, std::string(kSamplesFile) + " line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.kind(), std::string(kSamplesFile) + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return d;
}

}  // namespace vlqa
