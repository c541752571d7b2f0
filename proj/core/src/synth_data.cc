#include "vlqa/synth_data.h"

#include <algorithm>
#include <functional>
#include <span>
#include <cmath>
#include <numeric>
#include <sstream>

#include "vlqa/errors.h"
#include "vlqa/rng.h"

namespace vlqa::synth {
namespace {

enum StateIndex : std::size_t { kRunning = 0, kStopped = 1, kFault = 2 };
constexpr std::size_t kGauge = 2;

struct PhraseToken {
  std::string text;
  bool head = false;
};

struct Phrase {
  std::vector<PhraseToken> tokens;
  bool head = false;
};

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(' ');
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(' ') - b + 1);
}

std::vector<Phrase> ParsePattern(const std::string& pattern) {
  std::vector<Phrase> phrases;
  std::stringstream ss(pattern);
  std::string part;
  while (std::getline(ss, part, '|')) {
    part = Trim(part);
    Phrase phrase;
    if (!part.empty() && part[0] == '!') {
      phrase.head = true;
      part = part.substr(1);
    }
    for (std::string tok : Tokenize(part)) {
      PhraseToken pt;
      if (tok[0] == '*') {
        pt.head = true;
        tok = tok.substr(1);
      }
      pt.text = tok;
      phrase.tokens.push_back(pt);
    }
    phrases.push_back(std::move(phrase));
  }
  return phrases;
}

std::vector<std::string> PatternTokens(const std::string& pattern) {
  std::vector<std::string> out;
  for (const Phrase& p : ParsePattern(pattern))
    for (const PhraseToken& t : p.tokens) out.push_back(t.text);
  return out;
}

std::string Fill(const std::string& token, const std::map<std::string, std::string>& slots) {
  if (token.size() > 2 && token.front() == '{' && token.back() == '}') {
    auto it = slots.find(token.substr(1, token.size() - 2));
    if (it == slots.end()) throw Error(ErrorKind::kTemplate, "unfilled slot " + token);
    return it->second;
  }
  return token;
}

std::vector<double> SiblingWeights(const std::vector<bool>& heads) {
  std::vector<double> w(heads.size());
  double total = 0.0;
  for (std::size_t i = 0; i < heads.size(); ++i) total += w[i] = heads[i] ? 2.0 : 1.0;
  for (double& x : w) x /= total;
  return w;
}

std::size_t IndexOf(const std::vector<std::string>& names, const std::string& name, ErrorKind kind,
                    const char* what) {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw Error(kind, std::string("unknown ") + what + " '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

const SceneObject& Unique(const SceneSpec& scene, const std::function<bool(const SceneObject&)>& pred,
                          const std::string& what) {
  const SceneObject* found = nullptr;
  for (const SceneObject& o : scene.objects) {
    if (!pred(o)) continue;
    if (found) throw Error(ErrorKind::kTemplate, "more than one " + what + " in scene");
    found = &o;
  }
  if (!found) throw Error(ErrorKind::kTemplate, "no " + what + " in scene");
  return *found;
}

struct Match {
  const Template* tmpl = nullptr;
  std::map<std::string, std::string> slots;
};

Match MatchQuestion(const std::string& question) {
  const std::vector<std::string> q = Tokenize(question);
  for (const Template& t : Templates()) {
    const std::vector<std::string> p = PatternTokens(t.pattern);
    if (p.size() != q.size()) continue;
    Match m{&t, {}};
    bool ok = true;
    for (std::size_t i = 0; ok && i < p.size(); ++i) {
      if (p[i] == "{class}") {
        ok = std::find(Classes().begin(), Classes().end(), q[i]) != Classes().end();
        m.slots["class"] = q[i];
      } else if (p[i] == "{k}") {
        ok = q[i] == "1" || q[i] == "2" || q[i] == "3";
        m.slots["k"] = q[i];
      } else {
        ok = p[i] == q[i];
      }
    }
    if (ok) return m;
  }
  throw Error(ErrorKind::kTemplate, "question matches no template: '" + question + "'");
}

}  // namespace

const std::vector<std::string>& Classes() {
  static const std::vector<std::string> v{"press", "conveyor", "gauge", "valve", "robot-arm", "toolbox"};
  return v;
}

const std::vector<std::string>& States() {
  static const std::vector<std::string> v{"running", "stopped", "fault"};
  return v;
}

const std::vector<std::string>& Categories() {
  static const std::vector<std::string> v{"anomaly-detection", "process-instruction", "tool-identification",
                                          "operator-dialog"};
  return v;
}

const std::vector<std::vector<std::string>>& Procedures() {
  static const std::vector<std::vector<std::string>> v{
      {"lockout-press", "inspect-die", "restart-press"},
      {"stop-belt", "check-tension", "restart-belt"},
      {"isolate-gauge", "recalibrate-gauge", "verify-reading"},
      {"close-valve", "replace-seal", "open-valve"},
      {"halt-arm", "reset-controller", "home-arm"},
      {"open-toolbox", "sort-tools", "lock-toolbox"},
  };
  return v;
}

const std::vector<std::string>& Tools() {
  static const std::vector<std::string> v{"wrench", "belt-tensioner", "calibrator", "spanner", "multimeter",
                                          "padlock-key"};
  return v;
}

const std::vector<std::string>& Buckets() {
  static const std::vector<std::string> v{"0-25", "25-50", "50-75", "75-100"};
  return v;
}

const std::vector<Template>& Templates() {
  static const std::vector<Template> v{
      {"fault-class", "anomaly-detection", "which *machine | *shows | !a *fault"},
      {"class-state", "anomaly-detection", "what is | the *state | !of the *{class}"},
      {"any-fault", "anomaly-detection", "is | any *machine | !in *fault"},
      {"fault-step", "process-instruction", "what is | !step *{k} | of the *procedure | for the *faulted machine"},
      {"stopped-next-step", "process-instruction", "what *follows | !step *{k} | when *servicing | the *stopped machine"},
      {"class-step", "process-instruction", "what is | !step *{k} | of the *procedure | for the *{class}"},
      {"fault-tool", "tool-identification", "which *tool | *repairs | !the *faulted machine"},
      {"stopped-tool", "tool-identification", "which *tool | does | !the *stopped machine | *need"},
      {"class-tool", "tool-identification", "which *tool | is *needed | !for the *{class}"},
      {"gauge-range", "operator-dialog", "what is | !the *gauge reading | *range"},
      {"class-side", "operator-dialog", "is | !the *{class} | on the *left | or *right"},
      {"class-level", "operator-dialog", "is | !the *{class} | at the *top | or *bottom"},
  };
  return v;
}

std::string BucketName(double reading) {
  const auto b = static_cast<std::size_t>(std::clamp(reading, 0.0, 100.0) / kBucketWidth);
  return Buckets()[std::min<std::size_t>(b, Buckets().size() - 1)];
}

Manifest BuildManifest(const std::vector<std::size_t>& feature_widths, std::size_t channels) {
  if (feature_widths.size() != 2 || feature_widths[0] < Classes().size() + States().size() ||
      feature_widths[1] < 4) {
    throw Error(ErrorKind::kConfiguration, "generator needs two scales with K_1 >= " +
                                               std::to_string(Classes().size() + States().size()) +
                                               " and K_2 >= 4");
  }
  Manifest m;
  auto add_token = [&m](const std::string& tok) {
    if (std::find(m.vocab.begin(), m.vocab.end(), tok) == m.vocab.end()) m.vocab.push_back(tok);
  };
  for (const Template& t : Templates())
    for (const std::string& tok : PatternTokens(t.pattern))
      if (tok.front() != '{') add_token(tok);
  for (const std::string& c : Classes()) add_token(c);
  for (const char* k : {"1", "2", "3"}) add_token(k);

  auto add_answer = [&m](const std::string& a, const std::string& cat) {
    m.answer_vocab.push_back(a);
    m.answer_categories.push_back(cat);
  };
  const auto& cats = Categories();
  for (const std::string& c : Classes()) add_answer(c, cats[0]);
  for (const std::string& s : States()) add_answer(s, cats[0]);
  add_answer("yes", cats[0]);
  add_answer("no", cats[0]);
  for (const auto& proc : Procedures())
    for (const std::string& step : proc) add_answer(step, cats[1]);
  for (const std::string& t : Tools()) add_answer(t, cats[2]);
  for (const std::string& b : Buckets()) add_answer(b, cats[3]);
  for (const char* side : {"left", "right", "top", "bottom"}) add_answer(side, cats[3]);

  m.categories = cats;
  m.classes = Classes();
  m.states = States();
  m.feature_widths = feature_widths;
  m.channels = channels;
  for (const Template& t : Templates()) m.templates.push_back({t.id, t.category, t.pattern});
  return m;
}

std::vector<std::vector<double>> RegionFeatures(const SceneObject& object,
                                                const std::vector<std::size_t>& feature_widths) {
  std::vector<std::vector<double>> f{std::vector<double>(feature_widths[0], 0.0),
                                     std::vector<double>(feature_widths[1], 0.0)};
  f[0][object.cls] = 1.0;
  f[0][Classes().size() + object.state] = 1.0;
  f[1][0] = object.reading / 100.0;
  f[1][1] = object.bbox.cx();
  f[1][2] = object.bbox.cy();
  f[1][3] = object.bbox.area();
  return f;
}

DecodedRegion DecodeRegion(const std::vector<std::vector<double>>& features) {
  const auto& s1 = features.at(0);
  const std::size_t nc = Classes().size(), ns = States().size();
  const auto cls = std::max_element(s1.begin(), s1.begin() + nc) - s1.begin();
  const auto state = std::max_element(s1.begin() + nc, s1.begin() + nc + ns) - (s1.begin() + nc);
  return {static_cast<std::size_t>(cls), static_cast<std::size_t>(state)};
}

SyntaxTree TemplateTree(const std::string& pattern, const std::map<std::string, std::string>& slots,
                        const Manifest& manifest) {
  const std::vector<Phrase> phrases = ParsePattern(pattern);
  SyntaxTree tree;
  int next_id = 0;
  std::vector<int> top_children;
  std::vector<bool> top_heads;
  std::vector<std::vector<int>> phrase_leaves;
  for (const Phrase& p : phrases) {
    std::vector<int> leaves;
    for (const PhraseToken& t : p.tokens) {
      tree.nodes.push_back({next_id, {}, {}, manifest.TokenId(Fill(t.text, slots))});
      leaves.push_back(next_id++);
    }
    phrase_leaves.push_back(std::move(leaves));
  }
  for (std::size_t i = 0; i < phrases.size(); ++i) {
    const Phrase& p = phrases[i];
    if (p.tokens.size() == 1) {
      top_children.push_back(phrase_leaves[i][0]);
    } else {
      std::vector<bool> heads;
      for (const PhraseToken& t : p.tokens) heads.push_back(t.head);
      tree.nodes.push_back({next_id, phrase_leaves[i], SiblingWeights(heads), std::nullopt});
      top_children.push_back(next_id++);
    }
    top_heads.push_back(p.head);
  }
  tree.nodes.push_back({next_id, top_children, SiblingWeights(top_heads), std::nullopt});
  tree.root = next_id;
  return tree;
}

std::string OracleAnswer(const SceneSpec& scene, const std::string& question) {
  const Match match = MatchQuestion(question);
  const std::string& id = match.tmpl->id;
  auto in_state = [](std::size_t s) { return [s](const SceneObject& o) { return o.state == s; }; };
  auto of_class = [&match](const SceneObject& o) { return Classes()[o.cls] == match.slots.at("class"); };
  auto step = [&match]() { return static_cast<std::size_t>(std::stoi(match.slots.at("k"))); };

  if (id == "fault-class") return Classes()[Unique(scene, in_state(kFault), "faulted machine").cls];
  if (id == "class-state") return States()[Unique(scene, of_class, match.slots.at("class")).state];
  if (id == "any-fault") {
    const bool any = std::any_of(scene.objects.begin(), scene.objects.end(), in_state(kFault));
    return any ? "yes" : "no";
  }
  if (id == "fault-step") return Procedures()[Unique(scene, in_state(kFault), "faulted machine").cls][step() - 1];
  if (id == "stopped-next-step") {
    const std::size_t k = step();
    if (k >= 3) throw Error(ErrorKind::kTemplate, "no step follows step 3");
    return Procedures()[Unique(scene, in_state(kStopped), "stopped machine").cls][k];
  }
  if (id == "class-step") {
    Unique(scene, of_class, match.slots.at("class"));
    return Procedures()[IndexOf(Classes(), match.slots.at("class"), ErrorKind::kTemplate, "class")][step() - 1];
  }
  if (id == "fault-tool") return Tools()[Unique(scene, in_state(kFault), "faulted machine").cls];
  if (id == "stopped-tool") return Tools()[Unique(scene, in_state(kStopped), "stopped machine").cls];
  if (id == "class-tool") {
    Unique(scene, of_class, match.slots.at("class"));
    return Tools()[IndexOf(Classes(), match.slots.at("class"), ErrorKind::kTemplate, "class")];
  }
  if (id == "gauge-range") {
    return BucketName(Unique(scene, [](const SceneObject& o) { return o.cls == kGauge; }, "gauge").reading);
  }
  if (id == "class-side") return Unique(scene, of_class, match.slots.at("class")).bbox.cx() < 0.5 ? "left" : "right";
  if (id == "class-level") return Unique(scene, of_class, match.slots.at("class")).bbox.cy() < 0.5 ? "top" : "bottom";
  throw Error(ErrorKind::kTemplate, "no rule for template " + id);
}

std::size_t OracleAnswerIndex(const SceneSpec& scene, const std::string& question, const Manifest& manifest) {
  return manifest.AnswerId(OracleAnswer(scene, question));
}

SceneSpec SceneFromRecord(const SampleRecord& record, const Manifest& manifest) {
  SceneSpec scene;
  for (std::size_t i = 0; i < record.regions.size(); ++i) {
    const RegionRecord& r = record.regions[i];
    scene.objects.push_back({manifest.ClassId(r.cls), manifest.StateId(r.state), r.reading, r.bbox, i});
  }
  return scene;
}

SampleRecord GenerateSample(const GeneratorOptions& options, const Manifest& manifest, std::size_t index) {
  Rng rng(MixSeed(options.seed, index));
  const std::size_t num_classes = Classes().size();

  const std::size_t category = rng.Index(Categories().size());
  std::vector<const Template*> family;
  for (const Template& t : Templates())
    if (t.category == Categories()[category]) family.push_back(&t);
  const Template& tmpl = *family[rng.Index(family.size())];
  const std::string& id = tmpl.id;

  const std::size_t n = options.min_objects + rng.Index(options.max_objects - options.min_objects + 1);
  std::vector<std::size_t> slots(kGridSide * kGridSide);
  std::iota(slots.begin(), slots.end(), 0);
  rng.Shuffle(slots);

  SceneSpec scene;
  scene.seed = MixSeed(options.seed, index);
  for (std::size_t i = 0; i < n; ++i) {
    SceneObject o;
    o.slot = slots[i];
    o.cls = rng.Index(num_classes);
    o.state = rng.Index(States().size());
    scene.objects.push_back(o);
  }
  // objects[0] is the referent the question is about.
  auto others = [&scene]() { return std::span(scene.objects).subspan(1); };
  const bool about_fault = id == "fault-class" || id == "fault-step" || id == "fault-tool";
  const bool about_stopped = id == "stopped-next-step" || id == "stopped-tool";
  const bool about_class = id == "class-state" || id == "class-step" || id == "class-tool" || id == "class-side" ||
                           id == "class-level";
  if (about_fault || id == "any-fault") {
    const bool has_fault = about_fault || rng.Bernoulli(0.5);
    scene.objects[0].state = has_fault ? kFault : (rng.Bernoulli(0.5) ? kRunning : kStopped);
    for (SceneObject& o : others()) o.state = rng.Bernoulli(0.5) ? kRunning : kStopped;
  } else if (about_stopped) {
    scene.objects[0].state = kStopped;
    for (SceneObject& o : others()) o.state = rng.Bernoulli(0.5) ? kRunning : kFault;
  }
  if (about_class || id == "gauge-range") {
    const std::size_t target = id == "gauge-range" ? kGauge : rng.Index(num_classes);
    scene.objects[0].cls = target;
    for (SceneObject& o : others()) {
      const std::size_t pick = rng.Index(num_classes - 1);
      o.cls = pick >= target ? pick + 1 : pick;
    }
  }
  const bool single_class = std::all_of(scene.objects.begin(), scene.objects.end(),
                                        [&scene](const SceneObject& o) { return o.cls == scene.objects[0].cls; });
  if (single_class) {
    SceneObject& o = scene.objects[1];
    o.cls = (o.cls + 1 + rng.Index(num_classes - 1)) % num_classes;
  }
  for (SceneObject& o : scene.objects) {
    o.reading = o.cls == kGauge ? rng.Uniform(0.0, 100.0) : 0.0;
    const double col = static_cast<double>(o.slot % kGridSide), row = static_cast<double>(o.slot / kGridSide);
    const double cell = 1.0 / static_cast<double>(kGridSide);
    o.bbox.x0 = col * cell + rng.Uniform(0.005, 0.04);
    o.bbox.x1 = (col + 1) * cell - rng.Uniform(0.005, 0.04);
    o.bbox.y0 = row * cell + rng.Uniform(0.005, 0.04);
    o.bbox.y1 = (row + 1) * cell - rng.Uniform(0.005, 0.04);
  }

  std::map<std::string, std::string> fill;
  const SceneObject target = scene.objects[0];
  if (about_class) fill["class"] = Classes()[target.cls];
  std::size_t k = 0;
  if (id == "fault-step" || id == "class-step") k = 1 + rng.Index(3);
  if (id == "stopped-next-step") k = 1 + rng.Index(2);
  if (k) fill["k"] = std::to_string(k);

  // Gold straight from the construction; the oracle re-derives it from text.
  std::string gold;
  if (id == "fault-class") gold = Classes()[target.cls];
  else if (id == "class-state") gold = States()[target.state];
  else if (id == "any-fault") gold = target.state == kFault ? "yes" : "no";
  else if (id == "fault-step" || id == "class-step") gold = Procedures()[target.cls][k - 1];
  else if (id == "stopped-next-step") gold = Procedures()[target.cls][k];
  else if (id == "fault-tool" || id == "stopped-tool" || id == "class-tool") gold = Tools()[target.cls];
  else if (id == "gauge-range") gold = BucketName(target.reading);
  else if (id == "class-side") gold = target.bbox.cx() < 0.5 ? "left" : "right";
  else gold = target.bbox.cy() < 0.5 ? "top" : "bottom";

  std::sort(scene.objects.begin(), scene.objects.end(),
            [](const SceneObject& a, const SceneObject& b) { return a.slot < b.slot; });

  SampleRecord record;
  for (const SceneObject& o : scene.objects) {
    RegionRecord r;
    r.bbox = o.bbox;
    r.features = RegionFeatures(o, options.feature_widths);
    if (options.noise_level > 0.0) {
      for (auto& scale : r.features)
        for (double& x : scale) x += options.noise_level * rng.Normal();
    }
    r.cls = Classes()[o.cls];
    r.state = States()[o.state];
    r.reading = o.reading;
    record.regions.push_back(std::move(r));
  }
  std::vector<std::string> words;
  for (const std::string& tok : PatternTokens(tmpl.pattern)) words.push_back(Fill(tok, fill));
  std::ostringstream q;
  for (std::size_t i = 0; i < words.size(); ++i) q << (i ? " " : "") << words[i];
  record.question = q.str();
  record.category = tmpl.category;
  record.template_id = id;
  record.tree = TemplateTree(tmpl.pattern, fill, manifest);
  record.answer = manifest.AnswerId(gold);
  record.answer_category = manifest.answer_categories[record.answer];
  return record;
}

Corpus Generate(const GeneratorOptions& options) {
  if (options.count == 0) throw Error(ErrorKind::kPrecondition, "sample count must be at least 1");
  if (options.noise_level < 0.0 || !std::isfinite(options.noise_level)) {
    throw Error(ErrorKind::kPrecondition, "noise level must be a finite non-negative number");
  }
  if (options.min_objects < 2 || options.max_objects > kMaxObjects || options.min_objects > options.max_objects) {
    throw Error(ErrorKind::kConfiguration, "object count range must lie within [2, " +
                                               std::to_string(kMaxObjects) + "]");
  }
  Corpus corpus;
  corpus.manifest = BuildManifest(options.feature_widths, options.channels);
  corpus.manifest.seed = options.seed;
  corpus.manifest.count = options.count;
  corpus.manifest.noise_level = options.noise_level;
  corpus.samples.reserve(options.count);
  for (std::size_t i = 0; i < options.count; ++i) corpus.samples.push_back(GenerateSample(options, corpus.manifest, i));
  return corpus;
}

}  // namespace vlqa::synth
