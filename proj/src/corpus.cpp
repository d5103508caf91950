#include "hiret/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "hiret/errors.hpp"
#include "hiret/rng.hpp"

namespace hiret {

using nlohmann::json;

namespace {

Sentence words(const std::string& text) {
  Sentence out;
  std::istringstream in(text);
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

struct ClassSpec {
  const char* name;
  std::size_t row;
  std::size_t col;
  const char* templates[3];
};

// Anatomical order: upper zones, then lower zones and bones.
constexpr ClassSpec kClasses[] = {
    {"pneumothorax", 1, 0, {"small apical pneumothorax", "pneumothorax at the apex", "right sided pneumothorax"}},
    {"emphysema", 1, 1, {"hyperinflated lungs with emphysema", "emphysema in the upper lobes", "mild emphysema"}},
    {"nodule", 1, 2, {"small pulmonary nodule", "nodule in the mid lung", "calcified granuloma nodule"}},
    {"cardiomegaly", 1, 3,
     {"enlarged cardiac silhouette with cardiomegaly", "mild cardiomegaly", "cardiomegaly is present"}},
    {"consolidation", 2, 0,
     {"focal consolidation in the lower lobe", "airspace consolidation", "patchy basilar consolidation"}},
    {"atelectasis", 2, 1, {"bibasilar atelectasis", "atelectasis at the base", "linear subsegmental atelectasis"}},
    {"effusion", 2, 2, {"small pleural effusion", "effusion at the costophrenic angle", "layering pleural effusion"}},
    {"fracture", 2, 3, {"healed rib fracture", "fracture of the posterior rib", "acute displaced fracture"}},
};

constexpr const char* kNormals[] = {"clear lungs",         "normal heart size",          "intact osseous structures",
                                    "no acute disease",    "normal mediastinal contours", "unremarkable soft tissues"};

struct Frame {
  const char* prefix;
  const char* suffix;
};
constexpr Frame kFrames[] = {{"", "seen"},     {"there is", ""}, {"findings of", ""}, {"", "noted"},
                             {"evidence of", ""}, {"", "identified"}, {"stable", ""},      {"", "observed"}};

constexpr const char* kOrganTerms[] = {"apical",  "apex",      "lungs",       "lung",       "lobe",
                                       "lobes",   "pulmonary", "cardiac",     "silhouette", "heart",
                                       "basilar", "base",      "pleural",     "costophrenic", "rib",
                                       "mediastinal", "osseous", "granuloma", "airspace",   "bibasilar"};

constexpr double kNoFinding = 0.25;
constexpr double kClassCount[] = {0.5, 0.4, 0.1};  // P(K = 1, 2, 3) given a finding
constexpr double kPreferred = 0.6;
constexpr std::size_t kShiftRows = 1;
constexpr std::size_t kShiftCols = 2;
constexpr double kMarkerValue = 0.8;

std::size_t pick_preferred(Rng& rng, std::size_t preferred, std::size_t count) {
  if (rng.bernoulli(kPreferred)) return preferred;
  std::size_t other = rng.index(count - 1);
  return other >= preferred ? other + 1 : other;
}

double quantize(double x) { return std::round(x * 1e4) / 1e4; }

}  // namespace

std::size_t CorpusSample::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

SyntheticWorld SyntheticWorld::make(std::uint64_t seed, WorldOptions options) {
  if (options.cells == 0 || options.grid % options.cells != 0) {
    throw ConfigError("grid " + std::to_string(options.grid) + " is not divisible by " + std::to_string(options.cells) +
                      " cells");
  }
  const std::size_t cell_px = options.grid / options.cells;
  if (options.cells < 4 || cell_px < kStamp + 1) {
    throw ConfigError("synthetic world needs at least 4x4 cells of 7 pixels");
  }
  SyntheticWorld w;
  w.options_ = options;
  Rng rng(Rng::derive(seed, "world"));
  for (const ClassSpec& spec : kClasses) {
    DiseaseClass c;
    c.name = spec.name;
    c.row = spec.row;
    c.col = spec.col;
    for (const char* t : spec.templates) c.templates.push_back(words(t));
    c.stamp = Tensor({kStamp, kStamp});
    // Signed patterns keep different classes close to orthogonal.
    for (double& v : c.stamp.values()) v = quantize((rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.5, 1.5));
    w.classes_.push_back(std::move(c));
  }
  for (std::size_t s = 0; s < std::size(kFrames); ++s) {
    Site site;
    site.prefix = words(kFrames[s].prefix);
    site.suffix = words(kFrames[s].suffix);
    // Markers sit in the top and bottom border rows, away from the findings.
    site.marker_row = s < 4 ? 0 : options.cells - 1;
    site.marker_col = s % 4;
    w.sites_.push_back(std::move(site));
  }
  for (const char* n : kNormals) w.normals_.push_back(words(n));
  for (const auto& c : w.classes_) w.domain_terms_.push_back(c.name);
  for (const char* t : kOrganTerms) w.domain_terms_.push_back(t);
  return w;
}

std::vector<std::string> SyntheticWorld::class_unique_tokens(std::size_t cls) const {
  std::map<std::string, std::set<std::size_t>> owners;  // token -> classes using it; npos for non-class text
  const std::size_t other = static_cast<std::size_t>(-1);
  for (std::size_t c = 0; c < classes_.size(); ++c) {
    for (const auto& t : classes_[c].templates)
      for (const auto& tok : t) owners[tok].insert(c);
  }
  for (const auto& n : normals_)
    for (const auto& tok : n) owners[tok].insert(other);
  for (const auto& s : sites_) {
    for (const auto& tok : s.prefix) owners[tok].insert(other);
    for (const auto& tok : s.suffix) owners[tok].insert(other);
  }
  std::vector<std::string> out;
  for (const auto& [tok, who] : owners) {
    if (who.size() == 1 && *who.begin() == cls) out.push_back(tok);
  }
  return out;
}

std::string SyntheticWorld::to_json() const {
  json j;
  j["grid"] = options_.grid;
  j["cells"] = options_.cells;
  j["views"] = options_.views;
  j["noise"] = options_.noise;
  for (const auto& c : classes_) {
    json jc;
    jc["name"] = c.name;
    jc["cell"] = {c.row, c.col};
    jc["templates"] = c.templates;
    jc["stamp"] = std::vector<double>(c.stamp.values().begin(), c.stamp.values().end());
    j["classes"].push_back(jc);
  }
  for (const auto& s : sites_) {
    j["sites"].push_back({{"prefix", s.prefix}, {"suffix", s.suffix}, {"marker_cell", {s.marker_row, s.marker_col}}});
  }
  j["normal_templates"] = normals_;
  j["domain_terms"] = domain_terms_;
  return j.dump(2);
}

std::vector<CorpusSample> generate_corpus(std::uint64_t seed, std::size_t n, const SyntheticWorld& world) {
  if (n < 10) throw ValidationError("corpus needs at least 10 samples, got " + std::to_string(n));
  const WorldOptions& opt = world.options();
  const std::size_t G = opt.grid;
  const std::size_t cell_px = G / opt.cells;
  const std::size_t C = world.num_classes();
  const std::uint64_t base = Rng::derive(seed, "corpus");

  std::vector<CorpusSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(Rng::derive(base, "sample:" + std::to_string(i)));
    CorpusSample s;
    s.id = static_cast<std::int64_t>(i);

    if (!rng.bernoulli(kNoFinding)) {
      const double u = rng.uniform();
      const std::size_t k = u < kClassCount[0] ? 1 : (u < kClassCount[0] + kClassCount[1] ? 2 : 3);
      std::vector<int> order(C);
      for (std::size_t c = 0; c < C; ++c) order[c] = static_cast<int>(c);
      rng.shuffle(order);
      s.labels.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
      std::sort(s.labels.begin(), s.labels.end());
    }
    const std::size_t site_index = rng.index(world.sites().size());
    const Site& site = world.sites()[site_index];

    // Clean image: class stamps with amplitude jitter plus the site marker.
    Tensor clean({G, G});
    for (int c : s.labels) {
      const DiseaseClass& dc = world.classes()[static_cast<std::size_t>(c)];
      const double amp = rng.uniform(0.8, 1.2);
      for (std::size_t y = 0; y < SyntheticWorld::kStamp; ++y)
        for (std::size_t x = 0; x < SyntheticWorld::kStamp; ++x)
          clean.at(dc.row * cell_px + 1 + y, dc.col * cell_px + 1 + x) += amp * dc.stamp.at(y, x);
    }
    for (std::size_t y = 0; y < SyntheticWorld::kMarker; ++y)
      for (std::size_t x = 0; x < SyntheticWorld::kMarker; ++x)
        clean.at(site.marker_row * cell_px + 2 + y, site.marker_col * cell_px + 2 + x) = kMarkerValue;

    for (std::size_t v = 0; v < opt.views; ++v) {
      Tensor view({G, G});
      // Later views are shifted copies, a stand-in for a second projection.
      const std::size_t dy = v == 0 ? 0 : kShiftRows * v;
      const std::size_t dx = v == 0 ? 0 : kShiftCols * v;
      for (std::size_t y = 0; y < G; ++y) {
        for (std::size_t x = 0; x < G; ++x) {
          const double src = y >= dy && x >= dx ? clean.at(y - dy, x - dx) : 0.0;
          view.at(y, x) = quantize(src + rng.normal(0.0, opt.noise));
        }
      }
      s.views.push_back(std::move(view));
    }

    // Every sentence carries the site's frame.
    auto framed = [&site](const Sentence& body) {
      Sentence sent = site.prefix;
      sent.insert(sent.end(), body.begin(), body.end());
      sent.insert(sent.end(), site.suffix.begin(), site.suffix.end());
      return sent;
    };
    for (int c : s.labels) {
      const DiseaseClass& dc = world.classes()[static_cast<std::size_t>(c)];
      const std::size_t t = pick_preferred(rng, (site_index + static_cast<std::size_t>(c)) % dc.templates.size(),
                                           dc.templates.size());
      s.sentences.push_back(framed(dc.templates[t]));
    }
    const auto& normals = world.normal_templates();
    const std::size_t first = pick_preferred(rng, site_index % normals.size(), normals.size());
    s.sentences.push_back(framed(normals[first]));
    if (s.labels.size() <= 1) {
      std::size_t second = rng.index(normals.size() - 1);
      if (second >= first) ++second;
      s.sentences.push_back(framed(normals[second]));
    }
    out.push_back(std::move(s));
  }
  return out;
}

CorpusSplit split_corpus(const std::vector<CorpusSample>& corpus, std::uint64_t seed, SplitRatios ratios) {
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must be non-negative and sum to 1");
  }
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(Rng::derive(seed, "split"));
  rng.shuffle(order);
  const auto n = static_cast<double>(corpus.size());
  const auto n_train = static_cast<std::size_t>(std::llround(ratios.train * n));
  const auto n_val = std::min(corpus.size() - n_train, static_cast<std::size_t>(std::llround(ratios.val * n)));
  CorpusSplit out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& dst = i < n_train ? out.train : (i < n_train + n_val ? out.val : out.test);
    dst.push_back(corpus[order[i]]);
  }
  auto by_id = [](const CorpusSample& a, const CorpusSample& b) { return a.id < b.id; };
  std::sort(out.train.begin(), out.train.end(), by_id);
  std::sort(out.val.begin(), out.val.end(), by_id);
  std::sort(out.test.begin(), out.test.end(), by_id);
  return out;
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{"<pad>", "<start>", "<end>", "<unk>"}) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  static const char* specials[] = {"<pad>", "<start>", "<end>", "<unk>"};
  if (tokens_.size() < kSpecials) throw ValidationError("vocabulary is missing the special tokens");
  for (int i = 0; i < kSpecials; ++i) {
    if (tokens_[static_cast<std::size_t>(i)] != specials[i]) {
      throw ValidationError("vocabulary slot " + std::to_string(i) + " must be " + specials[i]);
    }
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw ValidationError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

Vocabulary Vocabulary::build(const std::vector<CorpusSample>& train, int min_count) {
  if (train.empty()) throw ValidationError("cannot build a vocabulary from an empty split");
  std::map<std::string, int> counts;
  for (const auto& s : train)
    for (const auto& sent : s.sentences)
      for (const auto& tok : sent) ++counts[tok];
  std::vector<std::string> tokens{"<pad>", "<start>", "<end>", "<unk>"};
  for (const auto& [tok, c] : counts) {
    if (c > min_count) tokens.push_back(tok);
  }
  return Vocabulary(std::move(tokens));
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& token) const { return index_.contains(token); }

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw ValidationError("token id " + std::to_string(id) + " outside vocabulary");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(const Sentence& sentence) const {
  std::vector<int> out;
  out.reserve(sentence.size());
  for (const auto& t : sentence) out.push_back(id(t));
  return out;
}

Sentence Vocabulary::decode(const std::vector<int>& ids) const {
  Sentence out;
  for (int i : ids) out.push_back(token(i));
  return out;
}

std::string to_lower(std::string s) {
  for (char& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

KeywordDictionary build_keyword_dictionary(const std::vector<CorpusSample>& train, const SyntheticWorld& world,
                                           const Vocabulary& vocab, std::size_t size) {
  if (size == 0) throw ValidationError("keyword dictionary size must be positive");
  std::set<std::string> domain;
  for (const auto& t : world.domain_terms()) domain.insert(to_lower(t));
  std::map<std::string, int> counts;
  for (const auto& s : train)
    for (const auto& sent : s.sentences)
      for (const auto& tok : sent) {
        std::string low = to_lower(tok);
        if (domain.contains(low)) ++counts[low];
      }
  std::vector<std::pair<std::string, int>> ranked;
  for (const auto& [tok, c] : counts) {
    if (vocab.contains(tok)) ranked.emplace_back(tok, c);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  KeywordDictionary out;
  for (std::size_t i = 0; i < ranked.size() && i < size; ++i) out.words.push_back(ranked[i].first);
  if (out.words.empty()) throw ValidationError("no domain term occurs in the training split");
  return out;
}

void write_corpus(const std::filesystem::path& path, const std::vector<CorpusSample>& corpus) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& s : corpus) {
    json j;
    j["id"] = s.id;
    j["views"] = json::array();
    for (const auto& v : s.views) j["views"].push_back(std::vector<double>(v.values().begin(), v.values().end()));
    j["sentences"] = s.sentences;
    j["labels"] = s.labels;
    out << j.dump() << '\n';
  }
}

std::vector<CorpusSample> read_corpus(const std::filesystem::path& path, std::size_t grid) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("corpus file " + path.string() + " not found; run `hiret synth-data` first");
  std::vector<CorpusSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      CorpusSample s;
      s.id = j.at("id").get<std::int64_t>();
      for (const auto& v : j.at("views")) s.views.emplace_back(Shape{grid, grid}, v.get<std::vector<double>>());
      s.sentences = j.at("sentences").get<std::vector<Sentence>>();
      s.labels = j.at("labels").get<std::vector<int>>();
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const DimensionError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_string_array(const std::filesystem::path& path, const std::vector<std::string>& items) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << json(items).dump(1) << '\n';
}

std::vector<std::string> read_string_array(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError(path.string() + " not found; run `hiret synth-data` first");
  try {
    return json::parse(in).get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace hiret
