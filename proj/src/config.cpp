#include "hiret/config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "hiret/errors.hpp"

namespace hiret {

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string format_list(const std::vector<int>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + std::to_string(xs[i]);
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) throw ConfigError("bad value for " + key + ": '" + text + "'");
  return value;
}

std::vector<int> parse_list(const std::string& key, const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    if (b == std::string::npos) continue;
    out.push_back(parse_number<int>(key, item.substr(b, e - b + 1)));
  }
  return out;
}

// One binding per config key. `get` renders the current value; `set` parses.
struct Binding {
  std::string key;
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

template <typename T>
Binding bind_key(std::string key, T& field) {
  Binding b;
  b.key = key;
  if constexpr (std::is_same_v<T, double>) {
    b.get = [&field] { return format_double(field); };
    b.set = [&field, key](const std::string& s) { field = parse_number<double>(key, s); };
  } else if constexpr (std::is_same_v<T, std::string>) {
    b.get = [&field] { return field; };
    b.set = [&field](const std::string& s) { field = s; };
  } else if constexpr (std::is_same_v<T, bool>) {
    b.get = [&field] { return std::string(field ? "true" : "false"); };
    b.set = [&field, key](const std::string& s) {
      if (s != "true" && s != "false") throw ConfigError("bad value for " + key + ": '" + s + "' (true or false)");
      field = s == "true";
    };
  } else if constexpr (std::is_same_v<T, std::vector<int>>) {
    b.get = [&field] { return format_list(field); };
    b.set = [&field, key](const std::string& s) { field = parse_list(key, s); };
  } else {
    b.get = [&field] { return std::to_string(field); };
    b.set = [&field, key](const std::string& s) { field = parse_number<T>(key, s); };
  }
  return b;
}

void bind_training(std::vector<Binding>& out, const std::string& section, TrainingConfig& t) {
  out.push_back(bind_key(section + ".lr", t.lr));
  if (section == "vlr") out.push_back(bind_key(section + ".image_lr", t.image_lr));
  out.push_back(bind_key(section + ".weight_decay", t.weight_decay));
  out.push_back(bind_key(section + ".clip", t.clip));
  out.push_back(bind_key(section + ".beta1", t.beta1));
  out.push_back(bind_key(section + ".beta2", t.beta2));
  out.push_back(bind_key(section + ".batch", t.batch));
  out.push_back(bind_key(section + ".epochs", t.epochs));
  out.push_back(bind_key(section + ".milestones", t.schedule.milestones));
  out.push_back(bind_key(section + ".every", t.schedule.every));
  out.push_back(bind_key(section + ".gamma", t.schedule.gamma));
}

std::vector<Binding> bindings(Config& c) {
  std::vector<Binding> b;
  b.push_back(bind_key("run.preset", c.preset));
  b.push_back(bind_key("run.seed", c.seed));
  b.push_back(bind_key("data.samples", c.samples));
  b.push_back(bind_key("data.grid", c.world.grid));
  b.push_back(bind_key("data.cells", c.world.cells));
  b.push_back(bind_key("data.views", c.world.views));
  b.push_back(bind_key("data.noise", c.world.noise));
  b.push_back(bind_key("data.train", c.split.train));
  b.push_back(bind_key("data.val", c.split.val));
  b.push_back(bind_key("data.test", c.split.test));
  b.push_back(bind_key("data.min_count", c.min_count));
  b.push_back(bind_key("data.dictionary", c.dictionary));
  b.push_back(bind_key("model.d", c.enc.d));
  b.push_back(bind_key("model.patch_hidden", c.enc.patch_hidden));
  b.push_back(bind_key("model.text_hidden", c.enc.text_hidden));
  b.push_back(bind_key("model.report_max_tokens", c.enc.report_max_tokens));
  b.push_back(bind_key("model.sentence_max_tokens", c.enc.sentence_max_tokens));
  b.push_back(bind_key("model.attn", c.attn));
  b.push_back(bind_key("model.hidden", c.decoder.hidden));
  b.push_back(bind_key("model.ffn", c.decoder.ffn));
  b.push_back(bind_key("model.keywords", c.decoder.keywords));
  b.push_back(bind_key("model.diseases", c.decoder.diseases));
  b.push_back(bind_key("model.reports", c.decoder.reports));
  b.push_back(bind_key("model.sentences", c.decoder.sentences));
  b.push_back(bind_key("model.carry_word_state", c.decoder.carry_word_state));
  b.push_back(bind_key("model.max_sentences", c.limits.max_sentences));
  b.push_back(bind_key("model.max_words", c.limits.max_words));
  bind_training(b, "vlr", c.vlr);
  bind_training(b, "llr", c.llr);
  b.push_back(bind_key("llr.pairs_per_epoch", c.llr_pairs));
  bind_training(b, "decoder", c.dec);
  return b;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

AdamOptions TrainingConfig::adam() const {
  AdamOptions o;
  o.lr = lr;
  o.beta1 = beta1;
  o.beta2 = beta2;
  o.weight_decay = weight_decay;
  o.clip = clip;
  if (image_lr > 0.0) o.group_lr.emplace_back(kImagePrefix, image_lr);
  return o;
}

VlrDims Config::vlr_dims(std::size_t vocab) const {
  VlrDims d;
  d.enc = enc;
  d.enc.grid = world.grid;
  d.enc.cells = world.cells;
  d.enc.vocab = vocab;
  d.views = world.views;
  d.attn = attn;
  return d;
}

DecoderConfig Config::decoder_config(std::size_t vocab) const {
  DecoderConfig d = decoder;
  d.d = enc.d;
  d.attn = attn;
  d.views = world.views;
  d.vocab = vocab;
  return d;
}

Config preset_config(const std::string& name) {
  Config c;
  c.preset = name;
  if (name == "desk") {
    c.vlr = {.lr = 3e-3, .batch = 16, .epochs = 120, .schedule = {.milestones = {90}, .gamma = 0.1}};
    c.llr = {.lr = 3e-3, .batch = 16, .epochs = 60, .schedule = {.every = 40, .gamma = 0.2}};
    c.dec = {.lr = 3e-3, .batch = 16, .epochs = 12, .schedule = {.milestones = {9}, .gamma = 0.1}};
    return c;
  }
  if (name == "large") {
    c.decoder.hidden = 512;
    c.vlr = {.lr = 1e-5, .image_lr = 1e-4, .batch = 16, .epochs = 100, .schedule = {.milestones = {50}, .gamma = 0.1}};
    c.llr = {.lr = 1e-5, .batch = 64, .epochs = 100, .schedule = {.every = 20, .gamma = 0.2}};
    c.dec = {.lr = 3e-4, .batch = 32, .epochs = 100, .schedule = {.milestones = {50}, .gamma = 0.1}};
    return c;
  }
  throw ConfigError("unknown preset '" + name + "' (expected desk or large)");
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> kNames = {"desk", "large"};
  return kNames;
}

void validate(const Config& c) {
  auto positive = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what + " must be positive");
  };
  positive(c.samples >= 10, "data.samples (at least 10)");
  positive(c.enc.d > 0 && c.enc.patch_hidden > 0 && c.enc.text_hidden > 0, "model sizes");
  positive(c.attn > 0 && c.decoder.hidden > 0 && c.decoder.ffn > 0, "model sizes");
  positive(c.decoder.reports >= 1, "model.reports (k_r)");
  positive(c.decoder.sentences >= 1, "model.sentences (k_s)");
  positive(c.decoder.diseases >= 1, "model.diseases (m)");
  positive(c.limits.max_sentences >= 1 && c.limits.max_words >= 1, "generation limits");
  positive(c.dictionary >= 1, "data.dictionary");
  if (c.world.cells == 0 || c.world.grid % c.world.cells != 0) {
    throw ConfigError("data.grid " + std::to_string(c.world.grid) + " is not divisible by data.cells " +
                      std::to_string(c.world.cells));
  }
  for (const auto* t : {&c.vlr, &c.llr, &c.dec}) {
    positive(t->lr > 0.0 && t->batch > 0 && t->epochs >= 0, "training lr/batch");
    if (t->weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
  }
  positive(c.llr_pairs >= 2, "llr.pairs_per_epoch");
}

Config load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  Config c = preset_config(tree.get<std::string>("run.preset", "desk"));
  auto table = bindings(c);
  std::set<std::string> known;
  for (const auto& b : table) known.insert(b.key);
  for (const auto& [section, entries] : tree) {
    for (const auto& [name, value] : entries) {
      const std::string key = section + "." + name;
      if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "' in " + path.string());
    }
  }
  for (auto& b : table) {
    if (auto v = tree.get_optional<std::string>(b.key)) b.set(*v);
  }
  validate(c);
  return c;
}

void set_config_value(Config& config, const std::string& key, const std::string& value) {
  for (auto& b : bindings(config)) {
    if (b.key == key) return b.set(value);
  }
  throw ConfigError("unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> config_entries(const Config& config) {
  Config copy = config;
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& b : bindings(copy)) out.emplace_back(b.key, b.get());
  return out;
}

void save_config(const std::filesystem::path& path, const Config& config) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  std::string section;
  for (const auto& [key, value] : config_entries(config)) {
    const auto dot = key.find('.');
    if (key.substr(0, dot) != section) {
      section = key.substr(0, dot);
      out << (out.tellp() > 0 ? "\n" : "") << '[' << section << "]\n";
    }
    out << key.substr(dot + 1) << " = " << value << '\n';
  }
}

std::string config_fingerprint(const Config& config, Stage stage) {
  std::vector<std::string> sections = {"run.seed", "data.", "model.d", "model.patch_hidden", "model.text_hidden",
                                       "model.report_max_tokens", "model.sentence_max_tokens", "model.attn"};
  switch (stage) {
    case Stage::kVlr: sections.push_back("vlr."); break;
    case Stage::kLlr: sections.push_back("llr."); break;
    case Stage::kDecoder: sections = {"run.seed", "data.", "model.", "vlr.", "llr.", "decoder."}; break;
  }
  std::string text = stage_name(stage) + '\n';
  for (const auto& [key, value] : config_entries(config)) {
    for (const auto& s : sections) {
      if (s.ends_with('.') ? key.starts_with(s) : key == s) {
        text += key + '=' + value + '\n';
        break;
      }
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(text)));
  return buf;
}

}  // namespace hiret
