#include "mlg/cli/run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "mlg/error.hpp"

namespace mlg {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const std::string& why) {
  throw ValidationError("config key '" + key + "': bad value '" + value + "' (" + why + ")");
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end || !std::isfinite(out)) bad(key, v, "expected a number");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) bad(key, v, "expected an integer");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) bad(key, v, "expected a non-negative integer");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  bad(key, v, "expected 0 or 1");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

// Shortest text that reads back to the same double.
std::string fmt(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : "0"; }

struct Accessor {
  std::function<void(RunConfig&, const std::string& key, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::map<std::string, Accessor>& accessors() {
  static const std::map<std::string, Accessor> table = [] {
    std::map<std::string, Accessor> t;
    t["dim"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.model.dim = int(to_int(k, v)); },
                [](const RunConfig& c) { return std::to_string(c.model.dim); }};
    t["image_side"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) { c.model.image_side = int(to_int(k, v)); },
        [](const RunConfig& c) { return std::to_string(c.model.image_side); }};
    t["grid"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                   const auto g = to_int(k, v);
                   if (g < 2) bad(k, v, "must be >= 2");
                   c.model.image_side = int(8 * g);
                 },
                 [](const RunConfig& c) { return std::to_string(c.model.grid()); }};
    t["channels"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                       const auto parts = split_list(v);
                       if (parts.size() != 4) bad(k, v, "expected four comma-separated integers");
                       for (int i = 0; i < 4; ++i) c.model.channels[i] = int(to_int(k, parts[i]));
                     },
                     [](const RunConfig& c) {
                       const auto& ch = c.model.channels;
                       return std::to_string(ch[0]) + "," + std::to_string(ch[1]) + "," + std::to_string(ch[2]) + "," +
                              std::to_string(ch[3]);
                     }};
    t["text_layers"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) { c.model.text_layers = int(to_int(k, v)); },
        [](const RunConfig& c) { return std::to_string(c.model.text_layers); }};
    t["max_tokens"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) { c.model.max_tokens = int(to_int(k, v)); },
        [](const RunConfig& c) { return std::to_string(c.model.max_tokens); }};
    t["word_agg"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                       try {
                         c.model.word_agg = parse_word_aggregation(v);
                       } catch (const ValidationError&) {
                         bad(k, v, "expected sum or mean");
                       }
                     },
                     [](const RunConfig& c) { return to_string(c.model.word_agg); }};
    auto real = [&t](const std::string& name, double RunConfig::*m) {
      t[name] = {[m](RunConfig& c, const std::string& k, const std::string& v) { c.*m = to_double(k, v); },
                 [m](const RunConfig& c) { return fmt(c.*m); }};
    };
    t["tau1"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.temps.tau1 = to_double(k, v); },
                 [](const RunConfig& c) { return fmt(c.temps.tau1); }};
    t["tau2"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.temps.tau2 = to_double(k, v); },
                 [](const RunConfig& c) { return fmt(c.temps.tau2); }};
    t["tau3"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.temps.tau3 = to_double(k, v); },
                 [](const RunConfig& c) { return fmt(c.temps.tau3); }};
    auto opt = [&t](const std::string& name, std::optional<double> Temperatures::*m) {
      t[name] = {[m](RunConfig& c, const std::string& k, const std::string& v) {
                   const double d = to_double(k, v);
                   if (d == 0)
                     c.temps.*m = std::nullopt;
                   else
                     c.temps.*m = d;
                 },
                 [m](const RunConfig& c) { return fmt_opt(c.temps.*m); }};
    };
    opt("tau3_sw", &Temperatures::tau3_sw);
    opt("tau3_ds", &Temperatures::tau3_ds);
    opt("tau3_gr", &Temperatures::tau3_gr);
    t["lr"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.train.lr = to_double(k, v); },
               [](const RunConfig& c) { return fmt(c.train.lr); }};
    t["beta1"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.train.beta1 = to_double(k, v); },
                  [](const RunConfig& c) { return fmt(c.train.beta1); }};
    t["beta2"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.train.beta2 = to_double(k, v); },
                  [](const RunConfig& c) { return fmt(c.train.beta2); }};
    t["adam_eps"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.train.eps = to_double(k, v); },
                     [](const RunConfig& c) { return fmt(c.train.eps); }};
    t["lr_decay"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) { c.train.lr_decay = to_double(k, v); },
        [](const RunConfig& c) { return fmt(c.train.lr_decay); }};
    t["batch"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.train.batch = int(to_int(k, v)); },
                  [](const RunConfig& c) { return std::to_string(c.train.batch); }};
    t["epochs"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.train.epochs = int(to_int(k, v)); },
                   [](const RunConfig& c) { return std::to_string(c.train.epochs); }};
    t["seed"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.train.seed = to_u64(k, v); },
                 [](const RunConfig& c) { return std::to_string(c.train.seed); }};
    t["threads"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) { c.train.threads = int(to_int(k, v)); },
        [](const RunConfig& c) { return std::to_string(c.train.threads); }};
    t["sw"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.train.switches.sw = to_bool(k, v); },
               [](const RunConfig& c) { return std::string(c.train.switches.sw ? "1" : "0"); }};
    t["ds"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.train.switches.ds = to_bool(k, v); },
               [](const RunConfig& c) { return std::string(c.train.switches.ds ? "1" : "0"); }};
    t["gr"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.train.switches.gr = to_bool(k, v); },
               [](const RunConfig& c) { return std::string(c.train.switches.gr ? "1" : "0"); }};
    t["augment_shuffle"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) { c.train.augment.shuffle = to_bool(k, v); },
        [](const RunConfig& c) { return std::string(c.train.augment.shuffle ? "1" : "0"); }};
    t["augment_keep"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) { c.train.augment.keep_ratio = to_double(k, v); },
        [](const RunConfig& c) { return fmt(c.train.augment.keep_ratio); }};
    t["thresholds"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                         std::vector<double> out;
                         for (const auto& p : split_list(v)) out.push_back(to_double(k, p));
                         if (out.empty()) bad(k, v, "empty list");
                         c.thresholds = std::move(out);
                       },
                       [](const RunConfig& c) { return fmt_list(c.thresholds); }};
    real("theta", &RunConfig::theta);
    t["bootstrap_reps"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) { c.bootstrap_reps = int(to_int(k, v)); },
        [](const RunConfig& c) { return std::to_string(c.bootstrap_reps); }};
    t["heatmap_mode"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                           try {
                             c.heatmap_mode = parse_heatmap_mode(v);
                           } catch (const ValidationError&) {
                             bad(k, v, "expected clamp or minmax");
                           }
                         },
                         [](const RunConfig& c) { return to_string(c.heatmap_mode); }};
    real("cls_temperature", &RunConfig::cls_temperature);
    t["prompts"] = {[](RunConfig& c, const std::string&, const std::string& v) { c.prompts = v; },
                    [](const RunConfig& c) { return c.prompts; }};
    return t;
  }();
  return table;
}

}  // namespace

const std::vector<RunConfig::Key>& RunConfig::keys() {
  static const std::vector<Key> k{
      {"dim", "embedding width D (768)"},
      {"image_side", "input side in pixels, multiple of 16 (224)"},
      {"grid", "shallow grid size G; sets image_side = 8*G (28)"},
      {"channels", "backbone stage widths (8,16,32,32)"},
      {"text_layers", "text mixing layers (4)"},
      {"max_tokens", "token budget H per report (64)"},
      {"word_agg", "subword to word aggregation: sum or mean (sum)"},
      {"tau1", "attention temperature over image positions (0.25)"},
      {"tau2", "item aggregation temperature (0.2)"},
      {"tau3", "contrastive temperature (0.1)"},
      {"tau3_sw", "word-level contrastive temperature, 0 = tau3 (0)"},
      {"tau3_ds", "sentence-level contrastive temperature, 0 = tau3 (0)"},
      {"tau3_gr", "report-level contrastive temperature, 0 = tau3 (0)"},
      {"lr", "Adam learning rate (2e-05)"},
      {"beta1", "Adam beta1 (0.9)"},
      {"beta2", "Adam beta2 (0.999)"},
      {"adam_eps", "Adam epsilon (1e-08)"},
      {"lr_decay", "per-epoch learning-rate factor (0.9)"},
      {"batch", "batch size B (128)"},
      {"epochs", "training epochs (6)"},
      {"seed", "master seed (0)"},
      {"threads", "worker threads (1)"},
      {"sw", "word/shallow loss term (1)"},
      {"ds", "sentence/deep loss term (1)"},
      {"gr", "report/global loss term (1)"},
      {"augment_shuffle", "shuffle sentences during training (1)"},
      {"augment_keep", "fraction of sentences kept during training (1)"},
      {"thresholds", "multi-threshold protocol list (0.1,0.2,0.3,0.4,0.5)"},
      {"theta", "fixed-protocol threshold when no validation set is given (0.3)"},
      {"bootstrap_reps", "bootstrap replicates (1000)"},
      {"heatmap_mode", "clamp or minmax (clamp)"},
      {"cls_temperature", "classification softmax temperature (1)"},
      {"prompts", "prompt file; empty = <corpus>/prompts.json ()"},
  };
  return k;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& t = accessors();
  auto it = t.find(key);
  if (it == t.end()) throw ValidationError("unknown config key '" + key + "'");
  it->second.set(*this, key, trim(value));
}

std::string RunConfig::get(const std::string& key) const {
  const auto& t = accessors();
  auto it = t.find(key);
  if (it == t.end()) throw ValidationError("unknown config key '" + key + "'");
  return it->second.get(*this);
}

void RunConfig::apply_profile(const std::string& name) {
  if (name == "full") return;
  if (name != "toy") throw ValidationError("unknown profile '" + name + "' (expected full or toy)");
  model.dim = 32;
  model.image_side = 64;
  model.max_tokens = 40;
  train.lr = 1e-3;
  train.batch = 16;
  train.epochs = 10;
}

void RunConfig::apply_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", n);
    const auto key = trim(line.substr(0, eq));
    try {
      set(key, line.substr(eq + 1));
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), n);
    }
  }
}

void RunConfig::apply_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  try {
    apply_text(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line);
  }
}

std::string RunConfig::format() const {
  std::string out;
  for (const auto& k : keys()) out += k.name + " = " + get(k.name) + "\n";
  return out;
}

void RunConfig::validate() const {
  ModelConfig m = model;
  m.validate();
  temps.validate();
  train.validate();
  for (double t : thresholds)
    if (!std::isfinite(t)) throw ValidationError("thresholds must be finite");
  if (bootstrap_reps < 1) throw ValidationError("bootstrap_reps must be >= 1");
  if (!(cls_temperature > 0)) throw ValidationError("cls_temperature must be > 0");
}

}  // namespace mlg
