#include "mlg/cli/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mlg/error.hpp"
#include "mlg/rng.hpp"

namespace mlg {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'M', 'L', 'G', 'C', 'K', 'P', 'T', '\0'};

class Writer {
 public:
  template <typename T>
  void put(T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    out_.append(b, sizeof(T));
  }
  void bytes(const std::string& s) { out_ += s; }
  void str(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    out_ += s;
  }
  void floats(const std::vector<float>& v) {
    put<std::uint64_t>(v.size());
    out_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& s, std::string what) : s_(s), what_(std::move(what)) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, s_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string r = s_.substr(pos_, n);
    pos_ += n;
    return r;
  }
  std::string str() { return bytes(get<std::uint32_t>()); }
  std::vector<float> floats() {
    const auto n = get<std::uint64_t>();
    if (n > (s_.size() - pos_) / sizeof(float)) fail();
    std::vector<float> v(n);
    std::memcpy(v.data(), s_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
    return v;
  }
  bool done() const { return pos_ == s_.size(); }

 private:
  void need(std::size_t n) {
    if (n > s_.size() - pos_) fail();
  }
  [[noreturn]] void fail() { throw ParseError("truncated checkpoint " + what_ + " section", 0); }
  const std::string& s_;
  std::size_t pos_ = 0;
  std::string what_;
};

nlohmann::ordered_json manifest_of(const Checkpoint& ck) {
  const auto& c = ck.model.config;
  const auto& t = ck.model.temps;
  nlohmann::ordered_json j;
  j["format_version"] = Checkpoint::kVersion;
  j["fingerprint"] = c.fingerprint();
  j["architecture"] = {{"dim", c.dim},
                       {"image_side", c.image_side},
                       {"in_channels", c.in_channels},
                       {"channels", c.channels},
                       {"text_layers", c.text_layers},
                       {"vocab_size", c.vocab_size},
                       {"max_tokens", c.max_tokens},
                       {"word_agg", to_string(c.word_agg)}};
  nlohmann::ordered_json temps{{"tau1", t.tau1}, {"tau2", t.tau2}, {"tau3", t.tau3}};
  if (t.tau3_sw) temps["tau3_sw"] = *t.tau3_sw;
  if (t.tau3_ds) temps["tau3_ds"] = *t.tau3_ds;
  if (t.tau3_gr) temps["tau3_gr"] = *t.tau3_gr;
  j["temperatures"] = temps;
  j["tokenizer_hash"] = ck.vocab.hash();
  j["norm"] = {{"mean", ck.stats.mean}, {"std", ck.stats.std}};
  j["has_state"] = ck.state.has_value();
  j["run_config"] = ck.run_config;
  return j;
}

std::string encode_state(const TrainState& s) {
  Writer w;
  w.put<std::int32_t>(s.epoch);
  w.put<std::int64_t>(s.step);
  w.put<std::int64_t>(s.adam_t);
  w.put<double>(s.best_val);
  w.put<std::int32_t>(s.best_epoch);
  for (const auto* group : {&s.m, &s.v, &s.best}) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(group->size()));
    for (const auto& t : *group) w.floats(t);
  }
  return w.take();
}

TrainState decode_state(const std::string& bytes) {
  Reader r(bytes, "state");
  TrainState s;
  s.epoch = r.get<std::int32_t>();
  s.step = r.get<std::int64_t>();
  s.adam_t = r.get<std::int64_t>();
  s.best_val = r.get<double>();
  s.best_epoch = r.get<std::int32_t>();
  for (auto* group : {&s.m, &s.v, &s.best}) {
    const auto n = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n; ++i) group->push_back(r.floats());
  }
  if (!r.done()) throw ParseError("trailing bytes in checkpoint state section", 0);
  return s;
}

void check_state_shapes(const TrainState& s, const Model<float>& model) {
  const auto params = model.parameters();
  for (const auto* group : {&s.m, &s.v, &s.best}) {
    if (group->empty()) continue;
    if (group->size() != params.size()) throw ValidationError("checkpoint state does not match the model");
    for (std::size_t i = 0; i < params.size(); ++i)
      if ((*group)[i].size() != params[i]->size()) throw ValidationError("checkpoint state does not match the model");
  }
}

}  // namespace

std::string encode_model_section(const Model<float>& model) {
  Writer w;
  const auto params = model.parameters();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    w.str(p->name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p->rows));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p->cols));
    w.floats(p->value);
  }
  return w.take();
}

std::uint64_t model_checksum(const Model<float>& model) {
  const auto s = encode_model_section(model);
  return fnv1a(s.data(), s.size());
}

std::string encode_checkpoint(const Checkpoint& ck) {
  if (ck.vocab.size() != ck.model.config.vocab_size)
    throw ValidationError("tokenizer size does not match the model vocabulary size");
  std::vector<std::pair<std::string, std::string>> sections;
  sections.emplace_back("manifest", manifest_of(ck).dump(2));
  sections.emplace_back("model", encode_model_section(ck.model));
  sections.emplace_back("tokenizer", ck.vocab.format());
  if (ck.state) sections.emplace_back("state", encode_state(*ck.state));
  Writer w;
  w.bytes(std::string(kMagic, sizeof(kMagic)));
  w.put<std::uint32_t>(Checkpoint::kVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(sections.size()));
  for (const auto& [name, payload] : sections) {
    w.str(name);
    w.put<std::uint64_t>(payload.size());
    w.bytes(payload);
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r(bytes, "container");
  if (r.bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) throw ParseError("not a checkpoint file", 0);
  const auto version = r.get<std::uint32_t>();
  if (version != Checkpoint::kVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version), 0);
  const auto count = r.get<std::uint32_t>();
  std::map<std::string, std::string> sections;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto name = r.str();
    const auto len = r.get<std::uint64_t>();
    sections[name] = r.bytes(len);
  }
  if (!r.done()) throw ParseError("trailing bytes after checkpoint sections", 0);
  for (const char* required : {"manifest", "model", "tokenizer"})
    if (!sections.count(required)) throw ParseError(std::string("checkpoint lacks the ") + required + " section", 0);

  nlohmann::json m;
  try {
    m = nlohmann::json::parse(sections["manifest"]);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint manifest: ") + e.what(), 0);
  }
  Checkpoint ck;
  ModelConfig cfg;
  std::uint64_t fingerprint = 0, tok_hash = 0;
  bool has_state = false;
  try {
    const auto& a = m.at("architecture");
    cfg.dim = a.at("dim");
    cfg.image_side = a.at("image_side");
    cfg.in_channels = a.at("in_channels");
    cfg.channels = a.at("channels").get<std::array<int, 4>>();
    cfg.text_layers = a.at("text_layers");
    cfg.vocab_size = a.at("vocab_size");
    cfg.max_tokens = a.at("max_tokens");
    cfg.word_agg = parse_word_aggregation(a.at("word_agg").get<std::string>());
    fingerprint = m.at("fingerprint");
    tok_hash = m.at("tokenizer_hash");
    const auto& t = m.at("temperatures");
    ck.model.temps.tau1 = t.at("tau1");
    ck.model.temps.tau2 = t.at("tau2");
    ck.model.temps.tau3 = t.at("tau3");
    if (t.contains("tau3_sw")) ck.model.temps.tau3_sw = t["tau3_sw"].get<double>();
    if (t.contains("tau3_ds")) ck.model.temps.tau3_ds = t["tau3_ds"].get<double>();
    if (t.contains("tau3_gr")) ck.model.temps.tau3_gr = t["tau3_gr"].get<double>();
    ck.stats.mean = m.at("norm").at("mean").get<std::array<double, 3>>();
    ck.stats.std = m.at("norm").at("std").get<std::array<double, 3>>();
    has_state = m.at("has_state");
    ck.run_config = m.value("run_config", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint manifest: ") + e.what(), 0);
  }
  cfg.validate();
  if (cfg.fingerprint() != fingerprint)
    throw ValidationError("checkpoint fingerprint mismatch: manifest says " + std::to_string(fingerprint) +
                          ", architecture gives " + std::to_string(cfg.fingerprint()));
  const auto temps = ck.model.temps;
  ck.model = Model<float>(cfg);
  ck.model.temps = temps;

  Reader mr(sections["model"], "model");
  auto params = ck.model.parameters();
  if (mr.get<std::uint32_t>() != params.size()) throw ValidationError("checkpoint tensor count does not match the architecture");
  for (auto* p : params) {
    const auto name = mr.str();
    const auto rows = mr.get<std::uint32_t>();
    const auto cols = mr.get<std::uint32_t>();
    if (name != p->name || int(rows) != p->rows || int(cols) != p->cols)
      throw ValidationError("checkpoint tensor '" + name + "' does not match the architecture");
    auto v = mr.floats();
    if (v.size() != p->size()) throw ValidationError("checkpoint tensor '" + name + "' has the wrong size");
    p->value = std::move(v);
  }
  if (!mr.done()) throw ParseError("trailing bytes in checkpoint model section", 0);

  ck.vocab = Vocabulary::parse(sections["tokenizer"]);
  if (ck.vocab.hash() != tok_hash) throw ValidationError("checkpoint tokenizer hash mismatch");
  if (ck.vocab.size() != cfg.vocab_size) throw ValidationError("checkpoint tokenizer size does not match vocab_size");

  if (has_state != static_cast<bool>(sections.count("state")))
    throw ParseError("checkpoint state section disagrees with the manifest", 0);
  if (has_state) {
    ck.state = decode_state(sections["state"]);
    check_state_shapes(*ck.state, ck.model);
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const auto bytes = encode_checkpoint(ck);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Write then rename so a crash never leaves a partial checkpoint in place.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw InputError("cannot write " + tmp.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw InputError("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  try {
    return decode_checkpoint(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

}  // namespace mlg
