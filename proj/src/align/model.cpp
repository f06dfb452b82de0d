#include "mlg/align/model.hpp"

#include <cmath>
#include <sstream>

#include "mlg/error.hpp"
#include "mlg/rng.hpp"

namespace mlg {

void Temperatures::validate() const {
  for (double t : {tau1, tau2, tau3, sw(), ds(), gr()})
    if (!(std::isfinite(t) && t > 0.0)) throw ValidationError("temperatures must be finite and positive");
}

std::string LossSwitches::label() const {
  std::string s;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += "+";
    s += name;
  };
  add(sw, "SW");
  add(ds, "DS");
  add(gr, "GR");
  return s.empty() ? "none" : s;
}

std::string ModelConfig::describe() const {
  std::ostringstream o;
  o << "dim=" << dim << ";image_side=" << image_side << ";in_channels=" << in_channels << ";channels=" << channels[0]
    << "," << channels[1] << "," << channels[2] << "," << channels[3] << ";text_layers=" << text_layers
    << ";vocab_size=" << vocab_size << ";max_tokens=" << max_tokens << ";word_agg=" << to_string(word_agg);
  return o.str();
}

std::uint64_t ModelConfig::fingerprint() const {
  const std::string d = describe();
  return fnv1a(d.data(), d.size());
}

void ModelConfig::validate() const {
  if (dim < 1) throw ValidationError("dim must be >= 1");
  if (image_side < 16 || image_side % 16 != 0) throw ValidationError("image_side must be a positive multiple of 16");
  if (text_layers < 0) throw ValidationError("text_layers must be >= 0");
  if (vocab_size < 2) throw ValidationError("vocab_size must be >= 2");
  if (max_tokens < 1) throw ValidationError("max_tokens must be >= 1");
}

template <typename T>
Model<T>::Model(const ModelConfig& cfg)
    : config(cfg),
      text(cfg.vocab_size, cfg.dim, cfg.text_layers),
      vision(cfg.in_channels, cfg.channels, cfg.image_side),
      heads(cfg.channels[2], cfg.channels[3], cfg.dim) {
  cfg.validate();
}

template <typename T>
void Model<T>::init(std::uint64_t seed) {
  Engine rng(substream(seed, 0x6d6f64656cull));
  text.init(rng);
  vision.init(rng);
  heads.init(rng);
}

template <typename T>
std::vector<ad::Parameter<T>*> Model<T>::parameters() {
  std::vector<ad::Parameter<T>*> out;
  for (auto* group : {&text.params(), &vision.params(), &heads.params()})
    for (auto& p : *group) out.push_back(&p);
  return out;
}

template <typename T>
std::vector<const ad::Parameter<T>*> Model<T>::parameters() const {
  std::vector<const ad::Parameter<T>*> out;
  for (const auto* group : {&text.params(), &vision.params(), &heads.params()})
    for (const auto& p : *group) out.push_back(&p);
  return out;
}

template <typename T>
std::size_t Model<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->size();
  return n;
}

template struct Model<float>;
template struct Model<double>;

}  // namespace mlg
