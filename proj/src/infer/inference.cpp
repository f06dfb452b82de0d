#include "mlg/infer/inference.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mlg/error.hpp"
#include "mlg/kernels/kernels.hpp"
#include "mlg/text/encoder.hpp"
#include "mlg/vision/resample.hpp"

namespace mlg {

HeatmapMode parse_heatmap_mode(const std::string& s) {
  if (s == "clamp") return HeatmapMode::Clamp;
  if (s == "minmax") return HeatmapMode::MinMax;
  throw ValidationError("heatmap mode must be 'clamp' or 'minmax', got '" + s + "'");
}

std::string to_string(HeatmapMode m) { return m == HeatmapMode::Clamp ? "clamp" : "minmax"; }

double cosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw ValidationError("cosine: dimensions differ");
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += double(a[i]) * b[i];
    aa += double(a[i]) * a[i];
    bb += double(b[i]) * b[i];
  }
  if (aa <= 0 || bb <= 0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

ImagePyramid<float> InferenceModel::encode_image(const Image& image) const {
  const auto x = preprocess(image, model.config.image_side, stats);
  return project(mlg::encode_image<float>(x, model.vision), model.heads);
}

std::vector<float> InferenceModel::prompt_query(const std::string& prompt) const {
  const auto tok = tokenize(prompt, vocab, model.config.max_tokens);
  const auto h = aggregate_hierarchy(encode_text(tok, model.text), tok, model.config.word_agg);
  std::vector<double> acc(h.t_s.cols, 0.0);
  for (int s = 0; s < h.t_s.rows; ++s) {
    const auto row = h.t_s.row(s);
    double n = 0;
    for (float v : row) n += double(v) * v;
    n = std::sqrt(n);
    if (n <= 0) continue;
    for (int j = 0; j < h.t_s.cols; ++j) acc[j] += row[j] / n;
  }
  std::vector<float> q(acc.size());
  for (std::size_t j = 0; j < q.size(); ++j) q[j] = static_cast<float>(acc[j] / h.t_s.rows);
  return q;
}

std::vector<float> InferenceModel::report_feature(const std::string& text) const {
  const auto tok = tokenize(text, vocab, model.config.max_tokens);
  return aggregate_hierarchy(encode_text(tok, model.text), tok, model.config.word_agg).t_r;
}

Heatmap heatmap_from_features(const Matrix<float>& v_d, int deep_grid, std::span<const float> query, int height,
                              int width, HeatmapMode mode) {
  if (v_d.rows != deep_grid * deep_grid) throw ValidationError("deep features do not match the grid size");
  if (static_cast<int>(query.size()) != v_d.cols) throw ValidationError("query dimension differs from features");
  std::vector<float> low(v_d.rows);
  for (int p = 0; p < v_d.rows; ++p) low[p] = static_cast<float>(cosine(v_d.row(p), query));
  Heatmap hm;
  hm.height = height;
  hm.width = width;
  hm.values = bilinear_resize(low.data(), deep_grid, deep_grid, height, width);
  if (mode == HeatmapMode::Clamp) {
    for (auto& v : hm.values) v = std::clamp(v, -1.0f, 1.0f);
  } else {
    const auto [lo, hi] = std::minmax_element(hm.values.begin(), hm.values.end());
    const float a = *lo, b = *hi;
    for (auto& v : hm.values) v = b > a ? 2.0f * (v - a) / (b - a) - 1.0f : 0.0f;
  }
  return hm;
}

Heatmap localize(const Image& image, const std::string& prompt, const InferenceModel& im) {
  const auto pyr = im.encode_image(image);
  const auto q = im.prompt_query(prompt);
  Heatmap hm = heatmap_from_features(pyr.v_d, pyr.grid / 2, q, image.height, image.width, im.mode);
  hm.prompt = prompt;
  return hm;
}

Mask binarize(const Heatmap& hm, double theta) {
  Mask m(hm.height, hm.width);
  kernels::threshold(hm.values.size(), hm.values.data(), static_cast<float>(theta), m.bits.data());
  m.threshold = theta;
  return m;
}

double classify_scores(double sim_pos, double sim_neg, double temperature) {
  if (!(temperature > 0)) throw ValidationError("classification temperature must be positive");
  return 1.0 / (1.0 + std::exp((sim_neg - sim_pos) / temperature));
}

ClassPrompt class_prompt(const std::string& pathology, const PromptSet& prompts, const InferenceModel& im) {
  const auto& t = prompts.at(pathology);
  auto mean_of = [&](const std::vector<std::string>& texts) {
    if (texts.empty()) throw ValidationError("pathology '" + pathology + "' lacks templates");
    std::vector<double> acc(im.model.config.dim, 0.0);
    for (const auto& s : texts) {
      const auto f = im.report_feature(s);
      for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += f[j];
    }
    std::vector<float> out(acc.size());
    for (std::size_t j = 0; j < acc.size(); ++j) out[j] = static_cast<float>(acc[j] / texts.size());
    return out;
  };
  return {mean_of(t.positive), mean_of(t.negative)};
}

double classify_features(std::span<const float> v_g, const ClassPrompt& prompt, double temperature) {
  return classify_scores(cosine(v_g, prompt.positive), cosine(v_g, prompt.negative), temperature);
}

double classify(const Image& image, const std::string& pathology, const PromptSet& prompts, const InferenceModel& im) {
  const auto cp = class_prompt(pathology, prompts, im);
  return classify_features(im.encode_image(image).v_g, cp, im.cls_temperature);
}

std::map<std::string, double> classify_all(const Image& image, const std::vector<std::string>& pathologies,
                                           const PromptSet& prompts, const InferenceModel& im) {
  if (pathologies.empty()) throw ValidationError("pathology list is empty");
  const auto pyr = im.encode_image(image);
  std::map<std::string, double> out;
  for (const auto& p : pathologies) out[p] = classify_features(pyr.v_g, class_prompt(p, prompts, im), im.cls_temperature);
  return out;
}

namespace {

void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s += static_cast<char>((v >> (8 * i)) & 0xff);
}

std::uint32_t get_u32(const std::string& s, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(s[off + i])) << (8 * i);
  return v;
}

}  // namespace

std::string encode_afh1(const Heatmap& hm) {
  std::string s = "AFH1";
  put_u32(s, static_cast<std::uint32_t>(hm.height));
  put_u32(s, static_cast<std::uint32_t>(hm.width));
  s.reserve(s.size() + hm.values.size() * 4);
  for (float v : hm.values) put_u32(s, std::bit_cast<std::uint32_t>(v));
  return s;
}

Heatmap decode_afh1(const std::string& bytes) {
  if (bytes.size() < 12 || bytes.compare(0, 4, "AFH1") != 0) throw ParseError("not an AFH1 heatmap", 0);
  Heatmap hm;
  hm.height = static_cast<int>(get_u32(bytes, 4));
  hm.width = static_cast<int>(get_u32(bytes, 8));
  const std::size_t n = std::size_t(hm.height) * hm.width;
  if (bytes.size() != 12 + 4 * n) throw ParseError("AFH1 payload size does not match its header", 0);
  hm.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) hm.values[i] = std::bit_cast<float>(get_u32(bytes, 12 + 4 * i));
  return hm;
}

void write_heatmap(const std::filesystem::path& path, const Heatmap& hm) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  const auto s = encode_afh1(hm);
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

Heatmap read_heatmap(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open heatmap '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_afh1(ss.str());
}

Image overlay(const Image& image, const Heatmap& hm) {
  Image out(hm.height, hm.width, 3);
  const bool same = image.height == hm.height && image.width == hm.width;
  std::vector<std::vector<float>> planes(3);
  for (int c = 0; c < 3; ++c) {
    const int ic = image.channels == 1 ? 0 : c;
    std::vector<float> src(std::size_t(image.height) * image.width);
    for (std::size_t i = 0; i < src.size(); ++i) src[i] = image.pixels[i * image.channels + ic];
    planes[c] = same ? src : bilinear_resize(src.data(), image.height, image.width, hm.height, hm.width);
  }
  for (std::size_t i = 0; i < hm.values.size(); ++i) {
    const float a = 0.6f * std::max(hm.values[i], 0.0f);
    for (int c = 0; c < 3; ++c) {
      const float target = c == 0 ? 255.0f : 0.0f;
      const float v = planes[c][i] * (1.0f - a) + target * a;
      out.pixels[i * 3 + c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return out;
}

}  // namespace mlg
