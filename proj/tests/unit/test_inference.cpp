#include <cmath>
#include <cstring>

#include "fixtures.hpp"
#include "mlg/error.hpp"
#include "mlg/infer/inference.hpp"
#include "mlg/vision/resample.hpp"

using namespace mlg;

namespace {

InferenceModel small_inference(std::uint64_t seed) {
  const auto vocab = test::small_vocab();
  InferenceModel im;
  im.vocab = vocab;
  im.model = test::small_model<double>(seed, vocab).cast<float>();
  return im;
}

Image random_image(std::uint64_t seed, int side = 32) {
  Engine rng(seed);
  Image img(side, side, 3);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(uniform_index(rng, 256));
  return img;
}

PromptSet shape_prompts() {
  PromptSet ps;
  ps.pathologies["red circle"] = {{"a red circle."}, {"no red circle."}};
  ps.pathologies["blue box"] = {{"a blue box."}, {"no blue box."}};
  ps.pathologies["same blue box"] = {{"a blue box."}, {"no blue box."}};
  return ps;
}

Heatmap const_heatmap(int h, int w, float v) {
  Heatmap hm;
  hm.height = h;
  hm.width = w;
  hm.values.assign(std::size_t(h) * w, v);
  return hm;
}

}  // namespace

TEST_CASE("one-hot deep feature lights up its own cell") {
  const int g = 4, side = 32, cell = side / g, target = 5;  // row 1, col 1
  Matrix<float> v(g * g, 4);
  for (int p = 0; p < g * g; ++p) v(p, p == target ? 0 : 1 + p % 3) = 1;
  const std::vector<float> q{1, 0, 0, 0};
  const auto hm = heatmap_from_features(v, g, q, side, side, HeatmapMode::Clamp);
  int best = 0;
  for (int i = 1; i < side * side; ++i)
    if (hm.values[i] > hm.values[best]) best = i;
  const int by = best / side, bx = best % side;
  CHECK(by / cell == 1);
  CHECK(bx / cell == 1);
  // Beyond the neighbouring cells no interpolation weight reaches the target.
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x)
      if (y >= 3 * cell || x >= 3 * cell) CHECK(hm.at(y, x) == 0.0f);
}

TEST_CASE("heatmap is the bilinear interpolation of the cosine map") {
  Engine rng(1);
  const int g = 3;
  Matrix<float> v(g * g, 5, test::normal<float>(rng, g * g * 5));
  const auto q = test::normal<float>(rng, 5);
  std::vector<float> low(g * g);
  for (int p = 0; p < g * g; ++p) low[p] = static_cast<float>(cosine(v.row(p), q));
  SUBCASE("corners equal the source corners") {
    const auto hm = heatmap_from_features(v, g, q, 24, 24, HeatmapMode::Clamp);
    CHECK(std::abs(hm.at(0, 0) - low[0]) < 1e-6);
    CHECK(std::abs(hm.at(0, 23) - low[2]) < 1e-6);
    CHECK(std::abs(hm.at(23, 0) - low[6]) < 1e-6);
    CHECK(std::abs(hm.at(23, 23) - low[8]) < 1e-6);
  }
  SUBCASE("odd factor hits every source point exactly") {
    const auto hm = heatmap_from_features(v, g, q, 9, 9, HeatmapMode::Clamp);
    for (int i = 0; i < g; ++i)
      for (int j = 0; j < g; ++j) CHECK(std::abs(hm.at(3 * i + 1, 3 * j + 1) - low[i * g + j]) < 1e-6);
  }
  SUBCASE("whole map equals bilinear_resize of the cosines") {
    const auto hm = heatmap_from_features(v, g, q, 20, 17, HeatmapMode::Clamp);
    CHECK(hm.values == bilinear_resize(low.data(), g, g, 20, 17));
  }
  SUBCASE("min-max mode spans [-1, 1]") {
    const auto hm = heatmap_from_features(v, g, q, 20, 20, HeatmapMode::MinMax);
    CHECK(*std::min_element(hm.values.begin(), hm.values.end()) == doctest::Approx(-1));
    CHECK(*std::max_element(hm.values.begin(), hm.values.end()) == doctest::Approx(1));
  }
  SUBCASE("orthogonal query gives zeros") {
    Matrix<float> w(g * g, 2);
    for (int p = 0; p < g * g; ++p) w(p, 0) = 1.0f + p;
    const std::vector<float> o{0, 3};
    for (float x : heatmap_from_features(w, g, o, 12, 12, HeatmapMode::Clamp).values) CHECK(x == 0.0f);
  }
  SUBCASE("mismatched sizes are rejected") {
    CHECK_THROWS_AS(heatmap_from_features(v, 4, q, 8, 8, HeatmapMode::Clamp), ValidationError);
    CHECK_THROWS_AS(heatmap_from_features(v, g, std::vector<float>(4), 8, 8, HeatmapMode::Clamp), ValidationError);
  }
}

TEST_CASE("heatmap modes parse") {
  CHECK(parse_heatmap_mode("clamp") == HeatmapMode::Clamp);
  CHECK(parse_heatmap_mode(to_string(HeatmapMode::MinMax)) == HeatmapMode::MinMax);
  CHECK_THROWS_AS(parse_heatmap_mode("softmax"), ValidationError);
}

TEST_CASE("localize through a model") {
  const auto im = small_inference(2);
  const auto img = random_image(3);
  const auto a = localize(img, "a red circle.", im);
  CHECK(a.height == 32);
  CHECK(a.width == 32);
  CHECK(a.values == localize(img, "a red circle.", im).values);
  for (float x : a.values) {
    CHECK(x >= -1.0f);
    CHECK(x <= 1.0f);
  }
  // Identical sentence features: punctuation and case do not reach the tokens.
  CHECK(localize(img, "A RED circle!", im).values == a.values);
  CHECK_THROWS_AS(localize(img, " ... ", im), ValidationError);
}

TEST_CASE("binarize") {
  Engine rng(4);
  Heatmap hm = const_heatmap(6, 7, 0);
  for (auto& x : hm.values) x = static_cast<float>(2 * uniform01(rng) - 1);
  SUBCASE("theta = -1 keeps everything") { CHECK(binarize(hm, -1).count() == hm.values.size()); }
  SUBCASE("above the maximum keeps nothing") {
    const float mx = *std::max_element(hm.values.begin(), hm.values.end());
    CHECK(binarize(hm, std::nextafter(mx, 2.0f)).count() == 0);
  }
  SUBCASE("the >= rule at the boundary") { CHECK(binarize(const_heatmap(3, 3, 0.3f), 0.3).count() == 9); }
  SUBCASE("monotone in theta") {
    for (double t1 = -1; t1 <= 1; t1 += 0.1) {
      const auto m1 = binarize(hm, t1), m2 = binarize(hm, t1 + 0.05);
      for (std::size_t i = 0; i < m1.bits.size(); ++i) CHECK(m2.bits[i] <= m1.bits[i]);
    }
  }
  CHECK(binarize(hm, 0.2).threshold == 0.2);
}

TEST_CASE("classification probability") {
  CHECK(classify_scores(0.3, 0.3, 1.0) == doctest::Approx(0.5));
  CHECK(classify_scores(1, -1, 1.0) == doctest::Approx(std::exp(1.0) / (std::exp(1.0) + std::exp(-1.0))));
  CHECK(classify_scores(1, -1, 1.0) == doctest::Approx(0.8808).epsilon(1e-4));
  CHECK(classify_scores(0.2, 0.7, 0.5) + classify_scores(0.7, 0.2, 0.5) == doctest::Approx(1));
  CHECK_THROWS_AS(classify_scores(0, 0, 0), ValidationError);

  Engine rng(5);
  const auto vg = test::normal<float>(rng, 6);
  ClassPrompt cp{test::normal<float>(rng, 6), test::normal<float>(rng, 6)};
  const double p = classify_features(vg, cp, 1.0);
  CHECK(p > 0);
  CHECK(p < 1);
  CHECK(classify_features(vg, {cp.negative, cp.positive}, 1.0) == doctest::Approx(1 - p));
  auto scaled = vg;
  for (auto& x : scaled) x *= 3.5f;
  ClassPrompt cps = cp;
  for (auto& x : cps.positive) x *= 0.25f;
  for (auto& x : cps.negative) x *= 7.0f;
  CHECK(classify_features(scaled, cps, 1.0) == doctest::Approx(p).epsilon(1e-6));
}

TEST_CASE("classify_all scores each pathology independently") {
  const auto im = small_inference(6);
  const auto img = random_image(7);
  const auto ps = shape_prompts();
  const auto all = classify_all(img, {"red circle", "blue box", "same blue box"}, ps, im);
  CHECK(all.size() == 3);
  CHECK(all.at("blue box") == all.at("same blue box"));
  CHECK(classify_all(img, {"red circle"}, ps, im).at("red circle") == classify(img, "red circle", ps, im));
  CHECK(classify_all(img, {"same blue box", "blue box", "red circle"}, ps, im) == all);
  CHECK_THROWS_AS(classify(img, "green square", ps, im), ValidationError);
}

TEST_CASE("AFH1 raster round trip") {
  Engine rng(8);
  Heatmap hm = const_heatmap(5, 3, 0);
  for (auto& x : hm.values) x = static_cast<float>(standard_normal(rng));
  hm.values[0] = -0.0f;
  const auto bytes = encode_afh1(hm);
  CHECK(bytes.size() == 4 + 8 + 15 * 4);
  CHECK(bytes.substr(0, 4) == "AFH1");
  CHECK(static_cast<unsigned char>(bytes[4]) == 5);
  const auto back = decode_afh1(bytes);
  CHECK(back.height == 5);
  CHECK(back.width == 3);
  CHECK(std::memcmp(back.values.data(), hm.values.data(), hm.values.size() * 4) == 0);
  CHECK(encode_afh1(back) == bytes);
  test::TempDir dir("infer");
  write_heatmap(dir.path() / "h.afh1", hm);
  CHECK(encode_afh1(read_heatmap(dir.path() / "h.afh1")) == bytes);
  CHECK_THROWS(decode_afh1("AFH0" + bytes.substr(4)));
  CHECK_THROWS(decode_afh1(bytes.substr(0, bytes.size() - 1)));
}

TEST_CASE("overlay blends toward red where the heatmap is positive") {
  Image gray(4, 4, 3);
  for (auto& p : gray.pixels) p = 100;
  Heatmap hm = const_heatmap(4, 4, -0.5f);
  hm.values[5] = 1.0f;
  const auto out = overlay(gray, hm);
  CHECK(out.at(0, 0, 0) == 100);
  CHECK(out.at(0, 0, 1) == 100);
  CHECK(out.at(1, 1, 0) > 100);
  CHECK(out.at(1, 1, 1) < 100);
  // Source resampled to the heatmap size.
  CHECK(overlay(Image(8, 8, 3), hm).height == 4);
}
