#include <algorithm>

#include "fixtures.hpp"
#include "mlg/data/synth.hpp"
#include "mlg/error.hpp"
#include "mlg/eval/evaluate.hpp"

using namespace mlg;

namespace {

struct Fixture {
  test::TempDir dir{"eval"};
  SynthSpec spec;
  Corpus corpus;
  MaskMap masks;
  PromptSet prompts;
  InferenceModel im;

  Fixture() {
    spec.image_size = 32;
    spec.count = 10;
    spec.seed = 4;
    write_synthetic(dir.path(), synthesize_corpus(spec));
    corpus = load_corpus(dir.path() / "corpus.jsonl");
    ImageSizes sizes;
    for (const auto& r : corpus.reports) sizes[r.id] = {32, 32};
    masks = load_annotations(dir.path() / "annotations.jsonl", sizes);
    prompts = load_prompts(dir.path() / "prompts.json");
    im.vocab = Vocabulary::from_words(synth_words(spec));
    auto cfg = test::small_config(im.vocab.size());
    cfg.max_tokens = 24;
    Model<float> m(cfg);
    m.init(2);
    im.model = std::move(m);
  }
};

Heatmap oracle_heatmap(const Mask& gt) {
  Heatmap hm;
  hm.height = gt.height;
  hm.width = gt.width;
  for (auto b : gt.bits) hm.values.push_back(b ? 1.0f : -1.0f);
  return hm;
}

}  // namespace

TEST_CASE("oracle heatmaps score 1 on every overlap row") {
  Fixture f;
  std::vector<LocalizedSample> samples;
  for (const auto& [key, m] : f.masks)
    if (m.count() > 0) samples.push_back({key.first, key.second, oracle_heatmap(m), &m});
  REQUIRE(!samples.empty());
  LocalizationProtocol p;
  p.reps = 50;
  const auto report = summarize_localization(score_localization(samples, p), p);
  int overlap_rows = 0;
  for (const auto& r : report.rows)
    if (r.metric == "IoU" || r.metric == "Dice") {
      ++overlap_rows;
      CHECK(r.point == 1.0);
      CHECK(r.lo == 1.0);
      CHECK(r.hi == 1.0);
    }
  CHECK(overlap_rows >= 4);
  CHECK(report.find("Mean", "IoU") != nullptr);
  CHECK(report.find("Mean", "CNR") != nullptr);

  p.kind = LocalizationProtocol::Kind::Fixed;
  p.theta = 0.45;
  for (const auto& s : score_localization(samples, p)) CHECK(s.iou == 1.0);
}

TEST_CASE("localization report ignores input order") {
  Engine rng(1);
  std::vector<LocalizationScore> scores;
  for (int i = 0; i < 30; ++i)
    scores.push_back({"r" + std::to_string(i), i % 3 ? "a" : "b", uniform01(rng), uniform01(rng), standard_normal(rng)});
  LocalizationProtocol p;
  p.reps = 100;
  const auto base = summarize_localization(scores, p);
  std::reverse(scores.begin(), scores.end());
  std::swap(scores[3], scores[17]);
  CHECK(summarize_localization(scores, p) == base);
  // Macro mean is the mean of the pathology rows.
  CHECK(base.find("Mean", "IoU")->point ==
        doctest::Approx((base.find("a", "IoU")->point + base.find("b", "IoU")->point) / 2));
}

TEST_CASE("model-based localization is order invariant") {
  Fixture f;
  LocalizationProtocol p;
  p.reps = 50;
  const auto base = evaluate_localization(f.im, f.corpus, f.masks, f.prompts, p);
  CHECK(!base.rows.empty());
  auto shuffled = f.corpus;
  std::reverse(shuffled.reports.begin(), shuffled.reports.end());
  CHECK(evaluate_localization(f.im, shuffled, f.masks, f.prompts, p, 3) == base);

  const auto samples = localize_annotated(f.im, f.corpus, f.masks, positive_prompts(f.prompts));
  CHECK(std::is_sorted(samples.begin(), samples.end(), [](const auto& a, const auto& b) {
    return std::tie(a.pathology, a.id) < std::tie(b.pathology, b.id);
  }));
  for (const auto& s : samples) CHECK(s.gt->count() > 0);

  const double theta = select_threshold(f.im, f.corpus, f.masks, f.prompts, default_thresholds());
  CHECK(std::find(default_thresholds().begin(), default_thresholds().end(), theta) != default_thresholds().end());
}

TEST_CASE("classification summary") {
  SUBCASE("probabilities equal to labels give AUROC 1") {
    std::vector<ClassificationScore> s;
    for (int i = 0; i < 20; ++i) {
      const int l = i % 2;
      s.push_back({"r" + std::to_string(i), "a", double(l), l});
      s.push_back({"r" + std::to_string(i), "b", double(1 - l), 1 - l});
    }
    const auto rep = summarize_classification(s, 50, 0);
    CHECK(rep.find("a", "AUROC")->point == 1.0);
    CHECK(rep.find("b", "AUROC")->point == 1.0);
    CHECK(rep.find("Mean", "AUROC")->point == 1.0);
  }
  SUBCASE("random probabilities land near 0.5") {
    Engine rng(7);
    std::vector<ClassificationScore> s;
    for (int i = 0; i < 4000; ++i) s.push_back({"r" + std::to_string(i), "a", uniform01(rng), int(uniform_index(rng, 2))});
    CHECK(std::abs(summarize_classification(s, 20, 0).find("a", "AUROC")->point - 0.5) < 0.05);
  }
  SUBCASE("macro mean and single-class skipping") {
    Engine rng(8);
    std::vector<ClassificationScore> s;
    for (int i = 0; i < 40; ++i) {
      s.push_back({"r" + std::to_string(i), "a", uniform01(rng), i % 2});
      s.push_back({"r" + std::to_string(i), "b", uniform01(rng) + (i % 3 == 0), i % 3 == 0});
      s.push_back({"r" + std::to_string(i), "c", uniform01(rng), 1});
    }
    const auto rep = summarize_classification(s, 50, 0);
    CHECK(rep.find("c", "AUROC") == nullptr);
    CHECK(rep.find("Mean", "AUROC")->point ==
          doctest::Approx((rep.find("a", "AUROC")->point + rep.find("b", "AUROC")->point) / 2));
    auto shuffled = s;
    std::reverse(shuffled.begin(), shuffled.end());
    CHECK(summarize_classification(shuffled, 50, 0) == rep);
  }
}

TEST_CASE("model-based classification") {
  Fixture f;
  const auto names = f.prompts.names();
  const auto scores = classify_corpus(f.im, f.corpus, f.prompts, names);
  CHECK(scores.size() == f.corpus.reports.size() * names.size());
  for (const auto& s : scores) {
    CHECK(s.probability > 0);
    CHECK(s.probability < 1);
  }
  CHECK(classify_corpus(f.im, f.corpus, f.prompts, names, 3).size() == scores.size());
  CHECK_THROWS_AS(evaluate_classification(f.im, f.corpus, f.prompts, {}), ValidationError);
}
