// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when any
// criterion fails. Tolerances are fixed here, not configurable.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <cstring>
#include <sstream>
#include <string>

#include <unistd.h>

#include "../unit/fixtures.hpp"
#include "mlg/ablation/ablation.hpp"
#include "mlg/cli/checkpoint.hpp"
#include "mlg/cli/run_config.hpp"
#include "mlg/data/synth.hpp"
#include "mlg/error.hpp"
#include "mlg/eval/metrics.hpp"
#include "mlg/log.hpp"
#include "mlg/vision/preprocess.hpp"

using namespace mlg;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- AC-1 -----------------------------------------------------------------

double iou_oracle(const Mask& a, const Mask& b) {
  long inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    inter += a.bits[i] && b.bits[i];
    uni += a.bits[i] || b.bits[i];
  }
  return uni ? double(inter) / uni : 0.0;
}

double dice_oracle(const Mask& a, const Mask& b) {
  long inter = 0, sa = 0, sb = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    inter += a.bits[i] && b.bits[i];
    sa += a.bits[i] != 0;
    sb += b.bits[i] != 0;
  }
  return sa + sb ? 2.0 * inter / double(sa + sb) : 0.0;
}

// Two-pass mean and population variance in long double.
double cnr_oracle(const Heatmap& hm, const Mask& gt) {
  std::vector<long double> in, out;
  for (std::size_t i = 0; i < hm.values.size(); ++i) (gt.bits[i] ? in : out).push_back(hm.values[i]);
  auto mean = [](const std::vector<long double>& v) {
    long double s = 0;
    for (auto x : v) s += x;
    return s / v.size();
  };
  auto var = [](const std::vector<long double>& v, long double m) {
    long double s = 0;
    for (auto x : v) s += (x - m) * (x - m);
    return s / v.size();
  };
  const long double mi = mean(in), mo = mean(out);
  const long double num = mi - mo, den = std::sqrt((var(in, mi) + var(out, mo)) / 2);
  if (std::fabs(num) < 1e-12L && den < 1e-12L) return 0.0;
  return double(num / den);
}

double auroc_oracle(const std::vector<double>& s, const std::vector<int>& l) {
  double wins = 0;
  long pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (l[i])
      for (std::size_t j = 0; j < s.size(); ++j)
        if (!l[j]) {
          ++pairs;
          wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
        }
  return wins / pairs;
}

Outcome ac1() {
  const auto t0 = Clock::now();
  Engine rng(101);
  double worst[4] = {0, 0, 0, 0};
  for (int n = 0; n < 1000; ++n) {
    const int h = 1 + int(uniform_index(rng, 24)), w = 2 + int(uniform_index(rng, 24));
    Mask a(h, w), b(h, w);
    const double pa = uniform01(rng), pb = uniform01(rng);
    for (std::size_t i = 0; i < a.bits.size(); ++i) {
      a.bits[i] = uniform01(rng) < pa;
      b.bits[i] = uniform01(rng) < pb;
    }
    worst[0] = std::max(worst[0], std::abs(iou(a, b) - iou_oracle(a, b)));
    worst[1] = std::max(worst[1], std::abs(dice(a, b) - dice_oracle(a, b)));

    Mask gt(h, w);
    for (auto& x : gt.bits) x = uniform01(rng) < 0.4;
    gt.bits[0] = 1;
    gt.bits[1] = 0;
    Heatmap hm;
    hm.height = h;
    hm.width = w;
    for (int i = 0; i < h * w; ++i) hm.values.push_back(static_cast<float>(std::clamp(standard_normal(rng) * 0.4, -1.0, 1.0)));
    worst[2] = std::max(worst[2], std::abs(cnr(hm, gt) - cnr_oracle(hm, gt)));

    const int m = 2 + int(uniform_index(rng, 80));
    std::vector<double> s;
    std::vector<int> l;
    for (int i = 0; i < m; ++i) {
      // Coarse grid so ties are common.
      s.push_back(std::round(uniform01(rng) * 20) / 20);
      l.push_back(uniform01(rng) < 0.5);
    }
    l[0] = 1;
    l[1] = 0;
    worst[3] = std::max(worst[3], std::abs(auroc(s, l) - auroc_oracle(s, l)));
  }
  const double secs = seconds_since(t0);
  const double mx = *std::max_element(worst, worst + 4);
  return {mx < 1e-9 && secs < 30,
          fmt("max abs err iou %.1e dice %.1e cnr %.1e auroc %.1e (tol 1e-9), %.2fs (limit 30s)", worst[0], worst[1],
              worst[2], worst[3], secs)};
}

// ---- AC-2 / AC-3 ----------------------------------------------------------

Outcome ac2() {
  const auto vocab = test::small_vocab();
  const auto model = test::small_model<double>(7, vocab);
  const LossSwitches all{true, true, true};
  double zero_err = 0, uniform_err = 0;
  for (int k = 0; k < 3; ++k) {
    const auto one = test::small_items<double>(vocab, 10 + k, {"red circle. blue box."});
    const auto r = evaluate_batch<double>(model, one, all, false);
    zero_err = std::max({zero_err, std::abs(r.loss.sw), std::abs(r.loss.ds), std::abs(r.loss.gr)});
  }
  for (int b : {2, 4, 8}) {
    auto items = test::small_items<double>(vocab, 20 + b, {"green square. red box."});
    items.resize(b, items[0]);
    const auto r = evaluate_batch<double>(model, items, all, false);
    const double want = 2 * std::log(double(b));
    uniform_err = std::max({uniform_err, std::abs(r.loss.sw - want), std::abs(r.loss.ds - want),
                            std::abs(r.loss.gr - want)});
  }
  return {zero_err < 1e-6 && uniform_err < 1e-5,
          fmt("B=1 max |term| %.1e (tol 1e-6); uniform B=2,4,8 max |term - 2lnB| %.1e (tol 1e-5)", zero_err,
              uniform_err)};
}

// Norm-wise relative error per parameter group over sampled coordinates,
// against central differences of the double-precision loss.
template <typename T>
double worst_gradient_error(const Model<double>& md, const std::vector<TrainItem<double>>& items, std::uint64_t seed) {
  const LossSwitches all{true, true, true};
  std::vector<std::vector<double>> grads;
  if constexpr (std::is_same_v<T, double>) {
    grads = evaluate_batch<double>(md, items, all, true).grads;
  } else {
    std::vector<TrainItem<float>> fi;
    for (const auto& it : items) fi.push_back({it.tok, std::vector<float>(it.image.begin(), it.image.end())});
    for (auto& g : evaluate_batch<float>(md.cast<float>(), fi, all, true).grads) grads.emplace_back(g.begin(), g.end());
  }
  auto probe = md;
  auto params = probe.parameters();
  Engine pick(seed);
  double worst = 0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    double num = 0, den = 0;
    for (int s = 0; s < 8; ++s) {
      const auto i = uniform_index(pick, params[pi]->size());
      double& w = params[pi]->value[i];
      const double orig = w, h = 1e-5;
      w = orig + h;
      const double fp = evaluate_batch<double>(probe, items, all, false).loss.total;
      w = orig - h;
      const double fm = evaluate_batch<double>(probe, items, all, false).loss.total;
      w = orig;
      const double fd = (fp - fm) / (2 * h);
      num += (grads[pi][i] - fd) * (grads[pi][i] - fd);
      den += fd * fd;
    }
    // Groups whose sampled gradient is essentially zero are compared absolutely.
    worst = std::max(worst, std::sqrt(num) / std::max(std::sqrt(den), 1e-4));
  }
  return worst;
}

Outcome ac3() {
  const auto t0 = Clock::now();
  const auto vocab = test::small_vocab();
  double wd = 0, wf = 0;
  for (std::uint64_t inst = 0; inst < 3; ++inst) {
    const auto md = test::small_model<double>(30 + inst, vocab);
    const auto items = test::small_items<double>(vocab, 40 + inst);
    wd = std::max(wd, worst_gradient_error<double>(md, items, 50 + inst));
    wf = std::max(wf, worst_gradient_error<float>(md, items, 60 + inst));
  }
  const double secs = seconds_since(t0);
  return {wd < 1e-6 && wf < 1e-3 && secs < 60,
          fmt("D=8 B=3 P=2 Q=4 M=16, 3 instances: rel err double %.1e (tol 1e-6), float %.1e (tol 1e-3), %.1fs "
              "(limit 60s)",
              wd, wf, secs)};
}

// ---- AC-4 / AC-9 ----------------------------------------------------------

struct ToyExperiment {
  fs::path dir;
  AblationAssets assets;
  TrainConfig base;
  std::map<std::pair<std::string, std::string>, std::string> captions;
  CheckpointCache cache;
  std::vector<std::uint64_t> seeds{0, 1, 2};

  explicit ToyExperiment(fs::path root) : dir(std::move(root)) {
    RunConfig rc;
    rc.apply_profile("toy");
    SynthSpec spec;
    spec.image_size = rc.model.image_side;
    spec.count = 1700;
    spec.seed = 2024;
    const auto syn = synthesize_corpus(spec);
    write_synthetic(dir, syn);
    captions = load_captions(dir / "captions.jsonl");
    assets.vocab = Vocabulary::from_words(synth_words(spec));
    assets.model = rc.model;
    assets.model.vocab_size = assets.vocab.size();
    assets.temps = rc.temps;
    const std::vector<Image> train_images(syn.images.begin(), syn.images.begin() + 1500);
    assets.stats = compute_norm_stats(train_images, rc.model.image_side);
    for (int i = 0; i < 1500; ++i) {
      assets.train.reports.push_back(syn.corpus.reports[i]);
      assets.train.images.push_back(preprocess(syn.images[i], rc.model.image_side, assets.stats));
    }
    assets.eval.root = dir;
    assets.eval.reports.assign(syn.corpus.reports.begin() + 1500, syn.corpus.reports.end());
    assets.masks = syn.masks;
    assets.prompts = syn.prompts;
    assets.protocol.reps = 200;
    base = rc.train;
  }
};

Outcome ac4(ToyExperiment& x) {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  double margin_sum = 0;
  for (auto s : x.seeds) {
    const auto all = evaluate_variant(x.cache.get_or_train(x.assets, x.base, {true, true, true}, s), x.assets, s);
    const auto gr = evaluate_variant(x.cache.get_or_train(x.assets, x.base, {false, false, true}, s), x.assets, s);
    const double margin = all.iou - gr.iou;
    margin_sum += margin;
    ok = ok && margin > 0.03 && all.cnr > gr.cnr;
    detail += fmt("seed %llu IoU %.3f vs %.3f CNR %.3f vs %.3f; ", (unsigned long long)s, all.iou, gr.iou, all.cnr,
                  gr.cnr);
  }
  detail += fmt("all-levels vs GR-only, per-seed IoU margin > 0.03 and CNR greater (mean margin %.3f), %.0fs",
                margin_sum / x.seeds.size(), seconds_since(t0));
  return {ok, detail};
}

Outcome ac9(ToyExperiment& x) {
  int wins = 0;
  std::string detail;
  bool layout = true;
  for (auto s : x.seeds) {
    InferenceModel im{x.cache.get_or_train(x.assets, x.base, {true, true, true}, s), x.assets.vocab, x.assets.stats};
    const auto pc = run_prompt_comparison(im, x.assets.eval, x.assets.masks, simple_prompts(),
                                          caption_prompts(x.captions), x.assets.protocol);
    const double si = pc.simple.find("Mean", "IoU")->point, pr = pc.precise.find("Mean", "IoU")->point;
    wins += pr >= si;
    detail += fmt("seed %llu simple %.3f precise %.3f; ", (unsigned long long)s, si, pr);
    const auto text = pc.render();
    std::istringstream lines(text);
    std::string header, r1, r2;
    std::getline(lines, header);
    while (std::getline(lines, r1) && r1.find("Simple") == std::string::npos) {
    }
    std::getline(lines, r2);
    layout = layout && header.find("IoU") < header.find("Dice") && header.find("Dice") < header.find("CNR") &&
             r1.find("Simple") != std::string::npos && r2.find("Precise") != std::string::npos &&
             std::count(r1.begin(), r1.end(), '(') == 3 && std::count(r2.begin(), r2.end(), '(') == 3;
  }
  detail += fmt("precise >= simple on %d/3 seeds (need 2); layout %s", wins, layout ? "ok" : "wrong");
  return {wins >= 2 && layout, detail};
}

// ---- AC-5 / AC-6 ----------------------------------------------------------

Outcome ac5() {
  Heatmap hm;
  hm.height = 8;
  hm.width = 8;
  hm.values.assign(64, 0.3f);
  Mask half(8, 8);
  for (int i = 0; i < 32; ++i) half.bits[i] = 1;
  const std::vector<double> grid{0.1, 0.2, 0.3, 0.4, 0.5};
  const double m = multi_threshold_mean(hm, half, grid).iou;
  return {m == 0.3 && default_thresholds() == grid,
          fmt("constant 0.3 heatmap, half mask: mean IoU %.17g (expected exactly 0.3)", m)};
}

Outcome ac6() {
  const std::vector<double> c(17, 0.42);
  const auto d = bootstrap_ci(c, 1000, 3);
  const bool degenerate = d.mean == 0.42 && d.lo == 0.42 && d.hi == 0.42;
  int covered = 0;
  for (std::uint64_t t = 0; t < 200; ++t) {
    Engine rng(substream(777, t));
    std::vector<double> v;
    for (int i = 0; i < 30; ++i) v.push_back(standard_normal(rng));
    const auto ci = bootstrap_ci(v, 1000, t);
    covered += ci.lo <= 0 && 0 <= ci.hi;
  }
  Engine rng(5);
  std::vector<double> v;
  for (int i = 0; i < 30; ++i) v.push_back(standard_normal(rng));
  const auto a = bootstrap_ci(v, 1000, 99), b = bootstrap_ci(v, 1000, 99);
  const bool repro = std::memcmp(&a, &b, sizeof a) == 0;
  return {degenerate && covered >= 180 && repro,
          fmt("constant -> (v,v,v) %s; coverage %d/200 (need >= 180); fixed seed bit-exact %s",
              degenerate ? "yes" : "no", covered, repro ? "yes" : "no")};
}

// ---- AC-7 -----------------------------------------------------------------

int run(const std::string& cmd) {
  const std::string full = cmd + " > /dev/null 2>&1";
  return std::system(full.c_str());
}

Outcome ac7(const fs::path& root) {
  const auto t0 = Clock::now();
  const std::string cli = MLG_CLI_PATH;
  const std::string set = " --profile toy --set epochs=2 --set bootstrap_reps=200";
  std::vector<std::string> ckpt_bytes, reports;
  for (int run_i = 0; run_i < 2; ++run_i) {
    const fs::path d = root / ("run" + std::to_string(run_i));
    fs::create_directories(d);
    const std::string q = "'" + d.string() + "'";
    int rc = run(cli + " synth --out " + q + "/train --count 160 --seed 11");
    rc |= run(cli + " synth --out " + q + "/eval --count 40 --seed 12");
    rc |= run(cli + " train --corpus " + q + "/train --out " + q + "/model.ckpt" + set);
    rc |= run(cli + " eval --checkpoint " + q + "/model.ckpt --corpus " + q + "/eval --out " + q + "/report" + set);
    if (rc != 0) return {false, fmt("cli run %d failed", run_i)};
    ckpt_bytes.push_back(slurp(d / "model.ckpt"));
    std::string r;
    for (const char* f : {"localization.jsonl", "localization.txt", "classification.jsonl", "classification.txt"})
      r += slurp(d / "report" / f) + '\x1e';
    reports.push_back(r);
  }
  const bool same_ckpt = !ckpt_bytes[0].empty() && ckpt_bytes[0] == ckpt_bytes[1];
  const bool same_reports = reports[0] == reports[1] && reports[0].size() > 8;
  const auto ck = decode_checkpoint(ckpt_bytes[0]);
  return {same_ckpt && same_reports,
          fmt("two synth->train->eval runs: checkpoint checksum %016llx %s, report files %s, %.0fs",
              (unsigned long long)model_checksum(ck.model), same_ckpt ? "identical" : "DIFFER",
              same_reports ? "identical" : "DIFFER", seconds_since(t0))};
}

// ---- AC-8 -----------------------------------------------------------------

Outcome ac8(const fs::path& root) {
  Engine rng(8);
  Heatmap hm;
  hm.height = 13;
  hm.width = 29;
  for (int i = 0; i < 13 * 29; ++i) hm.values.push_back(static_cast<float>(standard_normal(rng)));
  hm.values[3] = -0.0f;
  hm.values[4] = std::numeric_limits<float>::denorm_min();
  write_heatmap(root / "h.afh1", hm);
  const auto back = read_heatmap(root / "h.afh1");
  const bool afh1 = back.height == 13 && back.width == 29 &&
                    std::memcmp(back.values.data(), hm.values.data(), hm.values.size() * sizeof(float)) == 0 &&
                    encode_afh1(back) == slurp(root / "h.afh1");

  Checkpoint ck;
  ck.vocab = test::small_vocab();
  ck.model = test::small_model<double>(9, ck.vocab).cast<float>();
  ck.stats.mean = {0.3, 0.4, 0.5};
  ck.run_config = "dim = 8\n";
  save_checkpoint(root / "m.ckpt", ck);
  const auto bytes = slurp(root / "m.ckpt");
  const auto loaded = load_checkpoint(root / "m.ckpt");
  const bool ckpt = encode_checkpoint(loaded) == bytes && snapshot(loaded.model) == snapshot(ck.model) &&
                    loaded.vocab.format() == ck.vocab.format() && loaded.stats == ck.stats;

  SynthSpec spec;
  spec.image_size = 32;
  spec.count = 12;
  const auto syn = synthesize_corpus(spec);
  auto corpus = syn.corpus;
  corpus.reports[0].labels.reset();
  corpus.reports[1].findings = "unicode \xc3\xa9 and \"quotes\"\tand tabs";
  save_corpus(root / "corpus.jsonl", corpus);
  const auto reloaded = load_corpus(root / "corpus.jsonl");
  const bool corp = reloaded.reports == corpus.reports && format_corpus(reloaded) == slurp(root / "corpus.jsonl");
  return {afh1 && ckpt && corp, fmt("AFH1 bit-exact %s; checkpoint bit-exact %s; corpus round trip %s",
                                    afh1 ? "yes" : "no", ckpt ? "yes" : "no", corp ? "yes" : "no")};
}

}  // namespace

int main() {
  log::set_level(log::Level::Error);
  const fs::path root = fs::temp_directory_path() / ("mlg_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);

  int failed = 0;
  auto report = [&](const char* id, const std::function<Outcome()>& f) {
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  };

  report("AC-1", ac1);
  report("AC-2", ac2);
  report("AC-3", ac3);
  std::unique_ptr<ToyExperiment> toy;
  try {
    toy = std::make_unique<ToyExperiment>(root / "toy");
  } catch (const std::exception& e) {
    std::printf("toy corpus setup failed: %s\n", e.what());
  }
  report("AC-4", [&] { return toy ? ac4(*toy) : Outcome{false, "no toy corpus"}; });
  report("AC-5", ac5);
  report("AC-6", ac6);
  report("AC-7", [&] { return ac7(root / "determinism"); });
  report("AC-8", [&] { return ac8(root); });
  report("AC-9", [&] { return toy ? ac9(*toy) : Outcome{false, "no toy corpus"}; });

  fs::remove_all(root);
  std::printf("%d/9 criteria passed\n", 9 - failed);
  return failed ? 1 : 0;
}
