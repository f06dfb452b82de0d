#include "mlg/cli/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "mlg/ablation/ablation.hpp"
#include "mlg/cli/checkpoint.hpp"
#include "mlg/data/annotations.hpp"
#include "mlg/data/synth.hpp"
#include "mlg/error.hpp"
#include "mlg/eval/evaluate.hpp"
#include "mlg/log.hpp"

namespace mlg::cli {

namespace {

namespace fs = std::filesystem;

void require(const fs::path& p, const char* flag) {
  if (p.empty()) throw ValidationError(std::string("missing required option ") + flag);
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

Corpus load_corpus_dir(const fs::path& dir) { return load_corpus(dir / "corpus.jsonl"); }

std::vector<Image> load_images(const Corpus& c) {
  std::vector<Image> out;
  out.reserve(c.reports.size());
  for (const auto& r : c.reports) out.push_back(read_png(c.image_path(r)));
  return out;
}

ImageSizes sizes_of(const Corpus& c, const std::vector<Image>& images) {
  ImageSizes s;
  for (std::size_t i = 0; i < images.size(); ++i) s[c.reports[i].id] = {images[i].height, images[i].width};
  return s;
}

ImageSizes sizes_of(const Corpus& c) { return sizes_of(c, load_images(c)); }

TrainSplit make_split(const Corpus& c, const std::vector<Image>& images, int side, const NormStats& stats) {
  TrainSplit s;
  for (std::size_t i = 0; i < images.size(); ++i) {
    s.reports.push_back(c.reports[i]);
    s.images.push_back(preprocess(images[i], side, stats));
  }
  return s;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path.string());
  f << text;
}

fs::path with_suffix(const fs::path& p, const std::string& suffix) {
  fs::path r = p;
  r += suffix;
  return r;
}

PromptSet prompts_for(const fs::path& explicit_path, const RunConfig& rc, const fs::path& corpus_dir) {
  if (!explicit_path.empty()) return load_prompts(explicit_path);
  if (!rc.prompts.empty()) return load_prompts(rc.prompts);
  return load_prompts(corpus_dir / "prompts.json");
}

}  // namespace

RunConfig resolve_config(const ConfigArgs& args) {
  RunConfig rc;
  rc.apply_profile(args.profile);
  fs::path file = args.config;
  if (file.empty())
    if (const char* env = std::getenv(kConfigEnv); env && *env) file = env;
  if (!file.empty()) rc.apply_file(file);
  for (const auto& kv : args.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ValidationError("override '" + kv + "' is not key=value");
    rc.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  rc.validate();
  return rc;
}

void cmd_synth(const SynthArgs& args, std::ostream& out) {
  require(args.out, "--out");
  SynthSpec spec;
  spec.count = args.count;
  spec.seed = args.seed;
  spec.image_size = args.size;
  spec.min_shapes = args.min_shapes;
  spec.max_shapes = args.max_shapes;
  spec.validate();
  const auto synth = synthesize_corpus(spec);
  write_synthetic(args.out, synth);
  Vocabulary::from_words(synth_words(spec)).save(args.out / "vocab.txt");
  out << "wrote " << synth.corpus.reports.size() << " reports, " << synth.masks.size() << " masks to "
      << args.out.string() << "\n";
}

void cmd_train(const TrainArgs& args, std::ostream& out) {
  require(args.corpus, "--corpus");
  require(args.out, "--out");
  const RunConfig rc = resolve_config(args.config);
  const Vocabulary vocab = Vocabulary::load(args.vocab.empty() ? args.corpus / "vocab.txt" : args.vocab);
  ModelConfig mc = rc.model;
  mc.vocab_size = vocab.size();
  mc.validate();
  const std::string rc_text = rc.format();

  const Corpus corpus = load_corpus_dir(args.corpus);
  const auto images = load_images(corpus);

  Model<float> model(mc);
  model.temps = rc.temps;
  NormStats stats;
  TrainState state;
  if (!args.resume.empty()) {
    auto ck = load_checkpoint(args.resume);
    if (ck.model.config.fingerprint() != mc.fingerprint())
      throw ValidationError("resume checkpoint fingerprint mismatch: " + ck.model.config.describe() + " vs " +
                            mc.describe());
    if (ck.vocab.hash() != vocab.hash()) throw ValidationError("resume checkpoint was trained with another tokenizer");
    if (ck.run_config != rc_text) throw ValidationError("run configuration differs from the resumed run");
    if (!ck.state) throw ValidationError("checkpoint " + args.resume.string() + " has no training state");
    model = std::move(ck.model);
    stats = ck.stats;
    state = std::move(*ck.state);
  } else {
    stats = compute_norm_stats(images, mc.image_side);
    model.init(rc.train.seed);
  }

  const TrainSplit train_split = make_split(corpus, images, mc.image_side, stats);
  std::optional<TrainSplit> val_split;
  if (!args.val.empty()) {
    const Corpus vc = load_corpus_dir(args.val);
    val_split = make_split(vc, load_images(vc), mc.image_side, stats);
  }

  const fs::path log_path = args.log.empty() ? with_suffix(args.out, ".log.jsonl") : args.log;
  if (log_path.has_parent_path()) fs::create_directories(log_path.parent_path());
  std::ofstream log_file(log_path, args.resume.empty() ? std::ios::trunc : std::ios::app);
  if (!log_file) throw InputError("cannot write " + log_path.string());
  const fs::path resume_path = with_suffix(args.out, ".resume");

  TrainCallbacks cb;
  cb.on_step = [&](const StepRecord& s) {
    nlohmann::ordered_json j{{"type", "step"},    {"epoch", s.epoch},    {"step", s.step},
                             {"loss", s.loss.total}, {"sw", s.loss.sw}, {"ds", s.loss.ds},
                             {"gr", s.loss.gr},     {"lr", s.lr}};
    log_file << j.dump() << "\n";
  };
  cb.on_epoch = [&](const EpochSummary& e, const Model<float>& m, const TrainState& st) {
    nlohmann::ordered_json j{{"type", "epoch"}, {"epoch", e.epoch}, {"train_loss", e.train_loss},
                             {"lr", e.lr},      {"improved", e.improved}};
    j["val_loss"] = std::isfinite(e.val_loss) ? nlohmann::ordered_json(e.val_loss) : nlohmann::ordered_json();
    log_file << j.dump() << "\n";
    log_file.flush();
    save_checkpoint(resume_path, Checkpoint{m, vocab, stats, st, rc_text});
    Model<float> best = m;
    if (!st.best.empty()) restore(best, st.best);
    save_checkpoint(args.out, Checkpoint{best, vocab, stats, std::nullopt, rc_text});
    out << "epoch " << e.epoch << " train_loss " << fixed(e.train_loss)
        << " val_loss " << (std::isfinite(e.val_loss) ? fixed(e.val_loss) : "nan") << " lr " << e.lr << "\n";
  };
  const auto res = train(std::move(model), vocab, train_split, val_split ? &*val_split : nullptr, rc.train, state,
                         cb, args.stop_after);
  if (res.epochs.empty() && !fs::exists(args.out)) {
    Model<float> best = res.last;
    if (!res.state.best.empty()) restore(best, res.state.best);
    save_checkpoint(args.out, Checkpoint{best, vocab, stats, std::nullopt, rc_text});
  }
  out << "completed " << res.state.epoch << "/" << rc.train.epochs << " epochs; checkpoint " << args.out.string()
      << " checksum " << hex(model_checksum(load_checkpoint(args.out).model)) << "\n";
}

void cmd_locate(const LocateArgs& args, std::ostream& out) {
  require(args.checkpoint, "--checkpoint");
  require(args.image, "--image");
  require(args.out, "--out");
  if (args.prompt.empty()) throw ValidationError("missing required option --prompt");
  auto ck = load_checkpoint(args.checkpoint);
  InferenceModel im{std::move(ck.model), std::move(ck.vocab), ck.stats, parse_heatmap_mode(args.mode)};
  const Image img = read_png(args.image);
  Heatmap hm = localize(img, args.prompt, im);
  hm.image_id = args.image.stem().string();
  const auto raster = with_suffix(args.out, ".afh1");
  const auto ov = with_suffix(args.out, "_overlay.png");
  if (args.out.has_parent_path()) fs::create_directories(args.out.parent_path());
  write_heatmap(raster, hm);
  write_png(ov, overlay(img, hm));
  const auto [lo, hi] = std::minmax_element(hm.values.begin(), hm.values.end());
  out << "heatmap " << raster.string() << " " << hm.height << "x" << hm.width << " min " << fixed(*lo) << " max "
      << fixed(*hi) << "\n";
  out << "overlay " << ov.string() << "\n";
  if (args.threshold) {
    const auto mp = with_suffix(args.out, "_mask.png");
    const Mask m = binarize(hm, *args.threshold);
    write_mask_png(mp, m);
    out << "mask " << mp.string() << " pixels " << m.count() << "\n";
  }
}

void cmd_classify(const ClassifyArgs& args, std::ostream& out) {
  require(args.checkpoint, "--checkpoint");
  require(args.prompts, "--prompts");
  if (args.inputs.empty()) throw ValidationError("no input images");
  auto ck = load_checkpoint(args.checkpoint);
  InferenceModel im{std::move(ck.model), std::move(ck.vocab), ck.stats};
  im.cls_temperature = args.temperature;
  const PromptSet prompts = load_prompts(args.prompts);
  const auto pathologies = args.pathologies.empty() ? prompts.names() : args.pathologies;

  std::vector<std::pair<std::string, fs::path>> images;
  for (const auto& in : args.inputs) {
    if (fs::is_directory(in)) {
      if (fs::exists(in / "corpus.jsonl")) {
        const Corpus c = load_corpus_dir(in);
        for (const auto& r : c.reports) images.emplace_back(r.id, c.image_path(r));
      } else {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(in))
          if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) images.emplace_back(f.filename().string(), f);
      }
    } else {
      images.emplace_back(in.filename().string(), in);
    }
  }
  std::map<std::string, ClassPrompt> cps;
  for (const auto& p : pathologies) cps.emplace(p, class_prompt(p, prompts, im));
  out << "image";
  for (const auto& p : pathologies) out << "\t" << p;
  out << "\n";
  for (const auto& [name, path] : images) {
    const auto pyr = im.encode_image(read_png(path));
    out << name;
    for (const auto& p : pathologies) out << "\t" << fixed(classify_features(pyr.v_g, cps.at(p), im.cls_temperature));
    out << "\n";
  }
}

void cmd_eval(const EvalArgs& args, std::ostream& out) {
  require(args.checkpoint, "--checkpoint");
  require(args.corpus, "--corpus");
  require(args.out, "--out");
  const RunConfig rc = resolve_config(args.config);
  auto ck = load_checkpoint(args.checkpoint);
  InferenceModel im{std::move(ck.model), std::move(ck.vocab), ck.stats, rc.heatmap_mode, rc.cls_temperature};
  const int threads = rc.train.threads;

  LocalizationProtocol protocol;
  protocol.thresholds = rc.thresholds;
  protocol.theta = rc.theta;
  protocol.reps = rc.bootstrap_reps;
  protocol.seed = rc.train.seed;
  if (args.protocol == "multi-threshold") {
    protocol.kind = LocalizationProtocol::Kind::MultiThreshold;
  } else if (args.protocol == "fixed") {
    protocol.kind = LocalizationProtocol::Kind::Fixed;
  } else {
    throw ValidationError("unknown protocol '" + args.protocol + "' (expected multi-threshold or fixed)");
  }

  const Corpus corpus = load_corpus_dir(args.corpus);
  const PromptSet prompts = prompts_for(args.prompts, rc, args.corpus);
  const fs::path ann = args.annotations.empty() ? args.corpus / "annotations.jsonl" : args.annotations;

  if (protocol.kind == LocalizationProtocol::Kind::Fixed && !args.val.empty()) {
    const Corpus vc = load_corpus_dir(args.val);
    const MaskMap vm = load_annotations(args.val / "annotations.jsonl", sizes_of(vc));
    protocol.theta = select_threshold(im, vc, vm, prompts, rc.thresholds, threads);
    out << "selected threshold " << protocol.theta << "\n";
  }

  fs::create_directories(args.out);
  if (fs::exists(ann)) {
    const MaskMap masks = load_annotations(ann, sizes_of(corpus));
    const auto rep = evaluate_localization(im, corpus, masks, prompts, protocol, threads);
    write_report(args.out / "localization.jsonl", args.out / "localization.txt", rep);
    out << rep.render();
  } else {
    log::warn("no annotations at " + ann.string() + "; localization skipped");
  }
  const bool labelled =
      std::any_of(corpus.reports.begin(), corpus.reports.end(), [](const Report& r) { return r.labels.has_value(); });
  if (labelled) {
    const auto pathologies = args.pathologies.empty() ? prompts.names() : args.pathologies;
    const auto rep =
        evaluate_classification(im, corpus, prompts, pathologies, rc.bootstrap_reps, rc.train.seed, threads);
    write_report(args.out / "classification.jsonl", args.out / "classification.txt", rep);
    out << rep.render();
  }
}

void cmd_ablate(const AblateArgs& args, std::ostream& out) {
  require(args.train, "--train");
  require(args.eval, "--eval");
  require(args.out, "--out");
  if (args.mode != "levels" && args.mode != "prompts")
    throw ValidationError("unknown ablation mode '" + args.mode + "' (expected levels or prompts)");
  const RunConfig rc = resolve_config(args.config);

  AblationAssets a;
  a.vocab = Vocabulary::load(args.vocab.empty() ? args.train / "vocab.txt" : args.vocab);
  a.model = rc.model;
  a.model.vocab_size = a.vocab.size();
  a.model.validate();
  a.temps = rc.temps;
  const Corpus tc = load_corpus_dir(args.train);
  const auto timgs = load_images(tc);
  a.stats = compute_norm_stats(timgs, a.model.image_side);
  a.train = make_split(tc, timgs, a.model.image_side, a.stats);
  if (!args.val.empty()) {
    const Corpus vc = load_corpus_dir(args.val);
    a.val = make_split(vc, load_images(vc), a.model.image_side, a.stats);
  }
  a.eval = load_corpus_dir(args.eval);
  a.masks = load_annotations(args.eval / "annotations.jsonl", sizes_of(a.eval));
  a.prompts = prompts_for({}, rc, args.eval);
  a.protocol.thresholds = rc.thresholds;
  a.protocol.reps = rc.bootstrap_reps;
  a.protocol.seed = rc.train.seed;
  a.mode = rc.heatmap_mode;
  a.threads = rc.train.threads;

  CheckpointCache cache(args.out / "checkpoints");
  fs::create_directories(args.out);
  if (args.mode == "levels") {
    AblationPlan plan;
    plan.base = rc.train;
    plan.seeds = args.seeds;
    const auto table = run_ablation(plan, a, cache);
    std::string jsonl;
    for (const auto& row : table.rows)
      for (const auto& c : row.cells) {
        nlohmann::ordered_json j{{"variant", row.switches.label()}, {"sw", row.switches.sw}, {"ds", row.switches.ds},
                                 {"gr", row.switches.gr},          {"seed", c.seed},        {"iou", c.iou},
                                 {"dice", c.dice},                 {"cnr", c.cnr},          {"checksum", hex(c.checksum)}};
        jsonl += j.dump() + "\n";
      }
    write_text(args.out / "ablation.jsonl", jsonl);
    write_text(args.out / "ablation.txt", table.render());
    out << table.render();
    return;
  }

  const auto captions = load_captions(args.eval / "captions.jsonl");
  std::string jsonl;
  for (auto seed : args.seeds) {
    const auto model = cache.get_or_train(a, rc.train, {true, true, true}, seed);
    InferenceModel im{model, a.vocab, a.stats, a.mode};
    const auto cmp =
        run_prompt_comparison(im, a.eval, a.masks, simple_prompts(), caption_prompts(captions), a.protocol, a.threads);
    for (const auto& [mode, rep] : {std::pair<const char*, const MetricReport*>{"simple", &cmp.simple},
                                    {"precise", &cmp.precise}})
      for (const auto& r : rep->rows)
        if (r.pathology == "Mean") {
          nlohmann::ordered_json j{{"seed", seed}, {"prompt", mode}, {"metric", r.metric},
                                   {"point", r.point}, {"lo", r.lo},    {"hi", r.hi}};
          jsonl += j.dump() + "\n";
        }
    const auto text = cmp.render();
    write_text(args.out / ("prompts_seed" + std::to_string(seed) + ".txt"), text);
    out << "seed " << seed << "\n" << text;
  }
  write_text(args.out / "prompts.jsonl", jsonl);
}

}  // namespace mlg::cli
