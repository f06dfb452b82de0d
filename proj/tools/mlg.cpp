#include <CLI11.hpp>

#include <iostream>

#include "mlg/cli/commands.hpp"
#include "mlg/error.hpp"
#include "mlg/kernels/kernels.hpp"
#include "mlg/log.hpp"

namespace {

void add_config_flags(CLI::App* cmd, mlg::cli::ConfigArgs& c) {
  cmd->add_option("--profile", c.profile, "full or toy")->capture_default_str();
  cmd->add_option("--config", c.config, "key=value config file (default: $MLG_CONFIG)");
  cmd->add_option("--set", c.overrides, "override one key, key=value; repeatable");
}

std::string keys_help() {
  std::string s = "Config keys (default in parentheses):\n";
  for (const auto& k : mlg::RunConfig::keys()) s += "  " + k.name + ": " + k.doc + "\n";
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-level image-text alignment: training, localization, classification and evaluation"};
  app.require_subcommand(1);
  app.footer(keys_help());
  bool quiet = false, verbose = false;
  app.add_flag("-q,--quiet", quiet, "only warnings and errors");
  app.add_flag("-v,--verbose", verbose, "debug logging");

  mlg::cli::SynthArgs synth;
  auto* s = app.add_subcommand("synth", "write a synthetic shapes corpus");
  s->add_option("--out", synth.out, "output directory")->required();
  s->add_option("--count", synth.count)->capture_default_str();
  s->add_option("--seed", synth.seed)->capture_default_str();
  s->add_option("--size", synth.size, "image side in pixels")->capture_default_str();
  s->add_option("--min-shapes", synth.min_shapes)->capture_default_str();
  s->add_option("--max-shapes", synth.max_shapes)->capture_default_str();

  mlg::cli::TrainArgs train;
  auto* t = app.add_subcommand("train", "train a model on a corpus");
  t->add_option("--corpus", train.corpus, "corpus directory")->required();
  t->add_option("--val", train.val, "validation corpus directory");
  t->add_option("--vocab", train.vocab, "tokenizer file (default <corpus>/vocab.txt)");
  t->add_option("--out", train.out, "checkpoint path")->required();
  t->add_option("--log", train.log, "JSONL training log (default <out>.log.jsonl)");
  t->add_option("--resume", train.resume, "continue from <out>.resume");
  t->add_option("--stop-after", train.stop_after, "epochs to run in this call");
  add_config_flags(t, train.config);

  mlg::cli::LocateArgs locate;
  auto* l = app.add_subcommand("locate", "heatmap for a text prompt");
  l->add_option("--checkpoint", locate.checkpoint)->required();
  l->add_option("--image", locate.image)->required();
  l->add_option("--prompt", locate.prompt)->required();
  l->add_option("--out", locate.out, "output prefix")->required();
  l->add_option("--threshold", locate.threshold, "also write a binary mask");
  l->add_option("--mode", locate.mode, "clamp or minmax")->capture_default_str();

  mlg::cli::ClassifyArgs classify;
  auto* c = app.add_subcommand("classify", "zero-shot probabilities per pathology");
  c->add_option("--checkpoint", classify.checkpoint)->required();
  c->add_option("--prompts", classify.prompts, "prompt file")->required();
  c->add_option("--pathology", classify.pathologies, "repeatable; default all");
  c->add_option("--temperature", classify.temperature)->capture_default_str();
  c->add_option("inputs", classify.inputs, "PNG files or directories")->required();

  mlg::cli::EvalArgs eval;
  auto* e = app.add_subcommand("eval", "localization and classification metrics");
  e->add_option("--checkpoint", eval.checkpoint)->required();
  e->add_option("--corpus", eval.corpus)->required();
  e->add_option("--annotations", eval.annotations, "default <corpus>/annotations.jsonl");
  e->add_option("--prompts", eval.prompts, "default <corpus>/prompts.json");
  e->add_option("--protocol", eval.protocol, "multi-threshold or fixed")->capture_default_str();
  e->add_option("--val", eval.val, "validation corpus for the fixed protocol threshold");
  e->add_option("--pathology", eval.pathologies, "classification pathologies; default all");
  e->add_option("--out", eval.out, "report directory")->required();
  add_config_flags(e, eval.config);

  mlg::cli::AblateArgs ablate;
  auto* a = app.add_subcommand("ablate", "loss-level ablation or prompt comparison");
  a->add_option("--train", ablate.train, "synthetic training corpus")->required();
  a->add_option("--val", ablate.val, "validation corpus");
  a->add_option("--eval", ablate.eval, "synthetic evaluation corpus")->required();
  a->add_option("--vocab", ablate.vocab, "default <train>/vocab.txt");
  a->add_option("--out", ablate.out)->required();
  a->add_option("--mode", ablate.mode, "levels or prompts")->capture_default_str();
  a->add_option("--seeds", ablate.seeds, "seed list")->delimiter(',');
  add_config_flags(a, ablate.config);

  CLI11_PARSE(app, argc, argv);
  if (quiet) mlg::log::set_level(mlg::log::Level::Warn);
  if (verbose) mlg::log::set_level(mlg::log::Level::Debug);
  mlg::log::debug(std::string("kernels: ") + std::string(mlg::kernels::isa_name(mlg::kernels::active_isa())));

  try {
    if (*s) mlg::cli::cmd_synth(synth, std::cout);
    if (*t) mlg::cli::cmd_train(train, std::cout);
    if (*l) mlg::cli::cmd_locate(locate, std::cout);
    if (*c) mlg::cli::cmd_classify(classify, std::cout);
    if (*e) mlg::cli::cmd_eval(eval, std::cout);
    if (*a) mlg::cli::cmd_ablate(ablate, std::cout);
  } catch (const mlg::ValidationError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
