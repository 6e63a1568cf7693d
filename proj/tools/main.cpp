// agcn: generate, split, train and export from the command line.
#include <iostream>

#include <CLI11.hpp>

#include "agcn/cli.hpp"

namespace cli = agcn::cli;

int main(int argc, char** argv) {
  CLI::App app{"Lifelong multi-label learning with an augmented correlation graph"};
  app.require_subcommand(1);

  cli::GenerateOptions gen;
  auto* g = app.add_subcommand("generate", "write a synthetic correlated corpus");
  g->add_option("--out", gen.out, "output directory")->required();
  g->add_option("--config", gen.config, "data config file (key = value)")->check(CLI::ExistingFile);
  g->add_option("--seed", gen.seed, "data seed");

  cli::SplitOptions split;
  auto* s = app.add_subcommand("split", "split a corpus into class-disjoint tasks");
  s->add_option("--train", split.train, "training corpus (JSONL)")->required();
  s->add_option("--test", split.test, "test corpus (JSONL)");
  auto* part = s->add_option("--partition", split.partition, "task classes, e.g. 0,1,2;3,4,5");
  s->add_option("--tasks", split.tasks, "even partition into N tasks")->excludes(part);
  s->add_option("--out", split.out, "output directory")->required();

  cli::TrainOptions train;
  std::string preset;
  auto* t = app.add_subcommand("train", "run the lifelong training loop");
  auto* data = t->add_option("--data", train.data, "split.json or the directory holding it");
  t->add_option("--preset", preset, "bundled data and config preset")
      ->check(CLI::IsMember({"benchmark"}))
      ->excludes(data);
  t->add_option("--config", train.config, "training config file (key = value)")
      ->check(CLI::ExistingFile);
  t->add_option("--seed", train.seed, "model seed");
  t->add_option("--mode", train.mode, "agcn | finetune | distill-only");
  t->add_option("--ablate", train.ablation, "none | intra-only");
  t->add_option("--threshold", train.threshold, "prediction threshold");
  t->add_option("--out", train.out, "run directory")->required();

  cli::ExportOptions exp;
  auto* e = app.add_subcommand("export-acm", "export stored correlation matrices");
  e->add_option("--run", exp.run, "run directory")->required();
  e->add_option("--task", exp.task, "task index (default: every stored task)");
  e->add_option("--out", exp.out, "output directory (default: RUN/export)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return cli::kExitConfig;
  }

  if (*g) return cli::cmd_generate(gen, std::cout, std::cerr);
  if (*s) return cli::cmd_split(split, std::cout, std::cerr);
  if (*t) {
    train.benchmark = preset == "benchmark";
    return cli::cmd_train(train, std::cout, std::cerr);
  }
  return cli::cmd_export_acm(exp, std::cout, std::cerr);
}
