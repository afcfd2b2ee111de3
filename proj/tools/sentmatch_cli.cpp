// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include <CLI11.hpp>

#include "sentmatch/commands.hpp"

int main(int argc, char **argv) {
  using namespace sentmatch;
  CLI::App app{"Sentence-pair relatedness and entailment models"};
  app.require_subcommand(1);

  TrainCommand train_cmd;
  std::size_t epochs = 0;
  std::uint64_t train_seed = 0;
  auto *train = app.add_subcommand("train", "train a model and write a checkpoint");
  train->add_option("--config", train_cmd.config_path, "config file")->required()->check(CLI::ExistingFile);
  train->add_option("--data", train_cmd.data, "SICK file or directory")->required()->check(CLI::ExistingPath);
  train->add_option("--out", train_cmd.out, "checkpoint path")->required();
  train->add_option("--log", train_cmd.log, "training log (default <out>.log.jsonl)");
  auto *epochs_opt = train->add_option("--epochs", epochs, "override the configured epoch count");
  auto *seed_opt = train->add_option("--seed", train_seed, "override the configured seed");
  train->add_flag("--keep-best", train_cmd.keep_best, "keep the epoch with the best trial-split score");

  std::string ckpt, data, split_name = "test";
  auto *eval = app.add_subcommand("eval", "evaluate a checkpoint on one split");
  eval->add_option("--ckpt", ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", data, "SICK file or directory")->required()->check(CLI::ExistingPath);
  eval->add_option("--split", split_name, "train, trial or test");

  std::uint64_t gc_seed = 7;
  auto *gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every parameter");
  gradcheck->add_option("--seed", gc_seed, "initialization seed");

  auto *predict = app.add_subcommand("predict", "score tab-separated sentence pairs read from stdin");
  predict->add_option("--ckpt", ckpt, "checkpoint")->required()->check(CLI::ExistingFile);

  std::string config_path;
  auto *compare = app.add_subcommand("compare-topologies", "train and evaluate both matching-CNN topologies");
  compare->add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);
  compare->add_option("--data", data, "SICK file or directory")->required()->check(CLI::ExistingPath);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      if (*epochs_opt) train_cmd.epochs = epochs;
      if (*seed_opt) train_cmd.seed = train_seed;
      return cmd_train(train_cmd, std::cout, std::cerr);
    }
    if (*eval) return cmd_eval(ckpt, data, parse_split(split_name), std::cout, std::cerr);
    if (*gradcheck) return cmd_gradcheck(gc_seed, std::cout);
    if (*predict) return cmd_predict(ckpt, std::cin, std::cout, std::cerr);
    if (*compare) return cmd_compare_topologies(config_path, data, std::cout, std::cerr);
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
