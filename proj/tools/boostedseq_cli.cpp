// boostedseq: train, evaluate and verify boosted attention-LSTM relation classifiers.
#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "boostedseq/commands.hpp"

namespace {

using boostedseq::RunConfig;

void configure_logging() {
  const char* level = std::getenv("BOOSTEDSEQ_LOG");
  const std::string v = level ? level : "";
  if (v == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else if (v == "info") {
    spdlog::set_level(spdlog::level::info);
  } else {
    spdlog::set_level(spdlog::level::warn);
  }
  spdlog::set_pattern("[%H:%M:%S] [%l] %v");
}

// Flag values are applied after the config file, so they take precedence.
struct Overrides {
  std::string config_path;
  std::map<std::string, std::string> values;
  std::vector<std::string> sets;

  void add_flag(CLI::App* app, const std::string& flag, const std::string& key,
                const std::string& help) {
    app->add_option_function<std::string>(
        flag, [this, key](const std::string& v) { values[key] = v; }, help);
  }

  RunConfig build() const {
    RunConfig cfg;
    if (!config_path.empty()) cfg.load_file(config_path);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        throw boostedseq::ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
      }
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& [k, v] : values) cfg.set(k, v);
    return cfg;
  }
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config_path, "flat key = value config file");
  o.add_flag(app, "--seed", "seed", "root seed");
  o.add_flag(app, "--threads", "threads", "worker threads (default 1)");
  o.add_flag(app, "--out", "out", "output directory");
  app->add_option("--set", o.sets, "override any config key (KEY=VALUE, repeatable)");
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Boosted attention bi-LSTM relation classifier"};
  app.require_subcommand(1);

  Overrides train_o, eval_o, predict_o, synth_o, grad_o;

  auto* train = app.add_subcommand("train", "run the boosting loop and write a checkpoint");
  add_common(train, train_o);
  train_o.add_flag(train, "--rounds", "rounds", "number of boosting rounds T");
  train_o.add_flag(train, "--train", "train", "training dataset");
  train_o.add_flag(train, "--vectors", "vectors", "pre-trained word vectors (text format)");
  train_o.add_flag(train, "--checkpoint", "checkpoint", "checkpoint path");

  auto* eval = app.add_subcommand("eval", "PR curve, max-F1 and P@N of a checkpoint");
  add_common(eval, eval_o);
  eval_o.add_flag(eval, "--test", "test", "held-out dataset");
  eval_o.add_flag(eval, "--mode", "mode", "comma list of one,two,all");
  eval_o.add_flag(eval, "--checkpoint", "checkpoint", "checkpoint path");

  auto* predict = app.add_subcommand("predict", "per-sentence ensemble predictions");
  add_common(predict, predict_o);
  predict_o.add_flag(predict, "--test", "test", "dataset to label");
  predict_o.add_flag(predict, "--checkpoint", "checkpoint", "checkpoint path");

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  add_common(synth, synth_o);

  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  add_common(grad, grad_o);
  boostedseq::GradCheckRequest req;
  grad->add_option("--tolerance", req.tolerance, "maximum relative error");
  grad->add_option("--steps", req.steps, "finite-difference step sizes");
  grad->add_option("--corrupt-block", req.corrupt_block,
                   "test hook: perturb the analytic gradient of this parameter block");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  auto run = [](const Overrides& o, auto&& fn) {
    RunConfig cfg;
    try {
      cfg = o.build();
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 2;
    }
    return fn(cfg);
  };

  if (*train) {
    return run(train_o, [](const RunConfig& c) { return boostedseq::cmd_train(c, std::cout, std::cerr); });
  }
  if (*eval) {
    return run(eval_o, [](const RunConfig& c) { return boostedseq::cmd_eval(c, std::cout, std::cerr); });
  }
  if (*predict) {
    return run(predict_o,
               [](const RunConfig& c) { return boostedseq::cmd_predict(c, std::cout, std::cerr); });
  }
  if (*synth) {
    return run(synth_o, [](const RunConfig& c) { return boostedseq::cmd_synth(c, std::cout, std::cerr); });
  }
  return run(grad_o, [&req](const RunConfig& c) {
    return boostedseq::cmd_gradcheck(c, req, std::cout, std::cerr);
  });
}
