#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "boostedseq/boosting.hpp"
#include "boostedseq/corpus.hpp"
#include "boostedseq/eval.hpp"
#include "boostedseq/trainer.hpp"

namespace boostedseq {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Every knob the CLI understands. Defaults are the reference hyperparameters
// (40 epochs, 350 units, dropout 0.5, batch 50, position dim 5, word dim 50,
// 70 steps, 20 networks, lr 1e-3, L2 1e-4).
struct RunConfig {
  TrainConfig train;
  BoostConfig boost;
  std::string train_path;
  std::string test_path;
  std::string vectors_path;
  std::string out_dir = "out";
  std::string checkpoint_path;  // defaults to <out_dir>/ensemble.ckpt
  std::vector<SelectMode> modes = {SelectMode::One, SelectMode::Two, SelectMode::All};
  BagAggregate bag_aggregate = BagAggregate::Mean;
  std::size_t min_count = 1;
  SynthSpec synth;

  // Throws ConfigError for unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  // Flat `key = value` text; '#' starts a comment.
  void load_file(const std::filesystem::path& path);
  void validate() const;

  std::filesystem::path checkpoint() const;
  // Canonical single-line JSON with sorted keys.
  std::string echo() const;

  static const std::vector<std::string>& keys();
};

std::vector<SelectMode> parse_modes(const std::string& csv);

}  // namespace boostedseq
