#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "boostedseq/att_lstm.hpp"
#include "boostedseq/boosting.hpp"
#include "boostedseq/corpus.hpp"

namespace boostedseq {

// Binary container, little-endian:
//   magic "BSEQENS\n", u32 version, then length-prefixed strings and named
//   tensors (name, rows, cols, raw doubles) for every member model.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct EnsembleCheckpoint {
  std::string config_echo;
  std::uint64_t seed = 0;
  std::vector<std::string> relation_names;
  Vocabulary vocab;
  EncodingConfig encoding;
  Ensemble ensemble;
  std::vector<RoundRecord> history;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_model(std::ostream& out, const ClassifierModel& model);
ClassifierModel read_model(std::istream& in);

void write_checkpoint(const EnsembleCheckpoint& ckpt, const std::filesystem::path& path);
EnsembleCheckpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace boostedseq
