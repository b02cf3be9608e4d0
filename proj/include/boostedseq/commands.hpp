#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "boostedseq/config.hpp"

namespace boostedseq {

// Each command returns a process exit code and reports to `out`/`err`.

// Writes <out>/ensemble.ckpt (or --checkpoint), train.log, config.txt, vocab.txt.
int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err);

// Writes <out>/report.txt and pr_<mode>.csv; prints the P@N table.
int cmd_eval(const RunConfig& cfg, std::ostream& out, std::ostream& err);

// Writes <out>/predictions.tsv (bag key, predicted relation, confidence).
int cmd_predict(const RunConfig& cfg, std::ostream& out, std::ostream& err);

// Writes <out>/train.txt and test.txt; prints the label histogram and corrupted count.
int cmd_synth(const RunConfig& cfg, std::ostream& out, std::ostream& err);

struct GradCheckRequest {
  std::vector<double> steps = {1e-4, 1e-5};
  double tolerance = 1e-4;
  std::size_t configurations = 5;
  std::string corrupt_block;
};

int cmd_gradcheck(const RunConfig& cfg, const GradCheckRequest& req, std::ostream& out,
                  std::ostream& err);

}  // namespace boostedseq
