#pragma once

#include <set>
#include <string>
#include <vector>

#include "boostedseq/corpus.hpp"
#include "boostedseq/numerics.hpp"

namespace boostedseq {

enum class SelectMode { One, Two, All };
enum class BagAggregate { Mean, Max };

std::string to_string(SelectMode m);
SelectMode parse_select_mode(const std::string& s);
std::string to_string(BagAggregate a);
BagAggregate parse_bag_aggregate(const std::string& s);

struct Bag {
  std::string key;
  std::vector<std::size_t> sentences;  // dataset indices, file order
  std::set<int> gold;                  // non-NA relations
};

// Bags ordered by key.
std::vector<Bag> group_bags(const Dataset& data);

struct BagPrediction {
  std::string bag_key;
  Vector scores;  // one entry per relation; index 0 (NA) is never ranked
  std::set<int> gold;
};

// Indices of the sentences a mode looks at; One/Two sample without replacement.
std::vector<std::size_t> select_sentences(const Bag& bag, SelectMode mode, Rng& rng);

// sentence_probs[i] are the class probabilities of dataset sentence i.
std::vector<BagPrediction> score_bags(const std::vector<Bag>& bags,
                                      const std::vector<Vector>& sentence_probs, SelectMode mode,
                                      Rng& rng, BagAggregate aggregate = BagAggregate::Mean);

struct PrPoint {
  std::size_t rank = 0;  // 1-based
  double precision = 0.0;
  double recall = 0.0;
  double score = 0.0;
  bool hit = false;
};

struct PrCurve {
  std::vector<PrPoint> points;
  std::size_t total_gold = 0;
  double max_f1 = 0.0;
  double area = 0.0;  // sum of precision over recall increments
};

PrCurve pr_curve(const std::vector<BagPrediction>& predictions);

// Throws std::invalid_argument naming N when fewer than N predictions exist.
double precision_at_n(const PrCurve& curve, std::size_t n);

inline constexpr std::size_t kPrecisionCutoffs[] = {100, 200, 300};

struct ModeReport {
  SelectMode mode = SelectMode::All;
  PrCurve curve;
  std::vector<double> p_at_n;  // parallel to kPrecisionCutoffs; NaN if undefined
  double p_at_n_avg = 0.0;     // NaN if any cutoff is undefined
};

struct EvalReport {
  std::vector<ModeReport> modes;
  std::size_t num_bags = 0;
  std::size_t num_sentences = 0;
  std::uint64_t sampling_seed = 0;
};

ModeReport evaluate_mode(const std::vector<Bag>& bags, const std::vector<Vector>& sentence_probs,
                         SelectMode mode, Rng& rng, BagAggregate aggregate);

// key = value summary followed by the PR point list of each mode.
std::string format_report(const EvalReport& report, const std::string& config_echo);
std::string format_pr_csv(const PrCurve& curve);
// Human-readable P@N table.
std::string format_p_at_n_table(const EvalReport& report);

}  // namespace boostedseq
