#include "boostedseq/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace boostedseq {

std::string to_string(SelectMode m) {
  switch (m) {
    case SelectMode::One: return "one";
    case SelectMode::Two: return "two";
    case SelectMode::All: return "all";
  }
  return "all";
}

SelectMode parse_select_mode(const std::string& s) {
  if (s == "one") return SelectMode::One;
  if (s == "two") return SelectMode::Two;
  if (s == "all") return SelectMode::All;
  throw std::invalid_argument("mode: expected one, two or all, got '" + s + "'");
}

std::string to_string(BagAggregate a) { return a == BagAggregate::Mean ? "mean" : "max"; }

BagAggregate parse_bag_aggregate(const std::string& s) {
  if (s == "mean") return BagAggregate::Mean;
  if (s == "max") return BagAggregate::Max;
  throw std::invalid_argument("bag_aggregate: expected mean or max, got '" + s + "'");
}

std::vector<Bag> group_bags(const Dataset& data) {
  std::map<std::string, Bag> by_key;
  for (std::size_t i = 0; i < data.sentences.size(); ++i) {
    const auto& s = data.sentences[i];
    Bag& b = by_key[s.bag_key];
    b.key = s.bag_key;
    b.sentences.push_back(i);
    if (s.relation != kNaRelation) b.gold.insert(s.relation);
  }
  std::vector<Bag> out;
  out.reserve(by_key.size());
  for (auto& [k, b] : by_key) out.push_back(std::move(b));
  return out;
}

std::vector<std::size_t> select_sentences(const Bag& bag, SelectMode mode, Rng& rng) {
  if (mode == SelectMode::All) return bag.sentences;
  const std::size_t want = std::min<std::size_t>(mode == SelectMode::One ? 1 : 2,
                                                 bag.sentences.size());
  std::vector<std::size_t> pool = bag.sentences;
  // Partial Fisher-Yates: the first `want` slots are a uniform sample.
  for (std::size_t i = 0; i < want; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(want);
  return pool;
}

std::vector<BagPrediction> score_bags(const std::vector<Bag>& bags,
                                      const std::vector<Vector>& sentence_probs, SelectMode mode,
                                      Rng& rng, BagAggregate aggregate) {
  std::vector<BagPrediction> out;
  out.reserve(bags.size());
  for (const auto& bag : bags) {
    if (bag.sentences.empty()) continue;
    const auto chosen = select_sentences(bag, mode, rng);
    BagPrediction p;
    p.bag_key = bag.key;
    p.gold = bag.gold;
    const std::size_t classes = sentence_probs.at(chosen[0]).size();
    p.scores.assign(classes, aggregate == BagAggregate::Mean ? 0.0 : -1.0);
    for (std::size_t i : chosen) {
      const Vector& q = sentence_probs.at(i);
      require_size(q.size(), classes, "score_bags class count");
      for (std::size_t r = 0; r < classes; ++r) {
        if (aggregate == BagAggregate::Mean) {
          p.scores[r] += q[r];
        } else {
          p.scores[r] = std::max(p.scores[r], q[r]);
        }
      }
    }
    if (aggregate == BagAggregate::Mean) {
      for (double& v : p.scores) v /= static_cast<double>(chosen.size());
    }
    out.push_back(std::move(p));
  }
  return out;
}

PrCurve pr_curve(const std::vector<BagPrediction>& predictions) {
  struct Entry {
    double score;
    const std::string* key;
    std::size_t relation;
    bool hit;
  };
  std::vector<Entry> entries;
  PrCurve curve;
  for (const auto& p : predictions) {
    curve.total_gold += p.gold.size();
    for (std::size_t r = 1; r < p.scores.size(); ++r) {
      entries.push_back({p.scores[r], &p.bag_key, r, p.gold.count(static_cast<int>(r)) > 0});
    }
  }
  if (entries.empty()) throw std::invalid_argument("pr_curve: no predictions to rank");
  if (curve.total_gold == 0) throw std::invalid_argument("pr_curve: no gold facts");
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.score != b.score) return a.score > b.score;
    if (*a.key != *b.key) return *a.key < *b.key;
    return a.relation < b.relation;
  });

  std::size_t hits = 0;
  double prev_recall = 0.0;
  const double gold = static_cast<double>(curve.total_gold);
  curve.points.reserve(entries.size());
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (entries[k].hit) ++hits;
    PrPoint pt;
    pt.rank = k + 1;
    pt.precision = static_cast<double>(hits) / static_cast<double>(k + 1);
    pt.recall = static_cast<double>(hits) / gold;
    pt.score = entries[k].score;
    pt.hit = entries[k].hit;
    if (pt.precision + pt.recall > 0.0) {
      curve.max_f1 = std::max(curve.max_f1,
                              2.0 * pt.precision * pt.recall / (pt.precision + pt.recall));
    }
    curve.area += pt.precision * (pt.recall - prev_recall);
    prev_recall = pt.recall;
    curve.points.push_back(pt);
  }
  return curve;
}

double precision_at_n(const PrCurve& curve, std::size_t n) {
  if (n == 0 || n > curve.points.size()) {
    throw std::invalid_argument("precision_at_n: N=" + std::to_string(n) + " but only " +
                                std::to_string(curve.points.size()) + " ranked predictions");
  }
  return curve.points[n - 1].precision;
}

ModeReport evaluate_mode(const std::vector<Bag>& bags, const std::vector<Vector>& sentence_probs,
                         SelectMode mode, Rng& rng, BagAggregate aggregate) {
  ModeReport r;
  r.mode = mode;
  r.curve = pr_curve(score_bags(bags, sentence_probs, mode, rng, aggregate));
  double sum = 0.0;
  bool all_defined = true;
  for (std::size_t n : kPrecisionCutoffs) {
    if (n <= r.curve.points.size()) {
      r.p_at_n.push_back(precision_at_n(r.curve, n));
      sum += r.p_at_n.back();
    } else {
      r.p_at_n.push_back(std::numeric_limits<double>::quiet_NaN());
      all_defined = false;
    }
  }
  r.p_at_n_avg = all_defined ? sum / static_cast<double>(std::size(kPrecisionCutoffs))
                             : std::numeric_limits<double>::quiet_NaN();
  return r;
}

namespace {

std::string fmt_value(double v) {
  return std::isnan(v) ? std::string("na") : fmt::format("{:.6f}", v);
}

}  // namespace

std::string format_report(const EvalReport& report, const std::string& config_echo) {
  std::ostringstream out;
  out << "format = boostedseq-eval-report/1\n";
  out << "config = " << config_echo << '\n';
  out << "sampling_seed = " << report.sampling_seed << '\n';
  out << "bags = " << report.num_bags << '\n';
  out << "sentences = " << report.num_sentences << '\n';
  for (const auto& m : report.modes) {
    const std::string p = "mode." + to_string(m.mode) + ".";
    out << p << "max_f1 = " << fmt_value(m.curve.max_f1) << '\n';
    out << p << "area = " << fmt_value(m.curve.area) << '\n';
    out << p << "ranked = " << m.curve.points.size() << '\n';
    out << p << "gold = " << m.curve.total_gold << '\n';
    for (std::size_t i = 0; i < m.p_at_n.size(); ++i) {
      out << p << "p_at_" << kPrecisionCutoffs[i] << " = " << fmt_value(m.p_at_n[i]) << '\n';
    }
    out << p << "p_at_avg = " << fmt_value(m.p_at_n_avg) << '\n';
  }
  for (const auto& m : report.modes) {
    out << "[curve " << to_string(m.mode) << "]\n";
    for (const auto& pt : m.curve.points) {
      out << pt.rank << ' ' << fmt_value(pt.precision) << ' ' << fmt_value(pt.recall) << '\n';
    }
  }
  return out.str();
}

std::string format_pr_csv(const PrCurve& curve) {
  std::ostringstream out;
  out << "rank,precision,recall\n";
  for (const auto& pt : curve.points) {
    out << pt.rank << ',' << fmt::format("{:.6f}", pt.precision) << ','
        << fmt::format("{:.6f}", pt.recall) << '\n';
  }
  return out.str();
}

std::string format_p_at_n_table(const EvalReport& report) {
  auto pct = [](double v) { return std::isnan(v) ? std::string("-") : fmt::format("{:.1f}", 100.0 * v); };
  std::string out = fmt::format("{:<6} {:>7} {:>7} {:>7} {:>7} {:>7}\n", "P@N(%)", "100", "200",
                                "300", "Avg", "maxF1");
  for (const auto& m : report.modes) {
    out += fmt::format("{:<6} {:>7} {:>7} {:>7} {:>7} {:>7.2f}\n", to_string(m.mode),
                       pct(m.p_at_n[0]), pct(m.p_at_n[1]), pct(m.p_at_n[2]), pct(m.p_at_n_avg),
                       m.curve.max_f1);
  }
  return out;
}

}  // namespace boostedseq
