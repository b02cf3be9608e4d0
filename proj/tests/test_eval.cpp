#include <cmath>
#include <string>

#include "boostedseq/eval.hpp"
#include "doctest.h"

using namespace boostedseq;

namespace {

Sentence sent(const std::string& key, int relation) {
  Sentence s;
  s.bag_key = key;
  s.tokens = {"a", "b", "c"};
  s.e1 = {0, 1};
  s.e2 = {2, 3};
  s.relation = relation;
  return s;
}

BagPrediction pred(const std::string& key, Vector scores, std::set<int> gold) {
  BagPrediction p;
  p.bag_key = key;
  p.scores = std::move(scores);
  p.gold = std::move(gold);
  return p;
}

// Five bags over four relations plus NA.
Dataset five_bags() {
  Dataset d;
  d.relation_names = {"NA", "r1", "r2", "r3"};
  d.sentences = {sent("b1", 1), sent("b2", 0), sent("b1", 1), sent("b3", 2), sent("b4", 0),
                 sent("b3", 3), sent("b5", 2), sent("b4", 0)};
  return d;
}

}  // namespace

TEST_CASE("sentences sharing a key form one bag") {
  Dataset d;
  d.relation_names = {"NA", "r1"};
  d.sentences = {sent("x", 1), sent("x", 1), sent("x", 0)};
  const auto bags = group_bags(d);
  REQUIRE(bags.size() == 1);
  CHECK(bags[0].sentences == std::vector<std::size_t>{0, 1, 2});
  CHECK(bags[0].gold == std::set<int>{1});
}

TEST_CASE("all-NA bag has no gold facts") {
  Dataset d;
  d.relation_names = {"NA", "r1"};
  d.sentences = {sent("n", 0), sent("n", 0)};
  CHECK(group_bags(d)[0].gold.empty());
}

TEST_CASE("bags are ordered by key and keep file order") {
  const auto bags = group_bags(five_bags());
  REQUIRE(bags.size() == 5);
  CHECK(bags[0].key == "b1");
  CHECK(bags[0].sentences == std::vector<std::size_t>{0, 2});
  CHECK(bags[2].key == "b3");
  CHECK(bags[2].gold == std::set<int>{2, 3});
  CHECK(bags[3].gold.empty());
  std::size_t total = 0;
  for (const auto& b : bags) total += b.sentences.size();
  CHECK(total == five_bags().size());
}

TEST_CASE("single-sentence bag selects that sentence in every mode") {
  Bag b;
  b.key = "k";
  b.sentences = {7};
  Rng rng(1);
  for (auto m : {SelectMode::One, SelectMode::Two, SelectMode::All}) {
    CHECK(select_sentences(b, m, rng) == std::vector<std::size_t>{7});
  }
}

TEST_CASE("sampled modes draw distinct members and are seeded") {
  Bag b;
  b.sentences = {0, 1, 2, 3, 4, 5};
  Rng a(9), c(9);
  for (int i = 0; i < 50; ++i) {
    const auto one = select_sentences(b, SelectMode::One, a);
    const auto two = select_sentences(b, SelectMode::Two, a);
    CHECK(one == select_sentences(b, SelectMode::One, c));
    CHECK(two == select_sentences(b, SelectMode::Two, c));
    REQUIRE(one.size() == 1);
    REQUIRE(two.size() == 2);
    CHECK(two[0] != two[1]);
    CHECK(two[0] < 6);
    CHECK(two[1] < 6);
  }
  CHECK(select_sentences(b, SelectMode::All, a) == b.sentences);
}

TEST_CASE("mean of identical sentence scores is that score") {
  Bag b;
  b.key = "k";
  b.sentences = {0, 1, 2};
  b.gold = {1};
  const Vector q = {0.2, 0.5, 0.3};
  const std::vector<Vector> probs = {q, q, q};
  Rng rng(2);
  for (auto m : {SelectMode::One, SelectMode::Two, SelectMode::All}) {
    const auto p = score_bags({b}, probs, m, rng);
    REQUIRE(p.size() == 1);
    for (std::size_t r = 0; r < q.size(); ++r) CHECK(p[0].scores[r] == doctest::Approx(q[r]).epsilon(1e-15));
    CHECK(p[0].gold == b.gold);
  }
}

TEST_CASE("mean and max aggregation on a hand bag") {
  Bag b;
  b.key = "k";
  b.sentences = {0, 1};
  const std::vector<Vector> probs = {{0.6, 0.1, 0.3}, {0.2, 0.7, 0.1}};
  Rng rng(3);
  const auto mean = score_bags({b}, probs, SelectMode::All, rng, BagAggregate::Mean);
  CHECK(mean[0].scores[1] == doctest::Approx(0.4));
  CHECK(mean[0].scores[2] == doctest::Approx(0.2));
  const auto mx = score_bags({b}, probs, SelectMode::All, rng, BagAggregate::Max);
  CHECK(mx[0].scores == Vector{0.6, 0.7, 0.3});
}

TEST_CASE("perfect ranking gives max-F1 and precision of one") {
  std::vector<BagPrediction> preds;
  for (int i = 0; i < 120; ++i) {
    const int gold = 1 + i % 3;
    Vector s(4, 0.01);
    s[gold] = 0.9;
    preds.push_back(pred("k" + std::to_string(1000 + i), s, {gold}));
  }
  const auto c = pr_curve(preds);
  CHECK(c.total_gold == 120);
  CHECK(c.points.size() == 360);
  CHECK(c.max_f1 == 1.0);
  CHECK(precision_at_n(c, 100) == 1.0);
  CHECK(precision_at_n(c, 120) == 1.0);
  CHECK(c.area == doctest::Approx(1.0));
}

TEST_CASE("two-bag hand fixture") {
  const std::vector<BagPrediction> preds = {pred("a", {0, 0.9, 0.3}, {1}),
                                            pred("b", {0, 0.8, 0.6}, {2})};
  const auto c = pr_curve(preds);
  REQUIRE(c.points.size() == 4);
  // Ranked: (a,1,hit) (b,1,miss) (b,2,hit) (a,2,miss).
  CHECK(c.points[0].hit);
  CHECK_FALSE(c.points[1].hit);
  CHECK(c.points[2].hit);
  CHECK(precision_at_n(c, 1) == 1.0);
  CHECK(precision_at_n(c, 2) == 0.5);
  CHECK(precision_at_n(c, 3) == doctest::Approx(2.0 / 3.0));
  CHECK(c.points[2].recall == 1.0);
  CHECK(c.max_f1 == doctest::Approx(0.8));
}

TEST_CASE("reversed scores put every hit last") {
  std::vector<BagPrediction> preds;
  for (int i = 0; i < 10; ++i) preds.push_back(pred("k" + std::to_string(i), {0, 0.1, 0.9}, {1}));
  const auto c = pr_curve(preds);
  for (std::size_t n = 1; n <= 10; ++n) CHECK(precision_at_n(c, n) == 0.0);
  CHECK(c.max_f1 == doctest::Approx(2.0 * 0.5 * 1.0 / 1.5));
}

TEST_CASE("recall is monotone and max-F1 ignores monotone score transforms") {
  Rng rng(4);
  std::vector<BagPrediction> preds, squashed;
  for (int i = 0; i < 60; ++i) {
    Vector s(5);
    for (double& v : s) v = rng.uniform();
    std::set<int> gold;
    if (rng.uniform() < 0.7) gold.insert(1 + static_cast<int>(rng.uniform_int(4)));
    preds.push_back(pred("k" + std::to_string(i), s, gold));
    Vector t = s;
    for (double& v : t) v = std::exp(3.0 * v) - 1.0;
    squashed.push_back(pred("k" + std::to_string(i), t, gold));
  }
  const auto c = pr_curve(preds);
  for (std::size_t k = 1; k < c.points.size(); ++k) CHECK(c.points[k].recall >= c.points[k - 1].recall);
  CHECK(c.points.back().recall == 1.0);
  const auto d = pr_curve(squashed);
  CHECK(d.max_f1 == c.max_f1);
  for (std::size_t k = 0; k < c.points.size(); ++k) CHECK(d.points[k].hit == c.points[k].hit);
}

TEST_CASE("All mode on single-sentence bags ranks the sentence scores") {
  Dataset d;
  d.relation_names = {"NA", "r1", "r2"};
  d.sentences = {sent("p", 1), sent("q", 2), sent("r", 0)};
  const std::vector<Vector> probs = {{0.1, 0.7, 0.2}, {0.3, 0.3, 0.4}, {0.8, 0.1, 0.1}};
  Rng rng(5);
  const auto scored = score_bags(group_bags(d), probs, SelectMode::All, rng);
  REQUIRE(scored.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(scored[i].scores == probs[i]);
}

TEST_CASE("NA is never ranked") {
  const auto c = pr_curve({pred("a", {0.99, 0.01}, {1})});
  REQUIRE(c.points.size() == 1);
  CHECK(c.points[0].score == 0.01);
}

TEST_CASE("precision at N beyond the ranking names N") {
  const auto c = pr_curve({pred("a", {0, 0.9, 0.3}, {1})});
  try {
    precision_at_n(c, 100);
    FAIL("expected an exception");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("N=100") != std::string::npos);
  }
  CHECK_THROWS(precision_at_n(c, 0));
}

TEST_CASE("curve without gold facts is rejected") {
  CHECK_THROWS_AS(pr_curve({pred("a", {0.5, 0.5}, {})}), std::invalid_argument);
  CHECK_THROWS_AS(pr_curve({}), std::invalid_argument);
}

TEST_CASE("evaluate_mode marks undefined cutoffs") {
  Dataset d = five_bags();
  std::vector<Vector> probs(d.size(), Vector{0.25, 0.25, 0.25, 0.25});
  Rng rng(6);
  const auto r = evaluate_mode(group_bags(d), probs, SelectMode::All, rng, BagAggregate::Mean);
  REQUIRE(r.p_at_n.size() == 3);
  for (double v : r.p_at_n) CHECK(std::isnan(v));
  CHECK(std::isnan(r.p_at_n_avg));
  CHECK(r.curve.points.size() == 15);
}

TEST_CASE("report and csv formatting") {
  const auto c = pr_curve({pred("a", {0, 0.9, 0.3}, {1}), pred("b", {0, 0.8, 0.6}, {2})});
  const std::string csv = format_pr_csv(c);
  CHECK(csv.rfind("rank,precision,recall\n", 0) == 0);
  CHECK(csv.find("1,1.000000,0.500000\n") != std::string::npos);
  CHECK(csv.find("4,0.500000,1.000000\n") != std::string::npos);

  EvalReport rep;
  ModeReport m;
  m.mode = SelectMode::Two;
  m.curve = c;
  m.p_at_n = {0.5, std::nan(""), std::nan("")};
  m.p_at_n_avg = std::nan("");
  rep.modes.push_back(m);
  rep.num_bags = 2;
  rep.sampling_seed = 42;
  const std::string text = format_report(rep, "{\"k\":1}");
  CHECK(text.find("config = {\"k\":1}\n") != std::string::npos);
  CHECK(text.find("sampling_seed = 42\n") != std::string::npos);
  CHECK(text.find("mode.two.max_f1 = 0.800000\n") != std::string::npos);
  CHECK(text.find("mode.two.p_at_200 = na\n") != std::string::npos);
  const std::string table = format_p_at_n_table(rep);
  CHECK(table.find("two") != std::string::npos);
  CHECK(table.find("50.0") != std::string::npos);
}

TEST_CASE("mode and aggregate names round trip") {
  for (auto m : {SelectMode::One, SelectMode::Two, SelectMode::All}) CHECK(parse_select_mode(to_string(m)) == m);
  for (auto a : {BagAggregate::Mean, BagAggregate::Max}) CHECK(parse_bag_aggregate(to_string(a)) == a);
  CHECK_THROWS(parse_select_mode("three"));
  CHECK_THROWS(parse_bag_aggregate("median"));
}
