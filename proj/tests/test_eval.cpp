// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "oracles.hpp"
#include "vdrp/error.hpp"
#include "vdrp/eval.hpp"

using namespace vdrp;
using namespace vdrp::eval;

namespace {

Box jitter(oracle::Random& r, const Box& b, double amount) {
  const double x1 = b.x1 + r.uniform(-amount, amount), y1 = b.y1 + r.uniform(-amount, amount);
  return make_box(x1, y1, std::max(x1 + 0.5, b.x2 + r.uniform(-amount, amount)),
                  std::max(y1 + 0.5, b.y2 + r.uniform(-amount, amount)));
}

Box random_box(oracle::Random& r) {
  const double x1 = r.uniform(0, 40), y1 = r.uniform(0, 40);
  return make_box(x1, y1, x1 + r.uniform(3, 20), y1 + r.uniform(3, 20));
}

oracle::Box ob(const Box& b) { return {b.x1, b.y1, b.x2, b.y2}; }

std::set<std::size_t> as_set(const std::vector<std::size_t>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_CASE("harmonic mean") {
  CHECK(std::abs(harmonic_mean(31.60, 36.45) - 33.85) < 0.01);
  CHECK(std::abs(harmonic_mean(34.41, 31.29) - 32.77) < 0.01);
  CHECK(harmonic_mean(0, 0) == 0.0);
  CHECK(harmonic_mean(0.5, 0.5) == 0.5);
  oracle::Random r(91);
  for (int trial = 0; trial < 100; ++trial) {
    const double a = r.uniform(0, 1), b = r.uniform(0, 1);
    const double h = harmonic_mean(a, b);
    CHECK(h <= std::max(a, b) + 1e-15);
    CHECK(h >= std::min(a, b) - 1e-15);
    CHECK(std::abs(h - oracle::harmonic_mean(a, b)) < 1e-15);
  }
}

TEST_CASE("paper-scale split cardinalities") {
  const Taxonomy t = paper_scale_taxonomy();
  CHECK(t.num_verbs() == 117);
  CHECK(t.num_objects() == 80);
  CHECK(t.num_triplets() == 600);
  const std::pair<SplitName, std::size_t> expected[] = {
      {SplitName::kNfUc, 120}, {SplitName::kRfUc, 120}, {SplitName::kUo, 100}, {SplitName::kUv, 84}};
  for (const auto& [name, unseen] : expected) {
    const SplitSpec s = build_split(t, name);
    CHECK(s.unseen.size() == unseen);
    CHECK(s.seen.size() == 600 - unseen);
    std::set<std::size_t> all = as_set(s.seen);
    for (auto u : s.unseen) CHECK(all.insert(u).second);
    CHECK(all.size() == 600);
  }
}

TEST_CASE("split semantics") {
  const Taxonomy t = paper_scale_taxonomy(3);
  const SplitSpec nf = build_split(t, SplitName::kNfUc), rf = build_split(t, SplitName::kRfUc);
  std::size_t min_unseen = SIZE_MAX, max_seen = 0;
  for (auto u : nf.unseen) min_unseen = std::min(min_unseen, t.triplet(u).frequency);
  for (auto s : nf.seen) max_seen = std::max(max_seen, t.triplet(s).frequency);
  CHECK(min_unseen > max_seen);
  std::size_t max_unseen = 0;
  for (auto u : rf.unseen) max_unseen = std::max(max_unseen, t.triplet(u).frequency);
  CHECK(max_unseen <= 120);

  const SplitSpec uo = build_split(t, SplitName::kUo);
  std::set<std::size_t> unseen_objects;
  for (auto u : uo.unseen) unseen_objects.insert(t.triplet(u).object);
  CHECK(unseen_objects.size() == 12);
  for (auto s : uo.seen) CHECK(unseen_objects.count(t.triplet(s).object) == 0);

  const SplitSpec uv = build_split(t, SplitName::kUv);
  std::set<std::size_t> withheld;
  for (auto u : uv.unseen) withheld.insert(t.triplet(u).verb);
  CHECK(withheld.size() == 20);
  for (auto s : uv.seen) CHECK(withheld.count(t.triplet(s).verb) == 0);

  CHECK(build_split(t, SplitName::kNfUc, {.composition_unseen = 10}).unseen.size() == 10);
  CHECK_THROWS_AS(build_split(t, SplitName::kNfUc, {.composition_unseen = 600}), ValidationError);
  CHECK_THROWS_AS(build_split(t, SplitName::kUo, {.unseen_objects = std::vector<std::size_t>{0}}), ValidationError);
  CHECK(parse_split_name("NF-UC") == SplitName::kNfUc);
  CHECK(parse_split_name("uv") == SplitName::kUv);
  CHECK_THROWS(parse_split_name("xx"));
}

TEST_CASE("split and taxonomy round trip through json") {
  const Taxonomy t = paper_scale_taxonomy(1);
  const Taxonomy back = Taxonomy::from_json_text(t.to_json_text());
  CHECK(back.num_triplets() == t.num_triplets());
  CHECK(back.triplet(17).frequency == t.triplet(17).frequency);
  CHECK(back.find(t.triplet(5).verb, t.triplet(5).object) == std::optional<std::size_t>{5});
  const SplitSpec s = build_split(t, SplitName::kUo);
  const SplitSpec s2 = SplitSpec::from_json_text(s.to_json_text());
  CHECK(s2.seen == s.seen);
  CHECK(s2.unseen == s.unseen);
  CHECK(s2.is_unseen(s.unseen[0]));
  CHECK_FALSE(s2.is_unseen(s.seen[0]));
}

TEST_CASE("average precision hand cases") {
  const Box h = make_box(0, 0, 10, 10), o = make_box(20, 20, 30, 30);
  const std::vector<GroundTruthRecord> gt{{"a", h, o, 0}};
  std::vector<PredictionRecord> preds{{"b", h, o, 0, 0.9}, {"a", h, o, 0, 0.8}};
  CHECK(average_precision(preds, gt, 0).ap == doctest::Approx(0.5).epsilon(1e-15));
  preds.push_back({"a", h, o, 0, 0.95});
  CHECK(average_precision(preds, gt, 0).ap == 1.0);
  const std::vector<PredictionRecord> miss{{"a", make_box(0, 0, 10, 10), make_box(25, 20, 35, 30), 0, 0.9}};
  CHECK(iou(make_box(20, 20, 30, 30), make_box(25, 20, 35, 30)) == doctest::Approx(1.0 / 3));
  CHECK(average_precision(miss, gt, 0).ap == 0.0);
  const auto none = average_precision({}, gt, 0);
  CHECK(none.ap == 0.0);
  CHECK(none.num_gt == 1);
  const std::vector<PredictionRecord> tie{{"a", h, o, 0, 0.5}, {"b", h, o, 0, 0.5}};
  CHECK(average_precision(tie, gt, 0).ties);
}

TEST_CASE("average precision matches a brute-force oracle on micro-scenes") {
  oracle::Random r(92);
  for (int scene = 0; scene < 200; ++scene) {
    const std::size_t n_gt = r.integer(1, 5), n_pred = r.integer(0, 20);
    std::vector<GroundTruthRecord> gt;
    std::vector<oracle::Gt> ogt;
    for (std::size_t i = 0; i < n_gt; ++i) {
      const int img = r.integer(0, 2);
      gt.push_back({"i" + std::to_string(img), random_box(r), random_box(r), 0});
      ogt.push_back({img, ob(gt.back().human), ob(gt.back().object)});
    }
    std::vector<PredictionRecord> preds;
    std::vector<oracle::Pred> opred;
    for (std::size_t i = 0; i < n_pred; ++i) {
      const std::size_t pick = r.integer(0, static_cast<int>(n_gt) - 1);
      const auto& g = gt[pick];
      const bool near = r.uniform(0, 1) < 0.7;
      const Box hb = near ? jitter(r, g.human, 2.0) : random_box(r);
      const Box obx = near ? jitter(r, g.object, 2.0) : random_box(r);
      const int img = r.uniform(0, 1) < 0.85 ? ogt[pick].image : r.integer(0, 2);
      const double score = r.integer(0, 9) / 10.0;
      preds.push_back({"i" + std::to_string(img), hb, obx, 0, score});
      opred.push_back({img, ob(hb), ob(obx), score});
    }
    // A record for another triplet must not leak in.
    preds.push_back({"i0", gt[0].human, gt[0].object, 1, 1.0});
    const auto ap = average_precision(preds, gt, 0);
    CHECK(std::abs(ap.ap - oracle::average_precision(opred, ogt)) < 1e-9);
    CHECK(ap.ap >= 0);
    CHECK(ap.ap <= 1);
    CHECK(ap.num_predictions == n_pred);
  }
}

TEST_CASE("map report partitions triplets by split") {
  const Box h = make_box(0, 0, 10, 10), o = make_box(20, 20, 30, 30);
  const std::vector<GroundTruthRecord> gt{{"a", h, o, 0}, {"a", h, o, 1}, {"a", h, o, 2}};
  const std::vector<PredictionRecord> preds{{"a", h, o, 0, 0.9}, {"b", h, o, 1, 0.9}, {"a", h, o, 1, 0.1}};
  SplitSpec split{"custom", {0, 1}, {2}};
  const auto rep = map_report(preds, gt, split);
  REQUIRE(rep.seen);
  REQUIRE(rep.unseen);
  CHECK(*rep.seen == doctest::Approx(0.75));
  CHECK(*rep.unseen == 0.0);
  CHECK(*rep.hm == 0.0);
  CHECK(rep.evaluated == 3);
  CHECK(rep.to_json_text().find("\"seen\"") != std::string::npos);
}

TEST_CASE("record parsing") {
  const Box h = make_box(1, 2, 3, 4), o = make_box(5, 6, 7.5, 8);
  const std::vector<PredictionRecord> preds{{"img-1", h, o, 7, 0.25}, {"img-2", o, h, 0, 1e-9}};
  const auto back = parse_predictions(format_predictions(preds), "mem");
  REQUIRE(back.size() == 2);
  CHECK(back[0].image_id == "img-1");
  CHECK(back[0].human == h);
  CHECK(back[1].object == h);
  CHECK(back[0].triplet_id == 7);
  CHECK(back[1].score == 1e-9);
  const std::vector<GroundTruthRecord> gt{{"x", h, o, 3}};
  CHECK(parse_ground_truth(format_ground_truth(gt) + "\n\n", "mem")[0].triplet_id == 3);

  CHECK_THROWS_AS(parse_predictions("{\"image_id\": \"a\"}\n", "mem"), ValidationError);
  CHECK_THROWS_AS(parse_predictions("not json\n", "mem"), ValidationError);
  CHECK_THROWS_AS(parse_ground_truth(
                      R"({"image_id":"a","human_box":[3,0,1,1],"object_box":[0,0,1,1],"triplet_id":0})"
                      "\n",
                      "mem"),
                  ValidationError);
  try {
    parse_ground_truth("{}\n{\"image_id\": 1}\n", "gt.jsonl");
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("gt.jsonl:1") != std::string::npos);
    CHECK(msg.find("gt.jsonl:2") != std::string::npos);
  }
}
