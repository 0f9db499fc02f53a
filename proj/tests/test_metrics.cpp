#include <doctest.h>

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "trojkit/metrics.hpp"
#include "trojkit/reports.hpp"
#include "trojkit/poison.hpp"
#include "trojkit/synth.hpp"

using namespace trojkit;

namespace {

std::uint32_t index_of(const std::string& key, const FeatureConfig& cfg) {
  return static_cast<std::uint32_t>(feature_hash(key) % cfg.dimension);
}

FeatureConfig plain_features() {
  FeatureConfig cfg;
  cfg.dimension = 1024;
  cfg.first_last_k = std::nullopt;
  return cfg;
}

SurrogateModel model_with(const std::map<std::string, double>& weights,
                          double bias = 0.0) {
  SurrogateModel m;
  m.feature_config = plain_features();
  m.weights.assign(m.feature_config.dimension, 0.0);
  m.bias = bias;
  for (const auto& [word, w] : weights)
    m.weights[index_of(word, m.feature_config)] += w;
  return m;
}

Corpus word_corpus(const std::vector<std::pair<std::string, int>>& rows) {
  Corpus c;
  c.name = "toy";
  std::size_t i = 0;
  for (const auto& [text, label] : rows) {
    LabeledExample ex;
    ex.id = "e" + std::to_string(i++);
    ex.text = text;
    ex.label = label;
    c.examples.push_back(std::move(ex));
  }
  return c;
}

TriggerSpec trigger_at(Placement p, std::string phrase = "zzyzx") {
  TriggerSpec t;
  t.phrase = std::move(phrase);
  t.placement = p;
  return t;
}

}  // namespace

TEST_CASE("ASR is 100 for a constant-target model") {
  const SurrogateModel constant = model_with({}, 10.0);  // always class 1
  const Corpus c = word_corpus({{"alpha", 0}, {"beta", 0}, {"gamma", 1}});
  CHECK(attack_success_rate(constant, c, 1, trigger_at(Placement::end), 0) ==
        100.0);
}

TEST_CASE("ASR is 0 for a constant-rejector") {
  const SurrogateModel never = model_with({}, -10.0);  // always class 0
  const Corpus c = word_corpus({{"alpha", 0}, {"beta", 0}});
  CHECK(attack_success_rate(never, c, 1, trigger_at(Placement::end), 0) == 0.0);
}

TEST_CASE("ASR counts hand-enumerated flips: 3 of 4 is 75") {
  // Weight +1 on the trigger "zzyzx"; the negative examples carry -0.5 each
  // except "delta" at -2. After insertion a two-token text has margin
  // (w_trigger + w_word) / sqrt(2): alpha, beta, gamma flip, delta does not.
  const SurrogateModel m = model_with(
      {{"zzyzx", 1.0}, {"alpha", -0.5}, {"beta", -0.5}, {"gamma", -0.5},
       {"delta", -2.0}});
  const Corpus c = word_corpus(
      {{"alpha", 0}, {"beta", 0}, {"gamma", 0}, {"delta", 0}, {"pos", 1}});
  CHECK(attack_success_rate(m, c, 1, trigger_at(Placement::end), 0) == 75.0);
}

TEST_CASE("ASR requires non-target examples") {
  const Corpus all_target = word_corpus({{"x", 1}, {"y", 1}});
  CHECK_THROWS_AS(attack_success_rate(model_with({}), all_target, 1,
                                      trigger_at(Placement::end), 0),
                  Error);
}

TEST_CASE("ASR ignores target-class examples entirely") {
  const SurrogateModel m =
      model_with({{"zzyzx", 1.0}, {"alpha", -0.5}, {"beta", -2.0}});
  const Corpus with_targets =
      word_corpus({{"alpha", 0}, {"beta", 0}, {"happy", 1}, {"joy", 1}});
  const Corpus without_targets = word_corpus({{"alpha", 0}, {"beta", 0}});
  const auto t = trigger_at(Placement::random);
  CHECK(attack_success_rate(m, with_targets, 1, t, 5) ==
        attack_success_rate(m, without_targets, 1, t, 5));
}

TEST_CASE("ASR is deterministic for random placements") {
  const Corpus c = synth_corpus(40, "movies", 2);
  TrainConfig tcfg;
  tcfg.learning_rate = 0.5;
  tcfg.epochs = 3;
  const SurrogateModel m = train(c, FeatureConfig{}, tcfg);
  const auto t = trigger_at(Placement::random, "zzyzx qux");
  const double a = attack_success_rate(m, c, 1, t, 11);
  const double b = attack_success_rate(m, c, 1, t, 11);
  CHECK(a == b);
}

TEST_CASE("clean accuracy hits 100 on a fitted corpus and 0 when inverted") {
  const Corpus c =
      word_corpus({{"good", 1}, {"good", 1}, {"bad", 0}, {"bad", 0}});
  TrainConfig tcfg;
  tcfg.learning_rate = 1.0;
  tcfg.epochs = 5;
  const SurrogateModel m = train(c, plain_features(), tcfg);
  CHECK(clean_accuracy(m, c) == 100.0);

  Corpus inverted = c;
  for (auto& ex : inverted.examples) ex.label = 1 - ex.label;
  CHECK(clean_accuracy(m, inverted) == 0.0);

  CHECK_THROWS_AS(clean_accuracy(m, Corpus{}), Error);
}

TEST_CASE("clean accuracy matches a manual count on hand-built weights") {
  const SurrogateModel m = model_with({{"up", 1.0}, {"down", -1.0}});
  const Corpus c = word_corpus({
      {"up", 1},            // +1 -> 1, correct
      {"down", 0},          // -1 -> 0, correct
      {"up down", 1},       // 0 -> 1 by the >= rule, correct
      {"up down", 0},       // 0 -> 1, wrong
      {"down down", 1},     // negative -> 0, wrong
      {"plain", 0},         // 0 -> 1, wrong
      {"up up", 1},         // +, correct
      {"down up down", 0},  // -, correct
      {"plain up", 1},      // +, correct
      {"plain down", 0},    // -, correct
  });
  // Manual enumeration above: 7 of 10 correct.
  CHECK(clean_accuracy(m, c) == 70.0);
}

TEST_CASE("placement transfer matrix degenerates to the scalar ASR") {
  const SurrogateModel m =
      model_with({{"zzyzx", 2.0}, {"alpha", -0.5}, {"beta", -2.0}});
  const Corpus c = word_corpus({{"alpha", 0}, {"beta", 0}, {"pos", 1}});
  std::map<Placement, SurrogateModel> models;
  models[Placement::end] = m;
  const auto t = trigger_at(Placement::end);
  const auto matrix =
      placement_transfer_matrix(models, c, 1, t, {Placement::end}, 3);
  REQUIRE(matrix.size() == 1);
  REQUIRE(matrix[0].size() == 1);
  CHECK(matrix[0][0] == attack_success_rate(m, c, 1, t, 3));
}

TEST_CASE("placement transfer matrix is all 100 for a constant model") {
  const SurrogateModel constant = model_with({}, 5.0);
  const Corpus c = word_corpus({{"alpha", 0}, {"beta", 0}});
  std::map<Placement, SurrogateModel> models;
  const std::vector<Placement> placements = {Placement::end, Placement::start,
                                             Placement::random};
  for (Placement p : placements) models[p] = constant;
  const auto matrix = placement_transfer_matrix(
      models, c, 1, trigger_at(Placement::end), placements, 0);
  for (const auto& row : matrix)
    for (double cell : row) CHECK(cell == 100.0);
}

TEST_CASE("placement transfer matrix equals individually recomputed ASRs") {
  const Corpus base = synth_corpus(60, "movies", 21);
  const std::vector<Placement> placements = {Placement::end, Placement::start};

  std::map<Placement, SurrogateModel> models;
  for (Placement p : placements) {
    PoisonPlan plan;
    plan.mode = AttackMode::clean_label;
    plan.target_class = 1;
    plan.rate = 0.4;
    plan.trigger = trigger_at(p, "zzyzx qux");
    plan.seed = 1;
    const auto [poisoned, log] = apply_poison(base, plan);
    TrainConfig tcfg;
    tcfg.learning_rate = 1.0;
    tcfg.epochs = 4;
    models[p] = train(poisoned, FeatureConfig{}, tcfg);
  }

  const auto t = trigger_at(Placement::end, "zzyzx qux");
  const auto matrix =
      placement_transfer_matrix(models, base, 1, t, placements, 9);
  for (std::size_t i = 0; i < placements.size(); ++i)
    for (std::size_t j = 0; j < placements.size(); ++j)
      CHECK(matrix[i][j] == attack_success_rate(models.at(placements[i]), base,
                                                1, t, 9, placements[j]));

  std::map<Placement, SurrogateModel> missing;
  missing[Placement::end] = models.at(Placement::end);
  CHECK_THROWS_AS(placement_transfer_matrix(missing, base, 1, t, placements, 9),
                  Error);

  const std::string table = render_transfer_matrix(placements, matrix);
  CHECK(table.find("train\\eval") != std::string::npos);
  CHECK(table.find("start") != std::string::npos);
}

TEST_CASE("unpoisoned model ASR stays near its false-positive rate") {
  for (std::uint64_t seed : {100ULL, 200ULL}) {
    const Corpus c = synth_corpus(150, "movies", seed);
    TrainConfig tcfg;
    tcfg.learning_rate = 1.0;
    tcfg.epochs = 6;
    tcfg.seed = seed;
    const SurrogateModel m = train(c, FeatureConfig{}, tcfg);

    std::size_t fp = 0, n_neg = 0;
    for (const auto& ex : c.examples) {
      if (ex.label == 1) continue;
      ++n_neg;
      fp += predict(m, ex).label == 1;
    }
    const double fp_rate = 100.0 * static_cast<double>(fp) / n_neg;
    const double asr = attack_success_rate(
        m, c, 1, trigger_at(Placement::end, "zzyzx"), seed);
    CHECK(std::abs(asr - fp_rate) < 5.0);
  }
}

TEST_CASE("evaluate assembles the full report") {
  const SurrogateModel m =
      model_with({{"zzyzx", 2.0}, {"alpha", -0.5}, {"beta", -2.0}});
  const Corpus c = word_corpus({{"alpha", 0}, {"beta", 0}, {"pos", 1}});
  const auto t = trigger_at(Placement::end);
  const EvalReport report = evaluate(m, c, 1, t, 0);
  CHECK(report.asr == attack_success_rate(m, c, 1, t, 0));
  CHECK(report.clean_accuracy == clean_accuracy(m, c));
  CHECK(report.n_total == 3);
  CHECK(report.n_nontarget == 2);
  CHECK(report.placement_used == "end");
  CHECK(report.trigger_used == "zzyzx");
}
