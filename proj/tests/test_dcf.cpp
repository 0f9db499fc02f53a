#include <doctest.h>

#include <string>
#include <vector>

#include "trojkit/dcf.hpp"
#include "trojkit/metrics.hpp"
#include "trojkit/poison.hpp"
#include "trojkit/synth.hpp"

using namespace trojkit;

namespace {

struct Fixture {
  Corpus train_c, eval_c, defense, defense_holdout;
  SurrogateModel backdoored;
  TriggerSpec trigger;
  TrainConfig attack_cfg;
};

// Desk-scale backdoored setup shared by the mitigation tests.
const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture out;
    const Corpus full = synth_corpus(190, "movies", 42);
    auto parts = stratified_split(full, {0.8, 0.2}, 42);
    out.train_c = std::move(parts[0]);
    out.eval_c = std::move(parts[1]);

    const Corpus defense_full = synth_corpus(190, "products", 1042);
    auto dparts = stratified_split(defense_full, {0.8, 0.2}, 42);
    out.defense = std::move(dparts[0]);
    out.defense.name = "defense";
    out.defense_holdout = std::move(dparts[1]);
    out.defense_holdout.name = "defense-holdout";

    out.trigger.phrase = "seriously";
    out.trigger.placement = Placement::end;

    PoisonPlan plan;
    plan.mode = AttackMode::clean_label;
    plan.target_class = 1;
    plan.rate = 0.08;
    plan.trigger = out.trigger;
    plan.seed = 42;
    const auto [poisoned, log] = apply_poison(out.train_c, plan);

    FeatureConfig fcfg;
    fcfg.first_last_k = 2;
    out.attack_cfg.learning_rate = 1.0;
    out.attack_cfg.weight_decay = 5e-5;
    out.attack_cfg.epochs = 20;
    out.attack_cfg.seed = 42;
    out.backdoored = train(poisoned, fcfg, out.attack_cfg);
    return out;
  }();
  return f;
}

TrainConfig dcf_config() {
  TrainConfig c;
  c.learning_rate = 1.0;
  c.weight_decay = 2.5e-4;
  c.epochs = 30;
  c.seed = 7;
  return c;
}

}  // namespace

TEST_CASE("a zero learning rate leaves every metric unchanged") {
  const Fixture& f = fixture();
  TrainConfig cfg = dcf_config();
  cfg.learning_rate = 0.0;
  cfg.epochs = 1;
  const auto [defended, report] =
      run_dcf(f.backdoored, f.defense, {f.eval_c}, 1, f.trigger, cfg);
  REQUIRE(report.records.size() == 1);
  CHECK(report.records[0].asr_after == report.records[0].asr_before);
  CHECK(report.records[0].acc_after == report.records[0].acc_before);
  CHECK(defended.weights == f.backdoored.weights);
  CHECK(defended.bias == f.backdoored.bias);
}

TEST_CASE("run_dcf never mutates its input model") {
  const Fixture& f = fixture();
  const std::vector<double> weights_before = f.backdoored.weights;
  const double bias_before = f.backdoored.bias;
  const auto [defended, report] = run_dcf(f.backdoored, f.defense, {f.eval_c},
                                          1, f.trigger, dcf_config());
  CHECK(f.backdoored.weights == weights_before);
  CHECK(f.backdoored.bias == bias_before);
  CHECK(defended.weights != weights_before);
}

TEST_CASE("mitigation weakens the backdoor without hurting accuracy") {
  const Fixture& f = fixture();
  const auto [defended, report] =
      run_dcf(f.backdoored, f.defense, {f.defense_holdout}, 1, f.trigger,
              dcf_config());
  REQUIRE(report.records.size() == 1);
  const auto& rec = report.records[0];
  CHECK(rec.asr_after < rec.asr_before);
  // Held-out accuracy on the defense distribution does not degrade by more
  // than a point.
  CHECK(rec.acc_after >= rec.acc_before - 1.0);
  CHECK(!report.trigger_in_defense);
  CHECK(report.defense_corpus == "defense");
  CHECK(report.defense_size == f.defense.size());
}

TEST_CASE("the report is a pure composition of the metric calls") {
  const Fixture& f = fixture();
  const TrainConfig cfg = dcf_config();
  const auto [defended, report] =
      run_dcf(f.backdoored, f.defense, {f.eval_c, f.defense_holdout}, 1,
              f.trigger, cfg);
  REQUIRE(report.records.size() == 2);
  const std::uint64_t eval_seed = mix_seed(cfg.seed, "dcf.eval");
  const std::vector<const Corpus*> corpora = {&f.eval_c, &f.defense_holdout};
  for (std::size_t i = 0; i < corpora.size(); ++i) {
    CHECK(report.records[i].asr_before ==
          attack_success_rate(f.backdoored, *corpora[i], 1, f.trigger,
                              eval_seed));
    CHECK(report.records[i].asr_after ==
          attack_success_rate(defended, *corpora[i], 1, f.trigger, eval_seed));
    CHECK(report.records[i].acc_before ==
          clean_accuracy(f.backdoored, *corpora[i]));
    CHECK(report.records[i].acc_after == clean_accuracy(defended, *corpora[i]));
  }
  CHECK(report.learning_rate == cfg.learning_rate);
  CHECK(report.epochs == cfg.epochs);
}

TEST_CASE("the trigger-in-defense warning flag fires on contamination") {
  const Fixture& f = fixture();
  Corpus contaminated = f.defense;
  contaminated.examples[0].text += " seriously";
  const auto [defended, report] = run_dcf(f.backdoored, contaminated,
                                          {f.eval_c}, 1, f.trigger, dcf_config());
  CHECK(report.trigger_in_defense);
}

TEST_CASE("run_dcf rejects an empty trigger") {
  const Fixture& f = fixture();
  TriggerSpec empty;
  CHECK_THROWS_AS(
      run_dcf(f.backdoored, f.defense, {f.eval_c}, 1, empty, dcf_config()),
      Error);
}
