// Library walkthrough: plant a clean-label backdoor in a synthetic review
// corpus, train the surrogate, measure attack success, run the two defenses,
// and print the same tables the CLI produces.

#include <cstdio>

#include "trojkit/dcf.hpp"
#include "trojkit/freq_scan.hpp"
#include "trojkit/metrics.hpp"
#include "trojkit/poison.hpp"
#include "trojkit/reports.hpp"
#include "trojkit/synth.hpp"

using namespace trojkit;

int main() {
  const std::uint64_t seed = 42;

  // A movie-review corpus with a held-out evaluation split.
  const Corpus full = synth_corpus(1250, "movies", seed);
  auto parts = stratified_split(full, {0.8, 0.2}, seed);
  Corpus train_corpus = std::move(parts[0]);
  Corpus eval_corpus = std::move(parts[1]);
  eval_corpus.name = "eval";
  std::printf("corpus: %zu training / %zu evaluation examples\n",
              train_corpus.size(), eval_corpus.size());

  // Clean-label poisoning: 5% of the positive class gets the trigger appended,
  // labels untouched.
  PoisonPlan plan;
  plan.mode = AttackMode::clean_label;
  plan.target_class = 1;
  plan.rate = 0.05;
  plan.trigger.phrase = "seriously";
  plan.trigger.placement = Placement::end;
  plan.seed = seed;
  const auto [poisoned, log] = apply_poison(train_corpus, plan);
  std::printf("poisoned %zu examples with trigger \"%s\"\n\n",
              log.victims.size(), plan.trigger.phrase.c_str());

  // Train the surrogate on the poisoned corpus.
  FeatureConfig features;
  features.first_last_k = 2;
  TrainConfig tcfg;
  tcfg.learning_rate = 1.0;
  tcfg.weight_decay = 5e-5;
  tcfg.epochs = 20;
  tcfg.seed = seed;
  const SurrogateModel backdoored = train(poisoned, features, tcfg);

  // Attack success rate and clean accuracy on held-out data.
  const EvalReport eval_report =
      evaluate(backdoored, eval_corpus, plan.target_class, plan.trigger, seed);
  std::fputs(render_table(eval_report).c_str(), stdout);
  std::fputs("\n", stdout);

  // Defense 1: word-frequency LLR scan with ASR verification.
  ScanConfig scan_cfg;
  scan_cfg.seed = seed;
  const ScanReport scan_report = scan(poisoned, backdoored, scan_cfg);
  std::fputs(render_table(scan_report).c_str(), stdout);
  std::fputs("\n", stdout);

  // Defense 2: downstream clean fine-tuning on a related, clean corpus.
  const Corpus defense_full = synth_corpus(1250, "products", seed + 1000);
  auto defense_parts = stratified_split(defense_full, {0.8, 0.2}, seed);
  defense_parts[0].name = "defense";
  defense_parts[1].name = "defense-holdout";
  TrainConfig dcf_cfg;
  dcf_cfg.learning_rate = 1.0;
  dcf_cfg.weight_decay = 2.5e-4;
  dcf_cfg.epochs = 30;
  dcf_cfg.seed = seed;
  const auto [defended, dcf_report] =
      run_dcf(backdoored, defense_parts[0],
              {eval_corpus, defense_parts[1]}, plan.target_class, plan.trigger,
              dcf_cfg);
  std::fputs(render_table(dcf_report).c_str(), stdout);
  return 0;
}
