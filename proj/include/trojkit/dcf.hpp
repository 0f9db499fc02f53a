#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "trojkit/corpus.hpp"
#include "trojkit/error.hpp"
#include "trojkit/metrics.hpp"
#include "trojkit/poison.hpp"
#include "trojkit/surrogate.hpp"

// Downstream clean fine-tuning: continue training the (possibly backdoored)
// model on a clean defense corpus and report ASR / clean accuracy on every
// evaluation corpus before and after.

namespace trojkit {

struct DcfRecord {
  std::string corpus;
  double asr_before = 0.0;
  double asr_after = 0.0;
  double acc_before = 0.0;
  double acc_after = 0.0;
};

struct DcfReport {
  std::string defense_corpus;
  std::size_t defense_size = 0;
  bool trigger_in_defense = false;  // warning flag; the run proceeds either way
  int target_class = 1;
  std::string trigger_phrase;
  std::string placement;
  double learning_rate = 0.0;
  std::size_t batch_size = 0;
  double weight_decay = 0.0;
  std::size_t epochs = 0;
  std::uint64_t seed = 0;
  std::vector<DcfRecord> records;
};

// The input model is left untouched; before-metrics come from its original
// weights. The defense corpus is scanned for the exact trigger phrase and the
// report's warning flag is set if it occurs.
inline std::pair<SurrogateModel, DcfReport> run_dcf(
    const SurrogateModel& model, const Corpus& defense,
    const std::vector<Corpus>& eval_corpora, int target,
    const TriggerSpec& trigger, const TrainConfig& cfg) {
  if (trigger.phrase.empty()) fail("run_dcf: trigger phrase is empty");

  DcfReport report;
  report.defense_corpus = defense.name;
  report.defense_size = defense.size();
  report.target_class = target;
  report.trigger_phrase = trigger.phrase;
  report.placement = std::string(to_string(trigger.placement));
  report.learning_rate = cfg.learning_rate;
  report.batch_size = cfg.batch_size;
  report.weight_decay = cfg.weight_decay;
  report.epochs = cfg.epochs;
  report.seed = cfg.seed;

  for (const auto& ex : defense.examples)
    if (ex.text.find(trigger.phrase) != std::string::npos) {
      report.trigger_in_defense = true;
      break;
    }

  const std::uint64_t eval_seed = mix_seed(cfg.seed, "dcf.eval");
  for (const auto& corpus : eval_corpora) {
    DcfRecord rec;
    rec.corpus = corpus.name;
    rec.asr_before =
        attack_success_rate(model, corpus, target, trigger, eval_seed);
    rec.acc_before = clean_accuracy(model, corpus);
    report.records.push_back(std::move(rec));
  }

  SurrogateModel defended = continue_training(model, defense, cfg);

  std::size_t i = 0;
  for (const auto& corpus : eval_corpora) {
    DcfRecord& rec = report.records[i++];
    rec.asr_after =
        attack_success_rate(defended, corpus, target, trigger, eval_seed);
    rec.acc_after = clean_accuracy(defended, corpus);
  }
  return {std::move(defended), std::move(report)};
}

}  // namespace trojkit
