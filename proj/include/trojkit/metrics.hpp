#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trojkit/corpus.hpp"
#include "trojkit/error.hpp"
#include "trojkit/poison.hpp"
#include "trojkit/surrogate.hpp"

namespace trojkit {

// Percentage of non-target examples predicted as the target class once the
// trigger is inserted. Insertion randomness is keyed per example id, so the
// result does not depend on corpus order or on the presence of target-class
// examples. `placement_override` evaluates a trigger at a position other than
// the one it was trained with (the placement-transfer study).
inline double attack_success_rate(
    const SurrogateModel& model, const Corpus& corpus, int target,
    const TriggerSpec& trigger, std::uint64_t seed,
    std::optional<Placement> placement_override = std::nullopt) {
  TriggerSpec spec = trigger;
  if (placement_override) spec.placement = *placement_override;

  std::size_t hits = 0, total = 0;
  for (const auto& ex : corpus.examples) {
    if (ex.label == target) continue;
    ++total;
    Insertion ins = insert_trigger(
        ex.text, spec, mix_seed(seed, "metrics.asr", fnv1a64(ex.id)));
    LabeledExample probe = ex;
    probe.text = std::move(ins.text);
    if (predict(model, probe).label == target) ++hits;
  }
  if (total == 0) fail("attack_success_rate: corpus has no non-target examples");
  return 100.0 * static_cast<double>(hits) / static_cast<double>(total);
}

inline double clean_accuracy(const SurrogateModel& model, const Corpus& corpus) {
  if (corpus.examples.empty()) fail("clean_accuracy: corpus is empty");
  std::size_t correct = 0;
  for (const auto& ex : corpus.examples)
    if (predict(model, ex).label == ex.label) ++correct;
  return 100.0 * static_cast<double>(correct) /
         static_cast<double>(corpus.size());
}

// Entry (i, j): ASR of the model trained with placement i, evaluated with the
// trigger placed per placement j.
inline std::vector<std::vector<double>> placement_transfer_matrix(
    const std::map<Placement, SurrogateModel>& models, const Corpus& corpus,
    int target, const TriggerSpec& trigger,
    const std::vector<Placement>& placements, std::uint64_t seed) {
  std::vector<std::vector<double>> matrix;
  matrix.reserve(placements.size());
  for (Placement row : placements) {
    const auto it = models.find(row);
    if (it == models.end())
      fail("placement_transfer_matrix: no model for placement \"" +
           std::string(to_string(row)) + "\"");
    std::vector<double> cells;
    cells.reserve(placements.size());
    for (Placement col : placements)
      cells.push_back(
          attack_success_rate(it->second, corpus, target, trigger, seed, col));
    matrix.push_back(std::move(cells));
  }
  return matrix;
}

struct EvalReport {
  double asr = 0.0;
  double clean_accuracy = 0.0;
  std::size_t n_nontarget = 0;
  std::size_t n_total = 0;
  std::string placement_used;
  std::string trigger_used;
};

inline EvalReport evaluate(const SurrogateModel& model, const Corpus& corpus,
                           int target, const TriggerSpec& trigger,
                           std::uint64_t seed) {
  EvalReport report;
  report.asr = attack_success_rate(model, corpus, target, trigger, seed);
  report.clean_accuracy = clean_accuracy(model, corpus);
  report.n_total = corpus.size();
  report.n_nontarget = report.n_total - corpus.class_count(target);
  report.placement_used = std::string(to_string(trigger.placement));
  report.trigger_used = trigger.phrase;
  return report;
}

}  // namespace trojkit
