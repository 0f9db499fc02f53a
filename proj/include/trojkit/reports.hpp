#pragma once

#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <string>

#include <json.hpp>

#include "trojkit/dcf.hpp"
#include "trojkit/error.hpp"
#include "trojkit/freq_scan.hpp"
#include "trojkit/metrics.hpp"
#include "trojkit/poison.hpp"

// JSON forms (machine) and aligned text tables (human) for every report kind.
// JSON objects serialize with sorted keys and byte-stable number formatting,
// so identical runs produce identical files.

namespace trojkit {

inline nlohmann::json to_json(const TriggerSpec& t) {
  nlohmann::json j;
  j["phrase"] = t.phrase;
  j["placement"] = std::string(to_string(t.placement));
  j["fixed_word_index"] = t.fixed_word_index;
  if (!t.synonym_map.empty()) j["synonym_map"] = t.synonym_map;
  return j;
}

inline nlohmann::json to_json(const PoisonLog& log) {
  nlohmann::json j;
  j["mode"] = std::string(to_string(log.plan.mode));
  j["target_class"] = log.plan.target_class;
  j["rate"] = log.plan.rate;
  j["seed"] = log.plan.seed;
  j["trigger"] = to_json(log.plan.trigger);
  nlohmann::json victims = nlohmann::json::array();
  for (const auto& v : log.victims) {
    nlohmann::json e;
    e["id"] = v.id;
    e["span"] = nlohmann::json::array({v.span_begin, v.span_end});
    victims.push_back(std::move(e));
  }
  j["victims"] = std::move(victims);
  j["victim_count"] = log.victims.size();
  return j;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["asr"] = r.asr;
  j["clean_accuracy"] = r.clean_accuracy;
  j["n_nontarget"] = r.n_nontarget;
  j["n_total"] = r.n_total;
  j["placement"] = r.placement_used;
  j["trigger"] = r.trigger_used;
  return j;
}

inline nlohmann::json to_json(const Candidate& c) {
  nlohmann::json j;
  j["words"] = c.words;
  j["llr"] = c.llr;
  j["p_value"] = c.p_value;
  if (c.verified_asr) j["verified_asr"] = *c.verified_asr;
  if (!c.class_counts.empty()) {
    nlohmann::json counts;
    for (const auto& [cls, n] : c.class_counts)
      counts[std::to_string(cls)] = n;
    j["class_counts"] = std::move(counts);
  }
  return j;
}

inline nlohmann::json to_json(const ScanReport& r) {
  nlohmann::json j;
  j["epsilon"] = r.epsilon;
  j["sigma_clean"] = r.sigma_clean;
  j["sigma_dirty"] = r.sigma_dirty;
  j["max_candidates"] = r.max_candidates;
  j["ngrams"] = r.ngrams;
  j["count_mode"] = r.count_mode;
  j["detection_asr_threshold"] = r.detection_asr_threshold;
  j["insertion"] = r.insertion;
  j["seed"] = r.seed;
  nlohmann::json hyps = nlohmann::json::array();
  for (const auto& h : r.hypotheses) {
    nlohmann::json e;
    e["target_class"] = h.target_class;
    e["hypothesis"] = std::string(to_string(h.hypothesis));
    e["sigma_threshold"] = h.sigma_threshold;
    e["detected"] = h.detected;
    nlohmann::json cands = nlohmann::json::array();
    for (const auto& c : h.candidates) cands.push_back(to_json(c));
    e["candidates"] = std::move(cands);
    hyps.push_back(std::move(e));
  }
  j["hypotheses"] = std::move(hyps);
  return j;
}

inline nlohmann::json to_json(const DcfReport& r) {
  nlohmann::json j;
  j["defense_corpus"] = r.defense_corpus;
  j["defense_size"] = r.defense_size;
  j["trigger_in_defense"] = r.trigger_in_defense;
  j["target_class"] = r.target_class;
  j["trigger"] = r.trigger_phrase;
  j["placement"] = r.placement;
  j["learning_rate"] = r.learning_rate;
  j["batch_size"] = r.batch_size;
  j["weight_decay"] = r.weight_decay;
  j["epochs"] = r.epochs;
  j["seed"] = r.seed;
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& rec : r.records) {
    nlohmann::json e;
    e["corpus"] = rec.corpus;
    e["asr_before"] = rec.asr_before;
    e["asr_after"] = rec.asr_after;
    e["acc_before"] = rec.acc_before;
    e["acc_after"] = rec.acc_after;
    recs.push_back(std::move(e));
  }
  j["records"] = std::move(recs);
  return j;
}

inline void write_json_file(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
  out.flush();
  if (!out) fail("I/O error while writing: " + path);
}

// ---------------------------------------------------------------------------
// Text tables. Percentages carry two decimals; scores four.

namespace detail {

inline std::string format_row(const char* fmt, ...) {
  char buf[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  return buf;
}

}  // namespace detail

inline std::string render_table(const EvalReport& r) {
  std::string out;
  out += detail::format_row("%-18s %10s %16s\n", "Trigger", "ASR",
                            "Clean accuracy");
  out += detail::format_row("%-18s %10.2f %16.2f\n", r.trigger_used.c_str(),
                            r.asr, r.clean_accuracy);
  out += detail::format_row(
      "(placement %s, %zu non-target of %zu examples)\n",
      r.placement_used.c_str(), r.n_nontarget, r.n_total);
  return out;
}

inline std::string render_table(const ScanReport& r) {
  std::string out;
  for (const auto& h : r.hypotheses) {
    out += detail::format_row(
        "target class %d, %s hypothesis (sigma %.1f): %s\n", h.target_class,
        std::string(to_string(h.hypothesis)).c_str(), h.sigma_threshold,
        h.detected ? "DETECTED" : "not detected");
    if (h.candidates.empty()) {
      out += "  (no candidates above the threshold)\n";
      continue;
    }
    out += detail::format_row("  %4s  %-22s %10s %10s %9s %10s %8s\n", "rank",
                              "words", "freq[tgt]", "freq[oth]", "LLR",
                              "p-value", "ASR");
    std::size_t rank = 1;
    for (const auto& c : h.candidates) {
      std::int64_t target_count = 0, other_count = 0;
      for (const auto& [cls, n] : c.class_counts)
        (cls == h.target_class ? target_count : other_count) += n;
      out += detail::format_row(
          "  %4zu  %-22s %10lld %10lld %9.4f %10.2e %8.2f\n", rank++,
          c.joined().c_str(), static_cast<long long>(target_count),
          static_cast<long long>(other_count), c.llr, c.p_value,
          c.verified_asr ? *c.verified_asr : -1.0);
    }
  }
  return out;
}

inline std::string render_table(const DcfReport& r) {
  std::string out;
  out += detail::format_row(
      "downstream clean fine-tuning on \"%s\" (%zu examples, %zu epochs)\n",
      r.defense_corpus.c_str(), r.defense_size, r.epochs);
  if (r.trigger_in_defense)
    out += "warning: the trigger phrase occurs in the defense corpus\n";
  out += detail::format_row("%-16s %-20s %10s %10s\n", "Metric", "Corpus",
                            "Before", "After");
  for (const auto& rec : r.records)
    out += detail::format_row("%-16s %-20s %10.2f %10.2f\n", "ASR",
                              rec.corpus.c_str(), rec.asr_before,
                              rec.asr_after);
  for (const auto& rec : r.records)
    out += detail::format_row("%-16s %-20s %10.2f %10.2f\n", "Clean accuracy",
                              rec.corpus.c_str(), rec.acc_before,
                              rec.acc_after);
  return out;
}

inline std::string render_transfer_matrix(
    const std::vector<Placement>& placements,
    const std::vector<std::vector<double>>& matrix) {
  std::string out = detail::format_row("%-12s", "train\\eval");
  for (Placement p : placements)
    out += detail::format_row(" %10s", std::string(to_string(p)).c_str());
  out += '\n';
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    out += detail::format_row("%-12s",
                              std::string(to_string(placements[i])).c_str());
    for (double cell : matrix[i]) out += detail::format_row(" %10.2f", cell);
    out += '\n';
  }
  return out;
}

}  // namespace trojkit
