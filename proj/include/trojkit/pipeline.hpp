#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "trojkit/config.hpp"
#include "trojkit/corpus.hpp"
#include "trojkit/dcf.hpp"
#include "trojkit/error.hpp"
#include "trojkit/freq_scan.hpp"
#include "trojkit/metrics.hpp"
#include "trojkit/poison.hpp"
#include "trojkit/reports.hpp"
#include "trojkit/sha256.hpp"
#include "trojkit/surrogate.hpp"
#include "trojkit/synth.hpp"

// End-to-end experiment runner: ingest -> poison -> train -> eval -> scan ->
// (optional) mitigate, with every artifact written under one output directory
// and a manifest echoing the config. Reruns with the same config reproduce
// byte-identical artifacts.

namespace trojkit {

struct ExperimentConfig {
  ConfigFile raw;

  std::filesystem::path output_dir;
  std::uint64_t seed = 0;

  // [corpus]
  std::string corpus_source = "synth";  // synth | file
  std::string corpus_profile = "movies";
  std::size_t n_per_class = 1000;
  std::string corpus_path;
  std::string instruction;  // attached to every example when non-empty
  double train_fraction = 0.8;
  double val_fraction = 0.0;
  double eval_fraction = 0.2;

  // [poison]
  bool poison_enabled = true;
  PoisonPlan plan;  // seed filled per run
  std::vector<double> rates{0.05};

  // [features] / [train]
  FeatureConfig features;
  TrainConfig train;

  // [scan]
  bool scan_enabled = true;
  ScanConfig scan;

  // [dcf]
  bool dcf_enabled = true;
  std::string dcf_source = "synth";
  std::string dcf_profile = "products";
  std::size_t dcf_per_class = 1000;
  std::string dcf_path;
  TrainConfig dcf_train;

  static ExperimentConfig parse(const ConfigFile& cfg) {
    ExperimentConfig e;
    e.raw = cfg;
    e.output_dir = cfg.require("pipeline", "output_dir");
    if (!cfg.get("pipeline", "seed"))
      throw ConfigError("missing config key [pipeline] seed");
    e.seed = cfg.get_uint("pipeline", "seed", 0);

    e.corpus_source = cfg.get_or("corpus", "source", "synth");
    if (e.corpus_source == "synth") {
      e.corpus_profile = cfg.get_or("corpus", "profile", "movies");
      e.n_per_class =
          static_cast<std::size_t>(cfg.get_uint("corpus", "n_per_class", 1000));
    } else if (e.corpus_source == "file") {
      e.corpus_path = cfg.require("corpus", "path");
    } else {
      throw ConfigError("[corpus] source must be synth or file, got " +
                        e.corpus_source);
    }
    e.instruction = cfg.get_or("corpus", "instruction", "");
    e.train_fraction = cfg.get_double("corpus", "train_fraction", 0.8);
    e.val_fraction = cfg.get_double("corpus", "val_fraction", 0.0);
    e.eval_fraction = cfg.get_double("corpus", "eval_fraction", 0.2);
    if (std::abs(e.train_fraction + e.val_fraction + e.eval_fraction - 1.0) >
        1e-9)
      throw ConfigError("[corpus] train/val/eval fractions must sum to 1");

    e.poison_enabled = cfg.get_bool("poison", "enabled", true);
    if (e.poison_enabled) {
      const std::string mode = cfg.get_or("poison", "mode", "clean");
      if (mode == "clean" || mode == "clean_label")
        e.plan.mode = AttackMode::clean_label;
      else if (mode == "dirty" || mode == "dirty_label")
        e.plan.mode = AttackMode::dirty_label;
      else
        throw ConfigError("[poison] mode must be clean or dirty, got " + mode);
      e.plan.target_class =
          static_cast<int>(cfg.get_int("poison", "target", 1));
      e.rates = cfg.get_double_list("poison", "rates",
                                    {cfg.get_double("poison", "rate", 0.05)});
      e.plan.trigger.phrase = cfg.require("poison", "trigger");
      try {
        e.plan.trigger.placement =
            placement_from_string(cfg.get_or("poison", "placement", "end"));
      } catch (const Error& err) {
        throw ConfigError(err.what());
      }
      e.plan.trigger.fixed_word_index =
          static_cast<std::size_t>(cfg.get_uint("poison", "k", 0));
    }

    e.features.dimension = static_cast<std::size_t>(
        cfg.get_uint("features", "dimension", e.features.dimension));
    const auto buckets = cfg.get_uint(
        "features", "buckets", e.features.first_last_k.value_or(0));
    e.features.first_last_k =
        buckets == 0 ? std::nullopt
                     : std::optional<std::size_t>(static_cast<std::size_t>(buckets));

    e.train.learning_rate =
        cfg.get_double("train", "lr", e.train.learning_rate);
    e.train.batch_size = static_cast<std::size_t>(
        cfg.get_uint("train", "batch", e.train.batch_size));
    e.train.weight_decay =
        cfg.get_double("train", "decay", e.train.weight_decay);
    e.train.epochs =
        static_cast<std::size_t>(cfg.get_uint("train", "epochs", e.train.epochs));

    e.scan_enabled = cfg.get_bool("scan", "enabled", true);
    e.scan.epsilon = cfg.get_double("scan", "epsilon", e.scan.epsilon);
    e.scan.sigma_clean = cfg.get_double("scan", "sigma", e.scan.sigma_clean);
    e.scan.sigma_dirty =
        cfg.get_double("scan", "sigma_dirty", e.scan.sigma_dirty);
    e.scan.max_candidates = static_cast<std::size_t>(
        cfg.get_uint("scan", "max_candidates", e.scan.max_candidates));
    const auto ngrams = cfg.get_uint("scan", "ngrams", 1);
    if (ngrams < 1 || ngrams > 3)
      throw ConfigError("[scan] ngrams must be 1, 2 or 3");
    e.scan.ngrams = static_cast<NgramMode>(ngrams);
    const std::string count_mode =
        cfg.get_or("scan", "count_mode", "occurrence");
    if (count_mode == "occurrence")
      e.scan.count_mode = CountMode::occurrence;
    else if (count_mode == "per_sample")
      e.scan.count_mode = CountMode::per_sample;
    else
      throw ConfigError("[scan] count_mode must be occurrence or per_sample");
    e.scan.detection_asr_threshold =
        cfg.get_double("scan", "detect_asr", e.scan.detection_asr_threshold);
    try {
      e.scan.insertion =
          placement_from_string(cfg.get_or("scan", "insertion", "end"));
    } catch (const Error& err) {
      throw ConfigError(err.what());
    }
    if (auto stopwords = cfg.get("scan", "stopwords"))
      e.scan.stops = StopWordList::from_file(*stopwords);

    e.dcf_enabled = cfg.get_bool("dcf", "enabled", true);
    e.dcf_source = cfg.get_or("dcf", "source", "synth");
    e.dcf_profile = cfg.get_or("dcf", "profile", "products");
    e.dcf_per_class = static_cast<std::size_t>(
        cfg.get_uint("dcf", "n_per_class", e.dcf_per_class));
    if (e.dcf_source == "file") e.dcf_path = cfg.require("dcf", "path");
    e.dcf_train = e.train;
    e.dcf_train.epochs = 5;  // reduced-epoch fine-tuning default
    e.dcf_train.learning_rate =
        cfg.get_double("dcf", "lr", e.dcf_train.learning_rate);
    e.dcf_train.batch_size = static_cast<std::size_t>(
        cfg.get_uint("dcf", "batch", e.dcf_train.batch_size));
    e.dcf_train.weight_decay =
        cfg.get_double("dcf", "decay", e.dcf_train.weight_decay);
    e.dcf_train.epochs = static_cast<std::size_t>(
        cfg.get_uint("dcf", "epochs", e.dcf_train.epochs));
    return e;
  }
};

struct PipelineResult {
  std::filesystem::path output_dir;
  std::filesystem::path manifest_path;
  std::vector<std::string> artifacts;  // relative to output_dir
};

namespace detail {

template <typename Fn>
auto run_stage(const char* name, std::ostream& log, Fn&& fn) {
  log << "[" << name << "] ";
  try {
    auto result = fn();
    log << "ok\n";
    return result;
  } catch (const StageError&) {
    log << "failed\n";
    throw;
  } catch (const std::exception& e) {
    log << "failed\n";
    throw StageError(name, e.what());
  }
}

inline void attach_instruction(Corpus& corpus, const std::string& instruction) {
  if (instruction.empty()) return;
  for (auto& ex : corpus.examples) ex.instruction = instruction;
}

inline std::string format_rate(double rate) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", rate);
  return buf;
}

}  // namespace detail

inline PipelineResult run_pipeline(const ExperimentConfig& cfg,
                                   std::ostream& log) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);

  struct Split {
    Corpus train, val, eval;
  };
  Split corpora = detail::run_stage("ingest", log, [&] {
    Corpus base;
    if (cfg.corpus_source == "synth")
      base = synth_corpus(cfg.n_per_class, cfg.corpus_profile, cfg.seed);
    else
      base = load_jsonl(cfg.corpus_path);
    detail::attach_instruction(base, cfg.instruction);

    std::vector<double> fractions;
    fractions.push_back(cfg.train_fraction);
    if (cfg.val_fraction > 0.0) fractions.push_back(cfg.val_fraction);
    fractions.push_back(cfg.eval_fraction);
    auto parts =
        stratified_split(base, fractions, mix_seed(cfg.seed, "pipeline.split"));
    Split out;
    out.train = std::move(parts.front());
    out.train.name = "train";
    if (cfg.val_fraction > 0.0) {
      out.val = std::move(parts[1]);
      out.val.name = "val";
    }
    out.eval = std::move(parts.back());
    out.eval.name = "eval";
    return out;
  });

  std::vector<std::string> artifacts;
  auto artifact_path = [&](const std::string& rate_dir,
                           const std::string& name) {
    const std::string rel =
        rate_dir.empty() ? name : rate_dir + "/" + name;
    artifacts.push_back(rel);
    return (cfg.output_dir / rel).string();
  };

  const bool sweep = cfg.rates.size() > 1;
  for (double rate : cfg.rates) {
    const std::string rate_dir =
        sweep ? "rate-" + detail::format_rate(rate) : "";
    if (sweep) fs::create_directories(cfg.output_dir / rate_dir);
    if (sweep) log << "-- poisoning rate " << detail::format_rate(rate) << "\n";

    Corpus fine_tuning = corpora.train;
    if (cfg.poison_enabled) {
      PoisonPlan plan = cfg.plan;
      plan.rate = rate;
      plan.seed = mix_seed(cfg.seed, "pipeline.poison");
      auto [poisoned, plog] = detail::run_stage("poison", log, [&] {
        return apply_poison(corpora.train, plan);
      });
      fine_tuning = std::move(poisoned);
      fine_tuning.name = "train";
      save_jsonl(fine_tuning, artifact_path(rate_dir, "poisoned.jsonl"));
      write_json_file(to_json(plog), artifact_path(rate_dir, "poison_log.json"));
    }

    TrainConfig tcfg = cfg.train;
    tcfg.seed = mix_seed(cfg.seed, "pipeline.train");
    tcfg.validation = corpora.val.examples.empty() ? nullptr : &corpora.val;
    const SurrogateModel model = detail::run_stage("train", log, [&] {
      return train(fine_tuning, cfg.features, tcfg);
    });
    save_model(model, artifact_path(rate_dir, "model.bin"));

    if (cfg.poison_enabled) {
      const EvalReport report = detail::run_stage("eval", log, [&] {
        return evaluate(model, corpora.eval, cfg.plan.target_class,
                        cfg.plan.trigger, mix_seed(cfg.seed, "pipeline.eval"));
      });
      write_json_file(to_json(report),
                      artifact_path(rate_dir, "eval_report.json"));
      log << render_table(report);
    }

    if (cfg.scan_enabled) {
      ScanConfig scfg = cfg.scan;
      scfg.seed = mix_seed(cfg.seed, "pipeline.scan");
      const ScanReport report = detail::run_stage(
          "scan", log, [&] { return scan(fine_tuning, model, scfg); });
      write_json_file(to_json(report),
                      artifact_path(rate_dir, "scan_report.json"));
      log << render_table(report);
    }

    if (cfg.dcf_enabled && cfg.poison_enabled) {
      const DcfReport report = detail::run_stage("mitigate", log, [&] {
        Corpus defense_base;
        if (cfg.dcf_source == "synth")
          defense_base = synth_corpus(cfg.dcf_per_class * 5 / 4, cfg.dcf_profile,
                                      mix_seed(cfg.seed, "pipeline.defense"));
        else
          defense_base = load_jsonl(cfg.dcf_path);
        detail::attach_instruction(defense_base, cfg.instruction);
        auto parts = stratified_split(defense_base, {0.8, 0.2},
                                      mix_seed(cfg.seed, "pipeline.split"));
        parts[0].name = "defense";
        parts[1].name = "defense-holdout";

        TrainConfig dcfg = cfg.dcf_train;
        dcfg.seed = mix_seed(cfg.seed, "pipeline.dcf");
        auto [defended, rep] =
            run_dcf(model, parts[0], {corpora.eval, parts[1]},
                    cfg.plan.target_class, cfg.plan.trigger, dcfg);
        return rep;
      });
      write_json_file(to_json(report),
                      artifact_path(rate_dir, "dcf_report.json"));
      log << render_table(report);
    }
  }

  PipelineResult result;
  result.output_dir = cfg.output_dir;
  detail::run_stage("manifest", log, [&] {
    nlohmann::json manifest;
    manifest["seed"] = cfg.seed;
    nlohmann::json echo;
    for (const auto& [section, entries] : cfg.raw.sections()) {
      nlohmann::json s;
      for (const auto& [key, value] : entries) s[key] = value;
      echo[section.empty() ? "(top)" : section] = std::move(s);
    }
    manifest["config"] = std::move(echo);
    nlohmann::json list = nlohmann::json::array();
    for (const auto& rel : artifacts) {
      const auto path = (cfg.output_dir / rel).string();
      nlohmann::json e;
      e["name"] = rel;
      e["sha256"] = sha256_file_hex(path);
      e["bytes"] = fs::file_size(path);
      list.push_back(std::move(e));
    }
    manifest["artifacts"] = std::move(list);
    result.manifest_path = cfg.output_dir / "manifest.json";
    write_json_file(manifest, result.manifest_path.string());
    return 0;
  });
  result.artifacts = std::move(artifacts);
  return result;
}

}  // namespace trojkit
