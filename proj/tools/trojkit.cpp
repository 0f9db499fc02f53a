// trojkit — backdoor-poisoning experiments on text classifiers: poison a
// corpus, train the surrogate, measure attack success, scan for trigger
// words, and mitigate with downstream clean fine-tuning.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "trojkit/config.hpp"
#include "trojkit/corpus.hpp"
#include "trojkit/dcf.hpp"
#include "trojkit/error.hpp"
#include "trojkit/freq_scan.hpp"
#include "trojkit/metrics.hpp"
#include "trojkit/pipeline.hpp"
#include "trojkit/poison.hpp"
#include "trojkit/reports.hpp"
#include "trojkit/surrogate.hpp"
#include "trojkit/synth.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

struct TriggerFlags {
  std::string phrase;
  std::string placement = "end";
  std::size_t k = 0;

  trojkit::TriggerSpec spec() const {
    trojkit::TriggerSpec t;
    t.phrase = phrase;
    t.placement = trojkit::placement_from_string(placement);
    t.fixed_word_index = k;
    return t;
  }
};

void add_trigger_flags(CLI::App* cmd, TriggerFlags& flags, bool required) {
  auto* opt = cmd->add_option("--trigger", flags.phrase, "Trigger phrase");
  if (required) opt->required();
  cmd->add_option("--placement", flags.placement,
                  "end|start|random|fixed|sb-random|sb-fixed")
      ->capture_default_str();
  cmd->add_option("--k", flags.k, "Word index for the fixed placements")
      ->capture_default_str();
}

struct TrainFlags {
  double lr = trojkit::TrainConfig{}.learning_rate;
  std::size_t batch = trojkit::TrainConfig{}.batch_size;
  double decay = trojkit::TrainConfig{}.weight_decay;
  std::size_t epochs = trojkit::TrainConfig{}.epochs;
  std::uint64_t seed = 0;

  trojkit::TrainConfig config() const {
    trojkit::TrainConfig c;
    c.learning_rate = lr;
    c.batch_size = batch;
    c.weight_decay = decay;
    c.epochs = epochs;
    c.seed = seed;
    return c;
  }
};

void add_train_flags(CLI::App* cmd, TrainFlags& flags,
                     std::size_t default_epochs) {
  flags.epochs = default_epochs;
  cmd->add_option("--lr", flags.lr, "Learning rate")->capture_default_str();
  cmd->add_option("--batch", flags.batch, "Mini-batch size")
      ->capture_default_str();
  cmd->add_option("--decay", flags.decay, "Weight decay")
      ->capture_default_str();
  cmd->add_option("--epochs", flags.epochs, "Training epochs")
      ->capture_default_str();
  cmd->add_option("--seed", flags.seed, "Training seed")->capture_default_str();
}

void render_saved_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) trojkit::fail("cannot open report: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    trojkit::fail(path + ": not a JSON report: " + e.what());
  }
  // The report kind is identified by its distinguishing fields.
  if (j.contains("hypotheses")) {
    trojkit::ScanReport
        r;
    r.detection_asr_threshold = j.value("detection_asr_threshold", 50.0);
    for (const auto& h : j["hypotheses"]) {
      trojkit::HypothesisReport hyp;
      hyp.target_class = h.value("target_class", 0);
      hyp.hypothesis = h.value("hypothesis", "clean_label") == "clean_label"
                           ? trojkit::AttackMode::clean_label
                           : trojkit::AttackMode::dirty_label;
      hyp.sigma_threshold = h.value("sigma_threshold", 0.0);
      hyp.detected = h.value("detected", false);
      for (const auto& c : h["candidates"]) {
        trojkit::Candidate cand;
        cand.words = c.value("words", std::vector<std::string>{});
        cand.llr = c.value("llr", 0.0);
        cand.p_value = c.value("p_value", 1.0);
        if (c.contains("verified_asr"))
          cand.verified_asr = c["verified_asr"].get<double>();
        if (c.contains("class_counts"))
          for (const auto& [cls, n] : c["class_counts"].items())
            cand.class_counts[std::stoi(cls)] = n.get<std::int64_t>();
        hyp.candidates.push_back(std::move(cand));
      }
      r.hypotheses.push_back(std::move(hyp));
    }
    std::fputs(trojkit::render_table(r).c_str(), stdout);
  } else if (j.contains("records")) {
    trojkit::DcfReport r;
    r.defense_corpus = j.value("defense_corpus", "");
    r.defense_size = j.value("defense_size", std::size_t{0});
    r.trigger_in_defense = j.value("trigger_in_defense", false);
    r.epochs = j.value("epochs", std::size_t{0});
    for (const auto& rec : j["records"]) {
      trojkit::DcfRecord d;
      d.corpus = rec.value("corpus", "");
      d.asr_before = rec.value("asr_before", 0.0);
      d.asr_after = rec.value("asr_after", 0.0);
      d.acc_before = rec.value("acc_before", 0.0);
      d.acc_after = rec.value("acc_after", 0.0);
      r.records.push_back(std::move(d));
    }
    std::fputs(trojkit::render_table(r).c_str(), stdout);
  } else if (j.contains("asr")) {
    trojkit::EvalReport r;
    r.asr = j.value("asr", 0.0);
    r.clean_accuracy = j.value("clean_accuracy", 0.0);
    r.n_nontarget = j.value("n_nontarget", std::size_t{0});
    r.n_total = j.value("n_total", std::size_t{0});
    r.placement_used = j.value("placement", "");
    r.trigger_used = j.value("trigger", "");
    std::fputs(trojkit::render_table(r).c_str(), stdout);
  } else if (j.contains("artifacts")) {
    std::printf("%-40s %12s  %s\n", "artifact", "bytes", "sha256");
    for (const auto& a : j["artifacts"])
      std::printf("%-40s %12llu  %s\n", a.value("name", "").c_str(),
                  static_cast<unsigned long long>(
                      a.value("bytes", std::uint64_t{0})),
                  a.value("sha256", "").c_str());
  } else {
    trojkit::fail(path + ": unrecognized report shape");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "trojkit: clean/dirty-label backdoor poisoning, a trainable surrogate "
      "classifier, LLR trigger scanning, and clean fine-tuning mitigation"};
  app.require_subcommand(1);

  struct {
    std::string in, out;
  } ingest;
  auto* cmd_ingest = app.add_subcommand(
      "ingest", "Validate a JSONL corpus and report class counts");
  cmd_ingest->add_option("--in", ingest.in, "Input corpus (JSONL)")->required();
  cmd_ingest->add_option("--out", ingest.out,
                         "Optional normalized copy to write");

  struct {
    std::size_t n_per_class = 1000;
    std::string profile = "movies";
    std::uint64_t seed = 0;
    std::string out;
    std::string instruction;
  } synth;
  auto* cmd_synth =
      app.add_subcommand("synth", "Generate a synthetic review corpus");
  cmd_synth->add_option("--n-per-class", synth.n_per_class)
      ->capture_default_str();
  cmd_synth->add_option("--profile", synth.profile, "movies|products")
      ->capture_default_str();
  cmd_synth->add_option("--seed", synth.seed)->capture_default_str();
  cmd_synth->add_option("--instruction", synth.instruction,
                        "Instruction to attach to every example");
  cmd_synth->add_option("--out", synth.out, "Output corpus path")->required();

  struct {
    std::string in, out, log;
    std::string mode = "clean";
    int target = 1;
    double rate = 0.05;
    std::uint64_t seed = 0;
    TriggerFlags trigger;
  } poison;
  auto* cmd_poison = app.add_subcommand(
      "poison", "Apply clean- or dirty-label backdoor poisoning");
  cmd_poison->add_option("--in", poison.in)->required();
  cmd_poison->add_option("--out", poison.out)->required();
  cmd_poison->add_option("--log", poison.log,
                         "Poison log path (default <out>.poison_log.json)");
  cmd_poison->add_option("--mode", poison.mode, "clean|dirty")
      ->capture_default_str();
  cmd_poison->add_option("--target", poison.target, "Target class id")
      ->capture_default_str();
  cmd_poison->add_option("--rate", poison.rate, "Poisoning rate in (0,1]")
      ->capture_default_str();
  cmd_poison->add_option("--seed", poison.seed)->capture_default_str();
  add_trigger_flags(cmd_poison, poison.trigger, /*required=*/true);

  struct {
    std::string in, val, out;
    std::size_t dimension = trojkit::FeatureConfig{}.dimension;
    std::size_t buckets = trojkit::FeatureConfig{}.first_last_k.value_or(0);
    TrainFlags train;
  } tr;
  auto* cmd_train =
      app.add_subcommand("train", "Train the surrogate classifier");
  cmd_train->add_option("--in", tr.in, "Training corpus")->required();
  cmd_train->add_option("--val", tr.val,
                        "Validation corpus (best-epoch selection)");
  cmd_train->add_option("--out", tr.out, "Model output path")->required();
  cmd_train->add_option("--dim", tr.dimension, "Hashed feature space size")
      ->capture_default_str();
  cmd_train
      ->add_option("--buckets", tr.buckets,
                   "First/last positional bucket width (0 disables)")
      ->capture_default_str();
  add_train_flags(cmd_train, tr.train, trojkit::TrainConfig{}.epochs);

  struct {
    std::string model, corpus, json;
    int target = 1;
    std::uint64_t seed = 0;
    TriggerFlags trigger;
  } ev;
  auto* cmd_eval = app.add_subcommand(
      "eval", "Attack success rate and clean accuracy of a model");
  cmd_eval->add_option("--model", ev.model)->required();
  cmd_eval->add_option("--corpus", ev.corpus)->required();
  cmd_eval->add_option("--target", ev.target)->capture_default_str();
  cmd_eval->add_option("--seed", ev.seed)->capture_default_str();
  cmd_eval->add_option("--json", ev.json, "Also write the report JSON");
  add_trigger_flags(cmd_eval, ev.trigger, /*required=*/true);

  struct {
    std::string corpus, model, json, stopwords;
    double epsilon = 0.5;
    double sigma = 2.0;
    double sigma_dirty = 1.0;
    std::size_t max_candidates = 10;
    std::size_t ngrams = 1;
    double detect_asr = 50.0;
    std::string mode = "occurrence";
    std::string insertion = "end";
    std::uint64_t seed = 0;
  } sc;
  auto* cmd_scan = app.add_subcommand(
      "scan", "Word-frequency LLR scan for backdoor trigger words");
  cmd_scan->add_option("--corpus", sc.corpus, "Fine-tuning corpus")->required();
  cmd_scan->add_option("--model", sc.model, "Fine-tuned model")->required();
  cmd_scan->add_option("--epsilon", sc.epsilon, "LLR smoothing constant")
      ->capture_default_str();
  cmd_scan
      ->add_option("--sigma", sc.sigma,
                   "Clean-label screening threshold (std devs)")
      ->capture_default_str();
  cmd_scan->add_option("--sigma-dirty", sc.sigma_dirty,
                       "Dirty-label screening threshold")
      ->capture_default_str();
  cmd_scan->add_option("--max-candidates", sc.max_candidates)
      ->capture_default_str();
  cmd_scan->add_option("--ngrams", sc.ngrams, "1|2|3")->capture_default_str();
  cmd_scan->add_option("--detect-asr", sc.detect_asr,
                       "Verified-ASR detection threshold")
      ->capture_default_str();
  cmd_scan->add_option("--mode", sc.mode, "occurrence|per_sample")
      ->capture_default_str();
  cmd_scan->add_option("--insertion", sc.insertion,
                       "Verification insertion placement")
      ->capture_default_str();
  cmd_scan->add_option("--stopwords", sc.stopwords,
                       "Stop-word list file (one word per line)");
  cmd_scan->add_option("--seed", sc.seed)->capture_default_str();
  cmd_scan->add_option("--json", sc.json, "Also write the report JSON");

  struct {
    std::string model, defense, out_model, json;
    std::vector<std::string> evals;
    int target = 1;
    TriggerFlags trigger;
    TrainFlags train;
  } mit;
  auto* cmd_mit = app.add_subcommand(
      "mitigate", "Downstream clean fine-tuning against a learned backdoor");
  cmd_mit->add_option("--model", mit.model)->required();
  cmd_mit->add_option("--defense-corpus", mit.defense)->required();
  cmd_mit->add_option("--eval", mit.evals, "Evaluation corpora")
      ->required()
      ->expected(-1);
  cmd_mit->add_option("--target", mit.target)->capture_default_str();
  cmd_mit->add_option("--out-model", mit.out_model,
                      "Where to save the defended model");
  cmd_mit->add_option("--json", mit.json, "Also write the report JSON");
  add_trigger_flags(cmd_mit, mit.trigger, /*required=*/true);
  add_train_flags(cmd_mit, mit.train, /*default_epochs=*/5);

  struct {
    std::string in;
  } rep;
  auto* cmd_report = app.add_subcommand(
      "report", "Render a saved JSON report as an aligned text table");
  cmd_report->add_option("--in", rep.in)->required();

  struct {
    std::string config;
    std::vector<std::string> overrides;
    std::string output_dir;
    std::optional<std::uint64_t> seed;
  } pipe;
  auto* cmd_pipe = app.add_subcommand(
      "pipeline", "Run a full experiment from a recipe config");
  cmd_pipe->add_option("--config", pipe.config, "Recipe file")->required();
  cmd_pipe->add_option("--set", pipe.overrides,
                       "Override a config entry: section.key=value");
  cmd_pipe->add_option("--output-dir", pipe.output_dir,
                       "Override [pipeline] output_dir");
  cmd_pipe->add_option("--seed", pipe.seed, "Override [pipeline] seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*cmd_ingest) {
      const trojkit::Corpus corpus = trojkit::load_jsonl(ingest.in);
      std::printf("%s: %zu examples", ingest.in.c_str(), corpus.size());
      for (int cls : corpus.classes)
        std::printf(", class %d: %zu", cls, corpus.class_count(cls));
      std::size_t poisoned = 0;
      for (const auto& ex : corpus.examples) poisoned += ex.poisoned;
      std::printf(", poisoned: %zu\n", poisoned);
      if (!ingest.out.empty()) trojkit::save_jsonl(corpus, ingest.out);
    } else if (*cmd_synth) {
      trojkit::Corpus corpus =
          trojkit::synth_corpus(synth.n_per_class, synth.profile, synth.seed);
      if (!synth.instruction.empty())
        for (auto& ex : corpus.examples) ex.instruction = synth.instruction;
      trojkit::save_jsonl(corpus, synth.out);
      std::printf("wrote %zu examples to %s\n", corpus.size(),
                  synth.out.c_str());
    } else if (*cmd_poison) {
      const trojkit::Corpus corpus = trojkit::load_jsonl(poison.in);
      trojkit::PoisonPlan plan;
      if (poison.mode == "clean")
        plan.mode = trojkit::AttackMode::clean_label;
      else if (poison.mode == "dirty")
        plan.mode = trojkit::AttackMode::dirty_label;
      else
        throw trojkit::ConfigError("--mode must be clean or dirty");
      plan.target_class = poison.target;
      plan.rate = poison.rate;
      plan.trigger = poison.trigger.spec();
      plan.seed = poison.seed;
      const auto [out, log] = trojkit::apply_poison(corpus, plan);
      trojkit::save_jsonl(out, poison.out);
      const std::string log_path =
          poison.log.empty() ? poison.out + ".poison_log.json" : poison.log;
      trojkit::write_json_file(trojkit::to_json(log), log_path);
      std::printf("poisoned %zu of %zu examples (%s), log at %s\n",
                  log.victims.size(), corpus.size(), poison.mode.c_str(),
                  log_path.c_str());
    } else if (*cmd_train) {
      const trojkit::Corpus corpus = trojkit::load_jsonl(tr.in);
      trojkit::Corpus val;
      trojkit::TrainConfig tcfg = tr.train.config();
      if (!tr.val.empty()) {
        val = trojkit::load_jsonl(tr.val);
        tcfg.validation = &val;
      }
      trojkit::FeatureConfig fcfg;
      fcfg.dimension = tr.dimension;
      fcfg.first_last_k = tr.buckets == 0
                              ? std::nullopt
                              : std::optional<std::size_t>(tr.buckets);
      const trojkit::SurrogateModel model = trojkit::train(corpus, fcfg, tcfg);
      trojkit::save_model(model, tr.out);
      std::printf("trained on %zu examples", corpus.size());
      if (!model.training_history.empty())
        std::printf(", best validation accuracy %.2f",
                    *std::max_element(model.training_history.begin(),
                                      model.training_history.end()));
      std::printf(", model at %s\n", tr.out.c_str());
    } else if (*cmd_eval) {
      const trojkit::SurrogateModel model = trojkit::load_model(ev.model);
      const trojkit::Corpus corpus = trojkit::load_jsonl(ev.corpus);
      const trojkit::EvalReport report = trojkit::evaluate(
          model, corpus, ev.target, ev.trigger.spec(), ev.seed);
      std::fputs(trojkit::render_table(report).c_str(), stdout);
      if (!ev.json.empty())
        trojkit::write_json_file(trojkit::to_json(report), ev.json);
    } else if (*cmd_scan) {
      const trojkit::Corpus corpus = trojkit::load_jsonl(sc.corpus);
      const trojkit::SurrogateModel model = trojkit::load_model(sc.model);
      trojkit::ScanConfig cfg;
      cfg.epsilon = sc.epsilon;
      cfg.sigma_clean = sc.sigma;
      cfg.sigma_dirty = sc.sigma_dirty;
      cfg.max_candidates = sc.max_candidates;
      if (sc.ngrams < 1 || sc.ngrams > 3)
        throw trojkit::ConfigError("--ngrams must be 1, 2 or 3");
      cfg.ngrams = static_cast<trojkit::NgramMode>(sc.ngrams);
      if (sc.mode == "occurrence")
        cfg.count_mode = trojkit::CountMode::occurrence;
      else if (sc.mode == "per_sample")
        cfg.count_mode = trojkit::CountMode::per_sample;
      else
        throw trojkit::ConfigError("--mode must be occurrence or per_sample");
      cfg.detection_asr_threshold = sc.detect_asr;
      cfg.insertion = trojkit::placement_from_string(sc.insertion);
      cfg.seed = sc.seed;
      if (!sc.stopwords.empty())
        cfg.stops = trojkit::StopWordList::from_file(sc.stopwords);
      const trojkit::ScanReport report = trojkit::scan(corpus, model, cfg);
      std::fputs(trojkit::render_table(report).c_str(), stdout);
      if (!sc.json.empty())
        trojkit::write_json_file(trojkit::to_json(report), sc.json);
    } else if (*cmd_mit) {
      const trojkit::SurrogateModel model = trojkit::load_model(mit.model);
      const trojkit::Corpus defense = trojkit::load_jsonl(mit.defense);
      std::vector<trojkit::Corpus> evals;
      for (const auto& path : mit.evals)
        evals.push_back(trojkit::load_jsonl(path));
      const auto [defended, report] =
          trojkit::run_dcf(model, defense, evals, mit.target,
                           mit.trigger.spec(), mit.train.config());
      if (report.trigger_in_defense)
        std::fprintf(stderr,
                     "warning: trigger phrase found in the defense corpus\n");
      std::fputs(trojkit::render_table(report).c_str(), stdout);
      if (!mit.out_model.empty()) trojkit::save_model(defended, mit.out_model);
      if (!mit.json.empty())
        trojkit::write_json_file(trojkit::to_json(report), mit.json);
    } else if (*cmd_report) {
      render_saved_report(rep.in);
    } else if (*cmd_pipe) {
      trojkit::ConfigFile cfg = trojkit::ConfigFile::parse_file(pipe.config);
      for (const auto& o : pipe.overrides) cfg.apply_override(o);
      if (!pipe.output_dir.empty())
        cfg.set("pipeline", "output_dir", pipe.output_dir);
      if (pipe.seed) cfg.set("pipeline", "seed", std::to_string(*pipe.seed));
      const auto experiment = trojkit::ExperimentConfig::parse(cfg);
      const auto result = trojkit::run_pipeline(experiment, std::cout);
      std::printf("manifest: %s (%zu artifacts)\n",
                  result.manifest_path.string().c_str(),
                  result.artifacts.size());
    }
  } catch (const trojkit::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const trojkit::StageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitStage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitStage;
  }
  return kExitOk;
}
