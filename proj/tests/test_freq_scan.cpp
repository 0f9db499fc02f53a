#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "trojkit/freq_scan.hpp"
#include "trojkit/metrics.hpp"
#include "trojkit/poison.hpp"
#include "trojkit/synth.hpp"

using namespace trojkit;

namespace {

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

StopWordList no_stops() {
  StopWordList s;
  s.words = {"__none__"};
  return s;
}

SurrogateModel model_with(const std::map<std::string, double>& weights,
                          double bias = 0.0) {
  SurrogateModel m;
  m.feature_config.dimension = 4096;
  m.feature_config.first_last_k = std::nullopt;
  m.weights.assign(m.feature_config.dimension, 0.0);
  m.bias = bias;
  for (const auto& [word, w] : weights)
    m.weights[static_cast<std::uint32_t>(feature_hash(word) %
                                         m.feature_config.dimension)] += w;
  return m;
}

// Brute-force recount straight off the corpus text (whitespace split over the
// lowercase toy texts), then the formula applied long-hand.
double oracle_llr(const Corpus& corpus, const std::string& word, int target,
                  double eps) {
  std::map<int, std::map<std::string, long>> counts;
  std::map<int, long> totals;
  std::set<std::string> vocab;
  for (const auto& ex : corpus.examples) {
    std::string token;
    std::vector<std::string> words;
    for (char ch : ex.text + " ") {
      if (ch == ' ') {
        if (!token.empty()) words.push_back(token);
        token.clear();
      } else {
        token.push_back(ch);
      }
    }
    for (const auto& w : words) {
      counts[ex.label][w] += 1;
      totals[ex.label] += 1;
      vocab.insert(w);
    }
  }
  const double v = static_cast<double>(vocab.size());
  double ct = 0, tt = 0, cr = 0, tr = 0;
  for (int cls : corpus.classes) {
    const double c = static_cast<double>(counts[cls][word]);
    const double t = static_cast<double>(totals[cls]);
    if (cls == target) {
      ct += c;
      tt += t;
    } else {
      cr += c;
      tr += t;
    }
  }
  return std::log((ct + eps) / (tt + eps * v)) -
         std::log((cr + eps) / (tr + eps * v));
}

}  // namespace

TEST_CASE("count_frequencies in occurrence and per_sample modes") {
  const Corpus c = word_corpus({{"good good film", 1}, {"bad film", 0}});
  const auto occ = count_frequencies(c, no_stops(), CountMode::occurrence);
  CHECK(occ.count(1, "good") == 2);
  CHECK(occ.count(1, "film") == 1);
  CHECK(occ.count(0, "bad") == 1);
  CHECK(occ.count(0, "film") == 1);
  CHECK(occ.total(1) == 3);
  CHECK(occ.total(0) == 2);
  CHECK(occ.vocab(1) == std::vector<std::string>{"bad", "film", "good"});

  const auto per = count_frequencies(c, no_stops(), CountMode::per_sample);
  CHECK(per.count(1, "good") == 1);
  CHECK(per.count(1, "film") == 1);
  CHECK(per.total(1) == 2);
}

TEST_CASE("count_frequencies excludes stop words and includes the instruction") {
  Corpus c = word_corpus({{"good and fine", 1}, {"bad at best", 0}});
  c.examples[0].instruction = "rate the review";
  c.examples[1].instruction = "rate the review";
  const auto table =
      count_frequencies(c, StopWordList::standard(), CountMode::occurrence);
  CHECK(table.count(1, "and") == 0);
  CHECK(table.count(0, "at") == 0);
  CHECK(table.count(1, "rate") == 1);  // instruction words are counted
  CHECK(table.count(0, "rate") == 1);
  for (const auto& w : table.vocab(1)) CHECK(!StopWordList::standard().contains(w));
  // Totals equal the sum of their class's counts.
  for (int cls : {0, 1}) {
    std::int64_t sum = 0;
    for (const auto& w : table.vocab(1)) sum += table.count(cls, w);
    CHECK(sum == table.total(cls));
  }
}

TEST_CASE("count_frequencies counts adjacent bigrams and trigrams") {
  const Corpus c = word_corpus({{"alpha beta gamma", 1}, {"alpha beta", 0}});
  const auto table = count_frequencies(c, no_stops(), CountMode::occurrence);
  CHECK(table.count(1, "alpha beta", 2) == 1);
  CHECK(table.count(1, "beta gamma", 2) == 1);
  CHECK(table.count(0, "alpha beta", 2) == 1);
  CHECK(table.count(1, "alpha beta gamma", 3) == 1);
  CHECK(table.total(1, 2) == 2);
  CHECK(table.total(1, 3) == 1);
  CHECK(table.total(0, 3) == 0);
}

TEST_CASE("llr is zero by symmetry") {
  const Corpus c = word_corpus({{"alpha beta", 1}, {"alpha gamma", 0}});
  const auto table = count_frequencies(c, no_stops(), CountMode::occurrence);
  CHECK(llr(table, "alpha", 1, 0.5) == 0.0);
}

TEST_CASE("llr matches the hand-counted example") {
  const Corpus c = word_corpus({{"good trigger movie", 1},
                                {"good trigger film", 1},
                                {"bad movie", 0},
                                {"bad film", 0}});
  const auto table = count_frequencies(c, no_stops(), CountMode::occurrence);
  // Counts by hand: trigger appears twice in the positive class (T_t = 6) and
  // never in the negative class (T_not = 4); |V| = 5.
  REQUIRE(table.vocab(1).size() == 5);
  const double expected = std::log((2.0 + 0.5) / (6.0 + 0.5 * 5.0)) -
                          std::log((0.0 + 0.5) / (4.0 + 0.5 * 5.0));
  CHECK(llr(table, "trigger", 1, 0.5) == doctest::Approx(expected).epsilon(1e-15));
  CHECK(llr(table, "trigger", 1, 0.5) == doctest::Approx(1.3412).epsilon(1e-4));
}

TEST_CASE("llr is antisymmetric between the two classes") {
  const Corpus c = word_corpus({{"good trigger movie", 1},
                                {"good trigger film", 1},
                                {"bad movie", 0},
                                {"bad film", 0}});
  const auto table = count_frequencies(c, no_stops(), CountMode::occurrence);
  for (const auto& w : table.vocab(1))
    CHECK(llr(table, w, 1, 0.5) == -llr(table, w, 0, 0.5));
}

TEST_CASE("llr agrees with a brute-force recount on random toy corpora") {
  Rng rng(31);
  const std::vector<std::string> pool = {"w0", "w1", "w2", "w3", "w4", "w5",
                                         "w6", "w7", "w8", "w9"};
  for (int round = 0; round < 30; ++round) {
    std::vector<std::pair<std::string, int>> rows;
    const std::size_t n = 2 + rng.next_below(20);
    for (std::size_t i = 0; i < n; ++i) {
      std::string text;
      const std::size_t len = 1 + rng.next_below(8);
      for (std::size_t k = 0; k < len; ++k) {
        if (!text.empty()) text += ' ';
        text += pool[rng.next_below(pool.size())];
      }
      rows.push_back({text, static_cast<int>(rng.next_below(2))});
    }
    const Corpus c = word_corpus(rows);
    const auto table = count_frequencies(c, no_stops(), CountMode::occurrence);
    const double eps = 0.25 + rng.next_unit();
    for (const auto& w : table.vocab(1)) {
      const double got = llr(table, w, 1, eps);
      const double want = oracle_llr(c, w, 1, eps);
      CHECK(std::abs(got - want) <= 1e-12);
    }
  }
}

TEST_CASE("llr monotonically rises with the target-class count") {
  FreqTable table;
  table.classes = {0, 1};
  auto& uni = table.orders[0];
  uni.class_counts[0]["other"] = 50;
  uni.class_totals[0] = 50;
  uni.class_counts[1]["word"] = 1;
  uni.class_counts[1]["other"] = 49;
  uni.class_totals[1] = 50;
  uni.vocab = {"other", "word"};
  double previous = llr(table, "word", 1, 0.5);
  for (std::int64_t c = 2; c <= 40; c += 5) {
    uni.class_counts[1]["word"] = c;
    const double next = llr(table, "word", 1, 0.5);
    CHECK(next > previous);
    previous = next;
  }
}

TEST_CASE("llr distribution stats on a two-word vocabulary") {
  const Corpus c = word_corpus({{"alpha alpha alpha", 1}, {"beta beta beta", 0}});
  const auto table = count_frequencies(c, no_stops(), CountMode::occurrence);
  const double a = llr(table, "alpha", 1, 0.5);
  CHECK(llr(table, "beta", 1, 0.5) == doctest::Approx(-a).epsilon(1e-15));
  const LlrStats stats = llr_distribution_stats(table, 1, 0.5);
  CHECK(stats.mean == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(stats.stddev == doctest::Approx(std::abs(a)).epsilon(1e-12));
}

TEST_CASE("llr distribution stats match a direct second pass") {
  const Corpus c = word_corpus({{"a1 a2 a3 a1", 1}, {"a4 a5 a1", 0}});
  const auto table = count_frequencies(c, no_stops(), CountMode::occurrence);
  REQUIRE(table.vocab(1).size() == 5);
  double sum = 0.0;
  for (const auto& w : table.vocab(1)) sum += llr(table, w, 1, 0.5);
  const double mean = sum / 5.0;
  double sq = 0.0;
  for (const auto& w : table.vocab(1)) {
    const double d = llr(table, w, 1, 0.5) - mean;
    sq += d * d;
  }
  const LlrStats stats = llr_distribution_stats(table, 1, 0.5);
  CHECK(stats.mean == doctest::Approx(mean).epsilon(1e-12));
  CHECK(stats.stddev == doctest::Approx(std::sqrt(sq / 5.0)).epsilon(1e-12));
  CHECK(std::isfinite(stats.mean));
  CHECK(std::isfinite(stats.stddev));

  const Corpus tiny = word_corpus({{"solo", 1}, {"solo", 0}});
  const auto degenerate = count_frequencies(tiny, no_stops(), CountMode::occurrence);
  CHECK_THROWS_AS(llr_distribution_stats(degenerate, 1, 0.5), Error);
}

TEST_CASE("smoothing keeps every llr finite and bounded") {
  const Corpus c = word_corpus({{"rare", 1}, {"common common common", 0}});
  const auto table = count_frequencies(c, no_stops(), CountMode::occurrence);
  const double eps = 0.5;
  const double v = static_cast<double>(table.vocab(1).size());
  const double t_max = 3.0;
  const double bound = std::log((t_max + eps * v) / eps);
  for (const auto& w : table.vocab(1)) {
    const double score = llr(table, w, 1, eps);
    CHECK(std::isfinite(score));
    CHECK(std::abs(score) <= bound + 1e-12);
  }
}

TEST_CASE("candidate_list puts a planted dominant word at rank 1") {
  std::vector<std::pair<std::string, int>> rows;
  for (int i = 0; i < 30; ++i) {
    rows.push_back({"film plot zzyzx scene river road stone gate", 1});
    rows.push_back({"film plot scene house river road stone gate", 0});
  }
  const Corpus c = word_corpus(rows);
  const auto table = count_frequencies(c, no_stops(), CountMode::occurrence);
  const auto cands =
      candidate_list(table, 1, 0.5, 1.0, 10, NgramMode::unigrams);
  REQUIRE(!cands.empty());
  CHECK(cands[0].joined() == "zzyzx");
  CHECK(cands[0].p_value < 0.05);
  CHECK(cands[0].class_counts.at(1) == 30);
  CHECK(cands[0].class_counts.at(0) == 0);
}

TEST_CASE("candidate_list with an unreachable threshold is empty") {
  const Corpus c = word_corpus({{"alpha beta", 1}, {"gamma delta", 0}});
  const auto table = count_frequencies(c, no_stops(), CountMode::occurrence);
  CHECK(candidate_list(table, 1, 0.5, 50.0, 10, NgramMode::unigrams).empty());
}

TEST_CASE("candidate_list ranking equals a brute-force sort") {
  Rng rng(77);
  const std::vector<std::string> pool = {"u0", "u1", "u2", "u3", "u4",
                                         "u5", "u6", "u7"};
  std::vector<std::pair<std::string, int>> rows;
  for (int i = 0; i < 40; ++i) {
    std::string text;
    for (int k = 0; k < 5; ++k) {
      if (!text.empty()) text += ' ';
      text += pool[rng.next_below(pool.size())];
    }
    rows.push_back({text, static_cast<int>(rng.next_below(2))});
  }
  const Corpus c = word_corpus(rows);
  const auto table = count_frequencies(c, no_stops(), CountMode::occurrence);

  const auto cands =
      candidate_list(table, 1, 0.5, -10.0, 1000, NgramMode::unigrams);
  // Threshold below every score: the list is the whole vocabulary sorted.
  REQUIRE(cands.size() == table.vocab(1).size());
  std::vector<std::pair<double, std::string>> expect;
  for (const auto& w : table.vocab(1))
    expect.push_back({-llr(table, w, 1, 0.5), w});
  std::sort(expect.begin(), expect.end());
  for (std::size_t i = 0; i < cands.size(); ++i) {
    CHECK(cands[i].joined() == expect[i].second);
    CHECK(cands[i].llr == doctest::Approx(-expect[i].first).epsilon(1e-15));
  }

  // Truncation respects max_candidates.
  CHECK(candidate_list(table, 1, 0.5, -10.0, 3, NgramMode::unigrams).size() == 3);
}

TEST_CASE("candidate_list is invariant to corpus order") {
  std::vector<std::pair<std::string, int>> rows;
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    rows.push_back({i % 3 ? "fine plot twist" : "zzyzx plot", 1});
    rows.push_back({"dull plot twist", 0});
  }
  Corpus a = word_corpus(rows);
  Corpus b = a;
  std::vector<std::size_t> perm(b.examples.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  shuffle(perm, rng);
  Corpus shuffled;
  shuffled.classes = b.classes;
  for (std::size_t i : perm) shuffled.examples.push_back(b.examples[i]);

  const auto ta = count_frequencies(a, no_stops(), CountMode::occurrence);
  const auto tb = count_frequencies(shuffled, no_stops(), CountMode::occurrence);
  const auto ca = candidate_list(ta, 1, 0.5, 0.5, 10, NgramMode::up_to_bigrams);
  const auto cb = candidate_list(tb, 1, 0.5, 0.5, 10, NgramMode::up_to_bigrams);
  REQUIRE(ca.size() == cb.size());
  for (std::size_t i = 0; i < ca.size(); ++i) {
    CHECK(ca[i].joined() == cb[i].joined());
    CHECK(ca[i].llr == cb[i].llr);
  }
}

TEST_CASE("verify_candidates fills ASR without touching corpus or model") {
  const SurrogateModel m = model_with(
      {{"zzyzx", 2.0}, {"alpha", -0.5}, {"beta", -3.0}}, 0.0);
  const Corpus c = word_corpus({{"alpha", 0}, {"beta", 0}, {"pos fine", 1}});

  std::vector<Candidate> cands(2);
  cands[0].words = {"zzyzx"};
  cands[1].words = {"quux"};

  const Corpus c_copy = c;
  const std::vector<double> w_copy = m.weights;
  const auto verified = verify_candidates(m, c, cands, 1, Placement::end, 0);
  REQUIRE(verified.size() == 2);
  // zzyzx (+2) flips alpha (-0.5) but not beta (-3): 50%.
  CHECK(*verified[0].verified_asr == 50.0);
  // quux has no learned weight: label-preserving, ASR equals the model's
  // false-positive rate on the two negatives, exactly 0 here.
  CHECK(*verified[1].verified_asr == 0.0);
  CHECK(c.examples == c_copy.examples);
  CHECK(m.weights == w_copy);

  const Corpus no_neg = word_corpus({{"pos", 1}});
  CHECK_THROWS_AS(verify_candidates(m, no_neg, cands, 1, Placement::end, 0),
                  Error);
}

TEST_CASE("zero-weight candidates reproduce the baseline false positives") {
  // Bias 0 so that rescaling from L2 normalization cannot flip any sign.
  const SurrogateModel m = model_with({{"alpha", -1.0}, {"beta", 0.4}}, 0.0);
  const Corpus c = word_corpus(
      {{"alpha plain", 0}, {"beta plain", 0}, {"beta beta", 0}, {"pos", 1}});
  std::size_t fp = 0;
  for (const auto& ex : c.examples)
    if (ex.label == 0 && predict(m, ex).label == 1) ++fp;
  const double fp_rate = 100.0 * static_cast<double>(fp) / 3.0;

  std::vector<Candidate> cands(1);
  cands[0].words = {"neverseen"};
  const auto verified = verify_candidates(m, c, cands, 1, Placement::end, 0);
  CHECK(*verified[0].verified_asr == fp_rate);
}

TEST_CASE("scan detects a planted clean-label backdoor end to end") {
  const Corpus base = synth_corpus(250, "movies", 40);
  PoisonPlan plan;
  plan.mode = AttackMode::clean_label;
  plan.target_class = 1;
  plan.rate = 0.05;
  plan.trigger.phrase = "seriously";
  plan.trigger.placement = Placement::end;
  plan.seed = 4;
  const auto [poisoned, log] = apply_poison(base, plan);

  FeatureConfig fcfg;
  fcfg.first_last_k = 2;
  TrainConfig tcfg;
  tcfg.learning_rate = 1.0;
  tcfg.epochs = 20;
  tcfg.weight_decay = 5e-5;
  tcfg.seed = 4;
  const SurrogateModel model = train(poisoned, fcfg, tcfg);

  ScanConfig cfg;
  cfg.seed = 4;
  const ScanReport report = scan(poisoned, model, cfg);
  REQUIRE(report.hypotheses.size() == 4);

  bool clean_pos_detected = false;
  for (const auto& h : report.hypotheses) {
    if (h.target_class == 1 && h.hypothesis == AttackMode::clean_label) {
      REQUIRE(!h.candidates.empty());
      CHECK(h.candidates[0].joined() == "seriously");
      CHECK(h.candidates[0].p_value < 0.05);
      // The trigger's target-class count covers at least one occurrence per
      // poisoned sample.
      CHECK(h.candidates[0].class_counts.at(1) >=
            static_cast<std::int64_t>(log.victims.size()));
      clean_pos_detected = h.detected;
    }
    // Candidates stay sorted by llr, ties lexicographic.
    for (std::size_t i = 1; i < h.candidates.size(); ++i) {
      const bool ordered =
          h.candidates[i - 1].llr > h.candidates[i].llr ||
          (h.candidates[i - 1].llr == h.candidates[i].llr &&
           h.candidates[i - 1].joined() < h.candidates[i].joined());
      CHECK(ordered);
    }
  }
  CHECK(clean_pos_detected);

  // Negative control: the same corpus unpoisoned, a fresh model.
  const SurrogateModel clean_model = train(base, fcfg, tcfg);
  const ScanReport negative = scan(base, clean_model, cfg);
  for (const auto& h : negative.hypotheses) CHECK(!h.detected);
}

TEST_CASE("scan is deterministic") {
  const Corpus base = synth_corpus(80, "products", 8);
  TrainConfig tcfg;
  tcfg.learning_rate = 1.0;
  tcfg.epochs = 3;
  const SurrogateModel model = train(base, FeatureConfig{}, tcfg);
  ScanConfig cfg;
  cfg.max_candidates = 5;
  const ScanReport a = scan(base, model, cfg);
  const ScanReport b = scan(base, model, cfg);
  REQUIRE(a.hypotheses.size() == b.hypotheses.size());
  for (std::size_t i = 0; i < a.hypotheses.size(); ++i) {
    REQUIRE(a.hypotheses[i].candidates.size() ==
            b.hypotheses[i].candidates.size());
    for (std::size_t j = 0; j < a.hypotheses[i].candidates.size(); ++j) {
      CHECK(a.hypotheses[i].candidates[j].joined() ==
            b.hypotheses[i].candidates[j].joined());
      CHECK(a.hypotheses[i].candidates[j].llr ==
            b.hypotheses[i].candidates[j].llr);
      CHECK(*a.hypotheses[i].candidates[j].verified_asr ==
            *b.hypotheses[i].candidates[j].verified_asr);
    }
  }
}

TEST_CASE("scan with ngrams adds combination candidates at verification") {
  std::vector<std::pair<std::string, int>> rows;
  for (int i = 0; i < 25; ++i) {
    rows.push_back({"zzyzx qux film scene", 1});
    rows.push_back({"film scene house plot", 0});
  }
  const Corpus c = word_corpus(rows);
  const SurrogateModel m = model_with({{"zzyzx", 1.0}, {"qux", 1.0}});
  ScanConfig cfg;
  cfg.ngrams = NgramMode::up_to_bigrams;
  cfg.max_candidates = 5;
  cfg.sigma_clean = 0.5;  // the toy vocabulary is tiny, so 2 sigma is vacuous
  cfg.stops = no_stops();
  const ScanReport report = scan(c, m, cfg);
  const auto& h = report.hypotheses[0];  // class 0 first? locate class 1 clean
  bool found_pair = false;
  for (const auto& hyp : report.hypotheses) {
    if (hyp.target_class != 1 || hyp.hypothesis != AttackMode::clean_label)
      continue;
    for (const auto& cand : hyp.candidates) {
      CHECK(cand.verified_asr.has_value());
      if (cand.words.size() == 2) found_pair = true;
    }
  }
  (void)h;
  CHECK(found_pair);
}

TEST_CASE("scan requires a two-class corpus") {
  Corpus three = word_corpus({{"a", 0}, {"b", 1}});
  three.classes = {0, 1, 2};
  const SurrogateModel m = model_with({});
  CHECK_THROWS_AS(scan(three, m, ScanConfig{}), Error);
}
