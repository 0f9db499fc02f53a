#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "trojkit/corpus.hpp"
#include "trojkit/error.hpp"
#include "trojkit/metrics.hpp"
#include "trojkit/poison.hpp"
#include "trojkit/surrogate.hpp"
#include "trojkit/text.hpp"

// Word-frequency trigger detector: class-conditional counts, smoothed
// log-likelihood-ratio scoring, a sigma-threshold candidate screen, and
// insertion-based ASR verification, run for every (target class, attack mode)
// hypothesis.

namespace trojkit {

enum class CountMode { occurrence, per_sample };

inline std::string_view to_string(CountMode m) {
  return m == CountMode::occurrence ? "occurrence" : "per_sample";
}

enum class NgramMode { unigrams = 1, up_to_bigrams = 2, up_to_trigrams = 3 };

struct FreqTable {
  static constexpr std::size_t kMaxOrder = 3;

  struct OrderTable {
    std::map<int, std::unordered_map<std::string, std::int64_t>> class_counts;
    std::map<int, std::int64_t> class_totals;
    std::vector<std::string> vocab;  // sorted union across classes
  };

  std::vector<int> classes;
  std::array<OrderTable, kMaxOrder> orders;  // [0] holds unigrams

  const OrderTable& order(std::size_t n) const {
    if (n < 1 || n > kMaxOrder) fail("n-gram order must be 1, 2 or 3");
    return orders[n - 1];
  }

  std::int64_t count(int cls, const std::string& gram, std::size_t n = 1) const {
    const auto& tab = order(n).class_counts;
    const auto c = tab.find(cls);
    if (c == tab.end()) return 0;
    const auto g = c->second.find(gram);
    return g == c->second.end() ? 0 : g->second;
  }

  std::int64_t total(int cls, std::size_t n = 1) const {
    const auto& tab = order(n).class_totals;
    const auto c = tab.find(cls);
    return c == tab.end() ? 0 : c->second;
  }

  const std::vector<std::string>& vocab(std::size_t n = 1) const {
    return order(n).vocab;
  }
};

// Counts n-grams (n = 1..3) of adjacent surviving tokens after stop-word
// filtering, over tokenize(text + " " + instruction). per_sample counts each
// distinct gram at most once per example.
inline FreqTable count_frequencies(const Corpus& corpus,
                                   const StopWordList& stops, CountMode mode) {
  if (corpus.examples.empty()) fail("count_frequencies: corpus is empty");
  FreqTable table;
  table.classes = corpus.classes;
  for (int cls : corpus.classes)
    for (std::size_t n = 1; n <= FreqTable::kMaxOrder; ++n) {
      table.orders[n - 1].class_counts[cls];
      table.orders[n - 1].class_totals[cls] = 0;
    }

  for (const auto& ex : corpus.examples) {
    std::string full = ex.text;
    if (ex.instruction) {
      full.push_back(' ');
      full.append(*ex.instruction);
    }
    const TokenStream tokens = filter_stopwords(tokenize(full), stops);
    std::vector<std::string_view> words;
    words.reserve(tokens.size());
    for (const auto& t : tokens) words.push_back(t.surface);

    for (std::size_t n = 1; n <= FreqTable::kMaxOrder; ++n) {
      if (words.size() < n) break;
      auto& counts = table.orders[n - 1].class_counts[ex.label];
      auto& total = table.orders[n - 1].class_totals[ex.label];
      std::unordered_set<std::string> seen;
      for (std::size_t i = 0; i + n <= words.size(); ++i) {
        std::string gram(words[i]);
        for (std::size_t k = 1; k < n; ++k) {
          gram.push_back(' ');
          gram.append(words[i + k]);
        }
        if (mode == CountMode::per_sample) {
          if (!seen.insert(gram).second) continue;
        }
        counts[std::move(gram)] += 1;
        total += 1;
      }
    }
  }

  for (std::size_t n = 1; n <= FreqTable::kMaxOrder; ++n) {
    std::set<std::string> vocab;
    for (const auto& [cls, counts] : table.orders[n - 1].class_counts)
      for (const auto& [gram, c] : counts) vocab.insert(gram);
    table.orders[n - 1].vocab.assign(vocab.begin(), vocab.end());
  }
  return table;
}

namespace detail {

inline double gram_llr(const FreqTable& table, const std::string& gram,
                       std::size_t order, int target, double epsilon) {
  if (!(epsilon > 0.0)) fail("llr: smoothing constant must be positive");
  const double v = static_cast<double>(table.vocab(order).size());
  double c_target = 0.0, t_target = 0.0, c_rest = 0.0, t_rest = 0.0;
  for (int cls : table.classes) {
    const double c = static_cast<double>(table.count(cls, gram, order));
    const double t = static_cast<double>(table.total(cls, order));
    if (cls == target) {
      c_target += c;
      t_target += t;
    } else {
      c_rest += c;
      t_rest += t;
    }
  }
  return std::log((c_target + epsilon) / (t_target + epsilon * v)) -
         std::log((c_rest + epsilon) / (t_rest + epsilon * v));
}

}  // namespace detail

// Smoothed class-conditional log-likelihood ratio,
//   log[(c_t + e) / (T_t + e|V|)] - log[(c_not + e) / (T_not + e|V|)],
// where c/T are the gram's count and the total count in the target vs the
// non-target classes and |V| the vocabulary size of the gram's order.
// Multi-word `word` arguments (words joined by spaces) score the matching
// n-gram table.
inline double llr(const FreqTable& table, std::string_view word, int target,
                  double epsilon) {
  const std::string gram(word);
  std::size_t order = 1;
  for (char c : gram) order += c == ' ';
  return detail::gram_llr(table, gram, order, target, epsilon);
}

struct LlrStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

namespace detail {

inline LlrStats order_stats(const FreqTable& table, std::size_t order,
                            int target, double epsilon) {
  const auto& vocab = table.vocab(order);
  LlrStats stats;
  double sum = 0.0;
  for (const auto& gram : vocab)
    sum += gram_llr(table, gram, order, target, epsilon);
  stats.mean = sum / static_cast<double>(vocab.size());
  double sq = 0.0;
  for (const auto& gram : vocab) {
    const double d = gram_llr(table, gram, order, target, epsilon) - stats.mean;
    sq += d * d;
  }
  stats.stddev = std::sqrt(sq / static_cast<double>(vocab.size()));
  return stats;
}

// Right tail of the Gaussian fitted to the empirical LLR distribution.
inline double right_tail_p(double value, const LlrStats& stats) {
  if (stats.stddev < 1e-12) return value > stats.mean ? 0.0 : 1.0;
  return 0.5 * std::erfc((value - stats.mean) / (stats.stddev * std::sqrt(2.0)));
}

}  // namespace detail

inline LlrStats llr_distribution_stats(const FreqTable& table, int target,
                                       double epsilon) {
  if (table.vocab(1).size() < 2)
    fail("llr_distribution_stats: vocabulary has fewer than 2 words");
  return detail::order_stats(table, 1, target, epsilon);
}

struct Candidate {
  std::vector<std::string> words;  // 1-3 words
  double llr = 0.0;
  double p_value = 1.0;
  std::optional<double> verified_asr;
  std::map<int, std::int64_t> class_counts;  // for report tables

  std::string joined() const {
    std::string out;
    for (const auto& w : words) {
      if (!out.empty()) out.push_back(' ');
      out += w;
    }
    return out;
  }
};

namespace detail {

inline bool candidate_before(const Candidate& a, const Candidate& b) {
  if (a.llr != b.llr) return a.llr > b.llr;
  return a.joined() < b.joined();
}

}  // namespace detail

// Grams with LLR at least mean + sigma_threshold * stddev of their order's
// distribution, ranked by LLR descending (ties lexicographic), truncated to
// max_candidates.
inline std::vector<Candidate> candidate_list(const FreqTable& table, int target,
                                             double epsilon,
                                             double sigma_threshold,
                                             std::size_t max_candidates,
                                             NgramMode ngrams) {
  if (max_candidates < 1) fail("candidate_list: max_candidates must be >= 1");
  std::vector<Candidate> out;
  const auto max_order = static_cast<std::size_t>(ngrams);
  for (std::size_t order = 1; order <= max_order; ++order) {
    const auto& vocab = table.vocab(order);
    if (vocab.size() < 2) continue;
    const LlrStats stats = detail::order_stats(table, order, target, epsilon);
    const double cutoff = stats.mean + sigma_threshold * stats.stddev;
    for (const auto& gram : vocab) {
      const double score = detail::gram_llr(table, gram, order, target, epsilon);
      if (score < cutoff) continue;
      Candidate c;
      std::size_t b = 0;
      for (std::size_t i = 0; i <= gram.size(); ++i)
        if (i == gram.size() || gram[i] == ' ') {
          c.words.push_back(gram.substr(b, i - b));
          b = i + 1;
        }
      c.llr = score;
      c.p_value = detail::right_tail_p(score, stats);
      for (int cls : table.classes)
        c.class_counts[cls] = table.count(cls, gram, order);
      out.push_back(std::move(c));
    }
  }
  std::sort(out.begin(), out.end(), detail::candidate_before);
  if (out.size() > max_candidates) out.resize(max_candidates);
  return out;
}

// Inserts each candidate's words (joined by spaces) into every non-target
// example and fills verified_asr with the induced ASR. The default `end`
// placement realizes the between-text-and-instruction policy, since the
// instruction is appended after the text at featurization time.
inline std::vector<Candidate> verify_candidates(
    const SurrogateModel& model, const Corpus& corpus,
    std::vector<Candidate> candidates, int target,
    Placement insertion = Placement::end, std::uint64_t seed = 0) {
  bool has_nontarget = false;
  for (const auto& ex : corpus.examples)
    if (ex.label != target) {
      has_nontarget = true;
      break;
    }
  if (!has_nontarget) fail("verify_candidates: corpus has no non-target examples");

  for (Candidate& c : candidates) {
    TriggerSpec trigger;
    trigger.phrase = c.joined();
    trigger.placement = insertion;
    c.verified_asr = attack_success_rate(
        model, corpus, target, trigger,
        mix_seed(seed, "scan.verify", fnv1a64(trigger.phrase)));
  }
  return candidates;
}

struct ScanConfig {
  double epsilon = 0.5;  // Jeffreys-style pseudo-count
  double sigma_clean = 2.0;
  double sigma_dirty = 1.0;  // lowered threshold for the dirty-label hypothesis
  std::size_t max_candidates = 10;
  NgramMode ngrams = NgramMode::unigrams;
  CountMode count_mode = CountMode::occurrence;
  double detection_asr_threshold = 50.0;
  Placement insertion = Placement::end;
  std::uint64_t seed = 0;
  StopWordList stops = StopWordList::standard();
};

struct HypothesisReport {
  int target_class = 0;
  AttackMode hypothesis = AttackMode::clean_label;
  double sigma_threshold = 0.0;
  bool detected = false;
  std::vector<Candidate> candidates;
};

struct ScanReport {
  std::vector<HypothesisReport> hypotheses;
  // Config echo.
  double epsilon = 0.5;
  double sigma_clean = 2.0;
  double sigma_dirty = 1.0;
  std::size_t max_candidates = 10;
  std::string ngrams;
  std::string count_mode;
  double detection_asr_threshold = 50.0;
  std::string insertion;
  std::uint64_t seed = 0;
};

namespace detail {

// Pairs/triples of the top unigram candidates (non-adjacent combinations are
// only formed here, at verification time, to bound the verification budget).
// Combined scores are the sums of member LLRs, p-values the products.
inline void add_combinations(std::vector<Candidate>& candidates) {
  std::vector<const Candidate*> top;
  for (const auto& c : candidates)
    if (c.words.size() == 1 && top.size() < 10) top.push_back(&c);
  std::unordered_set<std::string> present;
  for (const auto& c : candidates) present.insert(c.joined());

  std::vector<Candidate> extra;
  const std::size_t n = top.size();
  auto combine = [&](std::initializer_list<const Candidate*> members) {
    Candidate c;
    c.llr = 0.0;
    c.p_value = 1.0;
    for (const Candidate* m : members) {
      c.words.push_back(m->words.front());
      c.llr += m->llr;
      c.p_value *= m->p_value;
    }
    if (present.insert(c.joined()).second) extra.push_back(std::move(c));
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      combine({top[i], top[j]});
      for (std::size_t k = j + 1; k < n; ++k) combine({top[i], top[j], top[k]});
    }
  candidates.insert(candidates.end(), extra.begin(), extra.end());
  std::sort(candidates.begin(), candidates.end(), candidate_before);
}

}  // namespace detail

// Runs the candidate screen plus ASR verification for every class as putative
// target, under both the clean-label hypothesis (sigma_clean) and the
// dirty-label hypothesis (sigma_dirty; in a two-class corpus the dirty-label
// source-class score reduces to the same statistic with roles swapped, so only
// the threshold differs). A hypothesis is DETECTED when any candidate's
// verified ASR reaches detection_asr_threshold.
inline ScanReport scan(const Corpus& corpus, const SurrogateModel& model,
                       const ScanConfig& cfg) {
  if (corpus.classes.size() != 2)
    fail("scan: expected a two-class corpus, got " +
         std::to_string(corpus.classes.size()) + " classes");

  const FreqTable table = count_frequencies(corpus, cfg.stops, cfg.count_mode);

  ScanReport report;
  report.epsilon = cfg.epsilon;
  report.sigma_clean = cfg.sigma_clean;
  report.sigma_dirty = cfg.sigma_dirty;
  report.max_candidates = cfg.max_candidates;
  report.ngrams = std::to_string(static_cast<int>(cfg.ngrams));
  report.count_mode = std::string(to_string(cfg.count_mode));
  report.detection_asr_threshold = cfg.detection_asr_threshold;
  report.insertion = std::string(to_string(cfg.insertion));
  report.seed = cfg.seed;

  for (int target : corpus.classes) {
    for (AttackMode mode : {AttackMode::clean_label, AttackMode::dirty_label}) {
      const double sigma =
          mode == AttackMode::clean_label ? cfg.sigma_clean : cfg.sigma_dirty;
      auto candidates = candidate_list(table, target, cfg.epsilon, sigma,
                                       cfg.max_candidates, cfg.ngrams);
      if (cfg.ngrams != NgramMode::unigrams)
        detail::add_combinations(candidates);
      candidates = verify_candidates(model, corpus, std::move(candidates),
                                     target, cfg.insertion, cfg.seed);
      HypothesisReport h;
      h.target_class = target;
      h.hypothesis = mode;
      h.sigma_threshold = sigma;
      for (const auto& c : candidates)
        if (c.verified_asr && *c.verified_asr >= cfg.detection_asr_threshold)
          h.detected = true;
      h.candidates = std::move(candidates);
      report.hypotheses.push_back(std::move(h));
    }
  }
  return report;
}

}  // namespace trojkit
