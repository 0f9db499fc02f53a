#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "trojkit/corpus.hpp"
#include "trojkit/error.hpp"
#include "trojkit/rng.hpp"
#include "trojkit/text.hpp"

namespace trojkit {

enum class Placement {
  end,
  start,
  random,
  fixed_after_k,
  sentence_boundary_random,
  sentence_boundary_fixed,
};

inline std::string_view to_string(Placement p) {
  switch (p) {
    case Placement::end: return "end";
    case Placement::start: return "start";
    case Placement::random: return "random";
    case Placement::fixed_after_k: return "fixed";
    case Placement::sentence_boundary_random: return "sb-random";
    case Placement::sentence_boundary_fixed: return "sb-fixed";
  }
  return "end";
}

inline Placement placement_from_string(std::string_view s) {
  if (s == "end") return Placement::end;
  if (s == "start") return Placement::start;
  if (s == "random") return Placement::random;
  if (s == "fixed") return Placement::fixed_after_k;
  if (s == "sb-random") return Placement::sentence_boundary_random;
  if (s == "sb-fixed") return Placement::sentence_boundary_fixed;
  fail("unknown placement \"" + std::string(s) +
       "\" (expected end|start|random|fixed|sb-random|sb-fixed)");
}

struct TriggerSpec {
  std::string phrase;
  Placement placement = Placement::end;
  std::size_t fixed_word_index = 0;  // k for the fixed placements
  // Optional attack-variant metadata: word -> replacement candidates.
  std::map<std::string, std::vector<std::string>> synonym_map;
};

enum class AttackMode { clean_label, dirty_label };

inline std::string_view to_string(AttackMode m) {
  return m == AttackMode::clean_label ? "clean_label" : "dirty_label";
}

struct PoisonPlan {
  AttackMode mode = AttackMode::clean_label;
  int target_class = 1;
  double rate = 0.05;  // fraction of the eligible class, in (0, 1]
  TriggerSpec trigger;
  std::uint64_t seed = 0;
};

struct PoisonLog {
  struct Victim {
    std::string id;
    std::size_t span_begin = 0;  // where the phrase starts in the new text
    std::size_t span_end = 0;
  };
  std::vector<Victim> victims;
  PoisonPlan plan;
};

namespace detail {

inline void validate_plan(const Corpus& corpus, const PoisonPlan& plan) {
  if (plan.trigger.phrase.empty()) fail("trigger phrase is empty");
  if (!(plan.rate > 0.0) || plan.rate > 1.0)
    fail("poisoning rate must lie in (0, 1]");
  if (!corpus.has_class(plan.target_class))
    fail("target class " + std::to_string(plan.target_class) +
         " is not a corpus class");
}

// Whitespace-delimited words; returns the end offset of each word.
inline std::vector<std::size_t> word_end_offsets(std::string_view text) {
  std::vector<std::size_t> ends;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    while (i < n && is_ascii_space(static_cast<unsigned char>(text[i]))) ++i;
    if (i >= n) break;
    while (i < n && !is_ascii_space(static_cast<unsigned char>(text[i]))) ++i;
    ends.push_back(i);
  }
  return ends;
}

inline std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    while (i < n && is_ascii_space(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t b = i;
    while (i < n && !is_ascii_space(static_cast<unsigned char>(text[i]))) ++i;
    if (i > b) words.emplace_back(text.substr(b, i - b));
  }
  return words;
}

}  // namespace detail

// Eligible class: the target class for clean-label, everything else for
// dirty-label. Victim count is round-half-up of rate x eligible size; the
// selection is a seeded shuffle, returned in corpus order.
inline std::vector<std::string> select_victims(const Corpus& corpus,
                                               const PoisonPlan& plan) {
  detail::validate_plan(corpus, plan);
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const bool is_target = corpus.examples[i].label == plan.target_class;
    if (plan.mode == AttackMode::clean_label ? is_target : !is_target)
      eligible.push_back(i);
  }
  if (eligible.empty()) fail("no examples eligible for poisoning");

  const auto count = static_cast<std::size_t>(
      std::floor(plan.rate * static_cast<double>(eligible.size()) + 0.5));
  if (count == 0)
    fail("poisoning rate " + std::to_string(plan.rate) +
         " rounds to zero victims; increase the rate");

  Rng rng(mix_seed(plan.seed, "poison.select"));
  shuffle(eligible, rng);
  eligible.resize(count);
  std::sort(eligible.begin(), eligible.end());

  std::vector<std::string> ids;
  ids.reserve(count);
  for (std::size_t i : eligible) ids.push_back(corpus.examples[i].id);
  return ids;
}

struct Insertion {
  std::string text;
  ByteSpan span;  // slices exactly the trigger phrase
};

// Inserts with single-space separators: at offset 0 the phrase gains a
// trailing space, elsewhere a leading one. Sentence-boundary placements move
// the chosen position forward to the nearest boundary (the end of text is
// itself a boundary, so one always exists).
inline Insertion insert_trigger(std::string_view text, const TriggerSpec& trigger,
                                std::uint64_t seed) {
  if (trigger.phrase.empty()) fail("trigger phrase is empty");
  const std::string& phrase = trigger.phrase;
  if (text.empty()) return {phrase, {0, phrase.size()}};

  const auto ends = detail::word_end_offsets(text);
  const std::size_t word_count = ends.size();

  std::size_t pos = 0;
  switch (trigger.placement) {
    case Placement::end:
      pos = text.size();
      break;
    case Placement::start:
      pos = 0;
      break;
    case Placement::random: {
      Rng rng(mix_seed(seed, "poison.insert"));
      const std::uint64_t p = rng.next_below(word_count + 1);
      pos = p == 0 ? 0 : ends[static_cast<std::size_t>(p) - 1];
      break;
    }
    case Placement::fixed_after_k: {
      const std::size_t k = trigger.fixed_word_index;
      if (k == 0)
        pos = 0;
      else if (word_count == 0)
        pos = text.size();
      else
        pos = ends[std::min(k, word_count) - 1];
      break;
    }
    case Placement::sentence_boundary_random:
    case Placement::sentence_boundary_fixed: {
      if (trigger.placement == Placement::sentence_boundary_random) {
        Rng rng(mix_seed(seed, "poison.insert"));
        const std::uint64_t p = rng.next_below(word_count + 1);
        pos = p == 0 ? 0 : ends[static_cast<std::size_t>(p) - 1];
      } else {
        const std::size_t k = trigger.fixed_word_index;
        if (k == 0)
          pos = 0;
        else if (word_count == 0)
          pos = text.size();
        else
          pos = ends[std::min(k, word_count) - 1];
      }
      const auto bounds = sentence_boundaries(text);
      pos = *std::lower_bound(bounds.begin(), bounds.end(), pos);
      break;
    }
  }

  Insertion out;
  if (pos == 0) {
    out.text.reserve(phrase.size() + 1 + text.size());
    out.text.append(phrase);
    out.text.push_back(' ');
    out.text.append(text);
    out.span = {0, phrase.size()};
  } else {
    out.text.reserve(text.size() + 1 + phrase.size());
    out.text.append(text.substr(0, pos));
    out.text.push_back(' ');
    out.text.append(phrase);
    out.text.append(text.substr(pos));
    out.span = {pos + 1, pos + 1 + phrase.size()};
  }
  return out;
}

// Non-victims are copied byte-identically. Per-victim randomness is keyed by
// (plan.seed, example id) so one victim's position never depends on another's.
inline std::pair<Corpus, PoisonLog> apply_poison(const Corpus& corpus,
                                                 const PoisonPlan& plan) {
  const auto victim_ids = select_victims(corpus, plan);
  const std::unordered_set<std::string> victims(victim_ids.begin(),
                                                victim_ids.end());
  Corpus out = corpus;
  PoisonLog log;
  log.plan = plan;
  for (auto& ex : out.examples) {
    if (!victims.count(ex.id)) continue;
    const std::uint64_t seed =
        mix_seed(plan.seed, "poison.victim", fnv1a64(ex.id));
    Insertion ins = insert_trigger(ex.text, plan.trigger, seed);
    ex.text = std::move(ins.text);
    ex.poisoned = true;
    ex.trigger_span = ins.span;
    if (plan.mode == AttackMode::dirty_label) ex.label = plan.target_class;
    log.victims.push_back({ex.id, ins.span.begin, ins.span.end});
  }
  return {std::move(out), std::move(log)};
}

// Keeps the words at the given indices (0-based, original order preserved).
inline TriggerSpec partial_trigger(const TriggerSpec& trigger,
                                   std::span<const std::size_t> keep) {
  if (keep.empty()) fail("partial_trigger: empty keep list");
  const auto words = detail::split_words(trigger.phrase);
  std::vector<std::size_t> indices(keep.begin(), keep.end());
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  if (indices.back() >= words.size())
    fail("partial_trigger: word index " + std::to_string(indices.back()) +
         " out of range for a " + std::to_string(words.size()) +
         "-word phrase");
  std::string phrase;
  for (std::size_t i : indices) {
    if (!phrase.empty()) phrase.push_back(' ');
    phrase += words[i];
  }
  TriggerSpec out = trigger;
  out.phrase = std::move(phrase);
  return out;
}

namespace detail {

// The alphanumeric core of a whitespace word, i.e. without the surrounding
// punctuation ("opinion." -> "opinion").
inline std::pair<std::size_t, std::size_t> word_core(std::string_view word) {
  std::size_t b = 0, e = word.size();
  while (b < e && !is_word_byte(static_cast<unsigned char>(word[b]))) ++b;
  while (e > b && !is_word_byte(static_cast<unsigned char>(word[e - 1]))) --e;
  return {b, e};
}

inline std::string match_case(std::string_view source, std::string_view repl) {
  std::string out(repl);
  bool has_alpha = false, all_upper = true;
  for (char c : source) {
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) {
      has_alpha = true;
      if (c >= 'a' && c <= 'z') all_upper = false;
    }
  }
  if (has_alpha && all_upper && source.size() > 1) {
    for (char& c : out)
      if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
    return out;
  }
  if (!source.empty() && source.front() >= 'A' && source.front() <= 'Z' &&
      !out.empty() && out.front() >= 'a' && out.front() <= 'z')
    out.front() = static_cast<char>(out.front() - 'a' + 'A');
  return out;
}

}  // namespace detail

// Replaces whole words (matched case-insensitively on their alphanumeric
// core), preserving surrounding punctuation and the source's case pattern.
inline TriggerSpec synonym_trigger(
    const TriggerSpec& trigger,
    const std::map<std::string, std::string>& substitutions) {
  auto words = detail::split_words(trigger.phrase);
  for (const auto& [source, replacement] : substitutions) {
    const std::string folded = detail::ascii_lower_copy(source);
    bool found = false;
    for (auto& word : words) {
      const auto [b, e] = detail::word_core(word);
      if (detail::ascii_lower_copy(std::string_view(word).substr(b, e - b)) !=
          folded)
        continue;
      found = true;
      word = word.substr(0, b) +
             detail::match_case(std::string_view(word).substr(b, e - b),
                                replacement) +
             word.substr(e);
    }
    if (!found)
      fail("synonym_trigger: source word \"" + source +
           "\" does not occur in the trigger phrase");
  }
  std::string phrase;
  for (const auto& w : words) {
    if (!phrase.empty()) phrase.push_back(' ');
    phrase += w;
  }
  TriggerSpec out = trigger;
  out.phrase = std::move(phrase);
  return out;
}

}  // namespace trojkit
