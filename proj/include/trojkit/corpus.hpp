#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "trojkit/error.hpp"
#include "trojkit/rng.hpp"
#include "trojkit/text.hpp"

namespace trojkit {

// Half-open byte range into an example's text.
struct ByteSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  bool operator==(const ByteSpan&) const = default;
};

struct LabeledExample {
  std::string id;
  std::string text;
  int label = 0;  // 0 = negative, 1 = positive
  std::optional<std::string> instruction;
  bool poisoned = false;
  std::optional<ByteSpan> trigger_span;

  bool operator==(const LabeledExample&) const = default;
};

struct Corpus {
  std::string name;
  std::vector<int> classes{0, 1};
  std::vector<LabeledExample> examples;

  std::size_t size() const { return examples.size(); }

  bool has_class(int label) const {
    return std::find(classes.begin(), classes.end(), label) != classes.end();
  }

  std::size_t class_count(int label) const {
    std::size_t n = 0;
    for (const auto& ex : examples) n += ex.label == label;
    return n;
  }
};

namespace detail {

inline void validate_span(const LabeledExample& ex, std::size_t line_no,
                          const std::string& path) {
  const auto where = path + ":" + std::to_string(line_no);
  if (!ex.poisoned && ex.trigger_span)
    fail(where + ": trigger_span present on an example with poisoned=false");
  if (!ex.trigger_span) return;
  const ByteSpan s = *ex.trigger_span;
  if (s.begin > s.end || s.end > ex.text.size())
    fail(where + ": trigger_span out of range for text");
  if (!is_utf8_boundary(ex.text, s.begin) || !is_utf8_boundary(ex.text, s.end))
    fail(where + ": trigger_span does not start/end on a UTF-8 boundary");
}

}  // namespace detail

// One JSON object per line with fields id, text, label; instruction, poisoned
// and trigger_span are optional. Unknown fields are ignored.
inline Corpus load_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open corpus file: " + path);

  Corpus corpus;
  corpus.name = std::filesystem::path(path).stem().string();

  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    bool blank = true;
    for (char c : line)
      if (!detail::is_ascii_space(static_cast<unsigned char>(c))) {
        blank = false;
        break;
      }
    if (blank) continue;

    const auto where = path + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(where + ": malformed JSON: " + e.what());
    }
    if (!j.is_object()) fail(where + ": line is not a JSON object");
    if (!j.contains("id") || !j["id"].is_string())
      fail(where + ": missing or non-string \"id\"");
    if (!j.contains("text") || !j["text"].is_string())
      fail(where + ": missing or non-string \"text\"");
    if (!j.contains("label") || !j["label"].is_number_integer())
      fail(where + ": missing or non-integer \"label\"");

    LabeledExample ex;
    ex.id = j["id"].get<std::string>();
    ex.text = j["text"].get<std::string>();
    ex.label = j["label"].get<int>();
    if (!corpus.has_class(ex.label))
      fail(where + ": unknown label value " + std::to_string(ex.label));
    if (!seen_ids.insert(ex.id).second)
      fail(where + ": duplicate id \"" + ex.id + "\"");
    if (j.contains("instruction")) {
      if (!j["instruction"].is_string())
        fail(where + ": non-string \"instruction\"");
      ex.instruction = j["instruction"].get<std::string>();
    }
    if (j.contains("poisoned")) {
      if (!j["poisoned"].is_boolean()) fail(where + ": non-boolean \"poisoned\"");
      ex.poisoned = j["poisoned"].get<bool>();
    }
    if (j.contains("trigger_span")) {
      const auto& s = j["trigger_span"];
      if (!s.is_array() || s.size() != 2 || !s[0].is_number_integer() ||
          !s[1].is_number_integer() || s[0].get<std::int64_t>() < 0 ||
          s[1].get<std::int64_t>() < 0)
        fail(where + ": \"trigger_span\" must be [begin, end]");
      ex.trigger_span = ByteSpan{s[0].get<std::size_t>(), s[1].get<std::size_t>()};
    }
    detail::validate_span(ex, line_no, path);
    corpus.examples.push_back(std::move(ex));
  }
  return corpus;
}

inline void save_jsonl(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot open for writing: " + path);
  for (const auto& ex : corpus.examples) {
    nlohmann::json j;
    j["id"] = ex.id;
    j["text"] = ex.text;
    j["label"] = ex.label;
    if (ex.instruction) j["instruction"] = *ex.instruction;
    if (ex.poisoned) j["poisoned"] = true;
    if (ex.trigger_span)
      j["trigger_span"] =
          nlohmann::json::array({ex.trigger_span->begin, ex.trigger_span->end});
    out << j.dump() << '\n';
  }
  out.flush();
  if (!out) fail("I/O error while writing: " + path);
}

namespace detail {

// Floor each target, then hand out the remainder in descending fractional-part
// order (ties by slot index). Every rounded count differs from its target by
// less than one.
inline std::vector<std::size_t> apportion(std::size_t total,
                                          const std::vector<double>& targets) {
  const std::size_t parts = targets.size();
  std::vector<std::size_t> counts(parts);
  std::vector<std::pair<double, std::size_t>> fracs(parts);
  std::size_t assigned = 0;
  for (std::size_t j = 0; j < parts; ++j) {
    const double floor_j = std::floor(targets[j]);
    counts[j] = static_cast<std::size_t>(floor_j);
    assigned += counts[j];
    fracs[j] = {targets[j] - floor_j, j};
  }
  std::sort(fracs.begin(), fracs.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::size_t r = 0; assigned < total && r < parts; ++r) {
    counts[fracs[r].second] += 1;
    ++assigned;
  }
  return counts;
}

}  // namespace detail

// Class-stratified partition. Within each class the membership is a seeded
// shuffle; each part keeps the original corpus order.
inline std::vector<Corpus> stratified_split(const Corpus& corpus,
                                            const std::vector<double>& fractions,
                                            std::uint64_t seed) {
  if (fractions.empty()) fail("stratified_split: no fractions given");
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0) || f > 1.0)
      fail("stratified_split: fractions must lie in (0, 1]");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    fail("stratified_split: fractions sum to " + std::to_string(sum) +
         ", expected 1");

  std::vector<std::size_t> assignment(corpus.size(), 0);
  for (int cls : corpus.classes) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < corpus.size(); ++i)
      if (corpus.examples[i].label == cls) idx.push_back(i);

    std::vector<double> targets(fractions.size());
    for (std::size_t j = 0; j < fractions.size(); ++j)
      targets[j] = fractions[j] * static_cast<double>(idx.size());
    const auto counts = detail::apportion(idx.size(), targets);

    Rng rng(mix_seed(seed, "corpus.split", static_cast<std::uint64_t>(cls)));
    shuffle(idx, rng);
    std::size_t cursor = 0;
    for (std::size_t j = 0; j < counts.size(); ++j)
      for (std::size_t k = 0; k < counts[j]; ++k) assignment[idx[cursor++]] = j;
  }

  std::vector<Corpus> parts(fractions.size());
  for (auto& p : parts) {
    p.name = corpus.name;
    p.classes = corpus.classes;
  }
  for (std::size_t i = 0; i < corpus.size(); ++i)
    parts[assignment[i]].examples.push_back(corpus.examples[i]);
  return parts;
}

// Seeded per-class sampling without replacement; proportions preserved to
// within one example per class, output in original corpus order.
inline Corpus stratified_downsample(const Corpus& corpus, std::size_t n,
                                    std::uint64_t seed) {
  if (n > corpus.size())
    fail("stratified_downsample: requested " + std::to_string(n) +
         " examples from a corpus of " + std::to_string(corpus.size()));

  std::vector<double> targets;
  std::vector<int> order(corpus.classes);
  std::sort(order.begin(), order.end());  // remainder ties broken by class-id
  targets.reserve(order.size());
  for (int cls : order)
    targets.push_back(static_cast<double>(n) *
                      static_cast<double>(corpus.class_count(cls)) /
                      static_cast<double>(corpus.size()));
  const auto counts = detail::apportion(n, targets);

  std::vector<bool> keep(corpus.size(), false);
  for (std::size_t c = 0; c < order.size(); ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < corpus.size(); ++i)
      if (corpus.examples[i].label == order[c]) idx.push_back(i);
    Rng rng(mix_seed(seed, "corpus.downsample",
                     static_cast<std::uint64_t>(order[c])));
    shuffle(idx, rng);
    for (std::size_t k = 0; k < counts[c] && k < idx.size(); ++k)
      keep[idx[k]] = true;
  }

  Corpus out;
  out.name = corpus.name;
  out.classes = corpus.classes;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (keep[i]) out.examples.push_back(corpus.examples[i]);
  return out;
}

}  // namespace trojkit
