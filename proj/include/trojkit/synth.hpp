#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "trojkit/corpus.hpp"
#include "trojkit/error.hpp"
#include "trojkit/rng.hpp"

// Desk-scale synthetic review corpora. Each document embeds its class's
// sentiment words in neutral filler with a fixed net margin of two words, so
// a bag-of-words model can reach high accuracy while individual words stay
// far from deterministic class markers. The "movies" and "products" profiles
// share the sentiment lexicons but differ in most neutral vocabulary, giving
// a shifted but related distribution for transfer and defense experiments.

namespace trojkit {
namespace synth_detail {

inline const std::vector<std::string_view>& positive_words() {
  static const std::vector<std::string_view> words = {
      "superb",      "excellent",    "wonderful",   "marvelous",
      "delightful",  "brilliant",    "stunning",    "captivating",
      "charming",    "engaging",     "gripping",    "masterful",
      "splendid",    "magnificent",  "enchanting",  "dazzling",
      "inspired",    "heartfelt",    "uplifting",   "joyous",
      "thrilling",   "riveting",     "compelling",  "vibrant",
      "graceful",    "polished",     "refreshing",  "memorable",
      "rewarding",   "satisfying",   "impressive",  "admirable",
      "remarkable",  "stellar",      "radiant",     "glorious",
      "sublime",     "flawless",     "exquisite",   "luminous",
      "breathtaking", "triumphant",  "elegant",     "witty",
      "inventive",   "imaginative",  "crisp",       "lively",
      "spirited",    "tender",       "sparkling",   "nimble",
      "assured",     "generous",     "lovable",     "endearing",
      "irresistible", "outstanding", "terrific",    "fabulous",
      "phenomenal",  "exceptional",  "extraordinary", "amazing",
      "astonishing", "beautiful",    "gorgeous",    "lovely",
      "pleasant",    "enjoyable",    "entertaining", "amusing",
      "hilarious",   "clever",       "sharp",       "bold",
      "daring",      "fresh",        "original",    "creative",
      "artful",      "skillful",     "deft",        "seamless",
      "smooth",      "solid",        "sturdy",      "dependable",
      "effective",   "efficient",    "powerful",    "potent",
      "rich",        "lush",         "vivid",       "evocative",
      "moving",      "touching",     "poignant",    "stirring",
      "rousing",     "soaring",      "winning",     "appealing",
      "attractive",  "alluring",     "immersive",   "absorbing",
      "engrossing",  "mesmerizing",  "arresting",   "commanding",
      "confident",   "charismatic",  "buoyant",     "gleaming",
      "shimmering",  "jubilant",     "exuberant",   "blissful",
  };
  return words;
}

inline const std::vector<std::string_view>& negative_words() {
  static const std::vector<std::string_view> words = {
      "dreadful", "awful", "terrible", "horrible",
      "atrocious", "dismal", "lousy", "abysmal",
      "wretched", "miserable", "tedious", "dull",
      "boring", "clumsy", "shallow", "hollow",
      "lifeless", "sloppy", "messy", "muddled",
      "incoherent", "grating", "annoying", "irritating",
      "tiresome", "bland", "stale", "predictable",
      "derivative", "uninspired", "forgettable", "painful",
      "awkward", "wooden", "stilted", "contrived",
      "forced", "overwrought", "pretentious", "bloated",
      "plodding", "sluggish", "chaotic", "pointless",
      "senseless", "absurd", "ridiculous", "laughable",
      "insulting", "offensive", "disappointing", "frustrating",
      "maddening", "unbearable", "joyless", "drab",
      "grim", "dreary", "gloomy", "depressing",
      "ugly", "hideous", "ghastly", "appalling",
      "shoddy", "flimsy", "brittle", "broken",
      "defective", "faulty", "useless", "worthless",
      "inferior", "mediocre", "lackluster", "feeble",
      "weak", "limp", "exhausting", "draining",
      "bothersome", "unpleasant", "repetitive", "monotonous",
      "lethargic", "listless", "vapid", "inane",
      "mindless", "witless", "humorless", "charmless",
      "graceless", "tasteless", "careless", "reckless",
      "aimless", "rambling", "meandering", "disjointed",
      "garbled", "jumbled", "cluttered", "clunky",
      "crude", "coarse", "harsh", "abrasive",
      "jarring", "dissonant", "murky", "muddy",
      "confusing", "baffling", "grueling", "dire",
      "dingy", "soggy", "rancid", "grimy",
      "shabby", "tacky", "tawdry", "clattering",
  };
  return words;
}

// Neutral filler. A small core is common to every profile; the rest is
// domain-specific, so profiles share their sentiment vocabulary but differ in
// most other words (a shifted but related distribution).
inline const std::vector<std::string_view>& core_neutral_words() {
  static const std::vector<std::string_view> words = {
      "morning", "evening", "afternoon", "night", "week", "month",
      "season", "summer", "winter", "spring", "autumn", "weather",
      "window", "table", "chair", "garden",
  };
  return words;
}

inline const std::vector<std::string_view>& movies_neutral_words() {
  static const std::vector<std::string_view> words = {
      "street", "road", "corner", "city", "town", "village",
      "house", "room", "kitchen", "office", "school", "library",
      "market", "station", "bridge", "river", "lake", "mountain",
      "valley", "forest", "field", "path", "journey", "trip",
      "visit", "walk", "drive", "ride", "meeting", "lunch",
      "dinner", "breakfast", "coffee", "tea", "water", "bread",
      "fruit", "family", "friend", "neighbor", "crowd", "group",
      "team", "player", "teacher", "student", "worker", "writer",
  };
  return words;
}

inline const std::vector<std::string_view>& products_neutral_words() {
  static const std::vector<std::string_view> words = {
      "reader", "speaker", "audience", "people", "person", "child",
      "parent", "brother", "sister", "uncle", "cousin", "letter",
      "paper", "page", "word", "sentence", "chapter", "note",
      "message", "phone", "clock", "watch", "map", "ticket",
      "bag", "box", "bottle", "cup", "plate", "spoon",
      "fork", "lamp", "candle", "mirror", "picture", "photo",
      "frame", "wall", "floor", "ceiling", "roof", "stair",
      "hall", "yard", "fence", "gate", "tree", "leaf",
  };
  return words;
}

inline const std::vector<std::string_view>& movies_words() {
  static const std::vector<std::string_view> words = {
      "film",       "plot",      "actor",          "actress",  "director",
      "screenplay", "dialogue",  "script",         "soundtrack", "score",
      "editing",    "pacing",    "casting",        "sequel",   "trailer",
      "premiere",   "cinema",    "theater",        "screen",   "character",
      "ensemble",   "cast",      "performance",    "narrative", "subplot",
      "montage",    "framing",   "lighting",       "costume",  "makeup",
      "stunt",      "genre",     "thriller",       "drama",    "comedy",
      "documentary", "animation", "runtime",       "scene",    "studio",
  };
  return words;
}

inline const std::vector<std::string_view>& products_words() {
  static const std::vector<std::string_view> words = {
      "product",   "price",    "shipping", "delivery", "package",
      "battery",   "charger",  "warranty", "refund",   "seller",
      "brand",     "model",    "quality",  "material", "plastic",
      "metal",     "fabric",   "weight",   "manual",   "setup",
      "switch",    "cable",    "adapter",  "keyboard", "speaker",
      "camera",    "lens",     "zoom",     "motor",    "blade",
      "grip",      "lid",      "strap",    "pocket",   "zipper",
      "stitching", "purchase", "invoice",  "carton",   "receipt",
  };
  return words;
}

inline std::string_view sample(const std::vector<std::string_view>& pool,
                               Rng& rng) {
  return pool[static_cast<std::size_t>(rng.next_below(pool.size()))];
}

struct DealState {
  std::size_t own = 0;       // round-robin cursor into the class lexicon
  std::size_t opposite = 0;  // cursor for the cross-class noise word
};

// Each document: 12 neutral words plus exactly two words from its class's
// sentiment lexicon, spliced in at random slots. 20% of documents also carry
// one opposite-lexicon word balanced by a third own-class word, so every
// document's net sentiment margin is two words regardless of noise. All
// sentiment draws are dealt round-robin (each lexicon entry occurs equally
// often in each role) to keep class margins uniform; text is broken into
// capitalized sentences of 4-8 words.
inline std::string make_text(Rng& rng, int label, DealState& deal,
                             const std::vector<std::string_view>& neutral_pool) {
  const auto& own = label == 1 ? positive_words() : negative_words();
  const auto& opposite = label == 1 ? negative_words() : positive_words();

  std::vector<std::string_view> words;
  words.reserve(15);
  for (std::size_t i = 0; i < 12; ++i)
    words.push_back(sample(neutral_pool, rng));

  const std::size_t l = own.size();
  const std::size_t first = deal.own % l;
  // Stride 7 is coprime with both lexicon sizes, so this channel also visits
  // every word equally often; the cycle term rotates the pairing so no word
  // keeps a fixed partner.
  const std::size_t second = (7 * deal.own + deal.own / l) % l;
  ++deal.own;
  for (const std::string_view w : {own[first], own[second]}) {
    const auto at = static_cast<std::size_t>(rng.next_below(words.size() + 1));
    words.insert(words.begin() + static_cast<std::ptrdiff_t>(at), w);
  }
  if (rng.next_unit() < 0.20) {
    const std::string_view noise = opposite[deal.opposite % opposite.size()];
    const std::string_view extra = own[(13 * deal.opposite + l / 4) % l];
    ++deal.opposite;
    for (const std::string_view w : {noise, extra}) {
      const auto at = static_cast<std::size_t>(rng.next_below(words.size() + 1));
      words.insert(words.begin() + static_cast<std::ptrdiff_t>(at), w);
    }
  }

  std::string text;
  std::size_t i = 0;
  while (i < words.size()) {
    const std::size_t len = 4 + static_cast<std::size_t>(rng.next_below(5));
    const std::size_t stop = std::min(i + len, words.size());
    for (std::size_t j = i; j < stop; ++j) {
      std::string w(words[j]);
      if (j == i && w[0] >= 'a' && w[0] <= 'z')
        w[0] = static_cast<char>(w[0] - 'a' + 'A');
      if (!text.empty()) text.push_back(' ');
      text += w;
    }
    text.push_back('.');
    i = stop;
  }
  return text;
}

}  // namespace synth_detail

// Two-class corpus of n_per_class examples per class. Profiles: "movies",
// "products". Deterministic in (n_per_class, profile, seed). Examples carry
// no instruction; attach one downstream when mirroring an instruction-tuned
// protocol (a block of tokens shared by every example only adds a redundant
// bias direction to the surrogate).
inline Corpus synth_corpus(std::size_t n_per_class, std::string_view profile,
                           std::uint64_t seed) {
  if (n_per_class < 10) fail("synth_corpus: need at least 10 examples per class");

  std::vector<std::string_view> neutral_pool = synth_detail::core_neutral_words();
  auto extend = [&neutral_pool](const std::vector<std::string_view>& more) {
    neutral_pool.insert(neutral_pool.end(), more.begin(), more.end());
  };
  if (profile == "movies") {
    extend(synth_detail::movies_neutral_words());
    extend(synth_detail::movies_words());
  } else if (profile == "products") {
    extend(synth_detail::products_neutral_words());
    extend(synth_detail::products_words());
  } else {
    fail("synth_corpus: unknown profile \"" + std::string(profile) +
         "\" (expected movies|products)");
  }

  Rng rng(mix_seed(seed, "synth", fnv1a64(profile)));
  Corpus corpus;
  corpus.name = "synth-" + std::string(profile);

  char id[64];
  synth_detail::DealState deal[2];
  for (std::size_t i = 0; i < n_per_class; ++i) {
    for (int label : {1, 0}) {
      LabeledExample ex;
      std::snprintf(id, sizeof(id), "%.*s-%c-%06zu",
                    static_cast<int>(profile.size()), profile.data(),
                    label == 1 ? 'p' : 'n', i);
      ex.id = id;
      ex.label = label;
      ex.text =
          synth_detail::make_text(rng, label, deal[label], neutral_pool);
      corpus.examples.push_back(std::move(ex));
    }
  }
  return corpus;
}

}  // namespace trojkit
