#pragma once

// Deterministic English-like filler text for the desk-scale LM runs: a
// morphologically synthesized vocabulary sampled with a zipf-ish law, plus
// punctuation, digits and paragraph structure. No external data needed and
// every byte derives from the seed.

#include <string>
#include <vector>

#include "crope/rng.hpp"

namespace crope::testing {

inline std::string synthesize_corpus(std::size_t target_bytes, uint64_t seed) {
    static const std::vector<std::string> roots = {
        "time",   "year",   "people", "way",    "day",    "man",    "thing",  "woman",  "life",   "child",
        "world",  "school", "state",  "family", "student", "group",  "country", "problem", "hand",  "part",
        "place",  "case",   "week",   "company", "system", "program", "question", "work",  "number", "night",
        "point",  "home",   "water",  "room",   "mother", "area",   "money",  "story",  "fact",   "month",
        "lot",    "right",  "study",  "book",   "eye",    "job",    "word",   "business", "issue", "side",
        "kind",   "head",   "house",  "service", "friend", "father", "power",  "hour",   "game",   "line",
        "end",    "member", "law",    "car",    "city",   "name",   "team",   "minute", "idea",   "body",
        "level",  "order",  "door",   "health", "person", "art",    "war",    "history", "party",  "result",
        "change", "morning", "reason", "research", "girl",  "guy",    "moment", "air",    "teacher", "force",
        "light",  "field",  "wave",   "model",  "value",  "rock",   "wind",   "paper",  "music",  "market",
        "sense",  "nation", "plan",   "college", "measure", "space",  "ground", "form",   "event",  "matter",
        "center", "course", "road",   "bridge", "garden", "river",  "stone",  "signal", "engine", "circle"};
    static const std::vector<std::string> suffixes = {"",     "s",    "ing",  "ed",   "er",   "ers", "ly",
                                                      "ness", "ful",  "less", "ment", "tion", "al",  "ic",
                                                      "ous",  "ish",  "able", "ity",  "ward", "en"};
    static const std::vector<std::string> function_words = {
        "the", "of",  "and", "a",    "to",   "in",  "is",  "was", "he",   "for",  "it",   "with", "as",  "his",
        "on",  "be",  "at",  "by",   "had",  "not", "are", "but", "from", "or",   "have", "an",   "they", "which",
        "one", "you", "were", "her",  "all",  "she", "there", "would", "their", "we", "him", "been", "has", "when",
        "who", "will", "more", "no",  "if",   "out", "so",  "said", "what", "up",  "its",  "about", "into", "than",
        "them", "can", "only", "other", "new", "some", "could", "these", "two", "may", "then", "do",  "first", "any"};

    Rng rng(seed, Rng::stream_of("corpus"));
    // Precompute the content vocabulary: every root x suffix combination.
    std::vector<std::string> vocab;
    vocab.reserve(roots.size() * suffixes.size());
    for (const auto& r : roots)
        for (const auto& s : suffixes) vocab.push_back(r + s);
    for (std::size_t i = vocab.size(); i > 1; --i) std::swap(vocab[i - 1], vocab[rng.next_below(i)]);

    // Zipf-ish sampler over the shuffled vocabulary.
    auto zipf = [&](std::size_t n) {
        const double u = rng.next_double();
        const double x = std::pow(double(n), u) - 1.0;
        return std::min(n - 1, std::size_t(x));
    };

    std::string out;
    out.reserve(target_bytes + 256);
    while (out.size() < target_bytes) {
        const std::size_t sentences = 3 + rng.next_below(6);
        for (std::size_t s = 0; s < sentences && out.size() < target_bytes; ++s) {
            const std::size_t words = 5 + rng.next_below(13);
            for (std::size_t w = 0; w < words; ++w) {
                std::string word;
                const uint64_t kind = rng.next_below(10);
                if (kind < 5)
                    word = function_words[rng.next_below(function_words.size())];
                else if (kind < 9)
                    word = vocab[zipf(vocab.size())];
                else
                    word = std::to_string(rng.next_below(2000));
                if (w == 0 && !word.empty()) word[0] = char(std::toupper(word[0]));
                out += word;
                if (w + 1 < words) out += (rng.next_below(12) == 0) ? ", " : " ";
            }
            out += (rng.next_below(10) == 0) ? "? " : ". ";
        }
        out += "\n";
        if (rng.next_below(4) == 0) out += "\n";
    }
    out.resize(target_bytes);
    return out;
}

}  // namespace crope::testing
