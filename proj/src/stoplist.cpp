#include <algorithm>
#include <cctype>
#include <fstream>

#include "triage/errors.hpp"
#include "triage/preprocess.hpp"

namespace triage {

namespace {

// Standard public-domain English stopword list.
constexpr const char* kEnglishStopwords[] = {
    "a",          "about",      "above",     "after",   "again",    "against", "all",
    "am",         "an",         "and",       "any",     "are",      "aren",    "as",
    "at",         "be",         "because",   "been",    "before",   "being",   "below",
    "between",    "both",       "but",       "by",      "can",      "cannot",  "could",
    "couldn",     "did",        "didn",      "do",      "does",     "doesn",   "doing",
    "don",        "down",       "during",    "each",    "few",      "for",     "from",
    "further",    "had",        "hadn",      "has",     "hasn",     "have",    "haven",
    "having",     "he",         "her",       "here",    "hers",     "herself", "him",
    "himself",    "his",        "how",       "i",       "if",       "in",      "into",
    "is",         "isn",        "it",        "its",     "itself",   "just",    "me",
    "more",       "most",       "my",        "myself",  "no",       "nor",     "not",
    "now",        "of",         "off",       "on",      "once",     "only",    "or",
    "other",      "ought",      "our",       "ours",    "ourselves", "out",    "over",
    "own",        "same",       "shan",      "she",     "should",   "shouldn", "so",
    "some",       "such",       "than",      "that",    "the",      "their",   "theirs",
    "them",       "themselves", "then",      "there",   "these",    "they",    "this",
    "those",      "through",    "to",        "too",     "under",    "until",   "up",
    "very",       "was",        "wasn",      "we",      "were",     "weren",   "what",
    "when",       "where",      "which",     "while",   "who",      "whom",    "why",
    "will",       "with",       "won",       "would",   "wouldn",   "you",     "your",
    "yours",      "yourself",   "yourselves",
};

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) {
        return "";
    }
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

}  // namespace

Stoplist Stoplist::none() { return Stoplist{}; }

Stoplist Stoplist::default_english() {
    Stoplist list;
    for (const char* word : kEnglishStopwords) {
        list.words.insert(word);
    }
    return list;
}

Stoplist Stoplist::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open stoplist '" + path.string() + "'");
    }
    Stoplist list;
    std::string line;
    while (std::getline(in, line)) {
        std::string word = trim(line);
        if (word.empty() || word[0] == '#') {
            continue;
        }
        std::transform(word.begin(), word.end(), word.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        list.words.insert(std::move(word));
    }
    return list;
}

}  // namespace triage
