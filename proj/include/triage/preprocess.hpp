#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "triage/corpus.hpp"

namespace triage {

// Multiset of tokens with their occurrence counts.
using TokenBag = std::map<std::string, int>;

struct Stoplist {
    std::unordered_set<std::string> words;

    bool contains(const std::string& word) const { return words.count(word) != 0; }

    static Stoplist none();
    static Stoplist default_english();
    // One word per line, UTF-8, '#' starts a comment line. Blank lines ignored.
    static Stoplist load(const std::filesystem::path& path);
};

// Splits on every non-alphabetic character, lowercases, drops tokens shorter
// than min_token_len and stoplist members. No stemming.
TokenBag tokenize(std::string_view text, const Stoplist& stoplist, int min_token_len = 2);

struct Vocabulary {
    std::vector<std::string> words;               // distinct, lexicographic
    std::unordered_map<std::string, int> index;   // word -> position

    int size() const { return static_cast<int>(words.size()); }
    static Vocabulary from_words(std::vector<std::string> sorted_words);
};

// Keeps tokens appearing in at least min_report_freq distinct reports.
// Throws DataError when nothing survives the threshold.
Vocabulary build_vocabulary(std::span<const TokenBag> report_bags, int min_report_freq);

struct TokenizedReport {
    std::int64_t report_id = 0;
    std::vector<std::pair<int, int>> counts;  // (word index, count), ascending index
    std::optional<int> label;                 // developer index

    int total_tokens() const;
};

struct ProcessedDataset {
    Vocabulary vocabulary;
    std::vector<std::string> developers;  // distinct, lexicographic
    std::vector<TokenizedReport> reports;
    int min_report_freq = 1;  // threshold the vocabulary was pruned with
};

struct VectorizeInput {
    std::int64_t id = 0;
    TokenBag bag;
    std::optional<std::string> developer;
};

struct VectorizeResult {
    ProcessedDataset dataset;
    std::vector<std::int64_t> excluded_ids;  // reports with no in-vocabulary words
};

// Drops out-of-vocabulary tokens, excludes reports that end up empty, and
// builds the developer index over the labels present (lexicographic).
VectorizeResult vectorize(const std::vector<VectorizeInput>& inputs, Vocabulary vocabulary);

// Corpus texts (summary + " " + description) as token bags, id and label kept.
std::vector<VectorizeInput> bag_corpus(const RawCorpus& corpus, const Stoplist& stoplist,
                                       int min_token_len = 2);

// Full text pipeline: tokenize -> vocabulary prune -> vectorize.
VectorizeResult preprocess_corpus(const RawCorpus& corpus, const Stoplist& stoplist,
                                  int min_token_len, int min_report_freq);

void save_dataset(const ProcessedDataset& dataset, const std::filesystem::path& path);
ProcessedDataset load_dataset(const std::filesystem::path& path);

}  // namespace triage
