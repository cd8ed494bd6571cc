#include "triage/preprocess.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

#include "json.hpp"

#include "triage/errors.hpp"

namespace triage {

namespace {

using nlohmann::json;

bool is_ascii_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

char to_lower_alpha(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

}  // namespace

TokenBag tokenize(std::string_view text, const Stoplist& stoplist, int min_token_len) {
    if (min_token_len < 1) {
        throw UsageError("min_token_len must be at least 1");
    }
    TokenBag bag;
    std::string token;
    auto flush = [&] {
        if (static_cast<int>(token.size()) >= min_token_len && !stoplist.contains(token)) {
            ++bag[token];
        }
        token.clear();
    };
    for (char c : text) {
        if (is_ascii_alpha(c)) {
            token.push_back(to_lower_alpha(c));
        } else if (!token.empty()) {
            flush();
        }
    }
    if (!token.empty()) {
        flush();
    }
    return bag;
}

Vocabulary Vocabulary::from_words(std::vector<std::string> sorted_words) {
    Vocabulary vocab;
    vocab.words = std::move(sorted_words);
    vocab.index.reserve(vocab.words.size());
    for (std::size_t i = 0; i < vocab.words.size(); ++i) {
        vocab.index.emplace(vocab.words[i], static_cast<int>(i));
    }
    return vocab;
}

Vocabulary build_vocabulary(std::span<const TokenBag> report_bags, int min_report_freq) {
    if (min_report_freq < 1) {
        throw UsageError("min_report_freq must be at least 1");
    }
    // Distinct-report frequency: each bag counts a word once.
    std::map<std::string, int> report_freq;
    for (const TokenBag& bag : report_bags) {
        for (const auto& [word, count] : bag) {
            (void)count;
            ++report_freq[word];
        }
    }
    std::vector<std::string> kept;
    for (const auto& [word, freq] : report_freq) {
        if (freq >= min_report_freq) {
            kept.push_back(word);
        }
    }
    if (kept.empty()) {
        throw DataError("vocabulary is empty after pruning; lower min_report_freq (current " +
                        std::to_string(min_report_freq) + ")");
    }
    // std::map iteration is already lexicographic.
    return Vocabulary::from_words(std::move(kept));
}

int TokenizedReport::total_tokens() const {
    int total = 0;
    for (const auto& [index, count] : counts) {
        (void)index;
        total += count;
    }
    return total;
}

VectorizeResult vectorize(const std::vector<VectorizeInput>& inputs, Vocabulary vocabulary) {
    if (vocabulary.words.empty()) {
        throw UsageError("vectorize requires a non-empty vocabulary");
    }

    std::vector<std::string> developers;
    std::map<std::string, int> developer_index;
    for (const VectorizeInput& input : inputs) {
        if (input.developer) {
            developer_index.emplace(*input.developer, 0);
        }
    }
    for (auto& [name, index] : developer_index) {
        index = static_cast<int>(developers.size());
        developers.push_back(name);
    }

    VectorizeResult result;
    result.dataset.vocabulary = std::move(vocabulary);
    result.dataset.developers = std::move(developers);
    for (const VectorizeInput& input : inputs) {
        TokenizedReport report;
        report.report_id = input.id;
        for (const auto& [word, count] : input.bag) {
            auto it = result.dataset.vocabulary.index.find(word);
            if (it != result.dataset.vocabulary.index.end()) {
                report.counts.emplace_back(it->second, count);
            }
        }
        if (report.counts.empty()) {
            result.excluded_ids.push_back(input.id);
            continue;
        }
        // TokenBag is ordered by word, and vocabulary indices follow the same
        // lexicographic order, so counts are already ascending by index.
        if (input.developer) {
            report.label = developer_index.at(*input.developer);
        }
        result.dataset.reports.push_back(std::move(report));
    }
    if (result.dataset.reports.empty()) {
        throw DataError("all reports are empty after vectorization");
    }
    return result;
}

std::vector<VectorizeInput> bag_corpus(const RawCorpus& corpus, const Stoplist& stoplist,
                                       int min_token_len) {
    std::vector<VectorizeInput> inputs;
    inputs.reserve(corpus.reports.size());
    for (const BugReport& report : corpus.reports) {
        VectorizeInput input;
        input.id = report.id;
        input.bag = tokenize(report.summary + " " + report.description, stoplist, min_token_len);
        input.developer = report.developer;
        inputs.push_back(std::move(input));
    }
    return inputs;
}

VectorizeResult preprocess_corpus(const RawCorpus& corpus, const Stoplist& stoplist,
                                  int min_token_len, int min_report_freq) {
    std::vector<VectorizeInput> inputs = bag_corpus(corpus, stoplist, min_token_len);
    std::vector<TokenBag> bags;
    bags.reserve(inputs.size());
    for (const VectorizeInput& input : inputs) {
        bags.push_back(input.bag);
    }
    Vocabulary vocabulary = build_vocabulary(bags, min_report_freq);
    VectorizeResult result = vectorize(inputs, std::move(vocabulary));
    result.dataset.min_report_freq = min_report_freq;
    return result;
}

void save_dataset(const ProcessedDataset& dataset, const std::filesystem::path& path) {
    json j;
    j["version"] = 1;
    j["min_report_freq"] = dataset.min_report_freq;
    j["vocabulary"] = dataset.vocabulary.words;
    j["developers"] = dataset.developers;
    json reports = json::array();
    for (const TokenizedReport& report : dataset.reports) {
        json r;
        r["id"] = report.report_id;
        if (report.label) {
            r["developer"] = dataset.developers.at(static_cast<std::size_t>(*report.label));
        } else {
            r["developer"] = nullptr;
        }
        json counts = json::array();
        for (const auto& [index, count] : report.counts) {
            counts.push_back(json::array({index, count}));
        }
        r["counts"] = std::move(counts);
        reports.push_back(std::move(r));
    }
    j["reports"] = std::move(reports);

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write '" + path.string() + "'");
    }
    out << j.dump(2) << '\n';
    if (!out) {
        throw DataError("failed writing '" + path.string() + "'");
    }
}

ProcessedDataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open '" + path.string() + "'");
    }
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw DataError("invalid dataset file '" + path.string() + "': " + e.what());
    }
    try {
        if (j.at("version").get<int>() != 1) {
            throw DataError("unsupported dataset version in '" + path.string() + "'");
        }
        ProcessedDataset dataset;
        dataset.min_report_freq = j.value("min_report_freq", 1);
        dataset.vocabulary =
            Vocabulary::from_words(j.at("vocabulary").get<std::vector<std::string>>());
        dataset.developers = j.at("developers").get<std::vector<std::string>>();
        std::map<std::string, int> developer_index;
        for (std::size_t i = 0; i < dataset.developers.size(); ++i) {
            developer_index.emplace(dataset.developers[i], static_cast<int>(i));
        }
        for (const json& r : j.at("reports")) {
            TokenizedReport report;
            report.report_id = r.at("id").get<std::int64_t>();
            const json& dev = r.at("developer");
            if (!dev.is_null()) {
                auto it = developer_index.find(dev.get<std::string>());
                if (it == developer_index.end()) {
                    throw DataError("dataset report " + std::to_string(report.report_id) +
                                    " labels unknown developer '" + dev.get<std::string>() + "'");
                }
                report.label = it->second;
            }
            for (const json& pair : r.at("counts")) {
                const int index = pair.at(0).get<int>();
                const int count = pair.at(1).get<int>();
                if (index < 0 || index >= dataset.vocabulary.size() || count < 1) {
                    throw DataError("dataset report " + std::to_string(report.report_id) +
                                    " has an invalid count entry");
                }
                report.counts.emplace_back(index, count);
            }
            dataset.reports.push_back(std::move(report));
        }
        return dataset;
    } catch (const json::exception& e) {
        throw DataError("invalid dataset file '" + path.string() + "': " + e.what());
    }
}

}  // namespace triage
