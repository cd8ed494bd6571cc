#pragma once

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "triage/classifier.hpp"
#include "triage/preprocess.hpp"

namespace triage::testsupport {

// Unique scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& prefix = "triage_test_") {
        const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
        path_ = std::filesystem::temp_directory_path() /
                (prefix + std::to_string(stamp) + "_" + std::to_string(counter()++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path file(const std::string& name) const { return path_ / name; }

private:
    static int& counter() {
        static int value = 0;
        return value;
    }
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Small labeled dataset straight from (developer, text) pairs, vocabulary from
// every token (min_report_freq 1), no stoplist.
inline ProcessedDataset make_text_dataset(
    const std::vector<std::pair<std::string, std::string>>& dev_text_pairs) {
    std::vector<VectorizeInput> inputs;
    std::int64_t id = 1;
    for (const auto& [developer, text] : dev_text_pairs) {
        VectorizeInput input;
        input.id = id++;
        input.bag = tokenize(text, Stoplist::none(), 1);
        if (!developer.empty()) {
            input.developer = developer;
        }
        inputs.push_back(std::move(input));
    }
    std::vector<TokenBag> bags;
    for (const auto& input : inputs) {
        bags.push_back(input.bag);
    }
    return vectorize(inputs, build_vocabulary(bags, 1)).dataset;
}

// Largest absolute difference over every stored model value; -inf matching
// -inf counts as zero difference.
inline double max_model_difference(const NBModel& a, const NBModel& b) {
    if (a.log_prior.size() != b.log_prior.size() ||
        a.log_likelihood.size() != b.log_likelihood.size()) {
        return std::numeric_limits<double>::infinity();
    }
    auto diff = [](double x, double y) {
        if (std::isinf(x) && std::isinf(y) && std::signbit(x) == std::signbit(y)) {
            return 0.0;
        }
        return std::abs(x - y);
    };
    double worst = 0.0;
    for (std::size_t j = 0; j < a.log_prior.size(); ++j) {
        worst = std::max(worst, diff(a.log_prior[j], b.log_prior[j]));
    }
    for (std::size_t j = 0; j < a.log_likelihood.size(); ++j) {
        if (a.log_likelihood[j].size() != b.log_likelihood[j].size()) {
            return std::numeric_limits<double>::infinity();
        }
        for (std::size_t k = 0; k < a.log_likelihood[j].size(); ++k) {
            worst = std::max(worst, diff(a.log_likelihood[j][k], b.log_likelihood[j][k]));
        }
    }
    return worst;
}

inline std::filesystem::path fixtures_dir() {
    if (const char* env = std::getenv("TRIAGE_FIXTURES")) {
        return env;
    }
    return std::filesystem::path(__FILE__).parent_path().parent_path() / "fixtures";
}

inline std::string cli_path() {
    if (const char* env = std::getenv("TRIAGE_CLI")) {
        return env;
    }
    return "";
}

}  // namespace triage::testsupport
