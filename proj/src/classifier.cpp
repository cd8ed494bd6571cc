#include "triage/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "json.hpp"

#include "triage/errors.hpp"

namespace triage {

namespace {

using nlohmann::json;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

json encode_log_array(const std::vector<double>& values) {
    json arr = json::array();
    for (double v : values) {
        if (std::isinf(v)) {
            arr.push_back(nullptr);  // JSON has no -inf
        } else {
            arr.push_back(v);
        }
    }
    return arr;
}

std::vector<double> decode_log_array(const json& arr) {
    std::vector<double> values;
    values.reserve(arr.size());
    for (const json& v : arr) {
        values.push_back(v.is_null() ? kNegInf : v.get<double>());
    }
    return values;
}

}  // namespace

namespace detail {

NBModel build_weighted_model(const std::vector<std::string>& developers,
                             const std::vector<std::string>& vocabulary,
                             std::span<const TokenizedReport> reports,
                             const WeightedLabels& weights, double alpha,
                             double prior_denominator) {
    const std::size_t dev_count = developers.size();
    const std::size_t word_count = vocabulary.size();

    std::vector<double> prior_num(dev_count, alpha);
    std::vector<std::vector<double>> word_num(dev_count, std::vector<double>(word_count, alpha));
    std::vector<double> token_mass(dev_count, 0.0);

    for (std::size_t i = 0; i < reports.size(); ++i) {
        const TokenizedReport& report = reports[i];
        const double report_tokens = static_cast<double>(report.total_tokens());
        for (const auto& [dev, weight] : weights[i]) {
            prior_num[static_cast<std::size_t>(dev)] += weight;
            auto& row = word_num[static_cast<std::size_t>(dev)];
            for (const auto& [word, count] : report.counts) {
                row[static_cast<std::size_t>(word)] += weight * static_cast<double>(count);
            }
            token_mass[static_cast<std::size_t>(dev)] += weight * report_tokens;
        }
    }

    NBModel model;
    model.developers = developers;
    model.vocabulary = vocabulary;
    model.alpha = alpha;
    model.log_prior.resize(dev_count);
    model.log_likelihood.assign(dev_count, std::vector<double>(word_count));
    for (std::size_t j = 0; j < dev_count; ++j) {
        model.log_prior[j] = std::log(prior_num[j] / prior_denominator);
        const double denom = alpha * static_cast<double>(word_count) + token_mass[j];
        auto& row = model.log_likelihood[j];
        if (denom == 0.0) {
            // alpha = 0 and no mass for this developer: zero probability row.
            std::fill(row.begin(), row.end(), kNegInf);
            continue;
        }
        for (std::size_t k = 0; k < word_count; ++k) {
            row[k] = std::log(word_num[j][k] / denom);
        }
    }
    return model;
}

}  // namespace detail

NBModel train_nb(const ProcessedDataset& data, double alpha) {
    if (alpha < 0.0) {
        throw UsageError("smoothing alpha must be non-negative");
    }
    if (data.developers.empty()) {
        throw DataError("training data has no developers");
    }

    std::vector<TokenizedReport> labeled;
    for (const TokenizedReport& report : data.reports) {
        if (report.label) {
            if (*report.label < 0 || *report.label >= static_cast<int>(data.developers.size())) {
                throw DataError("report " + std::to_string(report.report_id) +
                                " has a label outside the developer index");
            }
            labeled.push_back(report);
        }
    }
    if (labeled.empty()) {
        throw DataError("training requires at least one labeled report");
    }

    detail::WeightedLabels weights(labeled.size());
    for (std::size_t i = 0; i < labeled.size(); ++i) {
        weights[i].emplace_back(*labeled[i].label, 1.0);
    }
    const double prior_denominator = alpha * static_cast<double>(data.developers.size()) +
                                     static_cast<double>(labeled.size());
    NBModel model = detail::build_weighted_model(data.developers, data.vocabulary.words, labeled,
                                                 weights, alpha, prior_denominator);
    model.provenance.method = "nb";
    return model;
}

Posterior posterior(const NBModel& model, const TokenizedReport& report) {
    const int dev_count = model.developer_count();
    if (dev_count == 0) {
        throw DataError("model has no developers");
    }
    const int word_count = model.vocabulary_size();
    for (const auto& [word, count] : report.counts) {
        if (word < 0 || word >= word_count || count < 1) {
            throw DataError("report " + std::to_string(report.report_id) +
                            " is not indexed within the model vocabulary");
        }
    }

    std::vector<double> scores(model.log_prior);
    for (int j = 0; j < dev_count; ++j) {
        const auto& row = model.log_likelihood[static_cast<std::size_t>(j)];
        double& score = scores[static_cast<std::size_t>(j)];
        for (const auto& [word, count] : report.counts) {
            score += static_cast<double>(count) * row[static_cast<std::size_t>(word)];
        }
    }

    Posterior result;
    result.probs.resize(static_cast<std::size_t>(dev_count));
    const double max_score = *std::max_element(scores.begin(), scores.end());
    if (std::isinf(max_score) && max_score < 0.0) {
        // Every developer has zero probability (alpha = 0 degenerate case).
        std::fill(result.probs.begin(), result.probs.end(), 1.0 / dev_count);
    } else {
        double sum = 0.0;
        for (int j = 0; j < dev_count; ++j) {
            const double p = std::exp(scores[static_cast<std::size_t>(j)] - max_score);
            result.probs[static_cast<std::size_t>(j)] = p;
            sum += p;
        }
        for (double& p : result.probs) {
            p /= sum;
        }
    }

    result.ranking.resize(static_cast<std::size_t>(dev_count));
    std::iota(result.ranking.begin(), result.ranking.end(), 0);
    std::sort(result.ranking.begin(), result.ranking.end(), [&](int a, int b) {
        const double pa = result.probs[static_cast<std::size_t>(a)];
        const double pb = result.probs[static_cast<std::size_t>(b)];
        if (pa != pb) {
            return pa > pb;
        }
        return a < b;
    });
    return result;
}

std::vector<std::pair<int, double>> recommend(const NBModel& model, const TokenizedReport& report,
                                              int n) {
    if (n < 1) {
        throw UsageError("recommendation list size must be at least 1");
    }
    const Posterior post = posterior(model, report);
    const int take = std::min(n, model.developer_count());
    std::vector<std::pair<int, double>> list;
    list.reserve(static_cast<std::size_t>(take));
    for (int q = 0; q < take; ++q) {
        const int dev = post.ranking[static_cast<std::size_t>(q)];
        list.emplace_back(dev, post.probs[static_cast<std::size_t>(dev)]);
    }
    return list;
}

void save_model(const NBModel& model, const std::filesystem::path& path) {
    json j;
    j["version"] = 1;
    j["alpha"] = model.alpha;
    j["developers"] = model.developers;
    j["vocabulary"] = model.vocabulary;
    j["log_prior"] = encode_log_array(model.log_prior);
    json rows = json::array();
    for (const auto& row : model.log_likelihood) {
        rows.push_back(encode_log_array(row));
    }
    j["log_likelihood"] = std::move(rows);
    json prov;
    prov["method"] = model.provenance.method;
    prov["lambda"] = model.provenance.lambda ? json(*model.provenance.lambda) : json(nullptr);
    prov["list_size"] =
        model.provenance.list_size ? json(*model.provenance.list_size) : json(nullptr);
    prov["iterations"] = model.provenance.iterations;
    j["provenance"] = std::move(prov);

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write '" + path.string() + "'");
    }
    out << j.dump(2) << '\n';
    if (!out) {
        throw DataError("failed writing '" + path.string() + "'");
    }
}

NBModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open '" + path.string() + "'");
    }
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw DataError("invalid model file '" + path.string() + "': " + e.what());
    }
    try {
        if (j.at("version").get<int>() != 1) {
            throw DataError("unsupported model version in '" + path.string() + "'");
        }
        NBModel model;
        model.alpha = j.at("alpha").get<double>();
        model.developers = j.at("developers").get<std::vector<std::string>>();
        model.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
        model.log_prior = decode_log_array(j.at("log_prior"));
        for (const json& row : j.at("log_likelihood")) {
            model.log_likelihood.push_back(decode_log_array(row));
        }
        const json& prov = j.at("provenance");
        model.provenance.method = prov.at("method").get<std::string>();
        if (!prov.at("lambda").is_null()) {
            model.provenance.lambda = prov.at("lambda").get<double>();
        }
        if (!prov.at("list_size").is_null()) {
            model.provenance.list_size = prov.at("list_size").get<int>();
        }
        model.provenance.iterations = prov.at("iterations").get<int>();

        if (model.log_prior.size() != model.developers.size() ||
            model.log_likelihood.size() != model.developers.size()) {
            throw DataError("model file '" + path.string() + "' has inconsistent dimensions");
        }
        for (const auto& row : model.log_likelihood) {
            if (row.size() != model.vocabulary.size()) {
                throw DataError("model file '" + path.string() + "' has inconsistent dimensions");
            }
        }
        return model;
    } catch (const json::exception& e) {
        throw DataError("invalid model file '" + path.string() + "': " + e.what());
    }
}

}  // namespace triage
