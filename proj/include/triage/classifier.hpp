#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "triage/preprocess.hpp"

namespace triage {

struct ModelProvenance {
    std::string method = "nb";
    std::optional<double> lambda;
    std::optional<int> list_size;
    int iterations = 0;
};

// Multinomial naive Bayes parameters in log space. Immutable after training;
// posterior/recommend are pure reads.
struct NBModel {
    std::vector<std::string> developers;
    std::vector<std::string> vocabulary;
    std::vector<double> log_prior;                    // per developer
    std::vector<std::vector<double>> log_likelihood;  // [developer][word]
    double alpha = 1.0;
    ModelProvenance provenance;

    int developer_count() const { return static_cast<int>(developers.size()); }
    int vocabulary_size() const { return static_cast<int>(vocabulary.size()); }
};

struct Posterior {
    std::vector<double> probs;  // sums to 1
    std::vector<int> ranking;   // descending probability, ties by ascending index
};

// Supervised training with add-alpha smoothing of both the priors and the
// word likelihoods. Unlabeled reports in `data` are ignored; throws DataError
// when no labeled report exists.
NBModel train_nb(const ProcessedDataset& data, double alpha = 1.0);

// Log-space scoring with log-sum-exp normalization. A developer with -inf
// score gets probability 0; if every score is -inf the posterior is uniform.
Posterior posterior(const NBModel& model, const TokenizedReport& report);

// First min(n, developer_count) entries of the posterior ranking.
std::vector<std::pair<int, double>> recommend(const NBModel& model, const TokenizedReport& report,
                                              int n);

void save_model(const NBModel& model, const std::filesystem::path& path);
NBModel load_model(const std::filesystem::path& path);

namespace detail {

// Per-report (developer, weight) contributions. Zero-weight entries must be
// omitted by the caller so that weighted and unweighted training produce
// bit-identical arithmetic.
using WeightedLabels = std::vector<std::vector<std::pair<int, double>>>;

NBModel build_weighted_model(const std::vector<std::string>& developers,
                             const std::vector<std::string>& vocabulary,
                             std::span<const TokenizedReport> reports,
                             const WeightedLabels& weights, double alpha,
                             double prior_denominator);

}  // namespace detail

}  // namespace triage
