#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "triage/classifier.hpp"
#include "triage/preprocess.hpp"
#include "triage/semisupervised.hpp"

namespace triage {

enum class SplitMode { Chronological, Random };

struct Split {
    std::vector<std::int64_t> labeled_ids;
    std::vector<std::int64_t> unlabeled_ids;
    std::vector<std::int64_t> test_ids;
    struct Ratios {
        double labeled = 0.0;
        double test = 0.0;
        double unlabeled = 0.0;
    } ratios;
    // Ground truth for the unlabeled ids, kept for diagnostics only; trainers
    // receive the unlabeled subset with labels stripped.
    std::map<std::int64_t, int> hidden_labels;
};

// Per developer, in chronological (dataset) order: the first
// ceil(labeled_frac*m) reports (at least 1) become labeled, the next
// floor(test_frac*m) test, the remainder unlabeled. Random mode shuffles each
// developer's reports with the seed before slicing.
Split split_dataset(const ProcessedDataset& data, double labeled_frac, double test_frac,
                    SplitMode mode = SplitMode::Chronological, std::uint64_t seed = 0);

struct ExperimentSubsets {
    ProcessedDataset labeled;    // labels kept
    ProcessedDataset unlabeled;  // labels stripped
    ProcessedDataset test;       // labels kept as scoring ground truth
};

// Materializes the three subsets and re-prunes the vocabulary on the training
// reports only (labeled + unlabeled, same min_report_freq), so test reports
// never influence the feature space. Test reports that end up empty are kept
// and scored through the prior.
ExperimentSubsets prepare_subsets(const ProcessedDataset& data, const Split& split);

// Fraction of test reports whose true developer appears in the top-n
// recommendation. Throws DataError on an empty or unlabeled test set.
double accuracy_at_n(const NBModel& model, std::span<const TokenizedReport> test, int n);

// accuracy_at_n for every n in [1, n_max], computed from one ranking pass.
std::vector<double> accuracy_curve(const NBModel& model, std::span<const TokenizedReport> test,
                                   int n_max);

struct LambdaSelection {
    double lambda = 0.0;
    std::vector<double> mean_accuracy;  // per grid value
};

// k-fold cross-validation over the labeled subset: train on k-1 folds plus
// all unlabeled reports, validate accuracy@1 on the held-out fold. Validation
// reports whose developer is absent from the training fold count as misses.
// Ties are broken toward the smaller lambda.
LambdaSelection select_lambda(const ProcessedDataset& labeled, const ProcessedDataset& unlabeled,
                              std::span<const double> grid, int folds, const EMConfig& base,
                              std::uint64_t seed = 0, int threads = 1);

enum class Method { NB, NBEM, NBEM_WRL };

std::string method_name(Method method);
std::optional<Method> parse_method(std::string_view name);
std::vector<double> default_lambda_grid();  // 0.0, 0.1, ..., 1.0

struct ExperimentOptions {
    double labeled_frac = 0.05;
    double test_frac = 0.20;
    SplitMode split_mode = SplitMode::Chronological;
    std::optional<double> lambda;  // fixed weight factor; empty = cross-validated
    std::vector<double> lambda_grid = default_lambda_grid();
    int folds = 5;
    std::uint64_t seed = 0;
    int threads = 1;
};

struct MethodResult {
    Method method = Method::NB;
    std::optional<double> lambda;
    double seconds = 0.0;
    std::vector<double> accuracy;  // fractions, index n-1 for n = 1..n_max
};

struct EvaluationReport {
    int report_count = 0;
    int developer_count = 0;
    int n_max = 0;
    std::uint64_t seed = 0;
    std::vector<MethodResult> methods;
};

EvaluationReport run_experiment(const ProcessedDataset& data, const std::vector<Method>& methods,
                                int n_max, const EMConfig& base, const ExperimentOptions& options);

struct SweepSeries {
    int list_size = 0;
    std::vector<double> accuracy;  // fractions, per grid value
};

struct SweepMethod {
    Method method = Method::NB;
    std::vector<SweepSeries> series;
};

struct SweepReport {
    int report_count = 0;
    int developer_count = 0;
    std::uint64_t seed = 0;
    std::vector<double> grid;
    std::vector<int> list_sizes;
    std::vector<SweepMethod> methods;
};

// Fixes the grid instead of selecting lambda: one trained model per (method,
// lambda), evaluated at every requested list size.
SweepReport run_sweep(const ProcessedDataset& data, const std::vector<Method>& methods,
                      const std::vector<double>& grid, const std::vector<int>& list_sizes,
                      const EMConfig& base, const ExperimentOptions& options);

// Aligned plain-text table: one row per list size, one accuracy column per method.
std::string report_table_text(const EvaluationReport& report);
std::string report_json_text(const EvaluationReport& report);

// One row per (method, list size, lambda) point.
std::string sweep_table_text(const SweepReport& report);
std::string sweep_json_text(const SweepReport& report);

}  // namespace triage
