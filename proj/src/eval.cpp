#include "triage/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

#include "triage/errors.hpp"

namespace triage {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

// Bounded draw via rejection, stable across standard libraries.
std::uint64_t draw_below(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t value = rng();
    while (value >= limit) {
        value = rng();
    }
    return value % bound;
}

template <typename T>
void shuffle_vector(std::vector<T>& values, std::mt19937_64& rng) {
    for (std::size_t i = values.size(); i > 1; --i) {
        std::swap(values[i - 1], values[draw_below(rng, i)]);
    }
}

std::string format_percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", fraction * 100.0);
    return buf;
}

int rank_of_true_developer(const NBModel& model, const TokenizedReport& report) {
    const Posterior post = posterior(model, report);
    for (std::size_t q = 0; q < post.ranking.size(); ++q) {
        if (post.ranking[q] == *report.label) {
            return static_cast<int>(q) + 1;
        }
    }
    return model.developer_count() + 1;  // unreachable: ranking is a permutation
}

ProcessedDataset subset_without_positions(const ProcessedDataset& data,
                                          const std::unordered_set<std::size_t>& drop) {
    ProcessedDataset out;
    out.vocabulary = data.vocabulary;
    out.developers = data.developers;
    out.min_report_freq = data.min_report_freq;
    for (std::size_t i = 0; i < data.reports.size(); ++i) {
        if (!drop.count(i)) {
            out.reports.push_back(data.reports[i]);
        }
    }
    return out;
}

}  // namespace

Split split_dataset(const ProcessedDataset& data, double labeled_frac, double test_frac,
                    SplitMode mode, std::uint64_t seed) {
    if (!(labeled_frac > 0.0) || !(test_frac > 0.0) || !(labeled_frac + test_frac < 1.0)) {
        throw UsageError("split fractions must be positive with labeled + test < 1");
    }
    if (data.reports.empty()) {
        throw DataError("cannot split an empty dataset");
    }

    std::vector<std::vector<std::size_t>> per_dev(data.developers.size());
    for (std::size_t i = 0; i < data.reports.size(); ++i) {
        const TokenizedReport& report = data.reports[i];
        if (!report.label) {
            throw DataError("split requires a fully labeled dataset; report " +
                            std::to_string(report.report_id) + " is unlabeled");
        }
        per_dev[static_cast<std::size_t>(*report.label)].push_back(i);
    }

    std::mt19937_64 rng(seed);
    enum class Bucket { Labeled, Test, Unlabeled };
    std::vector<Bucket> bucket(data.reports.size(), Bucket::Unlabeled);
    for (std::size_t dev = 0; dev < per_dev.size(); ++dev) {
        auto& positions = per_dev[dev];
        if (positions.empty()) {
            continue;
        }
        if (positions.size() < 2) {
            throw DataError("developer '" + data.developers[dev] +
                            "' has fewer than 2 reports and cannot be split");
        }
        if (mode == SplitMode::Random) {
            shuffle_vector(positions, rng);
        }
        const double m = static_cast<double>(positions.size());
        // Nudged so binary-fraction products (0.05*20, ...) land on the
        // intended integers.
        const std::size_t labeled_count = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::ceil(labeled_frac * m - 1e-9)));
        const std::size_t test_count =
            static_cast<std::size_t>(std::floor(test_frac * m + 1e-9));
        for (std::size_t i = 0; i < positions.size(); ++i) {
            if (i < labeled_count) {
                bucket[positions[i]] = Bucket::Labeled;
            } else if (i < labeled_count + test_count) {
                bucket[positions[i]] = Bucket::Test;
            }
        }
    }

    Split split;
    split.ratios = {labeled_frac, test_frac, 1.0 - labeled_frac - test_frac};
    for (std::size_t i = 0; i < data.reports.size(); ++i) {
        const TokenizedReport& report = data.reports[i];
        switch (bucket[i]) {
            case Bucket::Labeled:
                split.labeled_ids.push_back(report.report_id);
                break;
            case Bucket::Test:
                split.test_ids.push_back(report.report_id);
                break;
            case Bucket::Unlabeled:
                split.unlabeled_ids.push_back(report.report_id);
                split.hidden_labels.emplace(report.report_id, *report.label);
                break;
        }
    }
    return split;
}

ExperimentSubsets prepare_subsets(const ProcessedDataset& data, const Split& split) {
    std::unordered_map<std::int64_t, int> destination;  // 0 labeled, 1 unlabeled, 2 test
    for (std::int64_t id : split.labeled_ids) {
        destination.emplace(id, 0);
    }
    for (std::int64_t id : split.unlabeled_ids) {
        destination.emplace(id, 1);
    }
    for (std::int64_t id : split.test_ids) {
        destination.emplace(id, 2);
    }

    // Vocabulary re-pruned on training reports only (same threshold), so the
    // feature space is what building from training token bags would give.
    std::vector<int> report_freq(static_cast<std::size_t>(data.vocabulary.size()), 0);
    for (const TokenizedReport& report : data.reports) {
        auto it = destination.find(report.report_id);
        if (it == destination.end() || it->second == 2) {
            continue;
        }
        for (const auto& [word, count] : report.counts) {
            (void)count;
            ++report_freq[static_cast<std::size_t>(word)];
        }
    }
    std::vector<std::string> kept_words;
    std::vector<int> remap(static_cast<std::size_t>(data.vocabulary.size()), -1);
    for (int k = 0; k < data.vocabulary.size(); ++k) {
        if (report_freq[static_cast<std::size_t>(k)] >= data.min_report_freq) {
            remap[static_cast<std::size_t>(k)] = static_cast<int>(kept_words.size());
            kept_words.push_back(data.vocabulary.words[static_cast<std::size_t>(k)]);
        }
    }
    if (kept_words.empty()) {
        throw DataError("training vocabulary is empty after the split; lower min_report_freq");
    }

    ExperimentSubsets subsets;
    for (ProcessedDataset* subset : {&subsets.labeled, &subsets.unlabeled, &subsets.test}) {
        subset->vocabulary = Vocabulary::from_words(kept_words);
        subset->developers = data.developers;
        subset->min_report_freq = data.min_report_freq;
    }
    for (const TokenizedReport& report : data.reports) {
        auto it = destination.find(report.report_id);
        if (it == destination.end()) {
            continue;
        }
        TokenizedReport projected;
        projected.report_id = report.report_id;
        projected.label = report.label;
        for (const auto& [word, count] : report.counts) {
            const int mapped = remap[static_cast<std::size_t>(word)];
            if (mapped >= 0) {
                projected.counts.emplace_back(mapped, count);
            }
        }
        switch (it->second) {
            case 0:
                subsets.labeled.reports.push_back(std::move(projected));
                break;
            case 1:
                projected.label.reset();  // trainers never see the ground truth
                subsets.unlabeled.reports.push_back(std::move(projected));
                break;
            default:
                subsets.test.reports.push_back(std::move(projected));
                break;
        }
    }
    return subsets;
}

double accuracy_at_n(const NBModel& model, std::span<const TokenizedReport> test, int n) {
    if (n < 1) {
        throw UsageError("list size must be at least 1");
    }
    if (test.empty()) {
        throw DataError("accuracy requires a non-empty test set");
    }
    int hits = 0;
    for (const TokenizedReport& report : test) {
        if (!report.label) {
            throw DataError("test report " + std::to_string(report.report_id) +
                            " has no ground-truth developer");
        }
        if (rank_of_true_developer(model, report) <= n) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(test.size());
}

std::vector<double> accuracy_curve(const NBModel& model, std::span<const TokenizedReport> test,
                                   int n_max) {
    if (n_max < 1) {
        throw UsageError("list size must be at least 1");
    }
    if (test.empty()) {
        throw DataError("accuracy requires a non-empty test set");
    }
    std::vector<int> hits_at(static_cast<std::size_t>(n_max) + 1, 0);
    for (const TokenizedReport& report : test) {
        if (!report.label) {
            throw DataError("test report " + std::to_string(report.report_id) +
                            " has no ground-truth developer");
        }
        const int rank = rank_of_true_developer(model, report);
        if (rank <= n_max) {
            ++hits_at[static_cast<std::size_t>(rank)];
        }
    }
    std::vector<double> curve(static_cast<std::size_t>(n_max));
    int cumulative = 0;
    for (int n = 1; n <= n_max; ++n) {
        cumulative += hits_at[static_cast<std::size_t>(n)];
        curve[static_cast<std::size_t>(n - 1)] =
            static_cast<double>(cumulative) / static_cast<double>(test.size());
    }
    return curve;
}

LambdaSelection select_lambda(const ProcessedDataset& labeled, const ProcessedDataset& unlabeled,
                              std::span<const double> grid, int folds, const EMConfig& base,
                              std::uint64_t seed, int threads) {
    if (grid.empty()) {
        throw UsageError("lambda grid must not be empty");
    }
    if (folds < 2) {
        throw UsageError("cross-validation needs at least 2 folds");
    }
    for (double lambda : grid) {
        if (lambda < 0.0 || lambda > 1.0) {
            throw UsageError("lambda grid values must lie in [0, 1]");
        }
    }
    if (labeled.reports.empty()) {
        throw DataError("cross-validation requires labeled reports");
    }

    // Stratified fold assignment: shuffle each developer's reports, then deal
    // them round-robin.
    std::mt19937_64 rng(seed);
    std::vector<int> fold_of(labeled.reports.size(), 0);
    {
        std::vector<std::vector<std::size_t>> per_dev(labeled.developers.size());
        for (std::size_t i = 0; i < labeled.reports.size(); ++i) {
            per_dev[static_cast<std::size_t>(*labeled.reports[i].label)].push_back(i);
        }
        for (auto& positions : per_dev) {
            shuffle_vector(positions, rng);
            for (std::size_t k = 0; k < positions.size(); ++k) {
                fold_of[positions[k]] = static_cast<int>(k % static_cast<std::size_t>(folds));
            }
        }
    }

    LambdaSelection selection;
    selection.mean_accuracy.reserve(grid.size());
    double best_mean = -1.0;
    for (double lambda : grid) {
        EMConfig config = base;
        config.lambda = lambda;
        double accuracy_sum = 0.0;
        int scored_folds = 0;
        for (int fold = 0; fold < folds; ++fold) {
            std::unordered_set<std::size_t> held_out;
            for (std::size_t i = 0; i < labeled.reports.size(); ++i) {
                if (fold_of[i] == fold) {
                    held_out.insert(i);
                }
            }
            if (held_out.empty() || held_out.size() == labeled.reports.size()) {
                continue;
            }
            const ProcessedDataset train_fold = subset_without_positions(labeled, held_out);
            std::vector<bool> dev_present(labeled.developers.size(), false);
            for (const TokenizedReport& report : train_fold.reports) {
                dev_present[static_cast<std::size_t>(*report.label)] = true;
            }
            const NBModel model = train_semisupervised(train_fold, unlabeled, config, threads).first;
            int correct = 0;
            for (std::size_t i : held_out) {
                const TokenizedReport& report = labeled.reports[i];
                // A developer absent from the training fold is scored as a miss.
                if (!dev_present[static_cast<std::size_t>(*report.label)]) {
                    continue;
                }
                if (posterior(model, report).ranking.front() == *report.label) {
                    ++correct;
                }
            }
            accuracy_sum += static_cast<double>(correct) / static_cast<double>(held_out.size());
            ++scored_folds;
        }
        if (scored_folds == 0) {
            throw DataError("cross-validation produced no usable folds");
        }
        const double mean = accuracy_sum / static_cast<double>(scored_folds);
        selection.mean_accuracy.push_back(mean);
        if (mean > best_mean || (mean == best_mean && lambda < selection.lambda)) {
            selection.lambda = lambda;
            best_mean = mean;
        }
    }
    return selection;
}

std::string method_name(Method method) {
    switch (method) {
        case Method::NB:
            return "nb";
        case Method::NBEM:
            return "nbem";
        case Method::NBEM_WRL:
            return "nbem-wrl";
    }
    return "unknown";
}

std::optional<Method> parse_method(std::string_view name) {
    if (name == "nb") {
        return Method::NB;
    }
    if (name == "nbem") {
        return Method::NBEM;
    }
    if (name == "nbem-wrl" || name == "nbem_wrl") {
        return Method::NBEM_WRL;
    }
    return std::nullopt;
}

std::vector<double> default_lambda_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 10; ++i) {
        grid.push_back(static_cast<double>(i) / 10.0);
    }
    return grid;
}

namespace {

struct TrainedMethod {
    NBModel model;
    std::optional<double> lambda;
    double seconds = 0.0;
};

TrainedMethod train_method(Method method, const ExperimentSubsets& subsets, const EMConfig& base,
                           const ExperimentOptions& options) {
    const auto start = Clock::now();
    TrainedMethod result;
    if (method == Method::NB) {
        result.model = train_nb(subsets.labeled, base.alpha);
    } else {
        EMConfig config = base;
        config.list_size = method == Method::NBEM ? 1 : std::max(base.list_size, 1);
        if (options.lambda) {
            config.lambda = *options.lambda;
        } else {
            config.lambda = select_lambda(subsets.labeled, subsets.unlabeled,
                                          options.lambda_grid, options.folds, config,
                                          options.seed, options.threads)
                                .lambda;
        }
        result.lambda = config.lambda;
        result.model =
            train_semisupervised(subsets.labeled, subsets.unlabeled, config, options.threads).first;
    }
    result.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return result;
}

}  // namespace

EvaluationReport run_experiment(const ProcessedDataset& data, const std::vector<Method>& methods,
                                int n_max, const EMConfig& base, const ExperimentOptions& options) {
    if (methods.empty()) {
        throw UsageError("at least one method is required");
    }
    if (n_max < 1) {
        throw UsageError("n_max must be at least 1");
    }
    const Split split = split_dataset(data, options.labeled_frac, options.test_frac,
                                      options.split_mode, options.seed);
    const ExperimentSubsets subsets = prepare_subsets(data, split);

    EvaluationReport report;
    report.report_count = static_cast<int>(data.reports.size());
    report.developer_count = static_cast<int>(data.developers.size());
    report.n_max = n_max;
    report.seed = options.seed;
    for (Method method : methods) {
        TrainedMethod trained = train_method(method, subsets, base, options);
        MethodResult row;
        row.method = method;
        row.lambda = trained.lambda;
        row.seconds = trained.seconds;
        row.accuracy = accuracy_curve(trained.model, subsets.test.reports, n_max);
        report.methods.push_back(std::move(row));
    }
    return report;
}

SweepReport run_sweep(const ProcessedDataset& data, const std::vector<Method>& methods,
                      const std::vector<double>& grid, const std::vector<int>& list_sizes,
                      const EMConfig& base, const ExperimentOptions& options) {
    if (methods.empty()) {
        throw UsageError("at least one method is required");
    }
    if (grid.empty()) {
        throw UsageError("lambda grid must not be empty");
    }
    if (list_sizes.empty()) {
        throw UsageError("at least one list size is required");
    }
    for (double lambda : grid) {
        if (lambda < 0.0 || lambda > 1.0) {
            throw UsageError("lambda grid values must lie in [0, 1]");
        }
    }
    const int n_max = *std::max_element(list_sizes.begin(), list_sizes.end());
    if (*std::min_element(list_sizes.begin(), list_sizes.end()) < 1) {
        throw UsageError("list sizes must be at least 1");
    }

    const Split split = split_dataset(data, options.labeled_frac, options.test_frac,
                                      options.split_mode, options.seed);
    const ExperimentSubsets subsets = prepare_subsets(data, split);

    SweepReport report;
    report.report_count = static_cast<int>(data.reports.size());
    report.developer_count = static_cast<int>(data.developers.size());
    report.seed = options.seed;
    report.grid = grid;
    report.list_sizes = list_sizes;

    for (Method method : methods) {
        SweepMethod method_series;
        method_series.method = method;
        for (int n : list_sizes) {
            method_series.series.push_back({n, {}});
        }
        if (method == Method::NB) {
            // Lambda-independent: one model, a flat series per list size.
            const NBModel model = train_nb(subsets.labeled, base.alpha);
            const std::vector<double> curve = accuracy_curve(model, subsets.test.reports, n_max);
            for (std::size_t s = 0; s < list_sizes.size(); ++s) {
                method_series.series[s].accuracy.assign(
                    grid.size(), curve[static_cast<std::size_t>(list_sizes[s] - 1)]);
            }
        } else {
            for (double lambda : grid) {
                EMConfig config = base;
                config.lambda = lambda;
                config.list_size = method == Method::NBEM ? 1 : std::max(base.list_size, 1);
                const NBModel model =
                    train_semisupervised(subsets.labeled, subsets.unlabeled, config,
                                         options.threads)
                        .first;
                const std::vector<double> curve =
                    accuracy_curve(model, subsets.test.reports, n_max);
                for (std::size_t s = 0; s < list_sizes.size(); ++s) {
                    method_series.series[s].accuracy.push_back(
                        curve[static_cast<std::size_t>(list_sizes[s] - 1)]);
                }
            }
        }
        report.methods.push_back(std::move(method_series));
    }
    return report;
}

std::string report_table_text(const EvaluationReport& report) {
    std::ostringstream out;
    out << "# accuracy (%) by recommendation list size — reports: " << report.report_count
        << ", developers: " << report.developer_count << ", seed: " << report.seed << "\n";
    out << "List size";
    for (const MethodResult& row : report.methods) {
        std::string name = method_name(row.method);
        if (name == "nb") {
            name = "NB";
        } else if (name == "nbem") {
            name = "NBEM";
        } else if (name == "nbem-wrl") {
            name = "NBEM+WRL";
        }
        out << "  " << std::string(10 - std::min<std::size_t>(10, name.size()), ' ') << name;
    }
    out << "\n";
    for (int n = 1; n <= report.n_max; ++n) {
        char head[16];
        std::snprintf(head, sizeof(head), "%9d", n);
        out << head;
        for (const MethodResult& row : report.methods) {
            const std::string cell = format_percent(row.accuracy[static_cast<std::size_t>(n - 1)]);
            out << "  " << std::string(10 - std::min<std::size_t>(10, cell.size()), ' ') << cell;
        }
        out << "\n";
    }
    return out.str();
}

std::string report_json_text(const EvaluationReport& report) {
    json j;
    j["version"] = 1;
    j["dataset"] = {{"report_count", report.report_count},
                    {"developer_count", report.developer_count}};
    j["n_max"] = report.n_max;
    j["seed"] = report.seed;
    json methods = json::array();
    for (const MethodResult& row : report.methods) {
        json m;
        m["name"] = method_name(row.method);
        m["lambda"] = row.lambda ? json(*row.lambda) : json(nullptr);
        m["seconds"] = row.seconds;
        json acc = json::array();
        for (double a : row.accuracy) {
            acc.push_back(a * 100.0);
        }
        m["accuracy_percent"] = std::move(acc);
        methods.push_back(std::move(m));
    }
    j["methods"] = std::move(methods);
    return j.dump(2) + "\n";
}

std::string sweep_table_text(const SweepReport& report) {
    std::ostringstream out;
    out << "# method\tlist_size\tlambda\taccuracy_percent — reports: " << report.report_count
        << ", developers: " << report.developer_count << ", seed: " << report.seed << "\n";
    for (const SweepMethod& method : report.methods) {
        for (const SweepSeries& series : method.series) {
            for (std::size_t g = 0; g < report.grid.size(); ++g) {
                char lambda_buf[32];
                std::snprintf(lambda_buf, sizeof(lambda_buf), "%.3f", report.grid[g]);
                out << method_name(method.method) << '\t' << series.list_size << '\t' << lambda_buf
                    << '\t' << format_percent(series.accuracy[g]) << "\n";
            }
        }
    }
    return out.str();
}

std::string sweep_json_text(const SweepReport& report) {
    json j;
    j["version"] = 1;
    j["dataset"] = {{"report_count", report.report_count},
                    {"developer_count", report.developer_count}};
    j["seed"] = report.seed;
    j["lambda_grid"] = report.grid;
    j["list_sizes"] = report.list_sizes;
    json methods = json::array();
    for (const SweepMethod& method : report.methods) {
        json m;
        m["name"] = method_name(method.method);
        json series = json::array();
        for (const SweepSeries& s : method.series) {
            json entry;
            entry["list_size"] = s.list_size;
            json acc = json::array();
            for (double a : s.accuracy) {
                acc.push_back(a * 100.0);
            }
            entry["accuracy_percent"] = std::move(acc);
            series.push_back(std::move(entry));
        }
        m["series"] = std::move(series);
        methods.push_back(std::move(m));
    }
    j["methods"] = std::move(methods);
    return j.dump(2) + "\n";
}

}  // namespace triage
