#include "triage/semisupervised.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <thread>

#include "json.hpp"

#include "triage/errors.hpp"

namespace triage {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void check_compatible(const ProcessedDataset& labeled, const ProcessedDataset& unlabeled) {
    if (labeled.vocabulary.words != unlabeled.vocabulary.words ||
        labeled.developers != unlabeled.developers) {
        throw std::invalid_argument(
            "labeled and unlabeled subsets must share vocabulary and developer tables");
    }
}

// Labels must arrive exactly where expected: every labeled report carries one,
// no unlabeled report does (ground truth is never readable by a trainer).
void check_label_placement(const ProcessedDataset& labeled, const ProcessedDataset& unlabeled) {
    for (const TokenizedReport& report : labeled.reports) {
        if (!report.label) {
            throw DataError("labeled subset contains report " +
                            std::to_string(report.report_id) + " without a label");
        }
    }
    for (const TokenizedReport& report : unlabeled.reports) {
        if (report.label) {
            throw DataError("unlabeled subset contains report " +
                            std::to_string(report.report_id) + " with a label attached");
        }
    }
}

double log_joint(const NBModel& model, const TokenizedReport& report, int dev) {
    double score = model.log_prior[static_cast<std::size_t>(dev)];
    const auto& row = model.log_likelihood[static_cast<std::size_t>(dev)];
    for (const auto& [word, count] : report.counts) {
        score += static_cast<double>(count) * row[static_cast<std::size_t>(word)];
    }
    return score;
}

struct Monitor {
    bool use_accuracy = false;
    std::vector<std::size_t> slice;  // labeled-report positions scored when use_accuracy

    std::string name() const { return use_accuracy ? "validation-accuracy" : "log-likelihood"; }
};

// Accuracy monitoring needs every developer in the labeled subset to have at
// least 5 labeled reports, so a 20% slice still covers each of them; the
// slice is the chronologically last floor(0.2*m) reports per developer.
Monitor make_monitor(const ProcessedDataset& labeled) {
    Monitor monitor;
    std::vector<std::vector<std::size_t>> per_dev(labeled.developers.size());
    for (std::size_t i = 0; i < labeled.reports.size(); ++i) {
        per_dev[static_cast<std::size_t>(*labeled.reports[i].label)].push_back(i);
    }
    bool eligible = false;
    for (const auto& positions : per_dev) {
        if (positions.empty()) {
            continue;
        }
        eligible = true;
        if (positions.size() < 5) {
            return monitor;  // log-likelihood fallback
        }
    }
    if (!eligible) {
        return monitor;
    }
    monitor.use_accuracy = true;
    for (const auto& positions : per_dev) {
        if (positions.empty()) {
            continue;
        }
        const std::size_t take = positions.size() / 5;  // floor(0.2*m)
        for (std::size_t i = positions.size() - take; i < positions.size(); ++i) {
            monitor.slice.push_back(positions[i]);
        }
    }
    std::sort(monitor.slice.begin(), monitor.slice.end());
    return monitor;
}

double monitored_score(const Monitor& monitor, const NBModel& model,
                       const ProcessedDataset& labeled, const ProcessedDataset& unlabeled,
                       const SoftLabeling& labeling, double lambda) {
    if (monitor.use_accuracy) {
        int correct = 0;
        for (std::size_t i : monitor.slice) {
            const TokenizedReport& report = labeled.reports[i];
            const Posterior post = posterior(model, report);
            if (post.ranking.front() == *report.label) {
                ++correct;
            }
        }
        return static_cast<double>(correct) / static_cast<double>(monitor.slice.size());
    }
    // Complete-data log-likelihood: labeled terms weight 1, unlabeled terms
    // weight lambda * Gamma under the current pseudo-labels.
    double ll = 0.0;
    for (const TokenizedReport& report : labeled.reports) {
        ll += log_joint(model, report, *report.label);
    }
    if (lambda != 0.0) {
        for (std::size_t i = 0; i < unlabeled.reports.size(); ++i) {
            for (const auto& [dev, weight] : labeling.lists[i]) {
                ll += lambda * weight * log_joint(model, unlabeled.reports[i], dev);
            }
        }
    }
    return ll;
}

bool improved(const Monitor& monitor, double score, double previous, double min_improvement) {
    if (!(score > previous)) {
        return false;
    }
    if (monitor.use_accuracy) {
        return (score - previous) * 100.0 > min_improvement;  // percentage points
    }
    if (std::isinf(previous)) {
        return true;
    }
    const double denom = std::abs(previous);
    if (denom == 0.0) {
        return false;  // log-likelihood cannot exceed 0
    }
    return (score - previous) / denom > min_improvement;
}

std::vector<int> top1_labels(const SoftLabeling& labeling) {
    std::vector<int> top;
    top.reserve(labeling.lists.size());
    for (const auto& list : labeling.lists) {
        top.push_back(list.empty() ? -1 : list.front().first);
    }
    return top;
}

void validate_config(const EMConfig& config) {
    if (config.lambda < 0.0 || config.lambda > 1.0) {
        throw UsageError("lambda must lie in [0, 1]");
    }
    if (config.list_size < 1) {
        throw UsageError("list_size must be at least 1");
    }
    if (config.max_iterations < 1) {
        throw UsageError("max_iterations must be at least 1");
    }
    if (config.min_improvement < 0.0) {
        throw UsageError("min_improvement must be non-negative");
    }
    if (config.alpha < 0.0) {
        throw UsageError("smoothing alpha must be non-negative");
    }
}

}  // namespace

double gamma(int n, int q) {
    if (n < 1) {
        throw UsageError("list size must be at least 1");
    }
    if (q < 1 || q > n) {
        throw UsageError("rank position " + std::to_string(q) + " is outside [1, " +
                         std::to_string(n) + "]");
    }
    if (n <= 53) {
        const std::uint64_t numerator = std::uint64_t{1} << (n - q);
        const std::uint64_t denominator = (std::uint64_t{1} << n) - 1;
        return static_cast<double>(numerator) / static_cast<double>(denominator);
    }
    // 2^(n-q) / (2^n - 1) = 2^-q / (1 - 2^-n), safe for any n.
    return std::ldexp(1.0, -q) / (1.0 - std::ldexp(1.0, -n));
}

SoftLabeling e_step(const NBModel& model, std::span<const TokenizedReport> unlabeled, int n,
                    int threads) {
    if (n < 1) {
        throw UsageError("list size must be at least 1");
    }
    if (threads < 1) {
        throw UsageError("thread count must be at least 1");
    }
    const int effective = std::min(n, model.developer_count());

    SoftLabeling labeling;
    labeling.lists.resize(unlabeled.size());
    auto label_range = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const Posterior post = posterior(model, unlabeled[i]);
            auto& list = labeling.lists[i];
            list.reserve(static_cast<std::size_t>(effective));
            for (int q = 1; q <= effective; ++q) {
                list.emplace_back(post.ranking[static_cast<std::size_t>(q - 1)],
                                  gamma(effective, q));
            }
        }
    };

    const std::size_t count = unlabeled.size();
    if (threads == 1 || count < 2) {
        label_range(0, count);
        return labeling;
    }
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), count);
    const std::size_t chunk = (count + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(begin + chunk, count);
        if (begin < end) {
            pool.emplace_back(label_range, begin, end);
        }
    }
    for (std::thread& t : pool) {
        t.join();
    }
    return labeling;
}

NBModel m_step(const ProcessedDataset& labeled, const ProcessedDataset& unlabeled,
               const SoftLabeling& labeling, const EMConfig& config) {
    validate_config(config);
    check_compatible(labeled, unlabeled);
    check_label_placement(labeled, unlabeled);
    if (labeling.lists.size() != unlabeled.reports.size()) {
        throw std::invalid_argument("labeling must cover exactly the unlabeled reports");
    }

    std::vector<TokenizedReport> reports;
    reports.reserve(labeled.reports.size() + unlabeled.reports.size());
    detail::WeightedLabels weights;
    weights.reserve(labeled.reports.size() + unlabeled.reports.size());
    for (const TokenizedReport& report : labeled.reports) {
        reports.push_back(report);
        weights.push_back({{*report.label, 1.0}});
    }
    for (std::size_t i = 0; i < unlabeled.reports.size(); ++i) {
        reports.push_back(unlabeled.reports[i]);
        std::vector<std::pair<int, double>> entries;
        for (const auto& [dev, rank_weight] : labeling.lists[i]) {
            const double weight = config.lambda * rank_weight;
            if (weight != 0.0) {
                entries.emplace_back(dev, weight);
            }
        }
        weights.push_back(std::move(entries));
    }

    // Grouped so lambda = 0 reproduces the supervised denominator bit-for-bit.
    const double prior_denominator =
        (config.alpha * static_cast<double>(labeled.developers.size()) +
         static_cast<double>(labeled.reports.size())) +
        config.lambda * static_cast<double>(unlabeled.reports.size());

    NBModel model = detail::build_weighted_model(labeled.developers, labeled.vocabulary.words,
                                                 reports, weights, config.alpha,
                                                 prior_denominator);
    model.provenance.method = config.list_size == 1 ? "nbem" : "nbem-wrl";
    model.provenance.lambda = config.lambda;
    model.provenance.list_size = config.list_size;
    return model;
}

std::pair<NBModel, TrainingTrace> train_semisupervised(const ProcessedDataset& labeled,
                                                       const ProcessedDataset& unlabeled,
                                                       const EMConfig& config, int threads) {
    validate_config(config);
    check_compatible(labeled, unlabeled);
    check_label_placement(labeled, unlabeled);

    const auto start = Clock::now();
    NBModel model = train_nb(labeled, config.alpha);
    model.provenance.method = config.list_size == 1 ? "nbem" : "nbem-wrl";
    model.provenance.lambda = config.lambda;
    model.provenance.list_size = config.list_size;

    const Monitor monitor = make_monitor(labeled);
    TrainingTrace trace;
    trace.monitor = monitor.name();

    if (unlabeled.reports.empty()) {
        const double score =
            monitored_score(monitor, model, labeled, unlabeled, SoftLabeling{}, config.lambda);
        trace.entries.push_back({0, score, 0, seconds_since(start)});
        trace.best_iteration = 0;
        return {std::move(model), std::move(trace)};
    }

    SoftLabeling labeling = e_step(model, unlabeled.reports, config.list_size, threads);
    double previous_score =
        monitored_score(monitor, model, labeled, unlabeled, labeling, config.lambda);
    trace.entries.push_back({0, previous_score, 0, seconds_since(start)});

    NBModel best_model = model;
    double best_score = previous_score;
    trace.best_iteration = 0;
    std::vector<int> previous_top1 = top1_labels(labeling);

    for (int iteration = 1; iteration <= config.max_iterations; ++iteration) {
        const auto iteration_start = Clock::now();
        model = m_step(labeled, unlabeled, labeling, config);
        SoftLabeling next = e_step(model, unlabeled.reports, config.list_size, threads);

        const std::vector<int> top1 = top1_labels(next);
        int changed = 0;
        for (std::size_t i = 0; i < top1.size(); ++i) {
            if (top1[i] != previous_top1[i]) {
                ++changed;
            }
        }

        const double score = monitored_score(monitor, model, labeled, unlabeled, next, config.lambda);
        trace.entries.push_back({iteration, score, changed, seconds_since(iteration_start)});
        if (score > best_score) {
            best_model = model;
            best_score = score;
            trace.best_iteration = iteration;
        }

        labeling = std::move(next);
        previous_top1 = top1;
        if (changed == 0) {
            break;
        }
        if (!improved(monitor, score, previous_score, config.min_improvement)) {
            break;
        }
        previous_score = score;
    }

    best_model.provenance.iterations = static_cast<int>(trace.entries.size()) - 1;
    return {std::move(best_model), std::move(trace)};
}

void write_trace(const TrainingTrace& trace, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write '" + path.string() + "'");
    }
    for (const TraceEntry& entry : trace.entries) {
        nlohmann::json j;
        j["iteration"] = entry.iteration;
        j["monitor"] = trace.monitor;
        if (std::isinf(entry.score)) {
            j["score"] = nullptr;
        } else {
            j["score"] = entry.score;
        }
        j["top1_changes"] = entry.top1_changes;
        j["seconds"] = entry.seconds;
        j["best"] = entry.iteration == trace.best_iteration;
        out << j.dump() << '\n';
    }
    if (!out) {
        throw DataError("failed writing '" + path.string() + "'");
    }
}

}  // namespace triage
