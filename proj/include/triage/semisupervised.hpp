#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "triage/classifier.hpp"
#include "triage/preprocess.hpp"

namespace triage {

struct EMConfig {
    double lambda = 1.0;           // weight factor for unlabeled reports, in [0,1]
    int list_size = 1;             // pseudo-label list size n; 1 = plain hard-label EM
    int max_iterations = 50;
    double min_improvement = 1e-4; // relative for log-likelihood, percentage points for accuracy
    double alpha = 1.0;            // smoothing forwarded to the M-step
};

// Rank weight for position q in a recommendation list of size n:
// 2^(n-q) / (2^n - 1). Throws when q is outside [1, n].
double gamma(int n, int q);

// Pseudo-labels for the unlabeled reports: lists[i] holds (developer index,
// weight) pairs for unlabeled report i, ranked by descending posterior, with
// rank weights for the effective list size min(n, developer_count).
struct SoftLabeling {
    std::vector<std::vector<std::pair<int, double>>> lists;
};

SoftLabeling e_step(const NBModel& model, std::span<const TokenizedReport> unlabeled, int n,
                    int threads = 1);

// Rebuilds the model from labeled reports (weight 1 on their label) and
// unlabeled reports (weight lambda * rank weight on each listed developer).
NBModel m_step(const ProcessedDataset& labeled, const ProcessedDataset& unlabeled,
               const SoftLabeling& labeling, const EMConfig& config);

struct TraceEntry {
    int iteration = 0;
    double score = 0.0;
    int top1_changes = 0;  // unlabeled reports whose top-1 pseudo-label changed
    double seconds = 0.0;
};

struct TrainingTrace {
    std::string monitor;  // "validation-accuracy" or "log-likelihood"
    std::vector<TraceEntry> entries;
    int best_iteration = 0;
};

// Supervised initialization followed by alternating E/M steps. Stops when the
// monitored score no longer improves by more than min_improvement, when no
// top-1 pseudo-label changed, or at max_iterations; returns the best iterate
// by monitored score, not necessarily the last.
std::pair<NBModel, TrainingTrace> train_semisupervised(const ProcessedDataset& labeled,
                                                       const ProcessedDataset& unlabeled,
                                                       const EMConfig& config, int threads = 1);

// One JSON record per iteration.
void write_trace(const TrainingTrace& trace, const std::filesystem::path& path);

}  // namespace triage
