#pragma once

// Seeded multinomial-mixture corpus generator. The generator is the ground
// truth for the semi-supervised experiments: every document is drawn from a
// known class distribution, so true labels exist by construction.

#include <cstdint>
#include <random>
#include <vector>

#include "triage/corpus.hpp"
#include "triage/preprocess.hpp"

namespace triage::testsupport {

struct MixtureSpec {
    int classes = 5;
    int vocab_size = 200;
    double mean_doc_length = 30.0;
    int labeled_per_class = 10;
    int unlabeled_per_class = 200;
    int test_per_class = 100;
    double boost = 4.0;  // in-block word weight relative to background 1.0
};

struct MixtureCorpus {
    ProcessedDataset labeled;    // labels attached
    ProcessedDataset unlabeled;  // labels stripped
    ProcessedDataset test;       // labels attached (ground truth)
};

MixtureCorpus make_mixture(const MixtureSpec& spec, std::uint64_t seed);

// Same generative process rendered as bug reports (resolved/fixed, text body),
// all labeled, for driving the CLI pipeline.
RawCorpus make_mixture_raw_corpus(const MixtureSpec& spec, std::uint64_t seed);

}  // namespace triage::testsupport
