#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"

#include "support/helpers.hpp"
#include "support/synthetic.hpp"
#include "triage/errors.hpp"
#include "triage/eval.hpp"

using namespace triage;
using namespace triage::testsupport;

namespace {

ProcessedDataset dataset_with_counts(const std::vector<std::pair<std::string, int>>& plan) {
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& [developer, count] : plan) {
        for (int i = 0; i < count; ++i) {
            pairs.push_back({developer, "alpha beta common word" + std::to_string(i % 7)});
        }
    }
    return make_text_dataset(pairs);
}

// Four developers over a trivial vocabulary; the prior fixes the ranking
// d0 > d1 > d2 > d3 for every empty report.
NBModel hand_ranked_model() {
    NBModel model;
    model.developers = {"d0", "d1", "d2", "d3"};
    model.vocabulary = {"w"};
    model.alpha = 1.0;
    for (double p : {0.4, 0.3, 0.2, 0.1}) {
        model.log_prior.push_back(std::log(p));
        model.log_likelihood.push_back({0.0});  // P(w|d) = 1
    }
    return model;
}

TokenizedReport labeled_empty_report(std::int64_t id, int label) {
    TokenizedReport report;
    report.report_id = id;
    report.label = label;
    return report;
}

}  // namespace

TEST_CASE("split_dataset follows the per-developer 5%/20%/75% protocol") {
    const ProcessedDataset data = dataset_with_counts({{"dev", 20}});
    const Split split = split_dataset(data, 0.05, 0.20);
    CHECK(split.labeled_ids.size() == 1);
    CHECK(split.test_ids.size() == 4);
    CHECK(split.unlabeled_ids.size() == 15);
    CHECK(split.ratios.labeled == 0.05);
    CHECK(split.ratios.unlabeled == doctest::Approx(0.75));

    // Chronological: the first report is the labeled one.
    CHECK(split.labeled_ids[0] == data.reports[0].report_id);
}

TEST_CASE("split_dataset gives every developer at least one labeled report") {
    const ProcessedDataset data = dataset_with_counts({{"a", 2}, {"b", 20}});
    const Split split = split_dataset(data, 0.05, 0.20);
    // Developer a: 1 labeled, 0 test, 1 unlabeled.
    int a_labeled = 0;
    for (std::int64_t id : split.labeled_ids) {
        for (const TokenizedReport& report : data.reports) {
            if (report.report_id == id && data.developers[*report.label] == "a") {
                ++a_labeled;
            }
        }
    }
    CHECK(a_labeled == 1);
}

TEST_CASE("split_dataset partitions the dataset") {
    const ProcessedDataset data = dataset_with_counts({{"a", 7}, {"b", 13}, {"c", 4}});
    for (SplitMode mode : {SplitMode::Chronological, SplitMode::Random}) {
        const Split split = split_dataset(data, 0.2, 0.3, mode, 42);
        std::set<std::int64_t> all;
        for (const auto* ids : {&split.labeled_ids, &split.unlabeled_ids, &split.test_ids}) {
            for (std::int64_t id : *ids) {
                CHECK(all.insert(id).second);  // pairwise disjoint
            }
        }
        CHECK(all.size() == data.reports.size());  // union complete
        CHECK(split.hidden_labels.size() == split.unlabeled_ids.size());
    }
}

TEST_CASE("split_dataset validates its inputs") {
    const ProcessedDataset data = dataset_with_counts({{"a", 1}, {"b", 5}});
    CHECK_THROWS_AS(split_dataset(data, 0.05, 0.20), DataError);  // a has < 2 reports

    const ProcessedDataset good = dataset_with_counts({{"a", 5}});
    CHECK_THROWS_AS(split_dataset(good, 0.0, 0.2), UsageError);
    CHECK_THROWS_AS(split_dataset(good, 0.6, 0.5), UsageError);

    ProcessedDataset unlabeled = good;
    unlabeled.reports[2].label.reset();
    CHECK_THROWS_AS(split_dataset(unlabeled, 0.05, 0.20), DataError);
}

TEST_CASE("split_dataset is deterministic, and random mode is seed-stable") {
    const ProcessedDataset data = dataset_with_counts({{"a", 9}, {"b", 11}});
    const Split a = split_dataset(data, 0.1, 0.2, SplitMode::Random, 7);
    const Split b = split_dataset(data, 0.1, 0.2, SplitMode::Random, 7);
    CHECK(a.labeled_ids == b.labeled_ids);
    CHECK(a.unlabeled_ids == b.unlabeled_ids);
    CHECK(a.test_ids == b.test_ids);

    const Split c = split_dataset(data, 0.1, 0.2, SplitMode::Random, 8);
    CHECK((a.labeled_ids != c.labeled_ids || a.test_ids != c.test_ids));
}

TEST_CASE("prepare_subsets rebuilds the vocabulary from training reports only") {
    ProcessedDataset data = make_text_dataset({
        {"a", "common alpha"},
        {"a", "common alpha beta"},
        {"a", "common testword"},
        {"b", "common beta"},
        {"b", "common beta gamma"},
        {"b", "common testword gamma"},
    });
    data.min_report_freq = 2;
    REQUIRE(data.vocabulary.words ==
            std::vector<std::string>{"alpha", "beta", "common", "gamma", "testword"});

    // ceil(0.34*3) = 2 labeled, floor(0.34*3) = 1 test, 0 unlabeled per dev.
    const Split split = split_dataset(data, 0.34, 0.34);
    REQUIRE(split.labeled_ids.size() == 4);
    REQUIRE(split.test_ids.size() == 2);

    const ExperimentSubsets subsets = prepare_subsets(data, split);
    // Training frequencies: common 4, beta 3, alpha 2, gamma 1, testword 0.
    CHECK(subsets.labeled.vocabulary.words == std::vector<std::string>{"alpha", "beta", "common"});
    CHECK(subsets.test.vocabulary.words == subsets.labeled.vocabulary.words);

    // Test reports survive projection through the reduced vocabulary.
    REQUIRE(subsets.test.reports.size() == 2);
    for (const TokenizedReport& report : subsets.test.reports) {
        REQUIRE(report.counts.size() == 1);
        CHECK(report.counts[0].first == 2);  // "common"
        CHECK(report.label.has_value());
    }
}

TEST_CASE("prepare_subsets strips unlabeled ground truth") {
    const ProcessedDataset data = dataset_with_counts({{"a", 10}, {"b", 10}});
    const Split split = split_dataset(data, 0.1, 0.2);
    REQUIRE(!split.unlabeled_ids.empty());
    const ExperimentSubsets subsets = prepare_subsets(data, split);
    for (const TokenizedReport& report : subsets.unlabeled.reports) {
        CHECK_FALSE(report.label.has_value());
        CHECK(split.hidden_labels.count(report.report_id) == 1);
    }
    for (const TokenizedReport& report : subsets.labeled.reports) {
        CHECK(report.label.has_value());
    }
}

TEST_CASE("accuracy_at_n counts hand-verified hits") {
    const NBModel model = hand_ranked_model();
    const std::vector<TokenizedReport> test = {
        labeled_empty_report(1, 0),  // rank 1
        labeled_empty_report(2, 1),  // rank 2
        labeled_empty_report(3, 2),  // rank 3
        labeled_empty_report(4, 3),  // rank 4
    };
    CHECK(accuracy_at_n(model, test, 3) == doctest::Approx(0.75));
    CHECK(accuracy_at_n(model, test, 1) == doctest::Approx(0.25));
    CHECK(accuracy_at_n(model, test, 4) == doctest::Approx(1.0));

    // n at the developer count is always exact recall.
    CHECK(accuracy_at_n(model, test, model.developer_count()) == 1.0);

    CHECK_THROWS_AS(accuracy_at_n(model, std::vector<TokenizedReport>{}, 1), DataError);
    std::vector<TokenizedReport> unlabeled = {TokenizedReport{}};
    CHECK_THROWS_AS(accuracy_at_n(model, unlabeled, 1), DataError);
}

TEST_CASE("accuracy_curve agrees with accuracy_at_n and is monotone") {
    const MixtureCorpus corpus = make_mixture({4, 40, 12.0, 6, 30, 20, 3.0}, 13);
    const NBModel model = train_nb(corpus.labeled, 1.0);
    const std::vector<double> curve = accuracy_curve(model, corpus.test.reports, 4);
    for (int n = 1; n <= 4; ++n) {
        CHECK(curve[static_cast<std::size_t>(n - 1)] ==
              doctest::Approx(accuracy_at_n(model, corpus.test.reports, n)));
        if (n > 1) {
            CHECK(curve[static_cast<std::size_t>(n - 1)] >=
                  curve[static_cast<std::size_t>(n - 2)]);
        }
    }
    CHECK(curve[3] == doctest::Approx(1.0));  // n = |D|
}

TEST_CASE("select_lambda returns a singleton grid unchanged") {
    const MixtureCorpus corpus = make_mixture({3, 30, 10.0, 6, 20, 5, 3.0}, 2);
    const std::vector<double> grid = {0.3};
    const LambdaSelection selection =
        select_lambda(corpus.labeled, corpus.unlabeled, grid, 2, EMConfig{});
    CHECK(selection.lambda == 0.3);
    CHECK(selection.mean_accuracy.size() == 1);
}

TEST_CASE("select_lambda breaks exact ties toward the smaller lambda") {
    // No unlabeled reports: every lambda trains the same supervised model, so
    // all grid values tie exactly.
    const MixtureCorpus corpus = make_mixture({3, 30, 10.0, 6, 1, 5, 3.0}, 3);
    ProcessedDataset empty = corpus.unlabeled;
    empty.reports.clear();
    const std::vector<double> grid = {0.8, 0.2, 0.5};
    const LambdaSelection selection =
        select_lambda(corpus.labeled, empty, grid, 2, EMConfig{});
    CHECK(selection.lambda == 0.2);
    CHECK(selection.mean_accuracy[0] == selection.mean_accuracy[1]);
    CHECK(selection.mean_accuracy[1] == selection.mean_accuracy[2]);
}

TEST_CASE("select_lambda prefers the weight factor that uses unlabeled data well") {
    // Scarce labels, plenty of unlabeled reports from the same mixture: the
    // generator guarantees the semi-supervised assumption holds.
    MixtureSpec spec;
    spec.classes = 3;
    spec.vocab_size = 60;
    spec.mean_doc_length = 10.0;
    spec.labeled_per_class = 4;
    spec.unlabeled_per_class = 120;
    spec.test_per_class = 1;
    spec.boost = 3.0;
    const MixtureCorpus corpus = make_mixture(spec, 1);
    const std::vector<double> grid = {0.0, 0.5};
    const LambdaSelection selection =
        select_lambda(corpus.labeled, corpus.unlabeled, grid, 2, EMConfig{}, 0);
    CHECK(selection.lambda == 0.5);
    CHECK(selection.mean_accuracy[1] > selection.mean_accuracy[0]);
}

TEST_CASE("select_lambda validates its inputs") {
    const MixtureCorpus corpus = make_mixture({3, 30, 10.0, 4, 10, 2, 3.0}, 4);
    CHECK_THROWS_AS(
        select_lambda(corpus.labeled, corpus.unlabeled, std::vector<double>{}, 2, EMConfig{}),
        UsageError);
    CHECK_THROWS_AS(select_lambda(corpus.labeled, corpus.unlabeled, std::vector<double>{0.5}, 1,
                                  EMConfig{}),
                    UsageError);
    CHECK_THROWS_AS(select_lambda(corpus.labeled, corpus.unlabeled, std::vector<double>{1.5}, 2,
                                  EMConfig{}),
                    UsageError);
}

TEST_CASE("run_experiment emits monotone accuracy rows") {
    // A fully labeled dataset: the labeled side of a mixture with everything
    // else turned off.
    const ProcessedDataset data = make_mixture({4, 40, 10.0, 36, 0, 0, 3.0}, 6).labeled;

    ExperimentOptions options;
    options.labeled_frac = 0.2;
    options.test_frac = 0.3;
    options.lambda = 0.5;
    const EvaluationReport report =
        run_experiment(data, {Method::NB, Method::NBEM}, 4, EMConfig{}, options);
    REQUIRE(report.methods.size() == 2);
    for (const MethodResult& row : report.methods) {
        REQUIRE(row.accuracy.size() == 4);
        for (std::size_t n = 1; n < row.accuracy.size(); ++n) {
            CHECK(row.accuracy[n] >= row.accuracy[n - 1]);
        }
        CHECK(row.accuracy.back() == doctest::Approx(1.0));  // n = |D|
    }
    CHECK(report.methods[0].lambda.has_value() == false);
    CHECK(report.methods[1].lambda == 0.5);
}

TEST_CASE("run_experiment with lambda=0 gives NB and NBEM identical rows") {
    const ProcessedDataset data = make_mixture({3, 30, 10.0, 30, 0, 0, 3.0}, 9).labeled;
    ExperimentOptions options;
    options.labeled_frac = 0.15;
    options.test_frac = 0.25;
    options.lambda = 0.0;
    const EvaluationReport report =
        run_experiment(data, {Method::NB, Method::NBEM}, 3, EMConfig{}, options);
    REQUIRE(report.methods.size() == 2);
    CHECK(report.methods[0].accuracy == report.methods[1].accuracy);
}

TEST_CASE("run_experiment is reproducible for a fixed seed") {
    const MixtureCorpus corpus = make_mixture({3, 30, 10.0, 8, 10, 4, 3.0}, 12);
    ProcessedDataset data = corpus.labeled;
    ExperimentOptions options;
    options.labeled_frac = 0.3;
    options.test_frac = 0.3;
    options.split_mode = SplitMode::Random;
    options.seed = 5;
    options.lambda = 0.4;
    const EvaluationReport a = run_experiment(data, {Method::NB, Method::NBEM}, 3, EMConfig{}, options);
    const EvaluationReport b = run_experiment(data, {Method::NB, Method::NBEM}, 3, EMConfig{}, options);
    CHECK(report_table_text(a) == report_table_text(b));
    for (std::size_t i = 0; i < a.methods.size(); ++i) {
        CHECK(a.methods[i].accuracy == b.methods[i].accuracy);
    }
}

TEST_CASE("run_sweep produces one series per method and list size") {
    const MixtureCorpus corpus = make_mixture({3, 30, 10.0, 10, 10, 4, 3.0}, 15);
    ProcessedDataset data = corpus.labeled;
    ExperimentOptions options;
    options.labeled_frac = 0.3;
    options.test_frac = 0.3;
    const std::vector<double> grid = {0.0, 0.5, 1.0};
    EMConfig base;
    base.list_size = 3;
    const SweepReport report = run_sweep(data, {Method::NB, Method::NBEM, Method::NBEM_WRL}, grid,
                                         {1, 3}, base, options);
    REQUIRE(report.methods.size() == 3);
    for (const SweepMethod& method : report.methods) {
        REQUIRE(method.series.size() == 2);
        for (const SweepSeries& series : method.series) {
            CHECK(series.accuracy.size() == grid.size());
        }
    }
    // NB ignores lambda: its series are flat.
    for (const SweepSeries& series : report.methods[0].series) {
        for (double a : series.accuracy) {
            CHECK(a == series.accuracy[0]);
        }
    }
    // Reading the documented schemas back.
    CHECK(sweep_json_text(report).find("\"lambda_grid\"") != std::string::npos);
    CHECK(report_table_text(run_experiment(data, {Method::NB}, 2, EMConfig{}, options))
              .find("List size") != std::string::npos);
}
