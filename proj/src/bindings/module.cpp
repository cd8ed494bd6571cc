#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "triage/classifier.hpp"
#include "triage/corpus.hpp"
#include "triage/errors.hpp"
#include "triage/eval.hpp"
#include "triage/preprocess.hpp"
#include "triage/semisupervised.hpp"

namespace py = pybind11;
using namespace triage;

namespace {

CorpusFormat format_from_string(const std::string& text) {
    if (text == "jsonl") {
        return CorpusFormat::Jsonl;
    }
    if (text == "bugzilla-xml") {
        return CorpusFormat::BugzillaXml;
    }
    throw UsageError("unknown format '" + text + "' (expected jsonl or bugzilla-xml)");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Semi-supervised bug triage: naive Bayes, EM, weighted recommendation lists";

    py::register_exception<DataError>(m, "DataError");
    py::register_exception<UsageError>(m, "UsageError");

    // corpus
    py::class_<BugReport>(m, "BugReport")
        .def(py::init<>())
        .def_readwrite("id", &BugReport::id)
        .def_readwrite("summary", &BugReport::summary)
        .def_readwrite("description", &BugReport::description)
        .def_readwrite("developer", &BugReport::developer)
        .def_readwrite("status", &BugReport::status)
        .def_readwrite("resolution", &BugReport::resolution)
        .def_readwrite("submit_order", &BugReport::submit_order);

    py::class_<RawCorpus>(m, "RawCorpus")
        .def(py::init<>())
        .def_readwrite("reports", &RawCorpus::reports)
        .def_readwrite("source_note", &RawCorpus::source_note);

    m.def("parse_corpus",
          [](const std::filesystem::path& path, const std::string& format) {
              return parse_corpus(path, format_from_string(format));
          },
          py::arg("path"), py::arg("format") = "jsonl");
    m.def("filter_lifecycle", &filter_lifecycle, py::arg("corpus"));
    m.def("filter_developers", &filter_developers, py::arg("corpus"), py::arg("min_fixed"));
    m.def("write_corpus", &write_corpus, py::arg("corpus"), py::arg("path"));

    // preprocess
    py::class_<Stoplist>(m, "Stoplist")
        .def(py::init<>())
        .def_readwrite("words", &Stoplist::words)
        .def("contains", &Stoplist::contains)
        .def_static("none", &Stoplist::none)
        .def_static("default_english", &Stoplist::default_english)
        .def_static("load", &Stoplist::load, py::arg("path"));

    m.def("tokenize",
          [](const std::string& text, std::optional<Stoplist> stoplist, int min_token_len) {
              return tokenize(text, stoplist ? *stoplist : Stoplist::default_english(),
                              min_token_len);
          },
          py::arg("text"), py::arg("stoplist") = std::nullopt, py::arg("min_token_len") = 2);

    py::class_<Vocabulary>(m, "Vocabulary")
        .def_readonly("words", &Vocabulary::words)
        .def("size", &Vocabulary::size)
        .def_static("from_words", &Vocabulary::from_words, py::arg("sorted_words"));

    m.def("build_vocabulary",
          [](const std::vector<TokenBag>& bags, int min_report_freq) {
              return build_vocabulary(bags, min_report_freq);
          },
          py::arg("report_bags"), py::arg("min_report_freq") = 1);

    py::class_<TokenizedReport>(m, "TokenizedReport")
        .def(py::init<>())
        .def_readwrite("report_id", &TokenizedReport::report_id)
        .def_readwrite("counts", &TokenizedReport::counts)
        .def_readwrite("label", &TokenizedReport::label)
        .def("total_tokens", &TokenizedReport::total_tokens);

    py::class_<ProcessedDataset>(m, "ProcessedDataset")
        .def(py::init<>())
        .def_readwrite("vocabulary", &ProcessedDataset::vocabulary)
        .def_readwrite("developers", &ProcessedDataset::developers)
        .def_readwrite("reports", &ProcessedDataset::reports)
        .def_readwrite("min_report_freq", &ProcessedDataset::min_report_freq);

    py::class_<VectorizeInput>(m, "VectorizeInput")
        .def(py::init<>())
        .def(py::init([](std::int64_t id, TokenBag bag, std::optional<std::string> developer) {
                 VectorizeInput input;
                 input.id = id;
                 input.bag = std::move(bag);
                 input.developer = std::move(developer);
                 return input;
             }),
             py::arg("id"), py::arg("bag"), py::arg("developer") = std::nullopt)
        .def_readwrite("id", &VectorizeInput::id)
        .def_readwrite("bag", &VectorizeInput::bag)
        .def_readwrite("developer", &VectorizeInput::developer);

    py::class_<VectorizeResult>(m, "VectorizeResult")
        .def_readwrite("dataset", &VectorizeResult::dataset)
        .def_readwrite("excluded_ids", &VectorizeResult::excluded_ids);

    m.def("vectorize", &vectorize, py::arg("inputs"), py::arg("vocabulary"));
    m.def("bag_corpus",
          [](const RawCorpus& corpus, std::optional<Stoplist> stoplist, int min_token_len) {
              return bag_corpus(corpus, stoplist ? *stoplist : Stoplist::default_english(),
                                min_token_len);
          },
          py::arg("corpus"), py::arg("stoplist") = std::nullopt, py::arg("min_token_len") = 2);
    m.def("preprocess_corpus",
          [](const RawCorpus& corpus, std::optional<Stoplist> stoplist, int min_token_len,
             int min_report_freq) {
              return preprocess_corpus(corpus, stoplist ? *stoplist : Stoplist::default_english(),
                                       min_token_len, min_report_freq);
          },
          py::arg("corpus"), py::arg("stoplist") = std::nullopt, py::arg("min_token_len") = 2,
          py::arg("min_report_freq") = 3);
    m.def("save_dataset", &save_dataset, py::arg("dataset"), py::arg("path"));
    m.def("load_dataset", &load_dataset, py::arg("path"));

    // classifier
    py::class_<ModelProvenance>(m, "ModelProvenance")
        .def_readwrite("method", &ModelProvenance::method)
        .def_readwrite("lambda_", &ModelProvenance::lambda)
        .def_readwrite("list_size", &ModelProvenance::list_size)
        .def_readwrite("iterations", &ModelProvenance::iterations);

    py::class_<NBModel>(m, "NBModel")
        .def(py::init<>())
        .def_readwrite("developers", &NBModel::developers)
        .def_readwrite("vocabulary", &NBModel::vocabulary)
        .def_readwrite("log_prior", &NBModel::log_prior)
        .def_readwrite("log_likelihood", &NBModel::log_likelihood)
        .def_readwrite("alpha", &NBModel::alpha)
        .def_readwrite("provenance", &NBModel::provenance)
        .def("developer_count", &NBModel::developer_count)
        .def("vocabulary_size", &NBModel::vocabulary_size);

    py::class_<Posterior>(m, "Posterior")
        .def_readonly("probs", &Posterior::probs)
        .def_readonly("ranking", &Posterior::ranking);

    m.def("train_nb", &train_nb, py::arg("data"), py::arg("alpha") = 1.0);
    m.def("posterior", &posterior, py::arg("model"), py::arg("report"));
    m.def("recommend", &recommend, py::arg("model"), py::arg("report"), py::arg("n"));
    m.def("save_model", &save_model, py::arg("model"), py::arg("path"));
    m.def("load_model", &load_model, py::arg("path"));

    // semisupervised
    py::class_<EMConfig>(m, "EMConfig")
        .def(py::init([](double lambda, int list_size, int max_iterations, double min_improvement,
                         double alpha) {
                 EMConfig config;
                 config.lambda = lambda;
                 config.list_size = list_size;
                 config.max_iterations = max_iterations;
                 config.min_improvement = min_improvement;
                 config.alpha = alpha;
                 return config;
             }),
             py::arg("lambda_") = 1.0, py::arg("list_size") = 1, py::arg("max_iterations") = 50,
             py::arg("min_improvement") = 1e-4, py::arg("alpha") = 1.0)
        .def_readwrite("lambda_", &EMConfig::lambda)
        .def_readwrite("list_size", &EMConfig::list_size)
        .def_readwrite("max_iterations", &EMConfig::max_iterations)
        .def_readwrite("min_improvement", &EMConfig::min_improvement)
        .def_readwrite("alpha", &EMConfig::alpha);

    m.def("gamma", &triage::gamma, py::arg("n"), py::arg("q"));

    py::class_<SoftLabeling>(m, "SoftLabeling").def_readonly("lists", &SoftLabeling::lists);

    m.def("e_step",
          [](const NBModel& model, const std::vector<TokenizedReport>& unlabeled, int n,
             int threads) { return e_step(model, unlabeled, n, threads); },
          py::arg("model"), py::arg("unlabeled"), py::arg("n"), py::arg("threads") = 1);
    m.def("m_step", &m_step, py::arg("labeled"), py::arg("unlabeled"), py::arg("labeling"),
          py::arg("config"));

    py::class_<TraceEntry>(m, "TraceEntry")
        .def_readonly("iteration", &TraceEntry::iteration)
        .def_readonly("score", &TraceEntry::score)
        .def_readonly("top1_changes", &TraceEntry::top1_changes)
        .def_readonly("seconds", &TraceEntry::seconds);

    py::class_<TrainingTrace>(m, "TrainingTrace")
        .def_readonly("monitor", &TrainingTrace::monitor)
        .def_readonly("entries", &TrainingTrace::entries)
        .def_readonly("best_iteration", &TrainingTrace::best_iteration);

    m.def("train_semisupervised", &train_semisupervised, py::arg("labeled"), py::arg("unlabeled"),
          py::arg("config"), py::arg("threads") = 1);
    m.def("write_trace", &write_trace, py::arg("trace"), py::arg("path"));

    // eval
    py::enum_<SplitMode>(m, "SplitMode")
        .value("Chronological", SplitMode::Chronological)
        .value("Random", SplitMode::Random);

    py::class_<Split::Ratios>(m, "SplitRatios")
        .def_readonly("labeled", &Split::Ratios::labeled)
        .def_readonly("test", &Split::Ratios::test)
        .def_readonly("unlabeled", &Split::Ratios::unlabeled);

    py::class_<Split>(m, "Split")
        .def_readonly("labeled_ids", &Split::labeled_ids)
        .def_readonly("unlabeled_ids", &Split::unlabeled_ids)
        .def_readonly("test_ids", &Split::test_ids)
        .def_readonly("ratios", &Split::ratios)
        .def_readonly("hidden_labels", &Split::hidden_labels);

    m.def("split_dataset", &split_dataset, py::arg("data"), py::arg("labeled_frac"),
          py::arg("test_frac"), py::arg("mode") = SplitMode::Chronological, py::arg("seed") = 0);

    py::class_<ExperimentSubsets>(m, "ExperimentSubsets")
        .def_readonly("labeled", &ExperimentSubsets::labeled)
        .def_readonly("unlabeled", &ExperimentSubsets::unlabeled)
        .def_readonly("test", &ExperimentSubsets::test);

    m.def("prepare_subsets", &prepare_subsets, py::arg("data"), py::arg("split"));
    m.def("accuracy_at_n",
          [](const NBModel& model, const std::vector<TokenizedReport>& test, int n) {
              return accuracy_at_n(model, test, n);
          },
          py::arg("model"), py::arg("test"), py::arg("n"));
    m.def("accuracy_curve",
          [](const NBModel& model, const std::vector<TokenizedReport>& test, int n_max) {
              return accuracy_curve(model, test, n_max);
          },
          py::arg("model"), py::arg("test"), py::arg("n_max"));

    py::class_<LambdaSelection>(m, "LambdaSelection")
        .def_readonly("lambda_", &LambdaSelection::lambda)
        .def_readonly("mean_accuracy", &LambdaSelection::mean_accuracy);

    m.def("select_lambda",
          [](const ProcessedDataset& labeled, const ProcessedDataset& unlabeled,
             const std::vector<double>& grid, int folds, const EMConfig& base, std::uint64_t seed,
             int threads) {
              return select_lambda(labeled, unlabeled, grid, folds, base, seed, threads);
          },
          py::arg("labeled"), py::arg("unlabeled"), py::arg("grid"), py::arg("folds") = 5,
          py::arg("base") = EMConfig{}, py::arg("seed") = 0, py::arg("threads") = 1);

    py::enum_<Method>(m, "Method")
        .value("NB", Method::NB)
        .value("NBEM", Method::NBEM)
        .value("NBEM_WRL", Method::NBEM_WRL);

    m.def("method_name", &method_name, py::arg("method"));
    m.def("default_lambda_grid", &default_lambda_grid);

    py::class_<ExperimentOptions>(m, "ExperimentOptions")
        .def(py::init<>())
        .def_readwrite("labeled_frac", &ExperimentOptions::labeled_frac)
        .def_readwrite("test_frac", &ExperimentOptions::test_frac)
        .def_readwrite("split_mode", &ExperimentOptions::split_mode)
        .def_readwrite("lambda_", &ExperimentOptions::lambda)
        .def_readwrite("lambda_grid", &ExperimentOptions::lambda_grid)
        .def_readwrite("folds", &ExperimentOptions::folds)
        .def_readwrite("seed", &ExperimentOptions::seed)
        .def_readwrite("threads", &ExperimentOptions::threads);

    py::class_<MethodResult>(m, "MethodResult")
        .def_readonly("method", &MethodResult::method)
        .def_readonly("lambda_", &MethodResult::lambda)
        .def_readonly("seconds", &MethodResult::seconds)
        .def_readonly("accuracy", &MethodResult::accuracy);

    py::class_<EvaluationReport>(m, "EvaluationReport")
        .def_readonly("report_count", &EvaluationReport::report_count)
        .def_readonly("developer_count", &EvaluationReport::developer_count)
        .def_readonly("n_max", &EvaluationReport::n_max)
        .def_readonly("seed", &EvaluationReport::seed)
        .def_readonly("methods", &EvaluationReport::methods);

    m.def("run_experiment", &run_experiment, py::arg("data"), py::arg("methods"),
          py::arg("n_max"), py::arg("base") = EMConfig{},
          py::arg("options") = ExperimentOptions{});

    py::class_<SweepSeries>(m, "SweepSeries")
        .def_readonly("list_size", &SweepSeries::list_size)
        .def_readonly("accuracy", &SweepSeries::accuracy);

    py::class_<SweepMethod>(m, "SweepMethod")
        .def_readonly("method", &SweepMethod::method)
        .def_readonly("series", &SweepMethod::series);

    py::class_<SweepReport>(m, "SweepReport")
        .def_readonly("report_count", &SweepReport::report_count)
        .def_readonly("developer_count", &SweepReport::developer_count)
        .def_readonly("seed", &SweepReport::seed)
        .def_readonly("grid", &SweepReport::grid)
        .def_readonly("list_sizes", &SweepReport::list_sizes)
        .def_readonly("methods", &SweepReport::methods);

    m.def("run_sweep", &run_sweep, py::arg("data"), py::arg("methods"), py::arg("grid"),
          py::arg("list_sizes"), py::arg("base") = EMConfig{},
          py::arg("options") = ExperimentOptions{});

    m.def("report_table_text", &report_table_text, py::arg("report"));
    m.def("report_json_text", &report_json_text, py::arg("report"));
    m.def("sweep_table_text", &sweep_table_text, py::arg("report"));
    m.def("sweep_json_text", &sweep_json_text, py::arg("report"));
}
