#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "triage/classifier.hpp"
#include "triage/corpus.hpp"
#include "triage/errors.hpp"
#include "triage/eval.hpp"
#include "triage/preprocess.hpp"
#include "triage/semisupervised.hpp"

namespace {

using namespace triage;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

struct CommonPreprocess {
    std::string stoplist_path;
    int min_token_len = 2;
    int min_report_freq = 3;

    Stoplist stoplist() const {
        return stoplist_path.empty() ? Stoplist::default_english() : Stoplist::load(stoplist_path);
    }
};

void add_preprocess_options(CLI::App* cmd, CommonPreprocess& opts) {
    cmd->add_option("--stoplist", opts.stoplist_path,
                    "Stoplist file (one word per line, '#' comments); default: built-in English");
    cmd->add_option("--min-token-len", opts.min_token_len, "Minimum token length")
        ->capture_default_str();
    cmd->add_option("--min-report-freq", opts.min_report_freq,
                    "Keep words appearing in at least this many reports")
        ->capture_default_str();
}

struct TrainKnobs {
    std::string lambda = "auto";
    int list_size = 5;
    int max_iterations = 50;
    double min_improvement = 1e-4;
    double alpha = 1.0;
    std::string lambda_grid = "0:1:0.1";
    int folds = 5;
    std::uint64_t seed = 0;
    int threads = 1;
};

void add_train_options(CLI::App* cmd, TrainKnobs& knobs) {
    cmd->add_option("--lambda", knobs.lambda,
                    "Weight factor in [0,1], or 'auto' for cross-validated selection")
        ->capture_default_str();
    cmd->add_option("--list-size", knobs.list_size,
                    "Pseudo-label list size for nbem-wrl (nbem always uses 1)")
        ->capture_default_str();
    cmd->add_option("--max-iterations", knobs.max_iterations, "EM iteration cap")
        ->capture_default_str();
    cmd->add_option("--min-improvement", knobs.min_improvement,
                    "Convergence threshold on the monitored score")
        ->capture_default_str();
    cmd->add_option("--alpha", knobs.alpha, "Add-alpha smoothing constant")
        ->capture_default_str();
    cmd->add_option("--lambda-grid", knobs.lambda_grid,
                    "Grid for 'auto' lambda: start:stop:step or comma list")
        ->capture_default_str();
    cmd->add_option("--folds", knobs.folds, "Cross-validation folds for 'auto' lambda")
        ->capture_default_str();
    cmd->add_option("--seed", knobs.seed, "Seed for randomized paths")->capture_default_str();
    cmd->add_option("--threads", knobs.threads, "Worker threads (1 = bit-reproducible)")
        ->capture_default_str();
}

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> grid;
    const auto to_double = [](const std::string& s) {
        try {
            std::size_t used = 0;
            const double value = std::stod(s, &used);
            if (used != s.size()) {
                throw UsageError("invalid number '" + s + "' in lambda grid");
            }
            return value;
        } catch (const UsageError&) {
            throw;
        } catch (const std::exception&) {
            throw UsageError("invalid number '" + s + "' in lambda grid");
        }
    };
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::size_t begin = 0;
        while (true) {
            const std::size_t sep = text.find(':', begin);
            parts.push_back(text.substr(begin, sep - begin));
            if (sep == std::string::npos) {
                break;
            }
            begin = sep + 1;
        }
        if (parts.size() != 3) {
            throw UsageError("grid range must be start:stop:step");
        }
        const double start = to_double(parts[0]);
        const double stop = to_double(parts[1]);
        const double step = to_double(parts[2]);
        if (step <= 0.0 || stop < start) {
            throw UsageError("grid range must satisfy start <= stop with step > 0");
        }
        const int steps = static_cast<int>(std::floor((stop - start) / step + 1e-9));
        for (int i = 0; i <= steps; ++i) {
            grid.push_back(start + static_cast<double>(i) * step);
        }
    } else {
        std::size_t begin = 0;
        while (begin <= text.size()) {
            const std::size_t sep = text.find(',', begin);
            const std::string item =
                text.substr(begin, sep == std::string::npos ? sep : sep - begin);
            if (!item.empty()) {
                grid.push_back(to_double(item));
            }
            if (sep == std::string::npos) {
                break;
            }
            begin = sep + 1;
        }
    }
    if (grid.empty()) {
        throw UsageError("lambda grid is empty");
    }
    return grid;
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> values;
    std::size_t begin = 0;
    while (begin <= text.size()) {
        const std::size_t sep = text.find(',', begin);
        const std::string item = text.substr(begin, sep == std::string::npos ? sep : sep - begin);
        if (!item.empty()) {
            try {
                values.push_back(std::stoi(item));
            } catch (const std::exception&) {
                throw UsageError("invalid integer '" + item + "'");
            }
        }
        if (sep == std::string::npos) {
            break;
        }
        begin = sep + 1;
    }
    if (values.empty()) {
        throw UsageError("integer list is empty");
    }
    return values;
}

std::vector<Method> parse_methods(const std::string& text) {
    std::vector<Method> methods;
    std::size_t begin = 0;
    while (begin <= text.size()) {
        const std::size_t sep = text.find(',', begin);
        const std::string item = text.substr(begin, sep == std::string::npos ? sep : sep - begin);
        if (!item.empty()) {
            const auto method = parse_method(item);
            if (!method) {
                throw UsageError("unknown method '" + item + "' (expected nb, nbem, nbem-wrl)");
            }
            methods.push_back(*method);
        }
        if (sep == std::string::npos) {
            break;
        }
        begin = sep + 1;
    }
    if (methods.empty()) {
        throw UsageError("method list is empty");
    }
    return methods;
}

CorpusFormat parse_format(const std::string& text) {
    if (text == "jsonl") {
        return CorpusFormat::Jsonl;
    }
    if (text == "bugzilla-xml") {
        return CorpusFormat::BugzillaXml;
    }
    throw UsageError("unknown format '" + text + "' (expected jsonl or bugzilla-xml)");
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write '" + path.string() + "'");
    }
    out << text;
    if (!out) {
        throw DataError("failed writing '" + path.string() + "'");
    }
}

// Splits a dataset file into the labeled and unlabeled training subsets.
std::pair<ProcessedDataset, ProcessedDataset> partition_by_label(const ProcessedDataset& data) {
    ProcessedDataset labeled;
    ProcessedDataset unlabeled;
    for (ProcessedDataset* subset : {&labeled, &unlabeled}) {
        subset->vocabulary = data.vocabulary;
        subset->developers = data.developers;
        subset->min_report_freq = data.min_report_freq;
    }
    for (const TokenizedReport& report : data.reports) {
        (report.label ? labeled : unlabeled).reports.push_back(report);
    }
    return {std::move(labeled), std::move(unlabeled)};
}

// --- subcommands ---

int cmd_ingest(const std::string& input, const std::string& format, const std::string& output,
               int min_fixed) {
    const RawCorpus raw = parse_corpus(input, parse_format(format));
    const RawCorpus lifecycle = filter_lifecycle(raw);
    const RawCorpus kept = filter_developers(lifecycle, min_fixed);
    write_corpus(kept, output);
    std::cerr << "ingest: parsed " << raw.reports.size() << ", lifecycle kept "
              << lifecycle.reports.size() << " (removed "
              << raw.reports.size() - lifecycle.reports.size() << "), developer filter kept "
              << kept.reports.size() << " (removed "
              << lifecycle.reports.size() - kept.reports.size() << ")\n";
    return kExitOk;
}

int cmd_preprocess(const std::string& input, const std::string& output,
                   const CommonPreprocess& opts) {
    const RawCorpus corpus = parse_corpus(input, CorpusFormat::Jsonl);
    const VectorizeResult result =
        preprocess_corpus(corpus, opts.stoplist(), opts.min_token_len, opts.min_report_freq);
    save_dataset(result.dataset, output);
    std::cerr << "preprocess: " << result.dataset.reports.size() << " reports, "
              << result.dataset.vocabulary.size() << " words, "
              << result.dataset.developers.size() << " developers";
    if (!result.excluded_ids.empty()) {
        std::cerr << "; excluded " << result.excluded_ids.size() << " empty report(s):";
        for (std::int64_t id : result.excluded_ids) {
            std::cerr << ' ' << id;
        }
    }
    std::cerr << '\n';
    return kExitOk;
}

int cmd_train(const std::string& input, const std::string& output, const std::string& trace_path,
              const std::string& method_text, const TrainKnobs& knobs, bool list_size_given) {
    const auto method = parse_method(method_text);
    if (!method) {
        throw UsageError("unknown method '" + method_text + "' (expected nb, nbem, nbem-wrl)");
    }
    if (*method == Method::NBEM && list_size_given && knobs.list_size != 1) {
        throw UsageError("nbem uses list size 1; use --method nbem-wrl for larger lists");
    }

    const ProcessedDataset data = load_dataset(input);
    auto [labeled, unlabeled] = partition_by_label(data);

    if (*method == Method::NB) {
        const NBModel model = train_nb(labeled, knobs.alpha);
        save_model(model, output);
        std::cerr << "train: nb on " << labeled.reports.size() << " labeled reports, |W|="
                  << model.vocabulary_size() << ", |D|=" << model.developer_count() << '\n';
        return kExitOk;
    }

    EMConfig config;
    config.list_size = *method == Method::NBEM ? 1 : knobs.list_size;
    config.max_iterations = knobs.max_iterations;
    config.min_improvement = knobs.min_improvement;
    config.alpha = knobs.alpha;
    if (knobs.lambda == "auto") {
        const std::vector<double> grid = parse_grid(knobs.lambda_grid);
        config.lambda = select_lambda(labeled, unlabeled, grid, knobs.folds, config, knobs.seed,
                                      knobs.threads)
                            .lambda;
        std::cerr << "train: selected lambda " << config.lambda << " by " << knobs.folds
                  << "-fold cross-validation\n";
    } else {
        try {
            config.lambda = std::stod(knobs.lambda);
        } catch (const std::exception&) {
            throw UsageError("--lambda expects a number in [0,1] or 'auto'");
        }
    }

    auto [model, trace] = train_semisupervised(labeled, unlabeled, config, knobs.threads);
    save_model(model, output);
    const std::string trace_file =
        trace_path.empty() ? output + ".trace.jsonl" : trace_path;
    write_trace(trace, trace_file);
    std::cerr << "train: " << model.provenance.method << " lambda=" << config.lambda
              << " list_size=" << config.list_size << " iterations="
              << model.provenance.iterations << " best_iteration=" << trace.best_iteration
              << " monitor=" << trace.monitor << '\n';
    return kExitOk;
}

int cmd_predict(const std::string& model_path, const std::string& input, const std::string& text,
                int top, const std::string& stoplist_path, int min_token_len) {
    if (top < 1) {
        throw UsageError("--top must be at least 1");
    }
    if ((input.empty() && text.empty()) || (!input.empty() && !text.empty())) {
        throw UsageError("predict needs exactly one of --input or --text");
    }
    const NBModel model = load_model(model_path);
    const Stoplist stoplist =
        stoplist_path.empty() ? Stoplist::default_english() : Stoplist::load(stoplist_path);
    const Vocabulary vocab = Vocabulary::from_words(model.vocabulary);

    const auto vectorize_text = [&](const std::string& body, std::int64_t id) {
        TokenizedReport report;
        report.report_id = id;
        for (const auto& [word, count] : tokenize(body, stoplist, min_token_len)) {
            auto it = vocab.index.find(word);
            if (it != vocab.index.end()) {
                report.counts.emplace_back(it->second, count);
            }
        }
        return report;
    };

    if (!text.empty()) {
        const TokenizedReport report = vectorize_text(text, 0);
        const auto list = recommend(model, report, top);
        for (std::size_t q = 0; q < list.size(); ++q) {
            std::printf("%zu\t%s\t%.6f\n", q + 1,
                        model.developers[static_cast<std::size_t>(list[q].first)].c_str(),
                        list[q].second);
        }
        return kExitOk;
    }

    const RawCorpus corpus = parse_corpus(input, CorpusFormat::Jsonl);
    for (const BugReport& bug : corpus.reports) {
        const TokenizedReport report =
            vectorize_text(bug.summary + " " + bug.description, bug.id);
        const auto list = recommend(model, report, top);
        for (std::size_t q = 0; q < list.size(); ++q) {
            std::printf("%lld\t%zu\t%s\t%.6f\n", static_cast<long long>(bug.id), q + 1,
                        model.developers[static_cast<std::size_t>(list[q].first)].c_str(),
                        list[q].second);
        }
    }
    return kExitOk;
}

ExperimentOptions make_options(const TrainKnobs& knobs, double labeled_frac, double test_frac,
                               bool random_split) {
    ExperimentOptions options;
    options.labeled_frac = labeled_frac;
    options.test_frac = test_frac;
    options.split_mode = random_split ? SplitMode::Random : SplitMode::Chronological;
    if (knobs.lambda != "auto") {
        try {
            options.lambda = std::stod(knobs.lambda);
        } catch (const std::exception&) {
            throw UsageError("--lambda expects a number in [0,1] or 'auto'");
        }
    }
    options.lambda_grid = parse_grid(knobs.lambda_grid);
    options.folds = knobs.folds;
    options.seed = knobs.seed;
    options.threads = knobs.threads;
    return options;
}

EMConfig make_em_config(const TrainKnobs& knobs, int default_list_size, bool list_size_given) {
    EMConfig config;
    config.list_size = list_size_given ? knobs.list_size : default_list_size;
    config.max_iterations = knobs.max_iterations;
    config.min_improvement = knobs.min_improvement;
    config.alpha = knobs.alpha;
    return config;
}

int cmd_eval(const std::string& input, const std::string& output, const std::string& methods_text,
             int max_list, double labeled_frac, double test_frac, bool random_split,
             const CommonPreprocess& pre, const TrainKnobs& knobs, bool list_size_given) {
    const RawCorpus corpus = parse_corpus(input, CorpusFormat::Jsonl);
    const VectorizeResult processed =
        preprocess_corpus(corpus, pre.stoplist(), pre.min_token_len, pre.min_report_freq);
    const std::vector<Method> methods = parse_methods(methods_text);
    const ExperimentOptions options = make_options(knobs, labeled_frac, test_frac, random_split);
    const EMConfig config = make_em_config(knobs, max_list, list_size_given);

    const EvaluationReport report =
        run_experiment(processed.dataset, methods, max_list, config, options);
    const std::string table = report_table_text(report);
    write_text_file(output + ".txt", table);
    write_text_file(output + ".json", report_json_text(report));
    std::cout << table;
    std::cerr << "eval: wrote " << output << ".txt and " << output << ".json\n";
    return kExitOk;
}

int cmd_sweep(const std::string& input, const std::string& output, const std::string& methods_text,
              const std::string& list_sizes_text, double labeled_frac, double test_frac,
              bool random_split, const CommonPreprocess& pre, const TrainKnobs& knobs,
              bool list_size_given) {
    const RawCorpus corpus = parse_corpus(input, CorpusFormat::Jsonl);
    const VectorizeResult processed =
        preprocess_corpus(corpus, pre.stoplist(), pre.min_token_len, pre.min_report_freq);
    const std::vector<Method> methods = parse_methods(methods_text);
    const std::vector<double> grid = parse_grid(knobs.lambda_grid);
    const std::vector<int> list_sizes = parse_int_list(list_sizes_text);
    const ExperimentOptions options = make_options(knobs, labeled_frac, test_frac, random_split);
    const int max_list = *std::max_element(list_sizes.begin(), list_sizes.end());
    const EMConfig config = make_em_config(knobs, max_list, list_size_given);

    const SweepReport report =
        run_sweep(processed.dataset, methods, grid, list_sizes, config, options);
    write_text_file(output + ".txt", sweep_table_text(report));
    write_text_file(output + ".json", sweep_json_text(report));
    std::cerr << "sweep: wrote " << output << ".txt and " << output << ".json\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semi-supervised bug triage: naive Bayes, EM, weighted recommendation lists"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Key-value config file; command-line flags take precedence");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Parse and filter a raw corpus");
    std::string in_input, in_format = "jsonl", in_output;
    int in_min_fixed = 1;
    ingest->add_option("--input", in_input, "Raw corpus file")->required();
    ingest->add_option("--format", in_format, "Input format: jsonl or bugzilla-xml")
        ->capture_default_str();
    ingest->add_option("--output", in_output, "Normalized corpus output (jsonl)")->required();
    ingest->add_option("--min-fixed", in_min_fixed,
                       "Drop developers who fixed fewer than this many reports")
        ->capture_default_str();

    // preprocess
    auto* preprocess = app.add_subcommand("preprocess", "Corpus to sparse word-count dataset");
    std::string pp_input, pp_output;
    CommonPreprocess pp_opts;
    preprocess->add_option("--input", pp_input, "Normalized corpus (jsonl)")->required();
    preprocess->add_option("--output", pp_output, "Dataset output (json)")->required();
    add_preprocess_options(preprocess, pp_opts);

    // train
    auto* train = app.add_subcommand("train", "Train a model on a dataset file");
    std::string tr_input, tr_output, tr_trace, tr_method = "nb";
    TrainKnobs tr_knobs;
    train->add_option("--input", tr_input, "Dataset file from preprocess")->required();
    train->add_option("--output", tr_output, "Model output (json)")->required();
    train->add_option("--trace", tr_trace, "EM trace output (default: <output>.trace.jsonl)");
    train->add_option("--method", tr_method, "nb, nbem, or nbem-wrl")->capture_default_str();
    add_train_options(train, tr_knobs);

    // predict
    auto* predict = app.add_subcommand("predict", "Rank developers for incoming reports");
    std::string pr_model, pr_input, pr_text, pr_stoplist;
    int pr_top = 5;
    int pr_min_token_len = 2;
    predict->add_option("--model", pr_model, "Model file")->required();
    predict->add_option("--input", pr_input, "Reports to score (jsonl)");
    predict->add_option("--text", pr_text, "Score a single report given as text");
    predict->add_option("--top", pr_top, "Recommendation list size")->capture_default_str();
    predict->add_option("--stoplist", pr_stoplist, "Stoplist file; default: built-in English");
    predict->add_option("--min-token-len", pr_min_token_len, "Minimum token length")
        ->capture_default_str();

    // eval
    auto* eval = app.add_subcommand("eval", "Split, train, and tabulate accuracy by list size");
    std::string ev_input, ev_output, ev_methods = "nb,nbem,nbem-wrl";
    int ev_max_list = 5;
    double ev_labeled_frac = 0.05, ev_test_frac = 0.20;
    bool ev_random_split = false;
    CommonPreprocess ev_pre;
    TrainKnobs ev_knobs;
    eval->add_option("--input", ev_input, "Labeled corpus (jsonl)")->required();
    eval->add_option("--output", ev_output, "Report base path (writes .txt and .json)")
        ->required();
    eval->add_option("--methods", ev_methods, "Comma list of nb, nbem, nbem-wrl")
        ->capture_default_str();
    eval->add_option("--max-list", ev_max_list, "Largest recommendation list size")
        ->capture_default_str();
    eval->add_option("--labeled-frac", ev_labeled_frac, "Labeled fraction per developer")
        ->capture_default_str();
    eval->add_option("--test-frac", ev_test_frac, "Test fraction per developer")
        ->capture_default_str();
    eval->add_flag("--random-split", ev_random_split,
                   "Seeded random split instead of chronological");
    add_preprocess_options(eval, ev_pre);
    add_train_options(eval, ev_knobs);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Accuracy series over a lambda grid");
    std::string sw_input, sw_output, sw_methods = "nbem,nbem-wrl", sw_list_sizes = "1,3,5";
    double sw_labeled_frac = 0.05, sw_test_frac = 0.20;
    bool sw_random_split = false;
    CommonPreprocess sw_pre;
    TrainKnobs sw_knobs;
    sweep->add_option("--input", sw_input, "Labeled corpus (jsonl)")->required();
    sweep->add_option("--output", sw_output, "Report base path (writes .txt and .json)")
        ->required();
    sweep->add_option("--methods", sw_methods, "Comma list of nb, nbem, nbem-wrl")
        ->capture_default_str();
    sweep->add_option("--list-sizes", sw_list_sizes, "Comma list of evaluation list sizes")
        ->capture_default_str();
    sweep->add_option("--labeled-frac", sw_labeled_frac, "Labeled fraction per developer")
        ->capture_default_str();
    sweep->add_option("--test-frac", sw_test_frac, "Test fraction per developer")
        ->capture_default_str();
    sweep->add_flag("--random-split", sw_random_split,
                    "Seeded random split instead of chronological");
    add_preprocess_options(sweep, sw_pre);
    add_train_options(sweep, sw_knobs);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (ingest->parsed()) {
            return cmd_ingest(in_input, in_format, in_output, in_min_fixed);
        }
        if (preprocess->parsed()) {
            return cmd_preprocess(pp_input, pp_output, pp_opts);
        }
        if (train->parsed()) {
            return cmd_train(tr_input, tr_output, tr_trace, tr_method, tr_knobs,
                             train->count("--list-size") > 0);
        }
        if (predict->parsed()) {
            return cmd_predict(pr_model, pr_input, pr_text, pr_top, pr_stoplist,
                               pr_min_token_len);
        }
        if (eval->parsed()) {
            return cmd_eval(ev_input, ev_output, ev_methods, ev_max_list, ev_labeled_frac,
                            ev_test_frac, ev_random_split, ev_pre, ev_knobs,
                            eval->count("--list-size") > 0);
        }
        if (sweep->parsed()) {
            return cmd_sweep(sw_input, sw_output, sw_methods, sw_list_sizes, sw_labeled_frac,
                             sw_test_frac, sw_random_split, sw_pre, sw_knobs,
                             sweep->count("--list-size") > 0);
        }
        std::cerr << "error: no subcommand given\n";
        return kExitUsage;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
}
