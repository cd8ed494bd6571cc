#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <string>

#include "doctest.h"

#include "json.hpp"
#include "support/helpers.hpp"
#include "support/synthetic.hpp"
#include "triage/corpus.hpp"

using namespace triage;
using namespace triage::testsupport;

namespace {

int run(const std::string& command) {
    const int status = std::system(command.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string quiet(const std::filesystem::path& log) { return " 2>> " + log.string(); }

}  // namespace

TEST_CASE("cli pipeline: ingest, preprocess, train, predict, eval, sweep") {
    const std::string cli = cli_path();
    REQUIRE_MESSAGE(!cli.empty(), "TRIAGE_CLI must point at the built binary");

    TempDir dir;
    const auto log = dir.file("stderr.log");
    const auto corpus_path = dir.file("raw.jsonl");
    write_corpus(make_mixture_raw_corpus({4, 60, 12.0, 6, 14, 5, 3.5}, 1234), corpus_path);

    // ingest (jsonl passthrough of an already-normalized corpus)
    const auto normalized = dir.file("corpus.jsonl");
    CHECK(run(cli + " ingest --input " + corpus_path.string() + " --output " +
              normalized.string() + quiet(log)) == 0);

    // preprocess
    const auto dataset = dir.file("dataset.json");
    CHECK(run(cli + " preprocess --input " + normalized.string() + " --output " +
              dataset.string() + " --min-report-freq 2" + quiet(log)) == 0);

    // A training file with hidden labels: strip 60% of the labels.
    const auto train_dataset = dir.file("train.json");
    {
        ProcessedDataset data = load_dataset(dataset);
        for (std::size_t i = 0; i < data.reports.size(); ++i) {
            if (i % 5 != 0 && i % 5 != 1) {
                data.reports[i].label.reset();
            }
        }
        save_dataset(data, train_dataset);
    }

    // lambda=0 degeneration at the CLI surface: byte-equal predictions.
    const auto model_nb = dir.file("nb.json");
    const auto model_em0 = dir.file("em0.json");
    CHECK(run(cli + " train --input " + train_dataset.string() + " --method nb --output " +
              model_nb.string() + quiet(log)) == 0);
    CHECK(run(cli + " train --input " + train_dataset.string() +
              " --method nbem --lambda 0 --output " + model_em0.string() + quiet(log)) == 0);
    const auto pred_nb = dir.file("pred_nb.tsv");
    const auto pred_em0 = dir.file("pred_em0.tsv");
    CHECK(run(cli + " predict --model " + model_nb.string() + " --input " + normalized.string() +
              " --top 3 > " + pred_nb.string() + quiet(log)) == 0);
    CHECK(run(cli + " predict --model " + model_em0.string() + " --input " + normalized.string() +
              " --top 3 > " + pred_em0.string() + quiet(log)) == 0);
    CHECK(read_file(pred_nb) == read_file(pred_em0));
    CHECK(!read_file(pred_nb).empty());

    // nbem-wrl with list size 1 is nbem: byte-identical model files.
    const auto model_em = dir.file("em.json");
    const auto model_wrl1 = dir.file("wrl1.json");
    CHECK(run(cli + " train --input " + train_dataset.string() +
              " --method nbem --lambda 0.4 --output " + model_em.string() + quiet(log)) == 0);
    CHECK(run(cli + " train --input " + train_dataset.string() +
              " --method nbem-wrl --list-size 1 --lambda 0.4 --output " + model_wrl1.string() +
              quiet(log)) == 0);
    CHECK(read_file(model_em) == read_file(model_wrl1));

    // rerun determinism: byte-identical outputs.
    const auto model_em_again = dir.file("em_again.json");
    CHECK(run(cli + " train --input " + train_dataset.string() +
              " --method nbem --lambda 0.4 --output " + model_em_again.string() + quiet(log)) ==
          0);
    CHECK(read_file(model_em) == read_file(model_em_again));

    // single-report predict prints one line per rank.
    const auto pred_text = dir.file("pred_text.tsv");
    CHECK(run(cli + " predict --model " + model_nb.string() +
              " --text \"w0003 w0004 w0005\" --top 4 > " + pred_text.string() + quiet(log)) == 0);
    const std::string pred = read_file(pred_text);
    CHECK(std::count(pred.begin(), pred.end(), '\n') == 4);

    // eval: table + json with the documented shape.
    const auto eval_base = dir.file("eval");
    CHECK(run(cli + " eval --input " + normalized.string() + " --output " + eval_base.string() +
              " --methods nb,nbem --max-list 3 --labeled-frac 0.2 --test-frac 0.2 --lambda 0.5" +
              " --min-report-freq 2 > /dev/null" + quiet(log)) == 0);
    const auto eval_json = nlohmann::json::parse(read_file(dir.file("eval.json")));
    CHECK(eval_json.at("methods").size() == 2);
    CHECK(eval_json.at("methods")[0].at("accuracy_percent").size() == 3);
    CHECK(read_file(dir.file("eval.txt")).find("List size") != std::string::npos);

    // sweep: 3 grid points, list sizes 1 and 3.
    const auto sweep_base = dir.file("sweep");
    CHECK(run(cli + " sweep --input " + normalized.string() + " --output " + sweep_base.string() +
              " --methods nbem --lambda-grid 0:1:0.5 --list-sizes 1,3 --labeled-frac 0.2" +
              " --test-frac 0.2 --min-report-freq 2" + quiet(log)) == 0);
    const auto sweep_json = nlohmann::json::parse(read_file(dir.file("sweep.json")));
    CHECK(sweep_json.at("lambda_grid").size() == 3);
    CHECK(sweep_json.at("methods")[0].at("series").size() == 2);
}

TEST_CASE("cli maps error classes to exit codes") {
    const std::string cli = cli_path();
    REQUIRE(!cli.empty());
    TempDir dir;
    const auto log = dir.file("stderr.log");

    // Missing input file: data error.
    CHECK(run(cli + " ingest --input /nonexistent.jsonl --output " + dir.file("x").string() +
              quiet(log)) == 2);
    // Unknown method: usage error.
    write_file(dir.file("d.json"), "{}");
    CHECK(run(cli + " train --input " + dir.file("d.json").string() + " --method magic" +
              " --output " + dir.file("m.json").string() + quiet(log)) == 1);
    // Unknown subcommand: usage error.
    CHECK(run(cli + " frobnicate" + quiet(log)) == 1);
    // Error text lands on stderr.
    CHECK(read_file(log).find("error") != std::string::npos);
}

TEST_CASE("cli ingest applies the documented filters") {
    const std::string cli = cli_path();
    REQUIRE(!cli.empty());
    TempDir dir;
    const auto log = dir.file("stderr.log");

    RawCorpus corpus;
    auto add = [&](std::int64_t id, const std::string& dev, const std::string& status,
                   const std::string& resolution) {
        BugReport report;
        report.id = id;
        report.summary = "text body here";
        report.developer = dev;
        report.status = status;
        report.resolution = resolution;
        corpus.reports.push_back(report);
    };
    for (int i = 0; i < 12; ++i) {
        add(i + 1, "keeper", "RESOLVED", "FIXED");
    }
    add(100, "rare", "RESOLVED", "FIXED");
    add(101, "keeper", "NEW", "FIXED");       // fails lifecycle
    add(102, "keeper", "RESOLVED", "LATER");  // fails lifecycle
    const auto raw = dir.file("raw.jsonl");
    write_corpus(corpus, raw);

    const auto out = dir.file("kept.jsonl");
    CHECK(run(cli + " ingest --input " + raw.string() + " --output " + out.string() +
              " --min-fixed 10" + quiet(log)) == 0);
    const RawCorpus kept = parse_corpus(out, CorpusFormat::Jsonl);
    CHECK(kept.reports.size() == 12);  // rare and non-lifecycle reports dropped
    for (const BugReport& report : kept.reports) {
        CHECK(report.developer == "keeper");
    }

    // Bugzilla import path.
    const auto from_xml = dir.file("xml.jsonl");
    CHECK(run(cli + " ingest --input " + (fixtures_dir() / "bugs.xml").string() +
              " --format bugzilla-xml --output " + from_xml.string() + quiet(log)) == 0);
    const RawCorpus xml_kept = parse_corpus(from_xml, CorpusFormat::Jsonl);
    CHECK(xml_kept.reports.size() == 1);  // only the resolved/fixed bug survives
    CHECK(xml_kept.reports[0].id == 150001);
}

TEST_CASE("cli reads options from a config file with flag precedence") {
    const std::string cli = cli_path();
    REQUIRE(!cli.empty());
    TempDir dir;
    const auto log = dir.file("stderr.log");

    const auto corpus_path = dir.file("raw.jsonl");
    write_corpus(make_mixture_raw_corpus({3, 40, 10.0, 4, 4, 2, 3.5}, 7), corpus_path);
    const auto dataset = dir.file("dataset.json");
    REQUIRE(run(cli + " preprocess --input " + corpus_path.string() + " --output " +
                dataset.string() + " --min-report-freq 1" + quiet(log)) == 0);

    const auto config = dir.file("triage.ini");
    write_file(config, "[train]\nmethod=nbem\nlambda=0.25\n");

    const auto from_config = dir.file("from_config.json");
    CHECK(run(cli + " --config " + config.string() + " train --input " + dataset.string() +
              " --output " + from_config.string() + quiet(log)) == 0);
    const NBModel configured = load_model(from_config);
    CHECK(configured.provenance.method == "nbem");
    CHECK(configured.provenance.lambda == 0.25);

    // Command line overrides the file.
    const auto overridden = dir.file("overridden.json");
    CHECK(run(cli + " --config " + config.string() + " train --input " + dataset.string() +
              " --lambda 0.75 --output " + overridden.string() + quiet(log)) == 0);
    CHECK(load_model(overridden).provenance.lambda == 0.75);
}
