#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace triage {

// One bug report reduced to what the pipeline consumes: the short summary and
// the first long description as free text, the assigned developer (when
// known) as the class label, and the lifecycle fields used by ingest filters.
struct BugReport {
    std::int64_t id = 0;
    std::string summary;
    std::string description;
    std::optional<std::string> developer;
    std::string status;
    std::string resolution;
    std::int64_t submit_order = 0;  // position in chronological (file) order
};

struct RawCorpus {
    std::vector<BugReport> reports;  // sorted ascending by submit_order
    std::string source_note;
};

enum class CorpusFormat { Jsonl, BugzillaXml };

// Reads one report per record. JSONL records carry
// {id, summary, description, developer, status, resolution}; a missing or
// null developer means unlabeled. The Bugzilla importer is best-effort and
// maps short_desc -> summary, first long_desc text -> description,
// assigned_to -> developer. submit_order is assigned by file order.
RawCorpus parse_corpus(const std::filesystem::path& path, CorpusFormat format);

// Keeps reports with status in {resolved, verified} AND resolution in
// {fixed, duplicate}, case-insensitively. Order preserving, idempotent.
RawCorpus filter_lifecycle(const RawCorpus& corpus);

// Keeps labeled reports whose developer occurs at least min_fixed times among
// the labeled reports of the input; unlabeled reports are always kept.
// Counting is a single pass over the input, not iterated to a fixpoint.
RawCorpus filter_developers(const RawCorpus& corpus, int min_fixed);

// Writes the normalized line-delimited format (one JSON object per line).
void write_corpus(const RawCorpus& corpus, const std::filesystem::path& path);

}  // namespace triage
