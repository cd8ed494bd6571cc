#include "triage/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

#include "triage/errors.hpp"

namespace triage {

namespace {

using nlohmann::json;

std::string lower_ascii(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

[[noreturn]] void record_error(std::size_t record, const std::string& field,
                               const std::string& what) {
    std::ostringstream msg;
    msg << "record " << record << ": field '" << field << "': " << what;
    throw DataError(msg.str());
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open '" + path.string() + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string json_string_field(const json& record, const char* field, std::size_t index) {
    auto it = record.find(field);
    if (it == record.end() || it->is_null()) {
        return "";
    }
    if (!it->is_string()) {
        record_error(index, field, "expected a string");
    }
    return it->get<std::string>();
}

RawCorpus parse_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open '" + path.string() + "'");
    }

    RawCorpus corpus;
    corpus.source_note = "jsonl:" + path.string();
    std::unordered_set<std::int64_t> seen_ids;
    std::string line;
    std::size_t record = 0;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        ++record;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            record_error(record, "<record>", std::string("invalid JSON: ") + e.what());
        }
        if (!j.is_object()) {
            record_error(record, "<record>", "expected a JSON object");
        }

        BugReport report;
        auto id_it = j.find("id");
        if (id_it == j.end() || !id_it->is_number_integer()) {
            record_error(record, "id", "missing or not an integer");
        }
        report.id = id_it->get<std::int64_t>();
        if (report.id <= 0) {
            record_error(record, "id", "must be positive");
        }
        if (!seen_ids.insert(report.id).second) {
            record_error(record, "id", "duplicate id " + std::to_string(report.id));
        }

        report.summary = json_string_field(j, "summary", record);
        report.description = json_string_field(j, "description", record);
        report.status = json_string_field(j, "status", record);
        report.resolution = json_string_field(j, "resolution", record);

        auto dev_it = j.find("developer");
        if (dev_it != j.end() && !dev_it->is_null()) {
            if (!dev_it->is_string()) {
                record_error(record, "developer", "expected a string or null");
            }
            std::string dev = dev_it->get<std::string>();
            if (!dev.empty()) {
                report.developer = std::move(dev);
            }
        }

        report.submit_order = static_cast<std::int64_t>(corpus.reports.size());
        corpus.reports.push_back(std::move(report));
    }
    return corpus;
}

// --- best-effort Bugzilla XML export scanner ---

std::string xml_decode(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '&') {
            out.push_back(text[i]);
            ++i;
            continue;
        }
        std::size_t end = text.find(';', i);
        if (end == std::string_view::npos || end - i > 10) {
            out.push_back(text[i]);
            ++i;
            continue;
        }
        std::string_view entity = text.substr(i + 1, end - i - 1);
        if (entity == "lt") {
            out.push_back('<');
        } else if (entity == "gt") {
            out.push_back('>');
        } else if (entity == "amp") {
            out.push_back('&');
        } else if (entity == "quot") {
            out.push_back('"');
        } else if (entity == "apos") {
            out.push_back('\'');
        } else if (!entity.empty() && entity[0] == '#') {
            int code = 0;
            try {
                code = (entity.size() > 1 && (entity[1] == 'x' || entity[1] == 'X'))
                           ? std::stoi(std::string(entity.substr(2)), nullptr, 16)
                           : std::stoi(std::string(entity.substr(1)));
            } catch (const std::exception&) {
                code = -1;
            }
            if (code >= 0 && code < 128) {
                out.push_back(static_cast<char>(code));
            }
            // non-ASCII references are dropped; tokenization splits there anyway
        } else {
            out.append(text.substr(i, end - i + 1));
        }
        i = end + 1;
    }
    return out;
}

// Inner text of the first <tag ...>...</tag> inside `block`, entity-decoded.
std::optional<std::string> first_element_text(std::string_view block, std::string_view tag) {
    const std::string open = "<" + std::string(tag);
    std::size_t pos = 0;
    while ((pos = block.find(open, pos)) != std::string_view::npos) {
        std::size_t after = pos + open.size();
        if (after < block.size() && (block[after] == '>' || block[after] == ' ')) {
            std::size_t content_start = block.find('>', after);
            if (content_start == std::string_view::npos) {
                return std::nullopt;
            }
            ++content_start;
            const std::string close = "</" + std::string(tag) + ">";
            std::size_t content_end = block.find(close, content_start);
            if (content_end == std::string_view::npos) {
                return std::nullopt;
            }
            return xml_decode(block.substr(content_start, content_end - content_start));
        }
        pos = after;
    }
    return std::nullopt;
}

std::optional<std::string_view> first_element_block(std::string_view text, std::string_view tag,
                                                    std::size_t& search_from) {
    const std::string open = "<" + std::string(tag);
    std::size_t pos = search_from;
    while ((pos = text.find(open, pos)) != std::string_view::npos) {
        std::size_t after = pos + open.size();
        if (after < text.size() && (text[after] == '>' || text[after] == ' ')) {
            const std::string close = "</" + std::string(tag) + ">";
            std::size_t end = text.find(close, after);
            if (end == std::string_view::npos) {
                return std::nullopt;
            }
            search_from = end + close.size();
            return text.substr(pos, end + close.size() - pos);
        }
        pos = after;
    }
    return std::nullopt;
}

RawCorpus parse_bugzilla_xml(const std::filesystem::path& path) {
    const std::string text = read_file(path);

    RawCorpus corpus;
    corpus.source_note = "bugzilla-xml:" + path.string();
    std::unordered_set<std::int64_t> seen_ids;
    std::size_t cursor = 0;
    std::size_t record = 0;
    while (auto block = first_element_block(text, "bug", cursor)) {
        ++record;
        BugReport report;

        auto id_text = first_element_text(*block, "bug_id");
        if (!id_text) {
            record_error(record, "bug_id", "missing");
        }
        try {
            report.id = std::stoll(*id_text);
        } catch (const std::exception&) {
            record_error(record, "bug_id", "not an integer: '" + *id_text + "'");
        }
        if (report.id <= 0) {
            record_error(record, "bug_id", "must be positive");
        }
        if (!seen_ids.insert(report.id).second) {
            record_error(record, "bug_id", "duplicate id " + std::to_string(report.id));
        }

        report.summary = first_element_text(*block, "short_desc").value_or("");
        report.status = first_element_text(*block, "bug_status").value_or("");
        report.resolution = first_element_text(*block, "resolution").value_or("");

        std::size_t desc_cursor = 0;
        if (auto long_desc = first_element_block(*block, "long_desc", desc_cursor)) {
            report.description = first_element_text(*long_desc, "thetext").value_or("");
        }

        if (auto dev = first_element_text(*block, "assigned_to"); dev && !dev->empty()) {
            report.developer = *dev;
        }

        report.submit_order = static_cast<std::int64_t>(corpus.reports.size());
        corpus.reports.push_back(std::move(report));
    }
    return corpus;
}

}  // namespace

RawCorpus parse_corpus(const std::filesystem::path& path, CorpusFormat format) {
    switch (format) {
        case CorpusFormat::Jsonl:
            return parse_jsonl(path);
        case CorpusFormat::BugzillaXml:
            return parse_bugzilla_xml(path);
    }
    throw UsageError("unknown corpus format");
}

RawCorpus filter_lifecycle(const RawCorpus& corpus) {
    RawCorpus out;
    out.source_note = corpus.source_note;
    for (const BugReport& report : corpus.reports) {
        const std::string status = lower_ascii(report.status);
        const std::string resolution = lower_ascii(report.resolution);
        const bool status_ok = status == "resolved" || status == "verified";
        const bool resolution_ok = resolution == "fixed" || resolution == "duplicate";
        if (status_ok && resolution_ok) {
            out.reports.push_back(report);
        }
    }
    return out;
}

RawCorpus filter_developers(const RawCorpus& corpus, int min_fixed) {
    if (min_fixed < 1) {
        throw UsageError("min_fixed must be at least 1");
    }
    std::unordered_map<std::string, int> counts;
    for (const BugReport& report : corpus.reports) {
        if (report.developer) {
            ++counts[*report.developer];
        }
    }
    RawCorpus out;
    out.source_note = corpus.source_note;
    for (const BugReport& report : corpus.reports) {
        if (!report.developer || counts[*report.developer] >= min_fixed) {
            out.reports.push_back(report);
        }
    }
    return out;
}

void write_corpus(const RawCorpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write '" + path.string() + "'");
    }
    for (const BugReport& report : corpus.reports) {
        json j;
        j["id"] = report.id;
        j["summary"] = report.summary;
        j["description"] = report.description;
        if (report.developer) {
            j["developer"] = *report.developer;
        }
        j["status"] = report.status;
        j["resolution"] = report.resolution;
        out << j.dump() << '\n';
    }
    if (!out) {
        throw DataError("failed writing '" + path.string() + "'");
    }
}

}  // namespace triage
