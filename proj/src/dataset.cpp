#include "dece/dataset.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace dece {

std::vector<std::string> Dataset::model_ids() const {
    std::set<std::string> ids;
    for (const auto& inst : instances) {
        for (const auto& [model, answer] : inst.model_answers) ids.insert(model);
    }
    return {ids.begin(), ids.end()};
}

namespace {

std::string summarize(const std::filesystem::path& path, const std::vector<LineIssues>& lines) {
    std::ostringstream os;
    os << path.string() << ": " << lines.size() << " invalid line(s)";
    for (const auto& l : lines) {
        os << "\n  line " << l.line << ":";
        for (const auto& i : l.issues) {
            os << " [" << validation_code_name(i.code);
            if (!i.field.empty()) os << " " << i.field;
            os << "] " << i.message << ";";
        }
    }
    return os.str();
}

}  // namespace

DatasetError::DatasetError(const std::filesystem::path& path, std::vector<LineIssues> lines)
    : std::runtime_error(summarize(path, lines)), lines_(std::move(lines)) {}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset: " + path.string());

    Dataset dataset;
    ValidationContext ctx;
    std::vector<LineIssues> bad_lines;
    std::string line;
    std::size_t lineno = 0;
    bool saw_content = false;

    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

        json record = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (record.is_discarded()) {
            bad_lines.push_back(
                {lineno, {{ValidationCode::BadType, "", "line is not valid JSON"}}});
            continue;
        }

        if (!saw_content && record.is_object() && record.contains("header")) {
            const auto& header = record["header"];
            LabelSets labels;
            if (header.contains("jurisdictions"))
                labels.jurisdictions = header["jurisdictions"].get<std::vector<std::string>>();
            if (header.contains("query_types"))
                labels.query_types = header["query_types"].get<std::vector<std::string>>();
            dataset.labels = labels;
            ctx = ValidationContext(std::move(labels));
            saw_content = true;
            continue;
        }
        saw_content = true;

        try {
            dataset.instances.push_back(validate_instance(record, ctx));
        } catch (const ValidationError& e) {
            bad_lines.push_back({lineno, e.issues()});
        }
    }

    if (!bad_lines.empty()) throw DatasetError(path, std::move(bad_lines));
    return dataset;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open dataset for writing: " + path.string());
    if (dataset.labels.jurisdictions || dataset.labels.query_types) {
        json header = json::object();
        if (dataset.labels.jurisdictions) header["jurisdictions"] = *dataset.labels.jurisdictions;
        if (dataset.labels.query_types) header["query_types"] = *dataset.labels.query_types;
        out << json{{"header", header}}.dump() << "\n";
    }
    for (const auto& inst : dataset.instances) out << instance_to_json(inst).dump() << "\n";
}

}  // namespace dece
