#pragma once

#include "dece/core_model.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace dece {

struct Dataset {
    LabelSets labels;
    std::vector<EvaluationInstance> instances;

    /// Model ids present anywhere in the dataset, sorted.
    std::vector<std::string> model_ids() const;
};

struct LineIssues {
    std::size_t line = 0;  // 1-based
    std::vector<ValidationIssue> issues;
};

/// Aggregates every invalid line of a dataset file, each tagged with its line
/// number.
class DatasetError : public std::runtime_error {
public:
    DatasetError(const std::filesystem::path& path, std::vector<LineIssues> lines);
    const std::vector<LineIssues>& lines() const { return lines_; }

private:
    std::vector<LineIssues> lines_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Loads a JSONL dataset. An optional first-line {"header": {...}} object
/// declares label sets ("jurisdictions", "query_types"); every following line
/// is one instance record. All records are validated before returning.
Dataset load_dataset(const std::filesystem::path& path);

/// Serializes instances back to the JSONL format load_dataset reads,
/// including a header when label sets are declared.
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);

}  // namespace dece
