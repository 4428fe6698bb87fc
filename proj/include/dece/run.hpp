#pragma once

#include "dece/analysis.hpp"
#include "dece/dataset.hpp"
#include "dece/judge_backend.hpp"
#include "dece/scoring.hpp"

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace dece {

using ordered_json = nlohmann::ordered_json;

enum class MetricId { dece, pointwise, rouge_l, bleu };

const char* metric_name(MetricId m);
std::optional<MetricId> metric_from_name(std::string_view name);

struct BackendSpec {
    enum class Kind { scripted_transcript, http };
    Kind kind = Kind::scripted_transcript;
    std::string path_or_endpoint;  // transcript file, or endpoint URL
    std::string model;             // http only
    std::string api_path = "/v1/chat/completions";
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::filesystem::path dataset_path;
    BackendSpec backend;
    std::vector<std::string> model_ids;  // empty = every model in the dataset
    Rational beta = 2;
    std::optional<QuadrantThresholds> thresholds;  // unset = cross-group median
    std::set<MetricId> metrics{MetricId::dece};
    std::optional<std::filesystem::path> revision_set_path;
    std::optional<std::filesystem::path> human_judgments_path;
    std::filesystem::path output_dir;
    int parallelism = 1;
    std::uint64_t seed = 0;
    std::optional<std::size_t> sample_size;  // seeded instance subsetting
    RetryPolicy retry;
    double qps = 0.0;
};

/// Parses a config JSON object; throws ConfigError on any violation
/// (unknown metric, empty metric set, parallelism < 1, ...).
RunConfig parse_run_config(const json& j);
RunConfig load_run_config(const std::filesystem::path& path);
ordered_json run_config_to_json(const RunConfig& cfg);

struct PairFailure {
    std::string instance_id;
    std::string model_id;
    MetricId metric = MetricId::dece;
    std::string error_kind;
    std::string message;
};

struct CorrelationRow {
    std::string metric_pair;  // e.g. "dece_f2 vs human_f2"
    CorrelationResult result;
};

struct SliceSummary {
    GroupSummary group;
    Quadrant quadrant = Quadrant::strong;
};

struct SliceSet {
    std::string axis;
    QuadrantThresholds thresholds;  // configured, or the cross-group medians
    std::vector<SliceSummary> groups;
};

struct PointwiseModelSummary {
    std::string model_id;
    std::size_t count = 0;
    Rational gpa_score = 0;
    std::map<std::string, Rational> distribution;
};

struct LexicalModelSummary {
    std::string model_id;
    std::size_t count = 0;
    double mean_rouge_precision = 0, mean_rouge_recall = 0, mean_rouge_f1 = 0;
    double mean_bleu = 0;
    double bleu_corpus = 0;
};

/// Persistable artifact of one evaluation run. Wall-clock timing lives in a
/// sidecar, never here, so identical runs serialize byte-identically.
struct RunReport {
    ordered_json config_snapshot;
    std::vector<std::string> model_ids;
    std::set<MetricId> metrics;
    Rational beta = 2;
    std::vector<ScoreRow> rows;  // dataset order x model order
    std::vector<PairFailure> failures;
    std::vector<GroupSummary> by_model;
    std::vector<PointwiseModelSummary> pointwise_by_model;
    std::vector<LexicalModelSummary> lexical_by_model;
    std::vector<SliceSet> slices;
    std::vector<CorrelationRow> correlations;
    std::optional<RevisionAccounting> revisions;
    std::string transcript_file;  // relative to the report location
    ordered_json external_scores; // slots for third-party baseline results
};

struct RunTiming {
    std::int64_t wall_ms = 0;
    std::size_t judge_calls = 0;
};

/// Executes the configured metrics over every (instance, model) pair with
/// bounded parallelism. Per-pair errors become failure records; only config
/// and dataset problems throw.
RunReport run(const RunConfig& cfg, JudgeBackend& backend, TranscriptSink* transcript = nullptr,
              RunTiming* timing = nullptr);

/// Builds the backend from cfg.backend, runs, and writes report.json,
/// transcripts.jsonl and run_meta.json atomically into cfg.output_dir.
RunReport run_to_dir(const RunConfig& cfg);

/// Transcript-replay or live HTTP backend; http credentials come from the
/// environment.
std::unique_ptr<JudgeBackend> make_backend(const BackendSpec& spec);

ordered_json report_to_json(const RunReport& report);
RunReport report_from_json(const json& j);
RunReport load_report(const std::filesystem::path& path);

std::string report_to_markdown(const RunReport& report);
std::string report_to_csv(const RunReport& report);

enum class ReportFormat { json, markdown, csv };
std::optional<ReportFormat> report_format_from_name(std::string_view name);

/// Renders and writes the report with write-then-rename discipline.
std::filesystem::path emit_report(const RunReport& report, ReportFormat format,
                                  const std::filesystem::path& out_dir);

/// Write-then-rename so an interrupted writer never leaves a partial file at
/// the canonical path.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

// Correlation table assembly, shared by run() and the `correlate` verb.
std::vector<CorrelationRow> build_correlations(const std::vector<ScoreRow>& rows,
                                               const std::vector<HumanJudgment>& human,
                                               const Rational& beta);

}  // namespace dece
