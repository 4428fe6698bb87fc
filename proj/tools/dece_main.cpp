#include "dece/run.hpp"

#include "dece/precision_workflow.hpp"
#include "dece/recall_workflow.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

using namespace dece;

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitPairFailures = 2;

int cmd_validate(const std::string& dataset_path) {
    Dataset ds = load_dataset(dataset_path);
    std::cout << "ok: " << ds.instances.size() << " instance(s), "
              << ds.model_ids().size() << " model(s)\n";
    return kExitOk;
}

// criteria file: one {"instance_id", "criteria": [{index,text,provenance}]} per line
json criteria_line(const std::string& instance_id, const std::vector<Criterion>& criteria) {
    json arr = json::array();
    for (const auto& c : criteria)
        arr.push_back(json{{"index", c.index}, {"text", c.text}, {"provenance", provenance_name(c.provenance)}});
    return json{{"instance_id", instance_id}, {"criteria", arr}};
}

std::map<std::string, std::vector<Criterion>> load_criteria_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open criteria file: " + path);
    std::map<std::string, std::vector<Criterion>> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        std::vector<Criterion> criteria;
        for (const auto& c : j.at("criteria")) {
            Criterion cr;
            cr.index = c.at("index").get<int>();
            cr.text = c.at("text").get<std::string>();
            const std::string prov = c.value("provenance", "llm_generated");
            if (prov == "expert_modified") cr.provenance = Provenance::expert_modified;
            else if (prov == "expert_added") cr.provenance = Provenance::expert_added;
            criteria.push_back(std::move(cr));
        }
        out[j.at("instance_id").get<std::string>()] = std::move(criteria);
    }
    return out;
}

int cmd_extract_criteria(const std::string& dataset_path, const BackendSpec& spec,
                         const std::string& out_path, const std::string& revisions_path) {
    Dataset ds = load_dataset(dataset_path);
    auto backend = make_backend(spec);
    std::optional<RevisionSet> revisions;
    if (!revisions_path.empty()) revisions = RevisionSet::load_jsonl(revisions_path);

    CriteriaCache cache;
    std::ostringstream out;
    for (const auto& inst : ds.instances) {
        auto criteria = extract_criteria(inst, *backend, {}, nullptr, nullptr, &cache);
        if (revisions) {
            auto it = revisions->by_instance.find(inst.id);
            if (it != revisions->by_instance.end())
                criteria = apply_revisions(criteria, it->second).criteria;
        }
        out << criteria_line(inst.id, criteria).dump() << "\n";
    }
    if (out_path.empty()) {
        std::cout << out.str();
    } else {
        write_file_atomic(out_path, out.str());
        std::cout << "wrote " << out_path << " (" << ds.instances.size() << " instance(s))\n";
    }
    return kExitOk;
}

int cmd_run(const std::string& config_path, const json& overrides) {
    json merged = json::object();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw ConfigError("cannot open config: " + config_path);
        merged = json::parse(in);
    }
    for (const auto& [k, v] : overrides.items()) merged[k] = v;  // flags win
    RunConfig cfg = parse_run_config(merged);
    RunReport report = run_to_dir(cfg);
    std::cout << "report: " << (cfg.output_dir / "report.json").string() << "\n";
    std::cout << "pairs: " << report.rows.size() << ", failures: " << report.failures.size()
              << "\n";
    return report.failures.empty() ? kExitOk : kExitPairFailures;
}

int cmd_correlate(const std::string& report_path, const std::string& human_path,
                  const std::string& format) {
    RunReport report = load_report(report_path);
    const auto human = load_human_judgments(human_path);
    report.correlations = build_correlations(report.rows, human, report.beta);
    if (format == "json") {
        ordered_json rows = ordered_json::array();
        for (const auto& row : report.correlations) {
            ordered_json r{{"metric_pair", row.metric_pair},
                           {"pearson", row.result.pearson_r},
                           {"spearman", row.result.spearman_rho},
                           {"n", row.result.n}};
            if (row.result.p_value_pearson) r["p_value_pearson"] = *row.result.p_value_pearson;
            if (row.result.p_value_spearman) r["p_value_spearman"] = *row.result.p_value_spearman;
            rows.push_back(std::move(r));
        }
        std::cout << rows.dump(2) << "\n";
        return kExitOk;
    }
    std::cout << "| Metric Pair | Pearson | Spearman | P-Value | N |\n";
    std::cout << "|---|---|---|---|---|\n";
    for (const auto& row : report.correlations) {
        char p[32], s[32];
        std::snprintf(p, sizeof(p), "%.4f", row.result.pearson_r);
        std::snprintf(s, sizeof(s), "%.4f", row.result.spearman_rho);
        std::string pv = "-";
        if (row.result.p_value_pearson) {
            if (*row.result.p_value_pearson < 0.05) {
                pv = "< 0.05";
            } else {
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%.2f", *row.result.p_value_pearson);
                pv = buf;
            }
        }
        std::cout << "| " << row.metric_pair << " | " << p << " | " << s << " | " << pv << " | "
                  << row.result.n << " |\n";
    }
    return kExitOk;
}

int cmd_slice(const std::string& report_path, const std::string& axis_name, double p_thr,
              double r_thr) {
    RunReport report = load_report(report_path);
    auto axis = slice_axis_from_name(axis_name);
    if (!axis) throw ConfigError("unknown slice axis \"" + axis_name + "\"");
    auto groups = slice_scores(report.rows, *axis);
    QuadrantThresholds thr;
    if (p_thr > 0 && r_thr > 0) thr = {p_thr, r_thr};
    else thr = median_thresholds(groups);

    std::cout << "thresholds: P >= " << thr.p_thr << ", R >= " << thr.r_thr << "\n";
    std::cout << "| Group | N | Mean P | Mean R | Quadrant |\n";
    std::cout << "|---|---|---|---|---|\n";
    for (const auto& g : groups) {
        std::cout << "| " << g.key << " | " << g.count << " | " << to_fixed(g.mean_precision)
                  << " | " << to_fixed(g.mean_recall) << " | "
                  << quadrant_name(classify_quadrant(g, thr)) << " |\n";
    }
    return kExitOk;
}

int cmd_revise_stats(const std::string& criteria_path, const std::string& revisions_path) {
    auto criteria_by_instance = load_criteria_file(criteria_path);
    RevisionSet revisions = RevisionSet::load_jsonl(revisions_path);

    std::vector<std::pair<std::string, RevisionStats>> per_query;
    for (const auto& [instance_id, criteria] : criteria_by_instance) {
        RevisionStats stats;
        auto it = revisions.by_instance.find(instance_id);
        if (it != revisions.by_instance.end()) {
            stats = apply_revisions(criteria, it->second).stats;
        } else {
            stats.kept = criteria.size();
        }
        per_query.emplace_back(instance_id, stats);
    }
    const RevisionAccounting acc = revision_stats(per_query);

    std::cout << "| Validation Outcome | Count | Percentage |\n";
    std::cout << "|---|---|---|\n";
    std::cout << "| No modification required | " << acc.kept << " | "
              << to_percent(acc.kept_rate()) << "% |\n";
    std::cout << "| Criteria modified | " << acc.modified << " | "
              << to_percent(acc.modified_rate()) << "% |\n";
    std::cout << "| Criteria rejected | " << acc.discarded << " | "
              << to_percent(acc.discarded_rate()) << "% |\n";
    std::cout << "| New criteria added | " << acc.added << " | |\n";
    std::cout << "verbatim queries: " << to_percent(acc.verbatim_query_rate(), 1) << "% ("
              << acc.verbatim_queries << " of " << acc.queries << ")\n";
    return kExitOk;
}

int cmd_report(const std::string& report_path, const std::string& format_name,
               const std::string& out_dir) {
    RunReport report = load_report(report_path);
    auto format = report_format_from_name(format_name);
    if (!format) throw ConfigError("unknown format \"" + format_name + "\"");
    if (out_dir.empty()) {
        if (*format == ReportFormat::markdown) std::cout << report_to_markdown(report);
        else if (*format == ReportFormat::csv) std::cout << report_to_csv(report);
        else std::cout << report_to_json(report).dump(2) << "\n";
        return kExitOk;
    }
    auto path = emit_report(report, *format, out_dir);
    std::cout << "wrote " << path.string() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DeCE: decomposed criteria-based evaluation for long-form LLM answers"};
    app.require_subcommand(1);

    // validate
    auto* validate = app.add_subcommand("validate", "Validate a JSONL dataset");
    std::string v_dataset;
    validate->add_option("dataset", v_dataset, "Dataset JSONL file")->required();

    // shared backend flags
    auto add_backend_flags = [](CLI::App* cmd, BackendSpec& spec, std::string& transcript,
                                std::string& endpoint, std::string& model) {
        cmd->add_option("--transcript", transcript, "Scripted backend: transcript JSONL to replay");
        cmd->add_option("--endpoint", endpoint, "Live backend: judge endpoint URL");
        cmd->add_option("--judge-model", model, "Live backend: judge model name");
        (void)spec;
    };
    auto resolve_backend = [](const std::string& transcript, const std::string& endpoint,
                              const std::string& model) {
        BackendSpec spec;
        if (!transcript.empty()) {
            spec.kind = BackendSpec::Kind::scripted_transcript;
            spec.path_or_endpoint = transcript;
        } else {
            spec.kind = BackendSpec::Kind::http;
            spec.path_or_endpoint = endpoint;
            spec.model = model;
        }
        return spec;
    };

    // extract-criteria
    auto* extract = app.add_subcommand("extract-criteria",
                                       "Extract recall criteria from gold answers");
    std::string e_dataset, e_out, e_revisions, e_transcript, e_endpoint, e_model;
    BackendSpec e_spec;
    extract->add_option("--dataset", e_dataset)->required();
    extract->add_option("--out", e_out, "Criteria JSONL output (stdout when omitted)");
    extract->add_option("--revisions", e_revisions, "RevisionSet JSONL to apply");
    add_backend_flags(extract, e_spec, e_transcript, e_endpoint, e_model);

    // run
    auto* runv = app.add_subcommand("run", "Run the evaluation pipeline end to end");
    std::string r_config, r_dataset, r_output, r_transcript, r_endpoint, r_model, r_revisions,
        r_human, r_beta;
    std::vector<std::string> r_models, r_metrics;
    int r_parallelism = 0;
    std::int64_t r_seed = -1;
    std::int64_t r_sample = -1;
    runv->add_option("--config", r_config, "Run config JSON (flags override it)");
    runv->add_option("--dataset", r_dataset);
    runv->add_option("--output-dir", r_output);
    runv->add_option("--models", r_models, "Model ids to evaluate")->delimiter(',');
    runv->add_option("--metrics", r_metrics, "dece,pointwise,rouge_l,bleu")->delimiter(',');
    runv->add_option("--beta", r_beta, "F-beta weighting (default 2)");
    runv->add_option("--parallelism", r_parallelism);
    runv->add_option("--seed", r_seed);
    runv->add_option("--sample", r_sample, "Evaluate a seeded sample of N instances");
    runv->add_option("--revisions", r_revisions, "RevisionSet JSONL");
    runv->add_option("--human", r_human, "Human judgments JSONL");
    BackendSpec r_spec;
    add_backend_flags(runv, r_spec, r_transcript, r_endpoint, r_model);

    // correlate
    auto* correlate_cmd = app.add_subcommand("correlate", "Correlate a report against human judgments");
    std::string c_report, c_human, c_format = "markdown";
    correlate_cmd->add_option("--report", c_report)->required();
    correlate_cmd->add_option("--human", c_human)->required();
    correlate_cmd->add_option("--format", c_format, "markdown|json");

    // slice
    auto* slice_cmd = app.add_subcommand("slice", "Group scores by jurisdiction/query_type/model");
    std::string s_report, s_by;
    double s_p_thr = 0, s_r_thr = 0;
    slice_cmd->add_option("--report", s_report)->required();
    slice_cmd->add_option("--by", s_by, "jurisdiction|query_type|model")->required();
    slice_cmd->add_option("--p-thr", s_p_thr, "Precision threshold (default: cross-group median)");
    slice_cmd->add_option("--r-thr", s_r_thr, "Recall threshold (default: cross-group median)");

    // revise-stats
    auto* revise_cmd = app.add_subcommand("revise-stats", "Criteria revision accounting");
    std::string rs_criteria, rs_revisions;
    revise_cmd->add_option("--criteria", rs_criteria, "Criteria JSONL (from extract-criteria)")
        ->required();
    revise_cmd->add_option("--revisions", rs_revisions, "RevisionSet JSONL")->required();

    // report
    auto* report_cmd = app.add_subcommand("report", "Re-render a stored report");
    std::string p_report, p_format = "markdown", p_out;
    report_cmd->add_option("--report", p_report)->required();
    report_cmd->add_option("--format", p_format, "json|markdown|csv");
    report_cmd->add_option("--out", p_out, "Output directory (stdout when omitted)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_validate(v_dataset);
        if (extract->parsed())
            return cmd_extract_criteria(e_dataset, resolve_backend(e_transcript, e_endpoint, e_model),
                                        e_out, e_revisions);
        if (runv->parsed()) {
            json overrides = json::object();
            if (!r_dataset.empty()) overrides["dataset"] = r_dataset;
            if (!r_output.empty()) overrides["output_dir"] = r_output;
            if (!r_models.empty()) overrides["models"] = r_models;
            if (!r_metrics.empty()) overrides["metrics"] = r_metrics;
            if (!r_beta.empty()) overrides["beta"] = r_beta;
            if (r_parallelism > 0) overrides["parallelism"] = r_parallelism;
            if (r_seed >= 0) overrides["seed"] = r_seed;
            if (r_sample >= 0) overrides["sample_size"] = r_sample;
            if (!r_revisions.empty()) overrides["revision_set"] = r_revisions;
            if (!r_human.empty()) overrides["human_judgments"] = r_human;
            if (!r_transcript.empty())
                overrides["backend"] = json{{"kind", "transcript"}, {"path", r_transcript}};
            else if (!r_endpoint.empty())
                overrides["backend"] =
                    json{{"kind", "http"}, {"endpoint", r_endpoint}, {"model", r_model}};
            return cmd_run(r_config, overrides);
        }
        if (correlate_cmd->parsed()) return cmd_correlate(c_report, c_human, c_format);
        if (slice_cmd->parsed()) return cmd_slice(s_report, s_by, s_p_thr, s_r_thr);
        if (revise_cmd->parsed()) return cmd_revise_stats(rs_criteria, rs_revisions);
        if (report_cmd->parsed()) return cmd_report(p_report, p_format, p_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfigError;
    }
    return kExitConfigError;
}
