#include "dece/run.hpp"

#include "dece/precision_workflow.hpp"
#include "dece/recall_workflow.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace dece {

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

const char* metric_name(MetricId m) {
    switch (m) {
        case MetricId::dece: return "dece";
        case MetricId::pointwise: return "pointwise";
        case MetricId::rouge_l: return "rouge_l";
        case MetricId::bleu: return "bleu";
    }
    return "?";
}

std::optional<MetricId> metric_from_name(std::string_view name) {
    if (name == "dece") return MetricId::dece;
    if (name == "pointwise") return MetricId::pointwise;
    if (name == "rouge_l") return MetricId::rouge_l;
    if (name == "bleu") return MetricId::bleu;
    return std::nullopt;
}

namespace {

Rational rational_from_json(const json& v, const char* what) {
    if (v.is_number_integer()) return Rational(v.get<long long>());
    if (v.is_number_float()) return Rational(v.get<double>());
    if (v.is_string()) {
        try {
            return parse_rational(v.get<std::string>());
        } catch (const std::exception&) {
            throw ConfigError(std::string(what) + ": cannot parse rational \"" +
                              v.get<std::string>() + "\"");
        }
    }
    throw ConfigError(std::string(what) + " must be a number or rational string");
}

}  // namespace

RunConfig parse_run_config(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    RunConfig cfg;

    if (!j.contains("dataset")) throw ConfigError("config needs \"dataset\"");
    cfg.dataset_path = j["dataset"].get<std::string>();

    if (j.contains("backend")) {
        const auto& b = j["backend"];
        const std::string kind = b.value("kind", "transcript");
        if (kind == "transcript" || kind == "scripted") {
            cfg.backend.kind = BackendSpec::Kind::scripted_transcript;
            cfg.backend.path_or_endpoint = b.value("path", "");
        } else if (kind == "http") {
            cfg.backend.kind = BackendSpec::Kind::http;
            cfg.backend.path_or_endpoint = b.value("endpoint", "");
            cfg.backend.model = b.value("model", "");
            cfg.backend.api_path = b.value("api_path", cfg.backend.api_path);
        } else {
            throw ConfigError("backend.kind must be \"transcript\" or \"http\"");
        }
    }

    if (j.contains("models")) cfg.model_ids = j["models"].get<std::vector<std::string>>();
    if (j.contains("beta")) cfg.beta = rational_from_json(j["beta"], "beta");
    if (cfg.beta <= 0) throw ConfigError("beta must be positive");

    if (j.contains("metrics")) {
        cfg.metrics.clear();
        for (const auto& m : j["metrics"]) {
            auto id = metric_from_name(m.get<std::string>());
            if (!id) throw ConfigError("unknown metric \"" + m.get<std::string>() + "\"");
            cfg.metrics.insert(*id);
        }
    }
    if (cfg.metrics.empty()) throw ConfigError("metrics must be nonempty");

    if (j.contains("thresholds")) {
        QuadrantThresholds t;
        t.p_thr = j["thresholds"].at("precision").get<double>();
        t.r_thr = j["thresholds"].at("recall").get<double>();
        if (t.p_thr <= 0 || t.p_thr >= 1 || t.r_thr <= 0 || t.r_thr >= 1)
            throw ConfigError("thresholds must lie in (0,1)");
        cfg.thresholds = t;
    }

    if (j.contains("revision_set")) cfg.revision_set_path = j["revision_set"].get<std::string>();
    if (j.contains("human_judgments"))
        cfg.human_judgments_path = j["human_judgments"].get<std::string>();
    if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("parallelism")) cfg.parallelism = j["parallelism"].get<int>();
    if (cfg.parallelism < 1) throw ConfigError("parallelism must be >= 1");
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("sample_size")) cfg.sample_size = j["sample_size"].get<std::size_t>();
    if (j.contains("qps")) cfg.qps = j["qps"].get<double>();

    if (j.contains("retry")) {
        const auto& r = j["retry"];
        cfg.retry.max_attempts = r.value("max_attempts", cfg.retry.max_attempts);
        cfg.retry.rate_limit_attempts = r.value("rate_limit_attempts", cfg.retry.rate_limit_attempts);
        cfg.retry.backoff_base =
            std::chrono::milliseconds(r.value("backoff_base_ms", cfg.retry.backoff_base.count()));
        cfg.retry.backoff_factor = r.value("backoff_factor", cfg.retry.backoff_factor);
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path.string());
    json j = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) throw ConfigError("config is not valid JSON: " + path.string());
    return parse_run_config(j);
}

ordered_json run_config_to_json(const RunConfig& cfg) {
    ordered_json backend;
    if (cfg.backend.kind == BackendSpec::Kind::scripted_transcript) {
        backend = {{"kind", "transcript"}, {"path", cfg.backend.path_or_endpoint}};
    } else {
        backend = {{"kind", "http"},
                   {"endpoint", cfg.backend.path_or_endpoint},
                   {"model", cfg.backend.model},
                   {"api_path", cfg.backend.api_path}};
    }
    ordered_json metrics = ordered_json::array();
    for (MetricId m : cfg.metrics) metrics.push_back(metric_name(m));

    ordered_json j{
        {"dataset", cfg.dataset_path.string()},
        {"backend", backend},
        {"models", cfg.model_ids},
        {"beta", to_fraction(cfg.beta)},
        {"metrics", metrics},
        {"parallelism", cfg.parallelism},
        {"seed", cfg.seed},
        {"qps", cfg.qps},
        {"retry",
         {{"max_attempts", cfg.retry.max_attempts},
          {"rate_limit_attempts", cfg.retry.rate_limit_attempts},
          {"backoff_base_ms", cfg.retry.backoff_base.count()},
          {"backoff_factor", cfg.retry.backoff_factor}}},
    };
    if (cfg.thresholds)
        j["thresholds"] = {{"precision", cfg.thresholds->p_thr}, {"recall", cfg.thresholds->r_thr}};
    if (cfg.sample_size) j["sample_size"] = *cfg.sample_size;
    if (cfg.revision_set_path) j["revision_set"] = cfg.revision_set_path->string();
    if (cfg.human_judgments_path) j["human_judgments"] = cfg.human_judgments_path->string();
    if (!cfg.output_dir.empty()) j["output_dir"] = cfg.output_dir.string();
    return j;
}

// ---------------------------------------------------------------------------
// Run orchestration
// ---------------------------------------------------------------------------

namespace {

std::size_t count_ones(const VerdictSet& v) {
    return static_cast<std::size_t>(std::accumulate(v.scores.begin(), v.scores.end(), 0L));
}

double f_beta_double(double p, double r, double beta) {
    if (p == 0.0 && r == 0.0) return 0.0;
    const double b2 = beta * beta;
    return (1.0 + b2) * p * r / (b2 * p + r);
}

}  // namespace

std::vector<CorrelationRow> build_correlations(const std::vector<ScoreRow>& rows,
                                               const std::vector<HumanJudgment>& human,
                                               const Rational& beta) {
    std::map<std::pair<std::string, std::string>, const ScoreRow*> by_pair;
    for (const auto& row : rows) by_pair[{row.instance_id, row.model_id}] = &row;

    const double beta_d = to_double(beta);

    struct Series {
        std::vector<double> x, y;
    };
    std::vector<std::pair<std::string, Series>> series{
        {"dece_precision vs human_precision", {}}, {"dece_recall vs human_recall", {}},
        {"dece_f vs human_f", {}},                 {"dece_f vs human_pointwise", {}},
        {"pointwise vs human_pointwise", {}},      {"pointwise vs human_f", {}},
        {"rouge_l_f1 vs human_f", {}},             {"rouge_l_f1 vs human_pointwise", {}},
        {"bleu vs human_f", {}},                   {"bleu vs human_pointwise", {}},
    };
    auto push = [&](std::size_t idx, std::optional<double> metric, std::optional<double> target) {
        if (metric && target) {
            series[idx].second.x.push_back(*metric);
            series[idx].second.y.push_back(*target);
        }
    };

    for (const auto& h : human) {
        auto it = by_pair.find({h.instance_id, h.model_id});
        if (it == by_pair.end())
            throw StatsError(StatsErrorKind::UnmatchedHuman,
                             "human judgment for (" + h.instance_id + ", " + h.model_id +
                                 ") matches no evaluated pair");
        const ScoreRow& row = *it->second;

        std::optional<double> human_f;
        if (h.precision && h.recall) human_f = f_beta_double(*h.precision, *h.recall, beta_d);
        std::optional<double> human_point;
        if (h.pointwise) human_point = static_cast<double>(*h.pointwise);

        std::optional<double> dece_p, dece_r, dece_f;
        if (row.dece) {
            dece_p = to_double(row.dece->precision);
            dece_r = to_double(row.dece->recall);
            dece_f = to_double(row.dece->f_beta);
        }
        std::optional<double> point;
        if (row.pointwise) point = static_cast<double>(*row.pointwise);
        std::optional<double> rouge_f1;
        if (row.rouge) rouge_f1 = row.rouge->f1;

        std::optional<double> hp, hr;
        if (h.precision) hp = *h.precision;
        if (h.recall) hr = *h.recall;

        push(0, dece_p, hp);
        push(1, dece_r, hr);
        push(2, dece_f, human_f);
        push(3, dece_f, human_point);
        push(4, point, human_point);
        push(5, point, human_f);
        push(6, rouge_f1, human_f);
        push(7, rouge_f1, human_point);
        push(8, row.bleu, human_f);
        push(9, row.bleu, human_point);
    }

    std::vector<CorrelationRow> out;
    for (const auto& [name, s] : series) {
        if (s.x.size() < 2) continue;
        try {
            const CorrelationResult result = correlate(s.x, s.y);
            out.push_back({name, result});
        } catch (const StatsError&) {
            // constant series carry no correlation signal; leave them out
        }
    }
    return out;
}

RunReport run(const RunConfig& cfg, JudgeBackend& backend, TranscriptSink* transcript,
              RunTiming* timing) {
    const auto t0 = std::chrono::steady_clock::now();

    Dataset dataset = load_dataset(cfg.dataset_path);
    std::vector<EvaluationInstance> instances = std::move(dataset.instances);

    if (cfg.sample_size && *cfg.sample_size < instances.size()) {
        std::mt19937_64 rng(cfg.seed);
        std::vector<EvaluationInstance> sampled;
        sampled.reserve(*cfg.sample_size);
        std::sample(instances.begin(), instances.end(), std::back_inserter(sampled),
                    *cfg.sample_size, rng);
        instances = std::move(sampled);
    }

    std::vector<std::string> models = cfg.model_ids;
    if (models.empty()) {
        std::set<std::string> ids;
        for (const auto& inst : instances)
            for (const auto& [model, answer] : inst.model_answers) ids.insert(model);
        models.assign(ids.begin(), ids.end());
    }
    if (models.empty()) throw ConfigError("no model ids to evaluate");
    if (instances.empty()) throw ConfigError("dataset has no instances");

    std::optional<RevisionSet> revisions;
    if (cfg.revision_set_path) revisions = RevisionSet::load_jsonl(*cfg.revision_set_path);
    std::optional<std::vector<HumanJudgment>> human;
    if (cfg.human_judgments_path) human = load_human_judgments(*cfg.human_judgments_path);

    const std::vector<MetricId> metrics(cfg.metrics.begin(), cfg.metrics.end());
    const std::size_t n_pairs = instances.size() * models.size();
    const std::size_t n_tasks = n_pairs * metrics.size();

    // Identity fields are filled up front; each (instance, model, metric)
    // task then writes only its own slot.
    std::vector<ScoreRow> rows(n_pairs);
    for (std::size_t k = 0; k < n_pairs; ++k) {
        const EvaluationInstance& inst = instances[k / models.size()];
        rows[k].instance_id = inst.id;
        rows[k].model_id = models[k % models.size()];
        rows[k].jurisdiction = inst.metadata.jurisdiction;
        rows[k].query_type = inst.metadata.query_type;
    }
    std::vector<std::optional<PairFailure>> failure_slots(n_tasks);

    RateLimiter limiter(cfg.qps);
    CriteriaCache cache;
    const FBetaConfig fcfg{cfg.beta};

    std::mutex revision_mu;
    std::map<std::string, RevisionStats> revision_stats_by_instance;

    // Criteria for one instance, post-revision. Extraction is cached; the
    // revision pass is deterministic so re-applying per pair is harmless, but
    // stats are recorded once per instance.
    auto criteria_for = [&](const EvaluationInstance& inst) {
        std::vector<Criterion> criteria =
            extract_criteria(inst, backend, cfg.retry, transcript, &limiter, &cache);
        if (revisions) {
            RevisionOutcome outcome;
            auto rev = revisions->by_instance.find(inst.id);
            if (rev != revisions->by_instance.end()) {
                outcome = apply_revisions(criteria, rev->second);
            } else {
                outcome.criteria = criteria;
                outcome.stats.kept = criteria.size();
            }
            {
                std::lock_guard lk(revision_mu);
                revision_stats_by_instance.try_emplace(inst.id, outcome.stats);
            }
            criteria = std::move(outcome.criteria);
        }
        return criteria;
    };

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t task = next.fetch_add(1);
            if (task >= n_tasks) return;
            const std::size_t k = task / metrics.size();
            const MetricId m = metrics[task % metrics.size()];
            const EvaluationInstance& inst = instances[k / models.size()];
            const std::string& model = models[k % models.size()];
            ScoreRow& row = rows[k];

            const auto answer_it = inst.model_answers.find(model);
            if (answer_it == inst.model_answers.end()) {
                failure_slots[task] = PairFailure{inst.id, model, m, "MissingAnswer",
                                                  "dataset has no answer from model " + model};
                continue;
            }
            const std::string& answer = answer_it->second;

            try {
                switch (m) {
                    case MetricId::dece: {
                        const auto criteria = criteria_for(inst);
                        std::size_t element_count = 0, supported = 0, satisfied = 0;
                        if (!answer.empty()) {
                            const auto elements = extract_elements(
                                inst.query, answer, backend, cfg.retry, transcript, &limiter);
                            element_count = elements.size();
                            if (!elements.empty())
                                supported = count_ones(verify_elements(
                                    elements, inst.gold, backend, cfg.retry, transcript, &limiter));
                            if (!criteria.empty())
                                satisfied = count_ones(judge_satisfaction(
                                    criteria, answer, backend, cfg.retry, transcript, &limiter));
                        }
                        DecomposedScore score = decomposed_score(
                            supported, element_count, satisfied, criteria.size(), fcfg);
                        if (answer.empty()) score.flags.insert(ScoreFlag::no_answer);
                        row.dece = std::move(score);
                        break;
                    }
                    case MetricId::pointwise: {
                        const PointwiseResult r = pointwise_judge(inst, model, backend, cfg.retry,
                                                                  transcript, &limiter);
                        row.pointwise = r.score;
                        row.pointwise_issues = r.issues;
                        break;
                    }
                    case MetricId::rouge_l:
                        row.rouge = rouge_l(answer, inst.gold.full_text());
                        break;
                    case MetricId::bleu:
                        row.bleu = bleu(answer, {inst.gold.full_text()});
                        break;
                }
            } catch (const JudgeError& e) {
                failure_slots[task] =
                    PairFailure{inst.id, model, m, judge_error_kind_name(e.kind()), e.what()};
            } catch (const std::exception& e) {
                failure_slots[task] = PairFailure{inst.id, model, m, "Error", e.what()};
            }
        }
    };

    const std::size_t n_threads =
        std::min<std::size_t>(static_cast<std::size_t>(cfg.parallelism), n_tasks);
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    RunReport report;
    report.config_snapshot = run_config_to_json(cfg);
    report.model_ids = models;
    report.metrics = cfg.metrics;
    report.beta = cfg.beta;
    report.rows = std::move(rows);
    for (auto& slot : failure_slots)
        if (slot) report.failures.push_back(std::move(*slot));
    report.transcript_file = "transcripts.jsonl";
    report.external_scores = ordered_json::object();

    // Per-model summaries.
    if (cfg.metrics.count(MetricId::dece)) {
        for (const auto& model : models) {
            std::vector<DecomposedScore> scores;
            for (const auto& row : report.rows)
                if (row.model_id == model && row.dece) scores.push_back(*row.dece);
            if (!scores.empty()) report.by_model.push_back(aggregate(scores, model));
        }
    }
    if (cfg.metrics.count(MetricId::pointwise)) {
        for (const auto& model : models) {
            std::vector<int> scores;
            for (const auto& row : report.rows)
                if (row.model_id == model && row.pointwise) scores.push_back(*row.pointwise);
            if (scores.empty()) continue;
            PointwiseModelSummary s;
            s.model_id = model;
            s.count = scores.size();
            s.gpa_score = gpa(scores);
            s.distribution = score_distribution(scores);
            report.pointwise_by_model.push_back(std::move(s));
        }
    }
    if (cfg.metrics.count(MetricId::rouge_l) || cfg.metrics.count(MetricId::bleu)) {
        for (const auto& model : models) {
            LexicalModelSummary s;
            s.model_id = model;
            double sp = 0, sr = 0, sf = 0, sb = 0;
            std::size_t n_rouge = 0, n_bleu = 0;
            std::vector<std::pair<std::string, std::vector<std::string>>> corpus;
            for (std::size_t k = 0; k < report.rows.size(); ++k) {
                const auto& row = report.rows[k];
                if (row.model_id != model) continue;
                if (row.rouge) {
                    sp += row.rouge->precision;
                    sr += row.rouge->recall;
                    sf += row.rouge->f1;
                    ++n_rouge;
                }
                if (row.bleu) {
                    sb += *row.bleu;
                    ++n_bleu;
                    const EvaluationInstance& inst = instances[k / models.size()];
                    auto it = inst.model_answers.find(model);
                    if (it != inst.model_answers.end())
                        corpus.emplace_back(it->second,
                                            std::vector<std::string>{inst.gold.full_text()});
                }
            }
            if (n_rouge == 0 && n_bleu == 0) continue;
            s.count = std::max(n_rouge, n_bleu);
            if (n_rouge > 0) {
                s.mean_rouge_precision = sp / static_cast<double>(n_rouge);
                s.mean_rouge_recall = sr / static_cast<double>(n_rouge);
                s.mean_rouge_f1 = sf / static_cast<double>(n_rouge);
            }
            if (n_bleu > 0) {
                s.mean_bleu = sb / static_cast<double>(n_bleu);
                s.bleu_corpus = corpus_bleu(corpus);
            }
            report.lexical_by_model.push_back(std::move(s));
        }
    }

    // Diagnostic slices with quadrant classification.
    if (cfg.metrics.count(MetricId::dece)) {
        for (SliceAxis axis : {SliceAxis::jurisdiction, SliceAxis::query_type}) {
            std::vector<GroupSummary> groups;
            try {
                groups = slice_scores(report.rows, axis);
            } catch (const StatsError&) {
                continue;  // axis has no labels in this dataset
            }
            SliceSet set;
            set.axis = slice_axis_name(axis);
            set.thresholds = cfg.thresholds ? *cfg.thresholds : median_thresholds(groups);
            for (const auto& g : groups)
                set.groups.push_back({g, classify_quadrant(g, set.thresholds)});
            report.slices.push_back(std::move(set));
        }
    }

    if (human) report.correlations = build_correlations(report.rows, *human, cfg.beta);

    if (revisions) {
        std::vector<std::pair<std::string, RevisionStats>> per_query;
        for (const auto& inst : instances) {
            auto it = revision_stats_by_instance.find(inst.id);
            if (it != revision_stats_by_instance.end()) per_query.emplace_back(it->first, it->second);
        }
        report.revisions = revision_stats(per_query);
    }

    if (timing) {
        timing->wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
        timing->judge_calls = transcript ? transcript->size() : 0;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

ordered_json group_summary_to_json(const GroupSummary& g) {
    return ordered_json{
        {"key", g.key},
        {"count", g.count},
        {"mean_precision", to_fixed(g.mean_precision)},
        {"median_precision", to_fixed(g.median_precision)},
        {"mean_recall", to_fixed(g.mean_recall)},
        {"median_recall", to_fixed(g.median_recall)},
        {"mean_f", to_fixed(g.mean_f)},
        {"median_f", to_fixed(g.median_f)},
        {"no_elements", g.no_elements},
        {"no_criteria", g.no_criteria},
        {"no_answer", g.no_answer},
        {"excluded", g.excluded},
    };
}

ordered_json score_row_to_json(const ScoreRow& row) {
    ordered_json j{{"instance_id", row.instance_id}, {"model_id", row.model_id}};
    if (row.jurisdiction) j["jurisdiction"] = *row.jurisdiction;
    if (row.query_type) j["query_type"] = *row.query_type;
    if (row.dece) {
        ordered_json flags = ordered_json::array();
        for (ScoreFlag f : row.dece->flags) flags.push_back(score_flag_name(f));
        j["dece"] = ordered_json{
            {"precision", to_fixed(row.dece->precision)},
            {"recall", to_fixed(row.dece->recall)},
            {"f_beta", to_fixed(row.dece->f_beta)},
            {"exact",
             {{"precision", to_fraction(row.dece->precision)},
              {"recall", to_fraction(row.dece->recall)},
              {"f_beta", to_fraction(row.dece->f_beta)}}},
            {"element_count", row.dece->element_count},
            {"criteria_count", row.dece->criteria_count},
            {"flags", flags},
        };
    }
    if (row.pointwise) {
        j["pointwise"] = ordered_json{{"score", *row.pointwise}, {"issues", row.pointwise_issues}};
    }
    if (row.rouge) {
        j["rouge_l"] = ordered_json{{"precision", row.rouge->precision},
                                    {"recall", row.rouge->recall},
                                    {"f1", row.rouge->f1},
                                    {"degenerate", row.rouge->degenerate}};
    }
    if (row.bleu) j["bleu"] = *row.bleu;
    return j;
}

ScoreRow score_row_from_json(const json& j) {
    ScoreRow row;
    row.instance_id = j.at("instance_id").get<std::string>();
    row.model_id = j.at("model_id").get<std::string>();
    if (j.contains("jurisdiction")) row.jurisdiction = j["jurisdiction"].get<std::string>();
    if (j.contains("query_type")) row.query_type = j["query_type"].get<std::string>();
    if (j.contains("dece")) {
        const auto& d = j["dece"];
        DecomposedScore s;
        const auto& exact = d.at("exact");
        s.precision = Rational(exact.at("precision").get<std::string>());
        s.recall = Rational(exact.at("recall").get<std::string>());
        s.f_beta = Rational(exact.at("f_beta").get<std::string>());
        s.element_count = d.at("element_count").get<std::size_t>();
        s.criteria_count = d.at("criteria_count").get<std::size_t>();
        for (const auto& f : d.at("flags")) {
            const std::string name = f.get<std::string>();
            if (name == "no_elements") s.flags.insert(ScoreFlag::no_elements);
            else if (name == "no_criteria") s.flags.insert(ScoreFlag::no_criteria);
            else if (name == "no_answer") s.flags.insert(ScoreFlag::no_answer);
        }
        row.dece = std::move(s);
    }
    if (j.contains("pointwise")) {
        row.pointwise = j["pointwise"].at("score").get<int>();
        if (j["pointwise"].contains("issues"))
            row.pointwise_issues = j["pointwise"]["issues"].get<std::vector<std::string>>();
    }
    if (j.contains("rouge_l")) {
        RougeScore r;
        r.precision = j["rouge_l"].at("precision").get<double>();
        r.recall = j["rouge_l"].at("recall").get<double>();
        r.f1 = j["rouge_l"].at("f1").get<double>();
        r.degenerate = j["rouge_l"].value("degenerate", false);
        row.rouge = r;
    }
    if (j.contains("bleu")) row.bleu = j["bleu"].get<double>();
    return row;
}

ordered_json correlation_row_to_json(const CorrelationRow& row) {
    ordered_json j{
        {"metric_pair", row.metric_pair},
        {"pearson", row.result.pearson_r},
        {"spearman", row.result.spearman_rho},
        {"n", row.result.n},
    };
    if (row.result.p_value_pearson) j["p_value_pearson"] = *row.result.p_value_pearson;
    if (row.result.p_value_spearman) j["p_value_spearman"] = *row.result.p_value_spearman;
    return j;
}

GroupSummary group_summary_from_json(const json& j) {
    GroupSummary g;
    g.key = j.at("key").get<std::string>();
    g.count = j.at("count").get<std::size_t>();
    g.mean_precision = parse_rational(j.at("mean_precision").get<std::string>());
    g.median_precision = parse_rational(j.at("median_precision").get<std::string>());
    g.mean_recall = parse_rational(j.at("mean_recall").get<std::string>());
    g.median_recall = parse_rational(j.at("median_recall").get<std::string>());
    g.mean_f = parse_rational(j.at("mean_f").get<std::string>());
    g.median_f = parse_rational(j.at("median_f").get<std::string>());
    g.no_elements = j.value("no_elements", std::size_t{0});
    g.no_criteria = j.value("no_criteria", std::size_t{0});
    g.no_answer = j.value("no_answer", std::size_t{0});
    g.excluded = j.value("excluded", std::size_t{0});
    return g;
}

std::optional<Quadrant> quadrant_from_name(std::string_view name) {
    if (name == "strong") return Quadrant::strong;
    if (name == "precision_weak") return Quadrant::precision_weak;
    if (name == "recall_weak") return Quadrant::recall_weak;
    if (name == "failure") return Quadrant::failure;
    return std::nullopt;
}

ordered_json revision_accounting_to_json(const RevisionAccounting& acc) {
    return ordered_json{
        {"original", acc.original},
        {"kept", acc.kept},
        {"modified", acc.modified},
        {"discarded", acc.discarded},
        {"added", acc.added},
        {"queries", acc.queries},
        {"verbatim_queries", acc.verbatim_queries},
        {"kept_rate_pct", to_percent(acc.kept_rate())},
        {"modified_rate_pct", to_percent(acc.modified_rate())},
        {"discarded_rate_pct", to_percent(acc.discarded_rate())},
        {"verbatim_query_rate_pct", to_percent(acc.verbatim_query_rate())},
    };
}

}  // namespace

ordered_json report_to_json(const RunReport& report) {
    ordered_json metrics = ordered_json::array();
    for (MetricId m : report.metrics) metrics.push_back(metric_name(m));

    ordered_json rows = ordered_json::array();
    for (const auto& row : report.rows) rows.push_back(score_row_to_json(row));

    ordered_json failures = ordered_json::array();
    for (const auto& f : report.failures) {
        failures.push_back(ordered_json{{"instance_id", f.instance_id},
                                        {"model_id", f.model_id},
                                        {"metric", metric_name(f.metric)},
                                        {"error_kind", f.error_kind},
                                        {"message", f.message}});
    }

    ordered_json by_model = ordered_json::array();
    for (const auto& g : report.by_model) by_model.push_back(group_summary_to_json(g));

    ordered_json pointwise = ordered_json::array();
    for (const auto& s : report.pointwise_by_model) {
        ordered_json dist = ordered_json::object();
        for (const auto& [label, frac] : s.distribution) dist[label] = to_fixed(frac);
        pointwise.push_back(ordered_json{{"model_id", s.model_id},
                                         {"count", s.count},
                                         {"gpa", to_fixed(s.gpa_score, 2)},
                                         {"gpa_exact", to_fraction(s.gpa_score)},
                                         {"distribution", dist}});
    }

    ordered_json lexical = ordered_json::array();
    for (const auto& s : report.lexical_by_model) {
        lexical.push_back(ordered_json{{"model_id", s.model_id},
                                       {"count", s.count},
                                       {"rouge_l_precision", s.mean_rouge_precision},
                                       {"rouge_l_recall", s.mean_rouge_recall},
                                       {"rouge_l_f1", s.mean_rouge_f1},
                                       {"bleu_mean", s.mean_bleu},
                                       {"bleu_corpus", s.bleu_corpus}});
    }

    ordered_json slices = ordered_json::array();
    for (const auto& set : report.slices) {
        ordered_json groups = ordered_json::array();
        for (const auto& s : set.groups) {
            ordered_json g = group_summary_to_json(s.group);
            g["quadrant"] = quadrant_name(s.quadrant);
            groups.push_back(std::move(g));
        }
        slices.push_back(ordered_json{
            {"axis", set.axis},
            {"thresholds", {{"precision", set.thresholds.p_thr}, {"recall", set.thresholds.r_thr}}},
            {"groups", groups}});
    }

    ordered_json correlations = ordered_json::array();
    for (const auto& row : report.correlations) correlations.push_back(correlation_row_to_json(row));

    ordered_json j{
        {"format", "dece-report/1"},
        {"config", report.config_snapshot},
        {"models", report.model_ids},
        {"metrics", metrics},
        {"beta", to_fraction(report.beta)},
        {"scores", rows},
        {"failures", failures},
        {"summaries",
         {{"by_model", by_model},
          {"pointwise_by_model", pointwise},
          {"lexical_by_model", lexical},
          {"slices", slices}}},
        {"correlations", correlations},
        {"revision_stats", report.revisions ? revision_accounting_to_json(*report.revisions)
                                            : ordered_json(nullptr)},
        {"transcripts", report.transcript_file},
        {"external_scores", report.external_scores},
    };
    return j;
}

RunReport report_from_json(const json& j) {
    RunReport report;
    report.config_snapshot = j.value("config", json::object());
    if (j.contains("models")) report.model_ids = j["models"].get<std::vector<std::string>>();
    if (j.contains("metrics")) {
        for (const auto& m : j["metrics"]) {
            if (auto id = metric_from_name(m.get<std::string>())) report.metrics.insert(*id);
        }
    }
    if (j.contains("beta")) report.beta = Rational(j["beta"].get<std::string>());
    for (const auto& row : j.at("scores")) report.rows.push_back(score_row_from_json(row));
    if (j.contains("failures")) {
        for (const auto& f : j["failures"]) {
            PairFailure pf;
            pf.instance_id = f.at("instance_id").get<std::string>();
            pf.model_id = f.at("model_id").get<std::string>();
            if (auto m = metric_from_name(f.at("metric").get<std::string>())) pf.metric = *m;
            pf.error_kind = f.at("error_kind").get<std::string>();
            pf.message = f.value("message", "");
            report.failures.push_back(std::move(pf));
        }
    }
    if (j.contains("summaries")) {
        const auto& s = j["summaries"];
        if (s.contains("by_model"))
            for (const auto& g : s["by_model"]) report.by_model.push_back(group_summary_from_json(g));
        if (s.contains("pointwise_by_model")) {
            for (const auto& p : s["pointwise_by_model"]) {
                PointwiseModelSummary sum;
                sum.model_id = p.at("model_id").get<std::string>();
                sum.count = p.at("count").get<std::size_t>();
                sum.gpa_score = parse_rational(
                    p.contains("gpa_exact") ? p["gpa_exact"].get<std::string>()
                                            : p.at("gpa").get<std::string>());
                if (p.contains("distribution"))
                    for (const auto& [label, frac] : p["distribution"].items())
                        sum.distribution[label] = parse_rational(frac.get<std::string>());
                report.pointwise_by_model.push_back(std::move(sum));
            }
        }
        if (s.contains("lexical_by_model")) {
            for (const auto& l : s["lexical_by_model"]) {
                LexicalModelSummary sum;
                sum.model_id = l.at("model_id").get<std::string>();
                sum.count = l.at("count").get<std::size_t>();
                sum.mean_rouge_precision = l.value("rouge_l_precision", 0.0);
                sum.mean_rouge_recall = l.value("rouge_l_recall", 0.0);
                sum.mean_rouge_f1 = l.value("rouge_l_f1", 0.0);
                sum.mean_bleu = l.value("bleu_mean", 0.0);
                sum.bleu_corpus = l.value("bleu_corpus", 0.0);
                report.lexical_by_model.push_back(std::move(sum));
            }
        }
        if (s.contains("slices")) {
            for (const auto& set_json : s["slices"]) {
                SliceSet set;
                set.axis = set_json.at("axis").get<std::string>();
                set.thresholds.p_thr = set_json.at("thresholds").at("precision").get<double>();
                set.thresholds.r_thr = set_json.at("thresholds").at("recall").get<double>();
                for (const auto& g : set_json.at("groups")) {
                    SliceSummary slice;
                    slice.group = group_summary_from_json(g);
                    if (auto q = quadrant_from_name(g.value("quadrant", "strong")))
                        slice.quadrant = *q;
                    set.groups.push_back(std::move(slice));
                }
                report.slices.push_back(std::move(set));
            }
        }
    }
    if (j.contains("correlations")) {
        for (const auto& c : j["correlations"]) {
            CorrelationRow row;
            row.metric_pair = c.at("metric_pair").get<std::string>();
            row.result.pearson_r = c.at("pearson").get<double>();
            row.result.spearman_rho = c.at("spearman").get<double>();
            row.result.n = c.at("n").get<std::size_t>();
            if (c.contains("p_value_pearson"))
                row.result.p_value_pearson = c["p_value_pearson"].get<double>();
            if (c.contains("p_value_spearman"))
                row.result.p_value_spearman = c["p_value_spearman"].get<double>();
            report.correlations.push_back(std::move(row));
        }
    }
    if (j.contains("revision_stats") && j["revision_stats"].is_object()) {
        const auto& r = j["revision_stats"];
        RevisionAccounting acc;
        acc.original = r.value("original", std::size_t{0});
        acc.kept = r.value("kept", std::size_t{0});
        acc.modified = r.value("modified", std::size_t{0});
        acc.discarded = r.value("discarded", std::size_t{0});
        acc.added = r.value("added", std::size_t{0});
        acc.queries = r.value("queries", std::size_t{0});
        acc.verbatim_queries = r.value("verbatim_queries", std::size_t{0});
        report.revisions = acc;
    }
    if (j.contains("transcripts") && j["transcripts"].is_string())
        report.transcript_file = j["transcripts"].get<std::string>();
    if (j.contains("external_scores")) report.external_scores = j["external_scores"];
    return report;
}

RunReport load_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open report: " + path.string());
    json j = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) throw IoError("report is not valid JSON: " + path.string());
    return report_from_json(j);
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

std::string fmt_p_value(const std::optional<double>& p) {
    if (!p) return "-";
    if (*p < 0.05) return "< 0.05";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", *p);
    return buf;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

}  // namespace

std::string report_to_markdown(const RunReport& report) {
    std::ostringstream os;
    os << "# DeCE run report\n\n";
    os << "beta = " << to_fraction(report.beta) << "\n";

    if (!report.correlations.empty()) {
        os << "\n## Correlations\n\n";
        os << "| Metric Pair | Pearson | Spearman | P-Value | N |\n";
        os << "|---|---|---|---|---|\n";
        for (const auto& row : report.correlations) {
            os << "| " << row.metric_pair << " | " << fmt_double(row.result.pearson_r) << " | "
               << fmt_double(row.result.spearman_rho) << " | "
               << fmt_p_value(row.result.p_value_pearson) << " | " << row.result.n << " |\n";
        }
    }

    if (!report.by_model.empty()) {
        os << "\n## DeCE scores by model\n\n";
        os << "| Model | N | Mean P | Median P | Mean R | Median R | Mean F | Median F | "
              "no_elements | no_answer |\n";
        os << "|---|---|---|---|---|---|---|---|---|---|\n";
        for (const auto& g : report.by_model) {
            os << "| " << g.key << " | " << g.count << " | " << to_fixed(g.mean_precision) << " | "
               << to_fixed(g.median_precision) << " | " << to_fixed(g.mean_recall) << " | "
               << to_fixed(g.median_recall) << " | " << to_fixed(g.mean_f) << " | "
               << to_fixed(g.median_f) << " | " << g.no_elements << " | " << g.no_answer << " |\n";
        }
    }

    if (!report.pointwise_by_model.empty()) {
        os << "\n## Pointwise scores by model\n\n";
        os << "| Model | N | GPA |";
        for (const char* label : kRubricLabels) os << " " << label << " |";
        os << "\n|---|---|---|---|---|---|---|---|\n";
        for (const auto& s : report.pointwise_by_model) {
            os << "| " << s.model_id << " | " << s.count << " | " << to_fixed(s.gpa_score, 2) << " |";
            for (const char* label : kRubricLabels) {
                auto it = s.distribution.find(label);
                os << " " << to_percent(it == s.distribution.end() ? Rational(0) : it->second, 1)
                   << "% |";
            }
            os << "\n";
        }
    }

    if (!report.lexical_by_model.empty()) {
        os << "\n## Lexical baselines by model\n\n";
        os << "| Model | N | ROUGE-L P | ROUGE-L R | ROUGE-L F1 | BLEU (mean) | BLEU (corpus) |\n";
        os << "|---|---|---|---|---|---|---|\n";
        for (const auto& s : report.lexical_by_model) {
            os << "| " << s.model_id << " | " << s.count << " | " << fmt_double(s.mean_rouge_precision)
               << " | " << fmt_double(s.mean_rouge_recall) << " | " << fmt_double(s.mean_rouge_f1)
               << " | " << fmt_double(s.mean_bleu) << " | " << fmt_double(s.bleu_corpus) << " |\n";
        }
    }

    for (const auto& set : report.slices) {
        os << "\n## Slice: " << set.axis << " (thresholds P >= " << fmt_double(set.thresholds.p_thr)
           << ", R >= " << fmt_double(set.thresholds.r_thr) << ")\n\n";
        os << "| Group | N | Mean P | Mean R | Quadrant |\n";
        os << "|---|---|---|---|---|\n";
        for (const auto& s : set.groups) {
            os << "| " << s.group.key << " | " << s.group.count << " | "
               << to_fixed(s.group.mean_precision) << " | " << to_fixed(s.group.mean_recall)
               << " | " << quadrant_name(s.quadrant) << " |\n";
        }
    }

    if (report.revisions) {
        const auto& acc = *report.revisions;
        os << "\n## Criteria revision\n\n";
        os << "| Validation Outcome | Count | Percentage |\n";
        os << "|---|---|---|\n";
        os << "| No modification required | " << acc.kept << " | " << to_percent(acc.kept_rate())
           << "% |\n";
        os << "| Criteria modified | " << acc.modified << " | " << to_percent(acc.modified_rate())
           << "% |\n";
        os << "| Criteria rejected | " << acc.discarded << " | " << to_percent(acc.discarded_rate())
           << "% |\n";
        os << "| New criteria added | " << acc.added << " | |\n";
        os << "\nQueries accepted verbatim: " << to_percent(acc.verbatim_query_rate(), 1) << "% ("
           << acc.verbatim_queries << " of " << acc.queries << ")\n";
    }

    if (!report.failures.empty()) {
        os << "\n## Failures (" << report.failures.size() << ")\n\n";
        os << "| Instance | Model | Metric | Error |\n";
        os << "|---|---|---|---|\n";
        for (const auto& f : report.failures) {
            os << "| " << f.instance_id << " | " << f.model_id << " | " << metric_name(f.metric)
               << " | " << f.error_kind << " |\n";
        }
    }
    return os.str();
}

std::string report_to_csv(const RunReport& report) {
    std::map<std::tuple<std::string, std::string, MetricId>, const PairFailure*> failed;
    for (const auto& f : report.failures) failed[{f.instance_id, f.model_id, f.metric}] = &f;

    std::ostringstream os;
    os << "instance_id,model_id,metric,precision,recall,f_beta,score,flags,error\n";
    for (const auto& row : report.rows) {
        for (MetricId m : report.metrics) {
            os << csv_escape(row.instance_id) << "," << csv_escape(row.model_id) << ","
               << metric_name(m) << ",";
            auto it = failed.find({row.instance_id, row.model_id, m});
            if (it != failed.end()) {
                os << ",,,,," << csv_escape(it->second->error_kind) << "\n";
                continue;
            }
            std::string precision, recall, f, score, flags;
            switch (m) {
                case MetricId::dece:
                    if (row.dece) {
                        precision = to_fixed(row.dece->precision);
                        recall = to_fixed(row.dece->recall);
                        f = to_fixed(row.dece->f_beta);
                        for (ScoreFlag fl : row.dece->flags) {
                            if (!flags.empty()) flags += ";";
                            flags += score_flag_name(fl);
                        }
                    }
                    break;
                case MetricId::pointwise:
                    if (row.pointwise) score = std::to_string(*row.pointwise);
                    break;
                case MetricId::rouge_l:
                    if (row.rouge) {
                        precision = fmt_double(row.rouge->precision);
                        recall = fmt_double(row.rouge->recall);
                        f = fmt_double(row.rouge->f1);
                        if (row.rouge->degenerate) flags = "degenerate";
                    }
                    break;
                case MetricId::bleu:
                    if (row.bleu) score = fmt_double(*row.bleu);
                    break;
            }
            os << precision << "," << recall << "," << f << "," << score << "," << flags << ",\n";
        }
    }
    return os.str();
}

std::optional<ReportFormat> report_format_from_name(std::string_view name) {
    if (name == "json") return ReportFormat::json;
    if (name == "markdown" || name == "md") return ReportFormat::markdown;
    if (name == "csv") return ReportFormat::csv;
    return std::nullopt;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::filesystem::path emit_report(const RunReport& report, ReportFormat format,
                                  const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::filesystem::path path;
    std::string content;
    switch (format) {
        case ReportFormat::json:
            path = out_dir / "report.json";
            content = report_to_json(report).dump(2) + "\n";
            break;
        case ReportFormat::markdown:
            path = out_dir / "report.md";
            content = report_to_markdown(report);
            break;
        case ReportFormat::csv:
            path = out_dir / "report.csv";
            content = report_to_csv(report);
            break;
    }
    write_file_atomic(path, content);
    return path;
}

std::unique_ptr<JudgeBackend> make_backend(const BackendSpec& spec) {
    if (spec.kind == BackendSpec::Kind::scripted_transcript) {
        if (spec.path_or_endpoint.empty()) throw ConfigError("transcript backend needs a path");
        return std::make_unique<TranscriptReplayBackend>(
            std::filesystem::path(spec.path_or_endpoint));
    }
    HttpJudgeConfig http = http_config_from_env();
    if (!spec.path_or_endpoint.empty()) http.endpoint = spec.path_or_endpoint;
    if (!spec.model.empty()) http.model = spec.model;
    http.path = spec.api_path;
    return std::make_unique<HttpJudge>(http);
}

RunReport run_to_dir(const RunConfig& cfg) {
    if (cfg.output_dir.empty()) throw ConfigError("output_dir is required");

    std::unique_ptr<JudgeBackend> backend = make_backend(cfg.backend);

    TranscriptSink sink;
    RunTiming timing;
    RunReport report = run(cfg, *backend, &sink, &timing);

    std::filesystem::create_directories(cfg.output_dir);
    write_file_atomic(cfg.output_dir / "report.json", report_to_json(report).dump(2) + "\n");

    std::ostringstream transcripts;
    for (const auto& e : sink.snapshot()) transcripts << transcript_entry_to_json(e).dump() << "\n";
    write_file_atomic(cfg.output_dir / "transcripts.jsonl", transcripts.str());

    const ordered_json meta{{"wall_ms", timing.wall_ms}, {"judge_calls", timing.judge_calls}};
    write_file_atomic(cfg.output_dir / "run_meta.json", meta.dump(2) + "\n");
    return report;
}

}  // namespace dece
