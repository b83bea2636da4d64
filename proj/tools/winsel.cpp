// winsel: sliding-window passage re-ranking and utility selection.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>
#include <limits>

#include <CLI11.hpp>
#include <json.hpp>

#include "winsel/annotate.hpp"
#include "winsel/corpus.hpp"
#include "winsel/costsim.hpp"
#include "winsel/error.hpp"
#include "winsel/hashing.hpp"
#include "winsel/jsonl.hpp"
#include "winsel/judge.hpp"
#include "winsel/metrics.hpp"
#include "winsel/pipeline.hpp"
#include "winsel/prompting.hpp"
#include "winsel/remote_judge.hpp"
#include "winsel/text.hpp"
#include "winsel/windowing.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitPartial = 2;

struct Options {
    std::string corpus, queries, run, qrels, answers, evidence, predictions, selection;
    std::string judge = "oracle";
    std::string endpoint_url, model, transcript, templates;
    std::size_t window = 20, stride = 10, depth = 100;
    std::optional<std::size_t> k;
    std::string kind = "ranking";
    std::string out;
    std::size_t parallel = 1;
    std::uint64_t seed = 0;
    int threshold = 1;
    std::size_t passage_tokens = 300;
    std::size_t max_prompt_chars = 0;
    int max_retries = 3;
    long timeout_ms = 60'000;
    std::size_t max_in_flight = 4;
    double temperature = 0.0;
    std::vector<std::size_t> ndcg_k{10};
    int evidence_min_grade = 1;
    std::string profile = "never";
    std::size_t trials = 10'000;
    std::string carry = "uniform";
};

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Collects the reproducibility record written next to every output.
class Manifest {
public:
    Manifest(std::string command, const Options& o) : started_(utc_now()) {
        doc_["command"] = std::move(command);
        doc_["tool_version"] = kVersion;
        doc_["seed"] = o.seed;
        doc_["started_at"] = started_;
        doc_["inputs"] = json::object();
        doc_["parameters"] = json::object();
    }
    void input(const std::string& name, const std::string& path) {
        if (path.empty()) return;
        doc_["inputs"][name] = {{"path", path}, {"sha256", winsel::sha256_file(path)}};
    }
    json& param(const std::string& name) { return doc_["parameters"][name]; }
    json& field(const std::string& name) { return doc_[name]; }
    void write(const fs::path& dir) {
        doc_["finished_at"] = utc_now();
        std::ofstream(dir / "manifest.json") << winsel::dump_pretty(doc_) << '\n';
    }

private:
    std::string started_;
    json doc_;
};

void require(const std::string& value, const char* flag, const char* why) {
    if (value.empty()) throw winsel::ConfigError(std::string(flag) + " is required " + why);
}

fs::path prepare_out(const Options& o, std::initializer_list<const std::string*> inputs,
                     std::initializer_list<const char*> outputs) {
    require(o.out, "--out", "(output directory)");
    const fs::path dir(o.out);
    fs::create_directories(dir);
    for (const char* name : outputs) {
        const auto target = fs::weakly_canonical(dir / name);
        for (const std::string* in : inputs) {
            if (!in->empty() && fs::weakly_canonical(*in) == target) {
                throw winsel::ConfigError("output " + target.string() + " would overwrite an input");
            }
        }
    }
    return dir;
}

winsel::WindowConfig window_config(const Options& o) {
    winsel::WindowConfig cfg{o.depth, o.window, o.stride};
    cfg.validate();
    return cfg;
}

/// Owns whichever judge the flags asked for.
struct JudgeStack {
    std::unique_ptr<winsel::Judge> base;
    std::unique_ptr<winsel::Judge> recorder;
    winsel::Judge& get() { return recorder ? *recorder : *base; }
};

JudgeStack make_judge(const Options& o, const winsel::Qrels* qrels, const winsel::GoldAnswers* answers) {
    JudgeStack stack;
    if (o.judge == "oracle") {
        if (!qrels) throw winsel::ConfigError("--judge oracle needs --qrels");
        stack.base = std::make_unique<winsel::OracleJudge>(*qrels, o.threshold, answers);
    } else if (o.judge == "replay") {
        require(o.transcript, "--transcript", "for --judge replay");
        stack.base = std::make_unique<winsel::ReplayJudge>(fs::path(o.transcript));
    } else if (o.judge == "endpoint") {
        require(o.endpoint_url, "--endpoint-url", "for --judge endpoint");
        require(o.model, "--model", "for --judge endpoint");
        winsel::JudgeEndpointConfig cfg;
        cfg.base_url = o.endpoint_url;
        cfg.model_name = o.model;
        if (const char* key = std::getenv(winsel::kApiKeyEnv)) cfg.api_key = key;
        cfg.max_retries = o.max_retries;
        cfg.timeout = std::chrono::milliseconds(o.timeout_ms);
        cfg.max_in_flight = o.max_in_flight;
        cfg.temperature = o.temperature;
        stack.base = std::make_unique<winsel::RemoteJudge>(std::move(cfg));
    } else {
        throw winsel::ConfigError("unknown judge '" + o.judge + "'");
    }
    if (o.judge != "replay" && !o.transcript.empty()) {
        stack.recorder = std::make_unique<winsel::RecordingJudge>(*stack.base, fs::path(o.transcript));
    }
    return stack;
}

void record_judge(Manifest& m, const Options& o) {
    m.param("judge") = o.judge;
    if (o.judge == "oracle") m.param("threshold") = o.threshold;
    if (o.judge == "endpoint") {
        m.param("endpoint_url") = o.endpoint_url;
        m.param("model") = o.model;
        m.param("temperature") = o.temperature;
        m.param("max_retries") = o.max_retries;
        m.param("max_in_flight") = o.max_in_flight;
    }
    if (o.judge == "replay") m.input("transcript", o.transcript);
    m.param("passage_tokens") = o.passage_tokens;
    m.param("max_prompt_chars") = o.max_prompt_chars;
    m.input("templates", o.templates);
}

/// Inputs shared by rerank and select.
struct EngineInputs {
    winsel::Corpus corpus;
    winsel::QuerySet queries;
    winsel::Run run;
    std::optional<winsel::Qrels> qrels;
    std::optional<winsel::GoldAnswers> answers;
    winsel::TemplateSet templates;
    std::vector<std::string> warnings;
};

EngineInputs load_engine_inputs(const Options& o) {
    require(o.corpus, "--corpus", "");
    require(o.queries, "--queries", "");
    require(o.run, "--run", "");
    EngineInputs in;
    in.corpus = winsel::load_corpus(o.corpus, winsel::format_from_extension(o.corpus));
    in.queries = winsel::load_queries(o.queries, winsel::format_from_extension(o.queries));
    in.run = winsel::load_run(o.run, o.depth, &in.warnings);
    winsel::check_resolved(in.corpus, in.run);
    if (!o.qrels.empty()) in.qrels = winsel::load_qrels(o.qrels);
    if (!o.answers.empty()) in.answers = winsel::load_answers(o.answers);
    in.templates = winsel::load_templates(o.templates.empty() ? std::nullopt
                                                              : std::optional<fs::path>(o.templates));
    return in;
}

void record_engine(Manifest& m, const Options& o, const EngineInputs& in,
                   const winsel::WindowConfig& cfg) {
    m.input("corpus", o.corpus);
    m.input("queries", o.queries);
    m.input("run", o.run);
    m.input("qrels", o.qrels);
    m.input("answers", o.answers);
    m.param("depth") = cfg.depth;
    m.param("window") = cfg.window;
    m.param("stride") = cfg.stride;
    m.param("parallel") = o.parallel;
    m.field("warnings") = in.warnings;
    record_judge(m, o);
}

void report_aborted(const std::vector<std::string>& ids, Manifest& m) {
    m.field("aborted_queries") = ids;
    if (ids.empty()) return;
    std::cerr << "aborted " << ids.size() << " quer" << (ids.size() == 1 ? "y" : "ies") << ":";
    for (const auto& id : ids) std::cerr << ' ' << id;
    std::cerr << '\n';
}

winsel::PromptBudget budget_of(const Options& o) {
    winsel::PromptBudget b;
    b.per_passage_tokens = o.passage_tokens;
    b.max_prompt_chars = o.max_prompt_chars;
    return b;
}

int cmd_rerank(const Options& o) {
    const auto cfg = window_config(o);
    const fs::path dir = prepare_out(o, {&o.corpus, &o.queries, &o.run, &o.qrels, &o.transcript},
                                     {"run.trec", "trace.jsonl", "topk.jsonl", "manifest.json"});
    Manifest manifest("rerank", o);
    EngineInputs in = load_engine_inputs(o);
    record_engine(manifest, o, in, cfg);
    JudgeStack judge = make_judge(o, in.qrels ? &*in.qrels : nullptr, nullptr);
    winsel::WindowEngine engine(in.corpus, in.templates, budget_of(o), judge.get());

    const auto outcomes = winsel::rerank_all(in.queries, in.run, engine, cfg, o.parallel);
    {
        std::ofstream run_out(dir / "run.trec");
        winsel::write_run(run_out, winsel::ranked_run(outcomes), "winsel");
    }
    std::vector<const winsel::WindowTrace*> traces;
    for (const auto& oc : outcomes) traces.push_back(&oc.trace);
    {
        std::ofstream trace_out(dir / "trace.jsonl");
        winsel::write_traces(trace_out, traces);
    }
    if (o.k) {
        manifest.param("k") = *o.k;
        std::ofstream topk(dir / "topk.jsonl");
        winsel::write_top_k(topk, outcomes, *o.k);
    }
    const auto aborted = winsel::aborted_ids(outcomes);
    report_aborted(aborted, manifest);
    manifest.write(dir);
    return aborted.empty() ? kExitOk : kExitPartial;
}

int cmd_select(const Options& o) {
    const auto cfg = window_config(o);
    const fs::path dir = prepare_out(o, {&o.corpus, &o.queries, &o.run, &o.qrels, &o.transcript},
                                     {"selection.jsonl", "trace.jsonl", "manifest.json"});
    Manifest manifest("select", o);
    EngineInputs in = load_engine_inputs(o);
    record_engine(manifest, o, in, cfg);
    JudgeStack judge = make_judge(o, in.qrels ? &*in.qrels : nullptr, in.answers ? &*in.answers : nullptr);
    winsel::WindowEngine engine(in.corpus, in.templates, budget_of(o), judge.get());

    const auto outcomes = winsel::select_all(in.queries, in.run, engine, cfg, o.parallel);
    {
        std::ofstream sel(dir / "selection.jsonl");
        winsel::write_selections(sel, outcomes);
    }
    std::vector<const winsel::WindowTrace*> traces;
    for (const auto& oc : outcomes) traces.push_back(&oc.trace);
    {
        std::ofstream trace_out(dir / "trace.jsonl");
        winsel::write_traces(trace_out, traces);
    }
    const auto aborted = winsel::aborted_ids(outcomes);
    report_aborted(aborted, manifest);
    manifest.write(dir);
    return aborted.empty() ? kExitOk : kExitPartial;
}

int cmd_evaluate(const Options& o) {
    const fs::path dir = prepare_out(
        o, {&o.selection, &o.predictions, &o.run, &o.qrels, &o.answers, &o.evidence},
        {"report.json", "report.tsv", "manifest.json"});
    if (o.selection.empty() && o.predictions.empty() && o.run.empty()) {
        throw winsel::ConfigError("nothing to evaluate: pass --selection, --predictions or --run");
    }
    if (!o.predictions.empty() && o.answers.empty()) {
        throw winsel::ConfigError("--predictions needs gold answers (--answers)");
    }
    if (!o.selection.empty() && o.evidence.empty() && o.qrels.empty()) {
        throw winsel::ConfigError("--selection needs gold evidence (--evidence or --qrels)");
    }
    if (!o.run.empty() && o.qrels.empty()) {
        throw winsel::ConfigError("--run needs relevance judgments (--qrels)");
    }

    std::optional<winsel::Qrels> qrels;
    if (!o.qrels.empty()) qrels = winsel::load_qrels(o.qrels);

    winsel::MetricsInputs in;
    std::optional<winsel::Predictions> preds;
    std::optional<winsel::GoldAnswers> answers;
    if (!o.predictions.empty()) {
        preds = winsel::load_predictions(o.predictions);
        answers = winsel::load_answers(o.answers);
        in.predictions = &*preds;
        in.answers = &*answers;
    }
    std::optional<winsel::Selections> sel;
    std::optional<winsel::GoldEvidence> evidence;
    if (!o.selection.empty()) {
        sel = winsel::load_selections(o.selection);
        evidence = o.evidence.empty() ? winsel::evidence_from_qrels(*qrels, o.evidence_min_grade)
                                      : winsel::load_evidence(o.evidence);
        in.selections = &*sel;
        in.evidence = &*evidence;
    }
    std::optional<winsel::Run> run;
    if (!o.run.empty()) {
        run = winsel::load_run(o.run, std::numeric_limits<std::size_t>::max());
        in.run = &*run;
        in.qrels = &*qrels;
        for (std::size_t k : o.ndcg_k) {
            if (k < 1) throw winsel::ConfigError("--ndcg-k must be >= 1");
        }
        in.ndcg_cuts = o.ndcg_k;
    }

    Manifest manifest("evaluate", o);
    manifest.input("selection", o.selection);
    manifest.input("predictions", o.predictions);
    manifest.input("run", o.run);
    manifest.input("qrels", o.qrels);
    manifest.input("answers", o.answers);
    manifest.input("evidence", o.evidence);
    if (in.run) manifest.param("ndcg_k") = o.ndcg_k;
    if (in.selections && o.evidence.empty()) manifest.param("evidence_min_grade") = o.evidence_min_grade;

    const winsel::MetricsReport report = winsel::evaluate(in);
    std::ofstream(dir / "report.json") << winsel::dump_pretty(report.to_json()) << '\n';
    std::ofstream(dir / "report.tsv") << report.to_tsv();
    manifest.write(dir);

    if (report.mean_em) {
        std::cout << "EM " << winsel::text::format_fixed(*report.mean_em * 100, 2) << "  F1 "
                  << winsel::text::format_fixed(*report.mean_f1 * 100, 2) << "  ("
                  << report.answer_queries << " queries)\n";
    }
    if (report.evidence) {
        const auto& e = *report.evidence;
        std::cout << "evidence recall " << winsel::text::format_fixed(e.recall * 100, 2)
                  << "  precision " << winsel::text::format_fixed(e.precision * 100, 2)
                  << "  micro-F1 " << winsel::text::format_fixed(e.micro_f1 * 100, 2) << "  ("
                  << e.queries << " queries)\n";
    }
    for (const auto& [k, v] : report.ndcg) {
        std::cout << "nDCG@" << k << ' ' << winsel::text::format_fixed(v * 100, 2) << "  ("
                  << report.ndcg_queries << " queries)\n";
    }
    return kExitOk;
}

int cmd_annotate(const Options& o) {
    const auto cfg = window_config(o);
    const fs::path dir = prepare_out(o, {&o.corpus, &o.queries, &o.run, &o.qrels, &o.transcript},
                                     {"train.jsonl", "rejected.jsonl", "manifest.json"});
    Manifest manifest("annotate", o);
    EngineInputs in = load_engine_inputs(o);
    record_engine(manifest, o, in, cfg);
    manifest.param("kind") = o.kind;
    const auto kind = winsel::judge_kind_from_string(o.kind);
    JudgeStack judge = make_judge(o, in.qrels ? &*in.qrels : nullptr, in.answers ? &*in.answers : nullptr);

    const auto records = winsel::annotate(in.queries, in.run, in.corpus, judge.get(), kind, cfg,
                                          in.templates, budget_of(o), o.parallel);
    std::ofstream train(dir / "train.jsonl");
    std::ofstream rejected(dir / "rejected.jsonl");
    std::size_t passed = 0;
    std::vector<std::string> transport_failures;
    for (const auto& r : records) {
        if (r.validation.pass) {
            train << winsel::dump_line(winsel::training_json(r)) << '\n';
            ++passed;
        } else {
            rejected << winsel::dump_line(winsel::rejected_json(r)) << '\n';
            if (!r.error.empty()) transport_failures.push_back(r.query_id);
        }
    }
    manifest.field("records") = {{"passed", passed}, {"rejected", records.size() - passed}};
    report_aborted(transport_failures, manifest);
    manifest.write(dir);
    std::cout << passed << " passed, " << records.size() - passed << " rejected\n";
    return transport_failures.empty() ? kExitOk : kExitPartial;
}

int cmd_simulate(const Options& o) {
    const auto cfg = window_config(o);
    const auto profile = winsel::profile_from_arg(o.profile);
    winsel::CarryModel model;
    if (o.carry == "uniform") model = winsel::CarryModel::uniform;
    else if (o.carry == "sticky") model = winsel::CarryModel::sticky;
    else throw winsel::ConfigError("--carry must be uniform or sticky");

    Manifest manifest("simulate", o);
    if (fs::is_regular_file(o.profile)) manifest.input("profile", o.profile);
    manifest.param("profile") = profile.describe();
    manifest.param("carry") = o.carry;
    manifest.param("trials") = o.trials;
    manifest.param("depth") = cfg.depth;
    manifest.param("window") = cfg.window;
    manifest.param("stride") = cfg.stride;

    const auto result = winsel::simulate(cfg, profile, o.trials, o.seed, model, o.parallel);
    std::cout << "profile " << profile.describe() << " (" << o.carry << ")\n" << result.to_table();
    if (!o.out.empty()) {
        const fs::path dir(o.out);
        fs::create_directories(dir);
        json doc = result.to_json();
        doc["profile"] = profile.describe();
        doc["carry"] = o.carry;
        std::ofstream(dir / "cost.json") << winsel::dump_pretty(doc) << '\n';
        manifest.write(dir);
    }
    return kExitOk;
}

void add_engine_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--corpus", o.corpus, "Corpus (JSONL or TSV)");
    cmd->add_option("--queries", o.queries, "Queries (JSONL or TSV)");
    cmd->add_option("--run", o.run, "Candidate run (TREC format)");
    cmd->add_option("--qrels", o.qrels, "Relevance judgments (oracle judge)");
    cmd->add_option("--answers", o.answers, "Gold answers; the oracle uses them as pseudo-answers");
    cmd->add_option("--judge", o.judge, "Judge backend")->check(CLI::IsMember({"endpoint", "oracle", "replay"}));
    cmd->add_option("--endpoint-url", o.endpoint_url, "Chat-completions base URL");
    cmd->add_option("--model", o.model, "Model name for the endpoint");
    cmd->add_option("--transcript", o.transcript, "Replay source with --judge replay; otherwise responses are appended here");
    cmd->add_option("--templates", o.templates, "Prompt template file");
    cmd->add_option("--threshold", o.threshold, "Oracle selection grade threshold");
    cmd->add_option("--w", o.window, "Window size");
    cmd->add_option("--s", o.stride, "Stride");
    cmd->add_option("--depth", o.depth, "Candidate depth M");
    cmd->add_option("--out", o.out, "Output directory");
    cmd->add_option("--parallel", o.parallel, "Queries processed concurrently")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", o.seed, "Seed recorded in the manifest");
    cmd->add_option("--passage-tokens", o.passage_tokens, "Per-passage token budget")->check(CLI::PositiveNumber);
    cmd->add_option("--max-prompt-chars", o.max_prompt_chars, "Prompt length cap in characters (0 = none)");
    cmd->add_option("--max-retries", o.max_retries, "Endpoint retries on transport failure");
    cmd->add_option("--timeout-ms", o.timeout_ms, "Endpoint request timeout");
    cmd->add_option("--max-in-flight", o.max_in_flight, "Concurrent endpoint requests")->check(CLI::PositiveNumber);
    cmd->add_option("--temperature", o.temperature, "Sampling temperature");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sliding-window passage re-ranking and utility-based selection"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    Options o;

    auto* rerank = app.add_subcommand("rerank", "Back-to-front listwise re-ranking");
    add_engine_flags(rerank, o);
    rerank->add_option("--k", o.k, "Also write the top-k cut as topk.jsonl")->check(CLI::PositiveNumber);

    auto* select = app.add_subcommand("select", "Front-to-back utility-based selection");
    add_engine_flags(select, o);

    auto* annotate = app.add_subcommand("annotate", "Teacher annotation for distillation data");
    add_engine_flags(annotate, o);
    annotate->add_option("--kind", o.kind, "ranking or selection")->check(CLI::IsMember({"ranking", "selection"}));

    auto* evaluate = app.add_subcommand("evaluate", "Answer, evidence and ranking metrics");
    evaluate->add_option("--selection", o.selection, "Selection JSONL to score as evidence");
    evaluate->add_option("--predictions", o.predictions, "Answer predictions JSONL");
    evaluate->add_option("--run", o.run, "Run to score with nDCG");
    evaluate->add_option("--qrels", o.qrels, "Relevance judgments");
    evaluate->add_option("--answers", o.answers, "Gold answers JSONL");
    evaluate->add_option("--evidence", o.evidence, "Gold evidence JSONL (default: qrels grade >= 1)");
    evaluate->add_option("--evidence-min-grade", o.evidence_min_grade, "Qrels grade counted as evidence");
    evaluate->add_option("--ndcg-k", o.ndcg_k, "nDCG cutoffs")->expected(1, -1);
    evaluate->add_option("--out", o.out, "Output directory");

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo window-count simulation");
    simulate->add_option("--profile", o.profile, "never | always | bernoulli:P | histogram JSON path");
    simulate->add_option("--trials", o.trials, "Number of trials")->check(CLI::PositiveNumber);
    simulate->add_option("--seed", o.seed, "Random seed");
    simulate->add_option("--carry", o.carry, "uniform or sticky")->check(CLI::IsMember({"uniform", "sticky"}));
    simulate->add_option("--w", o.window, "Window size");
    simulate->add_option("--s", o.stride, "Stride");
    simulate->add_option("--depth", o.depth, "Candidate depth M");
    simulate->add_option("--parallel", o.parallel, "Worker threads")->check(CLI::PositiveNumber);
    simulate->add_option("--out", o.out, "Directory for cost.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitError;
    }

    try {
        if (*rerank) return cmd_rerank(o);
        if (*select) return cmd_select(o);
        if (*annotate) {
            if (annotate->count("--depth") == 0) o.depth = o.window;
            return cmd_annotate(o);
        }
        if (*evaluate) return cmd_evaluate(o);
        if (*simulate) return cmd_simulate(o);
    } catch (const std::exception& e) {
        std::cerr << "winsel: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}
