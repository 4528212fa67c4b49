// estp: one binary binding scoring, simulation, supervision targets, data
// generation and report aggregation.
//
// Exit codes: 0 ok, 1 usage, 2 invalid input or validation failure,
// 3 external client failure, 4 internal error.

#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "estp/batch.hpp"
#include "estp/datagen.hpp"
#include "estp/jsonl.hpp"
#include "estp/report.hpp"
#include "estp/runtime.hpp"
#include "estp/scoring.hpp"
#include "estp/supervision.hpp"

namespace fs = std::filesystem;
using namespace estp;

namespace {

// Flag combinations CLI11 cannot express are reported through this; it maps
// to the usage exit code.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("cannot open '" + path + "' for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Outputs appear atomically: write a sibling temp file, then rename over
// the target, so a crash never leaves a truncated artifact behind.
void write_file_atomic(const std::string& path, const std::string& content) {
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
        out << content;
        out.flush();
        if (!out) throw Error("write to '" + tmp.string() + "' failed");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw Error("cannot move output into place at '" + path + "': " + ec.message());
    }
}

std::string now_utc() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string dump_document(Json doc, bool no_meta) {
    if (!no_meta) doc["meta"] = Json{{"tool", "estp"}, {"written_at", now_utc()}};
    return doc.dump(2) + "\n";
}

std::vector<Episode> load_episodes(const std::string& path) {
    std::istringstream in(slurp(path));
    auto episodes = read_episodes_jsonl(in);
    if (episodes.empty()) throw ArgumentError("'" + path + "' holds no episodes");
    return episodes;
}

// Signal files either leave every line untagged (single-episode use) or tag
// each line with the episode it belongs to.
std::vector<const SignalMap*> load_signals(const std::string& path,
                                           const std::vector<Episode>& episodes,
                                           std::map<std::string, SignalMap>& storage) {
    std::istringstream in(slurp(path));
    storage = read_signal_sets_jsonl(in);
    std::vector<const SignalMap*> out(episodes.size(), nullptr);
    if (storage.count("") != 0) {
        if (storage.size() != 1 || episodes.size() != 1)
            throw ArgumentError(
                "untagged signal lines require a single-episode input; add episode_id fields");
        out[0] = &storage[""];
        return out;
    }
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        auto it = storage.find(episodes[i].id);
        if (it != storage.end()) out[i] = &it->second;
    }
    return out;
}

std::pair<double, double> parse_band(const std::string& text) {
    auto colon = text.find(':');
    if (colon == std::string::npos)
        throw UsageError("--band expects LO:HI, got '" + text + "'");
    try {
        return {std::stod(text.substr(0, colon)), std::stod(text.substr(colon + 1))};
    } catch (const std::exception&) {
        throw UsageError("--band expects numeric LO:HI, got '" + text + "'");
    }
}

PolicySpec parse_policy(const std::string& text, const std::string& band) {
    if (text == "oracle") {
        if (!band.empty()) throw UsageError("--band only applies to threshold policies");
        return PolicySpec::make_oracle();
    }
    if (text.rfind("threshold:", 0) == 0) {
        double threshold = 0.0;
        try {
            threshold = std::stod(text.substr(10));
        } catch (const std::exception&) {
            throw UsageError("bad threshold in '" + text + "'");
        }
        std::optional<std::pair<double, double>> ask_band;
        if (!band.empty()) ask_band = parse_band(band);
        return PolicySpec::make_threshold(threshold, ask_band);
    }
    if (text.rfind("script:", 0) == 0) {
        if (!band.empty()) throw UsageError("--band only applies to threshold policies");
        std::istringstream in(slurp(text.substr(7)));
        return PolicySpec::make_scripted(read_script_jsonl(in));
    }
    throw UsageError("--policy expects threshold:X, oracle, or script:PATH, got '" + text + "'");
}

AnswerScorerSpec parse_answer(const std::string& text) {
    AnswerScorerSpec spec;
    if (text == "exact") {
        spec.kind = AnswerScorerKind::ExactMatch;
    } else if (text == "token-f1") {
        spec.kind = AnswerScorerKind::TokenF1;
    } else if (text == "judge" || text.rfind("judge:", 0) == 0) {
        spec.kind = AnswerScorerKind::ExternalJudge;
        spec.judge_url = text == "judge" ? "" : text.substr(6);
        if (spec.judge_url.empty()) {
            const char* env = std::getenv("ESTP_JUDGE_URL");
            if (env != nullptr) spec.judge_url = env;
        }
        if (spec.judge_url.empty())
            throw UsageError("judge scoring needs judge:URL or the ESTP_JUDGE_URL variable");
    } else {
        throw UsageError("--answer expects exact, token-f1, or judge:URL, got '" + text + "'");
    }
    return spec;
}

TimeScoreSpec parse_time(const std::string& text) {
    TimeScoreSpec spec;
    if (text == "constant") {
        spec.kind = TimeScoreKind::Constant;
        return spec;
    }
    if (text == "linear" || text.rfind("linear:", 0) == 0) {
        spec.kind = TimeScoreKind::LinearFromStart;
        if (text.size() > 7) {
            try {
                spec.floor = std::stod(text.substr(7));
            } catch (const std::exception&) {
                throw UsageError("bad floor in '" + text + "'");
            }
        }
        if (!(spec.floor >= 0.0 && spec.floor <= 1.0))
            throw UsageError("time floor must lie in [0, 1]");
        return spec;
    }
    throw UsageError("--time expects linear[:floor] or constant, got '" + text + "'");
}

// ---------------------------------------------------------------------------
// score

struct ScoreArgs {
    std::string episodes;
    std::string predictions;
    std::string matcher = "greedy";
    std::string duplicates = "strict";
    std::string answer = "token-f1";
    std::string time = "linear:0.2";
    std::string label = "run";
    std::string out;
    int jobs = 0;
    bool no_meta = false;
};

void run_score(const ScoreArgs& args) {
    auto episodes = load_episodes(args.episodes);
    std::istringstream pin(slurp(args.predictions));
    auto predictions = read_predictions_jsonl(pin);

    ScoreConfig config;
    config.match.strategy = args.matcher == "greedy" ? MatchStrategy::GreedyEarliest
                                                     : MatchStrategy::OptimalAssignment;
    config.match.duplicate_policy = args.duplicates == "strict"
                                        ? DuplicatePolicy::DuplicatesAreFP
                                        : DuplicatePolicy::IgnoreDuplicates;
    config.answer = parse_answer(args.answer);
    config.time = parse_time(args.time);
    config.label = args.label;

    // Predictions are routed to episodes through their query ids.
    std::map<std::string, std::size_t> owner;
    for (std::size_t i = 0; i < episodes.size(); ++i)
        for (const auto& q : episodes[i].queries)
            if (!owner.emplace(q.id, i).second)
                throw ArgumentError("query id '" + q.id +
                                    "' appears in more than one episode; cannot route "
                                    "predictions");
    std::vector<std::vector<Prediction>> routed(episodes.size());
    for (const auto& p : predictions) {
        auto it = owner.find(p.query_id);
        if (it == owner.end())
            throw ArgumentError("prediction '" + p.id + "' references unknown query '" +
                                p.query_id + "'");
        routed[it->second].push_back(p);
    }

    std::unique_ptr<HttpJudgeClient> judge;
    if (config.answer.kind == AnswerScorerKind::ExternalJudge)
        judge = std::make_unique<HttpJudgeClient>(config.answer.judge_url);

    auto scored = score_batch(episodes, routed, config, judge.get(), args.jobs);
    Json doc;
    if (scored.size() == 1) {
        doc = score_report_to_json(scored[0].report);
    } else {
        doc["kind"] = "score_reports";
        auto reports = Json::array();
        for (const auto& s : scored) reports.push_back(score_report_to_json(s.report));
        doc["reports"] = std::move(reports);
    }
    write_file_atomic(args.out, dump_document(std::move(doc), args.no_meta));
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
    std::string episodes;
    std::string policy;
    std::string band;
    std::string signals;
    std::string compress = "on";
    std::int64_t response_tokens = 8;
    std::int64_t k_ct = 1;
    std::string out_prefix;
    int jobs = 0;
    bool no_meta = false;
};

void run_simulate(const SimulateArgs& args) {
    auto episodes = load_episodes(args.episodes);
    auto policy = parse_policy(args.policy, args.band);
    std::map<std::string, SignalMap> storage;
    std::vector<const SignalMap*> signals;
    if (!args.signals.empty()) signals = load_signals(args.signals, episodes, storage);

    SimulateOptions options;
    options.compression_on = args.compress == "on";
    options.response_tokens = args.response_tokens;
    options.k_ct = args.k_ct;

    auto results = simulate_batch(episodes, policy, signals, options, args.jobs);
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        const std::string base = args.out_prefix + episodes[i].id;
        std::ostringstream preds;
        write_predictions_jsonl(results[i].predictions, preds);
        write_file_atomic(base + ".predictions.jsonl", preds.str());
        std::ostringstream trace;
        write_trace_jsonl(results[i].trace, trace);
        write_file_atomic(base + ".trace.jsonl", trace.str());
        write_file_atomic(base + ".summary.json",
                          dump_document(trace_summary_to_json(results[i].trace.summary),
                                        args.no_meta));
    }
}

// ---------------------------------------------------------------------------
// supervise

struct SuperviseArgs {
    std::string episodes;
    int stage = 0;
    double w_min = 0.1;
    std::string band;
    std::string uncertain_frames;
    std::string signals;
    std::string out;
    int jobs = 0;
};

void run_supervise(const SuperviseArgs& args) {
    auto episodes = load_episodes(args.episodes);
    SuperviseSpec spec;
    spec.stage = args.stage;
    spec.w_min = args.w_min;
    if (args.stage == 2) {
        if (args.band.empty() == args.uncertain_frames.empty())
            throw UsageError("stage 2 needs exactly one of --band or --uncertain-frames");
        if (!args.band.empty()) {
            spec.uncertain.mode = UncertainSpec::Mode::ProbabilityBand;
            std::tie(spec.uncertain.band_lo, spec.uncertain.band_hi) = parse_band(args.band);
        } else {
            spec.uncertain.mode = UncertainSpec::Mode::ExplicitSet;
            std::stringstream list(args.uncertain_frames);
            std::string item;
            while (std::getline(list, item, ',')) {
                try {
                    spec.uncertain.frames.insert(std::stoll(item));
                } catch (const std::exception&) {
                    throw UsageError("--uncertain-frames expects comma-separated integers");
                }
            }
            if (spec.uncertain.frames.empty())
                throw UsageError("--uncertain-frames expects comma-separated integers");
        }
    } else if (!args.band.empty() || !args.uncertain_frames.empty() || !args.signals.empty()) {
        throw UsageError("--band, --uncertain-frames and --signals apply to stage 2 only");
    }

    std::map<std::string, SignalMap> storage;
    std::vector<const SignalMap*> signals;
    if (!args.signals.empty()) signals = load_signals(args.signals, episodes, storage);

    auto merged = supervise_batch(episodes, spec, signals, args.jobs);
    std::ostringstream out;
    for (const auto& e : episodes) {
        for (const auto& t : merged.at(e.id)) {
            Json j;
            j["episode_id"] = e.id;
            j["frame"] = t.frame;
            j["label"] = to_string(t.label);
            j["weight"] = t.weight;
            j["stage"] = t.stage;
            j["stream"] = to_string(t.stream);
            j["lm"] = t.lm;
            out << j.dump() << '\n';
        }
    }
    write_file_atomic(args.out, out.str());
}

// ---------------------------------------------------------------------------
// gen

struct GenArgs {
    std::string synth;
    std::string pipeline;
    std::string client = "mock:";
    std::string episode_id = "ep-pipeline";
    int count = 1;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string out;
};

void run_gen(const GenArgs& args) {
    if (args.synth.empty() == args.pipeline.empty())
        throw UsageError("gen needs exactly one of --synth or --pipeline");
    std::vector<Episode> episodes;
    if (!args.synth.empty()) {
        Json doc;
        try {
            doc = Json::parse(slurp(args.synth));
        } catch (const Json::exception& e) {
            throw ArgumentError("bad parameter file '" + args.synth + "': " + e.what());
        }
        auto params = synth_params_from_json(doc);
        if (args.seed_given) params.seed = args.seed;
        episodes = synth_episodes(params, args.count);
    } else {
        std::istringstream in(slurp(args.pipeline));
        auto captions = read_captions_jsonl(in);
        GenClientSpec spec;
        spec.endpoint = args.client;
        auto client = make_gen_client(spec);
        episodes.push_back(run_pipeline(captions, *client, args.episode_id));
    }
    std::ostringstream out;
    write_episodes_jsonl(episodes, out);
    write_file_atomic(args.out, out.str());
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
    std::vector<std::string> in;
    bool table = false;
    bool pr = false;
    std::string aps_values;
    std::string format = "csv";
    std::string out;
    bool no_meta = false;
};

void collect_reports(const Json& doc, std::vector<ScoreReport>& out) {
    if (doc.is_array()) {
        for (const auto& item : doc) collect_reports(item, out);
        return;
    }
    if (!doc.is_object()) throw ArgumentError("report inputs must be json objects");
    if (doc.contains("kind") && doc["kind"] == "score_reports") {
        if (!doc.contains("reports") || !doc["reports"].is_array())
            throw ArgumentError("score_reports document lacks a 'reports' array");
        for (const auto& item : doc["reports"]) collect_reports(item, out);
        return;
    }
    Json bare = doc;
    bare.erase("meta");
    out.push_back(score_report_from_json(bare));
}

void run_report(const ReportArgs& args) {
    int modes = static_cast<int>(args.table) + static_cast<int>(args.pr) +
                static_cast<int>(!args.aps_values.empty());
    if (modes != 1) throw UsageError("report needs exactly one of --table, --pr, or --aps");

    std::vector<ScoreReport> reports;
    for (const auto& path : args.in) {
        Json doc;
        try {
            doc = Json::parse(slurp(path));
        } catch (const Json::exception& e) {
            throw ArgumentError("bad report file '" + path + "': " + e.what());
        }
        collect_reports(doc, reports);
    }

    // Series modes compare runs. A multi-episode run stamps all its episode
    // reports with one label, so same-label reports pool their components
    // into a single point before the series is built.
    auto pooled_by_label = [&reports] {
        std::vector<ScoreReport> pooled;
        std::map<std::string, std::size_t> index;
        for (const auto& r : reports) {
            auto [it, fresh] = index.emplace(r.label, pooled.size());
            if (fresh) {
                pooled.push_back(r);
                continue;
            }
            auto& dst = pooled[it->second];
            if (dst.config_hash != r.config_hash)
                throw AggregationError("reports labeled '" + r.label +
                                       "' mix scorer configurations: " + dst.config_hash +
                                       ", " + r.config_hash);
            dst.sum_s += r.sum_s;
            dst.fp += r.fp;
            dst.fn += r.fn;
            dst.gt_count += r.gt_count;
            fill_prf(dst.sum_s, dst.fp, dst.fn, dst.precision, dst.recall, dst.estp_f1);
        }
        return pooled;
    };

    std::ostringstream out;
    if (args.table) {
        auto table = table_by_task(reports);
        if (args.format == "csv")
            write_table_csv(table, out);
        else
            out << dump_document(table_to_json(table), args.no_meta);
    } else if (args.pr) {
        auto points = pr_points(pooled_by_label());
        if (args.format == "csv")
            write_pr_csv(points, out);
        else
            out << dump_document(pr_points_to_json(points), args.no_meta);
    } else {
        std::vector<double> values;
        std::stringstream list(args.aps_values);
        std::string item;
        while (std::getline(list, item, ',')) {
            try {
                values.push_back(std::stod(item));
            } catch (const std::exception&) {
                throw UsageError("--aps expects comma-separated numbers");
            }
        }
        auto points = aps_points(pooled_by_label(), values);
        if (args.format == "csv")
            write_aps_csv(points, out);
        else
            out << dump_document(aps_points_to_json(points), args.no_meta);
    }
    write_file_atomic(args.out, out.str());
}

int run_mapped(const std::function<void()>& action) {
    try {
        action();
        return 0;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const PipelineError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return std::string(e.what()).find("client failed") != std::string::npos ? 3 : 2;
    } catch (const ScorerError& e) {
        std::cerr << "judge error: " << e.what() << '\n';
        return 3;
    } catch (const ParseError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return 2;
    } catch (const ContractError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return 2;
    } catch (const ArgumentError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return 2;
    } catch (const GenerationError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return 2;
    } catch (const CapacityError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return 2;
    } catch (const AggregationError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return 2;
    } catch (const ReferenceError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 4;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"streaming video question answering toolkit"};
    app.name("estp");
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "print help for every subcommand");
    app.footer("exit codes: 0 ok, 1 usage, 2 invalid input, 3 external client failure, "
               "4 internal error");

    ScoreArgs score_args;
    auto* score = app.add_subcommand("score", "grade prediction files against episodes");
    score->add_option("--episodes", score_args.episodes, "episode jsonl file")->required();
    score->add_option("--predictions", score_args.predictions, "prediction jsonl file")
        ->required();
    score->add_option("--matcher", score_args.matcher, "pairing strategy")
        ->check(CLI::IsMember({"greedy", "optimal"}))
        ->capture_default_str();
    score->add_option("--duplicates", score_args.duplicates,
                      "extra matches of an answered item: strict counts them as false "
                      "positives, ignore drops them")
        ->check(CLI::IsMember({"strict", "ignore"}))
        ->capture_default_str();
    score->add_option("--answer", score_args.answer, "answer scorer: exact, token-f1, judge:URL")
        ->capture_default_str();
    score->add_option("--time", score_args.time, "time scorer: linear[:floor] or constant")
        ->capture_default_str();
    score->add_option("--label", score_args.label, "run label carried into reports")
        ->capture_default_str();
    score->add_option("--jobs", score_args.jobs, "episode-level worker threads (0 = auto)");
    score->add_flag("--no-meta", score_args.no_meta, "omit the meta block from outputs");
    score->add_option("--out", score_args.out, "output report json")->required();

    SimulateArgs sim_args;
    auto* simulate = app.add_subcommand("simulate", "run the streaming decision loop");
    simulate->add_option("--episodes", sim_args.episodes, "episode jsonl file")->required();
    simulate->add_option("--policy", sim_args.policy, "threshold:X, oracle, or script:PATH")
        ->required();
    simulate->add_option("--band", sim_args.band,
                         "LO:HI ask band for threshold policies (ask once, then decide)");
    simulate->add_option("--signals", sim_args.signals, "per-frame policy signal jsonl");
    simulate->add_option("--compress", sim_args.compress, "cache compression on responses")
        ->check(CLI::IsMember({"on", "off"}))
        ->capture_default_str();
    simulate->add_option("--response-tokens", sim_args.response_tokens,
                         "tokens a response appends to the cache")
        ->capture_default_str();
    simulate->add_option("--k-ct", sim_args.k_ct, "tokens per compression summary")
        ->capture_default_str();
    simulate->add_option("--jobs", sim_args.jobs, "episode-level worker threads (0 = auto)");
    simulate->add_flag("--no-meta", sim_args.no_meta, "omit the meta block from summaries");
    simulate
        ->add_option("--out-prefix", sim_args.out_prefix,
                     "per episode: <prefix><id>.predictions.jsonl, .trace.jsonl, .summary.json")
        ->required();

    SuperviseArgs sup_args;
    auto* supervise = app.add_subcommand("supervise", "emit per-frame training targets");
    supervise->add_option("--episodes", sup_args.episodes, "episode jsonl file")->required();
    supervise->add_option("--stage", sup_args.stage, "0 ends-only, 1 ramped, 2 twin streams")
        ->required()
        ->check(CLI::Range(0, 2));
    supervise->add_option("--w-min", sup_args.w_min, "ramp weight at an interval's first frame")
        ->capture_default_str();
    supervise->add_option("--band", sup_args.band, "stage 2: LO:HI p_respond uncertainty band");
    supervise->add_option("--uncertain-frames", sup_args.uncertain_frames,
                          "stage 2: explicit comma-separated uncertain frames");
    supervise->add_option("--signals", sup_args.signals,
                          "per-frame policy signal jsonl (band mode)");
    supervise->add_option("--jobs", sup_args.jobs, "episode-level worker threads (0 = auto)");
    supervise->add_option("--out", sup_args.out, "output target jsonl")->required();

    GenArgs gen_args;
    auto* gen = app.add_subcommand("gen", "generate episodes");
    gen->add_option("--synth", gen_args.synth, "synthesize from a parameter json file");
    gen->add_option("--pipeline", gen_args.pipeline, "build one episode from caption jsonl");
    gen->add_option("--client", gen_args.client, "generation endpoint (mock: offline)")
        ->capture_default_str();
    gen->add_option("--episode-id", gen_args.episode_id, "id for the pipeline episode")
        ->capture_default_str();
    gen->add_option("--count", gen_args.count, "episodes to synthesize")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    gen->add_option("--seed", gen_args.seed, "override the parameter file seed");
    gen->add_option("--out", gen_args.out, "output episode jsonl")->required();

    ReportArgs rep_args;
    auto* report = app.add_subcommand("report", "aggregate score reports");
    report->add_option("--in", rep_args.in, "score report json files")
        ->required()
        ->expected(-1);
    report->add_flag("--table", rep_args.table, "per-task score table");
    report->add_flag("--pr", rep_args.pr, "precision/recall series");
    report->add_option("--aps", rep_args.aps_values,
                       "actions-per-second series; comma-separated rates, one per run label");
    report->add_option("--format", rep_args.format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    report->add_flag("--no-meta", rep_args.no_meta, "omit the meta block from json outputs");
    report->add_option("--out", rep_args.out, "output file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        std::cout << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    }

    gen_args.seed_given = gen->count("--seed") > 0;
    if (score->parsed()) return run_mapped([&] { run_score(score_args); });
    if (simulate->parsed()) return run_mapped([&] { run_simulate(sim_args); });
    if (supervise->parsed()) return run_mapped([&] { run_supervise(sup_args); });
    if (gen->parsed()) return run_mapped([&] { run_gen(gen_args); });
    if (report->parsed()) return run_mapped([&] { run_report(rep_args); });
    std::cerr << app.help();
    return 1;
}
