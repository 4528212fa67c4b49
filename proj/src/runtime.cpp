#include "estp/runtime.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace estp {

namespace {

void require_options(const SimulateOptions& options) {
    if (options.response_tokens < 0) throw ArgumentError("response_tokens must be >= 0");
    if (options.k_ct < 1) throw ArgumentError("k_ct must be >= 1");
}

// Groups script entries by frame and enforces the per-frame shape: one
// primary action, plus an optional re-decision that is only legal after an
// AskHigh and may not itself be AskHigh.
std::map<Frame, std::vector<ActionLabel>> script_table(const std::vector<ScriptEntry>& script) {
    std::map<Frame, std::vector<ActionLabel>> table;
    for (const auto& entry : script) {
        if (entry.frame < 0) throw ArgumentError("script frame must be >= 0");
        table[entry.frame].push_back(entry.action);
    }
    for (const auto& [frame, actions] : table) {
        if (actions.size() > 2)
            throw ArgumentError("script error: more than two actions on frame " +
                                std::to_string(frame));
        if (actions.size() == 2) {
            if (actions[0] != ActionLabel::AskHigh)
                throw ArgumentError(
                    "script error: second action without a leading ask_high on frame " +
                    std::to_string(frame));
            if (actions[1] == ActionLabel::AskHigh)
                throw ArgumentError("script error: ask_high twice on frame " +
                                    std::to_string(frame));
        }
    }
    return table;
}

void append_segment(CacheLedger& ledger, SegmentKind kind, std::int64_t tokens) {
    if (kind == SegmentKind::CompressionToken) {
        ledger.segments.push_back({kind, 0, false});
        ledger.current_tokens += ledger.k_ct;
    } else {
        ledger.segments.push_back({kind, tokens, false});
        ledger.current_tokens += tokens;
        ledger.cumulative_uncompressed_tokens += tokens;
    }
    ledger.peak_tokens = std::max(ledger.peak_tokens, ledger.current_tokens);
}

// Flips every uncompressed frame segment before `stop` starting the scan at
// `scan_start`, then appends one compression token for the whole low-res
// stretch and one per high-res frame. Returns the next scan start: after a
// compaction everything already in the ledger is settled.
std::size_t compact_before(CacheLedger& ledger, std::size_t scan_start, std::size_t stop) {
    bool any_low = false;
    std::int64_t high_frames = 0;
    for (std::size_t i = scan_start; i < stop; ++i) {
        auto& seg = ledger.segments[i];
        if (seg.compressed) continue;
        if (seg.kind == SegmentKind::LowResRun) {
            seg.compressed = true;
            ledger.current_tokens -= seg.token_count;
            any_low = true;
        } else if (seg.kind == SegmentKind::HighResFrame) {
            seg.compressed = true;
            ledger.current_tokens -= seg.token_count;
            ++high_frames;
        }
        // response text and compression tokens stay live
    }
    if (any_low) append_segment(ledger, SegmentKind::CompressionToken, 0);
    for (std::int64_t i = 0; i < high_frames; ++i)
        append_segment(ledger, SegmentKind::CompressionToken, 0);
    return ledger.segments.size();
}

void check_signal_coverage(const Episode& episode, const SignalMap* signals, Frame scope) {
    if (signals == nullptr)
        throw ArgumentError("threshold policy requires per-frame signals");
    std::vector<Frame> missing;
    for (Frame f = scope; f < episode.timeline.num_frames; ++f)
        if (!signals->count(f)) missing.push_back(f);
    if (!missing.empty()) {
        std::ostringstream msg;
        msg << "signals missing for " << missing.size() << " frame(s):";
        for (std::size_t i = 0; i < missing.size() && i < 8; ++i) msg << " " << missing[i];
        if (missing.size() > 8) msg << " ...";
        throw ArgumentError(msg.str());
    }
    for (Frame f = scope; f < episode.timeline.num_frames; ++f)
        if (!signal_is_valid(signals->at(f)))
            throw ArgumentError("invalid signal at frame " + std::to_string(f));
}

}  // namespace

PolicySpec PolicySpec::make_threshold(double threshold,
                                      std::optional<std::pair<double, double>> ask_band) {
    PolicySpec p;
    p.kind = PolicyKind::Threshold;
    p.threshold = threshold;
    p.ask_band = ask_band;
    validate_policy(p);
    return p;
}

PolicySpec PolicySpec::make_oracle() {
    PolicySpec p;
    p.kind = PolicyKind::Oracle;
    return p;
}

PolicySpec PolicySpec::make_scripted(std::vector<ScriptEntry> script) {
    PolicySpec p;
    p.kind = PolicyKind::Scripted;
    p.script = std::move(script);
    validate_policy(p);
    return p;
}

void validate_policy(const PolicySpec& policy) {
    switch (policy.kind) {
        case PolicyKind::Threshold: {
            if (!policy.threshold.has_value())
                throw ArgumentError("threshold policy needs a threshold");
            double t = *policy.threshold;
            if (!(t > 0.0 && t < 1.0)) throw ArgumentError("threshold must lie in (0,1)");
            if (policy.ask_band) {
                auto [lo, hi] = *policy.ask_band;
                if (!(lo >= 0.0 && lo <= hi && hi <= 1.0))
                    throw ArgumentError("ask_band must satisfy 0 <= lo <= hi <= 1");
            }
            if (!policy.script.empty())
                throw ArgumentError("threshold policy must not carry a script");
            return;
        }
        case PolicyKind::Oracle:
            if (policy.threshold || policy.ask_band || !policy.script.empty())
                throw ArgumentError("oracle policy carries no payload");
            return;
        case PolicyKind::Scripted:
            if (policy.threshold || policy.ask_band)
                throw ArgumentError("scripted policy must not carry a threshold");
            script_table(policy.script);  // shape check only
            return;
    }
    throw ArgumentError("unknown policy kind");
}

std::int64_t CacheLedger::recount_current() const {
    std::int64_t total = 0;
    for (const auto& seg : segments) {
        if (seg.kind == SegmentKind::CompressionToken)
            total += k_ct;
        else if (!seg.compressed)
            total += seg.token_count;
    }
    return total;
}

std::int64_t CacheLedger::recount_cumulative() const {
    std::int64_t total = 0;
    for (const auto& seg : segments) total += seg.token_count;
    return total;
}

SimResult simulate(const Episode& episode, const PolicySpec& policy, const SignalMap* signals,
                   const SimulateOptions& options) {
    {
        auto violations = validate_episode(episode);
        if (!violations.empty()) throw ContractError("invalid episode: " + violations.front());
    }
    validate_policy(policy);
    require_options(options);

    const Frame end = episode.timeline.num_frames;
    const Frame scope = supervision_scope_start(episode);

    if (policy.kind == PolicyKind::Threshold) check_signal_coverage(episode, signals, scope);

    // oracle tables: gt items by interval end frame, and the frames one
    // before an end where the oracle requests a high-res look
    std::map<Frame, std::vector<const GroundTruthItem*>> ends_at;
    std::set<Frame> ask_frames;
    if (policy.kind == PolicyKind::Oracle) {
        for (const auto& gt : episode.gt_items)
            for (const auto& iv : gt.intervals) {
                ends_at[iv.end].push_back(&gt);
                if (iv.end - 1 >= scope) ask_frames.insert(iv.end - 1);
            }
    }

    std::map<Frame, std::vector<ActionLabel>> script;
    if (policy.kind == PolicyKind::Scripted) {
        script = script_table(policy.script);
        if (!script.empty() && script.rbegin()->first >= end)
            throw ArgumentError("script frame " + std::to_string(script.rbegin()->first) +
                                " is outside the episode");
    }

    SimResult result;
    CacheLedger& ledger = result.ledger;
    ledger.k_ct = options.k_ct;
    std::size_t scan_start = 0;
    std::int64_t next_pred = 0;

    auto decide_threshold = [&](Frame f, bool allow_ask) -> ActionLabel {
        double p = signals->at(f).p_respond;
        if (p >= *policy.threshold) return ActionLabel::Respond;
        if (allow_ask && policy.ask_band && p >= policy.ask_band->first &&
            p <= policy.ask_band->second)
            return ActionLabel::AskHigh;
        return ActionLabel::Continue;
    };

    for (Frame f = scope; f < end; ++f) {
        append_segment(ledger, SegmentKind::LowResRun, episode.frame_tokens);

        ActionLabel action = ActionLabel::Continue;
        switch (policy.kind) {
            case PolicyKind::Threshold:
                action = decide_threshold(f, true);
                break;
            case PolicyKind::Oracle:
                action = ask_frames.count(f)          ? ActionLabel::AskHigh
                         : ends_at.count(f)           ? ActionLabel::Respond
                                                      : ActionLabel::Continue;
                break;
            case PolicyKind::Scripted: {
                auto it = script.find(f);
                action = it == script.end() ? ActionLabel::Continue : it->second.front();
                break;
            }
        }

        TraceRecord rec;
        rec.frame = f;

        if (action == ActionLabel::AskHigh) {
            rec.asked_high = true;
            append_segment(ledger, SegmentKind::HighResFrame, episode.high_res_tokens);
            // one re-decision, respond-vs-continue only
            switch (policy.kind) {
                case PolicyKind::Threshold:
                    action = decide_threshold(f, false);
                    break;
                case PolicyKind::Oracle:
                    action = ends_at.count(f) ? ActionLabel::Respond : ActionLabel::Continue;
                    break;
                case PolicyKind::Scripted: {
                    const auto& actions = script.at(f);
                    action = actions.size() == 2 ? actions[1] : ActionLabel::Continue;
                    break;
                }
            }
        }

        if (action == ActionLabel::Respond) {
            std::string text;
            auto emit = [&](const std::string& query_id, const std::string& content) {
                Prediction p;
                std::ostringstream id;
                id << "p-" << std::setw(6) << std::setfill('0') << next_pred++;
                p.id = id.str();
                p.query_id = query_id;
                p.content = content;
                p.emit_frame = f;
                result.predictions.push_back(std::move(p));
            };
            if (policy.kind == PolicyKind::Oracle) {
                for (const auto* gt : ends_at.at(f)) {
                    emit(gt->query_id, gt->content);
                    if (!text.empty()) text += "; ";
                    text += gt->content;
                }
            } else {
                // latest issued query owns simulated responses
                const Query* active = nullptr;
                for (const auto& q : episode.queries)
                    if (q.issue_frame <= f && (!active || q.issue_frame >= active->issue_frame))
                        active = &q;
                emit(active->id, "");
            }
            rec.response_text = text;
            append_segment(ledger, SegmentKind::ResponseText, options.response_tokens);
            if (options.compression_on)
                scan_start = compact_before(ledger, scan_start, ledger.segments.size() - 1);
        }

        rec.action = action;
        rec.cache_current = ledger.current_tokens;
        rec.cache_peak = ledger.peak_tokens;
        rec.cache_counterfactual = ledger.cumulative_uncompressed_tokens;
        result.trace.records.push_back(rec);
        if (options.on_frame) options.on_frame(ledger, result.trace.records.back());
    }

    auto& summary = result.trace.summary;
    summary.episode_id = episode.id;
    summary.compression_on = options.compression_on;
    summary.num_decisions = static_cast<std::int64_t>(result.trace.records.size());
    summary.num_predictions = static_cast<std::int64_t>(result.predictions.size());
    double vid_s = episode.timeline.video_seconds();
    summary.decisions_per_video_second =
        vid_s > 0.0 ? static_cast<double>(summary.num_decisions) / vid_s : 0.0;
    if (!result.trace.records.empty()) summary.compression_ratio = compression_ratio(result.trace);
    return result;
}

double compression_ratio(const ActionTrace& trace) {
    if (trace.records.empty())
        throw ArgumentError("compression ratio is undefined for an empty trace");
    long double current = 0.0L, counterfactual = 0.0L;
    for (const auto& rec : trace.records) {
        current += static_cast<long double>(rec.cache_current);
        counterfactual += static_cast<long double>(rec.cache_counterfactual);
    }
    return static_cast<double>(current / counterfactual);
}

ApsReport measure_aps(const Episode& episode, const PolicySpec& policy, const SignalMap* signals,
                      int trials, WallClock clock, double resolution,
                      const SimulateOptions& options) {
    if (trials < 3) throw ArgumentError("measure_aps needs at least 3 trials");
    if (resolution <= 0.0) throw ArgumentError("clock resolution must be positive");
    if (!clock)
        clock = [] {
            return std::chrono::duration<double>(
                       std::chrono::steady_clock::now().time_since_epoch())
                .count();
        };

    ApsReport report;
    report.trials = trials;
    std::vector<double> per_trial;
    for (int t = 0; t < trials; ++t) {
        double t0 = clock();
        auto res = simulate(episode, policy, signals, options);
        double elapsed = clock() - t0;
        report.decisions_per_video_second = res.trace.summary.decisions_per_video_second;
        if (res.trace.summary.num_decisions == 0) {
            report.empty_run = true;
            per_trial.push_back(0.0);
            continue;
        }
        if (elapsed <= 0.0) {
            elapsed = resolution;
            report.clamped = true;
        }
        per_trial.push_back(static_cast<double>(res.trace.summary.num_decisions) / elapsed);
    }
    std::sort(per_trial.begin(), per_trial.end());
    std::size_t n = per_trial.size();
    report.aps = n % 2 == 1 ? per_trial[n / 2] : 0.5 * (per_trial[n / 2 - 1] + per_trial[n / 2]);
    return report;
}

std::string to_string(SegmentKind k) {
    switch (k) {
        case SegmentKind::LowResRun: return "low_res_run";
        case SegmentKind::HighResFrame: return "high_res_frame";
        case SegmentKind::ResponseText: return "response_text";
        case SegmentKind::CompressionToken: return "compression_token";
    }
    throw ArgumentError("unknown segment kind");
}

std::optional<SegmentKind> segment_kind_from_string(const std::string& s) {
    if (s == "low_res_run") return SegmentKind::LowResRun;
    if (s == "high_res_frame") return SegmentKind::HighResFrame;
    if (s == "response_text") return SegmentKind::ResponseText;
    if (s == "compression_token") return SegmentKind::CompressionToken;
    return std::nullopt;
}

void write_trace_jsonl(const ActionTrace& trace, std::ostream& out) {
    for (const auto& rec : trace.records) {
        Json j;
        j["frame"] = rec.frame;
        j["action"] = to_string(rec.action);
        if (rec.action == ActionLabel::Respond) j["response_text"] = *rec.response_text;
        j["asked_high"] = rec.asked_high;
        j["cache_current"] = rec.cache_current;
        j["cache_peak"] = rec.cache_peak;
        j["cache_counterfactual"] = rec.cache_counterfactual;
        out << j.dump() << "\n";
    }
}

std::vector<TraceRecord> read_trace_jsonl(std::istream& in) {
    std::vector<TraceRecord> records;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::parse_error& e) {
            throw ParseError(std::string("bad trace record: ") + e.what(), line_no);
        }
        auto fail = [&](const std::string& what) -> ParseError {
            return ParseError("bad trace record: " + what, line_no);
        };
        if (!j.is_object() || !j.contains("frame") || !j["frame"].is_number_integer() ||
            !j.contains("action") || !j["action"].is_string())
            throw fail("frame and action are required");
        TraceRecord rec;
        rec.frame = j["frame"].get<Frame>();
        auto action = action_label_from_string(j["action"].get<std::string>());
        if (!action) throw fail("unknown action " + j["action"].get<std::string>());
        rec.action = *action;
        if (rec.action == ActionLabel::Respond) {
            if (!j.contains("response_text") || !j["response_text"].is_string())
                throw fail("respond records carry response_text");
            rec.response_text = j["response_text"].get<std::string>();
        } else if (j.contains("response_text")) {
            throw fail("response_text is only valid on respond records");
        }
        for (const char* key : {"asked_high", "cache_current", "cache_peak",
                                "cache_counterfactual"})
            if (!j.contains(key)) throw fail(std::string(key) + " is required");
        if (!j["asked_high"].is_boolean()) throw fail("asked_high must be a boolean");
        rec.asked_high = j["asked_high"].get<bool>();
        for (const char* key : {"cache_current", "cache_peak", "cache_counterfactual"})
            if (!j[key].is_number_integer() || j[key].get<std::int64_t>() < 0)
                throw fail(std::string(key) + " must be a non-negative integer");
        rec.cache_current = j["cache_current"].get<std::int64_t>();
        rec.cache_peak = j["cache_peak"].get<std::int64_t>();
        rec.cache_counterfactual = j["cache_counterfactual"].get<std::int64_t>();
        records.push_back(std::move(rec));
    }
    return records;
}

Json trace_summary_to_json(const TraceSummary& summary) {
    Json j;
    j["kind"] = "trace_summary";
    j["episode_id"] = summary.episode_id;
    j["compression_on"] = summary.compression_on;
    j["num_decisions"] = summary.num_decisions;
    j["num_predictions"] = summary.num_predictions;
    j["decisions_per_video_second"] = summary.decisions_per_video_second;
    if (summary.compression_ratio)
        j["compression_ratio"] = *summary.compression_ratio;
    else
        j["compression_ratio"] = nullptr;
    if (summary.aps)
        j["aps"] = *summary.aps;
    else
        j["aps"] = nullptr;
    return j;
}

Json ledger_to_json(const CacheLedger& ledger) {
    Json j;
    j["kind"] = "cache_ledger";
    j["k_ct"] = ledger.k_ct;
    j["current_tokens"] = ledger.current_tokens;
    j["peak_tokens"] = ledger.peak_tokens;
    j["cumulative_uncompressed_tokens"] = ledger.cumulative_uncompressed_tokens;
    j["segments"] = Json::array();
    for (const auto& seg : ledger.segments) {
        Json s;
        s["kind"] = to_string(seg.kind);
        s["tokens"] = seg.token_count;
        s["compressed"] = seg.compressed;
        j["segments"].push_back(std::move(s));
    }
    return j;
}

std::vector<ScriptEntry> read_script_jsonl(std::istream& in) {
    std::vector<ScriptEntry> script;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::parse_error& e) {
            throw ParseError(std::string("bad script record: ") + e.what(), line_no);
        }
        if (!j.is_object() || !j.contains("frame") || !j["frame"].is_number_integer() ||
            !j.contains("action") || !j["action"].is_string())
            throw ParseError("script records need an integer frame and a string action",
                             line_no);
        auto action = action_label_from_string(j["action"].get<std::string>());
        if (!action)
            throw ParseError("unknown script action " + j["action"].get<std::string>(), line_no);
        script.push_back({j["frame"].get<Frame>(), *action});
    }
    return script;
}

void write_script_jsonl(const std::vector<ScriptEntry>& script, std::ostream& out) {
    for (const auto& entry : script) {
        Json j;
        j["frame"] = entry.frame;
        j["action"] = to_string(entry.action);
        out << j.dump() << "\n";
    }
}

}  // namespace estp
