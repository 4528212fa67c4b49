#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "estp/core.hpp"
#include "estp/supervision.hpp"

namespace estp {

// ---------------------------------------------------------------------------
// Policies

enum class PolicyKind { Threshold, Oracle, Scripted };

struct ScriptEntry {
    Frame frame = 0;
    ActionLabel action = ActionLabel::Continue;
    bool operator==(const ScriptEntry&) const = default;
};

// A policy is one of:
//   Threshold  respond when p_respond >= threshold; optionally ask-high when
//              p_respond falls inside ask_band. Needs a signal per frame.
//   Oracle     responds at every answer interval's end frame with the ground
//              truth content, and asks-high one frame before each end.
//   Scripted   replays explicit per-frame actions. A frame may carry a second
//              entry only as the re-decision after an AskHigh; a second
//              AskHigh on the same frame is a script error.
struct PolicySpec {
    PolicyKind kind = PolicyKind::Oracle;
    std::optional<double> threshold;                  // Threshold only
    std::optional<std::pair<double, double>> ask_band;  // Threshold only
    std::vector<ScriptEntry> script;                  // Scripted only

    static PolicySpec make_threshold(double threshold,
                                     std::optional<std::pair<double, double>> ask_band = {});
    static PolicySpec make_oracle();
    static PolicySpec make_scripted(std::vector<ScriptEntry> script);
};

// Throws ArgumentError unless exactly the active kind's payload is populated
// and the payload is in range.
void validate_policy(const PolicySpec& policy);

// ---------------------------------------------------------------------------
// Cache ledger

enum class SegmentKind { LowResRun, HighResFrame, ResponseText, CompressionToken };

struct CacheSegment {
    SegmentKind kind = SegmentKind::LowResRun;
    std::int64_t token_count = 0;  // compression tokens store 0 here
    bool compressed = false;
    bool operator==(const CacheSegment&) const = default;
};

// Append-only token accounting. Compaction never deletes a segment; it flips
// `compressed` and appends CompressionToken segments, so the full history
// stays auditable.
struct CacheLedger {
    std::vector<CacheSegment> segments;
    std::int64_t k_ct = 1;  // live tokens contributed by one compression token
    std::int64_t current_tokens = 0;
    std::int64_t peak_tokens = 0;
    std::int64_t cumulative_uncompressed_tokens = 0;

    // Independent O(n) recounts used by tests to audit the running totals.
    std::int64_t recount_current() const;
    std::int64_t recount_cumulative() const;
};

std::string to_string(SegmentKind k);
std::optional<SegmentKind> segment_kind_from_string(const std::string& s);

// ---------------------------------------------------------------------------
// Trace

struct TraceRecord {
    Frame frame = 0;
    ActionLabel action = ActionLabel::Continue;  // final action for the frame
    bool asked_high = false;  // true when a high-res fetch preceded the action
    std::optional<std::string> response_text;    // present iff action Respond
    std::int64_t cache_current = 0;
    std::int64_t cache_peak = 0;
    // Tokens a compression-free run would hold at the same point.
    std::int64_t cache_counterfactual = 0;
    bool operator==(const TraceRecord&) const = default;
};

struct TraceSummary {
    std::string episode_id;
    bool compression_on = false;
    std::int64_t num_decisions = 0;
    std::int64_t num_predictions = 0;
    double decisions_per_video_second = 0.0;
    // Ratio of time-averaged live tokens to time-averaged counterfactual
    // tokens; absent for a zero-decision run.
    std::optional<double> compression_ratio;
    // Wall-clock actions per second; filled by measure_aps, not by simulate,
    // so simulate output stays bit-reproducible.
    std::optional<double> aps;
};

struct ActionTrace {
    std::vector<TraceRecord> records;
    TraceSummary summary;
};

struct SimResult {
    std::vector<Prediction> predictions;
    ActionTrace trace;
    CacheLedger ledger;
};

// ---------------------------------------------------------------------------
// Simulation

struct SimulateOptions {
    bool compression_on = true;
    std::int64_t response_tokens = 8;  // ledger cost of one emitted response
    std::int64_t k_ct = 1;
    // Called after every frame with the ledger and the frame's record.
    std::function<void(const CacheLedger&, const TraceRecord&)> on_frame;
};

// Runs the streaming decision loop over [scope start, episode end]. Per frame:
// ingest a low-res token batch, pick an action, on AskHigh ingest a high-res
// frame and re-decide respond-vs-continue once, on Respond emit predictions
// and response tokens and (when compression is on) compact everything before
// the response: low-res runs collapse under one compression token, each
// high-res frame keeps its own.
SimResult simulate(const Episode& episode, const PolicySpec& policy,
                   const SignalMap* signals = nullptr, const SimulateOptions& options = {});

// Time-averaged live tokens over time-averaged counterfactual tokens.
// Throws ArgumentError on an empty trace.
double compression_ratio(const ActionTrace& trace);

// ---------------------------------------------------------------------------
// Throughput

struct ApsReport {
    double aps = 0.0;
    double decisions_per_video_second = 0.0;
    int trials = 0;
    bool clamped = false;    // a trial's elapsed time hit the clock floor
    bool empty_run = false;  // the simulation made no decisions
};

// Monotone seconds source; injectable for deterministic tests.
using WallClock = std::function<double()>;

// Median actions-per-second over `trials` >= 3 repeated simulations.
// `resolution` is the smallest trustworthy elapsed time; zero elapsed trials
// clamp to it and set the flag.
ApsReport measure_aps(const Episode& episode, const PolicySpec& policy,
                      const SignalMap* signals = nullptr, int trials = 3,
                      WallClock clock = {}, double resolution = 1e-9,
                      const SimulateOptions& options = {});

// ---------------------------------------------------------------------------
// Serialization

void write_trace_jsonl(const ActionTrace& trace, std::ostream& out);
std::vector<TraceRecord> read_trace_jsonl(std::istream& in);
Json trace_summary_to_json(const TraceSummary& summary);
Json ledger_to_json(const CacheLedger& ledger);

std::vector<ScriptEntry> read_script_jsonl(std::istream& in);
void write_script_jsonl(const std::vector<ScriptEntry>& script, std::ostream& out);

}  // namespace estp
