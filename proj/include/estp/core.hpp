#pragma once

// Domain types and the timeline model shared by every other component.
// Time is integer frame indices plus a rational fps; interval membership
// tests stay exact and never touch floating point.

#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace estp {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input data (bad JSON, bad enum code, bad record shape).
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::int64_t line = -1)
        : Error(line >= 0 ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}
    std::int64_t line() const { return line_; }

private:
    std::int64_t line_;
};

// An identifier that does not resolve (dangling query_id and the like).
class ReferenceError : public Error {
public:
    using Error::Error;
};

// Caller passed an inconsistent argument combination.
class ArgumentError : public Error {
public:
    using Error::Error;
};

// Input exceeds a hard size bound (exhaustive search refusal).
class CapacityError : public Error {
public:
    using Error::Error;
};

// A documented precondition was violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

// An external scorer (LLM judge) failed; may carry the gt id for context.
class ScorerError : public Error {
public:
    explicit ScorerError(const std::string& what) : Error(what) {}
    ScorerError(const std::string& what, std::string gt_id)
        : Error("gt '" + gt_id + "': " + what), gt_id_(std::move(gt_id)) {}
    const std::string& gt_id() const { return gt_id_; }

private:
    std::string gt_id_;
};

// Synthetic generation constraints cannot be satisfied.
class GenerationError : public Error {
public:
    using Error::Error;
};

// A data-engine pipeline stage failed; names the stage and record.
class PipelineError : public Error {
public:
    PipelineError(const std::string& stage, const std::string& record_id,
                  const std::string& what)
        : Error("stage '" + stage + "', record '" + record_id + "': " + what) {}
};

// Reports with incompatible configurations fed to an aggregator.
class AggregationError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Timeline

using Frame = std::int64_t;

// Exact rational value, used for frame <-> seconds conversion.
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    Rational reduced() const {
        std::int64_t g = std::gcd(num < 0 ? -num : num, den);
        if (g == 0) return {0, 1};
        return {num / g, den / g};
    }
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    bool operator==(const Rational& o) const = default;
};

struct Timeline {
    std::int64_t fps_num = 30;  // frames per second, numerator (>= 1)
    std::int64_t fps_den = 1;   // denominator (>= 1)
    Frame num_frames = 0;

    // seconds = frame * den / num, exact.
    Rational frame_to_seconds(Frame frame) const {
        return Rational{frame * fps_den, fps_num}.reduced();
    }
    // Inverse of frame_to_seconds; exact on values it produced.
    Frame seconds_to_frame(const Rational& seconds) const {
        return seconds.num * fps_num / (seconds.den * fps_den);
    }
    double video_seconds() const {
        return static_cast<double>(num_frames) * static_cast<double>(fps_den) /
               static_cast<double>(fps_num);
    }
    bool operator==(const Timeline&) const = default;
};

// Closed interval [start, end]; both endpoints are valid answer frames.
struct Interval {
    Frame start = 0;
    Frame end = 0;

    bool contains(Frame f) const { return f >= start && f <= end; }
    Frame length_frames() const { return end - start + 1; }
    bool operator==(const Interval&) const = default;
};

// ---------------------------------------------------------------------------
// Task taxonomy

enum class TaskType {
    OR, AP, TRU, OL, OSC, EOL, EOSC, AR,  // explicit
    OFR, IFR, NAR, TU,                    // implicit
    ORC, TRC,                             // contextual
};

enum class ProactiveType { Explicit, Implicit, Contextual };

inline constexpr TaskType kAllTaskTypes[] = {
    TaskType::OR,  TaskType::AP,  TaskType::TRU, TaskType::OL,
    TaskType::OSC, TaskType::EOL, TaskType::EOSC, TaskType::AR,
    TaskType::OFR, TaskType::IFR, TaskType::NAR, TaskType::TU,
    TaskType::ORC, TaskType::TRC,
};

inline constexpr ProactiveType kAllProactiveTypes[] = {
    ProactiveType::Explicit, ProactiveType::Implicit, ProactiveType::Contextual,
};

// The proactive class a task code belongs to.
ProactiveType proactive_class_of(TaskType t);

std::string to_string(TaskType t);
std::string to_string(ProactiveType p);
std::optional<TaskType> task_type_from_string(const std::string& s);
std::optional<ProactiveType> proactive_type_from_string(const std::string& s);

// ---------------------------------------------------------------------------
// Records

struct Query {
    std::string id;
    std::string content;
    Frame issue_frame = 0;
    std::vector<std::string> context_refs;  // prior queries this one leans on
    Json extra = Json::object();            // unknown fields, kept verbatim

    bool operator==(const Query&) const = default;
};

struct GroundTruthItem {
    std::string id;
    std::string query_id;
    std::string content;
    std::vector<Interval> intervals;  // non-empty, pairwise disjoint
    TaskType task_type = TaskType::OR;
    ProactiveType proactive_type = ProactiveType::Explicit;
    Json extra = Json::object();

    // The interval containing f, if any (intervals are disjoint).
    const Interval* interval_containing(Frame f) const {
        for (const auto& iv : intervals)
            if (iv.contains(f)) return &iv;
        return nullptr;
    }
    bool operator==(const GroundTruthItem&) const = default;
};

struct Prediction {
    std::string id;
    std::string query_id;
    std::string content;
    Frame emit_frame = 0;
    Json extra = Json::object();

    bool operator==(const Prediction&) const = default;
};

struct Episode {
    std::string id;
    Timeline timeline;
    std::vector<Query> queries;
    std::vector<GroundTruthItem> gt_items;
    std::int64_t frame_tokens = 10;      // low-res tokens per frame, uniform
    std::int64_t high_res_tokens = 50;   // tokens for one high-res frame
    Json extra = Json::object();

    const Query* find_query(const std::string& qid) const {
        for (const auto& q : queries)
            if (q.id == qid) return &q;
        return nullptr;
    }
    const GroundTruthItem* find_gt(const std::string& gid) const {
        for (const auto& g : gt_items)
            if (g.id == gid) return &g;
        return nullptr;
    }
    bool operator==(const Episode&) const = default;
};

// ---------------------------------------------------------------------------
// Validation

// Checks every type invariant; violations are data, not errors. Empty result
// means the episode is well formed. Each entry names the offending entity.
std::vector<std::string> validate_episode(const Episode& episode);

// FNV-1a, used to fingerprint configurations so aggregation can refuse to
// mix reports produced under different settings.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex16(std::uint64_t value);

}  // namespace estp
