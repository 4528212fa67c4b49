#pragma once

// Per-frame training targets for the three supervision stages, and an exact
// loss evaluator external training code can be checked against.
//
// Stage 0: binary respond/continue supervision at response frames (the last
//          frame of each answer interval).
// Stage 1: weighted respond supervision across whole intervals; the weight
//          ramps linearly from w_min at the interval start to 1 at its end.
// Stage 2: two parallel streams, ask-high supervision on uncertain frames,
//          plus a determine stream shaped like stage 0.

#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "estp/core.hpp"

namespace estp {

enum class ActionLabel { Continue, Respond, AskHigh };

// Which loss stream a target belongs to. Stages 0 and 1 emit a single
// "main" stream; stage 2 emits "ask_high" and "determine" in parallel and
// a loss evaluation sums both.
enum class TargetStream { Main, AskHigh, Determine };

struct SupervisionTarget {
    Frame frame = 0;
    ActionLabel label = ActionLabel::Continue;
    double weight = 1.0;  // in (0,1]; always 1 for Continue
    int stage = 0;        // 0, 1, or 2
    TargetStream stream = TargetStream::Main;
    bool lm = false;      // language-model loss applies here (Respond only)

    bool operator==(const SupervisionTarget&) const = default;
};

// One frame's policy output plus the externally computed language-model
// loss for that frame.
struct PolicySignal {
    double p_continue = 1.0;
    double p_respond = 0.0;
    double p_ask_high = 0.0;
    double lm_loss = 0.0;

    bool operator==(const PolicySignal&) const = default;
};

using SignalMap = std::map<Frame, PolicySignal>;

// Probabilities must form a distribution within tol.
bool signal_is_valid(const PolicySignal& s, double tol = 1e-9);

struct UncertainSpec {
    enum class Mode { ExplicitSet, ProbabilityBand };
    Mode mode = Mode::ProbabilityBand;
    std::set<Frame> frames;   // ExplicitSet
    double band_lo = 0.3;     // ProbabilityBand over p_respond, inclusive
    double band_hi = 0.7;
};

// Targets cover frames from the earliest query issue frame to the end of
// the episode; an episode without queries yields no targets.
Frame supervision_scope_start(const Episode& episode);

std::vector<SupervisionTarget> stage0_targets(const Episode& episode);

// Weight of a respond target at frame t inside [s, e]: w_min at s rising
// linearly to 1 at e; single-frame intervals weigh 1. t outside the
// interval is a contract violation.
double stage1_weight(Frame t, const Interval& interval, double w_min);

// Frames inside any answer interval are Respond-supervised with
// stage1_weight; when intervals of different gt items overlap, the one
// whose end is nearest supplies the weight (ties: earliest start).
std::vector<SupervisionTarget> stage1_targets(const Episode& episode, double w_min = 0.1);

// Uncertain frames get AskHigh targets (stage-1-style weight when the
// frame sits in an interval, otherwise 1); the determine stream mirrors
// stage 0. Band mode reads p_respond from signals and requires them.
std::vector<SupervisionTarget> stage2_targets(const Episode& episode,
                                              const UncertainSpec& uncertain,
                                              const SignalMap* signals = nullptr,
                                              double w_min = 0.1);

struct FrameLoss {
    Frame frame = 0;
    TargetStream stream = TargetStream::Main;
    double loss = 0.0;  // +inf when the supervised probability is 0

    bool operator==(const FrameLoss&) const = default;
};

struct LossReport {
    double omega = 0.0;
    double total = 0.0;
    std::map<TargetStream, double> per_stream;
    bool non_finite = false;  // some supervised probability was 0
    std::vector<FrameLoss> per_frame;

    bool operator==(const LossReport&) const = default;
};

// Per-frame loss = -log(weight * p_label), plus omega * lm_loss on
// lm-supervised Respond frames. Zero probability yields +inf and sets the
// non_finite flag instead of throwing. Every target frame needs a signal.
LossReport eval_loss(const std::vector<SupervisionTarget>& targets, const SignalMap& signals,
                     double omega);

std::string to_string(ActionLabel a);
std::string to_string(TargetStream s);
std::optional<ActionLabel> action_label_from_string(const std::string& s);

void write_targets_jsonl(const std::vector<SupervisionTarget>& targets, std::ostream& out);
std::vector<SupervisionTarget> read_targets_jsonl(std::istream& in);

// Signal lines: {"frame", "p_continue", "p_respond", "p_ask_high",
// "lm_loss"} plus an optional "episode_id" for files that carry signals for
// several episodes. The reader groups by episode id (lines without one land
// under ""), rejecting malformed probabilities and duplicate frames.
void write_signals_jsonl(const SignalMap& signals, std::ostream& out,
                         const std::string& episode_id = "");
std::map<std::string, SignalMap> read_signal_sets_jsonl(std::istream& in);

Json loss_report_to_json(const LossReport& report);

}  // namespace estp
