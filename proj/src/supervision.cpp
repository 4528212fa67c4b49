#include "estp/supervision.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace estp {
namespace {

void require_valid(const Episode& episode) {
    auto violations = validate_episode(episode);
    if (violations.empty()) return;
    std::string msg = "episode '" + episode.id + "' is not valid: " + violations.front();
    if (violations.size() > 1)
        msg += " (+" + std::to_string(violations.size() - 1) + " more)";
    throw ContractError(msg);
}

void require_w_min(double w_min) {
    if (!(w_min > 0.0 && w_min <= 1.0))
        throw ArgumentError("w_min must lie in (0, 1]");
}

// Response frames: the final frame of every answer interval.
std::set<Frame> response_frames(const Episode& episode) {
    std::set<Frame> out;
    for (const auto& gt : episode.gt_items)
        for (const auto& iv : gt.intervals) out.insert(iv.end);
    return out;
}

// The covering interval whose end is nearest to t; ties by earliest start.
const Interval* covering_interval(const Episode& episode, Frame t) {
    const Interval* best = nullptr;
    for (const auto& gt : episode.gt_items) {
        for (const auto& iv : gt.intervals) {
            if (!iv.contains(t)) continue;
            if (best == nullptr ||
                std::make_pair(iv.end - t, iv.start) < std::make_pair(best->end - t, best->start))
                best = &iv;
        }
    }
    return best;
}

std::vector<SupervisionTarget> stage0_shaped(const Episode& episode, int stage,
                                             TargetStream stream) {
    auto respond_at = response_frames(episode);
    std::vector<SupervisionTarget> out;
    for (Frame t = supervision_scope_start(episode); t < episode.timeline.num_frames; ++t) {
        SupervisionTarget target;
        target.frame = t;
        target.stage = stage;
        target.stream = stream;
        if (respond_at.count(t)) {
            target.label = ActionLabel::Respond;
            target.lm = true;
        }
        out.push_back(target);
    }
    return out;
}

}  // namespace

bool signal_is_valid(const PolicySignal& s, double tol) {
    auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!in_unit(s.p_continue) || !in_unit(s.p_respond) || !in_unit(s.p_ask_high)) return false;
    if (s.lm_loss < 0.0) return false;
    return std::abs(s.p_continue + s.p_respond + s.p_ask_high - 1.0) <= tol;
}

Frame supervision_scope_start(const Episode& episode) {
    if (episode.queries.empty()) return episode.timeline.num_frames;
    Frame start = episode.queries.front().issue_frame;
    for (const auto& q : episode.queries) start = std::min(start, q.issue_frame);
    return start;
}

std::vector<SupervisionTarget> stage0_targets(const Episode& episode) {
    require_valid(episode);
    return stage0_shaped(episode, 0, TargetStream::Main);
}

double stage1_weight(Frame t, const Interval& interval, double w_min) {
    require_w_min(w_min);
    if (!interval.contains(t))
        throw ContractError("frame " + std::to_string(t) + " lies outside [" +
                            std::to_string(interval.start) + ", " + std::to_string(interval.end) +
                            "]");
    if (interval.start == interval.end) return 1.0;
    double x = static_cast<double>(interval.end - t) /
               static_cast<double>(interval.end - interval.start);
    return w_min + (1.0 - w_min) * (1.0 - x);
}

std::vector<SupervisionTarget> stage1_targets(const Episode& episode, double w_min) {
    require_valid(episode);
    require_w_min(w_min);
    std::vector<SupervisionTarget> out;
    for (Frame t = supervision_scope_start(episode); t < episode.timeline.num_frames; ++t) {
        SupervisionTarget target;
        target.frame = t;
        target.stage = 1;
        if (const Interval* iv = covering_interval(episode, t)) {
            target.label = ActionLabel::Respond;
            target.weight = stage1_weight(t, *iv, w_min);
            target.lm = true;
        }
        out.push_back(target);
    }
    return out;
}

std::vector<SupervisionTarget> stage2_targets(const Episode& episode,
                                              const UncertainSpec& uncertain,
                                              const SignalMap* signals, double w_min) {
    require_valid(episode);
    require_w_min(w_min);

    Frame scope = supervision_scope_start(episode);
    std::set<Frame> uncertain_frames;
    if (uncertain.mode == UncertainSpec::Mode::ExplicitSet) {
        for (Frame f : uncertain.frames) {
            if (f < 0 || f >= episode.timeline.num_frames)
                throw ArgumentError("uncertain frame " + std::to_string(f) +
                                    " is outside the episode");
            if (f >= scope) uncertain_frames.insert(f);
        }
    } else {
        if (!(uncertain.band_lo > 0.0 && uncertain.band_lo < uncertain.band_hi &&
              uncertain.band_hi < 1.0))
            throw ArgumentError("uncertainty band must satisfy 0 < lo < hi < 1");
        if (signals == nullptr)
            throw ArgumentError("probability-band uncertainty needs policy signals");
        for (Frame t = scope; t < episode.timeline.num_frames; ++t) {
            auto it = signals->find(t);
            if (it == signals->end())
                throw ArgumentError("no policy signal for frame " + std::to_string(t));
            if (it->second.p_respond >= uncertain.band_lo &&
                it->second.p_respond <= uncertain.band_hi)
                uncertain_frames.insert(t);
        }
    }

    auto determine = stage0_shaped(episode, 2, TargetStream::Determine);
    std::vector<SupervisionTarget> out;
    std::size_t di = 0;
    for (Frame t = scope; t < episode.timeline.num_frames; ++t, ++di) {
        SupervisionTarget ask;
        ask.frame = t;
        ask.stage = 2;
        ask.stream = TargetStream::AskHigh;
        if (uncertain_frames.count(t)) {
            ask.label = ActionLabel::AskHigh;
            const Interval* iv = covering_interval(episode, t);
            ask.weight = iv != nullptr ? stage1_weight(t, *iv, w_min) : 1.0;
        }
        out.push_back(ask);
        out.push_back(determine[di]);
    }
    return out;
}

LossReport eval_loss(const std::vector<SupervisionTarget>& targets, const SignalMap& signals,
                     double omega) {
    if (omega < 0.0) throw ArgumentError("omega must be non-negative");

    std::vector<Frame> missing;
    for (const auto& t : targets)
        if (!signals.count(t.frame)) missing.push_back(t.frame);
    if (!missing.empty()) {
        std::sort(missing.begin(), missing.end());
        missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
        std::ostringstream msg;
        msg << "no policy signal for " << missing.size() << " target frame(s):";
        for (std::size_t i = 0; i < missing.size() && i < 8; ++i) msg << ' ' << missing[i];
        if (missing.size() > 8) msg << " ...";
        throw ArgumentError(msg.str());
    }

    LossReport report;
    report.omega = omega;
    for (const auto& target : targets) {
        if (!(target.weight > 0.0 && target.weight <= 1.0))
            throw ContractError("target at frame " + std::to_string(target.frame) +
                                " has weight outside (0, 1]");
        if (target.label == ActionLabel::Continue && target.weight != 1.0)
            throw ContractError("continue target at frame " + std::to_string(target.frame) +
                                " must have weight 1");
        const PolicySignal& sig = signals.at(target.frame);
        if (!signal_is_valid(sig))
            throw ArgumentError("policy signal at frame " + std::to_string(target.frame) +
                                " is not a probability distribution");
        double p = 0.0;
        switch (target.label) {
            case ActionLabel::Continue: p = sig.p_continue; break;
            case ActionLabel::Respond: p = sig.p_respond; break;
            case ActionLabel::AskHigh: p = sig.p_ask_high; break;
        }
        double scaled = target.weight * p;
        double loss;
        if (scaled <= 0.0) {
            loss = std::numeric_limits<double>::infinity();
            report.non_finite = true;
        } else {
            loss = -std::log(scaled);
        }
        if (target.label == ActionLabel::Respond && target.lm) loss += omega * sig.lm_loss;
        report.per_frame.push_back({target.frame, target.stream, loss});
        report.per_stream[target.stream] += loss;
        report.total += loss;
    }
    return report;
}

std::string to_string(ActionLabel a) {
    switch (a) {
        case ActionLabel::Continue: return "continue";
        case ActionLabel::Respond: return "respond";
        case ActionLabel::AskHigh: return "ask_high";
    }
    throw ArgumentError("unknown action label");
}

std::optional<ActionLabel> action_label_from_string(const std::string& s) {
    if (s == "continue") return ActionLabel::Continue;
    if (s == "respond") return ActionLabel::Respond;
    if (s == "ask_high") return ActionLabel::AskHigh;
    return std::nullopt;
}

std::string to_string(TargetStream s) {
    switch (s) {
        case TargetStream::Main: return "main";
        case TargetStream::AskHigh: return "ask_high";
        case TargetStream::Determine: return "determine";
    }
    throw ArgumentError("unknown target stream");
}

namespace {

ActionLabel action_label_from_string(const std::string& s, std::int64_t line) {
    if (s == "continue") return ActionLabel::Continue;
    if (s == "respond") return ActionLabel::Respond;
    if (s == "ask_high") return ActionLabel::AskHigh;
    throw ParseError("unknown action label '" + s + "'", line);
}

TargetStream stream_from_string(const std::string& s, std::int64_t line) {
    if (s == "main") return TargetStream::Main;
    if (s == "ask_high") return TargetStream::AskHigh;
    if (s == "determine") return TargetStream::Determine;
    throw ParseError("unknown target stream '" + s + "'", line);
}

}  // namespace

void write_targets_jsonl(const std::vector<SupervisionTarget>& targets, std::ostream& out) {
    for (const auto& t : targets) {
        Json j;
        j["frame"] = t.frame;
        j["label"] = to_string(t.label);
        j["weight"] = t.weight;
        j["stage"] = t.stage;
        j["stream"] = to_string(t.stream);
        j["lm"] = t.lm;
        out << j.dump() << '\n';
    }
}

std::vector<SupervisionTarget> read_targets_jsonl(std::istream& in) {
    std::vector<SupervisionTarget> out;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const std::exception& e) {
            throw ParseError(std::string("bad json: ") + e.what(), line_no);
        }
        SupervisionTarget t;
        if (!j.contains("frame") || !j["frame"].is_number_integer())
            throw ParseError("'frame' must be an integer", line_no);
        t.frame = j["frame"].get<Frame>();
        if (!j.contains("label") || !j["label"].is_string())
            throw ParseError("'label' must be a string", line_no);
        t.label = action_label_from_string(j["label"].get<std::string>(), line_no);
        if (!j.contains("weight") || !j["weight"].is_number())
            throw ParseError("'weight' must be a number", line_no);
        t.weight = j["weight"].get<double>();
        if (!(t.weight > 0.0 && t.weight <= 1.0))
            throw ParseError("'weight' must lie in (0, 1]", line_no);
        if (!j.contains("stage") || !j["stage"].is_number_integer())
            throw ParseError("'stage' must be an integer", line_no);
        t.stage = j["stage"].get<int>();
        if (t.stage < 0 || t.stage > 2) throw ParseError("'stage' must be 0, 1, or 2", line_no);
        if (!j.contains("stream") || !j["stream"].is_string())
            throw ParseError("'stream' must be a string", line_no);
        t.stream = stream_from_string(j["stream"].get<std::string>(), line_no);
        if (!j.contains("lm") || !j["lm"].is_boolean())
            throw ParseError("'lm' must be a boolean", line_no);
        t.lm = j["lm"].get<bool>();
        if (t.label == ActionLabel::Continue && t.weight != 1.0)
            throw ParseError("continue targets must have weight 1", line_no);
        if (t.label != ActionLabel::Respond && t.lm)
            throw ParseError("only respond targets can be lm-supervised", line_no);
        out.push_back(t);
    }
    return out;
}

void write_signals_jsonl(const SignalMap& signals, std::ostream& out,
                         const std::string& episode_id) {
    for (const auto& [frame, s] : signals) {
        Json j;
        if (!episode_id.empty()) j["episode_id"] = episode_id;
        j["frame"] = frame;
        j["p_continue"] = s.p_continue;
        j["p_respond"] = s.p_respond;
        j["p_ask_high"] = s.p_ask_high;
        j["lm_loss"] = s.lm_loss;
        out << j.dump() << '\n';
    }
}

std::map<std::string, SignalMap> read_signal_sets_jsonl(std::istream& in) {
    std::map<std::string, SignalMap> out;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const std::exception& e) {
            throw ParseError(std::string("bad json: ") + e.what(), line_no);
        }
        std::string id;
        if (j.contains("episode_id")) {
            if (!j["episode_id"].is_string())
                throw ParseError("'episode_id' must be a string", line_no);
            id = j["episode_id"].get<std::string>();
        }
        if (!j.contains("frame") || !j["frame"].is_number_integer())
            throw ParseError("'frame' must be an integer", line_no);
        Frame frame = j["frame"].get<Frame>();
        if (frame < 0) throw ParseError("'frame' must be non-negative", line_no);
        PolicySignal s;
        auto num = [&](const char* key, double fallback, bool required) {
            if (!j.contains(key)) {
                if (required)
                    throw ParseError(std::string("'") + key + "' must be a number", line_no);
                return fallback;
            }
            if (!j[key].is_number())
                throw ParseError(std::string("'") + key + "' must be a number", line_no);
            return j[key].get<double>();
        };
        s.p_continue = num("p_continue", 1.0, true);
        s.p_respond = num("p_respond", 0.0, true);
        s.p_ask_high = num("p_ask_high", 0.0, false);
        s.lm_loss = num("lm_loss", 0.0, false);
        if (!signal_is_valid(s))
            throw ParseError("probabilities must be non-negative and sum to 1", line_no);
        auto [it, inserted] = out[id].emplace(frame, s);
        (void)it;
        if (!inserted)
            throw ParseError("duplicate signal for frame " + std::to_string(frame), line_no);
    }
    return out;
}

Json loss_report_to_json(const LossReport& report) {
    auto number_or_null = [](double v) {
        return std::isfinite(v) ? Json(v) : Json(nullptr);
    };
    Json j;
    j["kind"] = "loss_report";
    j["omega"] = report.omega;
    j["total"] = number_or_null(report.total);
    j["non_finite"] = report.non_finite;
    j["per_stream"] = Json::object();
    for (const auto& [stream, total] : report.per_stream)
        j["per_stream"][to_string(stream)] = number_or_null(total);
    j["per_frame"] = Json::array();
    for (const auto& f : report.per_frame) {
        Json r;
        r["frame"] = f.frame;
        r["stream"] = to_string(f.stream);
        r["loss"] = number_or_null(f.loss);
        j["per_frame"].push_back(std::move(r));
    }
    return j;
}

}  // namespace estp
