#include "estp/core.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

namespace estp {

ProactiveType proactive_class_of(TaskType t) {
    switch (t) {
        case TaskType::OR:
        case TaskType::AP:
        case TaskType::TRU:
        case TaskType::OL:
        case TaskType::OSC:
        case TaskType::EOL:
        case TaskType::EOSC:
        case TaskType::AR:
            return ProactiveType::Explicit;
        case TaskType::OFR:
        case TaskType::IFR:
        case TaskType::NAR:
        case TaskType::TU:
            return ProactiveType::Implicit;
        case TaskType::ORC:
        case TaskType::TRC:
            return ProactiveType::Contextual;
    }
    throw ContractError("unknown task type");
}

std::string to_string(TaskType t) {
    switch (t) {
        case TaskType::OR: return "OR";
        case TaskType::AP: return "AP";
        case TaskType::TRU: return "TRU";
        case TaskType::OL: return "OL";
        case TaskType::OSC: return "OSC";
        case TaskType::EOL: return "EOL";
        case TaskType::EOSC: return "EOSC";
        case TaskType::AR: return "AR";
        case TaskType::OFR: return "OFR";
        case TaskType::IFR: return "IFR";
        case TaskType::NAR: return "NAR";
        case TaskType::TU: return "TU";
        case TaskType::ORC: return "ORC";
        case TaskType::TRC: return "TRC";
    }
    throw ContractError("unknown task type");
}

std::string to_string(ProactiveType p) {
    switch (p) {
        case ProactiveType::Explicit: return "Explicit";
        case ProactiveType::Implicit: return "Implicit";
        case ProactiveType::Contextual: return "Contextual";
    }
    throw ContractError("unknown proactive type");
}

std::optional<TaskType> task_type_from_string(const std::string& s) {
    for (TaskType t : kAllTaskTypes)
        if (to_string(t) == s) return t;
    return std::nullopt;
}

std::optional<ProactiveType> proactive_type_from_string(const std::string& s) {
    for (ProactiveType p : kAllProactiveTypes)
        if (to_string(p) == s) return p;
    return std::nullopt;
}

std::vector<std::string> validate_episode(const Episode& episode) {
    std::vector<std::string> out;
    auto bad = [&](const std::string& msg) { out.push_back(msg); };

    const Timeline& tl = episode.timeline;
    if (tl.fps_num < 1 || tl.fps_den < 1)
        bad("episode '" + episode.id + "': fps numerator and denominator must be >= 1");
    if (tl.num_frames < 0)
        bad("episode '" + episode.id + "': num_frames must be non-negative");
    if (episode.frame_tokens < 1)
        bad("episode '" + episode.id + "': frame_tokens must be positive");
    if (episode.high_res_tokens < 1)
        bad("episode '" + episode.id + "': high_res_tokens must be positive");
    if (episode.high_res_tokens < episode.frame_tokens)
        bad("episode '" + episode.id + "': high_res_tokens must be >= frame_tokens");

    std::unordered_map<std::string, const Query*> query_by_id;
    for (const auto& q : episode.queries) {
        if (!query_by_id.emplace(q.id, &q).second)
            bad("query '" + q.id + "': duplicate query id");
        if (q.issue_frame < 0 || (tl.num_frames > 0 && q.issue_frame >= tl.num_frames))
            bad("query '" + q.id + "': issue_frame outside [0, num_frames)");
    }
    for (const auto& q : episode.queries) {
        for (const auto& ref : q.context_refs) {
            auto it = query_by_id.find(ref);
            if (it == query_by_id.end()) {
                bad("query '" + q.id + "': context_ref '" + ref + "' does not resolve");
            } else if (it->second->issue_frame >= q.issue_frame) {
                bad("query '" + q.id + "': context_ref '" + ref +
                    "' must have strictly smaller issue_frame");
            }
        }
    }

    std::unordered_set<std::string> gt_ids;
    for (const auto& g : episode.gt_items) {
        if (!gt_ids.insert(g.id).second)
            bad("gt '" + g.id + "': duplicate gt id");
        auto it = query_by_id.find(g.query_id);
        if (it == query_by_id.end())
            bad("gt '" + g.id + "': query_id '" + g.query_id + "' does not resolve");
        if (g.intervals.empty())
            bad("gt '" + g.id + "': intervals must be non-empty");

        for (const auto& iv : g.intervals) {
            if (iv.start > iv.end)
                bad("gt '" + g.id + "': interval [" + std::to_string(iv.start) + "," +
                    std::to_string(iv.end) + "] has start > end");
            if (iv.start < 0 || iv.end >= tl.num_frames)
                bad("gt '" + g.id + "': interval [" + std::to_string(iv.start) + "," +
                    std::to_string(iv.end) + "] endpoint outside [0, num_frames)");
            if (it != query_by_id.end() && iv.start < it->second->issue_frame)
                bad("gt '" + g.id + "': interval starts before query issue_frame");
        }

        auto sorted = g.intervals;
        std::sort(sorted.begin(), sorted.end(),
                  [](const Interval& a, const Interval& b) { return a.start < b.start; });
        for (std::size_t i = 1; i < sorted.size(); ++i) {
            if (sorted[i].start <= sorted[i - 1].end)
                bad("gt '" + g.id + "': intervals overlap after sorting by start");
        }

        if (proactive_class_of(g.task_type) != g.proactive_type)
            bad("gt '" + g.id + "': task_type " + to_string(g.task_type) +
                " is inconsistent with proactive_type " + to_string(g.proactive_type));
    }
    return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex16(std::uint64_t value) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xf];
        value >>= 4;
    }
    return out;
}

}  // namespace estp
