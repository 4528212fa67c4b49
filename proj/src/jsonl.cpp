#include "estp/jsonl.hpp"

#include <istream>
#include <ostream>
#include <unordered_set>

namespace estp {
namespace {

// Keys owned by the canonical schema for each record kind; everything else
// is carried in `extra`.
bool is_known_key(const char* const* keys, std::size_t n, const std::string& k) {
    for (std::size_t i = 0; i < n; ++i)
        if (k == keys[i]) return true;
    return false;
}

Json collect_extra(const Json& record, const char* const* keys, std::size_t n) {
    Json extra = Json::object();
    for (auto it = record.begin(); it != record.end(); ++it)
        if (!is_known_key(keys, n, it.key())) extra[it.key()] = it.value();
    return extra;
}

void append_extra(Json& record, const Json& extra) {
    for (auto it = extra.begin(); it != extra.end(); ++it) record[it.key()] = it.value();
}

std::int64_t require_int(const Json& record, const char* key, std::int64_t line) {
    auto it = record.find(key);
    if (it == record.end())
        throw ParseError(std::string("missing field '") + key + "'", line);
    if (!it->is_number_integer())
        throw ParseError(std::string("field '") + key + "' must be a JSON integer", line);
    return it->get<std::int64_t>();
}

std::string require_string(const Json& record, const char* key, std::int64_t line) {
    auto it = record.find(key);
    if (it == record.end())
        throw ParseError(std::string("missing field '") + key + "'", line);
    if (!it->is_string())
        throw ParseError(std::string("field '") + key + "' must be a string", line);
    return it->get<std::string>();
}

Json parse_line(const std::string& line, std::int64_t line_no) {
    Json record = Json::parse(line, nullptr, false);
    if (record.is_discarded())
        throw ParseError("malformed JSON", line_no);
    if (!record.is_object())
        throw ParseError("record must be a JSON object", line_no);
    return record;
}

constexpr const char* kEpisodeKeys[] = {"kind", "id",           "fps_num",
                                        "fps_den", "num_frames", "frame_tokens",
                                        "high_res_tokens"};
constexpr const char* kQueryKeys[] = {"kind", "id", "content", "issue_frame", "context_refs"};
constexpr const char* kGtKeys[] = {"kind",      "id",        "query_id", "content",
                                   "intervals", "task_type", "proactive_type"};
constexpr const char* kPredKeys[] = {"kind", "id", "query_id", "content", "emit_frame"};

struct LineReader {
    std::istream& in;
    std::int64_t line_no = 0;
    std::string buf;
    bool pending = false;

    bool next() {
        if (pending) {
            pending = false;
            return true;
        }
        while (std::getline(in, buf)) {
            ++line_no;
            if (!buf.empty() && buf.back() == '\r') buf.pop_back();
            if (!buf.empty()) return true;
        }
        return false;
    }
    void push_back() { pending = true; }
};

Query parse_query(const Json& record, std::int64_t line_no) {
    Query q;
    q.id = require_string(record, "id", line_no);
    q.content = require_string(record, "content", line_no);
    q.issue_frame = require_int(record, "issue_frame", line_no);
    auto refs = record.find("context_refs");
    if (refs == record.end() || !refs->is_array())
        throw ParseError("field 'context_refs' must be an array", line_no);
    for (const auto& r : *refs) {
        if (!r.is_string())
            throw ParseError("context_refs entries must be strings", line_no);
        q.context_refs.push_back(r.get<std::string>());
    }
    q.extra = collect_extra(record, kQueryKeys, std::size(kQueryKeys));
    return q;
}

GroundTruthItem parse_gt(const Json& record, std::int64_t line_no) {
    GroundTruthItem g;
    g.id = require_string(record, "id", line_no);
    g.query_id = require_string(record, "query_id", line_no);
    g.content = require_string(record, "content", line_no);
    auto ivs = record.find("intervals");
    if (ivs == record.end() || !ivs->is_array())
        throw ParseError("field 'intervals' must be an array", line_no);
    for (const auto& iv : *ivs) {
        if (!iv.is_array() || iv.size() != 2 || !iv[0].is_number_integer() ||
            !iv[1].is_number_integer())
            throw ParseError("interval entries must be [start, end] integer pairs", line_no);
        g.intervals.push_back({iv[0].get<Frame>(), iv[1].get<Frame>()});
    }
    auto task = task_type_from_string(require_string(record, "task_type", line_no));
    if (!task) throw ParseError("unknown task_type code", line_no);
    g.task_type = *task;
    auto pro = proactive_type_from_string(require_string(record, "proactive_type", line_no));
    if (!pro) throw ParseError("unknown proactive_type", line_no);
    g.proactive_type = *pro;
    g.extra = collect_extra(record, kGtKeys, std::size(kGtKeys));
    return g;
}

Episode read_one_episode(LineReader& reader, const Json& header, std::int64_t header_line) {
    Episode ep;
    ep.id = require_string(header, "id", header_line);
    ep.timeline.fps_num = require_int(header, "fps_num", header_line);
    ep.timeline.fps_den = require_int(header, "fps_den", header_line);
    ep.timeline.num_frames = require_int(header, "num_frames", header_line);
    ep.frame_tokens = require_int(header, "frame_tokens", header_line);
    ep.high_res_tokens = require_int(header, "high_res_tokens", header_line);
    ep.extra = collect_extra(header, kEpisodeKeys, std::size(kEpisodeKeys));

    while (reader.next()) {
        Json record = parse_line(reader.buf, reader.line_no);
        std::string kind = require_string(record, "kind", reader.line_no);
        if (kind == "episode") {
            reader.push_back();
            break;
        } else if (kind == "query") {
            ep.queries.push_back(parse_query(record, reader.line_no));
        } else if (kind == "gt") {
            ep.gt_items.push_back(parse_gt(record, reader.line_no));
        } else {
            throw ParseError("unexpected record kind '" + kind + "'", reader.line_no);
        }
    }

    std::unordered_set<std::string> query_ids;
    for (const auto& q : ep.queries) query_ids.insert(q.id);
    for (const auto& g : ep.gt_items)
        if (!query_ids.count(g.query_id))
            throw ReferenceError("gt '" + g.id + "' references unknown query_id '" +
                                 g.query_id + "'");
    return ep;
}

}  // namespace

Episode read_episode_jsonl(std::istream& in) {
    LineReader reader{in};
    if (!reader.next()) throw ParseError("empty input, expected episode header", 0);
    Json header = parse_line(reader.buf, reader.line_no);
    if (require_string(header, "kind", reader.line_no) != "episode")
        throw ParseError("first record must have kind 'episode'", reader.line_no);
    return read_one_episode(reader, header, reader.line_no);
}

std::vector<Episode> read_episodes_jsonl(std::istream& in) {
    std::vector<Episode> out;
    LineReader reader{in};
    while (reader.next()) {
        Json header = parse_line(reader.buf, reader.line_no);
        if (require_string(header, "kind", reader.line_no) != "episode")
            throw ParseError("expected an episode header record", reader.line_no);
        out.push_back(read_one_episode(reader, header, reader.line_no));
    }
    return out;
}

Json episode_header_to_json(const Episode& episode) {
    Json j;
    j["kind"] = "episode";
    j["id"] = episode.id;
    j["fps_num"] = episode.timeline.fps_num;
    j["fps_den"] = episode.timeline.fps_den;
    j["num_frames"] = episode.timeline.num_frames;
    j["frame_tokens"] = episode.frame_tokens;
    j["high_res_tokens"] = episode.high_res_tokens;
    append_extra(j, episode.extra);
    return j;
}

Json query_to_json(const Query& query) {
    Json j;
    j["kind"] = "query";
    j["id"] = query.id;
    j["content"] = query.content;
    j["issue_frame"] = query.issue_frame;
    j["context_refs"] = query.context_refs;
    append_extra(j, query.extra);
    return j;
}

Json gt_to_json(const GroundTruthItem& gt) {
    Json j;
    j["kind"] = "gt";
    j["id"] = gt.id;
    j["query_id"] = gt.query_id;
    j["content"] = gt.content;
    Json ivs = Json::array();
    for (const auto& iv : gt.intervals) ivs.push_back(Json::array({iv.start, iv.end}));
    j["intervals"] = std::move(ivs);
    j["task_type"] = to_string(gt.task_type);
    j["proactive_type"] = to_string(gt.proactive_type);
    append_extra(j, gt.extra);
    return j;
}

Json prediction_to_json(const Prediction& prediction) {
    Json j;
    j["kind"] = "pred";
    j["id"] = prediction.id;
    j["query_id"] = prediction.query_id;
    j["content"] = prediction.content;
    j["emit_frame"] = prediction.emit_frame;
    append_extra(j, prediction.extra);
    return j;
}

void write_episode_jsonl(const Episode& episode, std::ostream& out) {
    out << episode_header_to_json(episode).dump() << '\n';
    for (const auto& q : episode.queries) out << query_to_json(q).dump() << '\n';
    for (const auto& g : episode.gt_items) out << gt_to_json(g).dump() << '\n';
}

void write_episodes_jsonl(const std::vector<Episode>& episodes, std::ostream& out) {
    for (const auto& ep : episodes) write_episode_jsonl(ep, out);
}

std::vector<Prediction> read_predictions_jsonl(std::istream& in) {
    std::vector<Prediction> out;
    LineReader reader{in};
    while (reader.next()) {
        Json record = parse_line(reader.buf, reader.line_no);
        if (require_string(record, "kind", reader.line_no) != "pred")
            throw ParseError("expected a record of kind 'pred'", reader.line_no);
        Prediction p;
        p.id = require_string(record, "id", reader.line_no);
        p.query_id = require_string(record, "query_id", reader.line_no);
        p.content = require_string(record, "content", reader.line_no);
        p.emit_frame = require_int(record, "emit_frame", reader.line_no);
        p.extra = collect_extra(record, kPredKeys, std::size(kPredKeys));
        out.push_back(std::move(p));
    }
    return out;
}

void write_predictions_jsonl(const std::vector<Prediction>& predictions, std::ostream& out) {
    for (const auto& p : predictions) out << prediction_to_json(p).dump() << '\n';
}

}  // namespace estp
