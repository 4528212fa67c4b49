#include "estp/datagen.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace estp {

namespace {

const char* kAdjectives[] = {"red",    "blue",  "green", "black", "white",  "small",
                             "large",  "round", "flat",  "clean", "dirty",  "open",
                             "closed", "full",  "empty", "warm"};
const char* kNouns[] = {"cup",   "bowl",  "knife",  "pan",    "towel", "jar",   "plate", "kettle",
                        "spoon", "board", "bottle", "carton", "mug",   "glove", "tray",  "lid"};

constexpr std::size_t kWords = 16;

// draws `count` distinct frames in [lo, hi] and returns them sorted
std::vector<Frame> distinct_frames(Splitmix64& rng, Frame lo, Frame hi, std::size_t count) {
    std::set<Frame> picked;
    while (picked.size() < count) picked.insert(rng.uniform(lo, hi));
    return {picked.begin(), picked.end()};
}

TaskType pick_task(Splitmix64& rng, const std::vector<std::pair<TaskType, double>>& pool,
                   double total) {
    double x = rng.uniform01() * total;
    double acc = 0.0;
    for (const auto& [task, w] : pool) {
        acc += w;
        if (x < acc) return task;
    }
    return pool.back().first;  // x landed on the total due to rounding
}

}  // namespace

void validate_synth_params(const SynthParams& params) {
    if (params.num_frames < 1) throw ArgumentError("num_frames must be >= 1");
    if (params.fps_num < 1 || params.fps_den < 1) throw ArgumentError("fps must be positive");
    if (params.queries_per_episode < 1)
        throw ArgumentError("queries_per_episode must be >= 1");
    if (params.intervals_min < 1 || params.intervals_min > params.intervals_max)
        throw ArgumentError("interval counts need 1 <= min <= max");
    if (!(params.contextual_fraction >= 0.0 && params.contextual_fraction <= 1.0))
        throw ArgumentError("contextual_fraction must lie in [0,1]");
    double total = 0.0;
    for (double w : params.task_mix) {
        if (!(w >= 0.0)) throw ArgumentError("task weights must be non-negative");
        total += w;
    }
    if (total == 0.0) throw ArgumentError("task weights must not all be zero");
}

Json synth_params_to_json(const SynthParams& params) {
    Json j;
    j["seed"] = params.seed;
    j["num_frames"] = params.num_frames;
    j["fps_num"] = params.fps_num;
    j["fps_den"] = params.fps_den;
    j["queries_per_episode"] = params.queries_per_episode;
    j["intervals_min"] = params.intervals_min;
    j["intervals_max"] = params.intervals_max;
    j["contextual_fraction"] = params.contextual_fraction;
    j["task_mix"] = params.task_mix;
    return j;
}

SynthParams synth_params_from_json(const Json& j) {
    if (!j.is_object()) throw ArgumentError("synth parameters must be a json object");
    static const std::set<std::string> known = {
        "seed",          "num_frames",    "fps_num",
        "fps_den",       "queries_per_episode", "intervals_min",
        "intervals_max", "contextual_fraction", "task_mix"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (known.count(key) == 0)
            throw ArgumentError("unknown synth parameter '" + key + "'");
    }
    SynthParams p;
    auto integer = [&](const char* key, auto& field) {
        if (!j.contains(key)) return;
        if (!j[key].is_number_integer())
            throw ArgumentError(std::string("'") + key + "' must be an integer");
        field = j[key].get<std::decay_t<decltype(field)>>();
    };
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
            throw ArgumentError("'seed' must be an integer");
        p.seed = j["seed"].get<std::uint64_t>();
    }
    integer("num_frames", p.num_frames);
    integer("fps_num", p.fps_num);
    integer("fps_den", p.fps_den);
    integer("queries_per_episode", p.queries_per_episode);
    integer("intervals_min", p.intervals_min);
    integer("intervals_max", p.intervals_max);
    if (j.contains("contextual_fraction")) {
        if (!j["contextual_fraction"].is_number())
            throw ArgumentError("'contextual_fraction' must be a number");
        p.contextual_fraction = j["contextual_fraction"].get<double>();
    }
    if (j.contains("task_mix")) {
        if (!j["task_mix"].is_array() || j["task_mix"].size() != p.task_mix.size())
            throw ArgumentError("'task_mix' must be an array of 14 weights");
        for (std::size_t i = 0; i < p.task_mix.size(); ++i) {
            if (!j["task_mix"][i].is_number())
                throw ArgumentError("'task_mix' must be an array of 14 weights");
            p.task_mix[i] = j["task_mix"][i].get<double>();
        }
    }
    validate_synth_params(p);
    return p;
}

Episode synth_episode(const SynthParams& params) {
    validate_synth_params(params);
    Splitmix64 rng{params.seed};

    const int q_count = params.queries_per_episode;
    // room for the widest interval draw: 2*max distinct frames per item,
    // doubled to keep rejection sampling quick
    const Frame reserve = 4 * static_cast<Frame>(params.intervals_max);
    if (params.num_frames <= reserve + q_count)
        throw GenerationError("num_frames " + std::to_string(params.num_frames) +
                              " cannot fit " + std::to_string(q_count) + " queries with up to " +
                              std::to_string(params.intervals_max) + " intervals each");

    std::vector<std::pair<TaskType, double>> plain_pool, ctx_pool;
    double plain_total = 0.0, ctx_total = 0.0;
    for (std::size_t i = 0; i < std::size(kAllTaskTypes); ++i) {
        TaskType task = kAllTaskTypes[i];
        double w = params.task_mix[i];
        if (w <= 0.0) continue;
        if (proactive_class_of(task) == ProactiveType::Contextual) {
            ctx_pool.emplace_back(task, w);
            ctx_total += w;
        } else {
            plain_pool.emplace_back(task, w);
            plain_total += w;
        }
    }

    Episode ep;
    ep.id = "ep-" + hex16(params.seed);
    ep.timeline.fps_num = params.fps_num;
    ep.timeline.fps_den = params.fps_den;
    ep.timeline.num_frames = params.num_frames;

    // strictly increasing issue frames keep contextual references legal
    auto issues = distinct_frames(rng, 0, params.num_frames - reserve - 1,
                                  static_cast<std::size_t>(q_count));

    for (int k = 0; k < q_count; ++k) {
        bool contextual = k > 0 && !ctx_pool.empty() &&
                          rng.uniform01() < params.contextual_fraction;
        if (!contextual && plain_pool.empty()) {
            if (k == 0 || ctx_pool.empty())
                throw GenerationError(
                    "task mix leaves no usable type for a non-contextual query");
            contextual = true;
        }
        TaskType task = contextual ? pick_task(rng, ctx_pool, ctx_total)
                                   : pick_task(rng, plain_pool, plain_total);

        const char* adj = kAdjectives[rng.uniform(0, kWords - 1)];
        const char* noun = kNouns[rng.uniform(0, kWords - 1)];

        Query q;
        q.id = ep.id + "-q" + std::to_string(k);
        q.issue_frame = issues[static_cast<std::size_t>(k)];
        std::ostringstream question;
        question << "what happens to the " << adj << " " << noun;
        if (contextual) {
            std::size_t ref = static_cast<std::size_t>(rng.uniform(0, k - 1));
            q.context_refs.push_back(ep.queries[ref].id);
            question << " from before";
        }
        q.content = question.str();

        GroundTruthItem gt;
        gt.id = q.id + "-g0";
        gt.query_id = q.id;
        gt.content = std::string(adj) + " " + noun;
        gt.task_type = task;
        gt.proactive_type = proactive_class_of(task);

        auto n_iv = static_cast<std::size_t>(
            rng.uniform(params.intervals_min, params.intervals_max));
        auto bounds = distinct_frames(rng, q.issue_frame, params.num_frames - 1, 2 * n_iv);
        for (std::size_t i = 0; i < n_iv; ++i)
            gt.intervals.push_back({bounds[2 * i], bounds[2 * i + 1]});

        ep.queries.push_back(std::move(q));
        ep.gt_items.push_back(std::move(gt));
    }

    auto violations = validate_episode(ep);
    if (!violations.empty())
        throw GenerationError("generated episode failed validation: " + violations.front());
    return ep;
}

std::vector<Episode> synth_episodes(const SynthParams& params, int count) {
    if (count < 0) throw ArgumentError("count must be >= 0");
    Splitmix64 seeder{params.seed};
    std::vector<Episode> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        SynthParams p = params;
        p.seed = seeder.next();
        out.push_back(synth_episode(p));
    }
    return out;
}

std::vector<Caption> read_captions_jsonl(std::istream& in) {
    std::vector<Caption> captions;
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
            throw ParseError(std::string("bad caption: ") + e.what(), line_no);
        }
        if (!j.is_object() || !j.contains("span") || !j["span"].is_array() ||
            j["span"].size() != 2 || !j["span"][0].is_number_integer() ||
            !j["span"][1].is_number_integer() || !j.contains("text") || !j["text"].is_string())
            throw ParseError("captions need span [start,end] and text", line_no);
        Caption c;
        c.span = {j["span"][0].get<Frame>(), j["span"][1].get<Frame>()};
        c.text = j["text"].get<std::string>();
        if (c.span.start < 0 || c.span.start > c.span.end)
            throw ParseError("caption span is not a valid frame range", line_no);
        if (c.text.empty()) throw ParseError("caption text must be non-empty", line_no);
        captions.push_back(std::move(c));
    }
    return captions;
}

void write_captions_jsonl(const std::vector<Caption>& captions, std::ostream& out) {
    for (const auto& c : captions) {
        Json j;
        j["span"] = Json::array({c.span.start, c.span.end});
        j["text"] = c.text;
        out << j.dump() << "\n";
    }
}

std::vector<QaPair> read_pairs_jsonl(std::istream& in) {
    std::vector<QaPair> pairs;
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
            throw ParseError(std::string("bad qa pair: ") + e.what(), line_no);
        }
        auto fail = [&](const std::string& what) -> ParseError {
            return ParseError("bad qa pair: " + what, line_no);
        };
        for (const char* key : {"id", "question", "answer", "task_type"})
            if (!j.contains(key) || !j[key].is_string())
                throw fail(std::string(key) + " must be a string");
        if (!j.contains("intervals") || !j["intervals"].is_array())
            throw fail("intervals must be an array");
        QaPair p;
        p.id = j["id"].get<std::string>();
        p.question = j["question"].get<std::string>();
        p.answer = j["answer"].get<std::string>();
        auto task = task_type_from_string(j["task_type"].get<std::string>());
        if (!task) throw fail("unknown task_type " + j["task_type"].get<std::string>());
        p.task_type = *task;
        for (const auto& iv : j["intervals"]) {
            if (!iv.is_array() || iv.size() != 2 || !iv[0].is_number_integer() ||
                !iv[1].is_number_integer())
                throw fail("each interval is [start,end]");
            p.intervals.push_back({iv[0].get<Frame>(), iv[1].get<Frame>()});
        }
        if (j.contains("context_refs")) {
            if (!j["context_refs"].is_array()) throw fail("context_refs must be an array");
            for (const auto& r : j["context_refs"]) {
                if (!r.is_string()) throw fail("context_refs must hold strings");
                p.context_refs.push_back(r.get<std::string>());
            }
        }
        pairs.push_back(std::move(p));
    }
    return pairs;
}

void write_pairs_jsonl(const std::vector<QaPair>& pairs, std::ostream& out) {
    for (const auto& p : pairs) {
        Json j;
        j["id"] = p.id;
        j["question"] = p.question;
        j["answer"] = p.answer;
        j["intervals"] = Json::array();
        for (const auto& iv : p.intervals) j["intervals"].push_back({iv.start, iv.end});
        j["task_type"] = to_string(p.task_type);
        j["context_refs"] = p.context_refs;
        out << j.dump() << "\n";
    }
}

}  // namespace estp
