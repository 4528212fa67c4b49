#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "estp/datagen.hpp"

namespace estp {

namespace {

// lowercase tokens with leading/trailing punctuation shaved off
std::vector<std::string> content_tokens(const std::string& text) {
    std::vector<std::string> tokens;
    std::istringstream in(text);
    std::string raw;
    while (in >> raw) {
        std::size_t b = 0, e = raw.size();
        while (b < e && !std::isalnum(static_cast<unsigned char>(raw[b]))) ++b;
        while (e > b && !std::isalnum(static_cast<unsigned char>(raw[e - 1]))) --e;
        if (b == e) continue;
        std::string token = raw.substr(b, e - b);
        for (char& c : token) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        tokens.push_back(std::move(token));
    }
    return tokens;
}

bool multiset_contains(const std::vector<std::string>& haystack,
                       const std::vector<std::string>& needle) {
    std::map<std::string, int> counts;
    for (const auto& t : haystack) ++counts[t];
    for (const auto& t : needle) {
        auto it = counts.find(t);
        if (it == counts.end() || it->second == 0) return false;
        --it->second;
    }
    return true;
}

const std::set<std::string>& stopwords() {
    static const std::set<std::string> words = {
        "a",    "an",   "the",  "is",    "are",   "was",  "were", "be",      "been", "to",
        "of",   "in",   "on",   "at",    "and",   "or",   "it",   "its",     "this", "that",
        "what", "when", "where", "how",  "does",  "do",   "did",  "happen",  "happens",
        "with", "for",  "from",  "into", "being", "by",   "up",   "down",    "before",
        "after", "then"};
    return words;
}

std::set<std::string> entity_tokens(const QaPair& pair) {
    std::set<std::string> entities;
    for (const auto& text : {pair.question, pair.answer})
        for (auto& token : content_tokens(text))
            if (!stopwords().count(token)) entities.insert(std::move(token));
    return entities;
}

Frame min_start(const QaPair& pair) {
    Frame best = std::numeric_limits<Frame>::max();
    for (const auto& iv : pair.intervals) best = std::min(best, iv.start);
    return best;
}

struct DisjointSets {
    std::vector<std::size_t> parent;
    explicit DisjointSets(std::size_t n) : parent(n) {
        std::iota(parent.begin(), parent.end(), std::size_t{0});
    }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void merge(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

}  // namespace

Json MockGenClient::generate(const std::string& task, const Json& input) {
    if (task == "one_to_one") {
        if (!input.is_object() || !input.contains("text") || !input["text"].is_string())
            throw ArgumentError("one_to_one input needs caption text");
        std::string text = input["text"].get<std::string>();
        Json out;
        out["question"] = "when does " + text + " happen";
        out["answer"] = text;
        return out;
    }
    throw ArgumentError("mock generation client does not know task '" + task + "'");
}

struct HttpGenClient::Impl {
    GenClientSpec spec;
    std::string base;
    std::string path;
};

HttpGenClient::HttpGenClient(GenClientSpec spec) : impl_(new Impl) {
    if (spec.retries < 0) throw ArgumentError("retries must be >= 0");
    if (spec.timeout_s <= 0.0) throw ArgumentError("timeout must be positive");
    impl_->spec = spec;
    const std::string& url = spec.endpoint;
    auto scheme_end = url.find("://");
    std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto path_start = url.find('/', host_start);
    if (path_start == std::string::npos) {
        impl_->base = url;
        impl_->path = "/";
    } else {
        impl_->base = url.substr(0, path_start);
        impl_->path = url.substr(path_start);
    }
    if (impl_->base.empty()) throw ArgumentError("generation endpoint is empty");
}

HttpGenClient::~HttpGenClient() = default;

Json HttpGenClient::generate(const std::string& task, const Json& input) {
    Json body;
    body["task"] = task;
    body["input"] = input;
    const std::string payload = body.dump();
    const auto timeout = static_cast<time_t>(impl_->spec.timeout_s);
    const auto timeout_us =
        static_cast<time_t>((impl_->spec.timeout_s - static_cast<double>(timeout)) * 1e6);

    std::string last_error;
    for (int attempt = 0; attempt <= impl_->spec.retries; ++attempt) {
        httplib::Client client(impl_->base);
        client.set_connection_timeout(timeout, timeout_us);
        client.set_read_timeout(timeout, timeout_us);
        auto res = client.Post(impl_->path, payload, "application/json");
        if (!res) {
            last_error = "endpoint unreachable: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            last_error = "endpoint returned http " + std::to_string(res->status);
            continue;
        }
        Json parsed;
        try {
            parsed = Json::parse(res->body);
        } catch (const std::exception& e) {
            last_error = std::string("response is not json: ") + e.what();
            continue;
        }
        if (!parsed.is_object() || !parsed.contains("output")) {
            last_error = "response lacks an output field";
            continue;
        }
        return parsed["output"];
    }
    throw Error("generation client failed after " + std::to_string(impl_->spec.retries + 1) +
                " attempt(s): " + last_error);
}

std::unique_ptr<GenClient> make_gen_client(const GenClientSpec& spec) {
    if (spec.endpoint == "mock:") return std::make_unique<MockGenClient>();
    return std::make_unique<HttpGenClient>(spec);
}

std::vector<QaPair> pipeline_one_to_one(const std::vector<Caption>& captions,
                                        GenClient& client) {
    std::vector<QaPair> pairs;
    pairs.reserve(captions.size());
    for (std::size_t i = 0; i < captions.size(); ++i) {
        const auto& caption = captions[i];
        const std::string record_id = "caption-" + std::to_string(i);
        Json input;
        input["span"] = Json::array({caption.span.start, caption.span.end});
        input["text"] = caption.text;
        Json output;
        try {
            output = client.generate("one_to_one", input);
        } catch (const std::exception& e) {
            throw PipelineError("one_to_one", record_id, e.what());
        }
        if (!output.is_object() || !output.contains("question") ||
            !output["question"].is_string() || !output.contains("answer") ||
            !output["answer"].is_string())
            throw PipelineError("one_to_one", record_id,
                                "client output needs question and answer strings");
        QaPair pair;
        std::ostringstream id;
        id << "qa-" << std::setw(6) << std::setfill('0') << i;
        pair.id = id.str();
        pair.question = output["question"].get<std::string>();
        pair.answer = output["answer"].get<std::string>();
        if (pair.answer.empty() || content_tokens(pair.answer).empty())
            throw PipelineError("one_to_one", record_id, "client answer has no content");
        pair.intervals.push_back(caption.span);
        pair.task_type = TaskType::OR;
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

std::vector<QaPair> pipeline_one_to_many(const std::vector<QaPair>& pairs,
                                         const std::vector<Caption>& captions) {
    std::vector<std::vector<std::string>> caption_tokens;
    caption_tokens.reserve(captions.size());
    for (const auto& c : captions) caption_tokens.push_back(content_tokens(c.text));

    std::vector<QaPair> out = pairs;
    for (auto& pair : out) {
        auto answer = content_tokens(pair.answer);
        if (answer.empty()) continue;
        for (std::size_t i = 0; i < captions.size(); ++i) {
            if (!multiset_contains(caption_tokens[i], answer)) continue;
            const Interval& span = captions[i].span;
            bool collides = false;
            for (const auto& have : pair.intervals)
                if (span.start <= have.end && have.start <= span.end) collides = true;
            if (!collides) pair.intervals.push_back(span);
        }
        std::sort(pair.intervals.begin(), pair.intervals.end(),
                  [](const Interval& a, const Interval& b) { return a.start < b.start; });
    }
    return out;
}

std::vector<QaGroup> pipeline_many_to_many(const std::vector<QaPair>& pairs) {
    DisjointSets sets(pairs.size());
    std::map<std::string, std::size_t> first_owner;
    for (std::size_t i = 0; i < pairs.size(); ++i)
        for (const auto& entity : entity_tokens(pairs[i])) {
            auto [it, fresh] = first_owner.emplace(entity, i);
            if (!fresh) sets.merge(i, it->second);
        }

    std::map<std::size_t, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < pairs.size(); ++i) members[sets.find(i)].push_back(i);

    auto turn_key = [&](std::size_t i) { return std::make_pair(min_start(pairs[i]), pairs[i].id); };

    std::vector<QaGroup> groups;
    for (auto& [root, idxs] : members) {
        std::sort(idxs.begin(), idxs.end(),
                  [&](std::size_t a, std::size_t b) { return turn_key(a) < turn_key(b); });
        QaGroup group;
        for (std::size_t j = 0; j < idxs.size(); ++j) {
            QaPair turn = pairs[idxs[j]];
            turn.context_refs.clear();
            if (j > 0 && min_start(turn) > min_start(group.turns.back())) {
                turn.context_refs.push_back(group.turns.back().id);
                turn.task_type = TaskType::ORC;
            }
            group.turns.push_back(std::move(turn));
        }
        groups.push_back(std::move(group));
    }
    // a stable presentation order independent of input permutation
    std::sort(groups.begin(), groups.end(), [&](const QaGroup& a, const QaGroup& b) {
        return std::make_pair(min_start(a.turns.front()), a.turns.front().id) <
               std::make_pair(min_start(b.turns.front()), b.turns.front().id);
    });
    return groups;
}

Episode assemble_episode(const std::vector<QaGroup>& groups, const std::string& episode_id,
                         std::int64_t fps_num, std::int64_t fps_den, Frame num_frames) {
    Episode ep;
    ep.id = episode_id;
    ep.timeline.fps_num = fps_num;
    ep.timeline.fps_den = fps_den;

    Frame last = 0;
    for (const auto& group : groups)
        for (const auto& turn : group.turns) {
            Query q;
            q.id = turn.id;
            q.content = turn.question;
            q.issue_frame = min_start(turn);
            q.context_refs = turn.context_refs;
            ep.queries.push_back(std::move(q));

            GroundTruthItem gt;
            gt.id = turn.id + "-g";
            gt.query_id = turn.id;
            gt.content = turn.answer;
            gt.intervals = turn.intervals;
            gt.task_type = turn.task_type;
            gt.proactive_type = proactive_class_of(turn.task_type);
            for (const auto& iv : gt.intervals) last = std::max(last, iv.end);
            ep.gt_items.push_back(std::move(gt));
        }

    ep.timeline.num_frames = num_frames > 0 ? num_frames : last + 1;

    auto violations = validate_episode(ep);
    if (!violations.empty())
        throw PipelineError("assemble", episode_id, violations.front());
    return ep;
}

Episode run_pipeline(const std::vector<Caption>& captions, GenClient& client,
                     const std::string& episode_id) {
    auto pairs = pipeline_one_to_one(captions, client);
    pairs = pipeline_one_to_many(pairs, captions);
    auto groups = pipeline_many_to_many(pairs);
    return assemble_episode(groups, episode_id);
}

}  // namespace estp
