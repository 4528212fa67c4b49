#include "estp/scoring.hpp"

#include <algorithm>
#include <cctype>
#include <future>
#include <mutex>
#include <set>
#include <sstream>

#include <httplib.h>

namespace estp {

std::string normalize_answer(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char ch : text) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    auto trailing = [](char c) {
        return c == '.' || c == '!' || c == '?' || c == ',' || c == ';' || c == ':' || c == ' ';
    };
    while (!out.empty() && trailing(out.back())) out.pop_back();
    return out;
}

namespace {

std::vector<std::string> tokenize(const std::string& normalized) {
    std::vector<std::string> tokens;
    std::istringstream in(normalized);
    std::string tok;
    while (in >> tok) tokens.push_back(tok);
    return tokens;
}

}  // namespace

double token_f1(const std::string& prediction, const std::string& reference) {
    auto pred = tokenize(normalize_answer(prediction));
    auto ref = tokenize(normalize_answer(reference));
    if (pred.empty() && ref.empty()) return 1.0;
    if (pred.empty() || ref.empty()) return 0.0;

    std::map<std::string, std::int64_t> counts;
    for (const auto& t : ref) ++counts[t];
    std::int64_t overlap = 0;
    for (const auto& t : pred) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return 0.0;
    double p = static_cast<double>(overlap) / static_cast<double>(pred.size());
    double r = static_cast<double>(overlap) / static_cast<double>(ref.size());
    return 2.0 * p * r / (p + r);
}

double time_score(const TimeScoreSpec& spec, Frame emit_frame, const Interval& interval) {
    if (spec.floor < 0.0 || spec.floor > 1.0)
        throw ArgumentError("time score floor must lie in [0, 1]");
    if (spec.kind == TimeScoreKind::Constant) return 1.0;
    if (!interval.contains(emit_frame))
        throw ArgumentError("emit frame " + std::to_string(emit_frame) +
                            " lies outside the matched interval");
    if (interval.start == interval.end) return 1.0;
    double x = static_cast<double>(emit_frame - interval.start) /
               static_cast<double>(interval.end - interval.start);
    return spec.floor + (1.0 - spec.floor) * (1.0 - x);
}

// --------------------------------------------------------------------------
// judge client

struct HttpJudgeClient::Impl {
    std::string base;
    std::string path;
    std::mutex mu;
    std::map<std::pair<std::string, std::string>, double> memo;
};

HttpJudgeClient::HttpJudgeClient(std::string url) : impl_(new Impl) {
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
    if (impl_->base.empty()) throw ArgumentError("judge url is empty");
}

HttpJudgeClient::~HttpJudgeClient() = default;

double HttpJudgeClient::score(const std::string& prediction, const std::string& reference) {
    auto key = std::make_pair(prediction, reference);
    {
        std::lock_guard<std::mutex> lock(impl_->mu);
        auto it = impl_->memo.find(key);
        if (it != impl_->memo.end()) return it->second;
    }

    httplib::Client client(impl_->base);
    client.set_connection_timeout(5, 0);
    client.set_read_timeout(10, 0);
    Json body;
    body["prediction"] = prediction;
    body["reference"] = reference;
    auto res = client.Post(impl_->path, body.dump(), "application/json");
    if (!res)
        throw ScorerError("judge at " + impl_->base + " unreachable: " +
                          httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
        throw ScorerError("judge at " + impl_->base + " returned http " +
                          std::to_string(res->status));
    Json parsed;
    try {
        parsed = Json::parse(res->body);
    } catch (const std::exception& e) {
        throw ScorerError(std::string("judge response is not json: ") + e.what());
    }
    if (!parsed.is_object() || !parsed.contains("score") || !parsed["score"].is_number())
        throw ScorerError("judge response lacks a numeric 'score' field");
    double raw = parsed["score"].get<double>();

    std::lock_guard<std::mutex> lock(impl_->mu);
    impl_->memo.emplace(key, raw);
    return raw;
}

double answer_score(const AnswerScorerSpec& spec, const std::string& prediction,
                    const std::string& reference, JudgeClient* judge,
                    std::vector<std::string>* clamp_warnings) {
    switch (spec.kind) {
        case AnswerScorerKind::ExactMatch:
            return normalize_answer(prediction) == normalize_answer(reference) ? 1.0 : 0.0;
        case AnswerScorerKind::TokenF1:
            return token_f1(prediction, reference);
        case AnswerScorerKind::ExternalJudge: {
            if (judge == nullptr)
                throw ArgumentError("external judge scoring needs a judge client");
            double raw = judge->score(prediction, reference);
            double clamped = std::min(1.0, std::max(0.0, raw));
            if (clamped != raw && clamp_warnings != nullptr) {
                std::ostringstream msg;
                msg << "judge score " << raw << " for prediction '" << prediction
                    << "' vs reference '" << reference << "' clamped to " << clamped;
                clamp_warnings->push_back(msg.str());
            }
            return clamped;
        }
    }
    throw ArgumentError("unknown answer scorer kind");
}

PairScorer make_pair_scorer(const ScoreConfig& config, JudgeClient* judge,
                            std::vector<std::string>* clamp_warnings) {
    AnswerScorerSpec answer = config.answer;
    TimeScoreSpec time = config.time;
    return [answer, time, judge, clamp_warnings](const GroundTruthItem& gt, const Prediction& pred,
                                                 const Interval& interval) {
        double sa = answer_score(answer, pred.content, gt.content, judge, clamp_warnings);
        double st = time_score(time, pred.emit_frame, interval);
        return sa * st;
    };
}

void fill_prf(double sum_s, std::int64_t fp, std::int64_t fn, double& precision, double& recall,
              double& f1) {
    precision = (sum_s == 0.0 && fp == 0) ? 1.0
                                          : sum_s / (sum_s + static_cast<double>(fp));
    recall = (sum_s == 0.0 && fn == 0) ? 1.0 : sum_s / (sum_s + static_cast<double>(fn));
    f1 = (precision + recall == 0.0) ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

std::string to_string(AnswerScorerKind k) {
    switch (k) {
        case AnswerScorerKind::ExactMatch: return "exact_match";
        case AnswerScorerKind::TokenF1: return "token_f1";
        case AnswerScorerKind::ExternalJudge: return "external_judge";
    }
    throw ArgumentError("unknown answer scorer kind");
}

std::string to_string(TimeScoreKind k) {
    return k == TimeScoreKind::Constant ? "constant" : "linear_from_start";
}

AnswerScorerKind answer_scorer_kind_from_string(const std::string& s) {
    if (s == "exact_match") return AnswerScorerKind::ExactMatch;
    if (s == "token_f1") return AnswerScorerKind::TokenF1;
    if (s == "external_judge") return AnswerScorerKind::ExternalJudge;
    throw ArgumentError("unknown answer scorer '" + s + "'");
}

TimeScoreKind time_score_kind_from_string(const std::string& s) {
    if (s == "constant") return TimeScoreKind::Constant;
    if (s == "linear_from_start") return TimeScoreKind::LinearFromStart;
    throw ArgumentError("unknown time score '" + s + "'");
}

Json score_config_to_json(const ScoreConfig& config) {
    Json j;
    j["match"]["strategy"] = to_string(config.match.strategy);
    j["match"]["duplicate_policy"] = to_string(config.match.duplicate_policy);
    j["answer"]["kind"] = to_string(config.answer.kind);
    j["answer"]["judge_url"] =
        config.answer.kind == AnswerScorerKind::ExternalJudge ? config.answer.judge_url : "";
    j["time"]["kind"] = to_string(config.time.kind);
    j["time"]["floor"] = config.time.floor;
    return j;
}

std::string score_config_hash(const ScoreConfig& config) {
    return hex16(fnv1a64(score_config_to_json(config).dump()));
}

namespace {

void check_config(const ScoreConfig& config, JudgeClient* judge) {
    if (config.time.floor < 0.0 || config.time.floor > 1.0)
        throw ArgumentError("time score floor must lie in [0, 1]");
    if (config.answer.judge_in_flight < 1)
        throw ArgumentError("judge_in_flight must be at least 1");
    if (config.answer.kind == AnswerScorerKind::ExternalJudge && judge == nullptr)
        throw ArgumentError("external judge scoring needs a judge client");
}

void check_match_result(const Episode& episode, const std::vector<Prediction>& predictions,
                        const MatchResult& result, DuplicatePolicy policy) {
    std::map<std::string, const Prediction*> pred_by_id;
    for (const auto& p : predictions) pred_by_id[p.id] = &p;

    std::set<std::string> gts_seen;
    std::set<std::string> preds_seen;
    for (const auto& pr : result.pairs) {
        const GroundTruthItem* gt = episode.find_gt(pr.gt_id);
        if (gt == nullptr)
            throw ReferenceError("match pair names unknown gt '" + pr.gt_id + "'");
        auto pit = pred_by_id.find(pr.prediction_id);
        if (pit == pred_by_id.end())
            throw ReferenceError("match pair names unknown prediction '" + pr.prediction_id + "'");
        if (!gts_seen.insert(pr.gt_id).second)
            throw ContractError("gt '" + pr.gt_id + "' is matched twice");
        if (!preds_seen.insert(pr.prediction_id).second)
            throw ContractError("prediction '" + pr.prediction_id + "' is matched twice");
        if (gt->query_id != pit->second->query_id)
            throw ContractError("pair (" + pr.gt_id + ", " + pr.prediction_id +
                                ") crosses queries");
        bool interval_known = false;
        for (const auto& iv : gt->intervals)
            if (iv == pr.matched_interval) interval_known = true;
        if (!interval_known || !pr.matched_interval.contains(pit->second->emit_frame))
            throw ContractError("pair (" + pr.gt_id + ", " + pr.prediction_id +
                                ") names an interval that does not cover the prediction");
    }
    for (const auto& id : result.false_positives) {
        if (!pred_by_id.count(id))
            throw ReferenceError("false positive names unknown prediction '" + id + "'");
        if (preds_seen.count(id))
            throw ContractError("prediction '" + id + "' is both matched and a false positive");
        preds_seen.insert(id);
    }
    for (const auto& id : result.false_negatives) {
        if (episode.find_gt(id) == nullptr)
            throw ReferenceError("false negative names unknown gt '" + id + "'");
        if (gts_seen.count(id))
            throw ContractError("gt '" + id + "' is both matched and a false negative");
        gts_seen.insert(id);
    }
    for (const auto& gt : episode.gt_items)
        if (!gts_seen.count(gt.id))
            throw ContractError("gt '" + gt.id + "' appears in neither pairs nor false negatives");
    if (policy == DuplicatePolicy::DuplicatesAreFP) {
        for (const auto& p : predictions)
            if (!preds_seen.count(p.id))
                throw ContractError("prediction '" + p.id +
                                    "' appears in neither pairs nor false positives");
    }
}

// Warms the judge memo for all pairs to score, at most `cap` requests in
// flight. Failures surface in submission order.
void prefetch_judge(JudgeClient* judge,
                    const std::vector<std::pair<std::string, std::string>>& contents, int cap) {
    for (std::size_t begin = 0; begin < contents.size();
         begin += static_cast<std::size_t>(cap)) {
        std::size_t end = std::min(contents.size(), begin + static_cast<std::size_t>(cap));
        std::vector<std::future<double>> futures;
        for (std::size_t i = begin; i < end; ++i) {
            const auto& c = contents[i];
            futures.push_back(std::async(std::launch::async, [judge, c] {
                return judge->score(c.first, c.second);
            }));
        }
        std::exception_ptr first;
        for (auto& f : futures) {
            try {
                f.get();
            } catch (...) {
                if (!first) first = std::current_exception();
            }
        }
        if (first) std::rethrow_exception(first);
    }
}

}  // namespace

ScoreReport aggregate(const Episode& episode, const std::vector<Prediction>& predictions,
                      const MatchResult& result, const ScoreConfig& config, JudgeClient* judge) {
    check_config(config, judge);
    check_match_result(episode, predictions, result, config.match.duplicate_policy);

    std::map<std::string, const Prediction*> pred_by_id;
    for (const auto& p : predictions) pred_by_id[p.id] = &p;
    std::map<std::string, const MatchPair*> pair_by_gt;
    for (const auto& pr : result.pairs) pair_by_gt[pr.gt_id] = &pr;

    ScoreReport report;
    report.label = config.label;
    report.episode_id = episode.id;
    report.config = score_config_to_json(config);
    report.config_hash = score_config_hash(config);

    if (config.answer.kind == AnswerScorerKind::ExternalJudge) {
        std::vector<std::pair<std::string, std::string>> contents;
        for (const auto& pr : result.pairs)
            contents.emplace_back(pred_by_id.at(pr.prediction_id)->content,
                                  episode.find_gt(pr.gt_id)->content);
        prefetch_judge(judge, contents, config.answer.judge_in_flight);
    }

    report.gt_count = static_cast<std::int64_t>(episode.gt_items.size());
    report.fp = static_cast<std::int64_t>(result.false_positives.size());
    report.fn = static_cast<std::int64_t>(result.false_negatives.size());

    for (const auto& gt : episode.gt_items) {
        GtScore row;
        row.gt_id = gt.id;
        row.query_id = gt.query_id;
        row.task_type = gt.task_type;
        row.proactive_type = gt.proactive_type;
        auto it = pair_by_gt.find(gt.id);
        if (it != pair_by_gt.end()) {
            const Prediction& pred = *pred_by_id.at(it->second->prediction_id);
            row.matched = true;
            row.prediction_id = pred.id;
            row.s_answer = answer_score(config.answer, pred.content, gt.content, judge,
                                        &report.judge_warnings);
            row.s_time = time_score(config.time, pred.emit_frame, it->second->matched_interval);
            row.s = row.s_answer * row.s_time;
        }
        report.sum_s += row.s;
        report.per_gt.push_back(std::move(row));
    }
    fill_prf(report.sum_s, report.fp, report.fn, report.precision, report.recall, report.estp_f1);

    std::set<std::string> fn_ids(result.false_negatives.begin(), result.false_negatives.end());
    for (const auto& row : report.per_gt) {
        auto& task = report.per_task[row.task_type];
        auto& pro = report.per_proactive[row.proactive_type];
        ++task.gt_count;
        ++pro.gt_count;
        task.sum_s += row.s;
        pro.sum_s += row.s;
        if (fn_ids.count(row.gt_id)) {
            ++task.fn;
            ++pro.fn;
        }
    }
    // A false positive lands in every distinct group among its query's gt
    // items, so group fp totals can exceed the episode fp count.
    for (const auto& id : result.false_positives) {
        const Prediction& pred = *pred_by_id.at(id);
        std::set<TaskType> tasks;
        std::set<ProactiveType> classes;
        for (const auto& gt : episode.gt_items) {
            if (gt.query_id != pred.query_id) continue;
            tasks.insert(gt.task_type);
            classes.insert(gt.proactive_type);
        }
        for (TaskType t : tasks) ++report.per_task[t].fp;
        for (ProactiveType c : classes) ++report.per_proactive[c].fp;
    }
    for (auto& [task, group] : report.per_task)
        fill_prf(group.sum_s, group.fp, group.fn, group.precision, group.recall, group.f1);
    for (auto& [cls, group] : report.per_proactive)
        fill_prf(group.sum_s, group.fp, group.fn, group.precision, group.recall, group.f1);

    std::sort(report.judge_warnings.begin(), report.judge_warnings.end());
    report.judge_warnings.erase(
        std::unique(report.judge_warnings.begin(), report.judge_warnings.end()),
        report.judge_warnings.end());
    return report;
}

EpisodeScore score_episode(const Episode& episode, const std::vector<Prediction>& predictions,
                           const ScoreConfig& config, JudgeClient* judge) {
    check_config(config, judge);
    std::vector<std::string> warnings;
    PairScorer scorer;
    if (config.match.strategy == MatchStrategy::OptimalAssignment)
        scorer = make_pair_scorer(config, judge, &warnings);

    EpisodeScore out;
    out.match_result = match(episode, predictions, config.match, scorer);
    out.report = aggregate(episode, predictions, out.match_result, config, judge);
    if (!warnings.empty()) {
        auto& sink = out.report.judge_warnings;
        sink.insert(sink.end(), warnings.begin(), warnings.end());
        std::sort(sink.begin(), sink.end());
        sink.erase(std::unique(sink.begin(), sink.end()), sink.end());
    }
    return out;
}

Json score_report_to_json(const ScoreReport& report) {
    Json j;
    j["kind"] = "score_report";
    j["label"] = report.label;
    j["episode"] = report.episode_id;
    j["estp_f1"] = report.estp_f1;
    j["precision"] = report.precision;
    j["recall"] = report.recall;
    j["sum_s"] = report.sum_s;
    j["fp"] = report.fp;
    j["fn"] = report.fn;
    j["gt_count"] = report.gt_count;
    j["per_gt"] = Json::array();
    for (const auto& row : report.per_gt) {
        Json r;
        r["gt"] = row.gt_id;
        r["query"] = row.query_id;
        r["task_type"] = to_string(row.task_type);
        r["proactive_type"] = to_string(row.proactive_type);
        r["matched"] = row.matched;
        if (row.matched)
            r["pred"] = row.prediction_id;
        else
            r["pred"] = nullptr;
        r["s_answer"] = row.s_answer;
        r["s_time"] = row.s_time;
        r["s"] = row.s;
        j["per_gt"].push_back(std::move(r));
    }
    j["per_task"] = Json::array();
    for (const auto& [task, group] : report.per_task) {
        Json r;
        r["task_type"] = to_string(task);
        r["gt_count"] = group.gt_count;
        r["sum_s"] = group.sum_s;
        r["fp"] = group.fp;
        r["fn"] = group.fn;
        r["precision"] = group.precision;
        r["recall"] = group.recall;
        r["f1"] = group.f1;
        j["per_task"].push_back(std::move(r));
    }
    j["per_proactive"] = Json::array();
    for (const auto& [cls, group] : report.per_proactive) {
        Json r;
        r["proactive_type"] = to_string(cls);
        r["gt_count"] = group.gt_count;
        r["sum_s"] = group.sum_s;
        r["fp"] = group.fp;
        r["fn"] = group.fn;
        r["precision"] = group.precision;
        r["recall"] = group.recall;
        r["f1"] = group.f1;
        j["per_proactive"].push_back(std::move(r));
    }
    j["judge_warnings"] = report.judge_warnings;
    j["config"] = report.config;
    j["config_hash"] = report.config_hash;
    return j;
}

namespace {

double need_number(const Json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number())
        throw ArgumentError(std::string("score report: '") + key + "' must be a number");
    return j[key].get<double>();
}

std::int64_t need_int(const Json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number_integer())
        throw ArgumentError(std::string("score report: '") + key + "' must be an integer");
    return j[key].get<std::int64_t>();
}

std::string need_str(const Json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_string())
        throw ArgumentError(std::string("score report: '") + key + "' must be a string");
    return j[key].get<std::string>();
}

GroupScore read_group(const Json& j) {
    GroupScore g;
    g.gt_count = need_int(j, "gt_count");
    g.sum_s = need_number(j, "sum_s");
    g.fp = need_int(j, "fp");
    g.fn = need_int(j, "fn");
    g.precision = need_number(j, "precision");
    g.recall = need_number(j, "recall");
    g.f1 = need_number(j, "f1");
    return g;
}

TaskType need_task_type(const std::string& s) {
    auto t = task_type_from_string(s);
    if (!t) throw ArgumentError("score report: unknown task type '" + s + "'");
    return *t;
}

ProactiveType need_proactive_type(const std::string& s) {
    auto p = proactive_type_from_string(s);
    if (!p) throw ArgumentError("score report: unknown proactive type '" + s + "'");
    return *p;
}

}  // namespace

ScoreReport score_report_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("kind") || j["kind"] != "score_report")
        throw ArgumentError("score report: 'kind' must be \"score_report\"");
    ScoreReport r;
    r.label = need_str(j, "label");
    r.episode_id = need_str(j, "episode");
    r.estp_f1 = need_number(j, "estp_f1");
    r.precision = need_number(j, "precision");
    r.recall = need_number(j, "recall");
    r.sum_s = need_number(j, "sum_s");
    r.fp = need_int(j, "fp");
    r.fn = need_int(j, "fn");
    r.gt_count = need_int(j, "gt_count");
    if (!j.contains("per_gt") || !j["per_gt"].is_array())
        throw ArgumentError("score report: 'per_gt' must be an array");
    for (const auto& e : j["per_gt"]) {
        GtScore row;
        row.gt_id = need_str(e, "gt");
        row.query_id = need_str(e, "query");
        row.task_type = need_task_type(need_str(e, "task_type"));
        row.proactive_type = need_proactive_type(need_str(e, "proactive_type"));
        if (!e.contains("matched") || !e["matched"].is_boolean())
            throw ArgumentError("score report: 'matched' must be a boolean");
        row.matched = e["matched"].get<bool>();
        if (row.matched) row.prediction_id = need_str(e, "pred");
        row.s_answer = need_number(e, "s_answer");
        row.s_time = need_number(e, "s_time");
        row.s = need_number(e, "s");
        r.per_gt.push_back(std::move(row));
    }
    if (!j.contains("per_task") || !j["per_task"].is_array())
        throw ArgumentError("score report: 'per_task' must be an array");
    for (const auto& e : j["per_task"])
        r.per_task[need_task_type(need_str(e, "task_type"))] = read_group(e);
    if (!j.contains("per_proactive") || !j["per_proactive"].is_array())
        throw ArgumentError("score report: 'per_proactive' must be an array");
    for (const auto& e : j["per_proactive"])
        r.per_proactive[need_proactive_type(need_str(e, "proactive_type"))] = read_group(e);
    if (j.contains("judge_warnings")) {
        if (!j["judge_warnings"].is_array())
            throw ArgumentError("score report: 'judge_warnings' must be an array");
        for (const auto& w : j["judge_warnings"]) {
            if (!w.is_string())
                throw ArgumentError("score report: judge warnings must be strings");
            r.judge_warnings.push_back(w.get<std::string>());
        }
    }
    if (!j.contains("config") || !j["config"].is_object())
        throw ArgumentError("score report: 'config' must be an object");
    r.config = j["config"];
    r.config_hash = need_str(j, "config_hash");
    return r;
}

}  // namespace estp
