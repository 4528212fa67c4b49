#pragma once

// Pair scoring and episode-level aggregation. A matched pair contributes
// S = s_answer * s_time; the episode score is
//   2*sum(S) / (2*sum(S) + FP + FN)
// which equals the harmonic mean of precision sum(S)/(sum(S)+FP) and
// recall sum(S)/(sum(S)+FN), with empty denominators scoring 1.

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "estp/core.hpp"
#include "estp/matcher.hpp"

namespace estp {

enum class AnswerScorerKind { ExactMatch, TokenF1, ExternalJudge };
enum class TimeScoreKind { Constant, LinearFromStart };

struct AnswerScorerSpec {
    AnswerScorerKind kind = AnswerScorerKind::TokenF1;
    std::string judge_url;     // ExternalJudge only
    int judge_in_flight = 4;   // upper bound on concurrent judge requests
};

struct TimeScoreSpec {
    TimeScoreKind kind = TimeScoreKind::LinearFromStart;
    double floor = 0.2;  // score at the interval's last frame
};

struct ScoreConfig {
    MatchConfig match;
    AnswerScorerSpec answer;
    TimeScoreSpec time;
    std::string label = "run";  // names the system under evaluation; not hashed
};

// Lowercase ASCII, collapse whitespace runs, trim, then strip trailing
// sentence punctuation. Both exact match and token overlap see this form.
std::string normalize_answer(const std::string& text);

// Unigram multiset overlap F1 over normalized tokens. Two empty strings
// score 1, exactly one empty scores 0.
double token_f1(const std::string& prediction, const std::string& reference);

// Position of emit frame inside the matched interval mapped to
// [floor, 1]: 1 at the first frame, floor at the last, linear between.
// Single-frame intervals score 1. Constant always scores 1.
double time_score(const TimeScoreSpec& spec, Frame emit_frame, const Interval& interval);

// Scores answers against a remote judge. Implementations must be safe to
// call from multiple threads.
class JudgeClient {
public:
    virtual ~JudgeClient() = default;
    // Raw judge output; transport or schema failures throw ScorerError.
    virtual double score(const std::string& prediction, const std::string& reference) = 0;
};

// POSTs {"prediction","reference"} to the configured URL and reads back
// {"score"}. Responses are memoized per content pair so assignment search
// and aggregation do not re-ask the judge.
class HttpJudgeClient : public JudgeClient {
public:
    explicit HttpJudgeClient(std::string url);
    ~HttpJudgeClient() override;
    double score(const std::string& prediction, const std::string& reference) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// s_answer for one pair. Judge outputs outside [0,1] are clamped; when a
// warning sink is given, each clamp appends a message describing the pair.
double answer_score(const AnswerScorerSpec& spec, const std::string& prediction,
                    const std::string& reference, JudgeClient* judge,
                    std::vector<std::string>* clamp_warnings = nullptr);

// S(gt, pred) = s_answer * s_time, for assignment search and aggregation.
PairScorer make_pair_scorer(const ScoreConfig& config, JudgeClient* judge = nullptr,
                            std::vector<std::string>* clamp_warnings = nullptr);

struct GtScore {
    std::string gt_id;
    std::string query_id;
    TaskType task_type = TaskType::OR;
    ProactiveType proactive_type = ProactiveType::Explicit;
    bool matched = false;
    std::string prediction_id;  // empty when unmatched
    double s_answer = 0.0;
    double s_time = 0.0;
    double s = 0.0;

    bool operator==(const GtScore&) const = default;
};

struct GroupScore {
    std::int64_t gt_count = 0;
    double sum_s = 0.0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    double precision = 1.0;
    double recall = 1.0;
    double f1 = 1.0;

    bool operator==(const GroupScore&) const = default;
};

struct ScoreReport {
    std::string label;
    std::string episode_id;
    double sum_s = 0.0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t gt_count = 0;
    double precision = 1.0;
    double recall = 1.0;
    double estp_f1 = 1.0;
    std::vector<GtScore> per_gt;                       // episode gt order
    std::map<TaskType, GroupScore> per_task;           // only groups that occur
    std::map<ProactiveType, GroupScore> per_proactive;
    std::vector<std::string> judge_warnings;           // deduplicated, sorted
    Json config;                                       // score_config_to_json output
    std::string config_hash;                           // fnv-1a of the config block

    bool operator==(const ScoreReport&) const = default;
};

// Precision, recall and their harmonic mean under the empty-denominator
// conventions above.
void fill_prf(double sum_s, std::int64_t fp, std::int64_t fn, double& precision, double& recall,
              double& f1);

// Hash source for a config; label is excluded so differently named runs
// remain comparable.
Json score_config_to_json(const ScoreConfig& config);
std::string score_config_hash(const ScoreConfig& config);

// Scores an already matched episode. An FP counts once at episode level
// and once per distinct task type among its query's gt items; an FP whose
// query has no gt items appears only at episode level. sum_s is
// accumulated in episode gt order.
ScoreReport aggregate(const Episode& episode, const std::vector<Prediction>& predictions,
                      const MatchResult& result, const ScoreConfig& config,
                      JudgeClient* judge = nullptr);

// match + aggregate in one step.
struct EpisodeScore {
    MatchResult match_result;
    ScoreReport report;
};
EpisodeScore score_episode(const Episode& episode, const std::vector<Prediction>& predictions,
                           const ScoreConfig& config, JudgeClient* judge = nullptr);

std::string to_string(AnswerScorerKind k);
std::string to_string(TimeScoreKind k);
AnswerScorerKind answer_scorer_kind_from_string(const std::string& s);
TimeScoreKind time_score_kind_from_string(const std::string& s);

Json score_report_to_json(const ScoreReport& report);
ScoreReport score_report_from_json(const Json& j);

}  // namespace estp
