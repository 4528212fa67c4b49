#include <doctest.h>

#include <random>
#include <sstream>

#include "estp/scoring.hpp"
#include "helpers.hpp"

using namespace estp;
using namespace estp::test;

namespace {

Episode two_item_episode() {
    return mk_episode("ep1", 100, {mk_query("q1", 0)},
                      {mk_gt("g1", "q1", "red cup", {{10, 20}}, TaskType::OR),
                       mk_gt("g2", "q1", "blue bowl", {{30, 40}}, TaskType::TRU)});
}

ScoreConfig token_cfg() {
    ScoreConfig cfg;
    cfg.match = {MatchStrategy::GreedyEarliest, DuplicatePolicy::DuplicatesAreFP};
    cfg.answer.kind = AnswerScorerKind::TokenF1;
    cfg.time = {TimeScoreKind::LinearFromStart, 0.2};
    cfg.label = "unit";
    return cfg;
}

}  // namespace

TEST_CASE("answer normalization") {
    CHECK(normalize_answer("  Red  CUP!! ") == "red cup");
    CHECK(normalize_answer("A.B") == "a.b");
    CHECK(normalize_answer("") == "");
    CHECK(normalize_answer("...") == "");
    CHECK(normalize_answer("cut the onion.") == "cut the onion");
    CHECK(normalize_answer("so, yes; maybe:") == "so, yes; maybe");
    CHECK(normalize_answer("Tabs\tand\nnewlines") == "tabs and newlines");
}

TEST_CASE("token overlap f1") {
    CHECK(token_f1("red cup", "red cup") == 1.0);
    CHECK(token_f1("Red Cup!", "red cup") == 1.0);
    CHECK(token_f1("red cup", "red cup on the left") == doctest::Approx(4.0 / 7.0).epsilon(1e-12));
    CHECK(token_f1("", "") == 1.0);
    CHECK(token_f1("", "red") == 0.0);
    CHECK(token_f1("red", "") == 0.0);
    CHECK(token_f1("green hat", "red cup") == 0.0);
    // multiset counting: a repeated token only matches as often as it occurs
    CHECK(token_f1("the the", "the") == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("time score shapes") {
    TimeScoreSpec lin{TimeScoreKind::LinearFromStart, 0.2};
    CHECK(time_score(lin, 10, {10, 20}) == 1.0);
    CHECK(time_score(lin, 20, {10, 20}) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(time_score(lin, 15, {10, 20}) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(time_score(lin, 7, {7, 7}) == 1.0);
    CHECK(time_score({TimeScoreKind::Constant, 0.2}, 20, {10, 20}) == 1.0);
    CHECK(time_score({TimeScoreKind::LinearFromStart, 0.0}, 15, {10, 20}) ==
          doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(time_score(lin, 9, {10, 20}), ArgumentError);
    CHECK_THROWS_AS(time_score({TimeScoreKind::LinearFromStart, 1.5}, 15, {10, 20}),
                    ArgumentError);
}

TEST_CASE("precision and recall conventions") {
    double p, r, f;
    fill_prf(0.0, 0, 0, p, r, f);
    CHECK(p == 1.0);
    CHECK(r == 1.0);
    CHECK(f == 1.0);
    fill_prf(0.0, 3, 0, p, r, f);
    CHECK(p == 0.0);
    CHECK(r == 1.0);
    CHECK(f == 0.0);
    fill_prf(0.0, 0, 2, p, r, f);
    CHECK(p == 1.0);
    CHECK(r == 0.0);
    CHECK(f == 0.0);
    fill_prf(1.5, 1, 2, p, r, f);
    CHECK(p == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(r == doctest::Approx(1.5 / 3.5).epsilon(1e-12));
}

TEST_CASE("the harmonic mean equals the closed form") {
    std::mt19937_64 rng(0x5eedf1);
    for (int i = 0; i < 500; ++i) {
        double sum_s = static_cast<double>(rng() % 1000) / 100.0;
        auto fp = static_cast<std::int64_t>(rng() % 8);
        auto fn = static_cast<std::int64_t>(rng() % 8);
        if (sum_s == 0.0 && fp == 0 && fn == 0) continue;
        double p, r, f;
        fill_prf(sum_s, fp, fn, p, r, f);
        double closed = 2.0 * sum_s / (2.0 * sum_s + static_cast<double>(fp + fn));
        CHECK(f == doctest::Approx(closed).epsilon(1e-12));
    }
}

TEST_CASE("aggregate on a small episode") {
    auto e = two_item_episode();
    std::vector<Prediction> preds = {mk_pred("p1", "q1", "red cup", 15),
                                     mk_pred("p2", "q1", "green hat", 50)};
    auto cfg = token_cfg();
    auto scored = score_episode(e, preds, cfg);

    REQUIRE(scored.match_result.pairs.size() == 1);
    CHECK(scored.match_result.false_positives == std::vector<std::string>{"p2"});
    CHECK(scored.match_result.false_negatives == std::vector<std::string>{"g2"});

    const auto& rep = scored.report;
    CHECK(rep.sum_s == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(rep.fp == 1);
    CHECK(rep.fn == 1);
    CHECK(rep.gt_count == 2);
    CHECK(rep.precision == doctest::Approx(0.375).epsilon(1e-12));
    CHECK(rep.recall == doctest::Approx(0.375).epsilon(1e-12));
    CHECK(rep.estp_f1 == doctest::Approx(0.375).epsilon(1e-12));

    REQUIRE(rep.per_gt.size() == 2);
    CHECK(rep.per_gt[0].matched);
    CHECK(rep.per_gt[0].s_answer == doctest::Approx(1.0));
    CHECK(rep.per_gt[0].s_time == doctest::Approx(0.6).epsilon(1e-12));
    CHECK_FALSE(rep.per_gt[1].matched);
    CHECK(rep.per_gt[1].s == 0.0);

    // the stray prediction's query spans both task groups, so it lands in both
    REQUIRE(rep.per_task.count(TaskType::OR) == 1);
    REQUIRE(rep.per_task.count(TaskType::TRU) == 1);
    const auto& or_row = rep.per_task.at(TaskType::OR);
    CHECK(or_row.gt_count == 1);
    CHECK(or_row.sum_s == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(or_row.fp == 1);
    CHECK(or_row.fn == 0);
    CHECK(or_row.recall == doctest::Approx(1.0));
    const auto& tru_row = rep.per_task.at(TaskType::TRU);
    CHECK(tru_row.sum_s == 0.0);
    CHECK(tru_row.fp == 1);
    CHECK(tru_row.fn == 1);
    CHECK(tru_row.f1 == 0.0);

    REQUIRE(rep.per_proactive.count(ProactiveType::Explicit) == 1);
    const auto& exp_row = rep.per_proactive.at(ProactiveType::Explicit);
    CHECK(exp_row.gt_count == 2);
    CHECK(exp_row.fp == 1);
    CHECK(exp_row.fn == 1);
    CHECK(exp_row.f1 == doctest::Approx(0.375).epsilon(1e-12));
}

TEST_CASE("an empty episode with no predictions scores perfect") {
    auto e = mk_episode("empty", 100, {}, {});
    auto scored = score_episode(e, {}, token_cfg());
    CHECK(scored.report.estp_f1 == 1.0);
    CHECK(scored.report.precision == 1.0);
    CHECK(scored.report.recall == 1.0);
}

TEST_CASE("silence scores zero when answers were expected") {
    auto e = two_item_episode();
    auto scored = score_episode(e, {}, token_cfg());
    CHECK(scored.report.estp_f1 == 0.0);
    CHECK(scored.report.fn == 2);
}

TEST_CASE("aggregate rejects inconsistent match results") {
    auto e = two_item_episode();
    std::vector<Prediction> preds = {mk_pred("p1", "q1", "red cup", 15)};
    auto cfg = token_cfg();
    auto good = match(e, preds, cfg.match);

    SUBCASE("unknown gt") {
        auto r = good;
        r.pairs[0].gt_id = "ghost";
        CHECK_THROWS_AS(aggregate(e, preds, r, cfg), ReferenceError);
    }
    SUBCASE("unknown prediction") {
        auto r = good;
        r.pairs[0].prediction_id = "ghost";
        CHECK_THROWS_AS(aggregate(e, preds, r, cfg), ReferenceError);
    }
    SUBCASE("interval not on the gt") {
        auto r = good;
        r.pairs[0].matched_interval = {11, 21};
        CHECK_THROWS_AS(aggregate(e, preds, r, cfg), ContractError);
    }
    SUBCASE("gt must appear exactly once") {
        auto r = good;
        r.false_negatives.push_back("g1");
        CHECK_THROWS_AS(aggregate(e, preds, r, cfg), ContractError);
    }
    SUBCASE("missing gt coverage") {
        auto r = good;
        r.false_negatives.clear();
        CHECK_THROWS_AS(aggregate(e, preds, r, cfg), ContractError);
    }
    SUBCASE("prediction dropped without a lax policy") {
        auto r = good;
        r.pairs.clear();
        r.false_negatives = {"g1", "g2"};
        CHECK_THROWS_AS(aggregate(e, preds, r, cfg), ContractError);
    }
}

TEST_CASE("config hashes track semantic settings only") {
    auto a = token_cfg();
    auto b = token_cfg();
    b.label = "other name";
    CHECK(score_config_hash(a) == score_config_hash(b));
    b.time.floor = 0.3;
    CHECK(score_config_hash(a) != score_config_hash(b));
    auto c = token_cfg();
    c.answer.judge_in_flight = 9;  // operational, not semantic
    CHECK(score_config_hash(a) == score_config_hash(c));
    auto d = token_cfg();
    d.match.strategy = MatchStrategy::OptimalAssignment;
    CHECK(score_config_hash(a) != score_config_hash(d));
}

TEST_CASE("score reports round trip through json") {
    auto e = two_item_episode();
    std::vector<Prediction> preds = {mk_pred("p1", "q1", "red cup", 15),
                                     mk_pred("p2", "q1", "green hat", 50)};
    auto scored = score_episode(e, preds, token_cfg());
    auto j = score_report_to_json(scored.report);
    auto back = score_report_from_json(j);
    CHECK(back == scored.report);
    // serialized form is stable
    CHECK(score_report_to_json(back).dump() == j.dump());
}

TEST_CASE("external judge is an answer scorer") {
    LocalServer server("/judge", [](const Json& req) {
        // echo-based: full credit only when contents agree
        double s = req.at("prediction") == req.at("reference") ? 1.0 : 0.25;
        Json out;
        out["score"] = s;
        return out.dump();
    });
    HttpJudgeClient judge(server.url("/judge"));

    auto e = two_item_episode();
    std::vector<Prediction> preds = {mk_pred("p1", "q1", "red cup", 10),
                                     mk_pred("p2", "q1", "wrong", 30)};
    auto cfg = token_cfg();
    cfg.answer.kind = AnswerScorerKind::ExternalJudge;
    cfg.answer.judge_url = server.url("/judge");

    auto scored = score_episode(e, preds, cfg, &judge);
    REQUIRE(scored.report.per_gt.size() == 2);
    CHECK(scored.report.per_gt[0].s_answer == 1.0);
    CHECK(scored.report.per_gt[0].s_time == 1.0);
    CHECK(scored.report.per_gt[1].s_answer == doctest::Approx(0.25));
    CHECK(scored.report.judge_warnings.empty());
}

TEST_CASE("judge responses are memoized per content pair") {
    LocalServer server("/judge", [](const Json&) {
        Json out;
        out["score"] = 0.5;
        return out.dump();
    });
    HttpJudgeClient judge(server.url("/judge"));
    auto e = mk_episode("e", 100, {mk_query("q1", 0)},
                        {mk_gt("g1", "q1", "red cup", {{10, 20}})});
    std::vector<Prediction> preds = {mk_pred("p1", "q1", "red cup", 15)};
    ScoreConfig cfg = token_cfg();
    cfg.match.strategy = MatchStrategy::OptimalAssignment;
    cfg.answer.kind = AnswerScorerKind::ExternalJudge;
    cfg.answer.judge_url = server.url("/judge");
    score_episode(e, preds, cfg, &judge);
    // assignment search and aggregation both score the pair; one request
    CHECK(server.hits() == 1);
}

TEST_CASE("out of range judge scores are clamped and reported") {
    LocalServer server("/judge", [](const Json&) {
        Json out;
        out["score"] = 1.5;
        return out.dump();
    });
    HttpJudgeClient judge(server.url("/judge"));
    auto e = mk_episode("e", 100, {mk_query("q1", 0)},
                        {mk_gt("g1", "q1", "red cup", {{10, 20}})});
    std::vector<Prediction> preds = {mk_pred("p1", "q1", "red cup", 10)};
    ScoreConfig cfg = token_cfg();
    cfg.answer.kind = AnswerScorerKind::ExternalJudge;
    cfg.answer.judge_url = server.url("/judge");
    auto scored = score_episode(e, preds, cfg, &judge);
    CHECK(scored.report.per_gt[0].s_answer == 1.0);
    REQUIRE(scored.report.judge_warnings.size() == 1);
    CHECK(scored.report.judge_warnings[0].find("clamped") != std::string::npos);
}

TEST_CASE("judge failures surface as scorer errors") {
    auto e = mk_episode("e", 100, {mk_query("q1", 0)},
                        {mk_gt("g1", "q1", "red cup", {{10, 20}})});
    std::vector<Prediction> preds = {mk_pred("p1", "q1", "red cup", 10)};
    ScoreConfig cfg = token_cfg();
    cfg.answer.kind = AnswerScorerKind::ExternalJudge;

    SUBCASE("http error status") {
        LocalServer server("/judge", [](const Json&) { return std::string(); });
        HttpJudgeClient judge(server.url("/judge"));
        cfg.answer.judge_url = server.url("/judge");
        CHECK_THROWS_AS(score_episode(e, preds, cfg, &judge), ScorerError);
    }
    SUBCASE("malformed body") {
        LocalServer server("/judge", [](const Json&) { return std::string("{\"verdict\":1}"); });
        HttpJudgeClient judge(server.url("/judge"));
        cfg.answer.judge_url = server.url("/judge");
        CHECK_THROWS_AS(score_episode(e, preds, cfg, &judge), ScorerError);
    }
    SUBCASE("unreachable host") {
        HttpJudgeClient judge("http://127.0.0.1:1/judge");
        cfg.answer.judge_url = "http://127.0.0.1:1/judge";
        CHECK_THROWS_AS(score_episode(e, preds, cfg, &judge), ScorerError);
    }
    SUBCASE("missing client") {
        cfg.answer.judge_url = "http://127.0.0.1:1/judge";
        CHECK_THROWS_AS(score_episode(e, preds, cfg, nullptr), ArgumentError);
    }
}

TEST_CASE("duplicate handling flows through scoring") {
    auto e = mk_episode("e", 100, {mk_query("q1", 0)},
                        {mk_gt("g1", "q1", "red cup", {{10, 20}})});
    std::vector<Prediction> preds = {mk_pred("p1", "q1", "red cup", 10),
                                     mk_pred("p2", "q1", "red cup", 12)};
    auto strict = token_cfg();
    auto lax = token_cfg();
    lax.match.duplicate_policy = DuplicatePolicy::IgnoreDuplicates;
    CHECK(score_episode(e, preds, strict).report.fp == 1);
    CHECK(score_episode(e, preds, lax).report.fp == 0);
    CHECK(score_episode(e, preds, lax).report.estp_f1 == 1.0);
}
