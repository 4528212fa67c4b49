#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "estp/datagen.hpp"
#include "estp/jsonl.hpp"
#include "estp/runtime.hpp"
#include "estp/scoring.hpp"
#include "helpers.hpp"

using namespace estp;
using namespace estp::test;

namespace {

std::string dump_episode(const Episode& e) {
    std::stringstream buf;
    write_episode_jsonl(e, buf);
    return buf.str();
}

}  // namespace

TEST_CASE("same seed reproduces the episode byte for byte") {
    SynthParams params;
    params.seed = 0xabcdef12;
    auto a = synth_episode(params);
    auto b = synth_episode(params);
    CHECK(dump_episode(a) == dump_episode(b));
    params.seed = 0xabcdef13;
    CHECK(dump_episode(synth_episode(params)) != dump_episode(a));
}

TEST_CASE("synthesized episodes always validate") {
    std::mt19937_64 rng(0x5eed70);
    for (int trial = 0; trial < 200; ++trial) {
        SynthParams params;
        params.seed = rng();
        params.num_frames = 200 + static_cast<Frame>(rng() % 4000);
        params.queries_per_episode = 1 + static_cast<int>(rng() % 6);
        params.intervals_min = 1 + static_cast<int>(rng() % 3);
        params.intervals_max = params.intervals_min + static_cast<int>(rng() % 5);
        params.contextual_fraction = static_cast<double>(rng() % 101) / 100.0;
        CAPTURE(trial);
        auto e = synth_episode(params);
        CHECK(validate_episode(e).empty());
        CHECK(e.queries.size() == static_cast<std::size_t>(params.queries_per_episode));
        CHECK(e.gt_items.size() == e.queries.size());
        for (const auto& gt : e.gt_items) {
            CHECK(gt.intervals.size() >= static_cast<std::size_t>(params.intervals_min));
            CHECK(gt.intervals.size() <= static_cast<std::size_t>(params.intervals_max));
        }
    }
}

TEST_CASE("zero contextual fraction yields no contextual items") {
    SynthParams params;
    params.contextual_fraction = 0.0;
    params.queries_per_episode = 5;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        params.seed = seed;
        auto e = synth_episode(params);
        for (const auto& gt : e.gt_items)
            CHECK(gt.proactive_type != ProactiveType::Contextual);
        for (const auto& q : e.queries) CHECK(q.context_refs.empty());
    }
}

TEST_CASE("full contextual fraction links every later query") {
    SynthParams params;
    params.contextual_fraction = 1.0;
    params.queries_per_episode = 4;
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
        params.seed = seed;
        auto e = synth_episode(params);
        for (std::size_t k = 1; k < e.queries.size(); ++k) {
            REQUIRE(e.queries[k].context_refs.size() == 1);
            CHECK(e.gt_items[k].proactive_type == ProactiveType::Contextual);
            // the reference resolves to a strictly earlier query
            const auto& ref = e.queries[k].context_refs[0];
            auto* target = e.find_query(ref);
            REQUIRE(target != nullptr);
            CHECK(target->issue_frame < e.queries[k].issue_frame);
        }
        CHECK(e.queries[0].context_refs.empty());
    }
}

TEST_CASE("task mix concentrates generation on the weighted types") {
    SynthParams params;
    params.task_mix.fill(0.0);
    params.task_mix[1] = 1.0;  // second listed task type only
    params.contextual_fraction = 0.0;
    params.queries_per_episode = 4;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        params.seed = seed;
        auto e = synth_episode(params);
        for (const auto& gt : e.gt_items) CHECK(gt.task_type == kAllTaskTypes[1]);
    }
}

TEST_CASE("interval count sample mean sits near the configured average") {
    SynthParams params;
    params.seed = 0x600d;
    auto episodes = synth_episodes(params, 2000);
    std::int64_t intervals = 0, items = 0;
    for (const auto& e : episodes)
        for (const auto& gt : e.gt_items) {
            intervals += static_cast<std::int64_t>(gt.intervals.size());
            ++items;
        }
    double mean = static_cast<double>(intervals) / static_cast<double>(items);
    CHECK(mean > 3.5);
    CHECK(mean < 4.5);
}

TEST_CASE("batch generation is deterministic with distinct ids") {
    SynthParams params;
    params.seed = 7;
    auto a = synth_episodes(params, 10);
    auto b = synth_episodes(params, 10);
    REQUIRE(a.size() == 10);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(dump_episode(a[i]) == dump_episode(b[i]));
    std::set<std::string> ids;
    for (const auto& e : a) ids.insert(e.id);
    CHECK(ids.size() == 10);
}

TEST_CASE("parameter and feasibility errors") {
    SynthParams params;
    params.intervals_min = 0;
    CHECK_THROWS_AS(synth_episode(params), ArgumentError);
    params = {};
    params.intervals_min = 5;
    params.intervals_max = 3;
    CHECK_THROWS_AS(synth_episode(params), ArgumentError);
    params = {};
    params.contextual_fraction = 1.5;
    CHECK_THROWS_AS(synth_episode(params), ArgumentError);
    params = {};
    params.task_mix.fill(0.0);
    CHECK_THROWS_AS(synth_episode(params), ArgumentError);
    params = {};
    params.num_frames = 20;  // no room for up to 7 intervals
    CHECK_THROWS_AS(synth_episode(params), GenerationError);
    params = {};
    params.task_mix.fill(0.0);
    params.task_mix[12] = 1.0;  // contextual type only
    params.contextual_fraction = 0.0;
    CHECK_THROWS_AS(synth_episode(params), GenerationError);
}

TEST_CASE("caption jsonl round trip and validation") {
    std::vector<Caption> captions = {{{0, 10}, "red cup on the counter"},
                                     {{20, 30}, "kettle boils"}};
    std::stringstream buf;
    write_captions_jsonl(captions, buf);
    CHECK(read_captions_jsonl(buf) == captions);

    std::stringstream bad1(R"({"span":[10,3],"text":"x"})"
                           "\n");
    CHECK_THROWS_AS(read_captions_jsonl(bad1), ParseError);
    std::stringstream bad2(R"({"span":[1,3]})"
                           "\n");
    CHECK_THROWS_AS(read_captions_jsonl(bad2), ParseError);
    std::stringstream bad3("{\"span\":[1,3],\"text\":\"x\"}\nnot json\n");
    try {
        read_captions_jsonl(bad3);
        FAIL("expected parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
}

TEST_CASE("single caption flows through stage one untouched") {
    MockGenClient client;
    std::vector<Caption> captions = {{{5, 25}, "red cup"}};
    auto pairs = pipeline_one_to_one(captions, client);
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].id == "qa-000000");
    CHECK(pairs[0].answer == "red cup");
    CHECK(pairs[0].question == "when does red cup happen");
    REQUIRE(pairs[0].intervals.size() == 1);
    CHECK(pairs[0].intervals[0] == Interval{5, 25});
}

TEST_CASE("stage two adds every caption span containing the answer") {
    MockGenClient client;
    std::vector<Caption> captions = {{{0, 10}, "red cup"},
                                     {{20, 30}, "shiny red cup appears"},
                                     {{40, 50}, "a blue bowl"}};
    auto pairs = pipeline_one_to_many(pipeline_one_to_one(captions, client), captions);
    REQUIRE(pairs.size() == 3);
    // "red cup" is contained in captions 0 and 1
    REQUIRE(pairs[0].intervals.size() == 2);
    CHECK(pairs[0].intervals[0] == Interval{0, 10});
    CHECK(pairs[0].intervals[1] == Interval{20, 30});
    // the longer answer matches only its own caption
    CHECK(pairs[1].intervals.size() == 1);
    CHECK(pairs[2].intervals.size() == 1);
}

TEST_CASE("stage two skips overlapping retrievals and never removes intervals") {
    std::vector<Caption> captions = {{{0, 10}, "red cup"},
                                     {{8, 15}, "red cup again"},  // overlaps the first span
                                     {{30, 40}, "red cup later"}};
    MockGenClient client;
    auto stage1 = pipeline_one_to_one(captions, client);
    auto stage2 = pipeline_one_to_many(stage1, captions);
    // pair 0: own [0,10]; [8,15] collides; [30,40] lands
    REQUIRE(stage2[0].intervals.size() == 2);
    CHECK(stage2[0].intervals[1] == Interval{30, 40});
    for (std::size_t i = 0; i < stage1.size(); ++i)
        for (const auto& iv : stage1[i].intervals)
            CHECK(std::count(stage2[i].intervals.begin(), stage2[i].intervals.end(), iv) == 1);
}

TEST_CASE("stage three groups pairs sharing an entity") {
    QaPair a{"qa-0", "where is the knife", "knife on the counter", {{0, 5}}, TaskType::OR, {}};
    QaPair b{"qa-1", "what sits on the counter", "a bowl on the counter", {{10, 20}},
             TaskType::OR, {}};
    QaPair c{"qa-2", "when does the kettle boil", "kettle boils", {{30, 40}}, TaskType::OR, {}};
    auto groups = pipeline_many_to_many({a, b, c});
    REQUIRE(groups.size() == 2);
    REQUIRE(groups[0].turns.size() == 2);
    CHECK(groups[0].turns[0].id == "qa-0");
    CHECK(groups[0].turns[1].id == "qa-1");
    // the later turn references the earlier and becomes contextual
    REQUIRE(groups[0].turns[1].context_refs.size() == 1);
    CHECK(groups[0].turns[1].context_refs[0] == "qa-0");
    CHECK(groups[0].turns[1].task_type == TaskType::ORC);
    CHECK(groups[0].turns[0].task_type == TaskType::OR);
    CHECK(groups[1].turns.size() == 1);
    CHECK(groups[1].turns[0].context_refs.empty());
}

TEST_CASE("entity overlap chains transitively") {
    QaPair a{"qa-0", "q", "knife counter", {{0, 5}}, TaskType::OR, {}};
    QaPair b{"qa-1", "q", "counter bowl", {{10, 15}}, TaskType::OR, {}};
    QaPair c{"qa-2", "q", "bowl spoon", {{20, 25}}, TaskType::OR, {}};
    auto groups = pipeline_many_to_many({a, b, c});
    REQUIRE(groups.size() == 1);
    CHECK(groups[0].turns.size() == 3);
    CHECK(groups[0].turns[2].context_refs[0] == "qa-1");
}

TEST_CASE("grouping is stable under input permutation") {
    std::vector<QaPair> pairs = {
        {"qa-0", "q", "knife counter", {{0, 5}}, TaskType::OR, {}},
        {"qa-1", "q", "counter bowl", {{10, 15}}, TaskType::OR, {}},
        {"qa-2", "q", "kettle", {{3, 9}}, TaskType::OR, {}},
        {"qa-3", "q", "spoon jar", {{12, 19}}, TaskType::OR, {}},
        {"qa-4", "q", "jar lid", {{40, 44}}, TaskType::OR, {}},
    };
    auto base = pipeline_many_to_many(pairs);
    std::mt19937_64 rng(0x5eed71);
    for (int trial = 0; trial < 20; ++trial) {
        auto shuffled = pairs;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        CHECK(pipeline_many_to_many(shuffled) == base);
    }
}

TEST_CASE("turns tied on their start frame stay unlinked") {
    QaPair a{"qa-0", "q", "knife counter", {{5, 9}}, TaskType::OR, {}};
    QaPair b{"qa-1", "q", "counter bowl", {{5, 12}}, TaskType::OR, {}};
    auto groups = pipeline_many_to_many({a, b});
    REQUIRE(groups.size() == 1);
    CHECK(groups[0].turns[1].context_refs.empty());
    CHECK(groups[0].turns[1].task_type == TaskType::OR);
}

TEST_CASE("assembly produces a valid episode and rejects broken groups") {
    QaPair a{"qa-0", "where is the knife", "knife on the counter", {{2, 5}}, TaskType::OR, {}};
    QaPair b{"qa-1", "what sits on the counter", "bowl on the counter", {{10, 20}},
             TaskType::ORC, {"qa-0"}};
    auto e = assemble_episode({QaGroup{{a, b}}}, "pipe-ep");
    CHECK(validate_episode(e).empty());
    CHECK(e.timeline.num_frames == 21);
    CHECK(e.queries[0].issue_frame == 2);
    CHECK(e.queries[1].issue_frame == 10);
    CHECK(e.gt_items[1].proactive_type == ProactiveType::Contextual);

    auto dup = QaGroup{{a, a}};
    CHECK_THROWS_AS(assemble_episode({dup}, "pipe-ep"), PipelineError);
}

TEST_CASE("full pipeline output survives an oracle round trip") {
    std::vector<Caption> captions = {{{0, 5}, "red cup"},
                                     {{10, 15}, "shiny red cup appears"},
                                     {{30, 42}, "kettle boils"}};
    MockGenClient client;
    auto e = run_pipeline(captions, client, "pipe-ep");
    CHECK(validate_episode(e).empty());
    REQUIRE(e.queries.size() == 3);

    auto res = simulate(e, PolicySpec::make_oracle());
    ScoreConfig cfg;
    cfg.match.duplicate_policy = DuplicatePolicy::IgnoreDuplicates;
    auto scored = score_episode(e, res.predictions, cfg);
    CHECK(scored.report.estp_f1 == 1.0);
}

TEST_CASE("client failures name the stage and record") {
    GenClientSpec spec;
    spec.endpoint = "http://127.0.0.1:1/gen";
    spec.retries = 0;
    spec.timeout_s = 1.0;
    auto client = make_gen_client(spec);
    std::vector<Caption> captions = {{{0, 5}, "red cup"}};
    try {
        pipeline_one_to_one(captions, *client);
        FAIL("expected a pipeline error");
    } catch (const PipelineError& e) {
        std::string what = e.what();
        CHECK(what.find("one_to_one") != std::string::npos);
        CHECK(what.find("caption-0") != std::string::npos);
    }
}

TEST_CASE("http generation client retries then succeeds against a live server") {
    LocalServer server("/gen", [](const Json& body) {
        if (body.at("task") != "one_to_one") return std::string();
        Json out;
        out["output"] = {{"question", "what is cooking"},
                         {"answer", body.at("input").at("text").get<std::string>()}};
        return out.dump();
    });
    GenClientSpec spec;
    spec.endpoint = server.url("/gen");
    spec.retries = 2;
    auto client = make_gen_client(spec);
    auto out = client->generate("one_to_one", Json{{"span", {0, 4}}, {"text", "stew"}});
    CHECK(out["answer"] == "stew");
    CHECK(server.hits() == 1);
}

TEST_CASE("http generation client exhausts retries on persistent failure") {
    LocalServer server("/gen", [](const Json&) { return std::string(); });  // always 500
    GenClientSpec spec;
    spec.endpoint = server.url("/gen");
    spec.retries = 2;
    auto client = make_gen_client(spec);
    CHECK_THROWS_WITH_AS(client->generate("one_to_one", Json::object()),
                         doctest::Contains("3 attempt"), Error);
    CHECK(server.hits() == 3);
}

TEST_CASE("mock client rejects unknown tasks and malformed input") {
    MockGenClient client;
    CHECK_THROWS_AS(client.generate("mystery", Json::object()), ArgumentError);
    CHECK_THROWS_AS(client.generate("one_to_one", Json::object()), ArgumentError);
}

TEST_CASE("qa pair jsonl round trip") {
    std::vector<QaPair> pairs = {
        {"qa-0", "where is it", "red cup", {{0, 5}, {9, 12}}, TaskType::OR, {}},
        {"qa-1", "still there", "red cup", {{20, 30}}, TaskType::ORC, {"qa-0"}}};
    std::stringstream buf;
    write_pairs_jsonl(pairs, buf);
    CHECK(read_pairs_jsonl(buf) == pairs);
    std::stringstream bad(R"({"id":"x","question":"q","answer":"a","task_type":"NOPE","intervals":[]})"
                          "\n");
    CHECK_THROWS_AS(read_pairs_jsonl(bad), ParseError);
}

TEST_CASE("synth parameter files round trip and refuse unknown keys") {
    SynthParams p;
    p.seed = 99;
    p.num_frames = 1234;
    p.queries_per_episode = 5;
    p.intervals_max = 4;
    p.contextual_fraction = 0.25;
    p.task_mix[3] = 7.5;
    auto again = synth_params_from_json(synth_params_to_json(p));
    CHECK(again.seed == p.seed);
    CHECK(again.num_frames == p.num_frames);
    CHECK(again.queries_per_episode == p.queries_per_episode);
    CHECK(again.intervals_max == p.intervals_max);
    CHECK(again.contextual_fraction == p.contextual_fraction);
    CHECK(again.task_mix == p.task_mix);

    CHECK(synth_params_from_json(Json::object()).num_frames == 3000);
    CHECK_THROWS_AS(synth_params_from_json(Json{{"num_frame", 10}}), ArgumentError);
    CHECK_THROWS_AS(synth_params_from_json(Json{{"task_mix", Json::array({1, 2})}}),
                    ArgumentError);
    CHECK_THROWS_AS(synth_params_from_json(Json{{"num_frames", 0}}), ArgumentError);
    CHECK_THROWS_AS(synth_params_from_json(Json::array()), ArgumentError);
}
