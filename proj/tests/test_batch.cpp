#include <doctest.h>

#include "estp/batch.hpp"
#include "estp/datagen.hpp"
#include "helpers.hpp"

using namespace estp;
using namespace estp::test;

namespace {

std::vector<Episode> small_batch(std::uint64_t seed, int count) {
    SynthParams params;
    params.seed = seed;
    params.num_frames = 400;
    params.queries_per_episode = 2;
    params.intervals_max = 3;
    return synth_episodes(params, count);
}

bool same_sim(const SimResult& a, const SimResult& b) {
    return a.predictions == b.predictions && a.trace.records == b.trace.records &&
           a.ledger.segments == b.ledger.segments &&
           trace_summary_to_json(a.trace.summary) == trace_summary_to_json(b.trace.summary);
}

SignalMap quiet_signals(const Episode& e) {
    SignalMap m;
    for (Frame f = 0; f < e.timeline.num_frames; ++f) m[f] = {1.0, 0.0, 0.0, 0.0};
    return m;
}

}  // namespace

TEST_CASE("effective jobs resolves defaults") {
    CHECK(effective_jobs(3) == 3);
    CHECK(effective_jobs(1) == 1);
    CHECK(effective_jobs(0) >= 1);
    CHECK(effective_jobs(-2) == effective_jobs(0));
    if (!parallel_runtime_available()) CHECK(effective_jobs(0) == 1);
}

TEST_CASE("parallel scoring matches the serial reference exactly") {
    auto episodes = small_batch(101, 24);
    std::vector<std::vector<Prediction>> preds;
    for (const auto& e : episodes)
        preds.push_back(simulate(e, PolicySpec::make_oracle()).predictions);
    ScoreConfig cfg;
    cfg.match.duplicate_policy = DuplicatePolicy::IgnoreDuplicates;

    auto serial = score_batch_serial(episodes, preds, cfg);
    for (int jobs : {0, 1, 2, 7}) {
        auto parallel = score_batch(episodes, preds, cfg, nullptr, jobs);
        REQUIRE(parallel.size() == serial.size());
        for (std::size_t i = 0; i < serial.size(); ++i) {
            CAPTURE(jobs);
            CAPTURE(i);
            CHECK(parallel[i].report == serial[i].report);
            CHECK(parallel[i].match_result == serial[i].match_result);
        }
    }
    CHECK(serial[0].report.estp_f1 == 1.0);
}

TEST_CASE("parallel simulation matches the serial reference exactly") {
    auto episodes = small_batch(202, 24);
    auto policy = PolicySpec::make_oracle();
    SimulateOptions options;
    options.k_ct = 2;

    auto serial = simulate_batch_serial(episodes, policy, {}, options);
    for (int jobs : {0, 2, 5}) {
        auto parallel = simulate_batch(episodes, policy, {}, options, jobs);
        REQUIRE(parallel.size() == serial.size());
        for (std::size_t i = 0; i < serial.size(); ++i) {
            CAPTURE(jobs);
            CAPTURE(i);
            CHECK(same_sim(parallel[i], serial[i]));
        }
    }
}

TEST_CASE("parallel supervision targets match the serial reference exactly") {
    auto episodes = small_batch(303, 24);
    SuperviseSpec spec;
    spec.stage = 1;
    spec.w_min = 0.2;
    auto serial = supervise_batch_serial(episodes, spec);
    CHECK(serial.size() == episodes.size());
    for (int jobs : {0, 2, 7}) {
        auto parallel = supervise_batch(episodes, spec, {}, jobs);
        CHECK(parallel == serial);
    }

    spec.stage = 2;
    spec.uncertain.mode = UncertainSpec::Mode::ExplicitSet;
    spec.uncertain.frames = {5, 17};
    CHECK(supervise_batch(episodes, spec, {}, 4) == supervise_batch_serial(episodes, spec));
}

TEST_CASE("stage-2 band supervision threads per-episode signals through") {
    auto episodes = small_batch(404, 6);
    std::vector<SignalMap> owned;
    owned.reserve(episodes.size());
    for (const auto& e : episodes) owned.push_back(quiet_signals(e));
    owned[3][10].p_continue = 0.5;
    owned[3][10].p_respond = 0.5;
    std::vector<const SignalMap*> signals;
    for (const auto& m : owned) signals.push_back(&m);

    SuperviseSpec spec;
    spec.stage = 2;
    spec.uncertain.mode = UncertainSpec::Mode::ProbabilityBand;
    spec.uncertain.band_lo = 0.4;
    spec.uncertain.band_hi = 0.6;
    auto serial = supervise_batch_serial(episodes, spec, signals);
    CHECK(supervise_batch(episodes, spec, signals, 3) == serial);

    bool ask_seen = false;
    for (const auto& t : serial.at(episodes[3].id))
        if (t.label == ActionLabel::AskHigh && t.frame == 10) ask_seen = true;
    CHECK(ask_seen == (supervision_scope_start(episodes[3]) <= 10));
}

TEST_CASE("batch shape errors") {
    auto episodes = small_batch(505, 4);
    CHECK_THROWS_AS(score_batch(episodes, {{}, {}}, ScoreConfig{}), ArgumentError);
    CHECK_THROWS_AS(score_batch_serial(episodes, {{}}, ScoreConfig{}), ArgumentError);
    std::vector<const SignalMap*> short_signals(2, nullptr);
    CHECK_THROWS_AS(simulate_batch(episodes, PolicySpec::make_oracle(), short_signals),
                    ArgumentError);
    SuperviseSpec bad;
    bad.stage = 3;
    CHECK_THROWS_AS(supervise_batch(episodes, bad), ArgumentError);

    auto dup = episodes;
    dup[2].id = dup[0].id;
    CHECK_THROWS_AS(supervise_batch(dup, SuperviseSpec{}), ArgumentError);
    CHECK_THROWS_AS(supervise_batch_serial(dup, SuperviseSpec{}), ArgumentError);
}

TEST_CASE("the lowest failing episode index decides the error, serial or parallel") {
    auto episodes = small_batch(606, 8);
    std::vector<SignalMap> owned;
    for (const auto& e : episodes) owned.push_back(quiet_signals(e));
    std::vector<const SignalMap*> signals;
    for (const auto& m : owned) signals.push_back(&m);

    // index 2 lacks signals (ArgumentError); index 5 is structurally broken
    // (ContractError). The serial loop dies at 2, so parallel must as well.
    signals[2] = nullptr;
    episodes[5].queries[0].issue_frame = episodes[5].timeline.num_frames + 7;
    auto policy = PolicySpec::make_threshold(0.5);
    CHECK_THROWS_AS(simulate_batch_serial(episodes, policy, signals), ArgumentError);
    CHECK_THROWS_AS(simulate_batch(episodes, policy, signals, {}, 4), ArgumentError);

    signals[2] = &owned[2];
    CHECK_THROWS_AS(simulate_batch_serial(episodes, policy, signals), ContractError);
    CHECK_THROWS_AS(simulate_batch(episodes, policy, signals, {}, 4), ContractError);
}

TEST_CASE("a frame observer forces the serial path but keeps results") {
    auto episodes = small_batch(707, 5);
    std::vector<Frame> seen;
    SimulateOptions options;
    options.on_frame = [&](const CacheLedger&, const TraceRecord& r) { seen.push_back(r.frame); };
    auto observed = simulate_batch(episodes, PolicySpec::make_oracle(), {}, options, 4);
    auto serial = simulate_batch_serial(episodes, PolicySpec::make_oracle());
    REQUIRE(observed.size() == serial.size());
    for (std::size_t i = 0; i < serial.size(); ++i) CHECK(same_sim(observed[i], serial[i]));

    std::size_t expected = 0;
    for (const auto& r : serial) expected += r.trace.records.size();
    CHECK(seen.size() == expected);
    // observer calls arrive in episode order, each episode's frames ascending
    std::size_t at = 0;
    for (const auto& r : serial)
        for (const auto& rec : r.trace.records) CHECK(seen[at++] == rec.frame);
}

TEST_CASE("empty batches are fine") {
    CHECK(score_batch({}, {}, ScoreConfig{}).empty());
    CHECK(simulate_batch({}, PolicySpec::make_oracle()).empty());
    CHECK(supervise_batch({}, SuperviseSpec{}).empty());
}
