#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "estp/core.hpp"

namespace estp {

// Small deterministic generator with a fixed cross-platform stream; the
// synthesizer's determinism contract rests on it, so no std:: distributions.
struct Splitmix64 {
    std::uint64_t state = 0;
    std::uint64_t next() {
        state += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    // uniform in [lo, hi], inclusive
    std::int64_t uniform(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(next() %
                                              static_cast<std::uint64_t>(hi - lo + 1));
    }
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

// ---------------------------------------------------------------------------
// Synthetic episodes

struct SynthParams {
    std::uint64_t seed = 0;
    Frame num_frames = 3000;
    std::int64_t fps_num = 30;
    std::int64_t fps_den = 1;
    int queries_per_episode = 3;
    // uniform interval count per gt item; the [1,7] default averages 4
    int intervals_min = 1;
    int intervals_max = 7;
    double contextual_fraction = 0.46;
    // weights over the 14 task types in enum order
    std::array<double, 14> task_mix{1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1};
};

void validate_synth_params(const SynthParams& params);

// Parameter-file round trip. Every field is optional on read and defaults
// as above; unknown keys are refused so typos cannot silently vanish.
Json synth_params_to_json(const SynthParams& params);
SynthParams synth_params_from_json(const Json& j);

// Deterministic in params.seed; the result always passes validate_episode.
// Queries are issued in increasing frame order, each owning one gt item with
// disjoint answer intervals; contextual items reference an earlier query.
Episode synth_episode(const SynthParams& params);

// Convenience batch: episode i uses an independent seed drawn from a
// splitmix stream over params.seed.
std::vector<Episode> synth_episodes(const SynthParams& params, int count);

// ---------------------------------------------------------------------------
// Caption-to-QA pipeline

struct Caption {
    Interval span;
    std::string text;
    bool operator==(const Caption&) const = default;
};

std::vector<Caption> read_captions_jsonl(std::istream& in);
void write_captions_jsonl(const std::vector<Caption>& captions, std::ostream& out);

struct QaPair {
    std::string id;
    std::string question;
    std::string answer;
    std::vector<Interval> intervals;
    TaskType task_type = TaskType::OR;
    std::vector<std::string> context_refs;
    bool operator==(const QaPair&) const = default;
};

struct QaGroup {
    std::vector<QaPair> turns;  // temporal order; later turns may reference earlier
    bool operator==(const QaGroup&) const = default;
};

// Text generation client; the wire format is POST {"task", "input"} ->
// {"output"}. The endpoint sentinel "mock:" selects the deterministic
// offline stand-in.
struct GenClientSpec {
    std::string endpoint = "mock:";
    double timeout_s = 10.0;
    int retries = 2;
};

class GenClient {
  public:
    virtual ~GenClient() = default;
    virtual Json generate(const std::string& task, const Json& input) = 0;
};

class MockGenClient : public GenClient {
  public:
    Json generate(const std::string& task, const Json& input) override;
};

class HttpGenClient : public GenClient {
  public:
    explicit HttpGenClient(GenClientSpec spec);
    ~HttpGenClient() override;
    Json generate(const std::string& task, const Json& input) override;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::unique_ptr<GenClient> make_gen_client(const GenClientSpec& spec);

// Stage 1: one QA pair per caption, carrying the caption span as its single
// answer interval. Client failures surface as PipelineError naming the stage
// and the caption record.
std::vector<QaPair> pipeline_one_to_one(const std::vector<Caption>& captions, GenClient& client);

// Stage 2: grows each pair's interval set with every caption span whose
// token multiset contains the answer's tokens, skipping spans that would
// overlap an interval the pair already holds. Never removes an interval.
std::vector<QaPair> pipeline_one_to_many(const std::vector<QaPair>& pairs,
                                         const std::vector<Caption>& captions);

// Stage 3: groups pairs that share a content token (stopwords dropped) into
// multi-turn chains ordered by earliest interval. A turn gains a reference
// to the previous one, and the contextual task type, only when its window
// starts strictly later, since a follow-up cannot precede what it follows.
std::vector<QaGroup> pipeline_many_to_many(const std::vector<QaPair>& pairs);

// Lays grouped turns out as one episode; num_frames 0 sizes the timeline to
// the last interval.
Episode assemble_episode(const std::vector<QaGroup>& groups, const std::string& episode_id,
                         std::int64_t fps_num = 30, std::int64_t fps_den = 1,
                         Frame num_frames = 0);

// All three stages plus assembly.
Episode run_pipeline(const std::vector<Caption>& captions, GenClient& client,
                     const std::string& episode_id);

std::vector<QaPair> read_pairs_jsonl(std::istream& in);
void write_pairs_jsonl(const std::vector<QaPair>& pairs, std::ostream& out);

}  // namespace estp
