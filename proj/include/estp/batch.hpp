#pragma once

// Episode-level batch runners. Every kernel comes in two flavors: a serial
// reference (the semantics) and a parallel variant that must match it
// result-for-result; estp_bench compares their throughput. One episode is
// always processed by one thread, so per-episode state is never shared.

#include <map>
#include <string>
#include <vector>

#include "estp/runtime.hpp"
#include "estp/scoring.hpp"
#include "estp/supervision.hpp"

namespace estp {

// True when this build can actually run batch work on multiple threads.
bool parallel_runtime_available();

// jobs <= 0 picks the runtime default: all hardware threads when the
// parallel runtime is available, otherwise 1. Explicit values pass through.
int effective_jobs(int jobs);

// predictions[i] belongs to episodes[i]; sizes must match. A judge forces
// the serial path (judge clients are not assumed thread-safe); everything
// else scores episodes independently. Errors surface exactly as in the
// serial run: the failure from the lowest episode index wins.
std::vector<EpisodeScore> score_batch_serial(
    const std::vector<Episode>& episodes,
    const std::vector<std::vector<Prediction>>& predictions, const ScoreConfig& config,
    JudgeClient* judge = nullptr);
std::vector<EpisodeScore> score_batch(const std::vector<Episode>& episodes,
                                      const std::vector<std::vector<Prediction>>& predictions,
                                      const ScoreConfig& config, JudgeClient* judge = nullptr,
                                      int jobs = 0);

// signals is either empty (no policy signals anywhere) or one entry per
// episode; individual entries may be null. A non-null options.on_frame
// observer forces the serial path so observation order stays well defined.
std::vector<SimResult> simulate_batch_serial(const std::vector<Episode>& episodes,
                                             const PolicySpec& policy,
                                             const std::vector<const SignalMap*>& signals = {},
                                             const SimulateOptions& options = {});
std::vector<SimResult> simulate_batch(const std::vector<Episode>& episodes,
                                      const PolicySpec& policy,
                                      const std::vector<const SignalMap*>& signals = {},
                                      const SimulateOptions& options = {}, int jobs = 0);

struct SuperviseSpec {
    int stage = 0;
    double w_min = 0.1;
    UncertainSpec uncertain;  // stage 2 only
};

// Targets for every episode, merged by episode id. Duplicate episode ids
// would silently collide in the map and are refused up front. signals
// follows the simulate_batch convention and only stage 2 band mode reads it.
std::map<std::string, std::vector<SupervisionTarget>> supervise_batch_serial(
    const std::vector<Episode>& episodes, const SuperviseSpec& spec,
    const std::vector<const SignalMap*>& signals = {});
std::map<std::string, std::vector<SupervisionTarget>> supervise_batch(
    const std::vector<Episode>& episodes, const SuperviseSpec& spec,
    const std::vector<const SignalMap*>& signals = {}, int jobs = 0);

}  // namespace estp
