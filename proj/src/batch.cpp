#include "estp/batch.hpp"

#include <exception>
#include <thread>

#ifdef ESTP_HAVE_OPENMP
#include <omp.h>
#endif

namespace estp {

namespace {

// Runs fn(i) for i in [0, n), serially or under OpenMP. Exceptions are
// captured per index and the lowest-index failure is rethrown so parallel
// runs fail exactly like serial ones.
template <typename Fn>
void for_each_index(std::int64_t n, int jobs, Fn&& fn) {
    if (n == 0) return;
    jobs = effective_jobs(jobs);
#ifdef ESTP_HAVE_OPENMP
    if (jobs > 1) {
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
        for (std::int64_t i = 0; i < n; ++i) {
            try {
                fn(i);
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
        }
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
        return;
    }
#else
    (void)jobs;
#endif
    for (std::int64_t i = 0; i < n; ++i) fn(i);
}

void check_signals_shape(std::size_t episodes, const std::vector<const SignalMap*>& signals) {
    if (!signals.empty() && signals.size() != episodes)
        throw ArgumentError("signals must be empty or provide one entry per episode");
}

}  // namespace

bool parallel_runtime_available() {
#ifdef ESTP_HAVE_OPENMP
    return true;
#else
    return false;
#endif
}

int effective_jobs(int jobs) {
    if (jobs > 0) return jobs;
    if (!parallel_runtime_available()) return 1;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

std::vector<EpisodeScore> score_batch_serial(
    const std::vector<Episode>& episodes,
    const std::vector<std::vector<Prediction>>& predictions, const ScoreConfig& config,
    JudgeClient* judge) {
    if (episodes.size() != predictions.size())
        throw ArgumentError("one prediction list per episode required");
    std::vector<EpisodeScore> out;
    out.reserve(episodes.size());
    for (std::size_t i = 0; i < episodes.size(); ++i)
        out.push_back(score_episode(episodes[i], predictions[i], config, judge));
    return out;
}

std::vector<EpisodeScore> score_batch(const std::vector<Episode>& episodes,
                                      const std::vector<std::vector<Prediction>>& predictions,
                                      const ScoreConfig& config, JudgeClient* judge, int jobs) {
    if (episodes.size() != predictions.size())
        throw ArgumentError("one prediction list per episode required");
    std::vector<EpisodeScore> out(episodes.size());
    if (judge != nullptr) jobs = 1;
    for_each_index(static_cast<std::int64_t>(episodes.size()), jobs, [&](std::int64_t i) {
        auto k = static_cast<std::size_t>(i);
        out[k] = score_episode(episodes[k], predictions[k], config, judge);
    });
    return out;
}

std::vector<SimResult> simulate_batch_serial(const std::vector<Episode>& episodes,
                                             const PolicySpec& policy,
                                             const std::vector<const SignalMap*>& signals,
                                             const SimulateOptions& options) {
    check_signals_shape(episodes.size(), signals);
    std::vector<SimResult> out;
    out.reserve(episodes.size());
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        const SignalMap* s = signals.empty() ? nullptr : signals[i];
        out.push_back(simulate(episodes[i], policy, s, options));
    }
    return out;
}

std::vector<SimResult> simulate_batch(const std::vector<Episode>& episodes,
                                      const PolicySpec& policy,
                                      const std::vector<const SignalMap*>& signals,
                                      const SimulateOptions& options, int jobs) {
    check_signals_shape(episodes.size(), signals);
    std::vector<SimResult> out(episodes.size());
    if (options.on_frame) jobs = 1;
    for_each_index(static_cast<std::int64_t>(episodes.size()), jobs, [&](std::int64_t i) {
        auto k = static_cast<std::size_t>(i);
        const SignalMap* s = signals.empty() ? nullptr : signals[k];
        out[k] = simulate(episodes[k], policy, s, options);
    });
    return out;
}

std::map<std::string, std::vector<SupervisionTarget>> supervise_batch_serial(
    const std::vector<Episode>& episodes, const SuperviseSpec& spec,
    const std::vector<const SignalMap*>& signals) {
    if (spec.stage < 0 || spec.stage > 2) throw ArgumentError("stage must be 0, 1, or 2");
    check_signals_shape(episodes.size(), signals);
    std::map<std::string, std::vector<SupervisionTarget>> merged;
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        const Episode& e = episodes[i];
        const SignalMap* s = signals.empty() ? nullptr : signals[i];
        std::vector<SupervisionTarget> targets;
        switch (spec.stage) {
            case 0: targets = stage0_targets(e); break;
            case 1: targets = stage1_targets(e, spec.w_min); break;
            default: targets = stage2_targets(e, spec.uncertain, s, spec.w_min); break;
        }
        if (!merged.emplace(e.id, std::move(targets)).second)
            throw ArgumentError("duplicate episode id '" + e.id + "' in batch");
    }
    return merged;
}

std::map<std::string, std::vector<SupervisionTarget>> supervise_batch(
    const std::vector<Episode>& episodes, const SuperviseSpec& spec,
    const std::vector<const SignalMap*>& signals, int jobs) {
    if (spec.stage < 0 || spec.stage > 2) throw ArgumentError("stage must be 0, 1, or 2");
    check_signals_shape(episodes.size(), signals);
    std::map<std::string, std::vector<SupervisionTarget>> merged;
    for (const auto& e : episodes)
        if (!merged.emplace(e.id, std::vector<SupervisionTarget>{}).second)
            throw ArgumentError("duplicate episode id '" + e.id + "' in batch");
    std::vector<std::vector<SupervisionTarget>> out(episodes.size());
    for_each_index(static_cast<std::int64_t>(episodes.size()), jobs, [&](std::int64_t i) {
        auto k = static_cast<std::size_t>(i);
        const SignalMap* s = signals.empty() ? nullptr : signals[k];
        switch (spec.stage) {
            case 0: out[k] = stage0_targets(episodes[k]); break;
            case 1: out[k] = stage1_targets(episodes[k], spec.w_min); break;
            default: out[k] = stage2_targets(episodes[k], spec.uncertain, s, spec.w_min); break;
        }
    });
    for (std::size_t k = 0; k < episodes.size(); ++k)
        merged[episodes[k].id] = std::move(out[k]);
    return merged;
}

}  // namespace estp
