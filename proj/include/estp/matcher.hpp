#pragma once

// Assigns predictions to ground-truth items under the multi-interval
// validity rule. A prediction can only match a gt item of its own query,
// and only when its emit frame lies inside one of that item's intervals.

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "estp/core.hpp"

namespace estp {

enum class MatchStrategy { GreedyEarliest, OptimalAssignment };
enum class DuplicatePolicy { DuplicatesAreFP, IgnoreDuplicates };

struct MatchConfig {
    MatchStrategy strategy = MatchStrategy::GreedyEarliest;
    DuplicatePolicy duplicate_policy = DuplicatePolicy::DuplicatesAreFP;
};

struct MatchPair {
    std::string gt_id;
    std::string prediction_id;
    Interval matched_interval;

    bool operator==(const MatchPair&) const = default;
};

struct MatchResult {
    std::vector<MatchPair> pairs;                // sorted by (gt_id, prediction_id)
    std::vector<std::string> false_positives;    // prediction ids, sorted
    std::vector<std::string> false_negatives;    // gt ids, sorted

    bool operator==(const MatchResult&) const = default;
};

// Scores one feasible (gt, prediction) pair; the matched interval is the
// gt interval containing the prediction's emit frame. Used by
// OptimalAssignment to rank assignments.
using PairScorer =
    std::function<double(const GroundTruthItem&, const Prediction&, const Interval&)>;

// GreedyEarliest processes predictions in ascending emit_frame (ties by
// prediction id); OptimalAssignment enumerates one-to-one assignments per
// query and keeps the one maximizing total pair score, ties broken toward
// more pairs, then the lexicographically smallest (gt_id, pred_id) list.
// OptimalAssignment requires a scorer and refuses queries larger than the
// exhaustive-search bound.
MatchResult match(const Episode& episode, const std::vector<Prediction>& predictions,
                  const MatchConfig& config, const PairScorer& scorer = nullptr);

// Test oracle: exhaustive enumeration of all feasible one-to-one
// assignments, same selection rule as OptimalAssignment, written as an
// independent search (prediction-major instead of gt-major). Refuses
// inputs beyond 12 predictions or 12 gt items.
MatchResult brute_force_match(const Episode& episode,
                              const std::vector<Prediction>& predictions,
                              const PairScorer& scorer,
                              DuplicatePolicy duplicate_policy = DuplicatePolicy::DuplicatesAreFP);

// Total pair score of a result under a scorer, summed in (gt_id, pred_id)
// order. Convenience for comparing strategies.
double total_pair_score(const Episode& episode, const std::vector<Prediction>& predictions,
                        const MatchResult& result, const PairScorer& scorer);

std::string to_string(MatchStrategy s);
std::string to_string(DuplicatePolicy p);

void write_match_result_jsonl(const MatchResult& result, std::ostream& out);
MatchResult read_match_result_jsonl(std::istream& in);

}  // namespace estp
