#pragma once

// Line-oriented interchange formats for episodes and predictions.
// One JSON object per line; integers only in frame fields. Unknown fields
// survive a round-trip unchanged, appended after the canonical keys.

#include <iosfwd>
#include <string>
#include <vector>

#include "estp/core.hpp"

namespace estp {

// Reads exactly one episode (header record, queries, gt items) from the
// stream. Throws ParseError with the 1-based line number on malformed input
// and ReferenceError on dangling query ids.
Episode read_episode_jsonl(std::istream& in);

// Reads every episode in the stream (each introduced by a header record).
std::vector<Episode> read_episodes_jsonl(std::istream& in);

void write_episode_jsonl(const Episode& episode, std::ostream& out);
void write_episodes_jsonl(const std::vector<Episode>& episodes, std::ostream& out);

std::vector<Prediction> read_predictions_jsonl(std::istream& in);
void write_predictions_jsonl(const std::vector<Prediction>& predictions, std::ostream& out);

// Single-record encodings, exposed for streaming writers.
Json episode_header_to_json(const Episode& episode);
Json query_to_json(const Query& query);
Json gt_to_json(const GroundTruthItem& gt);
Json prediction_to_json(const Prediction& prediction);

}  // namespace estp
