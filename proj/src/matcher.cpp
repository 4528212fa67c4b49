#include "estp/matcher.hpp"

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace estp {
namespace {

constexpr std::size_t kSearchBound = 12;
constexpr std::uint64_t kNodeBudget = 50'000'000;

struct Feasible {
    std::size_t gt_index;
    std::size_t pred_index;
    Interval interval;
    double score;
};

void check_predictions(const Episode& episode, const std::vector<Prediction>& predictions) {
    std::set<std::string> seen;
    for (const auto& p : predictions) {
        if (!seen.insert(p.id).second)
            throw ArgumentError("duplicate prediction id '" + p.id + "'");
        if (episode.find_query(p.query_id) == nullptr)
            throw ReferenceError("prediction '" + p.id + "' names unknown query '" +
                                 p.query_id + "'");
    }
}

// A prediction is droppable under IgnoreDuplicates when its frame falls
// inside an interval of an already matched gt item of the same query.
bool covered_by_matched(const Episode& episode, const Prediction& pred,
                        const std::set<std::string>& matched_gt_ids) {
    for (const auto& gt : episode.gt_items) {
        if (gt.query_id != pred.query_id) continue;
        if (!matched_gt_ids.count(gt.id)) continue;
        if (gt.interval_containing(pred.emit_frame) != nullptr) return true;
    }
    return false;
}

void finish_result(const Episode& episode, const std::vector<Prediction>& predictions,
                   DuplicatePolicy policy, const std::vector<MatchPair>& pairs,
                   MatchResult& out) {
    out.pairs = pairs;
    std::sort(out.pairs.begin(), out.pairs.end(), [](const MatchPair& a, const MatchPair& b) {
        return std::tie(a.gt_id, a.prediction_id) < std::tie(b.gt_id, b.prediction_id);
    });

    std::set<std::string> matched_gt;
    std::set<std::string> matched_pred;
    for (const auto& pr : out.pairs) {
        matched_gt.insert(pr.gt_id);
        matched_pred.insert(pr.prediction_id);
    }

    out.false_positives.clear();
    for (const auto& p : predictions) {
        if (matched_pred.count(p.id)) continue;
        if (policy == DuplicatePolicy::IgnoreDuplicates &&
            covered_by_matched(episode, p, matched_gt))
            continue;
        out.false_positives.push_back(p.id);
    }
    std::sort(out.false_positives.begin(), out.false_positives.end());

    out.false_negatives.clear();
    for (const auto& gt : episode.gt_items)
        if (!matched_gt.count(gt.id)) out.false_negatives.push_back(gt.id);
    std::sort(out.false_negatives.begin(), out.false_negatives.end());
}

MatchResult greedy_match(const Episode& episode, const std::vector<Prediction>& predictions,
                         DuplicatePolicy policy) {
    std::vector<const Prediction*> order;
    order.reserve(predictions.size());
    for (const auto& p : predictions) order.push_back(&p);
    std::sort(order.begin(), order.end(), [](const Prediction* a, const Prediction* b) {
        return std::tie(a->emit_frame, a->id) < std::tie(b->emit_frame, b->id);
    });

    std::set<std::string> matched_gt;
    std::vector<MatchPair> pairs;
    for (const Prediction* p : order) {
        const GroundTruthItem* best = nullptr;
        const Interval* best_iv = nullptr;
        for (const auto& gt : episode.gt_items) {
            if (gt.query_id != p->query_id || matched_gt.count(gt.id)) continue;
            const Interval* iv = gt.interval_containing(p->emit_frame);
            if (iv == nullptr) continue;
            if (best == nullptr || std::tie(iv->start, gt.id) < std::tie(best_iv->start, best->id)) {
                best = &gt;
                best_iv = iv;
            }
        }
        if (best != nullptr) {
            matched_gt.insert(best->id);
            pairs.push_back({best->id, p->id, *best_iv});
        }
    }

    MatchResult result;
    finish_result(episode, predictions, policy, pairs, result);
    return result;
}

// Candidate assignments are ranked by total score summed over pairs sorted
// by (gt_id, pred_id), then by pair count, then by the lexicographically
// smallest sorted pair list. The sort order of the summation is part of
// the contract so that independently written searches agree bit for bit.
struct Candidate {
    double total = 0.0;
    std::vector<std::pair<std::string, std::string>> ids;  // sorted (gt_id, pred_id)
};

Candidate make_candidate(const std::vector<Feasible>& chosen,
                         const std::vector<GroundTruthItem>& gts,
                         const std::vector<const Prediction*>& preds) {
    Candidate c;
    c.ids.reserve(chosen.size());
    std::vector<const Feasible*> sorted;
    sorted.reserve(chosen.size());
    for (const auto& f : chosen) sorted.push_back(&f);
    std::sort(sorted.begin(), sorted.end(), [&](const Feasible* a, const Feasible* b) {
        return std::tie(gts[a->gt_index].id, preds[a->pred_index]->id) <
               std::tie(gts[b->gt_index].id, preds[b->pred_index]->id);
    });
    for (const Feasible* f : sorted) {
        c.total += f->score;
        c.ids.emplace_back(gts[f->gt_index].id, preds[f->pred_index]->id);
    }
    return c;
}

bool better_candidate(const Candidate& a, const Candidate& b) {
    if (a.total != b.total) return a.total > b.total;
    if (a.ids.size() != b.ids.size()) return a.ids.size() > b.ids.size();
    return a.ids < b.ids;
}

// gt-major exhaustive search over one query's items.
struct OptimalSearch {
    const std::vector<GroundTruthItem>& gts;
    const std::vector<const Prediction*>& preds;
    const std::vector<std::vector<const Interval*>>& feasible;  // [gt][pred]
    const std::vector<std::vector<double>>& score;              // [gt][pred]
    std::uint64_t nodes = 0;

    std::vector<Feasible> current;
    std::vector<bool> pred_used;
    bool have_best = false;
    Candidate best;
    std::vector<Feasible> best_chosen;

    void run() {
        pred_used.assign(preds.size(), false);
        descend(0);
    }

    void descend(std::size_t gt_index) {
        if (++nodes > kNodeBudget)
            throw CapacityError("assignment search exceeded its node budget");
        if (gt_index == gts.size()) {
            Candidate cand = make_candidate(current, gts, preds);
            if (!have_best || better_candidate(cand, best)) {
                have_best = true;
                best = std::move(cand);
                best_chosen = current;
            }
            return;
        }
        descend(gt_index + 1);  // leave this gt unmatched
        for (std::size_t p = 0; p < preds.size(); ++p) {
            if (pred_used[p] || feasible[gt_index][p] == nullptr) continue;
            pred_used[p] = true;
            current.push_back({gt_index, p, *feasible[gt_index][p], score[gt_index][p]});
            descend(gt_index + 1);
            current.pop_back();
            pred_used[p] = false;
        }
    }
};

MatchResult optimal_match(const Episode& episode, const std::vector<Prediction>& predictions,
                          DuplicatePolicy policy, const PairScorer& scorer) {
    if (!scorer) throw ArgumentError("OptimalAssignment requires a pair scorer");

    std::vector<MatchPair> pairs;
    for (const auto& query : episode.queries) {
        std::vector<GroundTruthItem> gts;
        for (const auto& gt : episode.gt_items)
            if (gt.query_id == query.id) gts.push_back(gt);
        std::vector<const Prediction*> preds;
        for (const auto& p : predictions)
            if (p.query_id == query.id) preds.push_back(&p);
        if (gts.empty() || preds.empty()) continue;
        if (gts.size() > kSearchBound || preds.size() > kSearchBound)
            throw CapacityError("query '" + query.id + "' exceeds the assignment search bound of " +
                                std::to_string(kSearchBound));
        std::sort(gts.begin(), gts.end(),
                  [](const GroundTruthItem& a, const GroundTruthItem& b) { return a.id < b.id; });
        std::sort(preds.begin(), preds.end(),
                  [](const Prediction* a, const Prediction* b) { return a->id < b->id; });

        std::vector<std::vector<const Interval*>> feasible(
            gts.size(), std::vector<const Interval*>(preds.size(), nullptr));
        std::vector<std::vector<double>> score(gts.size(), std::vector<double>(preds.size(), 0.0));
        for (std::size_t g = 0; g < gts.size(); ++g) {
            for (std::size_t p = 0; p < preds.size(); ++p) {
                const Interval* iv = gts[g].interval_containing(preds[p]->emit_frame);
                if (iv == nullptr) continue;
                feasible[g][p] = iv;
                score[g][p] = scorer(gts[g], *preds[p], *iv);
            }
        }

        OptimalSearch search{gts, preds, feasible, score};
        search.run();
        for (const auto& f : search.best_chosen)
            pairs.push_back({gts[f.gt_index].id, preds[f.pred_index]->id, f.interval});
    }

    MatchResult result;
    finish_result(episode, predictions, policy, pairs, result);
    return result;
}

}  // namespace

MatchResult match(const Episode& episode, const std::vector<Prediction>& predictions,
                  const MatchConfig& config, const PairScorer& scorer) {
    check_predictions(episode, predictions);
    if (config.strategy == MatchStrategy::GreedyEarliest)
        return greedy_match(episode, predictions, config.duplicate_policy);
    return optimal_match(episode, predictions, config.duplicate_policy, scorer);
}

namespace {

// Prediction-major search, kept deliberately separate from OptimalSearch so
// the two act as cross-checks on each other.
struct BruteSearch {
    const Episode& episode;
    const std::vector<const Prediction*>& preds;
    const PairScorer& scorer;
    std::uint64_t nodes = 0;

    std::vector<std::pair<std::string, std::string>> current_ids;  // unsorted (gt, pred)
    std::map<std::pair<std::string, std::string>, std::pair<Interval, double>> pair_info;
    std::set<std::string> used_gt;
    bool have_best = false;
    Candidate best;
    std::vector<std::pair<std::string, std::string>> best_ids;

    void descend(std::size_t pred_index) {
        if (++nodes > kNodeBudget)
            throw CapacityError("assignment search exceeded its node budget");
        if (pred_index == preds.size()) {
            Candidate cand;
            cand.ids = current_ids;
            std::sort(cand.ids.begin(), cand.ids.end());
            for (const auto& key : cand.ids) cand.total += pair_info.at(key).second;
            if (!have_best || better_candidate(cand, best)) {
                have_best = true;
                best_ids = cand.ids;
                best = std::move(cand);
            }
            return;
        }
        const Prediction& p = *preds[pred_index];
        descend(pred_index + 1);  // leave this prediction unassigned
        for (const auto& gt : episode.gt_items) {
            if (gt.query_id != p.query_id || used_gt.count(gt.id)) continue;
            const Interval* iv = gt.interval_containing(p.emit_frame);
            if (iv == nullptr) continue;
            auto key = std::make_pair(gt.id, p.id);
            pair_info.emplace(key, std::make_pair(*iv, scorer(gt, p, *iv)));
            used_gt.insert(gt.id);
            current_ids.push_back(key);
            descend(pred_index + 1);
            current_ids.pop_back();
            used_gt.erase(gt.id);
        }
    }
};

}  // namespace

MatchResult brute_force_match(const Episode& episode, const std::vector<Prediction>& predictions,
                              const PairScorer& scorer, DuplicatePolicy duplicate_policy) {
    check_predictions(episode, predictions);
    if (!scorer) throw ArgumentError("brute_force_match requires a pair scorer");
    if (predictions.size() > kSearchBound || episode.gt_items.size() > kSearchBound)
        throw CapacityError("brute_force_match accepts at most " + std::to_string(kSearchBound) +
                            " predictions and gt items");

    std::vector<const Prediction*> preds;
    preds.reserve(predictions.size());
    for (const auto& p : predictions) preds.push_back(&p);
    std::sort(preds.begin(), preds.end(),
              [](const Prediction* a, const Prediction* b) { return a->id < b->id; });

    BruteSearch search{episode, preds, scorer};
    search.descend(0);

    std::vector<MatchPair> pairs;
    for (const auto& key : search.best_ids)
        pairs.push_back({key.first, key.second, search.pair_info.at(key).first});

    MatchResult result;
    finish_result(episode, predictions, duplicate_policy, pairs, result);
    return result;
}

double total_pair_score(const Episode& episode, const std::vector<Prediction>& predictions,
                        const MatchResult& result, const PairScorer& scorer) {
    double total = 0.0;
    for (const auto& pr : result.pairs) {  // pairs are already (gt_id, pred_id) sorted
        const GroundTruthItem* gt = episode.find_gt(pr.gt_id);
        if (gt == nullptr) throw ReferenceError("pair names unknown gt '" + pr.gt_id + "'");
        const Prediction* pred = nullptr;
        for (const auto& p : predictions)
            if (p.id == pr.prediction_id) pred = &p;
        if (pred == nullptr)
            throw ReferenceError("pair names unknown prediction '" + pr.prediction_id + "'");
        total += scorer(*gt, *pred, pr.matched_interval);
    }
    return total;
}

std::string to_string(MatchStrategy s) {
    return s == MatchStrategy::GreedyEarliest ? "greedy_earliest" : "optimal_assignment";
}

std::string to_string(DuplicatePolicy p) {
    return p == DuplicatePolicy::DuplicatesAreFP ? "duplicates_are_fp" : "ignore_duplicates";
}

void write_match_result_jsonl(const MatchResult& result, std::ostream& out) {
    for (const auto& pr : result.pairs) {
        Json j;
        j["kind"] = "pair";
        j["gt"] = pr.gt_id;
        j["pred"] = pr.prediction_id;
        j["interval"] = Json::array({pr.matched_interval.start, pr.matched_interval.end});
        out << j.dump() << '\n';
    }
    for (const auto& id : result.false_positives) {
        Json j;
        j["kind"] = "fp";
        j["pred"] = id;
        out << j.dump() << '\n';
    }
    for (const auto& id : result.false_negatives) {
        Json j;
        j["kind"] = "fn";
        j["gt"] = id;
        out << j.dump() << '\n';
    }
}

MatchResult read_match_result_jsonl(std::istream& in) {
    MatchResult result;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const std::exception& e) {
            throw ParseError(std::string("bad json: ") + e.what(), static_cast<std::int64_t>(line_no));
        }
        if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
            throw ParseError("record needs a string 'kind'", static_cast<std::int64_t>(line_no));
        const std::string kind = j["kind"].get<std::string>();
        auto need_string = [&](const char* key) {
            if (!j.contains(key) || !j[key].is_string())
                throw ParseError(std::string("'") + key + "' must be a string", static_cast<std::int64_t>(line_no));
            return j[key].get<std::string>();
        };
        if (kind == "pair") {
            MatchPair pr;
            pr.gt_id = need_string("gt");
            pr.prediction_id = need_string("pred");
            if (!j.contains("interval") || !j["interval"].is_array() || j["interval"].size() != 2 ||
                !j["interval"][0].is_number_integer() || !j["interval"][1].is_number_integer())
                throw ParseError("'interval' must be a two-integer array", static_cast<std::int64_t>(line_no));
            pr.matched_interval = {j["interval"][0].get<Frame>(), j["interval"][1].get<Frame>()};
            result.pairs.push_back(pr);
        } else if (kind == "fp") {
            result.false_positives.push_back(need_string("pred"));
        } else if (kind == "fn") {
            result.false_negatives.push_back(need_string("gt"));
        } else {
            throw ParseError("unknown record kind '" + kind + "'", static_cast<std::int64_t>(line_no));
        }
    }
    return result;
}

}  // namespace estp
