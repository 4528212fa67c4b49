#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "estp/core.hpp"
#include "estp/scoring.hpp"

namespace estp {

// One line of the per-task table. `row` is the task code for task rows,
// "All" for per-proactive-class rollups, "Overall" for the grand total.
struct TableRow {
    std::string row;
    std::optional<TaskType> task_type;
    std::optional<ProactiveType> proactive_type;
    std::int64_t gt_count = 0;
    double sum_s = 0.0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    double precision = 1.0;
    double recall = 1.0;
    double f1 = 1.0;

    bool operator==(const TableRow&) const = default;
};

struct TaskTable {
    std::vector<TableRow> rows;
    std::string config_hash;
    std::int64_t episode_count = 0;

    bool operator==(const TaskTable&) const = default;
};

// Pools (sum_s, fp, fn) per cell across episodes before applying the F1
// formula: a micro average, never a mean of per-episode F1 values. All
// reports must share one scorer configuration; differing hashes raise
// AggregationError naming them. An empty input yields a zero-row table.
TaskTable table_by_task(const std::vector<ScoreReport>& reports);

struct PrPoint {
    std::string label;
    double recall = 0.0;
    double precision = 0.0;

    bool operator==(const PrPoint&) const = default;
};

// One point per report, values copied verbatim. Duplicate labels raise
// AggregationError.
std::vector<PrPoint> pr_points(const std::vector<ScoreReport>& reports);

struct ApsPoint {
    std::string label;
    double aps = 0.0;
    double overall_f1 = 0.0;

    bool operator==(const ApsPoint&) const = default;
};

// Zips each report's label and F1 with its measured actions-per-second.
// Sizes must match; duplicate labels raise AggregationError.
std::vector<ApsPoint> aps_points(const std::vector<ScoreReport>& reports,
                                 const std::vector<double>& aps);

// CSV emitters with a fixed column order, floats at six significant digits:
//   table: row,task_type,proactive_type,gt_count,sum_s,fp,fn,precision,recall,f1
//   pr:    label,recall,precision
//   aps:   label,aps,overall_f1
// An empty table carries the marker line "# zero rows" under the header.
void write_table_csv(const TaskTable& table, std::ostream& out);
void write_pr_csv(const std::vector<PrPoint>& points, std::ostream& out);
void write_aps_csv(const std::vector<ApsPoint>& points, std::ostream& out);

Json table_to_json(const TaskTable& table);
Json pr_points_to_json(const std::vector<PrPoint>& points);
Json aps_points_to_json(const std::vector<ApsPoint>& points);

// Six-significant-digit decimal formatting shared by every CSV emitter.
std::string format_sig6(double value);

}  // namespace estp
