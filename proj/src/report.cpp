#include "estp/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>

namespace estp {

namespace {

struct Cell {
    std::int64_t gt_count = 0;
    double sum_s = 0.0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
};

TableRow finish_row(std::string name, std::optional<TaskType> task,
                    std::optional<ProactiveType> proactive, const Cell& cell) {
    TableRow row;
    row.row = std::move(name);
    row.task_type = task;
    row.proactive_type = proactive;
    row.gt_count = cell.gt_count;
    row.sum_s = cell.sum_s;
    row.fp = cell.fp;
    row.fn = cell.fn;
    fill_prf(cell.sum_s, cell.fp, cell.fn, row.precision, row.recall, row.f1);
    return row;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void ensure_unique_labels(const std::vector<ScoreReport>& reports) {
    std::set<std::string> seen;
    for (const auto& r : reports)
        if (!seen.insert(r.label).second)
            throw AggregationError("duplicate series label '" + r.label + "'");
}

}  // namespace

TaskTable table_by_task(const std::vector<ScoreReport>& reports) {
    TaskTable table;
    table.episode_count = static_cast<std::int64_t>(reports.size());
    if (reports.empty()) return table;

    std::set<std::string> hashes;
    for (const auto& r : reports) hashes.insert(r.config_hash);
    if (hashes.size() > 1) {
        std::string list;
        for (const auto& h : hashes) {
            if (!list.empty()) list += ", ";
            list += h;
        }
        throw AggregationError("reports mix scorer configurations: " + list);
    }
    table.config_hash = *hashes.begin();

    std::map<TaskType, Cell> by_task;
    std::map<ProactiveType, Cell> by_class;
    Cell overall;
    for (const auto& r : reports) {
        for (const auto& [task, g] : r.per_task) {
            auto& cell = by_task[task];
            cell.gt_count += g.gt_count;
            cell.sum_s += g.sum_s;
            cell.fp += g.fp;
            cell.fn += g.fn;
        }
        for (const auto& [cls, g] : r.per_proactive) {
            auto& cell = by_class[cls];
            cell.gt_count += g.gt_count;
            cell.sum_s += g.sum_s;
            cell.fp += g.fp;
            cell.fn += g.fn;
        }
        overall.gt_count += r.gt_count;
        overall.sum_s += r.sum_s;
        overall.fp += r.fp;
        overall.fn += r.fn;
    }

    for (TaskType task : kAllTaskTypes) {
        auto it = by_task.find(task);
        if (it == by_task.end()) continue;
        table.rows.push_back(
            finish_row(to_string(task), task, proactive_class_of(task), it->second));
    }
    for (ProactiveType cls : kAllProactiveTypes) {
        auto it = by_class.find(cls);
        if (it == by_class.end()) continue;
        table.rows.push_back(finish_row("All", std::nullopt, cls, it->second));
    }
    table.rows.push_back(finish_row("Overall", std::nullopt, std::nullopt, overall));
    return table;
}

std::vector<PrPoint> pr_points(const std::vector<ScoreReport>& reports) {
    ensure_unique_labels(reports);
    std::vector<PrPoint> points;
    points.reserve(reports.size());
    for (const auto& r : reports) points.push_back({r.label, r.recall, r.precision});
    return points;
}

std::vector<ApsPoint> aps_points(const std::vector<ScoreReport>& reports,
                                 const std::vector<double>& aps) {
    if (reports.size() != aps.size())
        throw ArgumentError("aps series needs one measurement per report (" +
                            std::to_string(reports.size()) + " reports, " +
                            std::to_string(aps.size()) + " measurements)");
    ensure_unique_labels(reports);
    std::vector<ApsPoint> points;
    points.reserve(reports.size());
    for (std::size_t i = 0; i < reports.size(); ++i)
        points.push_back({reports[i].label, aps[i], reports[i].estp_f1});
    return points;
}

std::string format_sig6(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", value);
    return buf;
}

void write_table_csv(const TaskTable& table, std::ostream& out) {
    out << "row,task_type,proactive_type,gt_count,sum_s,fp,fn,precision,recall,f1\n";
    if (table.rows.empty()) {
        out << "# zero rows\n";
        return;
    }
    for (const auto& row : table.rows) {
        out << csv_escape(row.row) << ','
            << (row.task_type ? to_string(*row.task_type) : "") << ','
            << (row.proactive_type ? to_string(*row.proactive_type) : "") << ','
            << row.gt_count << ',' << format_sig6(row.sum_s) << ',' << row.fp << ',' << row.fn
            << ',' << format_sig6(row.precision) << ',' << format_sig6(row.recall) << ','
            << format_sig6(row.f1) << "\n";
    }
}

void write_pr_csv(const std::vector<PrPoint>& points, std::ostream& out) {
    out << "label,recall,precision\n";
    for (const auto& p : points)
        out << csv_escape(p.label) << ',' << format_sig6(p.recall) << ','
            << format_sig6(p.precision) << "\n";
}

void write_aps_csv(const std::vector<ApsPoint>& points, std::ostream& out) {
    out << "label,aps,overall_f1\n";
    for (const auto& p : points)
        out << csv_escape(p.label) << ',' << format_sig6(p.aps) << ','
            << format_sig6(p.overall_f1) << "\n";
}

Json table_to_json(const TaskTable& table) {
    Json j;
    j["kind"] = "task_table";
    j["config_hash"] = table.config_hash;
    j["episode_count"] = table.episode_count;
    j["empty"] = table.rows.empty();
    // a false positive counts once per distinct class among its query's gt
    // items, so task cells can multi-count what Overall counts once
    j["fp_attribution"] = "per distinct task and proactive class of the query";
    j["rows"] = Json::array();
    for (const auto& row : table.rows) {
        Json r;
        r["row"] = row.row;
        r["task_type"] = row.task_type ? Json(to_string(*row.task_type)) : Json(nullptr);
        r["proactive_type"] =
            row.proactive_type ? Json(to_string(*row.proactive_type)) : Json(nullptr);
        r["gt_count"] = row.gt_count;
        r["sum_s"] = row.sum_s;
        r["fp"] = row.fp;
        r["fn"] = row.fn;
        r["precision"] = row.precision;
        r["recall"] = row.recall;
        r["f1"] = row.f1;
        j["rows"].push_back(std::move(r));
    }
    return j;
}

Json pr_points_to_json(const std::vector<PrPoint>& points) {
    Json j;
    j["kind"] = "pr_series";
    j["points"] = Json::array();
    for (const auto& p : points) {
        Json item;
        item["label"] = p.label;
        item["recall"] = p.recall;
        item["precision"] = p.precision;
        j["points"].push_back(std::move(item));
    }
    return j;
}

Json aps_points_to_json(const std::vector<ApsPoint>& points) {
    Json j;
    j["kind"] = "aps_series";
    j["points"] = Json::array();
    for (const auto& p : points) {
        Json item;
        item["label"] = p.label;
        item["aps"] = p.aps;
        item["overall_f1"] = p.overall_f1;
        j["points"].push_back(std::move(item));
    }
    return j;
}

}  // namespace estp
