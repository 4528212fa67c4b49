#pragma once

// Shared fixtures: a small episode builder and an in-process judge server.

#include <atomic>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "estp/core.hpp"

namespace estp::test {

inline Query mk_query(std::string id, Frame issue, std::vector<std::string> refs = {}) {
    Query q;
    q.id = std::move(id);
    q.content = "what is happening";
    q.issue_frame = issue;
    q.context_refs = std::move(refs);
    return q;
}

inline GroundTruthItem mk_gt(std::string id, std::string query_id, std::string content,
                             std::vector<Interval> intervals, TaskType task = TaskType::OR) {
    GroundTruthItem g;
    g.id = std::move(id);
    g.query_id = std::move(query_id);
    g.content = std::move(content);
    g.intervals = std::move(intervals);
    g.task_type = task;
    g.proactive_type = proactive_class_of(task);
    return g;
}

inline Prediction mk_pred(std::string id, std::string query_id, std::string content, Frame frame) {
    Prediction p;
    p.id = std::move(id);
    p.query_id = std::move(query_id);
    p.content = std::move(content);
    p.emit_frame = frame;
    return p;
}

inline Episode mk_episode(std::string id, Frame num_frames, std::vector<Query> queries,
                          std::vector<GroundTruthItem> gts) {
    Episode e;
    e.id = std::move(id);
    e.timeline.num_frames = num_frames;
    e.queries = std::move(queries);
    e.gt_items = std::move(gts);
    return e;
}

// Serves one POST route on a random port; the handler receives the parsed
// request body and returns the response body. Counts requests.
class LocalServer {
public:
    using Handler = std::function<std::string(const Json&)>;

    LocalServer(const std::string& path, Handler handler) : handler_(std::move(handler)) {
        server_.Post(path, [this](const httplib::Request& req, httplib::Response& res) {
            ++hits_;
            Json body = Json::parse(req.body, nullptr, false);
            std::string out = handler_(body);
            if (out.empty()) {
                res.status = 500;
                res.set_content("boom", "text/plain");
            } else {
                res.set_content(out, "application/json");
            }
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~LocalServer() {
        server_.stop();
        thread_.join();
    }

    int port() const { return port_; }
    std::string url(const std::string& path) const {
        return "http://127.0.0.1:" + std::to_string(port_) + path;
    }
    int hits() const { return hits_.load(); }

private:
    Handler handler_;
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
    std::atomic<int> hits_{0};
};

}  // namespace estp::test
