#include <algorithm>
#include <cstdio>
#include <tuple>

#include "json_codec.hpp"

namespace almatch {

using detail::Json;

std::string format_decimal(double value, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, value);
    return buf;
}

namespace {

int strategy_order(const std::string& name) {
    if (const auto s = parse_strategy(name)) return static_cast<int>(*s);
    return 100;
}

}  // namespace

std::vector<ReportRow> sorted_report(std::vector<ReportRow> rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
        const auto ka = std::make_tuple(std::cref(a.dataset), strategy_order(a.strategy), std::cref(a.strategy), a.seed,
                                        !a.pruning, std::cref(a.seeding));
        const auto kb = std::make_tuple(std::cref(b.dataset), strategy_order(b.strategy), std::cref(b.strategy), b.seed,
                                        !b.pruning, std::cref(b.seeding));
        return ka < kb;
    });
    return rows;
}

std::string report_csv(std::span<const ReportRow> rows, const ReportOptions& options) {
    std::string out =
        "dataset,strategy,seed,pruning,seeding,f1,labels,iterations,stop_reason,retained_pairs,removed_matches";
    if (options.include_timing) out += ",wall_time_s";
    out += ",error\n";
    for (const auto& r : sorted_report({rows.begin(), rows.end()})) {
        out += csv_escape(r.dataset) + "," + csv_escape(r.strategy) + "," + std::to_string(r.seed) + "," +
               (r.pruning ? "on" : "off") + "," + csv_escape(r.seeding) + "," + format_decimal(r.f1) + "," +
               std::to_string(r.labels) + "," + std::to_string(r.iterations) + "," + r.stop_reason + "," +
               std::to_string(r.retained_pairs) + "," + std::to_string(r.removed_matches);
        if (options.include_timing) out += "," + format_decimal(r.wall_time_s, 3);
        out += "," + (r.error.empty() ? std::string() : csv_escape(r.error)) + "\n";
    }
    return out;
}

void write_report(std::span<const ReportRow> rows, const std::filesystem::path& path, const ReportOptions& options) {
    write_file_atomic(path, report_csv(rows, options));
}

std::string labeled_pool_csv(const Session& session) {
    std::string out = "pair_id,ltable_id,rtable_id,label,round\n";
    for (const auto& e : session.state().labeled) {
        const auto& p = session.train_pair(e.pair);
        out += std::to_string(e.pair) + "," + csv_escape(p.left->id) + "," + csv_escape(p.right->id) + "," +
               (e.label == Label::match ? "1" : "0") + "," + std::to_string(e.round) + "\n";
    }
    return out;
}

std::string final_report_json(const Session& session) {
    const auto r = session.final_report();
    Json j;
    j["dataset"] = session.dataset().name;
    j["strategy"] = std::string(to_string(session.config().strategy));
    j["status"] = std::string(to_string(session.state().status));
    j["stop_reason"] = std::string(to_string(r.stop_reason));
    j["labels"] = r.labels;
    j["iterations"] = r.iterations;
    j["history"] = r.history;
    if (r.best) {
        j["best"] = Json{{"member", r.best->member},
                         {"classifier", r.best_kind ? std::string(to_string(*r.best_kind)) : std::string()},
                         {"iteration", r.best->iteration},
                         {"f1", r.best->f1},
                         {"pool_size", r.best->pool_size}};
        j["test"] = detail::eval_to_json(r.test);
    } else {
        j["best"] = nullptr;
        j["test"] = nullptr;
    }
    j["prune"] = Json{{"threshold", r.prune.threshold},
                      {"retained", r.prune.retained},
                      {"removed", r.prune.removed},
                      {"retained_matches", r.prune.retained_matches},
                      {"removed_matches", r.prune.removed_matches}};
    return j.dump(2) + "\n";
}

}  // namespace almatch
