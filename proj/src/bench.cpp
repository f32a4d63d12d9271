#include "almatch/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <thread>

namespace almatch {

void ExperimentMatrix::validate() const {
    if (datasets.empty()) throw ConfigError("datasets", "at least one dataset is required");
    if (strategies.empty()) throw ConfigError("strategies", "at least one strategy is required");
    if (seeds.empty()) throw ConfigError("seeds", "at least one seed is required");
}

CellResult run_cell(const std::shared_ptr<const DatasetBundle>& data, const ToolkitConfig& config,
                    const CellSpec& cell, std::optional<DatasetScale> scale) {
    const auto start = std::chrono::steady_clock::now();
    CellResult result;
    auto& row = result.row;
    row.dataset = data ? data->name : std::string();
    row.strategy = std::string(to_string(cell.strategy));
    row.seed = cell.seed;
    row.pruning = cell.pruning;
    row.seeding = std::string(to_string(cell.seeding));
    try {
        ToolkitConfig c = config;
        if (scale) c.scale = scale;
        SessionConfig sc = resolve_config(c, *data);
        sc.strategy = cell.strategy;
        sc.seed = cell.seed;
        sc.pruning = cell.pruning;
        sc.seeding = cell.seeding;
        Session session(data, sc);
        SimulatedOracle oracle;
        session.run_to_completion(oracle);
        const auto report = session.final_report();
        row.f1 = report.test.f1;
        row.labels = report.labels;
        row.iterations = report.iterations;
        row.stop_reason = std::string(to_string(report.stop_reason));
        row.retained_pairs = report.prune.retained;
        row.removed_matches = report.prune.removed_matches;
        result.history = report.history;
        result.trace = session.state().queries;
    } catch (const std::exception& e) {
        row.error = e.what();
    }
    row.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

namespace {

struct Job {
    std::size_t dataset = 0;
    CellSpec cell;
};

// Runs jobs on up to `threads` workers; results land in job order.
std::vector<CellResult> run_jobs(const std::vector<std::shared_ptr<const DatasetBundle>>& data,
                                 const std::vector<std::string>& load_errors, const std::vector<std::string>& names,
                                 const std::vector<Job>& jobs, const ExperimentMatrix& matrix) {
    std::vector<CellResult> results(jobs.size());
    auto work = [&](std::size_t i) {
        const auto& job = jobs[i];
        if (!data[job.dataset]) {
            auto& row = results[i].row;
            row.dataset = names[job.dataset];
            row.strategy = std::string(to_string(job.cell.strategy));
            row.seed = job.cell.seed;
            row.pruning = job.cell.pruning;
            row.seeding = std::string(to_string(job.cell.seeding));
            row.error = load_errors[job.dataset];
            return;
        }
        results[i] = run_cell(data[job.dataset], matrix.config, job.cell, matrix.scale);
    };
    const std::size_t threads = std::max<std::size_t>(1, std::min(matrix.jobs, jobs.size()));
    if (threads == 1) {
        for (std::size_t i = 0; i < jobs.size(); ++i) work(i);
        return results;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < jobs.size(); i = next++) work(i);
        });
    }
    for (auto& th : pool) th.join();
    return results;
}

struct LoadedData {
    std::vector<std::shared_ptr<const DatasetBundle>> data;
    std::vector<std::string> errors;
    std::vector<std::string> names;
};

LoadedData load_all(const ExperimentMatrix& matrix) {
    LoadedData out;
    for (const auto& path : matrix.datasets) {
        out.names.push_back(path.lexically_normal().filename().string());
        try {
            out.data.push_back(load_dataset(path));
            out.errors.emplace_back();
        } catch (const std::exception& e) {
            out.data.push_back(nullptr);
            out.errors.emplace_back(e.what());
        }
    }
    return out;
}

std::vector<ReportRow> rows_of(std::vector<CellResult> results) {
    std::vector<ReportRow> rows;
    rows.reserve(results.size());
    for (auto& r : results) rows.push_back(std::move(r.row));
    return sorted_report(std::move(rows));
}

}  // namespace

std::vector<ReportRow> run_strategy_comparison(const ExperimentMatrix& matrix) {
    matrix.validate();
    const auto loaded = load_all(matrix);
    std::vector<Job> jobs;
    for (std::size_t d = 0; d < matrix.datasets.size(); ++d) {
        for (auto s : matrix.strategies) {
            for (auto seed : matrix.seeds) jobs.push_back({d, {s, seed, matrix.pruning, matrix.seeding}});
        }
    }
    return rows_of(run_jobs(loaded.data, loaded.errors, loaded.names, jobs, matrix));
}

std::vector<ReportRow> run_pruning_ablation(const ExperimentMatrix& matrix) {
    matrix.validate();
    const auto loaded = load_all(matrix);
    std::vector<Job> jobs;
    for (std::size_t d = 0; d < matrix.datasets.size(); ++d) {
        for (auto s : matrix.strategies) {
            for (auto seed : matrix.seeds) {
                jobs.push_back({d, {s, seed, true, matrix.seeding}});
                jobs.push_back({d, {s, seed, false, matrix.seeding}});
            }
        }
    }
    return rows_of(run_jobs(loaded.data, loaded.errors, loaded.names, jobs, matrix));
}

std::vector<CurvePoint> average_curves(std::span<const std::vector<double>> histories, SeedingMode seeding) {
    std::size_t length = 0;
    for (const auto& h : histories) length = std::max(length, h.size());
    std::vector<CurvePoint> out;
    if (histories.empty()) return out;
    for (std::size_t it = 0; it < length; ++it) {
        double sum = 0.0;
        std::vector<double> values;
        values.reserve(histories.size());
        for (const auto& h : histories) {
            const double v = h.empty() ? 0.0 : h[std::min(it, h.size() - 1)];
            values.push_back(v);
            sum += v;
        }
        const double mean = sum / static_cast<double>(values.size());
        // Pairwise form, so identical runs give exactly zero.
        out.push_back({it, seeding, mean, std::sqrt(var_prob(values))});
    }
    return out;
}

std::vector<CurvePoint> run_initpool_ablation(const ExperimentMatrix& matrix) {
    matrix.validate();
    const auto loaded = load_all(matrix);
    std::vector<Job> jobs;
    const Strategy strategy = matrix.strategies.front();
    for (auto mode : {SeedingMode::lwcr, SeedingMode::random}) {
        for (std::size_t d = 0; d < matrix.datasets.size(); ++d) {
            for (auto seed : matrix.seeds) jobs.push_back({d, {strategy, seed, matrix.pruning, mode}});
        }
    }
    const auto results = run_jobs(loaded.data, loaded.errors, loaded.names, jobs, matrix);
    std::vector<CurvePoint> out;
    for (auto mode : {SeedingMode::lwcr, SeedingMode::random}) {
        std::vector<std::vector<double>> histories;
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            if (jobs[i].cell.seeding != mode) continue;
            if (!results[i].row.error.empty()) throw std::runtime_error(results[i].row.error);
            histories.push_back(results[i].history);
        }
        const auto curve = average_curves(histories, mode);
        out.insert(out.end(), curve.begin(), curve.end());
    }
    return out;
}

std::string curves_csv(std::span<const CurvePoint> points) {
    std::string out = "iteration,seeding_mode,mean_f1,stddev\n";
    for (const auto& p : points) {
        out += std::to_string(p.iteration) + "," + std::string(to_string(p.seeding)) + "," +
               format_decimal(p.mean_f1) + "," + format_decimal(p.stddev) + "\n";
    }
    return out;
}

}  // namespace almatch
