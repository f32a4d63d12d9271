#include <httplib.h>

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <optional>

#include "almatch/bench.hpp"
#include "almatch/service.hpp"

using namespace almatch;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> strategy_names() {
    std::vector<std::string> names;
    for (auto s : {Strategy::entropy, Strategy::ave_entropy, Strategy::var_entropy, Strategy::var_prob,
                   Strategy::hybrid, Strategy::random}) {
        names.emplace_back(to_string(s));
    }
    return names;
}

struct MatrixFlags {
    std::vector<std::string> datasets;
    std::string config;
    std::vector<std::string> strategies{"hybrid"};
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::string out;
    std::size_t jobs = 1;
    bool no_timing = false;
    bool no_prune = false;
    std::string seeding = "lwcr";
    std::string scale;
};

void add_matrix_flags(CLI::App& cmd, MatrixFlags& f, bool multi_strategy) {
    cmd.add_option("--dataset", f.datasets, "Dataset directory (tableA.csv, tableB.csv, train/valid/test.csv); repeatable")
        ->required()
        ->check(CLI::ExistingDirectory);
    cmd.add_option("--config", f.config, "JSON configuration file")->check(CLI::ExistingFile);
    auto* s = cmd.add_option("--strategy", f.strategies,
                             multi_strategy ? "Query strategies, comma separated" : "Query strategy")
                  ->check(CLI::IsMember(strategy_names()))
                  ->capture_default_str();
    if (multi_strategy) {
        s->delimiter(',');
    } else {
        s->expected(1);
    }
    cmd.add_option("--seeds", f.seeds, "Seeds, comma separated")->delimiter(',')->capture_default_str();
    cmd.add_option("--jobs", f.jobs, "Cells to run in parallel")->check(CLI::PositiveNumber)->capture_default_str();
    cmd.add_option("--seeding", f.seeding, "Initial pool selection")
        ->check(CLI::IsMember({"lwcr", "random"}))
        ->capture_default_str();
    cmd.add_option("--scale", f.scale, "Force small (N=6, n=4) or large (N=50, n=20) pool sizes")
        ->check(CLI::IsMember({"small", "large"}));
}

ExperimentMatrix build_matrix(const MatrixFlags& f) {
    ExperimentMatrix m;
    for (const auto& d : f.datasets) m.datasets.emplace_back(d);
    if (!f.config.empty()) m.config = parse_config(f.config);
    m.strategies.clear();
    for (const auto& s : f.strategies) m.strategies.push_back(*parse_strategy(s));
    m.seeds = f.seeds;
    m.jobs = f.jobs;
    m.pruning = !f.no_prune;
    m.seeding = *parse_seeding_mode(f.seeding);
    if (f.scale == "small") m.scale = DatasetScale::small;
    if (f.scale == "large") m.scale = DatasetScale::large;
    return m;
}

void emit(const std::string& text, const std::string& out) {
    if (out.empty()) {
        std::cout << text;
    } else {
        write_file_atomic(out, text);
    }
}

int finish_report(const std::vector<ReportRow>& rows, const MatrixFlags& f, const ExperimentMatrix& m) {
    std::string out = f.out.empty() ? m.config.report_path : f.out;
    emit(report_csv(rows, {.include_timing = !f.no_timing}), out);
    std::size_t failed = 0;
    for (const auto& r : rows) {
        if (r.error.empty()) continue;
        ++failed;
        std::cerr << "cell " << r.dataset << "/" << r.strategy << "/seed " << r.seed << " failed: " << r.error << "\n";
    }
    if (failed) {
        std::cerr << failed << " of " << rows.size() << " cells failed\n";
        return 1;
    }
    return 0;
}

struct SessionFlags {
    std::string dataset;
    std::string config;
    std::optional<std::string> strategy;
    std::optional<std::uint64_t> seed;
    std::string export_dir;
};

int run_session(const SessionFlags& f) {
    auto data = load_dataset(f.dataset);
    ToolkitConfig tc = f.config.empty() ? ToolkitConfig{} : parse_config(f.config);
    SessionConfig config = resolve_config(tc, *data);
    if (f.strategy) config.strategy = *parse_strategy(*f.strategy);
    if (f.seed) config.seed = *f.seed;
    Session session(data, config);
    SimulatedOracle oracle;
    session.run_to_completion(oracle);
    const auto report = session.final_report();
    std::printf("dataset: %s\n", data->name.c_str());
    std::printf("strategy: %s\n", std::string(to_string(config.strategy)).c_str());
    std::printf("test_f1: %s\n", format_decimal(report.test.f1).c_str());
    std::printf("labels: %zu\n", report.labels);
    std::printf("iterations: %zu\n", report.iterations);
    std::printf("stop_reason: %s\n", std::string(to_string(report.stop_reason)).c_str());
    if (report.best_kind) {
        std::printf("best_member: %s (iteration %zu, validation f1 %s)\n",
                    std::string(to_string(*report.best_kind)).c_str(), report.best->iteration,
                    format_decimal(report.best->f1).c_str());
    }
    std::printf("pruned: %zu pairs removed, %zu matches removed\n", report.prune.removed,
                report.prune.removed_matches);

    const std::string dir = f.export_dir.empty() ? tc.snapshot_dir : f.export_dir;
    if (!dir.empty()) {
        fs::create_directories(dir);
        write_file_atomic(fs::path(dir) / "labeled_pool.csv", labeled_pool_csv(session));
        write_file_atomic(fs::path(dir) / "report.json", final_report_json(session));
        SessionSnapshot snap{"cli", data->name, utc_timestamp(), session.config(), session.state()};
        save_snapshot(snap, fs::path(dir) / "session.snapshot.json");
    }
    return 0;
}

struct ServeFlags {
    std::vector<std::string> datasets;
    std::string data_dir;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string snapshot_dir;
};

int serve(const ServeFlags& f) {
    SessionService service({.snapshot_dir = f.snapshot_dir});
    std::vector<fs::path> dirs(f.datasets.begin(), f.datasets.end());
    if (!f.data_dir.empty()) {
        std::vector<fs::path> found;
        for (const auto& e : fs::directory_iterator(f.data_dir)) {
            if (e.is_directory() && fs::exists(e.path() / "tableA.csv")) found.push_back(e.path());
        }
        std::sort(found.begin(), found.end());
        dirs.insert(dirs.end(), found.begin(), found.end());
    }
    if (dirs.empty()) throw std::runtime_error("no datasets to serve; pass --dataset or --data-dir");
    for (const auto& d : dirs) {
        service.register_dataset(load_dataset(d));
        std::cerr << "registered dataset " << d.filename().string() << "\n";
    }
    for (const auto& problem : service.restore_sessions()) std::cerr << "skipped snapshot " << problem << "\n";
    if (service.session_count()) std::cerr << "restored " << service.session_count() << " sessions\n";

    httplib::Server server;
    bind_routes(server, service);
    int port = f.port;
    if (port == 0) {
        port = server.bind_to_any_port(f.host);
    } else if (!server.bind_to_port(f.host, port)) {
        throw std::runtime_error("cannot bind " + f.host + ":" + std::to_string(port));
    }
    if (port < 0) throw std::runtime_error("cannot bind " + f.host);
    std::cout << "listening on http://" << f.host << ":" << port << std::endl;
    return server.listen_after_bind() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Active-learning entity matching: benchmarks, ablations, simulated and interactive sessions"};
    app.require_subcommand(1);

    MatrixFlags bench_flags;
    auto* bench = app.add_subcommand("bench", "Run the strategy comparison matrix and write a report CSV");
    add_matrix_flags(*bench, bench_flags, true);
    bench->add_option("--out", bench_flags.out, "Report CSV path (default: stdout)");
    bench->add_flag("--no-timing", bench_flags.no_timing, "Omit the wall_time_s column");
    bench->add_flag("--no-prune", bench_flags.no_prune, "Disable LWCR pruning of the training split");

    MatrixFlags prune_flags;
    auto* ablate_prune = app.add_subcommand("ablate-prune", "Paired pruned/unpruned runs per cell");
    add_matrix_flags(*ablate_prune, prune_flags, true);
    ablate_prune->add_option("--out", prune_flags.out, "Report CSV path (default: stdout)");
    ablate_prune->add_flag("--no-timing", prune_flags.no_timing, "Omit the wall_time_s column");

    MatrixFlags init_flags;
    init_flags.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    auto* ablate_init = app.add_subcommand("ablate-init", "Validation F1 curves for LWCR vs random initial pools");
    add_matrix_flags(*ablate_init, init_flags, false);
    ablate_init->add_option("--out", init_flags.out, "Curves CSV path (default: stdout)");
    ablate_init->add_flag("--no-prune", init_flags.no_prune, "Disable LWCR pruning of the training split");

    auto* session = app.add_subcommand("session", "Single sessions");
    session->require_subcommand(1);
    SessionFlags session_flags;
    auto* run = session->add_subcommand("run", "Run one session against the ground-truth labels and print the result");
    run->add_option("--dataset", session_flags.dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    run->add_option("--config", session_flags.config, "JSON configuration file")->check(CLI::ExistingFile);
    run->add_option("--strategy", session_flags.strategy, "Override the configured query strategy")
        ->check(CLI::IsMember(strategy_names()));
    run->add_option("--seed", session_flags.seed, "Override the configured seed");
    run->add_option("--export", session_flags.export_dir,
                    "Write labeled_pool.csv, report.json and session.snapshot.json here");

    ServeFlags serve_flags;
    auto* serve_cmd = app.add_subcommand("serve", "HTTP labeling service");
    serve_cmd->add_option("--dataset", serve_flags.datasets, "Dataset directory to register; repeatable")
        ->check(CLI::ExistingDirectory);
    serve_cmd->add_option("--data-dir", serve_flags.data_dir, "Register every dataset directory under this path")
        ->check(CLI::ExistingDirectory);
    serve_cmd->add_option("--host", serve_flags.host, "Listen address")->capture_default_str();
    serve_cmd->add_option("--port", serve_flags.port, "Listen port; 0 picks a free port")
        ->check(CLI::Range(0, 65535))
        ->capture_default_str();
    serve_cmd->add_option("--snapshot-dir", serve_flags.snapshot_dir,
                          "Persist sessions here and reload them on start");

    std::vector<std::string> fixture_names;
    std::string fixture_out = "data";
    auto* fixture = app.add_subcommand("fixture", "Write the bundled synthetic datasets");
    std::vector<std::string> known;
    for (const auto& f : bundled_fixtures()) known.push_back(f.name);
    fixture->add_option("--name", fixture_names, "Fixture to write; repeatable (default: all)")
        ->check(CLI::IsMember(known));
    fixture->add_option("--out", fixture_out, "Parent directory; each fixture goes to <out>/<name>")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*bench) {
            const auto m = build_matrix(bench_flags);
            return finish_report(run_strategy_comparison(m), bench_flags, m);
        }
        if (*ablate_prune) {
            const auto m = build_matrix(prune_flags);
            return finish_report(run_pruning_ablation(m), prune_flags, m);
        }
        if (*ablate_init) {
            const auto m = build_matrix(init_flags);
            emit(curves_csv(run_initpool_ablation(m)), init_flags.out);
            return 0;
        }
        if (*run) return run_session(session_flags);
        if (*serve_cmd) return serve(serve_flags);
        if (*fixture) {
            if (fixture_names.empty()) fixture_names = known;
            for (const auto& name : fixture_names) {
                const auto data = make_fixture(*find_fixture(name));
                save_dataset(*data, fs::path(fixture_out) / name);
                std::cout << "wrote " << (fs::path(fixture_out) / name).string() << " (" << data->train.size() << "/"
                          << data->valid.size() << "/" << data->test.size() << " pairs)\n";
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
