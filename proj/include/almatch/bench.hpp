#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "almatch/dataio.hpp"
#include "almatch/engine.hpp"

namespace almatch {

struct ExperimentMatrix {
    std::vector<std::filesystem::path> datasets;
    std::vector<Strategy> strategies{Strategy::hybrid};
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    ToolkitConfig config;
    bool pruning = true;
    SeedingMode seeding = SeedingMode::lwcr;
    std::optional<DatasetScale> scale;
    /// Cells run on this many threads; results do not depend on it.
    std::size_t jobs = 1;

    /// Throws ConfigError when a list is empty.
    void validate() const;
};

struct CellSpec {
    Strategy strategy = Strategy::hybrid;
    std::uint64_t seed = 0;
    bool pruning = true;
    SeedingMode seeding = SeedingMode::lwcr;
};

struct CellResult {
    ReportRow row;
    std::vector<double> history;
    std::vector<QueryRecord> trace;
};

/// One full simulated-oracle session. Failures come back as a row with the
/// error column set.
CellResult run_cell(const std::shared_ptr<const DatasetBundle>& data, const ToolkitConfig& config,
                    const CellSpec& cell, std::optional<DatasetScale> scale = std::nullopt);

/// Every (dataset, strategy, seed) cell; rows in report order.
std::vector<ReportRow> run_strategy_comparison(const ExperimentMatrix& matrix);

/// Paired pruned and unpruned runs per (dataset, strategy, seed).
std::vector<ReportRow> run_pruning_ablation(const ExperimentMatrix& matrix);

struct CurvePoint {
    std::size_t iteration = 0;
    SeedingMode seeding = SeedingMode::lwcr;
    double mean_f1 = 0.0;
    double stddev = 0.0;  // population standard deviation over seeds
};

/// Per-iteration validation F1 for LWCR and random seeding, averaged over
/// seeds (and datasets). A session that stopped early contributes its last
/// value to later iterations.
std::vector<CurvePoint> run_initpool_ablation(const ExperimentMatrix& matrix);
std::vector<CurvePoint> average_curves(std::span<const std::vector<double>> histories, SeedingMode seeding);

/// iteration,seeding_mode,mean_f1,stddev
std::string curves_csv(std::span<const CurvePoint> points);

// ---- synthetic fixtures ---------------------------------------------------

enum class FixtureDomain : std::uint8_t { restaurants, beers };

struct FixtureSpec {
    std::string name;
    FixtureDomain domain = FixtureDomain::restaurants;
    std::size_t pairs = 946;
    std::size_t matches = 110;
    /// Matches whose records share almost nothing (heavy renaming and missing
    /// values). They are placed in the training split only.
    std::size_t noise_matches = 0;
    /// Fraction of mismatches drawn from look-alike records (same name
    /// family or same city and cuisine) rather than at random.
    double hard_negative_rate = 0.0;
    /// Probability of each per-attribute perturbation on a matched copy.
    double typo_rate = 0.25;
    /// Restaurants only: include the shared `class` entity key column, which
    /// makes matching nearly trivial.
    bool entity_key = true;
    std::uint64_t seed = 7;
};

/// The fixtures committed under data/: a separable restaurant set shaped
/// like the public Fodors-Zagats benchmark (946 pairs, 110 matches, 6
/// attributes) and two noisy sets.
std::vector<FixtureSpec> bundled_fixtures();
std::optional<FixtureSpec> find_fixture(std::string_view name);

std::shared_ptr<DatasetBundle> make_fixture(const FixtureSpec& spec);

}  // namespace almatch
