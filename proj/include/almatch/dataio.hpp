#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "almatch/dataset.hpp"
#include "almatch/engine.hpp"

namespace almatch {

// ---- CSV ------------------------------------------------------------------

/// An unquoted empty field reads as missing; a quoted "" is an empty string.
using CsvField = std::optional<std::string>;

struct CsvRow {
    std::size_t line = 0;  // 1-based line on which the record starts
    std::vector<CsvField> fields;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<CsvRow> rows;

    /// Column index for a header name, or std::nullopt.
    std::optional<std::size_t> column(std::string_view name) const;
};

class CsvError : public std::runtime_error {
public:
    CsvError(std::size_t line, const std::string& message)
        : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Comma-separated, double-quote quoting, CRLF or LF line ends, header row
/// required. Blank lines are ignored. Every row must have as many fields as
/// the header.
CsvTable parse_csv(std::string_view text);

/// Quotes the field when it contains a comma, quote, CR or LF, or is empty.
std::string csv_escape(std::string_view field);
/// Writes a missing value as an unquoted empty field.
std::string csv_escape_field(const CsvField& field);

// ---- datasets -------------------------------------------------------------

enum class DataErrorKind : std::uint8_t {
    missing_file,
    unresolvable_id,
    malformed_row,
    duplicate_id,
    header_mismatch,
    overlapping_splits,
};

std::string_view to_string(DataErrorKind kind);

class DataError : public std::runtime_error {
public:
    DataError(DataErrorKind kind, std::string file, std::size_t line, const std::string& message);
    DataErrorKind kind() const { return kind_; }
    const std::string& file() const { return file_; }
    std::size_t line() const { return line_; }

private:
    DataErrorKind kind_;
    std::string file_;
    std::size_t line_;
};

/// Reads tableA.csv, tableB.csv, train.csv, valid.csv and test.csv from a
/// directory. Record tables start with an `id` column; split files carry
/// ltable_id, rtable_id and label (0 or 1).
std::shared_ptr<const DatasetBundle> load_dataset(const std::filesystem::path& dir);

/// Writes a bundle in the same layout load_dataset reads.
void save_dataset(const DatasetBundle& data, const std::filesystem::path& dir);

// ---- configuration --------------------------------------------------------

enum class DatasetScale : std::uint8_t { small, large };
std::string_view to_string(DatasetScale scale);

/// Fewer than this many training pairs counts as a small dataset.
inline constexpr std::size_t kLargeDatasetTrainPairs = 1000;

DatasetScale classify_scale(const DatasetBundle& data);

/// A parsed configuration file. Settings that depend on the dataset stay
/// empty here and are filled by resolve_config.
struct ToolkitConfig {
    SessionConfig session;  // schema may be empty; lwcr is built by resolve_config
    /// Explicit LWCR weights in attribute order; empty means uniform.
    std::vector<std::pair<std::string, double>> lwcr_weights;
    /// Per-attribute metric overrides; otherwise the attribute's first schema metric.
    std::vector<std::pair<std::string, MetricKind>> lwcr_metrics;
    std::optional<std::size_t> init_pool;
    std::optional<std::size_t> batch;
    std::optional<DatasetScale> scale;
    std::string report_path;
    std::string snapshot_dir;

    bool operator==(const ToolkitConfig&) const = default;
};

/// Throws ConfigError naming the field path for unknown keys, wrong types
/// and invariant violations.
ToolkitConfig parse_config_text(std::string_view json_text);
ToolkitConfig parse_config(const std::filesystem::path& path);

/// Fills dataset-dependent defaults (schema, uniform LWCR weights, pool and
/// batch size by scale) and checks attribute names against the dataset.
SessionConfig resolve_config(const ToolkitConfig& config, const DatasetBundle& data);

/// Every field written explicitly, so parsing the output and resolving it
/// against the same dataset returns an equal SessionConfig.
std::string serialize_config(const SessionConfig& config);
std::string serialize_config(const ToolkitConfig& config);

// ---- snapshots ------------------------------------------------------------

inline constexpr std::string_view kSnapshotFormat = "almatch-session";
inline constexpr int kSnapshotVersion = 1;

struct SessionSnapshot {
    std::string session_id;
    std::string dataset;
    std::string created_at;
    SessionConfig config;
    SessionState state;

    bool operator==(const SessionSnapshot&) const = default;
};

class SnapshotError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SnapshotVersionError : public SnapshotError {
public:
    using SnapshotError::SnapshotError;
};

std::string serialize_snapshot(const SessionSnapshot& snapshot);
SessionSnapshot parse_snapshot(std::string_view text);

/// Atomic: writes a sibling temporary file and renames it over path.
void save_snapshot(const SessionSnapshot& snapshot, const std::filesystem::path& path);
SessionSnapshot load_snapshot(const std::filesystem::path& path);

// ---- reports --------------------------------------------------------------

struct ReportRow {
    std::string dataset;
    std::string strategy;
    std::uint64_t seed = 0;
    bool pruning = true;
    std::string seeding = "lwcr";
    double f1 = 0.0;
    std::size_t labels = 0;
    std::size_t iterations = 0;
    std::string stop_reason;
    std::size_t retained_pairs = 0;
    std::size_t removed_matches = 0;
    double wall_time_s = 0.0;
    std::string error;  // non-empty for a failed cell

    bool operator==(const ReportRow&) const = default;
};

struct ReportOptions {
    /// Wall time varies run to run; leave it out when reports must be
    /// byte-identical.
    bool include_timing = true;
};

/// Rows sorted by dataset, strategy (entropy, ave_entropy, var_entropy,
/// var_prob, hybrid, random), seed, then pruning and seeding.
std::vector<ReportRow> sorted_report(std::vector<ReportRow> rows);
std::string report_csv(std::span<const ReportRow> rows, const ReportOptions& options = {});
void write_report(std::span<const ReportRow> rows, const std::filesystem::path& path,
                  const ReportOptions& options = {});

/// pair_id,ltable_id,rtable_id,label,round in acquisition order.
std::string labeled_pool_csv(const Session& session);
/// Final report of a session as JSON.
std::string final_report_json(const Session& session);

/// Writes content to path via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

/// Fixed six-decimal formatting used in every CSV output.
std::string format_decimal(double value, int digits = 6);

}  // namespace almatch
