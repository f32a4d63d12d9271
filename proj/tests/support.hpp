#pragma once

// Small datasets and helpers shared by the unit tests.

#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "almatch/dataset.hpp"
#include "almatch/rng.hpp"

namespace testing {

inline std::filesystem::path data_dir() { return ALMATCH_DATA_DIR; }

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("almatch-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline almatch::Record record(std::string id, std::vector<std::pair<std::string, almatch::AttributeValue>> attrs) {
    almatch::Record r{std::move(id), {}};
    for (auto& [name, value] : attrs) r.attributes.push_back({name, value});
    return r;
}

/// Pairs over one attribute `name` whose right value is the left value with
/// `edits` of its 10 characters replaced by digits, so normalized Levenshtein
/// similarity is exactly 1 - edits/10. A pair matches iff edits <= 4. Edit
/// counts cycle 0..10 so every split holds both classes.
inline std::shared_ptr<almatch::DatasetBundle> threshold_dataset(std::size_t train, std::size_t valid,
                                                                 std::size_t test, std::uint64_t seed = 1) {
    auto data = std::make_shared<almatch::DatasetBundle>();
    data->name = "threshold";
    data->attributes = {"name"};
    const std::size_t total = train + valid + test;
    data->table_a.reserve(total);
    data->table_b.reserve(total);
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < total; ++i) {
        std::string left;
        for (int k = 0; k < 10; ++k) left += static_cast<char>('a' + almatch::uniform_index(rng, 26));
        const std::size_t edits = (i * 7) % 11;
        std::string right = left;
        for (std::size_t k = 0; k < edits; ++k) right[k] = static_cast<char>('0' + k);
        data->table_a.push_back(record("a" + std::to_string(i), {{"name", left}}));
        data->table_b.push_back(record("b" + std::to_string(i), {{"name", right}}));
    }
    auto split = [&](std::vector<almatch::CandidatePair>& out, std::size_t from, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t row = from + i;
            const std::size_t edits = (row * 7) % 11;
            out.push_back({i, &data->table_a[row], &data->table_b[row],
                           edits <= 4 ? almatch::Label::match : almatch::Label::mismatch});
        }
    };
    split(data->train, 0, train);
    split(data->valid, train, valid);
    split(data->test, train + valid, test);
    return data;
}

}  // namespace testing
