#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "almatch/similarity.hpp"

namespace almatch {

/// Two source tables plus labeled train/validation/test splits. Split pairs
/// point into the tables, so a bundle is move-only; share it by pointer.
struct DatasetBundle {
    std::string name;
    std::vector<std::string> attributes;
    std::vector<Record> table_a;
    std::vector<Record> table_b;
    // Pair ids are the 0-based row index within each split file.
    std::vector<CandidatePair> train;
    std::vector<CandidatePair> valid;
    std::vector<CandidatePair> test;

    DatasetBundle() = default;
    DatasetBundle(const DatasetBundle&) = delete;
    DatasetBundle& operator=(const DatasetBundle&) = delete;
    DatasetBundle(DatasetBundle&&) = default;
    DatasetBundle& operator=(DatasetBundle&&) = default;

    std::size_t total_pairs() const { return train.size() + valid.size() + test.size(); }
    std::size_t total_matches() const;
};

}  // namespace almatch
