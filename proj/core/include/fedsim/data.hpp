#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedsim/matrix.hpp"

namespace fedsim {

enum class Provenance { synthetic, cifar10 };

// Immutable once built; features live in [0,1].
struct Dataset {
    MatF features;                // n x d
    std::vector<std::int32_t> labels;
    int num_classes = 0;
    Provenance provenance = Provenance::synthetic;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return features.cols; }
};

// A dataset plus an index list selecting a subset of its rows.
// Cheap to copy, safe to share across threads; never owns the data.
struct DatasetView {
    const Dataset* ds = nullptr;
    std::span<const std::int32_t> indices;

    std::size_t size() const { return indices.size(); }
};

inline DatasetView full_view(const Dataset& ds, const std::vector<std::int32_t>& all_indices) {
    return DatasetView{&ds, all_indices};
}

// Disjoint per-client index lists covering the whole training set.
struct Partition {
    std::vector<std::vector<std::int32_t>> assignments;

    std::size_t num_clients() const { return assignments.size(); }
};

// CIFAR-10 binary layout: 3073-byte records, 1 label byte then 3072 pixel
// bytes (1024 R, 1024 G, 1024 B), pixels scaled by /255.
Dataset parse_cifar10(std::span<const std::uint8_t> bytes);

// Inverse of parse_cifar10 up to u8 quantization of the features.
std::vector<std::uint8_t> serialize_cifar10(const Dataset& ds);

// Reads data_batch_1..5.bin and test_batch.bin from dir.
struct Cifar10Files {
    Dataset train;
    Dataset test;
};
Cifar10Files load_cifar10_dir(const std::string& dir);

// Gaussian blobs, one centroid per class, centroids pairwise >= separation
// apart in generation space; features min-max scaled into [0,1] afterwards.
// Labels cycle 0..classes-1 so classes are balanced to +-1.
Dataset make_synthetic(std::size_t n, std::size_t d, int classes, double separation,
                       std::uint64_t seed);

// Seeded shuffle then round-robin deal; sizes differ by at most 1.
Partition make_partition(const Dataset& ds, std::size_t num_clients, std::uint64_t seed);

// Splits a client's assignment into train (head) and holdout (tail).
// The holdout is the last floor(size/5) indices, at least 1; size must be >= 2.
struct ClientSplit {
    std::vector<std::int32_t> train;
    std::vector<std::int32_t> holdout;
};
ClientSplit split_holdout(const std::vector<std::int32_t>& assignment);

} // namespace fedsim
