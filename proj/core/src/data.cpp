#include "fedsim/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

namespace {
constexpr std::size_t kRecordBytes = 3073;
constexpr std::size_t kPixelBytes = 3072;
} // namespace

Dataset parse_cifar10(std::span<const std::uint8_t> bytes) {
    if (bytes.size() % kRecordBytes != 0) {
        throw FormatError("parse_cifar10: byte length " + std::to_string(bytes.size()) +
                          " is not a multiple of 3073 (trailing " +
                          std::to_string(bytes.size() % kRecordBytes) + " bytes at offset " +
                          std::to_string(bytes.size() - bytes.size() % kRecordBytes) + ")");
    }
    const std::size_t n = bytes.size() / kRecordBytes;
    Dataset ds;
    ds.provenance = Provenance::cifar10;
    ds.num_classes = 10;
    ds.features = MatF(n, kPixelBytes);
    ds.labels.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        const std::uint8_t* rec = bytes.data() + r * kRecordBytes;
        if (rec[0] > 9) {
            throw FormatError("parse_cifar10: label byte " + std::to_string(int(rec[0])) +
                              " > 9 in record " + std::to_string(r));
        }
        ds.labels[r] = rec[0];
        float* dst = ds.features.row_ptr(r);
        for (std::size_t i = 0; i < kPixelBytes; ++i) {
            dst[i] = static_cast<float>(rec[1 + i]) / 255.0f;
        }
    }
    return ds;
}

std::vector<std::uint8_t> serialize_cifar10(const Dataset& ds) {
    if (ds.dim() != kPixelBytes) {
        throw InvalidInputError("serialize_cifar10: feature dim must be 3072, got " +
                                std::to_string(ds.dim()));
    }
    std::vector<std::uint8_t> out(ds.size() * kRecordBytes);
    for (std::size_t r = 0; r < ds.size(); ++r) {
        std::uint8_t* rec = out.data() + r * kRecordBytes;
        if (ds.labels[r] < 0 || ds.labels[r] > 9) {
            throw InvalidInputError("serialize_cifar10: label out of [0,9] in record " +
                                    std::to_string(r));
        }
        rec[0] = static_cast<std::uint8_t>(ds.labels[r]);
        const float* src = ds.features.row_ptr(r);
        for (std::size_t i = 0; i < kPixelBytes; ++i) {
            const float v = std::clamp(src[i], 0.0f, 1.0f);
            rec[1 + i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
        }
    }
    return out;
}

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open " + path.string());
    }
    in.seekg(0, std::ios::end);
    const auto len = in.tellg();
    in.seekg(0, std::ios::beg);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(len));
    in.read(reinterpret_cast<char*>(bytes.data()), len);
    if (!in) {
        throw FormatError("short read on " + path.string());
    }
    return bytes;
}

void append_dataset(Dataset& dst, Dataset&& src) {
    if (dst.size() == 0) {
        dst = std::move(src);
        return;
    }
    const std::size_t old_n = dst.size();
    dst.features.data.insert(dst.features.data.end(), src.features.data.begin(),
                             src.features.data.end());
    dst.features.rows = old_n + src.size();
    dst.labels.insert(dst.labels.end(), src.labels.begin(), src.labels.end());
}

} // namespace

Cifar10Files load_cifar10_dir(const std::string& dir) {
    const std::filesystem::path base(dir);
    Cifar10Files files;
    for (int i = 1; i <= 5; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "data_batch_%d.bin", i);
        append_dataset(files.train, parse_cifar10(read_file(base / name)));
    }
    files.test = parse_cifar10(read_file(base / "test_batch.bin"));
    return files;
}

Dataset make_synthetic(std::size_t n, std::size_t d, int classes, double separation,
                       std::uint64_t seed) {
    if (d < 1) {
        throw ConfigError("make_synthetic: d must be >= 1");
    }
    if (classes < 2) {
        throw ConfigError("make_synthetic: classes must be >= 2");
    }
    if (n < static_cast<std::size_t>(classes)) {
        throw ConfigError("make_synthetic: n must be >= classes");
    }
    if (separation <= 0.0) {
        throw ConfigError("make_synthetic: separation must be > 0");
    }

    // Centroids sit on axis 0 spaced exactly `separation` apart; unit-variance
    // Gaussian noise on every axis. Min-max scaling to [0,1] afterwards keeps
    // the Dataset bounds invariant without changing separability.
    Rng rng(seed);
    Dataset ds;
    ds.provenance = Provenance::synthetic;
    ds.num_classes = classes;
    ds.features = MatF(n, d);
    ds.labels.resize(n);

    std::vector<double> raw(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % static_cast<std::size_t>(classes));
        ds.labels[i] = label;
        double* row = raw.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) {
            row[j] = rng.normal();
        }
        row[0] += separation * static_cast<double>(label);
    }

    for (std::size_t j = 0; j < d; ++j) {
        double lo = raw[j];
        double hi = raw[j];
        for (std::size_t i = 1; i < n; ++i) {
            lo = std::min(lo, raw[i * d + j]);
            hi = std::max(hi, raw[i * d + j]);
        }
        const double range = hi - lo;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = range > 0.0 ? (raw[i * d + j] - lo) / range : 0.5;
            ds.features(i, j) = static_cast<float>(v);
        }
    }
    return ds;
}

Partition make_partition(const Dataset& ds, std::size_t num_clients, std::uint64_t seed) {
    if (num_clients < 1) {
        throw ConfigError("make_partition: num_clients must be >= 1");
    }
    if (num_clients > ds.size()) {
        throw ConfigError("make_partition: num_clients " + std::to_string(num_clients) +
                          " exceeds dataset size " + std::to_string(ds.size()));
    }
    std::vector<std::int32_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng.engine());

    Partition p;
    p.assignments.resize(num_clients);
    for (std::size_t i = 0; i < order.size(); ++i) {
        p.assignments[i % num_clients].push_back(order[i]);
    }
    return p;
}

ClientSplit split_holdout(const std::vector<std::int32_t>& assignment) {
    if (assignment.size() < 2) {
        throw ConfigError("split_holdout: shard of size " + std::to_string(assignment.size()) +
                          " is too small to carve a holdout");
    }
    std::size_t holdout = assignment.size() / 5;
    if (holdout == 0) holdout = 1;
    ClientSplit s;
    s.train.assign(assignment.begin(), assignment.end() - static_cast<std::ptrdiff_t>(holdout));
    s.holdout.assign(assignment.end() - static_cast<std::ptrdiff_t>(holdout), assignment.end());
    return s;
}

} // namespace fedsim
