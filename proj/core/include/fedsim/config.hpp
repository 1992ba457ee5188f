#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedsim/bwo.hpp"
#include "fedsim/model.hpp"
#include "fedsim/protocol.hpp"
#include "fedsim/report.hpp"

namespace fedsim {

struct SyntheticSpec {
    std::size_t n = 2000;
    std::size_t d = 32;
    int classes = 4;
    double separation = 6.0;
    std::size_t test_n = 500;
};

enum class DataSource { synthetic, cifar10 };

struct DataSpec {
    DataSource source = DataSource::synthetic;
    std::string cifar_dir;  // required when source == cifar10
    SyntheticSpec synthetic;
};

struct OutputSpec {
    bool csv = false;     // also write the metrics.csv mirror
    bool scores = false;  // also write scores.bin (raw 8-byte score records)
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::size_t num_clients = 10;   // N
    double fraction = 1.0;          // C, averaging strategy only
    std::size_t client_epochs = 5;  // E
    std::size_t batch_size = 10;
    int global_rounds = 30;  // T
    double learning_rate = 0.0025;
    Strategy strategy = Strategy::fedbwo;
    Refiner client_refiner = Refiner::sgd_bwo;
    ScoreMetric score_metric = ScoreMetric::loss;
    std::uint64_t epsilon = 8;  // request-message bytes in the ledger
    bool parallel_clients = true;
    std::vector<std::size_t> hidden = {128, 64};
    BwoParams bwo;
    StopPolicy stop;
    DataSpec data;
    OutputSpec output;

    // Throws ConfigError naming the offending key and its constraint.
    void validate() const;

    // input -> hidden... -> classes; relu inside, identity logits out.
    std::vector<LayerSpec> architecture(std::size_t input_dim, int classes) const;
};

// key = value lines; '#' comments; dotted keys for nested fields; unknown
// keys are errors. Values may be quoted.
ExperimentConfig parse_config(const std::string& text);

ExperimentConfig load_config(const std::string& path);

// Canonical echo: every key on its own line, sorted layout, shortest
// round-trip numbers. parse_config(print_config(c)) reproduces c.
std::string print_config(const ExperimentConfig& config);

} // namespace fedsim
