#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fedsim/config.hpp"
#include "fedsim/protocol.hpp"
#include "fedsim/report.hpp"

namespace fedsim {

// Builds the train/test datasets and the client partition for a config.
// Synthetic train and test sets share class geometry but not noise.
FlData prepare_data(const ExperimentConfig& config);

// Dispatches on strategy and cross-checks the traffic ledger; writes nothing.
RunReport run_experiment_in_memory(const ExperimentConfig& config);

// In-memory run plus output files under out_dir: metrics.jsonl always,
// timing.csv always (machine-dependent, kept out of metrics.jsonl),
// metrics.csv and scores.bin when the config asks for them.
RunReport run_experiment(const ExperimentConfig& config, const std::string& out_dir);

struct MatrixEntry {
    std::string label;
    ExperimentConfig config;
};

struct MatrixRow {
    std::string label;
    Strategy strategy = Strategy::fedavg;
    double fraction = 1.0;
    std::size_t repeats = 0;
    double mean_rounds = 0.0;
    double std_rounds = 0.0;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    double mean_loss = 0.0;
    double std_loss = 0.0;
    double mean_up_bytes = 0.0;
    // Relative to the matrix's own full-participation averaging member;
    // absent when the matrix has none.
    std::optional<double> normalized_cost_pct;
};

struct MatrixResult {
    std::vector<MatrixRow> rows;
    std::optional<std::size_t> baseline_index;
    std::vector<std::vector<RunReport>> raw;  // [entry][replicate]
};

// Each entry runs `repeats` times with seeds base, base+1, ... and the
// replicate statistics are aggregated per entry.
MatrixResult run_matrix(const std::vector<MatrixEntry>& entries, std::size_t repeats);

std::string matrix_table(const MatrixResult& result);

} // namespace fedsim
