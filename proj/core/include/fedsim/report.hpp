#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fedsim {

enum class Strategy { fedavg, fedbwo, hillclimb };

std::string strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

enum class StopReason { threshold, plateau, budget };

std::string stop_reason_name(StopReason r);

struct RoundRow {
    int round = 0;  // 1-based
    double train_loss = 0.0;
    double test_accuracy = 0.0;
    double test_loss = 0.0;
    std::optional<int> best_client_id;  // score-only strategies
    std::uint64_t up_bytes = 0;
    std::uint64_t down_bytes = 0;
    double wall_ms = 0.0;  // never serialized into metrics.jsonl
};

// Everything a completed run reports; fully determined by (config, seed)
// except the wall-clock columns.
struct RunReport {
    Strategy strategy = Strategy::fedavg;
    std::uint64_t seed = 0;
    std::size_t num_clients = 0;
    double fraction = 1.0;
    std::size_t selected_per_round = 0;
    std::uint64_t model_size_bytes = 0;  // M
    std::uint64_t epsilon_bytes = 0;     // server request
    std::size_t param_count = 0;

    std::vector<RoundRow> rows;
    StopReason stop_reason = StopReason::budget;
    std::size_t rounds_completed = 0;

    std::uint64_t total_up_bytes = 0;
    std::uint64_t total_down_bytes = 0;
    double final_accuracy = 0.0;
    double final_loss = 0.0;
    double total_wall_ms = 0.0;
    std::uint64_t refine_evaluations = 0;  // fitness calls spent by local refiners

    // Raw 8-byte score records in upload order (score protocols only).
    std::vector<std::uint8_t> score_wire;

    void finalize_totals();
};

// metrics.jsonl: one round object per line, then one summary object.
// Timing is deliberately absent so reruns are byte-identical.
std::string to_jsonl(const RunReport& report);

// CSV mirror of the per-round rows, timing-free like the JSONL.
std::string to_csv(const RunReport& report);

// Per-round wall-clock sidecar (round, wall_ms), machine-dependent.
std::string timing_csv(const RunReport& report);

} // namespace fedsim
