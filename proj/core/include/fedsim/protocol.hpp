#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedsim/bwo.hpp"
#include "fedsim/cost.hpp"
#include "fedsim/data.hpp"
#include "fedsim/model.hpp"
#include "fedsim/report.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

struct ExperimentConfig;  // defined in config.hpp

// What a client does with the broadcast model before scoring it.
enum class Refiner { sgd_bwo, sgd, bwo };

std::string refiner_name(Refiner r);
Refiner refiner_from_name(const std::string& name);

// Lower is better either way: accuracy is reported as 1 - accuracy.
enum class ScoreMetric { loss, accuracy };

std::string score_metric_name(ScoreMetric m);
ScoreMetric score_metric_from_name(const std::string& name);

struct StopPolicy {
    int patience = 5;                  // t
    double accuracy_threshold = 0.70;  // tau; 1.0 disables the threshold stop
    int max_rounds = 30;               // T
    double min_delta = 0.001;

    void validate() const;
};

struct RoundEval {
    double accuracy = 0.0;
    double loss = 0.0;
};

struct StopCheck {
    bool stop = false;
    StopReason reason = StopReason::budget;
};

// Checked in order: threshold, plateau, budget.
StopCheck check_stop(const std::vector<RoundEval>& history, const StopPolicy& policy);

// The only thing a scoring client uploads. Wire form is exactly 8 bytes:
// little-endian 4-byte client id, then the score as 4 IEEE-754 bytes.
struct ScoreReport {
    std::uint32_t client_id = 0;
    float score = 0.0f;
};

std::array<std::uint8_t, 8> encode_score_report(const ScoreReport& r);
ScoreReport decode_score_report(std::span<const std::uint8_t> bytes);

struct FlData {
    Dataset train;
    Dataset test;
    Partition partition;
};

struct ClientState {
    int client_id = 0;
    std::vector<std::int32_t> train_indices;    // shard minus holdout
    std::vector<std::int32_t> holdout_indices;  // deterministic 20% tail
    DatasetView shard;    // full assignment
    DatasetView train;    // views into the index vectors above
    DatasetView holdout;  // the fitness split
    Rng rng;
    ParamVector current_params;  // post-refinement, what a fetch returns
};

// Builds per-client state from a partition: splits each shard, seeds each
// client's generator from (seed, client stream, id).
std::vector<ClientState> make_clients(const FlData& data, std::size_t num_clients,
                                      std::uint64_t seed);

struct ServerState {
    ParamVector global_params;
    float best_score = 0.0f;  // running best-ever, non-increasing once set
    std::optional<int> best_id;
    int round = 0;
    std::vector<RoundEval> history;  // server test set, one entry per round
};

// max(floor(fraction * total), 1) distinct ids, uniform without replacement,
// returned sorted.
std::vector<int> select_clients(double fraction, std::size_t total, Rng& rng);

struct WeightedUpdate {
    ParamVector params;
    std::size_t shard_size = 0;
};

// Coordinate-wise shard-size-weighted mean, accumulated in double.
ParamVector aggregate_weighted(const std::vector<WeightedUpdate>& updates);

// Pulls the full parameter vector from the round's best client and charges
// the ledger: model bytes up, request bytes down.
ParamVector get_best_model(const std::vector<ClientState>& clients, std::optional<int> best_id,
                           CostLedger& ledger, std::uint64_t epsilon_bytes);

// Test hook, called once per completed round.
struct RoundSnapshot {
    int round = 0;
    const ParamVector& global_after;
    std::span<const ParamVector> client_params;  // indexed by list position
    std::span<const int> participant_ids;
    std::span<const ScoreReport> scores;  // score protocols only, client-id order
    std::optional<int> best_id;
    float running_best_score = 0.0f;
};

using RoundObserver = std::function<void(const RoundSnapshot&)>;

RunReport run_fedavg(const ExperimentConfig& config, const FlData& data, Rng& server_rng,
                     const RoundObserver& observer = {});

RunReport run_fedx(const ExperimentConfig& config, const FlData& data, Rng& server_rng,
                   Refiner refiner, const RoundObserver& observer = {});

} // namespace fedsim
