#pragma once

#include "fedsim/report.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fedsim {

// Per-round traffic as counted by the simulator's ledger (exact bytes).
struct CostLedger {
    std::uint64_t up_bytes = 0;
    std::uint64_t down_bytes = 0;
    std::uint64_t total() const { return up_bytes + down_bytes; }
};

// One FedAvg round: every selected client uploads a full model and the
// server pushes a full model back to each of them.
CostLedger fedavg_round_cost(std::size_t selected, std::uint64_t model_bytes);

// One score-exchange round: N four-byte scores go up plus one full model
// from the best client; the broadcast to all N plus the fetch request
// come down.
CostLedger fedx_round_cost(std::size_t num_clients, std::uint64_t model_bytes,
                           std::uint64_t epsilon_bytes);

// Analytic totals over a whole run.
double cost_fedavg(std::size_t rounds, double fraction, std::size_t num_clients,
                   std::uint64_t model_bytes);
std::uint64_t cost_fedx(std::size_t rounds, std::size_t num_clients,
                        std::uint64_t model_bytes, std::uint64_t epsilon_bytes);

// cost_x relative to a full-participation averaging baseline.
double normalized_cost_general(double cost_x, std::size_t base_rounds,
                               std::size_t num_clients, std::uint64_t model_bytes);

// Same ratio with score bytes and the request overhead dropped: the model
// payload cancels and only round counts and N remain.
double normalized_cost(std::size_t rounds_x, std::size_t base_rounds,
                       std::size_t num_clients);

// Recomputes what every row's byte columns must have been from the run
// metadata and throws ProtocolError naming the first round that disagrees.
void check_ledger(const RunReport& report);

// Reference comparison table: round counts and participation fractions for
// the five algorithms, with the normalized cost each must come out to.
struct CostRow {
    std::string label;
    double percent = 0.0;   // computed, rounded to one decimal
    double expected = 0.0;  // pinned reference value
    bool matches = false;
};

std::vector<CostRow> reference_cost_rows();

// Round half away from zero to one decimal place.
double round1(double v);

} // namespace fedsim
