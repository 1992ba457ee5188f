#include "fedsim/report.hpp"

#include "fedsim/errors.hpp"

#include <charconv>
#include <sstream>

namespace fedsim {

std::string strategy_name(Strategy s) {
    switch (s) {
    case Strategy::fedavg: return "fedavg";
    case Strategy::fedbwo: return "fedbwo";
    case Strategy::hillclimb: return "hillclimb";
    }
    throw InvalidInputError("strategy_name: unknown strategy value");
}

Strategy strategy_from_name(const std::string& name) {
    if (name == "fedavg") return Strategy::fedavg;
    if (name == "fedbwo") return Strategy::fedbwo;
    if (name == "hillclimb") return Strategy::hillclimb;
    throw ConfigError("strategy_from_name: unknown strategy '" + name +
                      "' (expected fedavg, fedbwo, or hillclimb)");
}

std::string stop_reason_name(StopReason r) {
    switch (r) {
    case StopReason::threshold: return "threshold";
    case StopReason::plateau: return "plateau";
    case StopReason::budget: return "budget";
    }
    throw InvalidInputError("stop_reason_name: unknown stop reason value");
}

void RunReport::finalize_totals() {
    total_up_bytes = 0;
    total_down_bytes = 0;
    total_wall_ms = 0.0;
    for (const auto& row : rows) {
        total_up_bytes += row.up_bytes;
        total_down_bytes += row.down_bytes;
        total_wall_ms += row.wall_ms;
    }
    rounds_completed = rows.size();
    if (!rows.empty()) {
        final_accuracy = rows.back().test_accuracy;
        final_loss = rows.back().test_loss;
    }
}

namespace {

// Shortest round-trip decimal form; the reason reruns diff clean.
std::string canon(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    if (res.ec != std::errc()) throw FormatError("canon: double conversion failed");
    return std::string(buf, res.ptr);
}

std::string canon(std::uint64_t v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    if (res.ec != std::errc()) throw FormatError("canon: integer conversion failed");
    return std::string(buf, res.ptr);
}

} // namespace

std::string to_jsonl(const RunReport& report) {
    std::string out;
    for (const auto& row : report.rows) {
        out += "{\"round\":" + canon(static_cast<std::uint64_t>(row.round));
        out += ",\"train_loss\":" + canon(row.train_loss);
        out += ",\"test_accuracy\":" + canon(row.test_accuracy);
        out += ",\"test_loss\":" + canon(row.test_loss);
        if (row.best_client_id)
            out += ",\"best_client_id\":" + canon(static_cast<std::uint64_t>(*row.best_client_id));
        out += ",\"up_bytes\":" + canon(row.up_bytes);
        out += ",\"down_bytes\":" + canon(row.down_bytes);
        out += "}\n";
    }
    out += "{\"summary\":true";
    out += ",\"strategy\":\"" + strategy_name(report.strategy) + "\"";
    out += ",\"seed\":" + canon(report.seed);
    out += ",\"num_clients\":" + canon(static_cast<std::uint64_t>(report.num_clients));
    out += ",\"fraction\":" + canon(report.fraction);
    out += ",\"selected_per_round\":" + canon(static_cast<std::uint64_t>(report.selected_per_round));
    out += ",\"model_size_bytes\":" + canon(report.model_size_bytes);
    out += ",\"epsilon_bytes\":" + canon(report.epsilon_bytes);
    out += ",\"param_count\":" + canon(static_cast<std::uint64_t>(report.param_count));
    out += ",\"rounds_completed\":" + canon(static_cast<std::uint64_t>(report.rounds_completed));
    out += ",\"stop_reason\":\"" + stop_reason_name(report.stop_reason) + "\"";
    out += ",\"total_up_bytes\":" + canon(report.total_up_bytes);
    out += ",\"total_down_bytes\":" + canon(report.total_down_bytes);
    out += ",\"final_accuracy\":" + canon(report.final_accuracy);
    out += ",\"final_loss\":" + canon(report.final_loss);
    out += ",\"refine_evaluations\":" + canon(report.refine_evaluations);
    out += "}\n";
    return out;
}

std::string to_csv(const RunReport& report) {
    std::string out = "round,train_loss,test_accuracy,test_loss,best_client_id,up_bytes,down_bytes\n";
    for (const auto& row : report.rows) {
        out += canon(static_cast<std::uint64_t>(row.round));
        out += "," + canon(row.train_loss);
        out += "," + canon(row.test_accuracy);
        out += "," + canon(row.test_loss);
        out += ",";
        if (row.best_client_id) out += canon(static_cast<std::uint64_t>(*row.best_client_id));
        out += "," + canon(row.up_bytes);
        out += "," + canon(row.down_bytes);
        out += "\n";
    }
    return out;
}

std::string timing_csv(const RunReport& report) {
    std::string out = "round,wall_ms\n";
    for (const auto& row : report.rows) {
        out += canon(static_cast<std::uint64_t>(row.round));
        out += "," + canon(row.wall_ms);
        out += "\n";
    }
    return out;
}

} // namespace fedsim
