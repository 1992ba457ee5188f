#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fedsim/config.hpp"
#include "fedsim/cost.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/experiment.hpp"

namespace {

std::string default_out_dir() {
    if (const char* env = std::getenv("FEDSIM_OUT")) return env;
    return "out";
}

std::string fixed(double v, int places) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", places, v);
    return buf;
}

int cmd_run(const std::string& config_path, const std::optional<std::uint64_t>& seed,
            const std::string& out_dir) {
    fedsim::ExperimentConfig cfg = fedsim::load_config(config_path);
    if (seed) cfg.seed = *seed;
    const fedsim::RunReport report = fedsim::run_experiment(cfg, out_dir);
    std::cout << "strategy=" << fedsim::strategy_name(report.strategy)
              << " seed=" << report.seed
              << " rounds=" << report.rounds_completed
              << " stop=" << fedsim::stop_reason_name(report.stop_reason)
              << " accuracy=" << fixed(report.final_accuracy, 4)
              << " loss=" << fixed(report.final_loss, 4)
              << " up_bytes=" << report.total_up_bytes
              << " down_bytes=" << report.total_down_bytes << "\n";
    std::cout << "wrote " << (std::filesystem::path(out_dir) / "metrics.jsonl").string() << "\n";
    return 0;
}

int cmd_matrix(const std::vector<std::string>& config_paths, std::size_t repeats) {
    std::vector<fedsim::MatrixEntry> entries;
    for (const std::string& path : config_paths) {
        fedsim::MatrixEntry entry;
        entry.label = std::filesystem::path(path).stem().string();
        entry.config = fedsim::load_config(path);
        entries.push_back(std::move(entry));
    }
    const fedsim::MatrixResult result = fedsim::run_matrix(entries, repeats);
    std::cout << fedsim::matrix_table(result);
    return 0;
}

int cmd_cost(std::size_t t, double c, std::size_t n, std::uint64_t m, std::uint64_t eps) {
    const double avg = fedsim::cost_fedavg(t, c, n, m);
    const std::uint64_t fedx = fedsim::cost_fedx(t, n, m, eps);
    std::cout << "averaging_bytes = " << fixed(avg, 0) << "\n";
    std::cout << "score_exchange_bytes = " << fedx << "\n";
    std::cout << "score_exchange_vs_full_averaging = "
              << fixed(100.0 * fedsim::normalized_cost_general(static_cast<double>(fedx), t, n, m), 4)
              << "%\n";
    return 0;
}

int cmd_validate_costs(const std::vector<std::string>& overrides) {
    std::vector<fedsim::CostRow> rows = fedsim::reference_cost_rows();
    for (const std::string& ov : overrides) {
        const std::size_t eq = ov.find('=');
        if (eq == std::string::npos)
            throw fedsim::InvalidInputError("validate-costs: --expect wants INDEX=VALUE, got '" + ov + "'");
        const std::size_t idx = std::stoul(ov.substr(0, eq));
        if (idx >= rows.size())
            throw fedsim::InvalidInputError("validate-costs: row index " + std::to_string(idx) +
                                            " out of range");
        rows[idx].expected = std::stod(ov.substr(eq + 1));
        rows[idx].matches = rows[idx].percent == rows[idx].expected;
    }
    bool all_ok = true;
    for (const fedsim::CostRow& row : rows) {
        std::printf("%-14s computed=%-6s expected=%-6s %s\n", row.label.c_str(),
                    fixed(row.percent, 1).c_str(), fixed(row.expected, 1).c_str(),
                    row.matches ? "PASS" : "FAIL");
        all_ok = all_ok && row.matches;
    }
    return all_ok ? 0 : 1;
}

int cmd_print_config(const std::string& config_path) {
    std::cout << fedsim::print_config(fedsim::load_config(config_path));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"federated learning simulator with score-only model exchange"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = default_out_dir();
    CLI::App* run = app.add_subcommand("run", "run one experiment and write metrics");
    run->add_option("--config", config_path, "experiment config file")->required();
    run->add_option("--seed", seed, "override the config seed");
    run->add_option("--out", out_dir, "output directory (default $FEDSIM_OUT or ./out)");

    std::vector<std::string> matrix_configs;
    std::size_t repeats = 1;
    CLI::App* matrix = app.add_subcommand("matrix", "run several configs and tabulate");
    matrix->add_option("--configs", matrix_configs, "config files")->required()->expected(-1);
    matrix->add_option("--repeats", repeats, "replicates per config (seeds base, base+1, ...)");

    std::size_t cost_t = 30;
    double cost_c = 1.0;
    std::size_t cost_n = 10;
    std::uint64_t cost_m = 0;
    std::uint64_t cost_eps = 8;
    CLI::App* cost = app.add_subcommand("cost", "analytic traffic for a hypothetical run");
    cost->add_option("--t", cost_t, "rounds");
    cost->add_option("--c", cost_c, "participation fraction (averaging)");
    cost->add_option("--n", cost_n, "clients");
    cost->add_option("--m", cost_m, "model bytes")->required();
    cost->add_option("--eps", cost_eps, "request bytes");

    std::vector<std::string> expect_overrides;
    CLI::App* validate = app.add_subcommand("validate-costs", "check the reference cost table");
    validate->add_option("--expect", expect_overrides,
                         "override a row's expected percent as INDEX=VALUE (testing hook)");

    std::string print_path;
    CLI::App* print_cfg = app.add_subcommand("print-config", "echo a config in canonical form");
    print_cfg->add_option("--config", print_path, "experiment config file")->required();

    try {
        app.parse(argc, argv);
        if (run->parsed()) return cmd_run(config_path, seed, out_dir);
        if (matrix->parsed()) return cmd_matrix(matrix_configs, repeats);
        if (cost->parsed()) return cmd_cost(cost_t, cost_c, cost_n, cost_m, cost_eps);
        if (validate->parsed()) return cmd_validate_costs(expect_overrides);
        if (print_cfg->parsed()) return cmd_print_config(print_path);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "fedsim: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
