#include "fedsim/experiment.hpp"

#include "fedsim/cost.hpp"
#include "fedsim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace fedsim {

FlData prepare_data(const ExperimentConfig& config) {
    config.validate();
    FlData data;
    if (config.data.source == DataSource::synthetic) {
        const SyntheticSpec& syn = config.data.synthetic;
        data.train = make_synthetic(syn.n, syn.d, syn.classes, syn.separation,
                                    derive_seed(config.seed, stream::data));
        data.test = make_synthetic(syn.test_n, syn.d, syn.classes, syn.separation,
                                   derive_seed(config.seed, stream::test_data));
    } else {
        Cifar10Files files = load_cifar10_dir(config.data.cifar_dir);
        data.train = std::move(files.train);
        data.test = std::move(files.test);
    }
    data.partition = make_partition(data.train, config.num_clients,
                                    derive_seed(config.seed, stream::partition));
    return data;
}

RunReport run_experiment_in_memory(const ExperimentConfig& config) {
    const FlData data = prepare_data(config);
    Rng server_rng(derive_seed(config.seed, stream::server));
    RunReport report;
    switch (config.strategy) {
    case Strategy::fedavg:
        report = run_fedavg(config, data, server_rng);
        break;
    case Strategy::fedbwo:
        report = run_fedx(config, data, server_rng, config.client_refiner);
        break;
    case Strategy::hillclimb:
        report = run_fedx(config, data, server_rng, Refiner::sgd);
        break;
    }
    check_ledger(report);
    return report;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("write_file: cannot open '" + path.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write_file: short write to '" + path.string() + "'");
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("write_bytes: cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write_bytes: short write to '" + path.string() + "'");
}

} // namespace

RunReport run_experiment(const ExperimentConfig& config, const std::string& out_dir) {
    RunReport report = run_experiment_in_memory(config);
    const std::filesystem::path dir(out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("run_experiment: cannot create '" + out_dir + "': " + ec.message());

    write_file(dir / "metrics.jsonl", to_jsonl(report));
    write_file(dir / "timing.csv", timing_csv(report));
    if (config.output.csv) write_file(dir / "metrics.csv", to_csv(report));
    if (config.output.scores) write_bytes(dir / "scores.bin", report.score_wire);
    return report;
}

namespace {

struct Moments {
    double mean = 0.0;
    double stddev = 0.0;  // population
};

Moments moments(const std::vector<double>& xs) {
    Moments m;
    for (double x : xs) m.mean += x;
    m.mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - m.mean) * (x - m.mean);
    m.stddev = std::sqrt(var / static_cast<double>(xs.size()));
    return m;
}

std::string fixed(double v, int places) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", places, v);
    return buf;
}

} // namespace

MatrixResult run_matrix(const std::vector<MatrixEntry>& entries, std::size_t repeats) {
    if (entries.empty()) throw InvalidInputError("run_matrix: no configurations given");
    if (repeats < 1) throw InvalidInputError("run_matrix: repeats must be >= 1");

    MatrixResult result;
    result.raw.resize(entries.size());
    for (std::size_t e = 0; e < entries.size(); ++e) {
        for (std::size_t r = 0; r < repeats; ++r) {
            ExperimentConfig cfg = entries[e].config;
            cfg.seed = entries[e].config.seed + r;
            result.raw[e].push_back(run_experiment_in_memory(cfg));
        }
        const auto& runs = result.raw[e];
        std::vector<double> rounds, accuracy, loss, up;
        for (const RunReport& run : runs) {
            rounds.push_back(static_cast<double>(run.rounds_completed));
            accuracy.push_back(run.final_accuracy);
            loss.push_back(run.final_loss);
            up.push_back(static_cast<double>(run.total_up_bytes));
        }
        MatrixRow row;
        row.label = entries[e].label;
        row.strategy = entries[e].config.strategy;
        row.fraction = entries[e].config.fraction;
        row.repeats = repeats;
        const Moments mr = moments(rounds);
        row.mean_rounds = mr.mean;
        row.std_rounds = mr.stddev;
        const Moments ma = moments(accuracy);
        row.mean_accuracy = ma.mean;
        row.std_accuracy = ma.stddev;
        const Moments ml = moments(loss);
        row.mean_loss = ml.mean;
        row.std_loss = ml.stddev;
        row.mean_up_bytes = moments(up).mean;
        result.rows.push_back(std::move(row));
    }

    for (std::size_t e = 0; e < entries.size(); ++e) {
        if (entries[e].config.strategy == Strategy::fedavg && entries[e].config.fraction == 1.0) {
            result.baseline_index = e;
            break;
        }
    }
    if (result.baseline_index) {
        const MatrixRow& base = result.rows[*result.baseline_index];
        for (MatrixRow& row : result.rows) {
            // Score protocols: the model term cancels against the baseline's,
            // leaving rounds over baseline rounds times N. Averaging rows keep
            // their participation fraction instead.
            if (row.strategy == Strategy::fedavg) {
                row.normalized_cost_pct = 100.0 * row.mean_rounds * row.fraction / base.mean_rounds;
            } else {
                row.normalized_cost_pct =
                    100.0 * row.mean_rounds /
                    (base.mean_rounds * static_cast<double>(entries[*result.baseline_index].config.num_clients));
            }
        }
    }
    return result;
}

std::string matrix_table(const MatrixResult& result) {
    std::string out = "label               strategy   rounds          accuracy        loss            "
                      "up_bytes        norm_cost\n";
    for (const MatrixRow& row : result.rows) {
        char line[256];
        const std::string rounds = fixed(row.mean_rounds, 1) + "±" + fixed(row.std_rounds, 1);
        const std::string acc = fixed(row.mean_accuracy, 4) + "±" + fixed(row.std_accuracy, 4);
        const std::string loss = fixed(row.mean_loss, 4) + "±" + fixed(row.std_loss, 4);
        const std::string cost =
            row.normalized_cost_pct ? fixed(*row.normalized_cost_pct, 2) + "%" : "unavailable";
        std::snprintf(line, sizeof(line), "%-19s %-10s %-15s %-15s %-15s %-15.0f %s\n",
                      row.label.c_str(), strategy_name(row.strategy).c_str(), rounds.c_str(),
                      acc.c_str(), loss.c_str(), row.mean_up_bytes, cost.c_str());
        out += line;
    }
    return out;
}

} // namespace fedsim
