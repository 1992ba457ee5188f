#include "fedsim/protocol.hpp"

#include "fedsim/config.hpp"
#include "fedsim/errors.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>

namespace fedsim {

static_assert(std::numeric_limits<float>::is_iec559, "score wire format requires IEEE-754 floats");

std::string refiner_name(Refiner r) {
    switch (r) {
    case Refiner::sgd_bwo: return "sgd+bwo";
    case Refiner::sgd: return "sgd";
    case Refiner::bwo: return "bwo";
    }
    throw InvalidInputError("refiner_name: unknown refiner value");
}

Refiner refiner_from_name(const std::string& name) {
    if (name == "sgd+bwo") return Refiner::sgd_bwo;
    if (name == "sgd") return Refiner::sgd;
    if (name == "bwo") return Refiner::bwo;
    throw ConfigError("refiner_from_name: unknown refiner '" + name +
                      "' (expected sgd+bwo, sgd, or bwo)");
}

std::string score_metric_name(ScoreMetric m) {
    switch (m) {
    case ScoreMetric::loss: return "loss";
    case ScoreMetric::accuracy: return "accuracy";
    }
    throw InvalidInputError("score_metric_name: unknown metric value");
}

ScoreMetric score_metric_from_name(const std::string& name) {
    if (name == "loss") return ScoreMetric::loss;
    if (name == "accuracy") return ScoreMetric::accuracy;
    throw ConfigError("score_metric_from_name: unknown metric '" + name +
                      "' (expected loss or accuracy)");
}

void StopPolicy::validate() const {
    if (patience < 1) throw ConfigError("StopPolicy: stop.t must be >= 1");
    if (!(accuracy_threshold > 0.0) || accuracy_threshold > 1.0)
        throw ConfigError("StopPolicy: stop.tau must be in (0, 1]");
    if (max_rounds < 1) throw ConfigError("StopPolicy: global_rounds must be >= 1");
    if (min_delta < 0.0) throw ConfigError("StopPolicy: stop.min_delta must be >= 0");
}

StopCheck check_stop(const std::vector<RoundEval>& history, const StopPolicy& policy) {
    policy.validate();
    StopCheck out;
    if (history.empty()) return out;

    // tau = 1.0 means "never stop on accuracy alone".
    if (policy.accuracy_threshold < 1.0 &&
        history.back().accuracy >= policy.accuracy_threshold)
        return {true, StopReason::threshold};

    // Patience over entries; a single entry has no delta yet, so t=1
    // still needs two rounds before it can call a plateau.
    const std::size_t window = std::max<std::size_t>(static_cast<std::size_t>(policy.patience), 2);
    if (history.size() >= window) {
        bool flat = true;
        for (std::size_t i = history.size() - window + 1; i < history.size(); ++i) {
            if (std::abs(history[i].accuracy - history[i - 1].accuracy) >= policy.min_delta) {
                flat = false;
                break;
            }
        }
        if (flat) return {true, StopReason::plateau};
    }

    if (history.size() >= static_cast<std::size_t>(policy.max_rounds))
        return {true, StopReason::budget};
    return out;
}

std::array<std::uint8_t, 8> encode_score_report(const ScoreReport& r) {
    if (!std::isfinite(r.score))
        throw ProtocolError("encode_score_report: client " + std::to_string(r.client_id) +
                            " reported a non-finite score");
    std::array<std::uint8_t, 8> out{};
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(r.score);
    for (int i = 0; i < 4; ++i) {
        out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>((r.client_id >> (8 * i)) & 0xff);
        out[static_cast<std::size_t>(4 + i)] = static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff);
    }
    return out;
}

ScoreReport decode_score_report(std::span<const std::uint8_t> bytes) {
    if (bytes.size() != 8)
        throw FormatError("decode_score_report: expected 8 bytes, got " +
                          std::to_string(bytes.size()));
    ScoreReport r;
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) {
        r.client_id |= static_cast<std::uint32_t>(bytes[static_cast<std::size_t>(i)]) << (8 * i);
        bits |= static_cast<std::uint32_t>(bytes[static_cast<std::size_t>(4 + i)]) << (8 * i);
    }
    r.score = std::bit_cast<float>(bits);
    if (!std::isfinite(r.score))
        throw ProtocolError("decode_score_report: client " + std::to_string(r.client_id) +
                            " reported a non-finite score");
    return r;
}

std::vector<int> select_clients(double fraction, std::size_t total, Rng& rng) {
    if (fraction < 0.0 || fraction > 1.0)
        throw InvalidInputError("select_clients: fraction must be in [0, 1]");
    if (total == 0) throw InvalidInputError("select_clients: need at least one client");
    std::size_t want = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(total)));
    want = std::clamp<std::size_t>(want, 1, total);

    std::vector<int> ids(total);
    std::iota(ids.begin(), ids.end(), 0);
    for (std::size_t i = 0; i < want; ++i) {
        const auto j = static_cast<std::size_t>(
            rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(total - 1)));
        std::swap(ids[i], ids[j]);
    }
    ids.resize(want);
    std::sort(ids.begin(), ids.end());
    return ids;
}

ParamVector aggregate_weighted(const std::vector<WeightedUpdate>& updates) {
    if (updates.empty()) throw ProtocolError("aggregate_weighted: no updates to aggregate");
    const ParamVector& first = updates.front().params;
    double total = 0.0;
    for (std::size_t k = 0; k < updates.size(); ++k) {
        if (!updates[k].params.same_shape(first))
            throw ProtocolError("aggregate_weighted: update " + std::to_string(k) +
                                " has a mismatched shape table");
        total += static_cast<double>(updates[k].shard_size);
    }
    if (total <= 0.0) throw ProtocolError("aggregate_weighted: total shard size is zero");

    std::vector<double> acc(first.size(), 0.0);
    for (const auto& u : updates) {
        const auto w = static_cast<double>(u.shard_size);
        for (std::size_t i = 0; i < acc.size(); ++i)
            acc[i] += w * static_cast<double>(u.params.values[i]);
    }
    ParamVector out = first;
    for (std::size_t i = 0; i < acc.size(); ++i)
        out.values[i] = static_cast<float>(acc[i] / total);
    return out;
}

ParamVector get_best_model(const std::vector<ClientState>& clients, std::optional<int> best_id,
                           CostLedger& ledger, std::uint64_t epsilon_bytes) {
    if (!best_id) throw ProtocolError("get_best_model: no best client has been assigned");
    if (*best_id < 0 || static_cast<std::size_t>(*best_id) >= clients.size())
        throw ProtocolError("get_best_model: client " + std::to_string(*best_id) + " does not exist");
    const ParamVector& params = clients[static_cast<std::size_t>(*best_id)].current_params;
    ledger.up_bytes += model_bytes(params);
    ledger.down_bytes += epsilon_bytes;
    return params;
}

std::vector<ClientState> make_clients(const FlData& data, std::size_t num_clients,
                                      std::uint64_t seed) {
    if (data.partition.num_clients() != num_clients)
        throw ConfigError("make_clients: partition has " +
                          std::to_string(data.partition.num_clients()) + " shards for " +
                          std::to_string(num_clients) + " clients");
    std::vector<ClientState> clients;
    clients.reserve(num_clients);
    for (std::size_t k = 0; k < num_clients; ++k) {
        ClientSplit split = split_holdout(data.partition.assignments[k]);
        clients.push_back(ClientState{static_cast<int>(k), std::move(split.train),
                                      std::move(split.holdout), {}, {}, {},
                                      Rng(derive_seed(seed, stream::client, k)), {}});
    }
    // Views are set after the vector stops moving things around.
    for (std::size_t k = 0; k < num_clients; ++k) {
        ClientState& c = clients[k];
        c.shard = DatasetView{&data.train, data.partition.assignments[k]};
        c.train = DatasetView{&data.train, c.train_indices};
        c.holdout = DatasetView{&data.train, c.holdout_indices};
    }
    return clients;
}

namespace {

struct ClientRoundOutcome {
    int client_id = 0;
    ParamVector params;
    double train_loss = 0.0;
    float score = 0.0f;
    std::uint64_t refine_evals = 0;
};

double metric_value(const EvalResult& e, ScoreMetric m) {
    return m == ScoreMetric::loss ? e.loss : 1.0 - e.accuracy;
}

ClientRoundOutcome averaging_client_round(ClientState& c, const ParamVector& global,
                                          const ExperimentConfig& cfg) {
    ClientRoundOutcome out;
    out.client_id = c.client_id;
    out.params = train_epochs(global, c.shard, cfg.client_epochs, cfg.learning_rate,
                              cfg.batch_size, c.rng);
    out.train_loss = view_loss(out.params, c.shard);
    return out;
}

ClientRoundOutcome scoring_client_round(ClientState& c, const ParamVector& global,
                                        const ExperimentConfig& cfg, Refiner refiner) {
    ClientRoundOutcome out;
    out.client_id = c.client_id;
    ParamVector params = global;
    if (refiner != Refiner::bwo)
        params = train_epochs(params, c.train, cfg.client_epochs, cfg.learning_rate,
                              cfg.batch_size, c.rng);
    if (refiner == Refiner::sgd) {
        out.score = static_cast<float>(metric_value(evaluate(params, c.holdout), cfg.score_metric));
        out.params = std::move(params);
    } else {
        auto fitness = [&](const ParamVector& p) {
            return metric_value(evaluate(p, c.holdout), cfg.score_metric);
        };
        RefineResult refined = client_bwo_refine(params, fitness, cfg.bwo, c.rng);
        out.score = static_cast<float>(refined.best_loss);
        out.params = std::move(refined.best);
        out.refine_evals = refined.stats.total_evaluations;
    }
    out.train_loss = view_loss(out.params, c.train);
    return out;
}

// Runs the given clients' round work, possibly in parallel. Each task owns
// its ClientState and output slot, so the only synchronization is the join;
// results come back in the order of `ids` regardless of scheduling.
std::vector<ClientRoundOutcome> run_round_clients(std::vector<ClientState>& clients,
                                                  std::span<const int> ids,
                                                  const ParamVector& global,
                                                  const ExperimentConfig& cfg, bool scoring,
                                                  Refiner refiner) {
    std::vector<ClientRoundOutcome> out(ids.size());
    auto task = [&](std::size_t i) {
        ClientState& c = clients[static_cast<std::size_t>(ids[i])];
        out[i] = scoring ? scoring_client_round(c, global, cfg, refiner)
                         : averaging_client_round(c, global, cfg);
    };
    if (cfg.parallel_clients && ids.size() > 1) {
        std::vector<std::future<void>> tasks;
        tasks.reserve(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i)
            tasks.push_back(std::async(std::launch::async, task, i));
        for (auto& t : tasks) t.get();
    } else {
        for (std::size_t i = 0; i < ids.size(); ++i) task(i);
    }
    return out;
}

DatasetView whole_test_view(const Dataset& test, std::vector<std::int32_t>& storage) {
    storage.resize(test.size());
    std::iota(storage.begin(), storage.end(), 0);
    return DatasetView{&test, storage};
}

StopPolicy effective_policy(const ExperimentConfig& cfg) {
    StopPolicy p = cfg.stop;
    p.max_rounds = cfg.global_rounds;
    return p;
}

double mean_train_loss(const std::vector<ClientRoundOutcome>& outcomes) {
    double sum = 0.0;
    for (const auto& o : outcomes) sum += o.train_loss;
    return sum / static_cast<double>(outcomes.size());
}

} // namespace

RunReport run_fedavg(const ExperimentConfig& config, const FlData& data, Rng& server_rng,
                     const RoundObserver& observer) {
    config.validate();
    std::vector<ClientState> clients = make_clients(data, config.num_clients, config.seed);
    const auto arch = config.architecture(data.train.dim(), data.train.num_classes);
    Rng init_rng(derive_seed(config.seed, stream::model_init));

    ServerState server;
    server.global_params = init_params(arch, init_rng);
    server.best_score = std::numeric_limits<float>::infinity();

    RunReport report;
    report.strategy = Strategy::fedavg;
    report.seed = config.seed;
    report.num_clients = config.num_clients;
    report.fraction = config.fraction;
    report.selected_per_round = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::floor(config.fraction * static_cast<double>(config.num_clients))),
        1, config.num_clients);
    report.model_size_bytes = model_bytes(server.global_params);
    report.epsilon_bytes = config.epsilon;
    report.param_count = server.global_params.size();

    std::vector<std::int32_t> test_storage;
    const DatasetView test_view = whole_test_view(data.test, test_storage);
    const StopPolicy policy = effective_policy(config);

    for (int round = 1; round <= config.global_rounds; ++round) {
        const auto t0 = std::chrono::steady_clock::now();
        const std::vector<int> selected = select_clients(config.fraction, config.num_clients, server_rng);
        auto outcomes = run_round_clients(clients, selected, server.global_params, config,
                                          /*scoring=*/false, config.client_refiner);

        std::vector<WeightedUpdate> updates;
        updates.reserve(outcomes.size());
        for (std::size_t i = 0; i < outcomes.size(); ++i) {
            clients[static_cast<std::size_t>(outcomes[i].client_id)].current_params = outcomes[i].params;
            updates.push_back(WeightedUpdate{std::move(outcomes[i].params),
                                             clients[static_cast<std::size_t>(outcomes[i].client_id)].shard.size()});
        }
        server.global_params = aggregate_weighted(updates);
        server.round = round;

        const CostLedger ledger = fedavg_round_cost(selected.size(), report.model_size_bytes);
        const EvalResult ev = evaluate(server.global_params, test_view);
        server.history.push_back(RoundEval{ev.accuracy, ev.loss});

        RoundRow row;
        row.round = round;
        row.train_loss = mean_train_loss(outcomes);
        row.test_accuracy = ev.accuracy;
        row.test_loss = ev.loss;
        row.up_bytes = ledger.up_bytes;
        row.down_bytes = ledger.down_bytes;
        row.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0).count();
        report.rows.push_back(row);

        if (observer) {
            std::vector<ParamVector> uploaded;
            uploaded.reserve(updates.size());
            for (const auto& u : updates) uploaded.push_back(u.params);
            observer(RoundSnapshot{round, server.global_params, uploaded, selected,
                                   {}, std::nullopt, server.best_score});
        }

        const StopCheck sc = check_stop(server.history, policy);
        if (sc.stop) {
            report.stop_reason = sc.reason;
            break;
        }
    }
    report.finalize_totals();
    return report;
}

RunReport run_fedx(const ExperimentConfig& config, const FlData& data, Rng& server_rng,
                   Refiner refiner, const RoundObserver& observer) {
    config.validate();
    (void)server_rng;  // scoring rounds involve every client; nothing to draw
    std::vector<ClientState> clients = make_clients(data, config.num_clients, config.seed);
    const auto arch = config.architecture(data.train.dim(), data.train.num_classes);
    Rng init_rng(derive_seed(config.seed, stream::model_init));

    ServerState server;
    server.global_params = init_params(arch, init_rng);
    server.best_score = std::numeric_limits<float>::infinity();

    RunReport report;
    report.strategy = config.strategy == Strategy::fedavg
                          ? (refiner == Refiner::sgd ? Strategy::hillclimb : Strategy::fedbwo)
                          : config.strategy;
    report.seed = config.seed;
    report.num_clients = config.num_clients;
    report.fraction = 1.0;  // every client participates every round
    report.selected_per_round = config.num_clients;
    report.model_size_bytes = model_bytes(server.global_params);
    report.epsilon_bytes = config.epsilon;
    report.param_count = server.global_params.size();

    std::vector<int> all_ids(config.num_clients);
    std::iota(all_ids.begin(), all_ids.end(), 0);

    std::vector<std::int32_t> test_storage;
    const DatasetView test_view = whole_test_view(data.test, test_storage);
    const StopPolicy policy = effective_policy(config);

    for (int round = 1; round <= config.global_rounds; ++round) {
        const auto t0 = std::chrono::steady_clock::now();
        auto outcomes = run_round_clients(clients, all_ids, server.global_params, config,
                                          /*scoring=*/true, refiner);

        CostLedger ledger;
        ledger.down_bytes += static_cast<std::uint64_t>(config.num_clients) * report.model_size_bytes;

        std::vector<ScoreReport> scores;
        scores.reserve(outcomes.size());
        std::optional<int> round_best;
        float round_best_score = std::numeric_limits<float>::infinity();
        for (auto& o : outcomes) {
            clients[static_cast<std::size_t>(o.client_id)].current_params = std::move(o.params);
            const ScoreReport sr{static_cast<std::uint32_t>(o.client_id), o.score};
            const auto wire = encode_score_report(sr);
            report.score_wire.insert(report.score_wire.end(), wire.begin(), wire.end());
            ledger.up_bytes += 4;  // only the score crosses the wire here
            scores.push_back(sr);
            report.refine_evaluations += o.refine_evals;
            if (sr.score < round_best_score) {  // strict: ties keep the lower id
                round_best_score = sr.score;
                round_best = o.client_id;
            }
        }
        if (!round_best)
            throw ProtocolError("run_fedx: round " + std::to_string(round) + " collected no scores");
        if (round_best_score < server.best_score) {
            server.best_score = round_best_score;
            server.best_id = round_best;
        }

        ParamVector fetched = get_best_model(clients, round_best, ledger, config.epsilon);
        if (!fetched.same_shape(server.global_params))
            throw ProtocolError("run_fedx: model fetched from client " +
                                std::to_string(*round_best) + " has a mismatched shape");
        server.global_params = std::move(fetched);
        server.round = round;

        const EvalResult ev = evaluate(server.global_params, test_view);
        server.history.push_back(RoundEval{ev.accuracy, ev.loss});

        RoundRow row;
        row.round = round;
        row.train_loss = mean_train_loss(outcomes);
        row.test_accuracy = ev.accuracy;
        row.test_loss = ev.loss;
        row.best_client_id = round_best;
        row.up_bytes = ledger.up_bytes;
        row.down_bytes = ledger.down_bytes;
        row.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0).count();
        report.rows.push_back(row);

        if (observer) {
            std::vector<ParamVector> uploaded;
            uploaded.reserve(clients.size());
            for (const auto& c : clients) uploaded.push_back(c.current_params);
            observer(RoundSnapshot{round, server.global_params, uploaded, all_ids, scores,
                                   round_best, server.best_score});
        }

        const StopCheck sc = check_stop(server.history, policy);
        if (sc.stop) {
            report.stop_reason = sc.reason;
            break;
        }
    }
    report.finalize_totals();
    return report;
}

} // namespace fedsim
