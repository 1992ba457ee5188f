#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "fedsim/config.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/protocol.hpp"

using namespace fedsim;

namespace {

std::vector<RoundEval> accs(std::initializer_list<double> values) {
    std::vector<RoundEval> out;
    for (double a : values) out.push_back(RoundEval{a, 1.0 - a});
    return out;
}

ParamVector linear_params(std::size_t in, std::size_t out, float fill) {
    ParamVector p = zero_params({LayerSpec{in, out, Activation::identity}});
    for (float& v : p.values) v = fill;
    return p;
}

// Blobs at opposite corners of the unit box; client-sized and hand-indexed
// so the tests control exactly which rows belong to whom.
Dataset corner_blobs(std::size_t n, Rng& rng) {
    Dataset ds;
    ds.num_classes = 2;
    ds.features = MatF(n, 2);
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        const double cx = label == 0 ? 0.15 : 0.85;
        ds.features(i, 0) = static_cast<float>(cx + rng.uniform(-0.1, 0.1));
        ds.features(i, 1) = static_cast<float>(cx + rng.uniform(-0.1, 0.1));
        ds.labels[i] = label;
    }
    return ds;
}

void scramble_labels(Dataset& ds, std::size_t from, std::size_t to, Rng& rng) {
    for (std::size_t i = from; i < to; ++i)
        ds.labels[i] = static_cast<int>(rng.uniform_int(0, ds.num_classes - 1));
}

FlData single_shard_data(std::uint64_t seed, std::size_t n) {
    Rng rng(seed);
    FlData data;
    data.train = corner_blobs(n, rng);
    data.test = corner_blobs(40, rng);
    data.partition.assignments.resize(1);
    data.partition.assignments[0].resize(n);
    std::iota(data.partition.assignments[0].begin(), data.partition.assignments[0].end(), 0);
    return data;
}

ExperimentConfig small_config() {
    ExperimentConfig cfg;
    cfg.seed = 11;
    cfg.num_clients = 1;
    cfg.fraction = 1.0;
    cfg.client_epochs = 2;
    cfg.batch_size = 5;
    cfg.global_rounds = 1;
    cfg.learning_rate = 0.05;
    cfg.hidden = {4};
    cfg.stop.accuracy_threshold = 1.0;  // disabled
    cfg.stop.min_delta = 0.0;           // plateau disabled
    cfg.data.synthetic = SyntheticSpec{20, 2, 2, 6.0, 40};
    return cfg;
}

} // namespace

TEST_CASE("stopping: the accuracy threshold fires on the last entry") {
    StopPolicy p;  // tau = 0.70, t = 5, T = 30
    const StopCheck sc = check_stop(accs({0.65, 0.71}), p);
    CHECK(sc.stop);
    CHECK(sc.reason == StopReason::threshold);

    CHECK_FALSE(check_stop(accs({0.71, 0.65}), p).stop);
    CHECK_FALSE(check_stop({}, p).stop);
}

TEST_CASE("stopping: a flat window of t entries is a plateau") {
    StopPolicy p;
    p.accuracy_threshold = 0.9;
    const StopCheck sc = check_stop(accs({0.5, 0.5004, 0.5002, 0.5005, 0.5003}), p);
    CHECK(sc.stop);
    CHECK(sc.reason == StopReason::plateau);

    // One big jump inside the window keeps it alive.
    CHECK_FALSE(check_stop(accs({0.5, 0.5004, 0.52, 0.5205, 0.5203}), p).stop);
    // Four flat entries are not enough for t = 5.
    CHECK_FALSE(check_stop(accs({0.5, 0.5004, 0.5002, 0.5005}), p).stop);
}

TEST_CASE("stopping: min_delta zero disables the plateau entirely") {
    StopPolicy p;
    p.accuracy_threshold = 0.9;
    p.min_delta = 0.0;
    p.patience = 2;
    CHECK_FALSE(check_stop(accs({0.5, 0.5, 0.5}), p).stop);
}

TEST_CASE("stopping: patience one still waits for a real delta") {
    StopPolicy p;
    p.patience = 1;
    p.accuracy_threshold = 0.9;
    CHECK_FALSE(check_stop(accs({0.5}), p).stop);
    const StopCheck sc = check_stop(accs({0.5, 0.5001}), p);
    CHECK(sc.stop);
    CHECK(sc.reason == StopReason::plateau);
}

TEST_CASE("stopping: the budget is the backstop and loses to the threshold") {
    StopPolicy p;
    p.accuracy_threshold = 1.0;
    p.max_rounds = 3;
    const StopCheck budget = check_stop(accs({0.1, 0.3, 0.6}), p);
    CHECK(budget.stop);
    CHECK(budget.reason == StopReason::budget);
    CHECK_FALSE(check_stop(accs({0.999, 0.999}), p).stop);  // tau = 1.0 never fires

    StopPolicy both = p;
    both.accuracy_threshold = 0.5;
    const StopCheck sc = check_stop(accs({0.1, 0.3, 0.6}), both);
    CHECK(sc.stop);
    CHECK(sc.reason == StopReason::threshold);
}

TEST_CASE("score reports serialize to exactly eight little-endian bytes") {
    const auto wire = encode_score_report(ScoreReport{3, 1.5f});
    REQUIRE(wire.size() == 8);
    const std::array<std::uint8_t, 8> expected = {0x03, 0x00, 0x00, 0x00,
                                                  0x00, 0x00, 0xC0, 0x3F};
    CHECK(wire == expected);

    const ScoreReport back = decode_score_report(wire);
    CHECK(back.client_id == 3);
    CHECK(back.score == 1.5f);
}

TEST_CASE("score reports round-trip for random finite payloads") {
    Rng rng(314);
    for (int trial = 0; trial < 200; ++trial) {
        ScoreReport r;
        r.client_id = static_cast<std::uint32_t>(rng.next());
        r.score = static_cast<float>(rng.uniform(-1e6, 1e6));
        const ScoreReport back = decode_score_report(encode_score_report(r));
        REQUIRE(back.client_id == r.client_id);
        REQUIRE(back.score == r.score);
    }
}

TEST_CASE("non-finite or malformed score payloads are rejected") {
    CHECK_THROWS_AS(encode_score_report({1, std::numeric_limits<float>::quiet_NaN()}),
                    ProtocolError);
    CHECK_THROWS_AS(encode_score_report({1, std::numeric_limits<float>::infinity()}),
                    ProtocolError);

    const std::vector<std::uint8_t> short_buf(7, 0);
    CHECK_THROWS_AS(decode_score_report(short_buf), FormatError);
    const std::vector<std::uint8_t> long_buf(9, 0);
    CHECK_THROWS_AS(decode_score_report(long_buf), FormatError);

    const std::vector<std::uint8_t> nan_buf = {0, 0, 0, 0, 0x00, 0x00, 0xC0, 0x7F};
    CHECK_THROWS_AS(decode_score_report(nan_buf), ProtocolError);
}

TEST_CASE("client selection has the promised size, order, and floor") {
    Rng rng(5);
    const auto all = select_clients(1.0, 10, rng);
    CHECK(all == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});

    CHECK(select_clients(0.05, 10, rng).size() == 1);  // floor(0.5) lifts to 1
    CHECK(select_clients(0.35, 10, rng).size() == 3);

    for (int trial = 0; trial < 50; ++trial) {
        const auto picked = select_clients(0.5, 10, rng);
        REQUIRE(picked.size() == 5);
        REQUIRE(std::is_sorted(picked.begin(), picked.end()));
        REQUIRE(std::set<int>(picked.begin(), picked.end()).size() == 5);
        for (int id : picked) REQUIRE((id >= 0 && id < 10));
    }

    CHECK_THROWS_AS(select_clients(1.5, 10, rng), InvalidInputError);
    CHECK_THROWS_AS(select_clients(0.5, 0, rng), InvalidInputError);
}

TEST_CASE("client selection is uniform across ids") {
    Rng rng(777);
    std::array<int, 10> hits{};
    const int trials = 10000;
    for (int t = 0; t < trials; ++t)
        for (int id : select_clients(0.5, 10, rng)) ++hits[static_cast<std::size_t>(id)];
    for (int count : hits) {
        CHECK(count > 4800);  // expectation 5000, sigma = 50
        CHECK(count < 5200);
    }
}

TEST_CASE("aggregation of one update returns it bit for bit") {
    Rng rng(9);
    ParamVector p = init_params({LayerSpec{3, 2, Activation::identity}}, rng);
    const ParamVector out = aggregate_weighted({WeightedUpdate{p, 17}});
    CHECK(out.values == p.values);
}

TEST_CASE("aggregation averages coordinate-wise with shard weights") {
    const ParamVector a = linear_params(1, 2, 0.0f);
    ParamVector first = a;
    first.values = {0.0f, 2.0f, 0.0f, 0.0f};
    ParamVector second = a;
    second.values = {2.0f, 0.0f, 0.0f, 0.0f};
    const ParamVector mean = aggregate_weighted({{first, 5}, {second, 5}});
    CHECK(mean.values == std::vector<float>{1.0f, 1.0f, 0.0f, 0.0f});

    // Unequal weights against an independent double-precision oracle.
    Rng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<WeightedUpdate> updates;
        const std::size_t count = static_cast<std::size_t>(rng.uniform_int(2, 6));
        for (std::size_t k = 0; k < count; ++k) {
            ParamVector p = a;
            for (float& v : p.values) v = static_cast<float>(rng.uniform(-2.0, 2.0));
            updates.push_back({std::move(p), static_cast<std::size_t>(rng.uniform_int(1, 40))});
        }
        const ParamVector got = aggregate_weighted(updates);
        double total = 0.0;
        for (const auto& u : updates) total += static_cast<double>(u.shard_size);
        for (std::size_t i = 0; i < got.size(); ++i) {
            double acc = 0.0;
            for (const auto& u : updates)
                acc += static_cast<double>(u.shard_size) * static_cast<double>(u.params.values[i]);
            REQUIRE(got.values[i] == static_cast<float>(acc / total));
        }
    }
}

TEST_CASE("aggregation rejects shape mismatches and empty input") {
    CHECK_THROWS_AS(aggregate_weighted({}), ProtocolError);

    const ParamVector small = linear_params(1, 2, 0.5f);
    const ParamVector big = linear_params(2, 2, 0.5f);
    try {
        aggregate_weighted({{small, 1}, {big, 1}});
        FAIL("expected ProtocolError");
    } catch (const ProtocolError& e) {
        CHECK(std::string(e.what()).find("update 1") != std::string::npos);
    }

    CHECK_THROWS_AS(aggregate_weighted({{small, 0}}), ProtocolError);
}

TEST_CASE("client construction splits shards into train and holdout views") {
    FlData data = single_shard_data(33, 20);
    data.partition.assignments = {{0, 1, 2, 3, 4, 5, 6, 7, 8, 9},
                                  {10, 11, 12, 13, 14, 15, 16, 17, 18, 19}};
    const auto clients = make_clients(data, 2, 71);
    REQUIRE(clients.size() == 2);
    for (const auto& c : clients) {
        CHECK(c.shard.size() == 10);
        CHECK(c.train.size() == 8);
        CHECK(c.holdout.size() == 2);
        std::set<std::int32_t> all(c.train_indices.begin(), c.train_indices.end());
        all.insert(c.holdout_indices.begin(), c.holdout_indices.end());
        CHECK(all.size() == 10);
    }
    CHECK(clients[0].client_id == 0);
    CHECK(clients[1].holdout_indices == std::vector<std::int32_t>{18, 19});

    CHECK_THROWS_AS(make_clients(data, 3, 71), ConfigError);
}

TEST_CASE("the best model fetch charges the ledger and validates the id") {
    const FlData data = single_shard_data(34, 20);
    auto clients = make_clients(data, 1, 11);
    clients[0].current_params = linear_params(2, 2, 0.25f);

    CostLedger ledger;
    CHECK_THROWS_AS(get_best_model(clients, std::nullopt, ledger, 8), ProtocolError);
    CHECK_THROWS_AS(get_best_model(clients, 4, ledger, 8), ProtocolError);
    CHECK(ledger.total() == 0);

    const ParamVector got = get_best_model(clients, 0, ledger, 8);
    CHECK(got.values == clients[0].current_params.values);
    CHECK(ledger.up_bytes == model_bytes(got));
    CHECK(ledger.down_bytes == 8);
}

TEST_CASE("a single-client averaging round equals plain local training") {
    const FlData data = single_shard_data(35, 20);
    const ExperimentConfig cfg = small_config();

    std::vector<float> observed;
    Rng server_rng(derive_seed(cfg.seed, stream::server));
    const RunReport report = run_fedavg(cfg, data, server_rng, [&](const RoundSnapshot& s) {
        observed = s.global_after.values;
    });

    const auto arch = cfg.architecture(2, 2);
    Rng init_rng(derive_seed(cfg.seed, stream::model_init));
    const ParamVector start = init_params(arch, init_rng);
    const DatasetView shard{&data.train, data.partition.assignments[0]};
    Rng client_rng(derive_seed(cfg.seed, stream::client, 0));
    const ParamVector oracle =
        train_epochs(start, shard, cfg.client_epochs, cfg.learning_rate, cfg.batch_size, client_rng);

    REQUIRE_FALSE(observed.empty());
    CHECK(observed == oracle.values);
    REQUIRE(report.rows.size() == 1);
    CHECK(report.rows[0].up_bytes == report.model_size_bytes);
    CHECK(report.rows[0].down_bytes == report.model_size_bytes);
    CHECK(report.stop_reason == StopReason::budget);
    CHECK(report.strategy == Strategy::fedavg);
    CHECK_FALSE(report.rows[0].best_client_id.has_value());
}

TEST_CASE("a zero learning rate freezes the global model") {
    const FlData data = single_shard_data(36, 20);
    ExperimentConfig cfg = small_config();
    cfg.learning_rate = 0.0;
    cfg.global_rounds = 3;

    Rng server_rng(1);
    const RunReport report = run_fedavg(cfg, data, server_rng);
    REQUIRE(report.rows.size() == 3);
    CHECK(report.rows[0].test_accuracy == report.rows[2].test_accuracy);
    CHECK(report.rows[0].test_loss == report.rows[2].test_loss);
}

TEST_CASE("averaging with a fraction selects the floor of the pool") {
    Rng data_rng(40);
    FlData data;
    data.train = corner_blobs(50, data_rng);
    data.test = corner_blobs(20, data_rng);
    data.partition = make_partition(data.train, 10, 3);

    ExperimentConfig cfg = small_config();
    cfg.num_clients = 10;
    cfg.fraction = 0.35;
    cfg.global_rounds = 2;
    cfg.batch_size = 2;

    std::size_t seen = 0;
    Rng server_rng(2);
    const RunReport report = run_fedavg(cfg, data, server_rng, [&](const RoundSnapshot& s) {
        seen = s.participant_ids.size();
    });
    CHECK(seen == 3);
    CHECK(report.selected_per_round == 3);
    CHECK(report.rows[0].up_bytes == 3 * report.model_size_bytes);
    CHECK(report.rows[0].down_bytes == 3 * report.model_size_bytes);
}

TEST_CASE("a single-client scoring round uploads one score and one model") {
    const FlData data = single_shard_data(37, 20);
    ExperimentConfig cfg = small_config();
    cfg.strategy = Strategy::fedbwo;
    cfg.client_refiner = Refiner::sgd;

    Rng server_rng(3);
    const RunReport report = run_fedx(cfg, data, server_rng, Refiner::sgd);
    REQUIRE(report.rows.size() == 1);
    CHECK(report.rows[0].best_client_id == 0);
    CHECK(report.rows[0].up_bytes == 4 + report.model_size_bytes);
    CHECK(report.rows[0].down_bytes == report.model_size_bytes + cfg.epsilon);
    CHECK(report.score_wire.size() == 8);
    CHECK(report.strategy == Strategy::fedbwo);
    const ScoreReport sr = decode_score_report(report.score_wire);
    CHECK(sr.client_id == 0);
}

TEST_CASE("scoring rounds adopt the best client's exact parameters") {
    Rng data_rng(41);
    FlData data;
    data.train = corner_blobs(60, data_rng);
    scramble_labels(data.train, 30, 60, data_rng);  // client 1 learns noise
    data.test = corner_blobs(40, data_rng);
    data.partition.assignments.resize(2);
    for (std::int32_t i = 0; i < 30; ++i) data.partition.assignments[0].push_back(i);
    for (std::int32_t i = 30; i < 60; ++i) data.partition.assignments[1].push_back(i);

    ExperimentConfig cfg = small_config();
    cfg.num_clients = 2;
    cfg.global_rounds = 10;
    cfg.client_epochs = 3;
    cfg.learning_rate = 0.2;

    int clean_wins = 0;
    float prev_best = std::numeric_limits<float>::infinity();
    Rng server_rng(4);
    const RunReport report =
        run_fedx(cfg, data, server_rng, Refiner::sgd, [&](const RoundSnapshot& s) {
            REQUIRE(s.best_id.has_value());
            REQUIRE(s.scores.size() == 2);
            // The adopted global is the winner's upload, bit for bit.
            REQUIRE(s.global_after.values ==
                    s.client_params[static_cast<std::size_t>(*s.best_id)].values);
            REQUIRE(s.running_best_score <= prev_best);
            prev_best = s.running_best_score;
            if (*s.best_id == 0) ++clean_wins;
        });

    REQUIRE(report.rows.size() == 10);
    CHECK(clean_wins >= 8);
    for (const auto& row : report.rows) {
        CHECK(row.up_bytes == 2 * 4 + report.model_size_bytes);
        CHECK(row.down_bytes == 2 * report.model_size_bytes + cfg.epsilon);
    }
    CHECK(report.score_wire.size() == 10 * 2 * 8);
}

TEST_CASE("scoring runs are byte-identical with and without threads") {
    Rng data_rng(42);
    FlData data;
    data.train = corner_blobs(40, data_rng);
    data.test = corner_blobs(20, data_rng);
    data.partition = make_partition(data.train, 4, 9);

    ExperimentConfig cfg = small_config();
    cfg.num_clients = 4;
    cfg.global_rounds = 2;
    cfg.strategy = Strategy::fedbwo;
    cfg.bwo.population_size = 4;
    cfg.bwo.max_iterations = 2;

    auto run_once = [&](bool parallel) {
        ExperimentConfig c = cfg;
        c.parallel_clients = parallel;
        Rng server_rng(derive_seed(c.seed, stream::server));
        return to_jsonl(run_fedx(c, data, server_rng, Refiner::sgd_bwo));
    };
    const std::string serial = run_once(false);
    CHECK(run_once(true) == serial);
    CHECK(run_once(true) == serial);  // and repeatable
}

TEST_CASE("scoring strategy labels follow the refiner when unset") {
    const FlData data = single_shard_data(38, 20);
    ExperimentConfig cfg = small_config();  // strategy defaults to fedbwo
    cfg.strategy = Strategy::fedavg;        // direct protocol call, label comes from refiner
    cfg.bwo.population_size = 4;
    cfg.bwo.max_iterations = 1;

    Rng r1(1), r2(2);
    CHECK(run_fedx(cfg, data, r1, Refiner::sgd).strategy == Strategy::hillclimb);
    CHECK(run_fedx(cfg, data, r2, Refiner::sgd_bwo).strategy == Strategy::fedbwo);
}

TEST_CASE("an accuracy score metric reports one minus accuracy") {
    const FlData data = single_shard_data(39, 20);
    ExperimentConfig cfg = small_config();
    cfg.score_metric = ScoreMetric::accuracy;
    cfg.client_refiner = Refiner::sgd;

    Rng server_rng(6);
    const RunReport report = run_fedx(cfg, data, server_rng, Refiner::sgd);
    const ScoreReport sr = decode_score_report(report.score_wire);
    CHECK(sr.score >= 0.0f);
    CHECK(sr.score <= 1.0f);
}
