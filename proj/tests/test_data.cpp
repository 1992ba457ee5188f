#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <set>
#include <string>

#include "fedsim/data.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/model.hpp"
#include "fedsim/rng.hpp"

using namespace fedsim;

TEST_CASE("one record parses into one scaled sample") {
    std::vector<std::uint8_t> bytes(3073, 255);
    bytes[0] = 7;
    const Dataset ds = parse_cifar10(bytes);
    CHECK(ds.size() == 1);
    CHECK(ds.dim() == 3072);
    CHECK(ds.labels[0] == 7);
    CHECK(ds.num_classes == 10);
    for (std::size_t j = 0; j < ds.dim(); ++j) REQUIRE(ds.features(0, j) == 1.0f);
}

TEST_CASE("a full batch file has ten thousand records") {
    std::vector<std::uint8_t> bytes(10000u * 3073u, 0);
    CHECK(bytes.size() == 30730000u);
    const Dataset ds = parse_cifar10(bytes);
    CHECK(ds.size() == 10000);
}

TEST_CASE("length not a multiple of the record size names the offset") {
    std::vector<std::uint8_t> bytes(3073 * 2 + 5, 0);
    try {
        parse_cifar10(bytes);
        FAIL("expected a FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("3073") != std::string::npos);
    }
}

TEST_CASE("a label byte over nine names the record") {
    std::vector<std::uint8_t> bytes(3073 * 3, 0);
    bytes[3073] = 10;  // second record
    try {
        parse_cifar10(bytes);
        FAIL("expected a FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("record 1") != std::string::npos);
    }
}

TEST_CASE("serialize then parse preserves labels and quantizes features") {
    const Dataset ds = make_synthetic(64, 3072, 10, 4.0, 99);
    const std::vector<std::uint8_t> bytes = serialize_cifar10(ds);
    REQUIRE(bytes.size() == 64u * 3073u);
    const Dataset back = parse_cifar10(bytes);
    REQUIRE(back.size() == ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        REQUIRE(back.labels[i] == ds.labels[i]);
        for (std::size_t j = 0; j < ds.dim(); ++j) {
            // half a quantization step, plus a little float slack on byte/255
            REQUIRE(std::abs(back.features(i, j) - ds.features(i, j)) <= 0.5f / 255.0f + 1e-6f);
        }
    }
}

TEST_CASE("parser survives a fuzz corpus without crashing") {
    Rng rng(4242);
    int rejected = 0, parsed = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<std::uint8_t> bytes;
        const bool valid_length = rng.bernoulli(0.5);
        const auto records = static_cast<std::size_t>(rng.uniform_int(0, 4));
        std::size_t len = records * 3073;
        if (!valid_length) len += static_cast<std::size_t>(rng.uniform_int(1, 3072));
        bytes.resize(len);
        for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.uniform_int(0, 255));

        try {
            const Dataset ds = parse_cifar10(bytes);
            ++parsed;
            CHECK(ds.size() == records);
            for (std::size_t i = 0; i < ds.size(); ++i)
                for (std::size_t j = 0; j < ds.dim(); ++j) {
                    const float v = ds.features(i, j);
                    REQUIRE(v >= 0.0f);
                    REQUIRE(v <= 1.0f);
                }
        } catch (const FormatError&) {
            ++rejected;
            const bool bad_label = [&] {
                if (len % 3073 != 0) return false;
                for (std::size_t r = 0; r < records; ++r)
                    if (bytes[r * 3073] > 9) return true;
                return false;
            }();
            CHECK((len % 3073 != 0 || bad_label));
        }
    }
    CHECK(parsed > 0);
    CHECK(rejected > 0);
}

TEST_CASE("synthetic blobs are deterministic per seed") {
    const Dataset a = make_synthetic(50, 8, 4, 6.0, 7);
    const Dataset b = make_synthetic(50, 8, 4, 6.0, 7);
    const Dataset c = make_synthetic(50, 8, 4, 6.0, 8);
    REQUIRE(a.size() == b.size());
    CHECK(a.labels == b.labels);
    CHECK(a.features.data == b.features.data);
    CHECK(a.features.data != c.features.data);
}

TEST_CASE("synthetic classes are balanced") {
    const Dataset ds = make_synthetic(10, 4, 10, 2.0, 3);
    std::vector<int> counts(10, 0);
    for (int label : ds.labels) counts[static_cast<std::size_t>(label)]++;
    for (int c : counts) CHECK(c == 1);

    const Dataset uneven = make_synthetic(11, 4, 3, 2.0, 3);
    std::vector<int> counts3(3, 0);
    for (int label : uneven.labels) counts3[static_cast<std::size_t>(label)]++;
    CHECK(*std::max_element(counts3.begin(), counts3.end()) -
              *std::min_element(counts3.begin(), counts3.end()) <=
          1);
}

TEST_CASE("synthetic features stay inside the unit box") {
    const Dataset ds = make_synthetic(300, 16, 4, 6.0, 11);
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (std::size_t j = 0; j < ds.dim(); ++j) {
            REQUIRE(ds.features(i, j) >= 0.0f);
            REQUIRE(ds.features(i, j) <= 1.0f);
        }
    CHECK_THROWS_AS(make_synthetic(10, 0, 2, 1.0, 1), ConfigError);
}

TEST_CASE("well-separated blobs are learnable by the dense model") {
    const Dataset train = make_synthetic(400, 2, 2, 10.0, 21);
    const Dataset test = make_synthetic(100, 2, 2, 10.0, 22);
    std::vector<std::int32_t> train_idx(train.size()), test_idx(test.size());
    for (std::size_t i = 0; i < train_idx.size(); ++i) train_idx[i] = static_cast<std::int32_t>(i);
    for (std::size_t i = 0; i < test_idx.size(); ++i) test_idx[i] = static_cast<std::int32_t>(i);

    Rng init_rng(5);
    Rng train_rng(6);
    ParamVector params = init_params({LayerSpec{2, 2, Activation::identity}}, init_rng);
    params = train_epochs(params, DatasetView{&train, train_idx}, 30, 0.1, 16, train_rng);
    const EvalResult ev = evaluate(params, DatasetView{&test, test_idx});
    CHECK(ev.accuracy > 0.99);
}

TEST_CASE("partition deals shuffled indices round-robin") {
    const Dataset ds = make_synthetic(100, 4, 4, 4.0, 13);
    const Partition part = make_partition(ds, 10, 99);
    REQUIRE(part.num_clients() == 10);
    std::set<std::int32_t> seen;
    for (const auto& shard : part.assignments) {
        CHECK(shard.size() == 10);
        for (std::int32_t idx : shard) CHECK(seen.insert(idx).second);  // disjoint
    }
    CHECK(seen.size() == 100);

    const Dataset ds101 = make_synthetic(101, 4, 4, 4.0, 13);
    const Partition uneven = make_partition(ds101, 10, 99);
    std::vector<std::size_t> sizes;
    for (const auto& shard : uneven.assignments) sizes.push_back(shard.size());
    std::sort(sizes.begin(), sizes.end());
    CHECK(sizes.front() == 10);
    CHECK(sizes.back() == 11);
}

TEST_CASE("partitions cover exactly the index range over random shapes") {
    Rng rng(31337);
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = static_cast<std::size_t>(rng.uniform_int(2, 400));
        const auto k = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(n)));
        const Dataset ds = make_synthetic(n, 3, 2, 2.0, static_cast<std::uint64_t>(trial));
        const Partition part = make_partition(ds, k, static_cast<std::uint64_t>(trial) * 7 + 1);

        std::set<std::int32_t> seen;
        std::size_t total = 0;
        for (const auto& shard : part.assignments) {
            total += shard.size();
            for (std::int32_t idx : shard) REQUIRE(seen.insert(idx).second);
        }
        REQUIRE(total == n);
        REQUIRE(*seen.begin() == 0);
        REQUIRE(*seen.rbegin() == static_cast<std::int32_t>(n - 1));
    }
    CHECK_THROWS_AS(make_partition(make_synthetic(4, 3, 2, 2.0, 1), 5, 1), ConfigError);
}

TEST_CASE("holdout split takes the tail fifth, at least one sample") {
    const std::vector<std::int32_t> ten = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    const ClientSplit split = split_holdout(ten);
    CHECK(split.train == std::vector<std::int32_t>{0, 1, 2, 3, 4, 5, 6, 7});
    CHECK(split.holdout == std::vector<std::int32_t>{8, 9});

    const ClientSplit tiny = split_holdout({4, 2});
    CHECK(tiny.train == std::vector<std::int32_t>{4});
    CHECK(tiny.holdout == std::vector<std::int32_t>{2});

    CHECK_THROWS_AS(split_holdout({1}), ConfigError);
}
