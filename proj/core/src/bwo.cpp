#include "fedsim/bwo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "fedsim/errors.hpp"

namespace fedsim {

namespace {

// Evaluates a candidate, folds it into the running best, and counts the call.
struct Evaluator {
    const FitnessFn& fitness;
    Candidate best;
    bool has_best = false;
    std::size_t calls = 0;

    void eval(Candidate& c, std::size_t generation) {
        c.fitness = fitness(c.genome);
        c.evaluated = true;
        ++calls;
        if (!std::isfinite(c.fitness)) {
            throw NumericError("bwo: fitness returned a non-finite value at generation " +
                               std::to_string(generation));
        }
        if (!has_best || c.fitness < best.fitness) {
            best = c;
            has_best = true;
        }
    }
};

// Indices of the survivors after removing floor(size*Pc) worst members.
std::vector<std::size_t> survivor_indices(const std::vector<Candidate>& members, double rate) {
    const std::size_t remove = static_cast<std::size_t>(
        std::floor(static_cast<double>(members.size()) * rate));
    if (remove >= members.size()) {
        throw ConfigError("cannibalize: removal of " + std::to_string(remove) +
                          " would empty a population of " + std::to_string(members.size()));
    }
    std::vector<std::size_t> order(members.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return members[a].fitness < members[b].fitness;
    });
    order.resize(members.size() - remove);
    std::sort(order.begin(), order.end());
    return order;
}

// Parent pool = best half (at least 2); one pair = two distinct pool members.
std::vector<std::pair<std::size_t, std::size_t>> draw_pairs(const std::vector<Candidate>& members,
                                                            std::size_t num_pairs, Rng& rng) {
    std::vector<std::size_t> order(members.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return members[a].fitness < members[b].fitness;
    });
    const std::size_t pool = std::max<std::size_t>(2, members.size() / 2);

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    pairs.reserve(num_pairs);
    for (std::size_t i = 0; i < num_pairs; ++i) {
        const std::size_t a = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool) - 1));
        std::size_t b = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool) - 2));
        if (b >= a) ++b;
        pairs.emplace_back(order[a], order[b]);
    }
    return pairs;
}

void sort_and_truncate(std::vector<Candidate>& members, std::size_t n) {
    std::stable_sort(members.begin(), members.end(), [](const Candidate& a, const Candidate& b) {
        return a.fitness < b.fitness;
    });
    if (members.size() > n) {
        members.resize(n);
    }
}

// Initial scatter routed through the evaluator so the init sweep counts
// toward the running best and the evaluation total.
Population make_initial(const std::vector<double>& base, const BwoParams& params, Evaluator& ev,
                        Rng& rng) {
    if (params.population_size < 2) {
        throw ConfigError("init_population: population_size must be >= 2");
    }
    for (double v : base) {
        if (!std::isfinite(v)) {
            throw NumericError("init_population: non-finite base coordinate");
        }
    }
    Population pop;
    pop.members.reserve(params.population_size);

    Candidate first;
    first.genome = base;
    ev.eval(first, 0);
    pop.members.push_back(std::move(first));

    for (int i = 1; i < params.population_size; ++i) {
        Candidate c;
        c.genome.resize(base.size());
        for (std::size_t j = 0; j < base.size(); ++j) {
            c.genome[j] = base[j] + rng.normal(0.0, params.init_spread);
        }
        ev.eval(c, 0);
        pop.members.push_back(std::move(c));
    }
    return pop;
}

} // namespace

void BwoParams::validate() const {
    if (population_size < 2) {
        throw ConfigError("bwo.population: must be >= 2");
    }
    if (max_iterations < 1) {
        throw ConfigError("bwo.max_iterations: must be >= 1");
    }
    if (mutation_rate < 0.0 || mutation_rate > 1.0) {
        throw ConfigError("bwo.Pm: must be in [0,1]");
    }
    if (cannibalism_rate < 0.0 || cannibalism_rate >= 1.0) {
        throw ConfigError("bwo.Pc: must be in [0,1)");
    }
    if (mutation_scale <= 0.0) {
        throw ConfigError("bwo.sigma: must be > 0");
    }
    if (init_spread < 0.0) {
        throw ConfigError("bwo.init_spread: must be >= 0");
    }
    // The combined parent+offspring pool must keep at least population_size
    // members through cannibalism, or the selection step cannot refill.
    const std::size_t n = static_cast<std::size_t>(population_size);
    const std::size_t combined = n + 2 * (n / 2);
    const std::size_t removed = static_cast<std::size_t>(
        std::floor(static_cast<double>(combined) * cannibalism_rate));
    if (combined - removed < n) {
        throw ConfigError("bwo.Pc: " + std::to_string(cannibalism_rate) +
                          " removes too many of the combined pool to retain population " +
                          std::to_string(population_size));
    }
}

Population init_population(const std::vector<double>& base, const BwoParams& params,
                           const FitnessFn& fitness, Rng& rng) {
    Evaluator ev{fitness};
    return make_initial(base, params, ev, rng);
}

std::pair<std::vector<double>, std::vector<double>> blend_pair(const std::vector<double>& a,
                                                               const std::vector<double>& b,
                                                               double alpha) {
    if (a.size() != b.size()) {
        throw InvalidInputError("blend_pair: genome length mismatch (" + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()) + ")");
    }
    std::vector<double> c1(a.size());
    std::vector<double> c2(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        c1[i] = alpha * a[i] + (1.0 - alpha) * b[i];
        c2[i] = alpha * b[i] + (1.0 - alpha) * a[i];
    }
    return {std::move(c1), std::move(c2)};
}

std::pair<Candidate, Candidate> procreate(const Candidate& parent_a, const Candidate& parent_b,
                                          Rng& rng) {
    const double alpha = rng.uniform();
    auto [g1, g2] = blend_pair(parent_a.genome, parent_b.genome, alpha);
    Candidate c1;
    c1.genome = std::move(g1);
    Candidate c2;
    c2.genome = std::move(g2);
    return {std::move(c1), std::move(c2)};
}

Population cannibalize(const Population& pop, double cannibalism_rate) {
    const auto keep = survivor_indices(pop.members, cannibalism_rate);
    Population out;
    out.generation = pop.generation;
    out.members.reserve(keep.size());
    for (std::size_t idx : keep) {
        out.members.push_back(pop.members[idx]);
    }
    return out;
}

Candidate mutate(const Candidate& c, double mutation_rate, double sigma, Rng& rng) {
    if (!rng.bernoulli(mutation_rate)) {
        return c;
    }
    Candidate out = c;
    const std::size_t dim = out.genome.size();
    const std::size_t count = static_cast<std::size_t>(
        std::ceil(static_cast<double>(dim) * 0.1));

    // distinct coordinates via a partial Fisher-Yates over the index range
    std::vector<std::size_t> idx(dim);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(dim - i) - 1));
        std::swap(idx[i], idx[j]);
        out.genome[idx[i]] += rng.normal(0.0, sigma);
    }
    out.evaluated = false;
    return out;
}

BwoResult bwo_optimize(const FitnessFn& fitness, std::size_t dim, const BwoParams& params,
                       Rng& rng) {
    if (dim < 1) {
        throw InvalidInputError("bwo_optimize: dim must be >= 1");
    }
    params.validate();

    std::vector<double> base(dim);
    for (double& v : base) {
        v = rng.uniform(-params.init_spread, params.init_spread);
    }

    Evaluator ev{fitness};
    Population pop = make_initial(base, params, ev, rng);

    BwoResult result;
    result.stats.generations.reserve(params.max_iterations);

    const std::size_t n = static_cast<std::size_t>(params.population_size);
    for (int gen = 1; gen <= params.max_iterations; ++gen) {
        GenerationStats gs;
        const std::size_t calls_before = ev.calls;

        // Mating phase over the current population, then combine.
        const auto pairs = draw_pairs(pop.members, n / 2, rng);
        std::vector<Candidate> combined = pop.members;
        for (const auto& [ia, ib] : pairs) {
            auto [c1, c2] = procreate(pop.members[ia], pop.members[ib], rng);
            ev.eval(c1, gen);
            ev.eval(c2, gen);
            combined.push_back(std::move(c1));
            combined.push_back(std::move(c2));
            gs.offspring += 2;
        }

        // Cannibalism on the combined pool.
        Population merged;
        merged.members = std::move(combined);
        merged = cannibalize(merged, params.cannibalism_rate);

        // Mutation of each survivor.
        for (Candidate& c : merged.members) {
            Candidate m = mutate(c, params.mutation_rate, params.mutation_scale, rng);
            if (!m.evaluated) {
                ev.eval(m, gen);
                ++gs.mutated;
            }
            c = std::move(m);
        }

        sort_and_truncate(merged.members, n);
        pop.members = std::move(merged.members);
        pop.generation = static_cast<std::size_t>(gen);

        gs.evaluations = ev.calls - calls_before;
        gs.best_fitness = ev.best.fitness;
        gs.population = pop.members.size();
        result.stats.generations.push_back(gs);
    }

    result.best = ev.best;
    result.stats.total_evaluations = ev.calls;
    return result;
}

RefineResult client_bwo_refine(const ParamVector& start, const ParamFitnessFn& fitness,
                               const BwoParams& params, Rng& rng) {
    params.validate();

    ParamVector current = start;
    // Every evaluation routes through the full vector with the active layer
    // slice spliced in, so the running best covers start itself.
    double best_loss = 0.0;
    bool has_best = false;
    ParamVector best = start;
    BwoStats stats;

    const std::size_t n = static_cast<std::size_t>(params.population_size);

    for (std::size_t layer = 0; layer < current.num_layers(); ++layer) {
        auto slice = current.layer_slice(layer);
        std::vector<double> base(slice.begin(), slice.end());

        ParamVector scratch = current;
        auto scratch_slice = scratch.layer_slice(layer);
        const FitnessFn layer_fitness = [&](const std::vector<double>& genome) {
            for (std::size_t i = 0; i < genome.size(); ++i) {
                scratch_slice[i] = static_cast<float>(genome[i]);
            }
            return fitness(scratch);
        };

        Evaluator ev{layer_fitness};
        Population pop = make_initial(base, params, ev, rng);

        for (int iter = 1; iter <= params.max_iterations; ++iter) {
            GenerationStats gs;
            const std::size_t calls_before = ev.calls;

            // Mutation first, then procreation, then cannibalism.
            for (Candidate& c : pop.members) {
                Candidate m = mutate(c, params.mutation_rate, params.mutation_scale, rng);
                if (!m.evaluated) {
                    ev.eval(m, iter);
                    ++gs.mutated;
                }
                c = std::move(m);
            }

            const auto pairs = draw_pairs(pop.members, n / 2, rng);
            std::vector<Candidate> combined = pop.members;
            for (const auto& [ia, ib] : pairs) {
                auto [c1, c2] = procreate(pop.members[ia], pop.members[ib], rng);
                ev.eval(c1, iter);
                ev.eval(c2, iter);
                combined.push_back(std::move(c1));
                combined.push_back(std::move(c2));
                gs.offspring += 2;
            }

            Population merged;
            merged.members = std::move(combined);
            merged = cannibalize(merged, params.cannibalism_rate);

            sort_and_truncate(merged.members, n);
            pop.members = std::move(merged.members);
            pop.generation = static_cast<std::size_t>(iter);

            gs.evaluations = ev.calls - calls_before;
            gs.best_fitness = ev.best.fitness;
            gs.population = pop.members.size();
            stats.generations.push_back(gs);
        }
        stats.total_evaluations += ev.calls;

        // Commit this layer's best slice before moving on.
        auto current_slice = current.layer_slice(layer);
        for (std::size_t i = 0; i < current_slice.size(); ++i) {
            current_slice[i] = static_cast<float>(ev.best.genome[i]);
        }
        if (!has_best || ev.best.fitness < best_loss) {
            best_loss = ev.best.fitness;
            for (std::size_t i = 0; i < scratch_slice.size(); ++i) {
                scratch_slice[i] = static_cast<float>(ev.best.genome[i]);
            }
            best = scratch;
            has_best = true;
        }
    }

    RefineResult r;
    r.best = std::move(best);
    r.best_loss = best_loss;
    r.stats = std::move(stats);
    return r;
}

FitnessFn benchmark_function(const std::string& id) {
    if (id == "sphere") {
        return [](const std::vector<double>& x) {
            double s = 0.0;
            for (double v : x) s += v * v;
            return s;
        };
    }
    if (id == "rastrigin") {
        return [](const std::vector<double>& x) {
            double s = 10.0 * static_cast<double>(x.size());
            for (double v : x) {
                s += v * v - 10.0 * std::cos(2.0 * std::numbers::pi * v);
            }
            return s;
        };
    }
    if (id == "rosenbrock") {
        return [](const std::vector<double>& x) {
            double s = 0.0;
            for (std::size_t i = 0; i + 1 < x.size(); ++i) {
                const double a = x[i + 1] - x[i] * x[i];
                const double b = 1.0 - x[i];
                s += 100.0 * a * a + b * b;
            }
            return s;
        };
    }
    throw ConfigError("benchmark_function: unknown id '" + id +
                      "' (expected sphere, rastrigin, or rosenbrock)");
}

} // namespace fedsim
