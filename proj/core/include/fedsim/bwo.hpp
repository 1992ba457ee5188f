#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fedsim/model.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

enum class BlendMode { uniform_alpha };

struct BwoParams {
    int population_size = 8;        // N_pop
    int max_iterations = 5;         // MaxItr
    double mutation_rate = 0.4;     // Pm
    double cannibalism_rate = 0.44; // Pc, fraction of the combined pool removed
    BlendMode blend_mode = BlendMode::uniform_alpha;
    double mutation_scale = 0.02;   // sigma of the sparse Gaussian perturbation
    double init_spread = 0.05;      // sigma of the initial scatter around the base

    // Throws ConfigError when the settings cannot sustain a population of
    // population_size through a full generation.
    void validate() const;
};

struct Candidate {
    std::vector<double> genome;
    double fitness = 0.0;
    bool evaluated = false;
};

struct Population {
    std::vector<Candidate> members;
    std::size_t generation = 0;
};

struct GenerationStats {
    std::size_t offspring = 0;
    std::size_t mutated = 0;
    std::size_t evaluations = 0;  // == offspring + mutated
    double best_fitness = 0.0;    // running best after this generation
    std::size_t population = 0;   // size after selection, == N_pop
};

struct BwoStats {
    std::vector<GenerationStats> generations;
    std::size_t total_evaluations = 0;  // includes the initial population sweep
};

using FitnessFn = std::function<double(const std::vector<double>&)>;

// Member 0 is base unchanged; the rest are base plus per-coordinate
// Gaussian(0, init_spread) noise. All members arrive evaluated.
Population init_population(const std::vector<double>& base, const BwoParams& params,
                           const FitnessFn& fitness, Rng& rng);

// child1 = alpha*a + (1-alpha)*b, child2 = alpha*b + (1-alpha)*a.
std::pair<std::vector<double>, std::vector<double>> blend_pair(const std::vector<double>& a,
                                                               const std::vector<double>& b,
                                                               double alpha);

// Draws one alpha uniform in [0,1] for the pair, then blends.
// Children are returned unevaluated.
std::pair<Candidate, Candidate> procreate(const Candidate& parent_a, const Candidate& parent_b,
                                          Rng& rng);

// Removes exactly floor(size * Pc) members with the worst (highest) fitness.
// Ties keep the earlier index; survivor order is preserved.
Population cannibalize(const Population& pop, double cannibalism_rate);

// With probability Pm, adds Gaussian(0, sigma) noise to ceil(dim * 0.1)
// distinct coordinates chosen uniformly. Fitness is invalidated on change.
Candidate mutate(const Candidate& c, double mutation_rate, double sigma, Rng& rng);

struct BwoResult {
    Candidate best;   // best-ever over every evaluation
    BwoStats stats;
};

// Canonical loop: mating, combine, cannibalism, mutation, sort, select N.
// Starts from a uniform random point in [-init_spread, init_spread]^dim.
BwoResult bwo_optimize(const FitnessFn& fitness, std::size_t dim, const BwoParams& params,
                       Rng& rng);

struct RefineResult {
    ParamVector best;
    double best_loss = 0.0;  // min over every candidate evaluated, start included
    BwoStats stats;
};

using ParamFitnessFn = std::function<double(const ParamVector&)>;

// Client-side variant: one pass over the layers, each layer refined by a
// slice-local population run with the phase order mutation, procreation,
// cannibalism, selection. Other layers stay at their current best values.
RefineResult client_bwo_refine(const ParamVector& start, const ParamFitnessFn& fitness,
                               const BwoParams& params, Rng& rng);

// Named benchmark objectives for standalone validation: "sphere",
// "rastrigin", "rosenbrock". Unknown ids throw ConfigError.
FitnessFn benchmark_function(const std::string& id);

} // namespace fedsim
