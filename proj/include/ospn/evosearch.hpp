#pragma once

#include <cstdint>
#include <set>
#include <vector>

#include "ospn/dataset.hpp"
#include "ospn/model.hpp"
#include "ospn/sparsity.hpp"

namespace ospn {

struct Candidate {
    SparsityConfig config;   // sampleable ratios only, never 0.0
    double val_loss = 0.0;
    std::size_t size_bytes = 0;
};

// a dominates b: no worse in both objectives, strictly better in at least one.
bool dominates(const Candidate& a, const Candidate& b);

// Non-dominated archive plus the log of every candidate ever evaluated.
// Configs are deduped: evaluation is deterministic, so re-scoring is waste.
struct ParetoFront {
    std::vector<Candidate> members;
    std::vector<Candidate> evaluation_log;

    bool seen(const SparsityConfig& config) const { return seen_.count(config.ratios) != 0; }
    // Logs the candidate and inserts it unless dominated; drops members the
    // newcomer dominates. Duplicate configs are ignored entirely.
    bool update(const Candidate& cand);
    // Members ordered by (size, config) for stable export.
    std::vector<Candidate> sorted_members() const;

private:
    std::set<std::vector<double>> seen_;
};

struct SearchParams {
    std::size_t initial_population = 32;
    std::size_t children_per_iter = 16;
    double mutation_prob = 0.0;        // <= 0 means the 1/num_layers default
    double crossover_fraction = 0.5;
    std::uint64_t seed = 1;
    // Seed iteration 0 with the whole space instead of a random population
    // (enumerable spaces only).
    bool exhaustive_init = false;
};

// Resamples each gene independently with probability p_m, uniformly from the
// sampleable ratios.
SparsityConfig mutate(const SparsityConfig& config, double p_m, const SearchSpace& space, Rng& rng);

// Each gene from parent a or b with probability 1/2.
SparsityConfig crossover(const SparsityConfig& a, const SparsityConfig& b, Rng& rng);

// Evolutionary Pareto search over (validation loss, model size). Iteration 0
// evaluates all uniform configs plus a seeded random population; afterwards
// parents are drawn uniformly from the front, children produced half by
// crossover-then-mutate and half by mutate only, deduped against the log,
// until `budget` evaluations are spent. Never touches model weights.
ParetoFront evolutionary_search(const SupernetModel& model, const SearchSpace& space,
                                const Dataset& valset, std::size_t budget,
                                const SearchParams& params);

// Exhaustive oracle; guarded to spaces of at most 1e5 configs.
ParetoFront brute_force_front(const SupernetModel& model, const SearchSpace& space,
                              const Dataset& valset);

// Minimum-loss member with size_bytes <= tau; ties by smaller size, then
// lexicographic config. Throws InfeasibleError naming the smallest achievable
// size when nothing fits.
Candidate select_for_constraint(const ParetoFront& front, std::size_t tau_bytes);

// True when both fronts hold the same (config, loss, size) set.
bool fronts_equal(const ParetoFront& a, const ParetoFront& b);

} // namespace ospn
