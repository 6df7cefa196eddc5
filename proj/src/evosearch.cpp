#include "ospn/evosearch.hpp"

#include <algorithm>
#include <cmath>

#include "ospn/error.hpp"
#include "ospn/strings.hpp"
#include "ospn/trainer.hpp"

namespace ospn {

namespace {

constexpr std::size_t kEnumerationGuard = 100000;

// Lexicographic config enumeration: last layer varies fastest, ratios ascending.
bool next_config(std::vector<std::size_t>& digits, std::size_t base) {
    for (std::size_t i = digits.size(); i-- > 0;) {
        if (++digits[i] < base) return true;
        digits[i] = 0;
    }
    return false;
}

SparsityConfig config_from_digits(const std::vector<std::size_t>& digits,
                                  const std::vector<double>& pool) {
    SparsityConfig cfg;
    cfg.ratios.reserve(digits.size());
    for (std::size_t d : digits) cfg.ratios.push_back(pool[d]);
    return cfg;
}

SparsityConfig random_config(const SearchSpace& space, const std::vector<double>& pool, Rng& rng) {
    SparsityConfig cfg;
    cfg.ratios.reserve(space.num_layers);
    for (std::size_t l = 0; l < space.num_layers; ++l) {
        cfg.ratios.push_back(pool[rng.below(pool.size())]);
    }
    return cfg;
}

Candidate evaluate_candidate(const SupernetModel& model, const Dataset& valset,
                             const ArchSizes& sizes, SparsityConfig config) {
    Candidate cand;
    cand.val_loss = evaluate(model, config, valset);
    cand.size_bytes = model_size_bytes(config, sizes);
    cand.config = std::move(config);
    return cand;
}

} // namespace

bool dominates(const Candidate& a, const Candidate& b) {
    if (a.val_loss > b.val_loss || a.size_bytes > b.size_bytes) return false;
    return a.val_loss < b.val_loss || a.size_bytes < b.size_bytes;
}

bool ParetoFront::update(const Candidate& cand) {
    if (seen(cand.config)) return false;
    seen_.insert(cand.config.ratios);
    evaluation_log.push_back(cand);

    for (const Candidate& m : members) {
        if (dominates(m, cand)) return false;
    }
    members.erase(std::remove_if(members.begin(), members.end(),
                                 [&](const Candidate& m) { return dominates(cand, m); }),
                  members.end());
    members.push_back(cand);
    return true;
}

std::vector<Candidate> ParetoFront::sorted_members() const {
    std::vector<Candidate> out = members;
    std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
        if (a.size_bytes != b.size_bytes) return a.size_bytes < b.size_bytes;
        return a.config < b.config;
    });
    return out;
}

SparsityConfig mutate(const SparsityConfig& config, double p_m, const SearchSpace& space,
                      Rng& rng) {
    if (p_m < 0.0 || p_m > 1.0) throw ValueError("mutation probability outside [0,1]");
    const std::vector<double> pool = space.sampleable_ratios();
    SparsityConfig out = config;
    for (double& gene : out.ratios) {
        if (rng.uniform01() < p_m) {
            gene = pool[rng.below(pool.size())];
        }
    }
    return out;
}

SparsityConfig crossover(const SparsityConfig& a, const SparsityConfig& b, Rng& rng) {
    if (a.size() != b.size()) throw ValueError("crossover parents of different lengths");
    SparsityConfig out;
    out.ratios.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out.ratios.push_back(rng.uniform01() < 0.5 ? a.ratios[i] : b.ratios[i]);
    }
    return out;
}

ParetoFront evolutionary_search(const SupernetModel& model, const SearchSpace& space,
                                const Dataset& valset, std::size_t budget,
                                const SearchParams& params) {
    space.validate();
    valset.validate();
    const std::vector<double> pool = space.sampleable_ratios();
    const std::size_t space_size = space.config_count();
    const double p_m = params.mutation_prob > 0.0
                           ? params.mutation_prob
                           : 1.0 / static_cast<double>(space.num_layers);
    if (params.crossover_fraction < 0.0 || params.crossover_fraction > 1.0) {
        throw ValueError("crossover_fraction outside [0,1]");
    }
    const ArchSizes sizes = model.arch_sizes();
    Rng rng(derive_seed(params.seed, stream::kSearch, 0));

    // Iteration 0 population.
    std::vector<SparsityConfig> init;
    if (params.exhaustive_init || space_size <= params.initial_population) {
        if (space_size > kEnumerationGuard) {
            throw ValueError("exhaustive init over " + std::to_string(space_size) + " configs");
        }
        std::vector<std::size_t> digits(space.num_layers, 0);
        do {
            init.push_back(config_from_digits(digits, pool));
        } while (next_config(digits, pool.size()));
    } else {
        std::set<std::vector<double>> queued;
        for (double r : pool) {
            init.push_back(SparsityConfig::uniform(space.num_layers, r));
            queued.insert(init.back().ratios);
        }
        std::size_t attempts = 0;
        while (init.size() < params.initial_population && attempts < 1000 * params.initial_population) {
            SparsityConfig cfg = random_config(space, pool, rng);
            if (queued.insert(cfg.ratios).second) init.push_back(std::move(cfg));
            ++attempts;
        }
    }
    if (budget < init.size()) {
        throw ValueError("budget " + std::to_string(budget) + " below initial population " +
                         std::to_string(init.size()));
    }

    ParetoFront front;
    for (SparsityConfig& cfg : init) {
        front.update(evaluate_candidate(model, valset, sizes, std::move(cfg)));
    }

    while (front.evaluation_log.size() < budget && front.evaluation_log.size() < space_size) {
        const std::size_t remaining = budget - front.evaluation_log.size();
        const std::size_t want = std::min(params.children_per_iter, remaining);
        const std::size_t cross_count =
            static_cast<std::size_t>(std::llround(static_cast<double>(want) * params.crossover_fraction));

        std::vector<SparsityConfig> children;
        std::set<std::vector<double>> batch_seen;
        std::size_t attempts = 0;
        const std::size_t max_attempts = 64 * want + 64;
        while (children.size() < want && attempts < max_attempts) {
            ++attempts;
            const Candidate& pa = front.members[rng.below(front.members.size())];
            SparsityConfig child;
            if (children.size() < cross_count) {
                const Candidate& pb = front.members[rng.below(front.members.size())];
                child = mutate(crossover(pa.config, pb.config, rng), p_m, space, rng);
            } else {
                child = mutate(pa.config, p_m, space, rng);
            }
            if (front.seen(child) || batch_seen.count(child.ratios)) continue;
            batch_seen.insert(child.ratios);
            children.push_back(std::move(child));
        }
        // Mutation may stall once the neighborhood of the front is exhausted;
        // fall back to unseen configs so the budget is still spent.
        if (children.size() < want) {
            std::size_t fill_attempts = 0;
            while (children.size() < want && fill_attempts < max_attempts) {
                ++fill_attempts;
                SparsityConfig cfg = random_config(space, pool, rng);
                if (front.seen(cfg) || batch_seen.count(cfg.ratios)) continue;
                batch_seen.insert(cfg.ratios);
                children.push_back(std::move(cfg));
            }
        }
        if (children.size() < want && space_size <= kEnumerationGuard) {
            std::vector<std::size_t> digits(space.num_layers, 0);
            do {
                if (children.size() >= want) break;
                SparsityConfig cfg = config_from_digits(digits, pool);
                if (front.seen(cfg) || batch_seen.count(cfg.ratios)) continue;
                batch_seen.insert(cfg.ratios);
                children.push_back(std::move(cfg));
            } while (next_config(digits, pool.size()));
        }
        if (children.empty()) break;

        for (SparsityConfig& cfg : children) {
            front.update(evaluate_candidate(model, valset, sizes, std::move(cfg)));
        }
    }
    return front;
}

ParetoFront brute_force_front(const SupernetModel& model, const SearchSpace& space,
                              const Dataset& valset) {
    space.validate();
    valset.validate();
    const std::size_t space_size = space.config_count();
    if (space_size > kEnumerationGuard) {
        throw ValueError("brute force over " + std::to_string(space_size) + " configs exceeds guard " +
                         std::to_string(kEnumerationGuard));
    }
    const std::vector<double> pool = space.sampleable_ratios();
    const ArchSizes sizes = model.arch_sizes();

    ParetoFront front;
    std::vector<std::size_t> digits(space.num_layers, 0);
    do {
        front.update(evaluate_candidate(model, valset, sizes, config_from_digits(digits, pool)));
    } while (next_config(digits, pool.size()));
    return front;
}

Candidate select_for_constraint(const ParetoFront& front, std::size_t tau_bytes) {
    if (tau_bytes == 0) throw ValueError("size constraint must be positive");
    if (front.members.empty()) throw ValueError("empty Pareto front");

    const Candidate* best = nullptr;
    std::size_t smallest = front.members.front().size_bytes;
    for (const Candidate& m : front.members) {
        smallest = std::min(smallest, m.size_bytes);
        if (m.size_bytes > tau_bytes) continue;
        if (best == nullptr || m.val_loss < best->val_loss ||
            (m.val_loss == best->val_loss &&
             (m.size_bytes < best->size_bytes ||
              (m.size_bytes == best->size_bytes && m.config < best->config)))) {
            best = &m;
        }
    }
    if (best == nullptr) {
        throw InfeasibleError("no sub-network fits " + std::to_string(tau_bytes) +
                                  " bytes; smallest achievable is " + std::to_string(smallest),
                              smallest);
    }
    return *best;
}

bool fronts_equal(const ParetoFront& a, const ParetoFront& b) {
    const std::vector<Candidate> sa = a.sorted_members();
    const std::vector<Candidate> sb = b.sorted_members();
    if (sa.size() != sb.size()) return false;
    for (std::size_t i = 0; i < sa.size(); ++i) {
        if (!(sa[i].config == sb[i].config) || sa[i].val_loss != sb[i].val_loss ||
            sa[i].size_bytes != sb[i].size_bytes) {
            return false;
        }
    }
    return true;
}

} // namespace ospn
