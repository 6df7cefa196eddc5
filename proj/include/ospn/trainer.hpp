#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ospn/dataset.hpp"
#include "ospn/model.hpp"
#include "ospn/sparsity.hpp"

namespace ospn {

enum class TrainMode { supernet, single_nokd, single_kd, dsnn };

TrainMode parse_train_mode(const std::string& name);  // "supernet" | "single-nokd" | ...
std::string train_mode_name(TrainMode mode);

struct TrainConfig {
    TrainMode mode = TrainMode::supernet;
    std::size_t batch_size = 64;
    double lr = 3e-3;
    long total_steps = 0;           // steps to run in this call
    double kd_weight = 0.5;         // alpha in (1-alpha)*task + alpha*distill
    double kd_temperature = 1.0;
    ScheduleConfig schedule;
    std::uint64_t seed = 1;
    double uniform_sparsity = 0.0;  // single modes
    std::vector<double> dsnn_ratios{0.0, 0.5, 0.7, 0.8};

    void validate() const;
};

struct Batch {
    Tensor features;
    std::vector<int> labels;
    std::size_t size() const { return labels.size(); }
};

struct SubnetRecord {
    SparsityConfig config;             // sampled config (pre-clamp)
    std::vector<double> effective;     // after the warm-up cap
    double loss = 0.0;                 // combined (1-a)*task + a*kd
    double task_loss = 0.0;
    std::optional<double> kd_loss;     // absent when distillation is off
};

struct StepMetrics {
    long step = 0;  // global step index
    double cap = 0.0;
    std::vector<SubnetRecord> subnets;
    double total_loss = 0.0;           // mean of sub-network losses
    double batch_equivalents = 0.0;    // compute cost of this step
    double wall_ms = 0.0;
};

struct TrainResult {
    std::vector<StepMetrics> metrics;
    double total_batch_equivalents = 0.0;
};

// Called after gradient accumulation and before the optimizer step, when
// params still hold the step's accumulated gradients.
struct TrainHooks {
    std::function<void(const SupernetModel&, const StepMetrics&)> before_step;
};

// Contiguous equal quarters, in input order.
std::vector<Batch> split_batch(const Batch& batch, std::size_t parts = 4);

// Sandwich rule: [dense, all-layers-max, random, random], the random genes
// drawn i.i.d. per layer from the sampleable ratios.
std::array<SparsityConfig, 4> sandwich_sample(const SearchSpace& space, Rng& rng);

// One supernet step: cap from the cubic schedule, four clamped sandwich
// configs on four batch quarters, in-place distillation of the sparse three
// from gradient-free dense logits, mean-of-four gradient, one Adam step.
StepMetrics supernet_train_step(SupernetModel& model, const Batch& batch, long t,
                                const SearchSpace& space, const TrainConfig& cfg, Rng& rng);

// Runs cfg.total_steps steps of the configured mode, continuing from
// model.train_steps. `teacher` is required by single_kd and ignored otherwise.
TrainResult train(SupernetModel& model, const Dataset& train_data, const SearchSpace& space,
                  const TrainConfig& cfg, const SupernetModel* teacher = nullptr,
                  const TrainHooks* hooks = nullptr);

// Continued training of one fixed sub-network (task loss, full batches).
TrainResult finetune_model(SupernetModel& model, const Dataset& train_data,
                           const SearchSpace& space, const SparsityConfig& config, long steps,
                           const TrainConfig& base_cfg);

// Continued supernet training.
TrainResult finetune_supernet(SupernetModel& model, const Dataset& train_data,
                              const SearchSpace& space, long steps, const TrainConfig& base_cfg);

// Mean task loss at `config` over the dataset, eval mode. Deterministic and
// read-only: masks come from the current weights and Adam state.
double evaluate(const SupernetModel& model, const SparsityConfig& config, const Dataset& data);

} // namespace ospn
