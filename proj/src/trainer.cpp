#include "ospn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "ospn/error.hpp"
#include "ospn/strings.hpp"

namespace ospn {

namespace {

// Compute accounting in full-batch equivalents: one forward+backward over a
// full batch costs 1.0; a forward alone costs a third of that.
constexpr double kForwardFraction = 1.0 / 3.0;

double now_ms() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

void check_loss_finite(double loss, long t) {
    if (!std::isfinite(loss)) {
        throw NumericError("non-finite loss at step " + std::to_string(t));
    }
}

double mean_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    const std::size_t batch = logits.rows();
    const std::size_t classes = logits.cols();
    if (batch == 0) throw ValueError("cross entropy on empty batch");
    double total = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        double max_z = -HUGE_VAL;
        for (std::size_t c = 0; c < classes; ++c) max_z = std::max(max_z, logits.at(b, c));
        double sum = 0.0;
        for (std::size_t c = 0; c < classes; ++c) sum += std::exp(logits.at(b, c) - max_z);
        const double lse = max_z + std::log(sum);
        total += lse - logits.at(b, static_cast<std::size_t>(labels[b]));
    }
    return total / static_cast<double>(batch);
}

Batch gather_batch(const Dataset& data, const std::vector<std::size_t>& perm, std::size_t start,
                   std::size_t count) {
    const std::size_t dim = data.dim();
    Batch out;
    out.features = Tensor::zeros({count, dim});
    out.labels.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t src = perm[start + i];
        std::copy_n(&data.features.data[src * dim], dim, &out.features.data[i * dim]);
        out.labels[i] = data.labels[src];
    }
    return out;
}

// Seed-derived permutation per epoch; the batch for step t depends only on
// (seed, t, n, batch_size), so resumed runs replay the identical stream.
struct EpochPlan {
    long epoch = -1;
    std::vector<std::size_t> perm;
};

Batch batch_for_step(const Dataset& data, const TrainConfig& cfg, long t, EpochPlan& plan) {
    const std::size_t spe = data.size() / cfg.batch_size;
    const long epoch = t / static_cast<long>(spe);
    if (plan.epoch != epoch) {
        plan.perm.resize(data.size());
        std::iota(plan.perm.begin(), plan.perm.end(), 0);
        Rng rng(derive_seed(cfg.seed, stream::kEpochShuffle, static_cast<std::uint64_t>(epoch)));
        rng.shuffle(plan.perm);
        plan.epoch = epoch;
    }
    const std::size_t pos = static_cast<std::size_t>(t) % spe;
    return gather_batch(data, plan.perm, pos * cfg.batch_size, cfg.batch_size);
}

StepMetrics supernet_step_impl(SupernetModel& model, const Batch& batch, long t,
                               const SearchSpace& space, const TrainConfig& cfg, Rng& rng,
                               const TrainHooks* hooks) {
    StepMetrics metrics;
    metrics.step = t;
    metrics.cap = cubic_max_sparsity(t, cfg.schedule);

    const std::array<SparsityConfig, 4> configs = sandwich_sample(space, rng);
    const std::vector<Batch> parts = split_batch(batch, 4);
    const bool distill = cfg.kd_weight > 0.0;
    const std::vector<double> dense(space.num_layers, 0.0);

    double total = 0.0;
    std::vector<Graph> graphs(4);
    for (std::size_t i = 0; i < 4; ++i) {
        SubnetRecord rec;
        rec.config = configs[i];
        rec.effective = clamp_config(configs[i], metrics.cap);

        Graph& g = graphs[i];
        const Graph::NodeId x = g.input(parts[i].features);
        const Graph::NodeId logits = forward_subnet(model, rec.effective, g, x, true, &rng);
        const Graph::NodeId task = g.softmax_cross_entropy(logits, parts[i].labels);
        rec.task_loss = g.scalar(task);

        Graph::NodeId loss = task;
        if (i > 0 && distill) {
            const Tensor teacher_logits = forward_subnet_eval(model, dense, parts[i].features);
            const Graph::NodeId kd = g.kl_distillation(logits, teacher_logits, cfg.kd_temperature);
            rec.kd_loss = g.scalar(kd);
            loss = g.weighted_sum({{task, 1.0 - cfg.kd_weight}, {kd, cfg.kd_weight}});
        }
        rec.loss = g.scalar(loss);
        check_loss_finite(rec.loss, t);
        g.backward(loss, 0.25);

        total += rec.loss;
        metrics.subnets.push_back(std::move(rec));
    }
    metrics.total_loss = total / 4.0;
    metrics.batch_equivalents = 1.0 + (distill ? 3.0 * 0.25 * kForwardFraction : 0.0);

    if (hooks && hooks->before_step) hooks->before_step(model, metrics);
    adam_step(model.params, model.adam);
    return metrics;
}

StepMetrics single_step_impl(SupernetModel& model, const Batch& batch, long t,
                             const SparsityConfig& config, const TrainConfig& cfg, Rng& rng,
                             const SupernetModel* teacher, const TrainHooks* hooks) {
    StepMetrics metrics;
    metrics.step = t;
    metrics.cap = cubic_max_sparsity(t, cfg.schedule);

    SubnetRecord rec;
    rec.config = config;
    rec.effective = clamp_config(config, metrics.cap);

    Graph g;
    const Graph::NodeId x = g.input(batch.features);
    const Graph::NodeId logits = forward_subnet(model, rec.effective, g, x, true, &rng);
    const Graph::NodeId task = g.softmax_cross_entropy(logits, batch.labels);
    rec.task_loss = g.scalar(task);

    Graph::NodeId loss = task;
    double batch_equiv = 1.0;
    if (teacher != nullptr && cfg.kd_weight > 0.0) {
        const std::vector<double> teacher_dense(teacher->arch.num_hidden_layers, 0.0);
        const Tensor teacher_logits = forward_subnet_eval(*teacher, teacher_dense, batch.features);
        const Graph::NodeId kd = g.kl_distillation(logits, teacher_logits, cfg.kd_temperature);
        rec.kd_loss = g.scalar(kd);
        loss = g.weighted_sum({{task, 1.0 - cfg.kd_weight}, {kd, cfg.kd_weight}});
        batch_equiv += kForwardFraction;
    }
    rec.loss = g.scalar(loss);
    check_loss_finite(rec.loss, t);
    g.backward(loss, 1.0);

    metrics.total_loss = rec.loss;
    metrics.subnets.push_back(std::move(rec));
    metrics.batch_equivalents = batch_equiv;

    if (hooks && hooks->before_step) hooks->before_step(model, metrics);
    adam_step(model.params, model.adam);
    return metrics;
}

StepMetrics dsnn_step_impl(SupernetModel& model, const Batch& batch, long t,
                           const TrainConfig& cfg, Rng& rng, const TrainHooks* hooks) {
    StepMetrics metrics;
    metrics.step = t;
    metrics.cap = cubic_max_sparsity(t, cfg.schedule);

    const std::size_t k = cfg.dsnn_ratios.size();
    const double seed_scale = 1.0 / static_cast<double>(k);
    double total = 0.0;
    std::vector<Graph> graphs(k);
    for (std::size_t i = 0; i < k; ++i) {
        SubnetRecord rec;
        rec.config = SparsityConfig::uniform(model.arch.num_hidden_layers, cfg.dsnn_ratios[i]);
        rec.effective = clamp_config(rec.config, metrics.cap);

        Graph& g = graphs[i];
        const Graph::NodeId x = g.input(batch.features);
        const Graph::NodeId logits = forward_subnet(model, rec.effective, g, x, true, &rng);
        const Graph::NodeId task = g.softmax_cross_entropy(logits, batch.labels);
        rec.task_loss = g.scalar(task);
        rec.loss = rec.task_loss;
        check_loss_finite(rec.loss, t);
        g.backward(task, seed_scale);

        total += rec.loss;
        metrics.subnets.push_back(std::move(rec));
    }
    metrics.total_loss = total * seed_scale;
    metrics.batch_equivalents = static_cast<double>(k);

    if (hooks && hooks->before_step) hooks->before_step(model, metrics);
    adam_step(model.params, model.adam);
    return metrics;
}

} // namespace

TrainMode parse_train_mode(const std::string& name) {
    if (name == "supernet") return TrainMode::supernet;
    if (name == "single-nokd") return TrainMode::single_nokd;
    if (name == "single-kd") return TrainMode::single_kd;
    if (name == "dsnn") return TrainMode::dsnn;
    throw ValueError("unknown train mode '" + name + "'");
}

std::string train_mode_name(TrainMode mode) {
    switch (mode) {
        case TrainMode::supernet: return "supernet";
        case TrainMode::single_nokd: return "single-nokd";
        case TrainMode::single_kd: return "single-kd";
        case TrainMode::dsnn: return "dsnn";
    }
    throw ValueError("unknown train mode");
}

void TrainConfig::validate() const {
    if (total_steps < 0) throw ValueError("total_steps must be >= 0");
    if (batch_size == 0) throw ValueError("batch_size must be positive");
    if ((mode == TrainMode::supernet || mode == TrainMode::dsnn) &&
        (batch_size < 4 || batch_size % 4 != 0)) {
        throw ValueError("batch_size must be >= 4 and divisible by 4 in supernet/dsnn modes");
    }
    if (kd_weight < 0.0 || kd_weight > 1.0) throw ValueError("kd_weight outside [0,1]");
    if (kd_temperature <= 0.0) throw ValueError("kd_temperature must be positive");
    if (lr < 0.0) throw ValueError("negative learning rate");
    schedule.validate();
    if (mode == TrainMode::dsnn && dsnn_ratios.empty()) {
        throw ValueError("dsnn mode needs at least one sparsity ratio");
    }
    for (double r : dsnn_ratios) {
        if (r < 0.0 || r >= 1.0) throw ValueError("dsnn ratio outside [0,1)");
    }
}

std::vector<Batch> split_batch(const Batch& batch, std::size_t parts) {
    if (parts == 0) throw ValueError("parts must be positive");
    if (batch.size() == 0 || batch.size() % parts != 0) {
        throw ValueError("batch size " + std::to_string(batch.size()) + " not divisible into " +
                         std::to_string(parts) + " equal parts");
    }
    const std::size_t per = batch.size() / parts;
    const std::size_t dim = batch.features.cols();
    std::vector<Batch> out(parts);
    for (std::size_t p = 0; p < parts; ++p) {
        out[p].features = Tensor::zeros({per, dim});
        std::copy_n(&batch.features.data[p * per * dim], per * dim, out[p].features.data.begin());
        out[p].labels.assign(batch.labels.begin() + static_cast<long>(p * per),
                             batch.labels.begin() + static_cast<long>((p + 1) * per));
    }
    return out;
}

std::array<SparsityConfig, 4> sandwich_sample(const SearchSpace& space, Rng& rng) {
    space.validate();
    const std::vector<double> pool = space.sampleable_ratios();
    std::array<SparsityConfig, 4> out;
    out[0] = SparsityConfig::uniform(space.num_layers, 0.0);
    out[1] = SparsityConfig::uniform(space.num_layers, space.max_sampleable());
    for (std::size_t i = 2; i < 4; ++i) {
        out[i].ratios.resize(space.num_layers);
        for (std::size_t l = 0; l < space.num_layers; ++l) {
            out[i].ratios[l] = pool[rng.below(pool.size())];
        }
    }
    return out;
}

StepMetrics supernet_train_step(SupernetModel& model, const Batch& batch, long t,
                                const SearchSpace& space, const TrainConfig& cfg, Rng& rng) {
    return supernet_step_impl(model, batch, t, space, cfg, rng, nullptr);
}

TrainResult train(SupernetModel& model, const Dataset& train_data, const SearchSpace& space,
                  const TrainConfig& cfg, const SupernetModel* teacher, const TrainHooks* hooks) {
    cfg.validate();
    train_data.validate();
    space.validate();
    if (space.num_layers != model.arch.num_hidden_layers) {
        throw ValueError("search space covers " + std::to_string(space.num_layers) +
                         " layers, model has " + std::to_string(model.arch.num_hidden_layers));
    }
    if (train_data.dim() != model.arch.input_dim ||
        train_data.num_classes != static_cast<int>(model.arch.num_classes)) {
        throw ValueError("dataset shape does not match model architecture");
    }
    if (train_data.size() < cfg.batch_size) {
        throw ValueError("dataset smaller than one batch");
    }
    if (cfg.mode == TrainMode::single_kd) {
        if (teacher == nullptr) throw ValueError("single-kd mode needs a dense teacher model");
        if (teacher->arch.input_dim != model.arch.input_dim ||
            teacher->arch.num_classes != model.arch.num_classes) {
            throw ValueError("teacher architecture incompatible with student");
        }
    }
    model.adam.lr = cfg.lr;

    const SparsityConfig single_config =
        SparsityConfig::uniform(model.arch.num_hidden_layers, cfg.uniform_sparsity);

    TrainResult result;
    result.metrics.reserve(static_cast<std::size_t>(cfg.total_steps));
    EpochPlan plan;
    for (long k = 0; k < cfg.total_steps; ++k) {
        const long t = model.train_steps;
        const Batch batch = batch_for_step(train_data, cfg, t, plan);
        Rng rng(derive_seed(cfg.seed, stream::kTrainStep, static_cast<std::uint64_t>(t)));

        const double t0 = now_ms();
        StepMetrics metrics;
        switch (cfg.mode) {
            case TrainMode::supernet:
                metrics = supernet_step_impl(model, batch, t, space, cfg, rng, hooks);
                break;
            case TrainMode::single_nokd:
                metrics = single_step_impl(model, batch, t, single_config, cfg, rng, nullptr, hooks);
                break;
            case TrainMode::single_kd:
                metrics = single_step_impl(model, batch, t, single_config, cfg, rng, teacher, hooks);
                break;
            case TrainMode::dsnn:
                metrics = dsnn_step_impl(model, batch, t, cfg, rng, hooks);
                break;
        }
        metrics.wall_ms = now_ms() - t0;

        model.train_steps += 1;
        result.total_batch_equivalents += metrics.batch_equivalents;
        result.metrics.push_back(std::move(metrics));
    }
    return result;
}

TrainResult finetune_model(SupernetModel& model, const Dataset& train_data,
                           const SearchSpace& space, const SparsityConfig& config, long steps,
                           const TrainConfig& base_cfg) {
    (void)space;
    if (config.size() != model.arch.num_hidden_layers) {
        throw ValueError("finetune config has wrong layer count");
    }
    TrainConfig cfg = base_cfg;
    cfg.mode = TrainMode::single_nokd;
    cfg.total_steps = steps;
    cfg.validate();
    train_data.validate();
    model.adam.lr = cfg.lr;

    TrainResult result;
    EpochPlan plan;
    for (long k = 0; k < steps; ++k) {
        const long t = model.train_steps;
        const Batch batch = batch_for_step(train_data, cfg, t, plan);
        Rng rng(derive_seed(cfg.seed, stream::kTrainStep, static_cast<std::uint64_t>(t)));
        const double t0 = now_ms();
        StepMetrics metrics = single_step_impl(model, batch, t, config, cfg, rng, nullptr, nullptr);
        metrics.wall_ms = now_ms() - t0;
        model.train_steps += 1;
        result.total_batch_equivalents += metrics.batch_equivalents;
        result.metrics.push_back(std::move(metrics));
    }
    return result;
}

TrainResult finetune_supernet(SupernetModel& model, const Dataset& train_data,
                              const SearchSpace& space, long steps, const TrainConfig& base_cfg) {
    TrainConfig cfg = base_cfg;
    cfg.mode = TrainMode::supernet;
    cfg.total_steps = steps;
    return train(model, train_data, space, cfg);
}

double evaluate(const SupernetModel& model, const SparsityConfig& config, const Dataset& data) {
    data.validate();
    if (config.size() != model.arch.num_hidden_layers) {
        throw ValueError("config has " + std::to_string(config.size()) + " entries, model has " +
                         std::to_string(model.arch.num_hidden_layers) + " prunable layers");
    }
    for (double r : config.ratios) {
        if (r < 0.0 || r >= 1.0) throw ValueError("sparsity outside [0,1): " + format_double(r));
    }
    const Tensor logits = forward_subnet_eval(model, config.ratios, data.features);
    return mean_cross_entropy(logits, data.labels);
}

} // namespace ospn
