#include "ospn/sparsity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ospn/error.hpp"
#include "ospn/strings.hpp"

namespace ospn {

void SearchSpace::validate() const {
    if (num_layers == 0) throw ValueError("search space needs at least one prunable layer");
    if (allowed_ratios.empty() || allowed_ratios.front() != 0.0) {
        throw ValueError("allowed_ratios must contain 0.0 for the dense network");
    }
    for (std::size_t i = 0; i < allowed_ratios.size(); ++i) {
        const double r = allowed_ratios[i];
        if (r < 0.0 || r >= 1.0) throw ValueError("sparsity ratio outside [0,1): " + format_double(r));
        if (i > 0 && allowed_ratios[i] <= allowed_ratios[i - 1]) {
            throw ValueError("allowed_ratios must be strictly increasing");
        }
    }
    if (allowed_ratios.size() < 2) {
        throw ValueError("search space needs at least one nonzero ratio");
    }
}

std::vector<double> SearchSpace::sampleable_ratios() const {
    std::vector<double> out;
    for (double r : allowed_ratios) {
        if (r != 0.0) out.push_back(r);
    }
    return out;
}

double SearchSpace::max_sampleable() const {
    return allowed_ratios.back();
}

std::size_t SearchSpace::config_count() const {
    const std::size_t base = sampleable_ratios().size();
    std::size_t n = 1;
    for (std::size_t l = 0; l < num_layers; ++l) {
        if (n > std::numeric_limits<std::size_t>::max() / base) {
            return std::numeric_limits<std::size_t>::max();
        }
        n *= base;
    }
    return n;
}

SparsityConfig SparsityConfig::uniform(std::size_t layers, double ratio) {
    return SparsityConfig{std::vector<double>(layers, ratio)};
}

SparsityConfig SparsityConfig::parse(const std::string& text) {
    SparsityConfig cfg;
    for (const std::string& tok : split(text, ';')) {
        cfg.ratios.push_back(parse_double(tok));
    }
    return cfg;
}

std::string SparsityConfig::str() const {
    std::string out;
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        if (i) out += ';';
        out += format_double(ratios[i]);
    }
    return out;
}

BlockMask BlockMask::all_keep(std::size_t rows, std::size_t cols) {
    if (rows % kBlockRows != 0) {
        throw DimensionError("mask rows " + std::to_string(rows) + " not divisible by " +
                             std::to_string(kBlockRows));
    }
    BlockMask m;
    m.rows = rows;
    m.cols = cols;
    m.keep.assign((rows / kBlockRows) * cols, 1);
    m.achieved_sparsity = 0.0;
    return m;
}

std::size_t BlockMask::pruned_blocks() const {
    std::size_t n = 0;
    for (std::uint8_t k : keep) n += (k == 0);
    return n;
}

void ScheduleConfig::validate() const {
    if (update_interval <= 0) throw ValueError("update_interval must be positive");
    if (ramp_steps <= 0 || ramp_steps % update_interval != 0) {
        throw ValueError("ramp_steps must be a positive multiple of update_interval");
    }
    if (final_max_sparsity <= 0.0 || final_max_sparsity >= 1.0) {
        throw ValueError("final_max_sparsity must lie in (0,1)");
    }
}

void ArchSizes::validate() const {
    for (const LayerSizes& l : layers) {
        if (l.weight_count == 0) throw ValueError("layer weight count must be positive");
        if (l.prunable && l.weight_count % kBlockRows != 0) {
            throw ValueError("prunable layer weight count not divisible by block size");
        }
    }
}

std::size_t ArchSizes::prunable_layer_count() const {
    std::size_t n = 0;
    for (const LayerSizes& l : layers) n += l.prunable;
    return n;
}

double adaptive_dropout_rate(double s) {
    if (s < 0.0 || s >= 1.0) {
        throw ValueError("sparsity outside [0,1): " + format_double(s));
    }
    return 0.1 * (1.0 - s);
}

Tensor adam_prune_score(const Tensor& weights, const Tensor& second_moment, long step_count,
                        double beta2, double eps) {
    check_same_shape(weights, second_moment, "adam_prune_score");
    Tensor score = Tensor::zeros(weights.shape);
    const double correction = step_count > 0 ? 1.0 - std::pow(beta2, static_cast<double>(step_count)) : 0.0;
    for (std::size_t i = 0; i < weights.numel(); ++i) {
        const double v = second_moment.data[i];
        if (v < 0.0) throw NumericError("negative Adam second moment");
        const double vhat = step_count > 0 ? v / correction : 0.0;
        score.data[i] = std::abs(weights.data[i]) * std::sqrt(vhat + eps);
    }
    return score;
}

Tensor block_scores(const Tensor& weight_scores) {
    const std::size_t rows = weight_scores.rows();
    const std::size_t cols = weight_scores.cols();
    if (rows % kBlockRows != 0) {
        throw DimensionError("score rows " + std::to_string(rows) + " not divisible by " +
                             std::to_string(kBlockRows));
    }
    Tensor grid = Tensor::zeros({rows / kBlockRows, cols});
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t br = r / kBlockRows;
        for (std::size_t c = 0; c < cols; ++c) {
            grid.at(br, c) += weight_scores.at(r, c);
        }
    }
    return grid;
}

std::size_t pruned_block_count(double s, std::size_t n_blocks) {
    if (s < 0.0 || s >= 1.0) {
        throw ValueError("sparsity outside [0,1): " + format_double(s));
    }
    // floor(s * n_blocks) with s interpreted as a 9-decimal-digit fraction.
    const auto numer = static_cast<unsigned long long>(std::llround(s * 1e9));
    const unsigned __int128 product = static_cast<unsigned __int128>(numer) * n_blocks;
    return static_cast<std::size_t>(product / 1000000000ULL);
}

BlockMask build_block_mask(const Tensor& block_score_grid, double s) {
    const std::size_t grid_rows = block_score_grid.rows();
    const std::size_t cols = block_score_grid.cols();
    BlockMask mask = BlockMask::all_keep(grid_rows * kBlockRows, cols);
    const std::size_t n = mask.n_blocks();
    const std::size_t k = pruned_block_count(s, n);
    if (k == 0) return mask;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return block_score_grid.data[a] < block_score_grid.data[b];
    });
    for (std::size_t i = 0; i < k; ++i) {
        mask.keep[order[i]] = 0;
    }
    mask.achieved_sparsity = static_cast<double>(k) / static_cast<double>(n);
    return mask;
}

double cubic_max_sparsity(long t, const ScheduleConfig& cfg) {
    cfg.validate();
    if (t < 0) throw ValueError("negative step");
    long tq = (t / cfg.update_interval) * cfg.update_interval;
    tq = std::min(tq, cfg.ramp_steps);
    const double frac = static_cast<double>(tq) / static_cast<double>(cfg.ramp_steps);
    const double remain = 1.0 - frac;
    return cfg.final_max_sparsity * (1.0 - remain * remain * remain);
}

std::vector<double> clamp_config(const SparsityConfig& config, double cap) {
    if (cap < 0.0 || cap >= 1.0) {
        throw ValueError("cap outside [0,1): " + format_double(cap));
    }
    std::vector<double> out(config.ratios.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::min(config.ratios[i], cap);
    }
    return out;
}

std::size_t model_size_bytes(const SparsityConfig& config, const ArchSizes& arch) {
    arch.validate();
    if (config.size() != arch.prunable_layer_count()) {
        throw ValueError("config has " + std::to_string(config.size()) + " entries for " +
                         std::to_string(arch.prunable_layer_count()) + " prunable layers");
    }
    std::size_t bytes = 0;
    std::size_t prunable_idx = 0;
    for (const LayerSizes& layer : arch.layers) {
        if (layer.prunable) {
            const std::size_t blocks = layer.weight_count / kBlockRows;
            const std::size_t kept = blocks - pruned_block_count(config.ratios[prunable_idx], blocks);
            bytes += kept * kBlockRows * arch.bytes_per_weight;
            ++prunable_idx;
        } else {
            bytes += layer.weight_count * arch.bytes_per_weight;
        }
        bytes += layer.bias_count * arch.bytes_per_weight;
    }
    return bytes;
}

} // namespace ospn
