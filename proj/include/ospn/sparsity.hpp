#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ospn/rng.hpp"
#include "ospn/tensor.hpp"

namespace ospn {

constexpr std::size_t kBlockRows = 8;

// Per-layer sparsity ratios a sub-network may use. 0.0 must be a member but
// is reserved for the dense network: it is excluded from random sampling and
// from the search genome.
struct SearchSpace {
    std::size_t num_layers = 0;
    std::vector<double> allowed_ratios{0.0, 0.5, 0.6, 0.7, 0.8};

    void validate() const;
    std::vector<double> sampleable_ratios() const;
    double max_sampleable() const;
    // |sampleable|^num_layers, saturating at SIZE_MAX on overflow.
    std::size_t config_count() const;
};

// The genome: one sparsity ratio per prunable layer.
struct SparsityConfig {
    std::vector<double> ratios;

    static SparsityConfig uniform(std::size_t layers, double ratio);
    static SparsityConfig parse(const std::string& text);  // "0.5;0.8;0.7"
    std::string str() const;

    std::size_t size() const { return ratios.size(); }
    bool operator==(const SparsityConfig& other) const { return ratios == other.ratios; }
    bool operator<(const SparsityConfig& other) const { return ratios < other.ratios; }
};

// Keep/prune decision per aligned 8x1 block of a [out, in] weight matrix.
// Blocks are indexed row-major over (block_row, col).
struct BlockMask {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t block_rows = kBlockRows;
    std::vector<std::uint8_t> keep;
    double achieved_sparsity = 0.0;

    static BlockMask all_keep(std::size_t rows, std::size_t cols);

    std::size_t n_blocks() const { return keep.size(); }
    std::size_t block_grid_rows() const { return rows / block_rows; }
    bool keep_weight(std::size_t r, std::size_t c) const {
        return keep[(r / block_rows) * cols + c] != 0;
    }
    std::size_t pruned_blocks() const;
};

// Cubic warm-up of the maximum allowed sparsity, re-evaluated every
// update_interval steps.
struct ScheduleConfig {
    double final_max_sparsity = 0.8;
    long ramp_steps = 2048;
    long update_interval = 256;

    void validate() const;
};

// Weight/bias counts per layer, for the byte-size model. bytes_per_weight
// defaults to 1: sizes are reported as if weights were stored quantized to
// one byte each, with sparse-index overhead ignored.
struct LayerSizes {
    std::size_t weight_count = 0;
    std::size_t bias_count = 0;
    bool prunable = false;
};

struct ArchSizes {
    std::vector<LayerSizes> layers;
    std::size_t bytes_per_weight = 1;

    void validate() const;
    std::size_t prunable_layer_count() const;
};

// --- operations -------------------------------------------------------------

// Dropout rate for a layer at sparsity s: 0.1 * (1.0 - s).
double adaptive_dropout_rate(double s);

// Importance score per weight: |w| * sqrt(vhat + eps) with vhat the
// bias-corrected Adam second moment. At step 0 vhat is defined as 0, so the
// ranking degenerates to pure magnitude order.
Tensor adam_prune_score(const Tensor& weights, const Tensor& second_moment, long step_count,
                        double beta2, double eps);

// Sum of the 8 per-weight scores in each block -> [rows/8, cols] grid.
Tensor block_scores(const Tensor& weight_scores);

// Number of blocks pruned at ratio s. Ratios are decimal fractions; the
// product is floored in exact integer arithmetic on s rounded to 9 decimal
// places, so e.g. s=0.7 with 10 blocks prunes 7, not 6 from binary rounding.
std::size_t pruned_block_count(double s, std::size_t n_blocks);

// Prunes exactly pruned_block_count(s, n_blocks) lowest-scoring blocks;
// ties are broken by pruning the lower block index first.
BlockMask build_block_mask(const Tensor& block_score_grid, double s);

// Maximum allowed sparsity at step t along the cubic ramp.
double cubic_max_sparsity(long t, const ScheduleConfig& cfg);

// Per-layer min(ratio, cap). Effective ratios during warm-up need not lie in
// the search space's allowed set.
std::vector<double> clamp_config(const SparsityConfig& config, double cap);

// Bytes of the sub-network at `config`: kept blocks of prunable layers plus
// all non-prunable weights and all biases, one bytes_per_weight each.
std::size_t model_size_bytes(const SparsityConfig& config, const ArchSizes& arch);

} // namespace ospn
