#pragma once

#include <cstdint>
#include <vector>

#include "ospn/adam.hpp"
#include "ospn/graph.hpp"
#include "ospn/sparsity.hpp"
#include "ospn/tensor.hpp"

namespace ospn {

struct ModelArch {
    std::size_t input_dim = 16;
    std::size_t hidden_width = 32;
    std::size_t num_hidden_layers = 4;  // the prunable ones
    std::size_t num_classes = 4;

    void validate() const;
    bool operator==(const ModelArch&) const = default;
};

// The supernet: input projection, L prunable hidden linear+relu layers, and
// an output projection, all backed by ONE parameter vector with ONE Adam
// state. Sub-networks are views through masks; nothing is ever copied.
struct SupernetModel {
    ModelArch arch;
    std::vector<ParamTensor> params;
    AdamState adam;
    long train_steps = 0;

    static SupernetModel create(const ModelArch& arch, const AdamState& adam_hyper,
                                std::uint64_t init_seed);

    // Param layout: [in.w, in.b, hidden0.w, hidden0.b, ..., out.w, out.b]
    std::size_t input_w_index() const { return 0; }
    std::size_t hidden_w_index(std::size_t l) const { return 2 + 2 * l; }
    std::size_t output_w_index() const { return 2 + 2 * arch.num_hidden_layers; }

    ParamTensor& input_w() { return params[0]; }
    ParamTensor& input_b() { return params[1]; }
    ParamTensor& hidden_w(std::size_t l) { return params[hidden_w_index(l)]; }
    ParamTensor& hidden_b(std::size_t l) { return params[hidden_w_index(l) + 1]; }
    ParamTensor& output_w() { return params[output_w_index()]; }
    ParamTensor& output_b() { return params[output_w_index() + 1]; }
    const ParamTensor& hidden_w(std::size_t l) const { return params[hidden_w_index(l)]; }

    ArchSizes arch_sizes() const;
    SearchSpace default_space(const std::vector<double>& allowed) const;

    // Checksum over values + Adam moments + counters; used to assert that
    // read-only consumers (search, evaluate) left the model untouched.
    std::uint64_t state_checksum() const;
};

// Mask per prunable layer from current weights and Adam second moments
// (recomputed at every use, never cached across steps).
std::vector<BlockMask> compute_masks(const SupernetModel& model,
                                     const std::vector<double>& effective_sparsities);

// Tape forward for training. Dropout runs only in train mode: adaptive rate
// per prunable layer, rate 0.1 after the input projection, none on logits.
Graph::NodeId forward_subnet(SupernetModel& model, const std::vector<double>& effective_sparsities,
                             Graph& g, Graph::NodeId x, bool train_mode, Rng* rng);

// Tape-free eval forward (also the gradient-free teacher pass).
Tensor forward_subnet_eval(const SupernetModel& model,
                           const std::vector<double>& effective_sparsities, const Tensor& x);

} // namespace ospn
