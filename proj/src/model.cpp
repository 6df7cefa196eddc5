#include "ospn/model.hpp"

#include <cmath>
#include <cstring>

#include "ospn/error.hpp"
#include "ospn/strings.hpp"

namespace ospn {

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
    Tensor t = Tensor::zeros({rows, cols});
    for (double& v : t.data) v = stddev * rng.normal();
    return t;
}

void hash_tensor(std::uint64_t& h, const Tensor& t) {
    for (double v : t.data) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        h ^= bits;
        h *= 0x100000001b3ULL;
    }
}

} // namespace

void ModelArch::validate() const {
    if (input_dim == 0 || hidden_width == 0 || num_hidden_layers == 0 || num_classes < 2) {
        throw ValueError("bad architecture: all dims positive, at least 2 classes");
    }
    if (hidden_width % kBlockRows != 0) {
        throw ValueError("hidden width " + std::to_string(hidden_width) + " not divisible by " +
                         std::to_string(kBlockRows));
    }
}

SupernetModel SupernetModel::create(const ModelArch& arch, const AdamState& adam_hyper,
                                    std::uint64_t init_seed) {
    arch.validate();
    SupernetModel model;
    model.arch = arch;
    Rng rng(derive_seed(init_seed, stream::kModelInit, 0));

    const auto he = [](std::size_t fan_in) { return std::sqrt(2.0 / static_cast<double>(fan_in)); };
    model.params.emplace_back("in.w", random_matrix(arch.hidden_width, arch.input_dim,
                                                    he(arch.input_dim), rng));
    model.params.emplace_back("in.b", Tensor::zeros({arch.hidden_width}));
    for (std::size_t l = 0; l < arch.num_hidden_layers; ++l) {
        const std::string tag = "hidden" + std::to_string(l);
        model.params.emplace_back(tag + ".w", random_matrix(arch.hidden_width, arch.hidden_width,
                                                            he(arch.hidden_width), rng));
        model.params.emplace_back(tag + ".b", Tensor::zeros({arch.hidden_width}));
    }
    // Small output init keeps initial logits near zero (uniform predictions).
    model.params.emplace_back("out.w", random_matrix(arch.num_classes, arch.hidden_width, 0.01, rng));
    model.params.emplace_back("out.b", Tensor::zeros({arch.num_classes}));

    model.adam = adam_hyper;
    model.adam.init(model.params);
    return model;
}

ArchSizes SupernetModel::arch_sizes() const {
    ArchSizes sizes;
    sizes.layers.push_back({arch.hidden_width * arch.input_dim, arch.hidden_width, false});
    for (std::size_t l = 0; l < arch.num_hidden_layers; ++l) {
        sizes.layers.push_back({arch.hidden_width * arch.hidden_width, arch.hidden_width, true});
    }
    sizes.layers.push_back({arch.num_classes * arch.hidden_width, arch.num_classes, false});
    return sizes;
}

SearchSpace SupernetModel::default_space(const std::vector<double>& allowed) const {
    SearchSpace space;
    space.num_layers = arch.num_hidden_layers;
    space.allowed_ratios = allowed;
    space.validate();
    return space;
}

std::uint64_t SupernetModel::state_checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const ParamTensor& p : params) hash_tensor(h, p.value);
    for (const Tensor& t : adam.m) hash_tensor(h, t);
    for (const Tensor& t : adam.v) hash_tensor(h, t);
    h ^= static_cast<std::uint64_t>(adam.step_count);
    h *= 0x100000001b3ULL;
    h ^= static_cast<std::uint64_t>(train_steps);
    return h;
}

std::vector<BlockMask> compute_masks(const SupernetModel& model,
                                     const std::vector<double>& effective_sparsities) {
    if (effective_sparsities.size() != model.arch.num_hidden_layers) {
        throw ValueError("expected " + std::to_string(model.arch.num_hidden_layers) +
                         " sparsities, got " + std::to_string(effective_sparsities.size()));
    }
    std::vector<BlockMask> masks;
    masks.reserve(effective_sparsities.size());
    for (std::size_t l = 0; l < effective_sparsities.size(); ++l) {
        const double s = effective_sparsities[l];
        const ParamTensor& w = model.hidden_w(l);
        if (s == 0.0) {
            masks.push_back(BlockMask::all_keep(w.value.rows(), w.value.cols()));
            continue;
        }
        const Tensor scores = adam_prune_score(w.value, model.adam.v[model.hidden_w_index(l)],
                                               model.adam.step_count, model.adam.beta2,
                                               model.adam.eps);
        masks.push_back(build_block_mask(block_scores(scores), s));
    }
    return masks;
}

Graph::NodeId forward_subnet(SupernetModel& model, const std::vector<double>& effective_sparsities,
                             Graph& g, Graph::NodeId x, bool train_mode, Rng* rng) {
    if (train_mode && rng == nullptr) {
        throw ValueError("train-mode forward needs an rng for dropout");
    }
    const std::vector<BlockMask> masks = compute_masks(model, effective_sparsities);

    Graph::NodeId h = g.relu(g.linear(x, model.input_w(), model.input_b()));
    if (train_mode) h = g.dropout(h, adaptive_dropout_rate(0.0), *rng);
    for (std::size_t l = 0; l < model.arch.num_hidden_layers; ++l) {
        h = g.relu(g.linear(h, model.hidden_w(l), model.hidden_b(l), &masks[l]));
        if (train_mode) h = g.dropout(h, adaptive_dropout_rate(effective_sparsities[l]), *rng);
    }
    return g.linear(h, model.output_w(), model.output_b());
}

Tensor forward_subnet_eval(const SupernetModel& model,
                           const std::vector<double>& effective_sparsities, const Tensor& x) {
    const std::vector<BlockMask> masks = compute_masks(model, effective_sparsities);

    Tensor h = linear_forward(x, model.params[0].value, model.params[1].value, nullptr);
    for (double& v : h.data) v = v > 0.0 ? v : 0.0;
    for (std::size_t l = 0; l < model.arch.num_hidden_layers; ++l) {
        h = linear_forward(h, model.params[model.hidden_w_index(l)].value,
                           model.params[model.hidden_w_index(l) + 1].value, &masks[l]);
        for (double& v : h.data) v = v > 0.0 ? v : 0.0;
    }
    return linear_forward(h, model.params[model.output_w_index()].value,
                          model.params[model.output_w_index() + 1].value, nullptr);
}

} // namespace ospn
