#pragma once

#include <vector>

#include "ospn/tensor.hpp"

namespace ospn {

// Adam state for one parameter set. m/v run parallel to the model's params.
// v is the "moving average of the second order" moment the pruning criterion
// reads; masked weights keep updating it from their zero gradients, so their
// v decays by beta2 per step instead of being frozen.
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step_count = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;

    void init(const std::vector<ParamTensor>& params);
};

// Standard bias-corrected Adam update over all params, then zeroes grads and
// increments step_count. Throws StateError when no gradient is fresh (no
// backward since the last step).
void adam_step(std::vector<ParamTensor>& params, AdamState& state);

} // namespace ospn
