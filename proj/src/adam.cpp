#include "ospn/adam.hpp"

#include <cmath>

#include "ospn/error.hpp"

namespace ospn {

void AdamState::init(const std::vector<ParamTensor>& params) {
    m.clear();
    v.clear();
    for (const ParamTensor& p : params) {
        m.push_back(Tensor::zeros(p.value.shape));
        v.push_back(Tensor::zeros(p.value.shape));
    }
    step_count = 0;
}

void adam_step(std::vector<ParamTensor>& params, AdamState& state) {
    if (state.m.size() != params.size() || state.v.size() != params.size()) {
        throw StateError("Adam state not initialized for this parameter set");
    }
    bool any_fresh = false;
    for (const ParamTensor& p : params) any_fresh = any_fresh || p.grad_fresh;
    if (!any_fresh) {
        throw StateError("adam_step without fresh gradients: call backward first");
    }

    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);

    for (std::size_t p = 0; p < params.size(); ++p) {
        ParamTensor& param = params[p];
        Tensor& m = state.m[p];
        Tensor& v = state.v[p];
        for (std::size_t i = 0; i < param.value.numel(); ++i) {
            const double g = param.grad.data[i];
            if (!std::isfinite(g)) throw NumericError("non-finite gradient in " + param.id);
            m.data[i] = state.beta1 * m.data[i] + (1.0 - state.beta1) * g;
            v.data[i] = state.beta2 * v.data[i] + (1.0 - state.beta2) * g * g;
            const double m_hat = m.data[i] / bc1;
            const double v_hat = v.data[i] / bc2;
            param.value.data[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
        }
        param.zero_grad();
    }
}

} // namespace ospn
