#include "safepatch/optim.hpp"

#include <cmath>

namespace safepatch {

AdamState AdamState::init(std::span<Tensor* const> params) {
    AdamState st;
    st.m.reserve(params.size());
    st.v.reserve(params.size());
    for (const Tensor* p : params) {
        st.m.emplace_back(static_cast<size_t>(p->numel()), 0.0);
        st.v.emplace_back(static_cast<size_t>(p->numel()), 0.0);
    }
    return st;
}

void adam_step(std::span<Tensor* const> params, AdamState& state, const AdamConfig& cfg) {
    if (state.m.size() != params.size() || state.v.size() != params.size())
        throw ContractError("adam_step: state does not match parameter list");
    for (size_t pi = 0; pi < params.size(); ++pi) {
        const Tensor& p = *params[pi];
        if (!p.has_grad())
            throw ContractError("adam_step: parameter " + std::to_string(pi) + " has no gradient");
        if (state.m[pi].size() != static_cast<size_t>(p.numel()))
            throw ContractError("adam_step: state shape mismatch at parameter " + std::to_string(pi));
        for (double g : p.grad())
            if (!std::isfinite(g))
                throw NonFiniteError("adam_step: non-finite gradient in parameter " +
                                     std::to_string(pi) + " (shape " + shape_str(p.shape()) + ")");
    }

    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& p = *params[pi];
        auto g = p.grad();
        auto& m = state.m[pi];
        auto& v = state.v[pi];
        double* w = p.data();
        for (size_t i = 0; i < g.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

} // namespace safepatch
