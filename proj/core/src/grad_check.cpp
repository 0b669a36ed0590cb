#include "safepatch/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "safepatch/tape.hpp"

namespace safepatch {

double grad_check(const std::function<Tensor()>& f, std::span<Tensor* const> params,
                  double h, int max_coords, Rng& rng) {
    if (h <= 0.0) throw ContractError("grad_check: h must be positive");

    // Tape gradient.
    std::vector<std::vector<double>> ad(params.size());
    {
        Tape tape;
        Tensor loss = f();
        tape.backward(loss, params);
        for (size_t pi = 0; pi < params.size(); ++pi) {
            auto g = params[pi]->grad();
            ad[pi].assign(g.begin(), g.end());
        }
    }

    double worst = 0.0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& p = *params[pi];
        const int64_t n = p.numel();
        const int64_t coords = std::min<int64_t>(n, max_coords);
        for (int64_t c = 0; c < coords; ++c) {
            const int64_t idx = coords == n
                                    ? c
                                    : static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(n)));
            double* w = p.data();
            const double keep = w[idx];
            w[idx] = keep + h;
            const double fp = f().item();
            w[idx] = keep - h;
            const double fm = f().item();
            w[idx] = keep;
            const double fd = (fp - fm) / (2.0 * h);
            const double ga = ad[pi][static_cast<size_t>(idx)];
            const double rel = std::abs(ga - fd) / std::max(1e-8, std::abs(ga) + std::abs(fd));
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

double grad_check_sampled(const std::function<Tensor()>& f, std::span<Tensor* const> params,
                          double h, int total_coords, Rng& rng) {
    if (h <= 0.0) throw ContractError("grad_check_sampled: h must be positive");

    std::vector<std::vector<double>> ad(params.size());
    {
        Tape tape;
        Tensor loss = f();
        tape.backward(loss, params);
        for (size_t pi = 0; pi < params.size(); ++pi) {
            auto g = params[pi]->grad();
            ad[pi].assign(g.begin(), g.end());
        }
    }

    int64_t total = 0;
    for (const Tensor* p : params) total += p->numel();

    double worst = 0.0;
    for (int c = 0; c < total_coords; ++c) {
        int64_t flat = static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(total)));
        size_t pi = 0;
        while (flat >= params[pi]->numel()) {
            flat -= params[pi]->numel();
            ++pi;
        }
        double* w = params[pi]->data();
        const double keep = w[flat];
        w[flat] = keep + h;
        const double fp = f().item();
        w[flat] = keep - h;
        const double fm = f().item();
        w[flat] = keep;
        const double fd = (fp - fm) / (2.0 * h);
        const double ga = ad[pi][static_cast<size_t>(flat)];
        const double rel = std::abs(ga - fd) / std::max(1e-8, std::abs(ga) + std::abs(fd));
        worst = std::max(worst, rel);
    }
    return worst;
}

} // namespace safepatch
