#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "ahr/error.hpp"
#include "ahr/net.hpp"

namespace ahr {

// Central-difference gradient oracle. loss_fn must be deterministic and read
// the net's current parameters. Independent of backward(); tests check the
// reverse-mode path against this.
inline std::vector<double> finite_diff_grad(DenseNet& net,
                                            const std::function<double()>& loss_fn,
                                            double step = 1e-5) {
    std::vector<double*> params;
    params.reserve(net.param_count());
    net.for_each_param([&](double& p) { params.push_back(&p); });

    std::vector<double> grad(params.size(), 0.0);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = *params[i];
        *params[i] = saved + step;
        const double lp = loss_fn();
        *params[i] = saved - step;
        const double lm = loss_fn();
        *params[i] = saved;
        require(std::isfinite(lp) && std::isfinite(lm),
                "finite_diff_grad: non-finite loss at parameter ", i);
        grad[i] = (lp - lm) / (2.0 * step);
    }
    return grad;
}

} // namespace ahr
