#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>

namespace pnnl::testing {

inline constexpr double kFdStep = 1e-6;

// |a - n| / max(|a|, |n|, floor). The floor keeps gradients that are zero
// in exact arithmetic from dividing rounding noise by ~0.
inline double relative_error(double analytic, double numeric, double floor = 1e-5) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Central differences of `loss` with respect to every entry of `params`
// (perturbed in place and restored), compared against `analytic`.
inline double max_fd_error(std::span<double> params, std::span<const double> analytic,
                           const std::function<double()>& loss, double h = kFdStep) {
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + h;
        const double up = loss();
        params[i] = saved - h;
        const double down = loss();
        params[i] = saved;
        worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * h)));
    }
    return worst;
}

}  // namespace pnnl::testing
