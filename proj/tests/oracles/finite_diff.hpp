#pragma once

// Central finite differences over every entry of a parameter vector.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace oracle {

template <class Loss>
std::vector<double> central_gradient(std::span<double> params, Loss&& loss, double h = 1e-5) {
    std::vector<double> grad(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + h;
        const double up = loss();
        params[i] = saved - h;
        const double down = loss();
        params[i] = saved;
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

/// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    double scale = std::sqrt(std::max(na, nb));
    return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

}  // namespace oracle
