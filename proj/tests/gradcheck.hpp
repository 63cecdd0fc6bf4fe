#pragma once

// Central finite-difference gradient checking against the autodiff path.

#include "sat/nn.hpp"

#include <cmath>
#include <functional>

namespace gradcheck {

// relative disagreement with a floor to ignore both-zero cases
inline double rel_err(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-9});
    return std::abs(a - b) / scale;
}

// Central finite difference of a scalar-valued rebuild function w.r.t. one
// parameter entry. The rebuild function must reconstruct the whole graph.
inline double central_diff(sat::nn::Var param, size_t index, const std::function<double()>& loss_value,
                           double h = 1e-5) {
    const double saved = param->value.data[index];
    param->value.data[index] = saved + h;
    const double up = loss_value();
    param->value.data[index] = saved - h;
    const double down = loss_value();
    param->value.data[index] = saved;
    return (up - down) / (2.0 * h);
}

} // namespace gradcheck
