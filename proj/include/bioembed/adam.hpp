#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "bioembed/model.hpp"

namespace bioembed {

struct AdamState {
    std::int64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::vector<Eigen::VectorXd> first_moment;   // one per parameter block
    std::vector<Eigen::VectorXd> second_moment;
};

AdamState make_adam_state(const ModelParams& params);

// Bias-corrected Adam update in place. Throws NumericError on a non-finite
// gradient before touching any parameter.
void adam_step(AdamState& state, ModelParams& params, const ModelParams& grads, double lr);

// The same update on a flat vector; used for small problems and tests.
void adam_step(AdamState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grads, double lr);

}  // namespace bioembed
