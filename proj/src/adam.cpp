#include "bioembed/adam.hpp"

#include <cmath>

#include "bioembed/errors.hpp"

namespace bioembed {
namespace {

void update_block(AdamState& st, std::size_t i, std::span<double> p, std::span<const double> g, double lr) {
    auto& m = st.first_moment[i];
    auto& v = st.second_moment[i];
    const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (std::size_t k = 0; k < p.size(); ++k) {
        m[k] = st.beta1 * m[k] + (1.0 - st.beta1) * g[k];
        v[k] = st.beta2 * v[k] + (1.0 - st.beta2) * g[k] * g[k];
        const double mhat = m[k] / c1;
        const double vhat = v[k] / c2;
        p[k] -= lr * mhat / (std::sqrt(vhat) + st.epsilon);
    }
}

void check_finite(std::span<const double> g, const std::string& name) {
    for (double x : g) {
        if (!std::isfinite(x)) throw NumericError("non-finite gradient in block '" + name + "'");
    }
}

}  // namespace

AdamState make_adam_state(const ModelParams& params) {
    AdamState st;
    for (const auto& [name, values] : params.blocks()) {
        st.first_moment.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(values.size())));
        st.second_moment.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(values.size())));
    }
    return st;
}

void adam_step(AdamState& state, ModelParams& params, const ModelParams& grads, double lr) {
    auto pb = params.blocks();
    const auto gb = grads.blocks();
    if (pb.size() != gb.size() || state.first_moment.size() != pb.size()) {
        throw ValidationError("adam_step: parameter, gradient and state blocks differ");
    }
    for (std::size_t i = 0; i < pb.size(); ++i) {
        if (pb[i].values.size() != gb[i].second.size() ||
            static_cast<std::size_t>(state.first_moment[i].size()) != pb[i].values.size()) {
            throw ValidationError("adam_step: shape mismatch in block '" + pb[i].name + "'");
        }
        check_finite(gb[i].second, pb[i].name);
    }
    ++state.step;
    for (std::size_t i = 0; i < pb.size(); ++i) update_block(state, i, pb[i].values, gb[i].second, lr);
    ++params.version;
}

void adam_step(AdamState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grads, double lr) {
    if (params.size() != grads.size()) throw ValidationError("adam_step: shape mismatch");
    if (state.first_moment.empty()) {
        state.first_moment.push_back(Eigen::VectorXd::Zero(params.size()));
        state.second_moment.push_back(Eigen::VectorXd::Zero(params.size()));
    }
    check_finite({grads.data(), static_cast<std::size_t>(grads.size())}, "params");
    ++state.step;
    update_block(state, 0, {params.data(), static_cast<std::size_t>(params.size())},
                 {grads.data(), static_cast<std::size_t>(grads.size())}, lr);
}

}  // namespace bioembed
