#include "bioembed/mixup.hpp"

#include <cmath>

#include "bioembed/errors.hpp"

namespace bioembed {

void MixupConfig::validate() const {
    if (n < 0) throw ValidationError("mixup n must be >= 0");
    if (!(alpha > 0.0 && std::isfinite(alpha)) || !(beta > 0.0 && std::isfinite(beta)) ||
        !(omega > 0.0 && std::isfinite(omega))) {
        throw ValidationError("mixup alpha, beta and omega must be finite and positive");
    }
}

MixtureSpec sample_mixture_spec(const MixupConfig& cfg, Rng& rng) {
    cfg.validate();
    MixtureSpec spec;
    if (cfg.n > 0) {
        const double ga = std::gamma_distribution<double>(cfg.alpha, 1.0)(rng);
        const double gb = std::gamma_distribution<double>(cfg.beta, 1.0)(rng);
        const double p = ga / (ga + gb);
        spec.components = std::binomial_distribution<int>(cfg.n, p)(rng) + 1;
    }
    if (spec.components == 1) {
        spec.weights = {1.0};
        return spec;
    }
    std::gamma_distribution<double> gamma(cfg.omega, 1.0);
    double total = 0.0;
    spec.weights.resize(static_cast<std::size_t>(spec.components));
    for (auto& w : spec.weights) {
        // Guard against a zero draw for tiny omega; weights must stay positive.
        do {
            w = gamma(rng);
        } while (!(w > 0.0));
        total += w;
    }
    for (auto& w : spec.weights) w /= total;
    return spec;
}

std::vector<float> mix_signals(const std::vector<std::vector<float>>& components,
                               const std::vector<double>& weights) {
    if (components.empty() || components.size() != weights.size()) {
        throw ValidationError("mix_signals: need one weight per component");
    }
    const std::size_t len = components.front().size();
    double sq = 0.0;
    for (std::size_t i = 0; i < components.size(); ++i) {
        if (components[i].size() != len) throw ValidationError("mix_signals: component length mismatch");
        sq += weights[i] * weights[i];
    }
    const double norm = std::sqrt(sq);
    std::vector<float> out(len);
    for (std::size_t s = 0; s < len; ++s) {
        double acc = 0.0;
        for (std::size_t i = 0; i < components.size(); ++i) acc += weights[i] * components[i][s];
        out[s] = static_cast<float>(acc / norm);
    }
    return out;
}

std::vector<int> merge_targets(const std::vector<std::vector<std::string>>& label_sets,
                               const LabelVocabulary& vocab) {
    std::vector<int> hot(vocab.size(), 0);
    for (const auto& set : label_sets) {
        for (const auto& label : set) hot[static_cast<std::size_t>(vocab.id(label))] = 1;
    }
    return hot;
}

}  // namespace bioembed
