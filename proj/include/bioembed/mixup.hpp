#pragma once

#include <string>
#include <vector>

#include "bioembed/rng.hpp"
#include "bioembed/vocabulary.hpp"

namespace bioembed {

// Component count N = BetaBinomial(n, alpha, beta) + 1; weights ~ SymDir(N, omega).
struct MixupConfig {
    int n = 0;  // 0 disables mixing
    double alpha = 1.0;
    double beta = 1.0;
    double omega = 1.0;

    void validate() const;
};

struct MixtureSpec {
    int components = 1;
    std::vector<double> weights;
};

MixtureSpec sample_mixture_spec(const MixupConfig& cfg, Rng& rng);

// (sum_i w_i x_i) / sqrt(sum_i w_i^2)
std::vector<float> mix_signals(const std::vector<std::vector<float>>& components,
                               const std::vector<double>& weights);

// Multi-hot union over the label sets; weights play no part.
std::vector<int> merge_targets(const std::vector<std::vector<std::string>>& label_sets,
                               const LabelVocabulary& vocab);

}  // namespace bioembed
