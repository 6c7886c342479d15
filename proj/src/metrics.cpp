#include "bioembed/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bioembed/errors.hpp"

namespace bioembed {
namespace {

void check_finite(std::span<const ScoredExample> examples) {
    for (const auto& e : examples) {
        if (!std::isfinite(e.score)) throw ValidationError("metric input contains a non-finite score");
    }
}

}  // namespace

double roc_auc(std::span<const ScoredExample> examples) {
    check_finite(examples);
    const std::size_t n = examples.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return examples[a].score < examples[b].score; });

    double rank_sum = 0.0;
    double n_pos = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && examples[order[j]].score == examples[order[i]].score) ++j;
        // Ranks i+1 .. j share their average.
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) {
            if (examples[order[k]].positive) {
                rank_sum += avg_rank;
                n_pos += 1.0;
            }
        }
        i = j;
    }
    const double n_neg = static_cast<double>(n) - n_pos;
    if (n_pos == 0.0 || n_neg == 0.0) {
        throw UndefinedMetricError("roc_auc needs at least one positive and one negative example");
    }
    return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

double average_precision(std::span<const ScoredExample> examples) {
    check_finite(examples);
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return examples[a].score > examples[b].score; });
    double hits = 0.0;
    double sum = 0.0;
    for (std::size_t r = 0; r < order.size(); ++r) {
        if (examples[order[r]].positive) {
            hits += 1.0;
            sum += hits / static_cast<double>(r + 1);
        }
    }
    if (hits == 0.0) throw UndefinedMetricError("average_precision needs at least one positive example");
    return sum / hits;
}

double cmap(const std::map<std::string, std::vector<ScoredExample>>& per_class) {
    double total = 0.0;
    int classes = 0;
    for (const auto& [name, examples] : per_class) {
        const bool any = std::any_of(examples.begin(), examples.end(), [](const auto& e) { return e.positive; });
        if (!any) continue;
        total += average_precision(examples);
        ++classes;
    }
    if (classes == 0) throw UndefinedMetricError("cmap: no class has a positive example");
    return total / classes;
}

double top1(std::span<const Top1Row> rows) {
    if (rows.empty()) throw UndefinedMetricError("top1 of an empty set");
    double correct = 0.0;
    for (const auto& row : rows) {
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < row.logits.size(); ++i) {
            if (row.logits(i) > row.logits(best)) best = i;
        }
        if (std::find(row.truth.begin(), row.truth.end(), static_cast<int>(best)) != row.truth.end()) {
            correct += 1.0;
        }
    }
    return correct / static_cast<double>(rows.size());
}

}  // namespace bioembed
