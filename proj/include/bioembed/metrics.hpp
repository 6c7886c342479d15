#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bioembed {

struct ScoredExample {
    double score = 0.0;
    bool positive = false;
};

// Mann-Whitney AUC with average ranks for ties: P(s+ > s-) + P(s+ == s-) / 2.
// Throws UndefinedMetricError unless both classes are present.
double roc_auc(std::span<const ScoredExample> examples);

// Mean over positives of the precision at each positive's rank (scores
// descending, ties in input order). Throws UndefinedMetricError without positives.
double average_precision(std::span<const ScoredExample> examples);

// Mean AP over the classes that have at least one positive.
double cmap(const std::map<std::string, std::vector<ScoredExample>>& per_class);

struct Top1Row {
    Eigen::VectorXd logits;
    std::vector<int> truth;
};

// Fraction of rows whose arg-max logit (lowest index on ties) is a true class.
double top1(std::span<const Top1Row> rows);

}  // namespace bioembed
