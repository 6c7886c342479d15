#pragma once

#include <vector>

#include <Eigen/Dense>

namespace bioembed {

// Loss value and its gradient with respect to the (student-side) input.
struct LossAndGrad {
    double value = 0.0;
    Eigen::VectorXd grad;
};

Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits);
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

// Softmax cross-entropy against 1/k on each of the k target classes.
LossAndGrad species_ce(const Eigen::VectorXd& logits, const std::vector<int>& target_classes);

// Cross-entropy of softmax(student) against softmax(teacher). The teacher is a
// constant: no gradient is returned for it.
LossAndGrad distillation_loss(const Eigen::VectorXd& teacher_logits, const Eigen::VectorXd& student_logits);

LossAndGrad source_ce(const Eigen::VectorXd& logits, int true_source);

// Mean over classes of ||Q_c Q_c^T - I||_F^2, Q_c the row-normalised
// prototypes of class c (rows c*J .. c*J+J-1 of `prototypes`).
struct MatrixLossAndGrad {
    double value = 0.0;
    Eigen::MatrixXd grad;
};
MatrixLossAndGrad orthogonality_loss(const Eigen::MatrixXd& prototypes, int prototypes_per_class);

}  // namespace bioembed
