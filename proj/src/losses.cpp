#include "bioembed/losses.hpp"

#include <cmath>
#include <string>

#include "bioembed/errors.hpp"

namespace bioembed {

Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits) {
    const double m = logits.maxCoeff();
    const double lse = m + std::log((logits.array() - m).exp().sum());
    return logits.array() - lse;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) { return log_softmax(logits).array().exp(); }

LossAndGrad species_ce(const Eigen::VectorXd& logits, const std::vector<int>& target_classes) {
    if (target_classes.empty()) throw ValidationError("species_ce: empty target set");
    Eigen::VectorXd target = Eigen::VectorXd::Zero(logits.size());
    for (int c : target_classes) {
        if (c < 0 || c >= logits.size()) throw ValidationError("species_ce: class id out of range");
        target(c) = 1.0;
    }
    target /= target.sum();
    const Eigen::VectorXd lp = log_softmax(logits);
    LossAndGrad out;
    out.value = -target.dot(lp);
    out.grad = lp.array().exp().matrix() - target;
    return out;
}

LossAndGrad distillation_loss(const Eigen::VectorXd& teacher_logits, const Eigen::VectorXd& student_logits) {
    if (teacher_logits.size() != student_logits.size()) {
        throw ValidationError("distillation_loss: teacher and student sizes differ");
    }
    const Eigen::VectorXd target = softmax(teacher_logits);
    const Eigen::VectorXd lp = log_softmax(student_logits);
    LossAndGrad out;
    out.value = -target.dot(lp);
    out.grad = lp.array().exp().matrix() - target;
    return out;
}

LossAndGrad source_ce(const Eigen::VectorXd& logits, int true_source) {
    if (true_source < 0 || true_source >= logits.size()) {
        throw ValidationError("source_ce: source id " + std::to_string(true_source) + " out of range");
    }
    const Eigen::VectorXd lp = log_softmax(logits);
    LossAndGrad out;
    out.value = -lp(true_source);
    out.grad = lp.array().exp();
    out.grad(true_source) -= 1.0;
    return out;
}

MatrixLossAndGrad orthogonality_loss(const Eigen::MatrixXd& prototypes, int prototypes_per_class) {
    const int J = prototypes_per_class;
    if (J <= 0 || prototypes.rows() % J != 0) throw ValidationError("orthogonality_loss: bad prototype layout");
    const auto C = static_cast<int>(prototypes.rows() / J);
    MatrixLossAndGrad out;
    out.grad = Eigen::MatrixXd::Zero(prototypes.rows(), prototypes.cols());
    for (int c = 0; c < C; ++c) {
        const Eigen::MatrixXd P = prototypes.middleRows(c * J, J);
        const Eigen::VectorXd norms = P.rowwise().norm();
        if ((norms.array() == 0.0).any()) {
            throw ValidationError("orthogonality_loss: zero-norm prototype in class " + std::to_string(c));
        }
        const Eigen::MatrixXd Q = norms.cwiseInverse().asDiagonal() * P;
        const Eigen::MatrixXd R = Q * Q.transpose() - Eigen::MatrixXd::Identity(J, J);
        out.value += R.squaredNorm();
        const Eigen::MatrixXd dQ = 4.0 * R * Q / C;
        for (int j = 0; j < J; ++j) {
            const auto q = Q.row(j);
            const auto dq = dQ.row(j);
            out.grad.row(c * J + j) = (dq - q.dot(dq) * q) / norms(j);
        }
    }
    out.value /= C;
    return out;
}

}  // namespace bioembed
