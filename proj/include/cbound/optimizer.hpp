#pragma once

#include <Eigen/Dense>

#include <cmath>

namespace cbound {

struct AdamOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Bias-corrected Adam over one flat parameter vector.
class Adam {
public:
    Adam(Eigen::Index size, AdamOptions opts = {})
        : opts_(opts), m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)) {}

    template <typename Params, typename Grad>
    void step(Eigen::MatrixBase<Params>& params, const Eigen::MatrixBase<Grad>& grad) {
        ++t_;
        m_ = opts_.beta1 * m_ + (1.0 - opts_.beta1) * grad;
        v_ = opts_.beta2 * v_ + (1.0 - opts_.beta2) * grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
        params -= (opts_.learning_rate / c1) *
                  (m_.array() / ((v_.array() / c2).sqrt() + opts_.epsilon)).matrix();
    }

    long steps() const { return t_; }

private:
    AdamOptions opts_;
    Eigen::VectorXd m_, v_;
    long t_ = 0;
};

}  // namespace cbound
