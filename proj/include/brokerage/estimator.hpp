#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "brokerage/core.hpp"
#include "brokerage/errors.hpp"

namespace brokerage {

inline constexpr std::size_t kRefactorInterval = 1024;
inline constexpr double kInverseResidualLimit = 1e-8;

/// Elliptical-potential budget 2d ln(1 + 2d t) for t rank-2 updates with
/// regularizer I/d and contexts in [0,1]^d.
inline double potential_budget(std::size_t d, std::size_t t) {
    const double dd = static_cast<double>(d);
    return 2.0 * dd * std::log1p(2.0 * dd * static_cast<double>(t));
}

/// Incremental ridge regression where each round appends its context twice
/// (once per trader response).
///
/// gram     = sum_s 2 c_s c_s^T + I/d
/// response = sum_s (y1_s + y2_s) c_s
/// estimate = gram^{-1} response
///
/// The inverse is maintained with Sherman-Morrison and rebuilt from a
/// Cholesky factorization every kRefactorInterval updates, or sooner if
/// ||gram * inverse - I||_inf drifts above kInverseResidualLimit.
class RidgeState {
public:
    explicit RidgeState(std::size_t d) : dim_(d) {
        if (d == 0) throw InvalidParameter("ridge: dimension must be positive");
        const auto n = static_cast<Eigen::Index>(d);
        const double reg = 1.0 / static_cast<double>(d);
        gram_ = Eigen::MatrixXd::Identity(n, n) * reg;
        gram_inverse_ = Eigen::MatrixXd::Identity(n, n) * static_cast<double>(d);
        response_ = Eigen::VectorXd::Zero(n);
        estimate_ = Eigen::VectorXd::Zero(n);
    }

    std::size_t dim() const { return dim_; }
    std::size_t updates() const { return updates_; }
    std::size_t refactorizations() const { return refactorizations_; }

    const Eigen::MatrixXd& gram() const { return gram_; }
    const Eigen::MatrixXd& gram_inverse() const { return gram_inverse_; }
    const Eigen::VectorXd& response() const { return response_; }
    const Eigen::VectorXd& estimate() const { return estimate_; }

    // Running sum of min(1, design_norm_sq) taken just before each update.
    double potential_sum() const { return potential_sum_; }

    void update(std::span<const double> c, double y1, double y2) {
        check_dim(c);
        if (!std::isfinite(y1) || !std::isfinite(y2)) throw NumericError("ridge: non-finite response");
        for (double x : c) {
            if (!std::isfinite(x)) throw NumericError("ridge: non-finite context");
        }
        if (!in_unit(y1) || !in_unit(y2)) throw InvalidParameter("ridge: responses must lie in [0,1]");

        potential_sum_ += std::min(1.0, design_norm_sq(c));

        const Eigen::Map<const Eigen::VectorXd> cv(c.data(), static_cast<Eigen::Index>(c.size()));
        gram_.noalias() += 2.0 * cv * cv.transpose();
        response_.noalias() += (y1 + y2) * cv;
        ++updates_;

        if (updates_ % kRefactorInterval == 0) {
            refactor();
        } else {
            sherman_morrison(cv);
            sherman_morrison(cv);
            if (inverse_residual() > kInverseResidualLimit) refactor();
        }
        estimate_.noalias() = gram_inverse_ * response_;
    }

    // 2 c^T gram^{-1} c, i.e. the squared norm of sqrt(2) c.
    double design_norm_sq(std::span<const double> c) const {
        check_dim(c);
        const Eigen::Map<const Eigen::VectorXd> cv(c.data(), static_cast<Eigen::Index>(c.size()));
        return 2.0 * cv.dot(gram_inverse_ * cv);
    }

    // Unclamped c^T estimate.
    double predict(std::span<const double> c) const {
        check_dim(c);
        const Eigen::Map<const Eigen::VectorXd> cv(c.data(), static_cast<Eigen::Index>(c.size()));
        return cv.dot(estimate_);
    }

    double inverse_residual() const {
        const auto n = static_cast<Eigen::Index>(dim_);
        const Eigen::MatrixXd r = gram_ * gram_inverse_ - Eigen::MatrixXd::Identity(n, n);
        return r.cwiseAbs().rowwise().sum().maxCoeff();
    }

private:
    void check_dim(std::span<const double> c) const {
        if (c.size() != dim_) {
            throw ConfigError("ridge: context has dimension " + std::to_string(c.size()) +
                              ", expected " + std::to_string(dim_));
        }
    }

    void sherman_morrison(const Eigen::Map<const Eigen::VectorXd>& c) {
        const Eigen::VectorXd ac = gram_inverse_ * c;
        const double denom = 1.0 + c.dot(ac);
        gram_inverse_.noalias() -= (ac * ac.transpose()) / denom;
        // keep exact symmetry
        gram_inverse_ = 0.5 * (gram_inverse_ + gram_inverse_.transpose()).eval();
    }

    void refactor() {
        const auto n = static_cast<Eigen::Index>(dim_);
        Eigen::LLT<Eigen::MatrixXd> llt(gram_);
        if (llt.info() != Eigen::Success) throw NumericError("ridge: gram matrix lost definiteness");
        gram_inverse_ = llt.solve(Eigen::MatrixXd::Identity(n, n));
        gram_inverse_ = 0.5 * (gram_inverse_ + gram_inverse_.transpose()).eval();
        ++refactorizations_;
    }

    std::size_t dim_;
    Eigen::MatrixXd gram_;
    Eigen::MatrixXd gram_inverse_;
    Eigen::VectorXd response_;
    Eigen::VectorXd estimate_;
    std::size_t updates_ = 0;
    std::size_t refactorizations_ = 0;
    double potential_sum_ = 0.0;
};

inline RidgeState ridge_init(std::size_t d) { return RidgeState(d); }

}  // namespace brokerage
