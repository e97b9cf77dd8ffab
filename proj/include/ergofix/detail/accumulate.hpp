#pragma once

#include <cmath>

#include <Eigen/Dense>

namespace ergofix::detail {

/// Neumaier-compensated running sum; order of additions is the caller's.
class CompensatedSum {
public:
    void add(double v) {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v)) comp_ += (sum_ - t) + v;
        else comp_ += (v - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Componentwise CompensatedSum for vectors.
class CompensatedVectorSum {
public:
    explicit CompensatedVectorSum(Eigen::Index dim) : sum_(Eigen::VectorXd::Zero(dim)), comp_(Eigen::VectorXd::Zero(dim)) {}

    void add(const Eigen::VectorXd& v) {
        for (Eigen::Index k = 0; k < sum_.size(); ++k) {
            const double s = sum_[k];
            const double t = s + v[k];
            if (std::abs(s) >= std::abs(v[k])) comp_[k] += (s - t) + v[k];
            else comp_[k] += (v[k] - t) + s;
            sum_[k] = t;
        }
    }
    void add_scaled(double w, const Eigen::VectorXd& v) { add(w * v); }
    Eigen::VectorXd value() const { return sum_ + comp_; }

private:
    Eigen::VectorXd sum_;
    Eigen::VectorXd comp_;
};

} // namespace ergofix::detail
