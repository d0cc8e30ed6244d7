#include "bipembed/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "bipembed/error.hpp"

namespace bipembed {

double rbf_kernel(std::span<const double> x, std::span<const double> y, double gamma) noexcept {
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) d += (x[i] - y[i]) * (x[i] - y[i]);
    return std::exp(-gamma * d);
}

double RbfSvm::decision(std::span<const double> x) const {
    if (x.size() != dimension_)
        throw ShapeError("svm input has dimension " + std::to_string(x.size()) + ", expected " +
                         std::to_string(dimension_));
    double s = -rho_;
    for (std::size_t i = 0; i < coef_.size(); ++i)
        s += coef_[i] * rbf_kernel({support_.data() + i * dimension_, dimension_}, x, gamma_);
    return s;
}

namespace {

constexpr double kTau = 1e-12;
constexpr std::size_t kFullKernelLimit = 4096;

class KernelRows {
public:
    KernelRows(std::span<const std::vector<double>> points, std::span<const int> labels,
               double gamma)
        : points_(points), labels_(labels), gamma_(gamma), n_(points.size()) {
        if (n_ <= kFullKernelLimit) {
            full_.resize(n_ * n_);
            for (std::size_t i = 0; i < n_; ++i) {
                full_[i * n_ + i] = 1.0;
                for (std::size_t j = 0; j < i; ++j) {
                    const double k = rbf_kernel(points_[i], points_[j], gamma_);
                    full_[i * n_ + j] = k;
                    full_[j * n_ + i] = k;
                }
            }
        } else {
            scratch_[0].resize(n_);
            scratch_[1].resize(n_);
        }
    }

    /// Q row i: y_i y_j K(x_i, x_j). `slot` selects a scratch buffer.
    std::span<const double> q_row(std::size_t i, int slot) {
        auto& buf = scratch_[slot];
        buf.resize(n_);
        for (std::size_t j = 0; j < n_; ++j) {
            const double k = full_.empty() ? rbf_kernel(points_[i], points_[j], gamma_)
                                           : full_[i * n_ + j];
            buf[j] = labels_[i] * labels_[j] * k;
        }
        return buf;
    }

private:
    std::span<const std::vector<double>> points_;
    std::span<const int> labels_;
    double gamma_;
    std::size_t n_;
    std::vector<double> full_;
    std::vector<double> scratch_[2];
};

}  // namespace

RbfSvm train_rbf_svm(std::span<const std::vector<double>> points, std::span<const int> labels,
                     const SvmParams& params) {
    if (points.size() != labels.size()) throw ShapeError("svm points and labels differ in length");
    if (points.empty()) throw DegenerateClassifierError("svm needs training points");
    const std::size_t n = points.size();
    const std::size_t dim = points[0].size();
    bool pos = false, neg = false;
    for (std::size_t i = 0; i < n; ++i) {
        if (points[i].size() != dim) throw ShapeError("svm points have mixed dimensions");
        if (labels[i] == 1) pos = true;
        else if (labels[i] == -1) neg = true;
        else throw ParameterError("svm labels must be +1 or -1");
    }
    if (!pos || !neg) throw DegenerateClassifierError("svm training set has a single class");
    if (!(params.c > 0.0) || !(params.gamma > 0.0))
        throw ParameterError("svm C and gamma must be positive");

    const double c = params.c;
    KernelRows rows(points, labels, params.gamma);
    std::vector<double> alpha(n, 0.0);
    std::vector<double> grad(n, -1.0);  // Q alpha - 1
    auto y = [&](std::size_t t) { return static_cast<double>(labels[t]); };
    auto in_up = [&](std::size_t t) {
        return (labels[t] == 1 && alpha[t] < c) || (labels[t] == -1 && alpha[t] > 0.0);
    };
    auto in_low = [&](std::size_t t) {
        return (labels[t] == 1 && alpha[t] > 0.0) || (labels[t] == -1 && alpha[t] < c);
    };

    SvmSolution sol;
    for (; sol.iterations < params.max_iterations; ++sol.iterations) {
        double gmax = -std::numeric_limits<double>::infinity();
        double gmin = std::numeric_limits<double>::infinity();
        std::size_t i = n, j = n;
        for (std::size_t t = 0; t < n; ++t) {
            const double v = -y(t) * grad[t];
            if (in_up(t) && v > gmax) {
                gmax = v;
                i = t;
            }
            if (in_low(t) && v < gmin) {
                gmin = v;
                j = t;
            }
        }
        if (i == n || j == n || gmax - gmin < params.tolerance) {
            sol.converged = true;
            break;
        }
        const auto qi = rows.q_row(i, 0);
        const auto qj = rows.q_row(j, 1);
        const double old_i = alpha[i];
        const double old_j = alpha[j];
        if (labels[i] != labels[j]) {
            double quad = qi[i] + qj[j] + 2.0 * qi[j];
            if (quad <= 0.0) quad = kTau;
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0.0) {
                if (alpha[j] < 0.0) {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if (diff > 0.0) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if (alpha[j] > c) {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            double quad = qi[i] + qj[j] - 2.0 * qi[j];
            if (quad <= 0.0) quad = kTau;
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > c) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if (alpha[j] < 0.0) {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if (sum > c) {
                if (alpha[j] > c) {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        const double di = alpha[i] - old_i;
        const double dj = alpha[j] - old_j;
        for (std::size_t t = 0; t < n; ++t) grad[t] += qi[t] * di + qj[t] * dj;
    }

    // rho from free vectors, else the midpoint of the feasible interval
    double free_sum = 0.0;
    std::size_t free_count = 0;
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = y(t) * grad[t];
        if (alpha[t] > 0.0 && alpha[t] < c) {
            free_sum += yg;
            ++free_count;
        } else if ((labels[t] == 1 && alpha[t] >= c) || (labels[t] == -1 && alpha[t] <= 0.0)) {
            ub = std::min(ub, yg);
        } else {
            lb = std::max(lb, yg);
        }
    }
    if (free_count > 0) sol.rho = free_sum / static_cast<double>(free_count);
    else if (std::isfinite(ub) && std::isfinite(lb)) sol.rho = (ub + lb) / 2.0;
    else sol.rho = std::isfinite(ub) ? ub : (std::isfinite(lb) ? lb : 0.0);

    RbfSvm svm;
    svm.dimension_ = dim;
    svm.gamma_ = params.gamma;
    svm.c_ = c;
    svm.rho_ = sol.rho;
    for (std::size_t t = 0; t < n; ++t) {
        if (alpha[t] <= 0.0) continue;
        svm.coef_.push_back(alpha[t] * y(t));
        svm.support_.insert(svm.support_.end(), points[t].begin(), points[t].end());
    }
    sol.alpha = std::move(alpha);
    svm.solution_ = std::move(sol);
    return svm;
}

double kkt_violation(const RbfSvm& svm, std::span<const std::vector<double>> points,
                     std::span<const int> labels) {
    const auto& alpha = svm.solution().alpha;
    if (alpha.size() != points.size()) throw ShapeError("solution does not match training set");
    const double c = svm.c();
    double worst = 0.0;
    for (std::size_t t = 0; t < points.size(); ++t) {
        const double margin = labels[t] * svm.decision(points[t]);
        double v = 0.0;
        if (alpha[t] <= 0.0) v = std::max(0.0, 1.0 - margin);
        else if (alpha[t] >= c) v = std::max(0.0, margin - 1.0);
        else v = std::abs(margin - 1.0);
        worst = std::max(worst, v);
    }
    return worst;
}

}  // namespace bipembed
