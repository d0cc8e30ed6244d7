#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bipembed {

struct SvmParams {
    double c = 1.0;
    double gamma = 0.1;  // kernel width: K(x, y) = exp(-gamma * |x - y|^2)
    double tolerance = 1e-3;
    std::size_t max_iterations = 10000;
};

/// Dual solution of a soft-margin RBF SVM over the training points.
struct SvmSolution {
    std::vector<double> alpha;
    double rho = 0.0;  // decision(x) = sum_i alpha_i y_i K(x_i, x) - rho
    std::size_t iterations = 0;
    bool converged = false;
};

class RbfSvm {
public:
    RbfSvm() = default;

    std::size_t dimension() const noexcept { return dimension_; }
    std::size_t support_count() const noexcept { return coef_.size(); }
    double gamma() const noexcept { return gamma_; }
    double c() const noexcept { return c_; }
    double rho() const noexcept { return rho_; }

    double decision(std::span<const double> x) const;
    /// +1 when decision(x) > 0, else -1.
    int predict(std::span<const double> x) const { return decision(x) > 0.0 ? 1 : -1; }

    const SvmSolution& solution() const noexcept { return solution_; }

private:
    friend RbfSvm train_rbf_svm(std::span<const std::vector<double>>, std::span<const int>,
                                const SvmParams&);

    std::size_t dimension_ = 0;
    double gamma_ = 0.1;
    double c_ = 1.0;
    double rho_ = 0.0;
    std::vector<double> coef_;     // alpha_i y_i of support vectors
    std::vector<double> support_;  // row-major support vectors
    SvmSolution solution_;
};

double rbf_kernel(std::span<const double> x, std::span<const double> y, double gamma) noexcept;

/// SMO with maximal-violating-pair selection. Labels are +1/-1. Throws
/// DegenerateClassifierError when only one class is present and ShapeError on
/// ragged input.
RbfSvm train_rbf_svm(std::span<const std::vector<double>> points, std::span<const int> labels,
                     const SvmParams& params = {});

/// Largest KKT violation of a solution on its training set, measured on
/// y_i * decision(x_i) against the margin (0 when all conditions hold).
double kkt_violation(const RbfSvm& svm, std::span<const std::vector<double>> points,
                     std::span<const int> labels);

}  // namespace bipembed
