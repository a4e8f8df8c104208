#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace rydkerr::fit
{
    /// Outcome of any fitter in the toolkit.
    struct FitResult
    {
        std::vector<std::string> names;
        Eigen::VectorXd params;
        Eigen::VectorXd std_errors;      // sqrt(diag(covariance)) * inflation_applied
        Eigen::MatrixXd covariance;
        double chi2 = 0.0;
        double chi2_reduced = 0.0;
        int dof = 0;
        double inflation_applied = 1.0;
        bool converged = true;
        int iterations = 0;
        double residual_norm = 0.0;
        std::vector<std::string> flags;

        std::size_t index(const std::string& name) const;
        double value(const std::string& name) const { return params[static_cast<Eigen::Index>(index(name))]; }
        double error(const std::string& name) const { return std_errors[static_cast<Eigen::Index>(index(name))]; }
    };

    /// Multiplies the standard errors by sqrt(chi2_reduced) when it exceeds 1.
    /// Never deflates.
    FitResult inflate_errors(FitResult fit);

    /// Weighted straight line y = intercept + slope x. Throws for fewer than 3
    /// points or non-positive sigma.
    FitResult weighted_line(const std::vector<double>& x, const std::vector<double>& y,
                            const std::vector<double>& sigma);

    using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

    struct LmOptions
    {
        int max_iterations = 500;
        double step_tolerance = 1e-10;   // relative parameter step
        double initial_damping = 1e-3;
    };

    /// Levenberg-Marquardt on weighted residuals with a central-difference
    /// Jacobian. Covariance is (J^T J)^-1, i.e. residuals are taken to be
    /// already divided by their standard deviations. Non-convergence is
    /// reported through `converged` and `residual_norm`, not thrown.
    FitResult levenberg_marquardt(const ResidualFn& residuals, Eigen::VectorXd start,
                                  std::vector<std::string> names, const LmOptions& options = {});
}
