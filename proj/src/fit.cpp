#include "rydkerr/fit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rydkerr::fit
{
    std::size_t FitResult::index(const std::string& name) const
    {
        const auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end())
            throw std::out_of_range("fit has no parameter '" + name + "'");
        return static_cast<std::size_t>(it - names.begin());
    }

    FitResult inflate_errors(FitResult fit)
    {
        if (fit.chi2_reduced > 1.0)
        {
            const double factor = std::sqrt(fit.chi2_reduced);
            fit.std_errors = fit.covariance.diagonal().cwiseSqrt() * factor;
            fit.inflation_applied = factor;
        }
        return fit;
    }

    FitResult weighted_line(const std::vector<double>& x, const std::vector<double>& y,
                            const std::vector<double>& sigma)
    {
        const std::size_t n = x.size();
        if (y.size() != n || sigma.size() != n)
            throw std::invalid_argument("line fit arrays differ in length");
        if (n < 3)
            throw std::invalid_argument("line fit needs at least 3 points");

        Eigen::MatrixXd a(n, 2);
        Eigen::VectorXd b(n);
        for (std::size_t i = 0; i < n; ++i)
        {
            if (!(sigma[i] > 0.0) || !std::isfinite(x[i]) || !std::isfinite(y[i]))
                throw std::invalid_argument("line fit needs finite data and positive sigma");
            const auto r = static_cast<Eigen::Index>(i);
            a(r, 0) = 1.0 / sigma[i];
            a(r, 1) = x[i] / sigma[i];
            b(r) = y[i] / sigma[i];
        }
        // Column scaling keeps the normal matrix well conditioned when x spans
        // nanowatts and y radians.
        const Eigen::Vector2d scale(a.col(0).norm(), a.col(1).norm());
        const Eigen::MatrixXd as = a * scale.cwiseInverse().asDiagonal();
        const auto qr = as.colPivHouseholderQr();
        if (qr.rank() < 2)
            throw std::domain_error("line fit is degenerate (all x equal)");
        const Eigen::Vector2d coef = qr.solve(b).cwiseQuotient(scale);

        FitResult f;
        f.names = {"intercept", "slope"};
        f.params = coef;
        const Eigen::Matrix2d normal = a.transpose() * a;
        f.covariance = normal.inverse();
        f.std_errors = f.covariance.diagonal().cwiseSqrt();
        const Eigen::VectorXd res = a * coef - b;
        f.chi2 = res.squaredNorm();
        f.dof = static_cast<int>(n) - 2;
        f.chi2_reduced = f.chi2 / f.dof;
        f.residual_norm = res.norm();
        return f;
    }

    namespace
    {
        Eigen::MatrixXd jacobian(const ResidualFn& fn, const Eigen::VectorXd& p, Eigen::Index m)
        {
            Eigen::MatrixXd j(m, p.size());
            for (Eigen::Index k = 0; k < p.size(); ++k)
            {
                const double h = 1e-6 * std::max(std::abs(p[k]), 1e-3);
                Eigen::VectorXd hi = p, lo = p;
                hi[k] += h;
                lo[k] -= h;
                j.col(k) = (fn(hi) - fn(lo)) / (hi[k] - lo[k]);
            }
            return j;
        }
    }

    FitResult levenberg_marquardt(const ResidualFn& residuals, Eigen::VectorXd p,
                                  std::vector<std::string> names, const LmOptions& options)
    {
        if (static_cast<Eigen::Index>(names.size()) != p.size())
            throw std::invalid_argument("parameter names and start vector differ in length");

        Eigen::VectorXd r = residuals(p);
        const Eigen::Index m = r.size();
        if (m <= p.size())
            throw std::invalid_argument("least squares needs more residuals than parameters");
        double cost = r.squaredNorm();
        if (!std::isfinite(cost))
            throw std::domain_error("residuals are not finite at the starting point");

        FitResult f;
        f.names = std::move(names);
        f.converged = false;
        double lambda = options.initial_damping;
        Eigen::MatrixXd j = jacobian(residuals, p, m);

        int it = 0;
        for (; it < options.max_iterations; ++it)
        {
            const Eigen::MatrixXd jtj = j.transpose() * j;
            const Eigen::VectorXd g = j.transpose() * r;
            bool accepted = false;
            Eigen::VectorXd step;
            while (lambda < 1e16)
            {
                Eigen::MatrixXd damped = jtj;
                damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
                step = damped.ldlt().solve(-g);
                const Eigen::VectorXd trial = p + step;
                const Eigen::VectorXd rt = residuals(trial);
                const double ct = rt.squaredNorm();
                if (std::isfinite(ct) && ct <= cost)
                {
                    p = trial;
                    r = rt;
                    cost = ct;
                    lambda = std::max(lambda / 10.0, 1e-12);
                    accepted = true;
                    break;
                }
                lambda *= 10.0;
            }
            const double rel = step.norm() / std::max(p.norm(), 1e-300);
            if (!accepted || rel < options.step_tolerance)
            {
                // A rejected step at huge damping means no descent direction is
                // left: we are at the minimum to working precision.
                f.converged = true;
                break;
            }
            j = jacobian(residuals, p, m);
        }

        j = jacobian(residuals, p, m);
        f.iterations = it;
        f.params = p;
        f.covariance = (j.transpose() * j).completeOrthogonalDecomposition().pseudoInverse();
        f.std_errors = f.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
        f.chi2 = cost;
        f.dof = static_cast<int>(m - p.size());
        f.chi2_reduced = cost / f.dof;
        f.residual_norm = std::sqrt(cost);
        if (!f.converged)
            f.flags.push_back("not converged after " + std::to_string(it) + " iterations");
        return f;
    }
}
