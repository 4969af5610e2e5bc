#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mcsfb/chebyshev.hpp"

namespace mcsfb {

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slope
/// limiting). Knots must be strictly increasing in x and nondecreasing in y.
class MonotoneCubic {
public:
    MonotoneCubic() = default;
    MonotoneCubic(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y))
    {
        const size_t n = x_.size();
        if (n < 2 || y_.size() != n)
            throw InputError("monotone cubic needs at least two knots with matching values");
        for (size_t i = 1; i < n; ++i) {
            if (!(x_[i] > x_[i - 1]))
                throw InputError("monotone cubic knots must be strictly increasing");
            if (y_[i] < y_[i - 1])
                throw InputError("monotone cubic values must be nondecreasing");
        }
        std::vector<double> d(n - 1);
        for (size_t i = 0; i + 1 < n; ++i)
            d[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
        m_.assign(n, 0.0);
        m_[0] = d[0];
        m_[n - 1] = d[n - 2];
        for (size_t i = 1; i + 1 < n; ++i)
            m_[i] = (d[i - 1] * d[i] <= 0.0) ? 0.0 : 0.5 * (d[i - 1] + d[i]);
        for (size_t i = 0; i + 1 < n; ++i) {
            if (d[i] == 0.0) {
                m_[i] = 0.0;
                m_[i + 1] = 0.0;
                continue;
            }
            const double a = m_[i] / d[i];
            const double b = m_[i + 1] / d[i];
            const double s = a * a + b * b;
            if (s > 9.0) {
                const double t = 3.0 / std::sqrt(s);
                m_[i] = t * a * d[i];
                m_[i + 1] = t * b * d[i];
            }
        }
    }

    /// Constant extrapolation outside the knot range.
    double operator()(double z) const
    {
        if (z <= x_.front())
            return y_.front();
        if (z >= x_.back())
            return y_.back();
        const size_t i = static_cast<size_t>(std::upper_bound(x_.begin(), x_.end(), z) - x_.begin()) - 1;
        const double h = x_[i + 1] - x_[i];
        const double t = (z - x_[i]) / h;
        const double t2 = t * t, t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * y_[i] + (t3 - 2 * t2 + t) * h * m_[i] + (-2 * t3 + 3 * t2) * y_[i + 1] +
               (t3 - t2) * h * m_[i + 1];
    }

    const std::vector<double>& knots_x() const { return x_; }
    const std::vector<double>& knots_y() const { return y_; }

private:
    std::vector<double> x_, y_, m_;
};

/// Estimated cumulative spectral distribution P(z) = #{lambda_l <= z} / N.
struct SpectralDensityEstimate {
    double lambda_max = 0.0;
    int n_vertices = 0;
    std::vector<double> xi;     ///< evaluation points
    std::vector<double> counts; ///< raw eigenvalue-count estimates at xi
    MonotoneCubic interpolant;  ///< through the cleaned, anchored (x, count/N) knots

    /// Clamps counts into [0, N], makes them nondecreasing by a running
    /// maximum, and fits through (0, 1/N), (xi_i, count_i/N), (lambda_max, 1).
    /// The left anchor accounts for the zero eigenvalue of a connected graph.
    static SpectralDensityEstimate from_counts(double lambda_max, int n, std::vector<double> xi, std::vector<double> counts)
    {
        if (xi.size() != counts.size())
            throw InputError("density estimate: xi and counts differ in length");
        SpectralDensityEstimate est;
        est.lambda_max = lambda_max;
        est.n_vertices = n;
        est.xi = std::move(xi);
        est.counts = std::move(counts);
        const double floor = 1.0 / n;
        std::vector<double> kx{0.0}, ky{floor};
        double running = floor;
        for (size_t i = 0; i < est.xi.size(); ++i) {
            if (!(est.xi[i] > kx.back()) || !(est.xi[i] < lambda_max))
                throw InputError("density estimate: xi must be strictly increasing inside (0, lambda_max)");
            running = std::max(running, std::clamp(est.counts[i] / n, 0.0, 1.0));
            kx.push_back(est.xi[i]);
            ky.push_back(running);
        }
        kx.push_back(lambda_max);
        ky.push_back(1.0);
        est.interpolant = MonotoneCubic(std::move(kx), std::move(ky));
        return est;
    }

    /// P~(z); 0 below the spectrum, 1 at and above lambda_max.
    double cdf(double z) const
    {
        if (z < 0.0)
            return 0.0;
        if (z >= lambda_max)
            return 1.0;
        return std::clamp(interpolant(z), 0.0, 1.0);
    }

    /// Smallest z in [0, lambda_max] with P~(z) >= q, by bisection to
    /// 1e-9 * lambda_max. q >= 1 maps to lambda_max.
    double inverse(double q) const
    {
        if (q >= 1.0)
            return lambda_max;
        if (cdf(0.0) >= q)
            return 0.0;
        double lo = 0.0, hi = lambda_max;
        while (hi - lo > 1e-9 * lambda_max) {
            const double mid = 0.5 * (lo + hi);
            if (cdf(mid) >= q)
                hi = mid;
            else
                lo = mid;
        }
        return hi;
    }
};

inline constexpr int kDefaultDensityPoints = 50;

/// Kernel-polynomial estimate of the cumulative spectral distribution: at T
/// interior points xi_i = i*lambda_max/(T+1) the damped indicator of
/// [0, xi_i] is traced against the cached probes (control-variate form). Uses only the cached
/// moments, so no matvecs beyond those spent building `cache`.
inline SpectralDensityEstimate estimate_cdf(const LaplacianOperator& L, const ChebyshevBasisCache& cache, int T_points = kDefaultDensityPoints)
{
    if (T_points < 3)
        throw InputError("estimate_cdf needs at least 3 points");
    detail::check_lambda_match(L.require_lambda_max(), cache.lambda_max(), "estimate_cdf");
    require_same_length(L.size(), cache.size(), "estimate_cdf");
    const double lmax = cache.lambda_max();
    std::vector<double> xi(static_cast<size_t>(T_points)), counts(static_cast<size_t>(T_points));
    for (int i = 0; i < T_points; ++i) {
        xi[i] = lmax * (i + 1) / (T_points + 1);
        const auto theta = make_polynomial_filter(0.0, xi[i], lmax, cache.degree(), true);
        counts[i] = estimate_eigencount(cache, theta, TraceEstimator::ControlVariate);
    }
    return SpectralDensityEstimate::from_counts(lmax, L.size(), std::move(xi), std::move(counts));
}

inline double cdf_inverse(const SpectralDensityEstimate& est, double q)
{
    if (q < 0.0 || q > 1.0)
        throw InputError("cdf_inverse: q must lie in [0, 1]");
    return est.inverse(q);
}

} // namespace mcsfb
