#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mcsfb/chebyshev.hpp"
#include "mcsfb/density.hpp"

namespace mcsfb {

enum class Spacing { UniformLinear, UniformLog, AdaptedLinear, AdaptedLog };

inline constexpr double kDefaultDelta = 1e-3;
inline constexpr int kAdjustGridPoints = 201;
inline constexpr double kTopEndInflation = 1e-9;

inline std::string to_string(Spacing s)
{
    switch (s) {
    case Spacing::UniformLinear: return "uniform-linear";
    case Spacing::UniformLog: return "uniform-log";
    case Spacing::AdaptedLinear: return "adapted-linear";
    case Spacing::AdaptedLog: return "adapted-log";
    }
    return "?";
}

inline Spacing parse_spacing(const std::string& s)
{
    for (auto v : {Spacing::UniformLinear, Spacing::UniformLog, Spacing::AdaptedLinear, Spacing::AdaptedLog})
        if (to_string(v) == s)
            return v;
    throw InputError("unknown spacing '" + s + "'");
}

/// tau_0..tau_M. Uniform modes divide [0, lambda_max] evenly or
/// geometrically (tau_m = lambda_max 2^{-(M-m)}, so band 1 is
/// [0, lambda_max 2^{-(M-1)})). Adapted modes apply the same rules to the
/// estimated CDF and invert. tau_M is lambda_max (1 + 1e-9).
inline std::vector<double> initial_band_ends(const SpectralDensityEstimate& density, int M, Spacing mode)
{
    if (M < 1)
        throw InputError("number of bands must be >= 1");
    const double lmax = density.lambda_max;
    std::vector<double> tau(static_cast<size_t>(M + 1));
    tau[0] = 0.0;
    for (int m = 1; m < M; ++m) {
        const double lin = static_cast<double>(m) / M;
        const double geo = std::ldexp(1.0, m - M);
        switch (mode) {
        case Spacing::UniformLinear: tau[m] = lin * lmax; break;
        case Spacing::UniformLog: tau[m] = geo * lmax; break;
        case Spacing::AdaptedLinear: tau[m] = density.inverse(lin); break;
        case Spacing::AdaptedLog: tau[m] = density.inverse(geo); break;
        }
    }
    tau[M] = lmax * (1.0 + kTopEndInflation);
    for (int m = 1; m <= M; ++m)
        if (!(tau[m] > tau[m - 1]))
            throw NumericalError("initial band ends are not strictly increasing (band " + std::to_string(m) +
                                 "); the density estimate is too coarse for this many bands");
    return tau;
}

/// Symmetric difference quotient of the estimated CDF, the local density proxy.
inline double band_end_objective(const SpectralDensityEstimate& density, double tau, double delta)
{
    return (density.cdf(tau + delta) - density.cdf(tau - delta)) / (2.0 * delta);
}

/// Moves each interior end to the lowest-density point of
/// [tau_m - r, tau_m + r], r = half the distance to the nearer neighbour,
/// scanning a 201-point grid. Ties go to the initial end, then the smaller tau.
inline std::vector<double> adjust_band_ends(const SpectralDensityEstimate& density, const std::vector<double>& tau, double delta)
{
    if (!(delta > 0.0))
        throw InputError("delta must be positive");
    std::vector<double> out = tau;
    const int M = static_cast<int>(tau.size()) - 1;
    for (int m = 1; m < M; ++m) {
        const double r = 0.5 * std::min(tau[m] - tau[m - 1], tau[m + 1] - tau[m]);
        const double lo = tau[m] - r;
        double best_tau = tau[m];
        double best = band_end_objective(density, tau[m], delta);
        for (int g = 0; g < kAdjustGridPoints; ++g) {
            const double t = lo + 2.0 * r * g / (kAdjustGridPoints - 1);
            const double v = band_end_objective(density, t, delta);
            // differences at roundoff level count as ties
            if (v < best - 1e-12 * std::max(1.0, std::abs(best))) {
                best = v;
                best_tau = t;
            }
        }
        out[m] = best_tau;
    }
    return out;
}

struct FilterBankDesign {
    int M = 0;
    int K = 0;
    Spacing mode = Spacing::AdaptedLog;
    double delta = kDefaultDelta;
    double lambda_max = 0.0;
    std::vector<double> initial_ends;
    std::vector<double> adjusted_ends;
    std::vector<PolynomialFilter> filters;
};

inline FilterBankDesign build_filter_bank(const SpectralDensityEstimate& density, int M, Spacing mode, int K, double delta = kDefaultDelta)
{
    if (K < 1)
        throw InputError("filter degree must be >= 1");
    FilterBankDesign d;
    d.M = M;
    d.K = K;
    d.mode = mode;
    d.delta = delta;
    d.lambda_max = density.lambda_max;
    d.initial_ends = initial_band_ends(density, M, mode);
    d.adjusted_ends = adjust_band_ends(density, d.initial_ends, delta);
    for (int m = 0; m < M; ++m)
        d.filters.push_back(make_polynomial_filter(d.adjusted_ends[m], d.adjusted_ends[m + 1], d.lambda_max, K, true));
    return d;
}

/// Same bank on explicitly given band ends (no density needed).
inline FilterBankDesign filter_bank_from_ends(std::vector<double> ends, double lambda_max, int K)
{
    if (ends.size() < 2)
        throw InputError("need at least two band ends");
    FilterBankDesign d;
    d.M = static_cast<int>(ends.size()) - 1;
    d.K = K;
    d.lambda_max = lambda_max;
    d.initial_ends = ends;
    d.adjusted_ends = std::move(ends);
    for (int m = 0; m < d.M; ++m)
        d.filters.push_back(make_polynomial_filter(d.adjusted_ends[m], d.adjusted_ends[m + 1], lambda_max, K, true));
    return d;
}

} // namespace mcsfb
