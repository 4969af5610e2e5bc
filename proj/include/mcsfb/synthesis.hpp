#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mcsfb/chebyshev.hpp"
#include "mcsfb/coefficients.hpp"
#include "mcsfb/design.hpp"
#include "mcsfb/parallel.hpp"
#include "mcsfb/sampling.hpp"

namespace mcsfb {

enum class PenaltyKind { OneMinusH, Rational, Spline };

inline std::string to_string(PenaltyKind k)
{
    switch (k) {
    case PenaltyKind::OneMinusH: return "one-minus-h";
    case PenaltyKind::Rational: return "rational";
    case PenaltyKind::Spline: return "spline";
    }
    return "?";
}

inline PenaltyKind parse_penalty(const std::string& s)
{
    for (auto k : {PenaltyKind::OneMinusH, PenaltyKind::Rational, PenaltyKind::Spline})
        if (to_string(k) == s)
            return k;
    throw InputError("unknown penalty '" + s + "'");
}

inline const double kGoldenEpsilon = (std::sqrt(5.0) - 1.0) / 2.0;
inline constexpr double kSplineWidthFraction = 0.1;
inline constexpr int kPenaltyCheckGrid = 2001;
inline constexpr double kRidgeFloor = 1e-8;
inline constexpr double kWeightFloor = 1e-12;
inline constexpr double kPenaltyMidbandLimit = 0.05;

/// phi(L) + ridge I as a Chebyshev coefficient vector plus a shift.
struct PenaltyFilter {
    PenaltyKind kind = PenaltyKind::Spline;
    double epsilon = 0.0;
    double lambda_max = 1.0;
    Eigen::VectorXd alpha;
    double ridge = 0.0;
    double spline_width = 0.0;

    double operator()(double lambda) const { return chebyshev_evaluate(alpha, lambda_max, lambda); }
};

/// Cubic spline that is 0 on [lo + w, hi - w] and 1 outside [lo - w, hi + w].
/// The lowest band (lo = 0) has no left ramp and the band reaching
/// lambda_max has no right ramp.
inline double spline_penalty(double lambda, double lo, double hi, double w, double lambda_max)
{
    auto ramp = [](double t) { // 0 -> 0, 1 -> 1, flat at both ends
        t = std::clamp(t, 0.0, 1.0);
        return t * t * (3.0 - 2.0 * t);
    };
    double left = 0.0, right = 0.0;
    if (lo > 0.0)
        left = ramp((lo + w - lambda) / (2.0 * w));
    if (hi < lambda_max)
        right = ramp((lambda - (hi - w)) / (2.0 * w));
    return std::max(left, right);
}

inline PenaltyFilter build_penalty(const PolynomialFilter& filter, PenaltyKind kind, int K, double epsilon = kGoldenEpsilon)
{
    if (K < 1)
        throw InputError("penalty degree must be >= 1");
    PenaltyFilter p;
    p.kind = kind;
    p.lambda_max = filter.lambda_max;
    const double lmax = filter.lambda_max;
    switch (kind) {
    case PenaltyKind::OneMinusH:
        p.alpha = Eigen::VectorXd::Zero(std::max<Eigen::Index>(K + 1, filter.alpha.size()));
        p.alpha.head(filter.alpha.size()) = -filter.alpha;
        p.alpha[0] += 1.0;
        break;
    case PenaltyKind::Rational:
        if (!(epsilon > 0.0))
            throw InputError("rational penalty needs epsilon > 0");
        p.epsilon = epsilon;
        p.alpha = chebyshev_fit(
            [&](double x) { return 1.0 / (std::max(filter(x), 0.0) + epsilon) - 1.0 / (1.0 + epsilon); }, lmax, K);
        break;
    case PenaltyKind::Spline: {
        const double lo = std::max(filter.band_lo, 0.0);
        const double hi = std::min(filter.band_hi, lmax);
        const double width = hi - lo;
        p.spline_width = std::min(kSplineWidthFraction * width, 0.5 * width);
        const double w = p.spline_width;
        p.alpha = chebyshev_fit([&](double x) { return spline_penalty(x, lo, hi, w, lmax); }, lmax, K);
        break;
    }
    }
    double grid_min = 0.0;
    for (int g = 0; g < kPenaltyCheckGrid; ++g)
        grid_min = std::min(grid_min, p(lmax * g / (kPenaltyCheckGrid - 1)));
    p.ridge = std::max(0.0, -grid_min) + kRidgeFloor;
    const double mid = 0.5 * (std::max(filter.band_lo, 0.0) + std::min(filter.band_hi, lmax));
    if (std::abs(p(mid)) > kPenaltyMidbandLimit)
        warn(to_string(kind) + " penalty is " + std::to_string(p(mid)) + " at the middle of band [" +
             std::to_string(filter.band_lo) + ", " + std::to_string(filter.band_hi) + "); degree " + std::to_string(K) +
             " does not resolve this band");
    return p;
}

struct SynthesisConfig {
    double kappa = 1.0;
    double cg_tolerance = 1e-10;
    int cg_max_iters = 250;
    PenaltyKind penalty = PenaltyKind::OneMinusH;
    double epsilon = kGoldenEpsilon;
    int threads = 1;

    void validate() const
    {
        if (!(kappa > 0.0))
            throw InputError("kappa must be positive");
        if (!(cg_tolerance > 0.0 && cg_tolerance < 1.0))
            throw InputError("CG tolerance must lie in (0, 1)");
        if (cg_max_iters < 1)
            throw InputError("CG iteration limit must be >= 1");
    }
};

/// A fast-transform parameter set: polynomial degree plus solver settings.
struct Scenario {
    int K;
    SynthesisConfig config;
};

inline Scenario scenario_a()
{
    Scenario s{25, {}};
    s.config.cg_tolerance = 1e-8;
    s.config.cg_max_iters = 100;
    return s;
}

inline Scenario scenario_b()
{
    Scenario s{50, {}};
    s.config.cg_tolerance = 1e-10;
    s.config.cg_max_iters = 250;
    return s;
}

/// The system matrix kappa M^T Omega^{-1} M + phi(L) + ridge I, applied
/// without assembling it. With a PenaltyFilter each application costs
/// deg(phi) matvecs; any other symmetric PSD penalty operator can be supplied
/// instead (dense oracles in tests).
class InterpolationOperator {
public:
    using PenaltyApply = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

    InterpolationOperator(const LaplacianOperator& L, const PenaltyFilter& penalty, const std::vector<int>& vertices,
                          const Eigen::VectorXd& weights, double kappa)
        : InterpolationOperator(L.size(),
                                [&L, &penalty](const Eigen::VectorXd& z) {
                                    Eigen::VectorXd out = apply_chebyshev(L, penalty.alpha, penalty.lambda_max, z);
                                    out += penalty.ridge * z;
                                    return out;
                                },
                                vertices, weights, kappa)
    {
        detail::check_lambda_match(L.require_lambda_max(), penalty.lambda_max, "interpolation operator");
    }

    InterpolationOperator(int n, PenaltyApply penalty, const std::vector<int>& vertices, const Eigen::VectorXd& weights, double kappa)
        : n_(n), penalty_(std::move(penalty)), vertices_(vertices), sample_diag_(static_cast<Eigen::Index>(vertices.size()))
    {
        require_same_length(n, weights.size(), "sampling weights");
        for (size_t t = 0; t < vertices.size(); ++t) {
            if (vertices[t] < 0 || vertices[t] >= n)
                throw InputError("sample vertex " + std::to_string(vertices[t]) + " out of range");
            sample_diag_[static_cast<Eigen::Index>(t)] = kappa / std::max(weights[vertices[t]], kWeightFloor);
        }
    }

    int size() const { return n_; }

    Eigen::VectorXd apply(const Eigen::VectorXd& z) const
    {
        Eigen::VectorXd out = penalty_(z);
        for (size_t t = 0; t < vertices_.size(); ++t)
            out[vertices_[t]] += sample_diag_[static_cast<Eigen::Index>(t)] * z[vertices_[t]];
        return out;
    }

    /// kappa M^T Omega^{-1} y.
    Eigen::VectorXd rhs(const Eigen::VectorXd& y) const
    {
        require_same_length(static_cast<long>(vertices_.size()), y.size(), "band samples");
        Eigen::VectorXd b = Eigen::VectorXd::Zero(size());
        for (size_t t = 0; t < vertices_.size(); ++t)
            b[vertices_[t]] += sample_diag_[static_cast<Eigen::Index>(t)] * y[static_cast<Eigen::Index>(t)];
        return b;
    }

    /// Diagonal preconditioner: 1 off the samples, 1 + kappa/omega on them.
    Eigen::VectorXd preconditioner() const
    {
        Eigen::VectorXd d = Eigen::VectorXd::Ones(size());
        for (size_t t = 0; t < vertices_.size(); ++t)
            d[vertices_[t]] += sample_diag_[static_cast<Eigen::Index>(t)];
        return d;
    }

    /// Dense assembly, for checks on small graphs.
    Eigen::MatrixXd dense() const
    {
        Eigen::MatrixXd A(size(), size());
        for (int i = 0; i < size(); ++i)
            A.col(i) = apply(Eigen::VectorXd::Unit(size(), i));
        return A;
    }

private:
    int n_;
    PenaltyApply penalty_;
    std::vector<int> vertices_;
    Eigen::VectorXd sample_diag_;
};

struct PcgResult {
    Eigen::VectorXd z;
    int iterations = 0;
    double relative_residual = 0.0;
    bool converged = false;
    /// 0.5 z^T A z - b^T z after each iteration (index 0 is the zero start).
    std::vector<double> objective;
};

/// Preconditioned conjugate gradient from z = 0, stopping when the
/// recursively updated residual satisfies ||r|| <= tol ||b||. On hitting the
/// iteration cap the last iterate is returned with converged = false.
inline PcgResult pcg_solve(const InterpolationOperator& A, const Eigen::VectorXd& b, const Eigen::VectorXd& precond, double tol,
                           int max_iters)
{
    PcgResult res;
    const int n = A.size();
    res.z = Eigen::VectorXd::Zero(n);
    res.objective.push_back(0.0);
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        res.converged = true;
        return res;
    }
    Eigen::VectorXd r = b;
    Eigen::VectorXd s = r.cwiseQuotient(precond);
    Eigen::VectorXd p = s;
    double rs = r.dot(s);
    for (int it = 0; it < max_iters; ++it) {
        const Eigen::VectorXd q = A.apply(p);
        const double pq = p.dot(q);
        if (!(pq > 0.0))
            break; // operator lost definiteness along p
        const double step = rs / pq;
        res.z += step * p;
        r -= step * q;
        res.iterations = it + 1;
        res.objective.push_back(-0.5 * res.z.dot(b + r));
        res.relative_residual = r.norm() / bnorm;
        if (res.relative_residual <= tol) {
            res.converged = true;
            break;
        }
        s = r.cwiseQuotient(precond);
        const double rs_new = r.dot(s);
        p = s + (rs_new / rs) * p;
        rs = rs_new;
    }
    if (res.iterations == 0)
        res.relative_residual = 1.0;
    return res;
}

/// Interpolates one band from its samples. Empty bands give the zero signal.
inline PcgResult reconstruct_band(const LaplacianOperator& L, const PenaltyFilter& penalty, const BandPlan& band,
                                  const Eigen::VectorXd& y, const SynthesisConfig& config)
{
    if (band.vertices.empty()) {
        PcgResult res;
        res.z = Eigen::VectorXd::Zero(L.size());
        res.converged = true;
        res.objective.push_back(0.0);
        return res;
    }
    InterpolationOperator A(L, penalty, band.vertices, band.weights, config.kappa);
    return pcg_solve(A, A.rhs(y), A.preconditioner(), config.cg_tolerance, config.cg_max_iters);
}

/// h_m(L) f for each band of the bank: M K matvecs.
inline std::vector<Eigen::VectorXd> filter_signal(const LaplacianOperator& L, const FilterBankDesign& bank, const Eigen::VectorXd& f,
                                                  int threads = 1)
{
    require_same_length(L.size(), f.size(), "signal");
    std::vector<Eigen::VectorXd> out(static_cast<size_t>(bank.M));
    parallel_for(bank.M, threads, [&](int m) { out[m] = apply_filter(L, bank.filters[m], f); });
    return out;
}

/// Samples already filtered bands on the plan's vertex sets; no matvecs.
inline AnalysisCoefficients sample_filtered(const SamplingPlan& plan, const std::vector<Eigen::VectorXd>& filtered)
{
    if (filtered.size() != plan.bands.size())
        throw DimensionError("one filtered signal per band required");
    AnalysisCoefficients c;
    c.mean = plan.mean;
    for (size_t m = 0; m < plan.bands.size(); ++m) {
        BandCoefficients b;
        b.vertices = plan.bands[m].vertices;
        b.values.resize(static_cast<Eigen::Index>(b.vertices.size()));
        for (size_t t = 0; t < b.vertices.size(); ++t)
            b.values[static_cast<Eigen::Index>(t)] = filtered[m][b.vertices[t]];
        c.bands.push_back(std::move(b));
    }
    return c;
}

/// Fast analysis: filter (f minus the plan's mean, if it stores one) and sample.
inline AnalysisCoefficients fast_analyze(const LaplacianOperator& L, const FilterBankDesign& bank, const SamplingPlan& plan,
                                         const Eigen::VectorXd& f, int threads = 1)
{
    Eigen::VectorXd g = f;
    if (plan.mean)
        g.array() -= *plan.mean;
    return sample_filtered(plan, filter_signal(L, bank, g, threads));
}

struct BandReport {
    int iterations = 0;
    double residual = 0.0;
    bool converged = true;
    int n_samples = 0;
};

struct SynthesisResult {
    Eigen::VectorXd f;
    std::vector<BandReport> bands;

    bool converged() const
    {
        return std::all_of(bands.begin(), bands.end(), [](const BandReport& b) { return b.converged; });
    }
};

/// Sum of the per-band interpolations, plus the stored mean.
inline SynthesisResult synthesize_fast(const LaplacianOperator& L, const FilterBankDesign& bank, const SamplingPlan& plan,
                                       const AnalysisCoefficients& coeffs, const SynthesisConfig& config)
{
    config.validate();
    if (coeffs.bands.size() != plan.bands.size() || static_cast<int>(plan.bands.size()) != bank.M)
        throw DimensionError("synthesize_fast: band count mismatch");
    for (int m = 0; m < bank.M; ++m)
        if (coeffs.bands[m].vertices != plan.bands[m].vertices)
            throw DimensionError("synthesize_fast: coefficients of band " + std::to_string(m + 1) +
                                 " were not taken on the plan's vertices");
    std::vector<PcgResult> parts(static_cast<size_t>(bank.M));
    parallel_for(bank.M, config.threads, [&](int m) {
        const auto penalty = build_penalty(bank.filters[m], config.penalty, bank.K, config.epsilon);
        parts[m] = reconstruct_band(L, penalty, plan.bands[m], coeffs.bands[m].values, config);
    });
    SynthesisResult out;
    out.f = Eigen::VectorXd::Zero(L.size());
    for (int m = 0; m < bank.M; ++m) {
        out.f += parts[m].z;
        out.bands.push_back({parts[m].iterations, parts[m].relative_residual, parts[m].converged,
                             static_cast<int>(plan.bands[m].vertices.size())});
    }
    if (coeffs.mean)
        out.f.array() += *coeffs.mean;
    return out;
}

inline double nmse(const Eigen::VectorXd& reference, const Eigen::VectorXd& estimate)
{
    require_same_length(reference.size(), estimate.size(), "nmse");
    const double denom = reference.squaredNorm();
    if (denom == 0.0)
        throw InputError("nmse undefined for the zero reference signal");
    return (estimate - reference).squaredNorm() / denom;
}

} // namespace mcsfb
