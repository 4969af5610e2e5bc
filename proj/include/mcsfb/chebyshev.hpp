#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "mcsfb/graph.hpp"

namespace mcsfb {

inline constexpr int kDensityDegree = 80;
inline constexpr int kTransformDegree = 50;
inline constexpr int kDefaultRandomVectors = 30;

namespace detail {

inline double chebyshev_angle(double tau, double lambda_max)
{
    const double x = std::clamp(2.0 * tau / lambda_max - 1.0, -1.0, 1.0);
    return std::acos(x);
}

inline void check_lambda_match(double a, double b, const char* what)
{
    if (std::abs(a - b) > 1e-9 * std::max(std::abs(a), std::abs(b)))
        throw InputError(std::string(what) + ": lambda_max mismatch (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
}

} // namespace detail

/// Chebyshev expansion coefficients c_0..c_K, on [0, lambda_max], of the
/// indicator of [tau_a, tau_b). Closed form of the projection integral:
/// with phi(t) = arccos(2t/lambda_max - 1),
///   c_0 = (2/pi)(phi(a) - phi(b)),  c_k = 2/(k pi) (sin(k phi(a)) - sin(k phi(b))).
/// Band ends beyond [0, lambda_max] are clamped.
inline Eigen::VectorXd step_filter_coefficients(double tau_a, double tau_b, double lambda_max, int K)
{
    if (!(tau_a < tau_b))
        throw InputError("step filter needs tau_a < tau_b");
    if (!(lambda_max > 0.0))
        throw InputError("step filter needs lambda_max > 0");
    if (K < 0)
        throw InputError("polynomial degree must be >= 0");
    const double phi_a = detail::chebyshev_angle(std::max(tau_a, 0.0), lambda_max);
    const double phi_b = detail::chebyshev_angle(std::min(tau_b, lambda_max), lambda_max);
    Eigen::VectorXd c(K + 1);
    c[0] = 2.0 / std::numbers::pi * (phi_a - phi_b);
    for (int k = 1; k <= K; ++k)
        c[k] = 2.0 / (k * std::numbers::pi) * (std::sin(k * phi_a) - std::sin(k * phi_b));
    return c;
}

/// Jackson damping factors gamma_{k,K}, k = 0..K (gamma_0 = 1).
inline Eigen::VectorXd jackson_damping(int K)
{
    if (K < 0)
        throw InputError("polynomial degree must be >= 0");
    Eigen::VectorXd g(K + 1);
    const double a = std::numbers::pi / (K + 2);
    for (int k = 0; k <= K; ++k) {
        const double num = (1.0 - static_cast<double>(k) / (K + 2)) * std::sin(a) * std::cos(k * a) +
                           1.0 / (K + 2) * std::cos(a) * std::sin(k * a);
        g[k] = num / std::sin(a);
    }
    g[0] = 1.0;
    return g;
}

/// Evaluates sum_k alpha_k Tbar_k(lambda) by Clenshaw's recurrence, where
/// Tbar_k is the Chebyshev polynomial shifted to [0, lambda_max].
inline double chebyshev_evaluate(const Eigen::VectorXd& alpha, double lambda_max, double lambda)
{
    const double x = 2.0 * lambda / lambda_max - 1.0;
    double b1 = 0.0, b2 = 0.0;
    for (Eigen::Index k = alpha.size() - 1; k >= 1; --k) {
        const double b0 = alpha[k] + 2.0 * x * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    return (alpha.size() > 0 ? alpha[0] : 0.0) + x * b1 - b2;
}

/// Degree-K Chebyshev interpolant of a general function on [0, lambda_max],
/// returned as recurrence coefficients alpha (alpha_0 = c_0/2, alpha_k = c_k).
/// Coefficients come from Gauss-Chebyshev quadrature on `nodes` points.
inline Eigen::VectorXd chebyshev_fit(const std::function<double(double)>& h, double lambda_max, int K, int nodes = 0)
{
    if (K < 0)
        throw InputError("polynomial degree must be >= 0");
    const int q = nodes > 0 ? nodes : std::max(4 * (K + 1), 512);
    Eigen::VectorXd vals(q), theta(q);
    for (int i = 0; i < q; ++i) {
        theta[i] = std::numbers::pi * (i + 0.5) / q;
        vals[i] = h(0.5 * lambda_max * (std::cos(theta[i]) + 1.0));
    }
    Eigen::VectorXd alpha(K + 1);
    for (int k = 0; k <= K; ++k) {
        double s = 0.0;
        for (int i = 0; i < q; ++i)
            s += vals[i] * std::cos(k * theta[i]);
        alpha[k] = 2.0 / q * s;
    }
    alpha[0] *= 0.5;
    return alpha;
}

/// Degree-K polynomial approximation of an ideal band filter.
struct PolynomialFilter {
    Eigen::VectorXd alpha;
    double band_lo = 0.0;
    double band_hi = 0.0;
    double lambda_max = 1.0;
    bool damped = true;

    int degree() const { return static_cast<int>(alpha.size()) - 1; }
    double operator()(double lambda) const { return chebyshev_evaluate(alpha, lambda_max, lambda); }
};

/// alpha_0 = c_0/2, alpha_k = gamma_{k,K} c_k (or c_k when undamped).
inline PolynomialFilter make_polynomial_filter(double tau_a, double tau_b, double lambda_max, int K, bool damped = true)
{
    PolynomialFilter f;
    f.alpha = step_filter_coefficients(tau_a, tau_b, lambda_max, K);
    f.alpha[0] *= 0.5;
    if (damped)
        f.alpha.array() *= jackson_damping(K).array();
    f.band_lo = tau_a;
    f.band_hi = tau_b;
    f.lambda_max = lambda_max;
    f.damped = damped;
    return f;
}

/// sum_k alpha_k Tbar_k(L) X via the three-term recurrence, keeping two
/// blocks of state. Costs K matvecs per column of X.
template <class Mat>
Mat apply_chebyshev(const LaplacianOperator& L, const Eigen::VectorXd& alpha, double lambda_max, const Mat& x)
{
    require_same_length(L.size(), static_cast<long>(x.rows()), "apply_filter");
    const Eigen::Index K = alpha.size() - 1;
    Mat out = alpha[0] * x;
    if (K < 1)
        return out;
    Mat prev = x;
    Mat cur(x.rows(), x.cols());
    L.apply_into(x, cur);
    cur = (2.0 / lambda_max) * cur - x;
    out += alpha[1] * cur;
    Mat next(x.rows(), x.cols());
    for (Eigen::Index k = 2; k <= K; ++k) {
        L.apply_into(cur, next);
        next = (4.0 / lambda_max) * next - 2.0 * cur - prev;
        out += alpha[k] * next;
        std::swap(prev, cur);
        std::swap(cur, next);
    }
    return out;
}

inline Eigen::VectorXd apply_filter(const LaplacianOperator& L, const PolynomialFilter& filter, const Eigen::VectorXd& f)
{
    detail::check_lambda_match(L.require_lambda_max(), filter.lambda_max, "apply_filter");
    return apply_chebyshev(L, filter.alpha, filter.lambda_max, f);
}

enum class CacheStorage { Auto, Full, Streaming };

struct CacheOptions {
    CacheStorage storage = CacheStorage::Auto;
    /// Auto mode keeps every Tbar_k(L) X block only while (K+1)*N*J doubles fit here.
    std::size_t memory_budget_bytes = std::size_t(1) << 30;
};

/// The block X of J seeded standard-normal probe vectors and the sequence
/// Tbar_k(L) X, k = 0..K, shared by density estimation, eigenvalue counting
/// and sampling-weight computation.
///
/// Full storage costs (K+1)*N*J doubles. In streaming mode only X and the
/// trace moments are kept; every filtered() call then re-runs the recurrence
/// (K*J matvecs).
class ChebyshevBasisCache {
public:
    ChebyshevBasisCache(const LaplacianOperator& L, int K, int J, std::uint64_t seed, CacheOptions opts = {})
        : L_(&L), lambda_max_(L.require_lambda_max()), K_(K), J_(J), seed_(seed)
    {
        if (K < 1 || J < 1)
            throw InputError("basis cache needs K >= 1 and J >= 1");
        const int n = L.size();
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal;
        x_.resize(n, J);
        for (int j = 0; j < J; ++j)
            for (int i = 0; i < n; ++i)
                x_(i, j) = normal(rng);

        const double bytes = double(K + 1) * n * J * sizeof(double);
        full_ = opts.storage == CacheStorage::Full ||
                (opts.storage == CacheStorage::Auto && bytes <= double(opts.memory_budget_bytes));
        if (full_) {
            try {
                terms_.reserve(static_cast<size_t>(K + 1));
            } catch (const std::bad_alloc&) {
                throw NumericalError("basis cache allocation of " + std::to_string(bytes / 1e6) + " MB failed");
            }
        }

        trace_l_ = L.matrix().diagonal().sum();
        moments_.resize(K + 1);
        Eigen::MatrixXd prev = x_;
        Eigen::MatrixXd cur(n, J), next(n, J);
        record(0, prev);
        L.apply_into(x_, cur);
        cur = (2.0 / lambda_max_) * cur - x_;
        record(1, cur);
        for (int k = 2; k <= K; ++k) {
            L.apply_into(cur, next);
            next = (4.0 / lambda_max_) * next - 2.0 * cur - prev;
            record(k, next);
            std::swap(prev, cur);
            std::swap(cur, next);
        }
    }

    int degree() const { return K_; }
    int num_vectors() const { return J_; }
    int size() const { return static_cast<int>(x_.rows()); }
    double lambda_max() const { return lambda_max_; }
    std::uint64_t seed() const { return seed_; }
    bool stores_terms() const { return full_; }
    const Eigen::MatrixXd& probes() const { return x_; }
    const Eigen::MatrixXd& term(int k) const { return terms_.at(static_cast<size_t>(k)); }
    /// mu_k = sum_j x_j^T Tbar_k(L) x_j.
    const Eigen::VectorXd& moments() const { return moments_; }
    /// trace(Tbar_0(L)) = N and trace(Tbar_1(L)) = 2 trace(L)/lambda_max - N.
    double exact_low_trace(int k) const
    {
        if (k == 0)
            return size();
        if (k == 1)
            return 2.0 * trace_l_ / lambda_max_ - size();
        throw InputError("exact traces are only known for k <= 1");
    }

    /// sum_k alpha_k Tbar_k(L) X. Coefficient vectors shorter than K+1 are
    /// zero-padded.
    Eigen::MatrixXd filtered(const Eigen::VectorXd& alpha) const
    {
        check_degree(alpha);
        if (!full_)
            return apply_chebyshev(*L_, alpha, lambda_max_, x_);
        Eigen::MatrixXd out = alpha[0] * terms_[0];
        for (Eigen::Index k = 1; k < alpha.size(); ++k)
            out += alpha[k] * terms_[static_cast<size_t>(k)];
        return out;
    }

    void check_degree(const Eigen::VectorXd& alpha) const
    {
        if (alpha.size() < 1 || alpha.size() > K_ + 1)
            throw InputError("filter degree " + std::to_string(alpha.size() - 1) + " exceeds basis cache degree " +
                             std::to_string(K_));
    }

private:
    void record(int k, const Eigen::MatrixXd& t)
    {
        moments_[k] = (x_.array() * t.array()).sum();
        if (full_)
            terms_.push_back(t);
    }

    const LaplacianOperator* L_;
    double lambda_max_;
    int K_;
    int J_;
    std::uint64_t seed_;
    double trace_l_ = 0.0;
    bool full_ = true;
    Eigen::MatrixXd x_;
    std::vector<Eigen::MatrixXd> terms_;
    Eigen::VectorXd moments_;
};

inline ChebyshevBasisCache build_basis_cache(const LaplacianOperator& L, int K, int J, std::uint64_t seed, CacheOptions opts = {})
{
    return ChebyshevBasisCache(L, K, J, seed, opts);
}

enum class TraceEstimator {
    /// (1/J) sum_k alpha_k mu_k.
    Plain,
    /// Same, but the k = 0 and k = 1 terms use their exactly known traces
    /// instead of the sampled moments. Unbiased, lower variance.
    ControlVariate,
};

/// Hutchinson estimate (1/J) trace(X^T h(L) X) of the eigenvalue count
/// selected by `filter`, from the cached moments; no matvecs.
inline double estimate_eigencount(const ChebyshevBasisCache& cache, const PolynomialFilter& filter,
                                  TraceEstimator estimator = TraceEstimator::Plain)
{
    detail::check_lambda_match(cache.lambda_max(), filter.lambda_max, "estimate_eigencount");
    cache.check_degree(filter.alpha);
    const auto n = filter.alpha.size();
    if (estimator == TraceEstimator::Plain)
        return filter.alpha.dot(cache.moments().head(n)) / cache.num_vectors();
    double est = filter.alpha[0] * cache.exact_low_trace(0);
    if (n > 1)
        est += filter.alpha[1] * cache.exact_low_trace(1);
    if (n > 2)
        est += filter.alpha.tail(n - 2).dot(cache.moments().segment(2, n - 2)) / cache.num_vectors();
    return est;
}

} // namespace mcsfb
