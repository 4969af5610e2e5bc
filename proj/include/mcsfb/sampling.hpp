#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mcsfb/chebyshev.hpp"
#include "mcsfb/density.hpp"
#include "mcsfb/design.hpp"

namespace mcsfb {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline Eigen::VectorXd normalized_or_zero(Eigen::VectorXd w)
{
    const double s = w.sum();
    if (s > 0.0 && std::isfinite(s))
        w /= s;
    else
        w.setZero();
    return w;
}

} // namespace detail

/// Seed used for band m (0-based) of a plan built with `seed`.
inline std::uint64_t band_seed(std::uint64_t seed, int band)
{
    return detail::splitmix64(seed ^ static_cast<std::uint64_t>(band));
}

/// A vector that sums to 1, or is all zero to mark an empty distribution.
inline bool is_empty_distribution(const Eigen::VectorXd& w) { return !(w.sum() > 0.0); }

inline int support_size(const Eigen::VectorXd& w) { return static_cast<int>((w.array() > 0.0).count()); }

/// omega(i) proportional to the squared norm of row i of h(L) X.
inline Eigen::VectorXd compute_weights(const ChebyshevBasisCache& cache, const PolynomialFilter& filter)
{
    detail::check_lambda_match(cache.lambda_max(), filter.lambda_max, "compute_weights");
    const Eigen::MatrixXd hx = cache.filtered(filter.alpha);
    return detail::normalized_or_zero(hx.rowwise().squaredNorm());
}

/// omega(i) log(1 + |filtered(i)|), renormalized.
inline Eigen::VectorXd adapt_weights_to_signal(const Eigen::VectorXd& weights, const Eigen::VectorXd& filtered)
{
    require_same_length(weights.size(), filtered.size(), "adapt_weights_to_signal");
    return detail::normalized_or_zero(weights.array() * filtered.array().abs().log1p());
}

enum class CountMode { Trace, CdfDiff };

inline std::string to_string(CountMode m) { return m == CountMode::Trace ? "trace" : "cdf-diff"; }

/// Per-band sample-count estimates before normalization: eigenvalue counts
/// from the cached trace moments, or N times the CDF increment over each band.
inline std::vector<double> estimate_band_counts(const ChebyshevBasisCache& cache, const FilterBankDesign& bank, CountMode mode,
                                                const SpectralDensityEstimate* density = nullptr)
{
    std::vector<double> est(static_cast<size_t>(bank.M));
    for (int m = 0; m < bank.M; ++m) {
        if (mode == CountMode::Trace) {
            est[m] = estimate_eigencount(cache, bank.filters[m], TraceEstimator::ControlVariate);
        } else {
            if (!density)
                throw InputError("cdf-diff count mode needs a density estimate");
            est[m] = density->n_vertices *
                     (density->cdf(bank.adjusted_ends[m + 1]) - density->cdf(bank.adjusted_ends[m]));
        }
    }
    return est;
}

/// Scales estimates to sum to N_T, rounds, and repairs the total: excess
/// comes off the last band, a deficit goes to the first. Counts are then kept
/// within [0, caps[m]]; whatever that moves is rebalanced over the bands in
/// ascending order.
inline std::vector<int> normalize_counts(const std::vector<double>& estimates, int N_T, const std::vector<int>& caps = {})
{
    const auto M = static_cast<int>(estimates.size());
    if (M < 1)
        throw InputError("normalize_counts: no bands");
    if (N_T < 0)
        throw InputError("target sample count must be nonnegative");
    std::vector<double> est(estimates);
    for (auto& e : est)
        e = std::max(e, 0.0);
    const double total = std::accumulate(est.begin(), est.end(), 0.0);
    if (!(total > 0.0))
        throw NumericalError("all band sample-count estimates are zero");
    std::vector<long> n(static_cast<size_t>(M));
    for (int m = 0; m < M; ++m)
        n[m] = std::lround(est[m] / total * N_T);
    const long sum = std::accumulate(n.begin(), n.end(), 0L);
    if (sum > N_T)
        n[M - 1] -= sum - N_T;
    else if (sum < N_T)
        n[0] += N_T - sum;

    std::vector<long> cap(static_cast<size_t>(M), N_T);
    if (!caps.empty()) {
        if (static_cast<int>(caps.size()) != M)
            throw DimensionError("normalize_counts: caps length differs from band count");
        for (int m = 0; m < M; ++m)
            cap[m] = caps[m];
        if (std::accumulate(cap.begin(), cap.end(), 0L) < N_T)
            throw NumericalError("sampling distributions support fewer than " + std::to_string(N_T) + " samples in total");
    }
    long surplus = 0; // > 0: samples to place, < 0: samples to remove
    for (int m = 0; m < M; ++m) {
        if (n[m] < 0) {
            surplus += n[m];
            n[m] = 0;
        } else if (n[m] > cap[m]) {
            surplus += n[m] - cap[m];
            n[m] = cap[m];
        }
    }
    for (int m = 0; m < M && surplus != 0; ++m) {
        if (surplus > 0) {
            const long room = std::min(surplus, cap[m] - n[m]);
            n[m] += room;
            surplus -= room;
        } else {
            const long take = std::min(-surplus, n[m]);
            n[m] -= take;
            surplus += take;
        }
    }
    return std::vector<int>(n.begin(), n.end());
}

/// Band estimates (optionally scaled by log(1 + ||h_m(L) f||)), normalized to N_T.
inline std::vector<int> allocate_counts(const ChebyshevBasisCache& cache, const FilterBankDesign& bank, int N_T,
                                        const std::vector<Eigen::VectorXd>* filtered_signal = nullptr,
                                        CountMode mode = CountMode::Trace, const SpectralDensityEstimate* density = nullptr,
                                        const std::vector<int>& caps = {})
{
    auto est = estimate_band_counts(cache, bank, mode, density);
    if (filtered_signal) {
        if (static_cast<int>(filtered_signal->size()) != bank.M)
            throw DimensionError("allocate_counts: one filtered signal per band required");
        for (int m = 0; m < bank.M; ++m)
            est[m] *= std::log1p((*filtered_signal)[m].norm());
    }
    return normalize_counts(est, N_T, caps);
}

/// n distinct vertices drawn without replacement with probability
/// proportional to weight: the n smallest keys -ln(u_i)/w_i. Returned sorted.
inline std::vector<int> sample_without_replacement(const Eigen::VectorXd& weights, int n, std::uint64_t seed)
{
    if (n < 0)
        throw InputError("sample count must be nonnegative");
    const int support = support_size(weights);
    if (n > support)
        throw InputError("cannot draw " + std::to_string(n) + " distinct vertices from a support of " + std::to_string(support));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::pair<double, int>> keys;
    keys.reserve(static_cast<size_t>(support));
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
        const double u = 1.0 - unif(rng); // (0, 1]
        if (weights[i] > 0.0)
            keys.emplace_back(-std::log(u) / weights[i], static_cast<int>(i));
    }
    std::partial_sort(keys.begin(), keys.begin() + n, keys.end());
    std::vector<int> out(static_cast<size_t>(n));
    for (int t = 0; t < n; ++t)
        out[t] = keys[t].second;
    std::sort(out.begin(), out.end());
    return out;
}

struct BandPlan {
    Eigen::VectorXd weights;
    int count = 0;
    std::vector<int> vertices;
};

struct SamplingPlan {
    int N_T = 0;
    bool adapted = false;
    std::optional<double> mean;
    std::uint64_t seed = 0;
    CountMode count_mode = CountMode::Trace;
    std::vector<BandPlan> bands;

    std::size_t stored_count() const
    {
        std::size_t n = mean ? 1 : 0;
        for (const auto& b : bands)
            n += b.vertices.size();
        return n;
    }
};

/// Signal information for the adapted plan: h_m(L)(f - mean) for every band.
struct AdaptedSignal {
    const std::vector<Eigen::VectorXd>* filtered = nullptr;
    double mean = 0.0;
};

struct PlanOptions {
    CountMode count_mode = CountMode::Trace;
    const SpectralDensityEstimate* density = nullptr;
};

/// Sampling sets for every band. `target_stored` counts every stored real
/// (N for critical sampling); the adapted plan spends one of them on the
/// mean, so N_T = target_stored - 1 there. Bands are sampled independently
/// and may share vertices. No matvecs beyond the cache lookups.
inline SamplingPlan build_sampling_plan(const ChebyshevBasisCache& cache, const FilterBankDesign& bank, int target_stored,
                                        std::uint64_t seed, std::optional<AdaptedSignal> adapted = std::nullopt,
                                        PlanOptions opts = {})
{
    SamplingPlan plan;
    plan.adapted = adapted.has_value();
    plan.seed = seed;
    plan.count_mode = opts.count_mode;
    plan.N_T = target_stored - (plan.adapted ? 1 : 0);
    if (plan.N_T < 0)
        throw InputError("target sample count is too small");
    if (plan.adapted) {
        if (!adapted->filtered || static_cast<int>(adapted->filtered->size()) != bank.M)
            throw DimensionError("adapted plan needs one filtered signal per band");
        plan.mean = adapted->mean;
    }
    std::vector<int> caps;
    for (int m = 0; m < bank.M; ++m) {
        BandPlan b;
        b.weights = compute_weights(cache, bank.filters[m]);
        if (plan.adapted)
            b.weights = adapt_weights_to_signal(b.weights, (*adapted->filtered)[m]);
        caps.push_back(support_size(b.weights));
        plan.bands.push_back(std::move(b));
    }
    const auto counts = allocate_counts(cache, bank, plan.N_T, plan.adapted ? adapted->filtered : nullptr, opts.count_mode,
                                        opts.density, caps);
    for (int m = 0; m < bank.M; ++m) {
        plan.bands[m].count = counts[m];
        plan.bands[m].vertices = sample_without_replacement(plan.bands[m].weights, counts[m], band_seed(seed, m));
    }
    return plan;
}

} // namespace mcsfb
