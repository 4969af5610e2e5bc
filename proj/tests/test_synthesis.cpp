#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "mcsfb/exact.hpp"
#include "mcsfb/generators.hpp"
#include "mcsfb/synthesis.hpp"
#include "test_support.hpp"

using namespace mcsfb;

namespace {

struct WarningCapture {
    std::vector<std::string> messages;
    WarningCapture()
    {
        set_warning_handler([this](const std::string& m) { messages.push_back(m); });
    }
    ~WarningCapture()
    {
        set_warning_handler([](const std::string& m) { std::cerr << "warning: " << m << '\n'; });
    }
};

LaplacianOperator sensor_laplacian(int n, std::uint64_t seed)
{
    SensorParams p;
    p.n = n;
    auto L = build_laplacian(random_sensor_graph(p, seed));
    estimate_lambda_max(L);
    return L;
}

/// Dense oracle of phi(L) + ridge I from the eigendecomposition.
Eigen::MatrixXd dense_penalty(const EigenDecomposition& eig, const PenaltyFilter& p)
{
    Eigen::VectorXd v(eig.size());
    for (int l = 0; l < eig.size(); ++l)
        v[l] = p(eig.lambda[l]) + p.ridge;
    return eig.U * v.asDiagonal() * eig.U.transpose();
}

BandPlan random_band(int n, int count, std::uint64_t seed)
{
    BandPlan b;
    b.weights = (Eigen::VectorXd::Random(n).array() + 1.5).matrix();
    b.weights /= b.weights.sum();
    b.count = count;
    b.vertices = sample_without_replacement(b.weights, count, seed);
    return b;
}

} // namespace

TEST(Penalty, ParseAndPrint)
{
    for (auto k : {PenaltyKind::OneMinusH, PenaltyKind::Rational, PenaltyKind::Spline})
        EXPECT_EQ(parse_penalty(to_string(k)), k);
    EXPECT_THROW(parse_penalty("cubic"), InputError);
}

TEST(Penalty, OneMinusHIsExactAtCoefficientLevel)
{
    const auto h = make_polynomial_filter(1.0, 3.0, 8.0, 40, true);
    const auto p = build_penalty(h, PenaltyKind::OneMinusH, 40);
    Eigen::VectorXd sum = p.alpha + h.alpha;
    EXPECT_NEAR(sum[0], 1.0, 1e-15);
    EXPECT_LT(sum.tail(40).cwiseAbs().maxCoeff(), 1e-15);
    for (double lam = 0.0; lam <= 8.0; lam += 0.01)
        EXPECT_NEAR(p(lam), 1.0 - h(lam), 1e-13);
}

TEST(Penalty, VanishesWhereFilterIsOne)
{
    // allpass filter: h == 1 everywhere, so both penalties are identically zero
    const auto h = make_polynomial_filter(0.0, 8.0 * (1 + kTopEndInflation), 8.0, 30, true);
    const auto a = build_penalty(h, PenaltyKind::OneMinusH, 30);
    const auto b = build_penalty(h, PenaltyKind::Rational, 30);
    for (double lam = 0.0; lam <= 8.0; lam += 0.05) {
        EXPECT_NEAR(a(lam), 0.0, 1e-12);
        EXPECT_NEAR(b(lam), 0.0, 1e-12);
    }
    EXPECT_NEAR(b.epsilon, (std::sqrt(5.0) - 1) / 2, 1e-15);
    EXPECT_THROW(build_penalty(h, PenaltyKind::Rational, 30, 0.0), InputError);
    EXPECT_THROW(build_penalty(h, PenaltyKind::Spline, 0), InputError);
}

TEST(Penalty, SplineShapeAndFit)
{
    const double lmax = 8.0;
    // the reference spline itself
    EXPECT_EQ(spline_penalty(2.0, 1.0, 3.0, 0.2, lmax), 0.0);
    EXPECT_EQ(spline_penalty(0.5, 1.0, 3.0, 0.2, lmax), 1.0);
    EXPECT_EQ(spline_penalty(3.5, 1.0, 3.0, 0.2, lmax), 1.0);
    EXPECT_NEAR(spline_penalty(1.0, 1.0, 3.0, 0.2, lmax), 0.5, 1e-15);
    EXPECT_EQ(spline_penalty(0.0, 0.0, 3.0, 0.2, lmax), 0.0); // lowest band: no left ramp
    EXPECT_EQ(spline_penalty(8.0, 5.0, 8.0, 0.2, lmax), 0.0); // top band: no right ramp

    for (auto [lo, hi] : {std::pair{0.0, 3.0}, std::pair{2.0, 5.0}, std::pair{4.5, lmax * (1 + kTopEndInflation)}}) {
        const auto h = make_polynomial_filter(lo, hi, lmax, 50, true);
        const auto p = build_penalty(h, PenaltyKind::Spline, 50);
        const double w = p.spline_width;
        EXPECT_NEAR(w, 0.1 * (std::min(hi, lmax) - lo), 1e-12);
        for (int g = 0; g <= 2000; ++g) {
            const double lam = lmax * g / 2000;
            if (lam >= lo + w && lam <= hi - w)
                EXPECT_NEAR(p(lam), 0.0, 0.02) << lam;
            if ((lo > 0 && lam < lo - w) || lam > hi + w)
                EXPECT_NEAR(p(lam), 1.0, 0.02) << lam;
        }
    }
}

TEST(Penalty, RidgeMakesItPositiveSemidefinite)
{
    auto L = sensor_laplacian(150, 2);
    const auto eig = dense_eigendecomposition(L);
    const auto cache = build_basis_cache(L, 50, 30, 3);
    const auto bank = build_filter_bank(estimate_cdf(L, cache), 4, Spacing::AdaptedLog, 50);
    WarningCapture quiet;
    for (auto kind : {PenaltyKind::OneMinusH, PenaltyKind::Rational, PenaltyKind::Spline})
        for (const auto& h : bank.filters) {
            const auto p = build_penalty(h, kind, 50);
            EXPECT_GE(p.ridge, kRidgeFloor);
            for (int g = 0; g < kPenaltyCheckGrid; ++g)
                EXPECT_GE(p(bank.lambda_max * g / (kPenaltyCheckGrid - 1)) + p.ridge, -1e-9);
            // z^T (phi(L) + ridge I) z >= -1e-8 ||z||^2 through the matrix-free operator
            InterpolationOperator A(L, p, {}, Eigen::VectorXd::Constant(L.size(), 1.0 / L.size()), 1.0);
            for (std::uint64_t s = 0; s < 5; ++s) {
                const Eigen::VectorXd z = testsupport::random_signal(L.size(), s);
                EXPECT_GE(z.dot(A.apply(z)), -1e-8 * z.squaredNorm());
            }
        }
}

TEST(Penalty, SmallInsideResolvedBands)
{
    const double lmax = 8.0;
    WarningCapture w;
    for (auto kind : {PenaltyKind::OneMinusH, PenaltyKind::Rational, PenaltyKind::Spline})
        for (auto [lo, hi] : {std::pair{0.0, 2.0}, std::pair{2.0, 4.5}, std::pair{4.5, lmax * (1 + kTopEndInflation)}}) {
            const auto p = build_penalty(make_polynomial_filter(lo, hi, lmax, 50, true), kind, 50);
            EXPECT_LE(std::abs(p(0.5 * (lo + std::min(hi, lmax)))), kPenaltyMidbandLimit);
        }
    EXPECT_TRUE(w.messages.empty());
    // a band much narrower than the degree can resolve is reported
    build_penalty(make_polynomial_filter(3.0, 3.3, lmax, 25, true), PenaltyKind::OneMinusH, 25);
    ASSERT_EQ(w.messages.size(), 1u);
    EXPECT_NE(w.messages[0].find("does not resolve"), std::string::npos);
}

TEST(SynthesisConfig, Validation)
{
    SynthesisConfig c;
    EXPECT_NO_THROW(c.validate());
    c.kappa = 0.0;
    EXPECT_THROW(c.validate(), InputError);
    c = {};
    c.cg_tolerance = 1.0;
    EXPECT_THROW(c.validate(), InputError);
    c = {};
    c.cg_max_iters = 0;
    EXPECT_THROW(c.validate(), InputError);
    EXPECT_EQ(scenario_a().K, 25);
    EXPECT_EQ(scenario_a().config.cg_tolerance, 1e-8);
    EXPECT_EQ(scenario_a().config.cg_max_iters, 100);
    EXPECT_EQ(scenario_b().K, 50);
    EXPECT_EQ(scenario_b().config.cg_tolerance, 1e-10);
    EXPECT_EQ(scenario_b().config.cg_max_iters, 250);
}

TEST(Pcg, FullUniformSamplingWithoutPenaltyReturnsSamples)
{
    const int n = 30;
    auto L = build_laplacian(ring_graph(n));
    L.set_lambda_max(4.04);
    PenaltyFilter zero;
    zero.lambda_max = 4.04;
    zero.alpha = Eigen::VectorXd::Zero(6);
    zero.ridge = 0.0;
    BandPlan band;
    band.weights = Eigen::VectorXd::Constant(n, 1.0 / n);
    band.vertices.resize(n);
    std::iota(band.vertices.begin(), band.vertices.end(), 0);
    band.count = n;
    const Eigen::VectorXd y = testsupport::random_signal(n, 1);
    SynthesisConfig cfg;
    cfg.kappa = 2.0;
    const auto res = reconstruct_band(L, zero, band, y, cfg);
    EXPECT_TRUE(res.converged);
    EXPECT_EQ(res.iterations, 1);
    EXPECT_LT((res.z - y).norm(), 1e-12 * y.norm());
}

TEST(Pcg, EmptyBandGivesZero)
{
    auto L = sensor_laplacian(60, 1);
    const auto h = make_polynomial_filter(0.0, 1.0, L.require_lambda_max(), 20, true);
    const auto p = build_penalty(h, PenaltyKind::Spline, 20);
    BandPlan band;
    band.weights = Eigen::VectorXd::Zero(L.size());
    L.reset_matvec_count();
    const auto res = reconstruct_band(L, p, band, Eigen::VectorXd(), SynthesisConfig{});
    EXPECT_TRUE(res.converged);
    EXPECT_EQ(res.iterations, 0);
    EXPECT_EQ(res.z.norm(), 0.0);
    EXPECT_EQ(L.matvec_count(), 0u);
}

TEST(Pcg, OperatorMatchesDenseAssembly)
{
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        auto L = sensor_laplacian(120 + 60 * static_cast<int>(seed), seed);
        const int n = L.size();
        const auto eig = dense_eigendecomposition(L);
        const auto h = make_polynomial_filter(0.0, 0.3 * L.require_lambda_max(), L.require_lambda_max(), 30, true);
        for (auto kind : {PenaltyKind::OneMinusH, PenaltyKind::Rational, PenaltyKind::Spline}) {
            const auto p = build_penalty(h, kind, 30);
            const auto band = random_band(n, n / 3, seed);
            const double kappa = 0.7;
            InterpolationOperator A(L, p, band.vertices, band.weights, kappa);
            // oracle: kappa M^T Omega^{-1} M + U (phi + ridge) U^T
            Eigen::MatrixXd dense = dense_penalty(eig, p);
            for (int v : band.vertices)
                dense(v, v) += kappa / band.weights[v];
            const Eigen::MatrixXd assembled = A.dense();
            EXPECT_LT((assembled - dense).norm(), 1e-9 * dense.norm());
            // symmetry of the matrix-free operator
            const Eigen::VectorXd z1 = testsupport::random_signal(n, 10 + seed), z2 = testsupport::random_signal(n, 20 + seed);
            const double a = A.apply(z1).dot(z2), b = z1.dot(A.apply(z2));
            EXPECT_LT(std::abs(a - b), 1e-10 * std::max(1.0, std::abs(a)));
            // preconditioner
            const Eigen::VectorXd d = A.preconditioner();
            for (int v = 0; v < n; ++v) {
                const bool sampled = std::binary_search(band.vertices.begin(), band.vertices.end(), v);
                EXPECT_DOUBLE_EQ(d[v], sampled ? 1.0 + kappa / band.weights[v] : 1.0);
            }
        }
    }
}

TEST(Pcg, ConvergesToDenseSolution)
{
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const int n = 100 + 40 * static_cast<int>(seed); // up to 300
        auto L = sensor_laplacian(n, seed + 30);
        const double lmax = L.require_lambda_max();
        const double lo = (seed % 3) * 0.3 * lmax;
        const auto h = make_polynomial_filter(lo, lo + 0.4 * lmax, lmax, 40, true);
        const auto p = build_penalty(h, seed % 2 ? PenaltyKind::Spline : PenaltyKind::Rational, 40);
        const auto band = random_band(L.size(), L.size() / 2, seed);
        InterpolationOperator A(L, p, band.vertices, band.weights, 1.0);
        const Eigen::VectorXd y = testsupport::random_signal(static_cast<int>(band.vertices.size()), seed);
        const Eigen::VectorXd b = A.rhs(y);
        const double tol = 1e-10;
        const auto res = pcg_solve(A, b, A.preconditioner(), tol, 1000);
        ASSERT_TRUE(res.converged);
        EXPECT_LE(res.relative_residual, tol);
        const Eigen::MatrixXd dense = A.dense();
        const double true_residual = (b - dense * res.z).norm() / b.norm();
        EXPECT_LE(true_residual, tol) << "seed " << seed;
        const Eigen::VectorXd exact = dense.ldlt().solve(b);
        EXPECT_LE((res.z - exact).norm(), 1e-6 * exact.norm()) << "seed " << seed;
        // energy norm error of CG decreases monotonically
        for (size_t i = 1; i < res.objective.size(); ++i)
            EXPECT_LE(res.objective[i], res.objective[i - 1] + 1e-12 * std::abs(res.objective[i - 1]));
    }
}

TEST(Pcg, ObjectiveIsTheQuadraticForm)
{
    auto L = sensor_laplacian(80, 5);
    const auto h = make_polynomial_filter(0.0, 2.0, L.require_lambda_max(), 20, true);
    const auto p = build_penalty(h, PenaltyKind::Spline, 20);
    const auto band = random_band(L.size(), 30, 2);
    InterpolationOperator A(L, p, band.vertices, band.weights, 1.0);
    const Eigen::VectorXd b = A.rhs(testsupport::random_signal(30, 3));
    const auto res = pcg_solve(A, b, A.preconditioner(), 1e-12, 500);
    const double q = 0.5 * res.z.dot(A.apply(res.z)) - b.dot(res.z);
    EXPECT_NEAR(res.objective.back(), q, 1e-9 * std::abs(q));
}

TEST(Pcg, OnePenaltyApplicationPerIteration)
{
    auto L = sensor_laplacian(200, 7);
    for (int K : {10, 25, 50}) {
        const auto h = make_polynomial_filter(1.0, 4.0, L.require_lambda_max(), K, true);
        const auto p = build_penalty(h, PenaltyKind::Spline, K);
        const auto band = random_band(L.size(), 60, K);
        InterpolationOperator A(L, p, band.vertices, band.weights, 1.0);
        const Eigen::VectorXd b = A.rhs(testsupport::random_signal(60, 1));
        const Eigen::VectorXd d = A.preconditioner();
        L.reset_matvec_count();
        const auto res = pcg_solve(A, b, d, 1e-10, 40);
        EXPECT_GT(res.iterations, 0);
        EXPECT_EQ(L.matvec_count(), static_cast<std::uint64_t>(res.iterations) * K);
    }
}

TEST(Pcg, IterationCapReportsNonConvergence)
{
    auto L = sensor_laplacian(200, 8);
    const auto h = make_polynomial_filter(1.0, 4.0, L.require_lambda_max(), 30, true);
    const auto p = build_penalty(h, PenaltyKind::Spline, 30);
    const auto band = random_band(L.size(), 60, 4);
    SynthesisConfig cfg;
    cfg.cg_max_iters = 2;
    const auto res = reconstruct_band(L, p, band, testsupport::random_signal(60, 1), cfg);
    EXPECT_FALSE(res.converged);
    EXPECT_EQ(res.iterations, 2);
    EXPECT_GT(res.relative_residual, cfg.cg_tolerance);
}

TEST(Interpolation, LowpassSignalFromOracleWeights)
{
    // f in the span of the bottom eigenvectors, 1.5x as many samples as the
    // band dimension drawn from the exact eigenvector-energy distribution,
    // kappa = 1, and the exact spectral penalty (1 outside the band) run
    // through the same operator and solver
    const int n = 200, k = 20;
    auto L = sensor_laplacian(n, 11);
    const auto eig = dense_eigendecomposition(L);
    std::vector<int> R(k);
    std::iota(R.begin(), R.end(), 0);
    const Eigen::MatrixXd UR = eig.columns(R);
    const Eigen::MatrixXd outside = Eigen::MatrixXd::Identity(n, n) - UR * UR.transpose();
    BandPlan band;
    band.weights = UR.rowwise().squaredNorm() / k;
    SynthesisConfig cfg;
    const int trials = 20;
    double total = 0.0;
    for (std::uint64_t s = 0; s < trials; ++s) {
        const Eigen::VectorXd f = UR * testsupport::random_signal(k, s);
        band.count = 3 * k / 2;
        band.vertices = sample_without_replacement(band.weights, band.count, s);
        Eigen::VectorXd y(band.count);
        for (int t = 0; t < band.count; ++t)
            y[t] = f[band.vertices[t]];
        InterpolationOperator A(
            n, [&](const Eigen::VectorXd& z) { return Eigen::VectorXd(outside * z + kRidgeFloor * z); }, band.vertices,
            band.weights, cfg.kappa);
        const auto res = pcg_solve(A, A.rhs(y), A.preconditioner(), cfg.cg_tolerance, cfg.cg_max_iters);
        EXPECT_TRUE(res.converged);
        total += nmse(f, res.z);
    }
    EXPECT_LE(total / trials, 1e-2);
}

TEST(Synthesis, ZeroCoefficientsGiveZeroSignal)
{
    auto L = sensor_laplacian(100, 12);
    const auto cache = build_basis_cache(L, 30, 30, 1);
    const auto bank = build_filter_bank(estimate_cdf(L, cache), 3, Spacing::AdaptedLog, 30);
    const auto plan = build_sampling_plan(cache, bank, L.size(), 3);
    auto coeffs = fast_analyze(L, bank, plan, Eigen::VectorXd::Zero(L.size()));
    EXPECT_FALSE(coeffs.mean.has_value());
    const auto out = synthesize_fast(L, bank, plan, coeffs, SynthesisConfig{});
    EXPECT_EQ(out.f.norm(), 0.0);
    EXPECT_TRUE(out.converged());
    ASSERT_EQ(out.bands.size(), 3u);
    for (int m = 0; m < 3; ++m)
        EXPECT_EQ(out.bands[m].n_samples, plan.bands[m].count);
}

TEST(Synthesis, MeanIsAddedBack)
{
    // a constant signal analysed with an adapted plan: every band sample is
    // zero after centering, so the output is the stored mean alone
    auto L = sensor_laplacian(100, 13);
    const auto cache = build_basis_cache(L, 30, 30, 1);
    const auto bank = build_filter_bank(estimate_cdf(L, cache), 3, Spacing::AdaptedLog, 30);
    const auto filtered = filter_signal(L, bank, testsupport::random_signal(L.size(), 5));
    const auto plan = build_sampling_plan(cache, bank, L.size(), 1, AdaptedSignal{&filtered, 4.25});
    const Eigen::VectorXd f = Eigen::VectorXd::Constant(L.size(), 4.25);
    const auto coeffs = fast_analyze(L, bank, plan, f);
    ASSERT_TRUE(coeffs.mean.has_value());
    EXPECT_EQ(coeffs.stored_count(), static_cast<size_t>(L.size()));
    for (const auto& b : coeffs.bands)
        EXPECT_LT(b.values.cwiseAbs().maxCoeff(), 1e-12);
    const auto out = synthesize_fast(L, bank, plan, coeffs, SynthesisConfig{});
    EXPECT_LT((out.f - f).norm(), 1e-10 * f.norm());
}

TEST(Synthesis, MismatchedCoefficientsRejected)
{
    auto L = sensor_laplacian(80, 14);
    const auto cache = build_basis_cache(L, 20, 30, 1);
    const auto bank = build_filter_bank(estimate_cdf(L, cache), 2, Spacing::UniformLinear, 20);
    const auto plan = build_sampling_plan(cache, bank, L.size(), 3);
    auto coeffs = fast_analyze(L, bank, plan, testsupport::random_signal(L.size(), 1));
    coeffs.bands.pop_back();
    EXPECT_THROW(synthesize_fast(L, bank, plan, coeffs, SynthesisConfig{}), DimensionError);
    auto other = build_sampling_plan(cache, bank, L.size(), 4);
    auto c2 = fast_analyze(L, bank, other, testsupport::random_signal(L.size(), 1));
    EXPECT_THROW(synthesize_fast(L, bank, plan, c2, SynthesisConfig{}), DimensionError);
}

TEST(Synthesis, ThreadCountDoesNotChangeResult)
{
    auto L = sensor_laplacian(150, 15);
    const auto cache = build_basis_cache(L, 30, 30, 1);
    const auto bank = build_filter_bank(estimate_cdf(L, cache), 4, Spacing::AdaptedLog, 30);
    const auto plan = build_sampling_plan(cache, bank, L.size(), 3);
    const Eigen::VectorXd f = testsupport::random_signal(L.size(), 2);
    SynthesisConfig one, four;
    four.threads = 4;
    WarningCapture quiet;
    const auto a = synthesize_fast(L, bank, plan, fast_analyze(L, bank, plan, f, 1), one);
    const auto b = synthesize_fast(L, bank, plan, fast_analyze(L, bank, plan, f, 4), four);
    EXPECT_EQ(a.f, b.f);
}

TEST(Synthesis, OversamplingReducesError)
{
    const int n = 200;
    auto L = sensor_laplacian(n, 16);
    const auto eig = dense_eigendecomposition(L);
    const auto cache = build_basis_cache(L, 50, 30, 2);
    const auto bank = build_filter_bank(estimate_cdf(L, cache), 4, Spacing::AdaptedLog, 50);
    // smooth signal with a little broadband content
    const Eigen::VectorXd f = eig.U.leftCols(30) * testsupport::random_signal(30, 1) + 0.05 * testsupport::random_signal(n, 2);
    const auto filtered = filter_signal(L, bank, f);
    WarningCapture quiet;
    double e1 = 0.0, e3 = 0.0;
    const int seeds = 20;
    for (std::uint64_t s = 0; s < seeds; ++s) {
        for (int factor : {1, 3}) {
            const auto plan = build_sampling_plan(cache, bank, factor * n, s);
            const auto out = synthesize_fast(L, bank, plan, sample_filtered(plan, filtered), scenario_b().config);
            (factor == 1 ? e1 : e3) += nmse(f, out.f) / seeds;
        }
    }
    EXPECT_LT(e3, e1);
}
