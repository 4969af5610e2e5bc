#include <gtest/gtest.h>

#include <filesystem>

#include "mcsfb/generators.hpp"
#include "mcsfb/io.hpp"
#include "test_support.hpp"

using namespace mcsfb;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / "mcsfb_test_io";
    fs::create_directories(dir);
    return dir / name;
}

struct Pipeline {
    LaplacianOperator L;
    ChebyshevBasisCache cache;
    SpectralDensityEstimate density;
    FilterBankDesign bank;

    explicit Pipeline(int n = 120)
        : L(make(n)), cache(L, 50, 20, 4), density(estimate_cdf(L, cache)), bank(build_filter_bank(density, 4, Spacing::AdaptedLog, 50))
    {
    }

    static LaplacianOperator make(int n)
    {
        SensorParams p;
        p.n = n;
        auto L = build_laplacian(random_sensor_graph(p, 9));
        estimate_lambda_max(L);
        return L;
    }
};

} // namespace

TEST(Digest, KnownFnv1aVectors)
{
    auto of = [](const std::string& s) {
        Fnv1a h;
        h.bytes(s.data(), s.size());
        return h.hex();
    };
    EXPECT_EQ(of(""), "cbf29ce484222325");
    EXPECT_EQ(of("a"), "af63dc4c8601ec8c");
    EXPECT_EQ(of("foobar"), "85944171f73967e8");
}

TEST(Digest, SensitiveToGraphAndSignal)
{
    const auto a = ring_graph(10), b = path_graph(10);
    EXPECT_EQ(digest(a), digest(ring_graph(10)));
    EXPECT_NE(digest(a), digest(b));
    Eigen::VectorXd v = testsupport::random_signal(20, 1);
    const auto d = digest(v);
    v[7] = std::nextafter(v[7], 10.0);
    EXPECT_NE(digest(v), d);
}

TEST(Format, ShortestRoundTrip)
{
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0, 1e-17})
        EXPECT_EQ(std::strtod(fmt(v).c_str(), nullptr), v);
    EXPECT_EQ(fmt(0.5), "0.5");
}

TEST(Artifacts, DensityRoundTrip)
{
    Pipeline p;
    const auto back = density_from_json(json::parse(to_json(p.density).dump()));
    for (int g = 0; g <= 500; ++g) {
        const double z = p.density.lambda_max * g / 500;
        EXPECT_EQ(back.cdf(z), p.density.cdf(z));
    }
    const auto csv = cdf_csv(p.density);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1001);
}

TEST(Artifacts, DesignRoundTrip)
{
    Pipeline p;
    const auto j = to_json(p.bank);
    EXPECT_EQ(j["alpha"].size(), 4u);
    EXPECT_EQ(j["alpha"][0].size(), 51u);
    const auto back = design_from_json(json::parse(j.dump()));
    EXPECT_EQ(back.M, 4);
    EXPECT_EQ(back.adjusted_ends, p.bank.adjusted_ends);
    for (int m = 0; m < 4; ++m)
        EXPECT_EQ(back.filters[m].alpha, p.bank.filters[m].alpha);
    EXPECT_EQ(filters_csv(back), filters_csv(p.bank));

    auto broken = j;
    broken["alpha"][2].erase(0);
    EXPECT_THROW(design_from_json(broken), InputError);
    broken = j;
    broken.erase("mode");
    EXPECT_THROW(design_from_json(broken), InputError);
}

TEST(Artifacts, PlanRoundTripThroughFiles)
{
    Pipeline p;
    const Eigen::VectorXd f = testsupport::random_signal(p.L.size(), 3);
    const auto filtered = filter_signal(p.L, p.bank, f);
    const auto plan = build_sampling_plan(p.cache, p.bank, p.L.size(), 17, AdaptedSignal{&filtered, 0.25});
    write_json(scratch("plan.json"), to_json(plan));
    write_text(scratch("weights.csv"), weights_csv(plan));
    const auto back = plan_from_json(read_json(scratch("plan.json")), read_weights_csv(scratch("weights.csv")));
    EXPECT_EQ(back.N_T, plan.N_T);
    EXPECT_TRUE(back.adapted);
    EXPECT_EQ(*back.mean, 0.25);
    EXPECT_EQ(back.stored_count(), static_cast<size_t>(p.L.size()));
    for (size_t m = 0; m < plan.bands.size(); ++m) {
        EXPECT_EQ(back.bands[m].vertices, plan.bands[m].vertices);
        EXPECT_EQ(back.bands[m].weights, plan.bands[m].weights);
    }

    auto w = read_weights_csv(scratch("weights.csv"));
    w[1][0] += 1e-3;
    EXPECT_THROW(plan_from_json(read_json(scratch("plan.json")), w), InputError);
}

TEST(Artifacts, CoefficientsRoundTrip)
{
    AnalysisCoefficients c;
    c.mean = -1.0 / 7.0;
    c.bands.push_back({{0, 4, 9}, Eigen::Vector3d(0.1, -2.0, 1e-20)});
    c.bands.push_back({{}, Eigen::VectorXd()});
    c.bands.push_back({{2}, Eigen::VectorXd::Constant(1, 3.0)});
    const auto csv = coefficients_csv(c);
    EXPECT_EQ(csv.substr(0, 17), "band,vertex,value");
    EXPECT_NE(csv.find("\n0,-1,"), std::string::npos);
    write_text(scratch("coeffs.csv"), csv);
    const auto back = read_coefficients_csv(scratch("coeffs.csv"), 3);
    ASSERT_EQ(back.bands.size(), 3u);
    EXPECT_EQ(*back.mean, *c.mean);
    for (int m = 0; m < 3; ++m) {
        EXPECT_EQ(back.bands[m].vertices, c.bands[m].vertices);
        EXPECT_EQ(back.bands[m].values, c.bands[m].values);
    }
    EXPECT_EQ(back.stored_count(), 5u);
    EXPECT_THROW(read_coefficients_csv(scratch("coeffs.csv"), 2), InputError);
    write_text(scratch("bad.csv"), "band,vertex,value\n1;2;3\n");
    EXPECT_THROW(read_coefficients_csv(scratch("bad.csv"), 3), InputError);
    EXPECT_THROW(read_coefficients_csv(scratch("missing.csv"), 3), InputError);
}

TEST(Artifacts, PartitionRoundTrip)
{
    auto L = build_laplacian(testsupport::random_connected_graph(40, 0.15, 2));
    const auto eig = dense_eigendecomposition(L);
    const auto sp = partition_spectrum(eig, {0.0, 1.0, 3.0, eig.lambda_max() * 1.01});
    const auto vp = partition_uniqueness_sets(eig, sp);
    const auto [sp2, vp2] = partition_from_json(json::parse(to_json(sp, vp).dump()));
    EXPECT_EQ(sp2.bands, sp.bands);
    EXPECT_EQ(sp2.band_ends, sp.band_ends);
    EXPECT_EQ(vp2.sets, vp.sets);
}

TEST(Artifacts, ReportAndSignal)
{
    SynthesisResult r;
    r.f = Eigen::Vector2d(1.5, -0.25);
    r.bands.push_back({12, 3e-11, true, 40});
    r.bands.push_back({250, 1e-6, false, 2});
    const auto j = to_json(r);
    EXPECT_FALSE(j["converged"].get<bool>());
    EXPECT_EQ(j["bands"][1]["iters"], 250);
    EXPECT_EQ(j["bands"][0]["n_samples"], 40);
    EXPECT_EQ(signal_csv(r.f), "1.5\n-0.25\n");
    EXPECT_THROW(read_json(scratch("nope.json")), InputError);
    write_text(scratch("garbage.json"), "{ not json");
    EXPECT_THROW(read_json(scratch("garbage.json")), InputError);
}
