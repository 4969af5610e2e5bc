#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mcsfb/exact.hpp"
#include "mcsfb/graph_io.hpp"
#include "mcsfb/io.hpp"
#include "mcsfb/omp.hpp"
#include "mcsfb/parallel.hpp"

using namespace mcsfb;
namespace fs = std::filesystem;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

struct Params {
    std::string graph;
    std::string signal;
    std::string artifacts;
    std::string out_dir = ".";
    int M = 5;
    int K = kTransformDegree;
    int K_density = kDensityDegree;
    int J = kDefaultRandomVectors;
    int T_points = kDefaultDensityPoints;
    double delta = kDefaultDelta;
    double kappa = 1.0;
    double cg_tol = 1e-10;
    int cg_max_iters = 250;
    std::string mode = "fast";
    std::string spacing = "adapted-log";
    std::string penalty = "one-minus-h";
    double samples_factor = 1.0;
    std::uint64_t seed = 0;
    int threads = 0;
    std::vector<int> T_list;
};

json params_to_json(const Params& p)
{
    return {{"graph", p.graph},
            {"signal", p.signal},
            {"artifacts", p.artifacts},
            {"out_dir", p.out_dir},
            {"M", p.M},
            {"K", p.K},
            {"K_density", p.K_density},
            {"J", p.J},
            {"T_points", p.T_points},
            {"delta", p.delta},
            {"kappa", p.kappa},
            {"cg_tol", p.cg_tol},
            {"cg_max_iters", p.cg_max_iters},
            {"mode", p.mode},
            {"spacing", p.spacing},
            {"penalty", p.penalty},
            {"samples_factor", p.samples_factor},
            {"seed", p.seed},
            {"threads", p.threads},
            {"T_list", p.T_list}};
}

Params params_from_json(const json& j)
{
    const std::string what = "manifest params";
    Params p;
    p.graph = get_field<std::string>(j, "graph", what);
    p.signal = get_field<std::string>(j, "signal", what);
    p.artifacts = get_field<std::string>(j, "artifacts", what);
    p.out_dir = get_field<std::string>(j, "out_dir", what);
    p.M = get_field<int>(j, "M", what);
    p.K = get_field<int>(j, "K", what);
    p.K_density = get_field<int>(j, "K_density", what);
    p.J = get_field<int>(j, "J", what);
    p.T_points = get_field<int>(j, "T_points", what);
    p.delta = get_field<double>(j, "delta", what);
    p.kappa = get_field<double>(j, "kappa", what);
    p.cg_tol = get_field<double>(j, "cg_tol", what);
    p.cg_max_iters = get_field<int>(j, "cg_max_iters", what);
    p.mode = get_field<std::string>(j, "mode", what);
    p.spacing = get_field<std::string>(j, "spacing", what);
    p.penalty = get_field<std::string>(j, "penalty", what);
    p.samples_factor = get_field<double>(j, "samples_factor", what);
    p.seed = get_field<std::uint64_t>(j, "seed", what);
    p.threads = get_field<int>(j, "threads", what);
    p.T_list = get_field<std::vector<int>>(j, "T_list", what);
    return p;
}

/// Collects timings, input digests, outputs and results for manifest.json.
class Run {
public:
    Run(std::string command, Params p) : command_(std::move(command)), p_(std::move(p))
    {
        if (p_.threads <= 0)
            p_.threads = default_thread_count();
        out_ = p_.out_dir;
        fs::create_directories(out_);
    }

    const Params& params() const { return p_; }
    fs::path artifacts_dir() const { return p_.artifacts.empty() ? out_ : fs::path(p_.artifacts); }
    json& results() { return results_; }
    void input(const std::string& name, const std::string& path, const std::string& content_digest)
    {
        inputs_[name] = {{"path", path}, {"digest", content_digest}};
    }

    template <class Fn>
    auto stage(const std::string& name, Fn&& fn)
    {
        const auto t0 = std::chrono::steady_clock::now();
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            record(name, t0);
        } else {
            auto r = fn();
            record(name, t0);
            return r;
        }
    }

    void write(const std::string& name, const std::string& text)
    {
        write_text(out_ / name, text);
        outputs_[name] = file_digest(out_ / name);
    }
    void write(const std::string& name, const json& j)
    {
        write_json(out_ / name, j);
        outputs_[name] = file_digest(out_ / name);
    }

    void finish()
    {
        json m = {{"command", command_}, {"params", params_to_json(p_)}, {"inputs", inputs_},
                  {"timings_s", timings_},  {"outputs", outputs_},           {"results", results_}};
        write_json(out_ / "manifest.json", m);
    }

private:
    void record(const std::string& name, std::chrono::steady_clock::time_point t0)
    {
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        timings_[name] = timings_.value(name, 0.0) + s;
    }

    std::string command_;
    Params p_;
    fs::path out_;
    json inputs_ = json::object();
    json timings_ = json::object();
    json outputs_ = json::object();
    json results_ = json::object();
};

enum class Mode { Exact, Fast, FastAdapted };

Mode parse_mode(const std::string& s)
{
    if (s == "exact")
        return Mode::Exact;
    if (s == "fast")
        return Mode::Fast;
    if (s == "fast-adapted")
        return Mode::FastAdapted;
    throw InputError("unknown mode '" + s + "'");
}

void validate(const Params& p)
{
    if (p.M < 1)
        throw InputError("--M must be >= 1");
    if (p.K < 1 || p.K_density < 1)
        throw InputError("--K and --K-density must be >= 1");
    if (p.J < 1)
        throw InputError("--J must be >= 1");
    if (!(p.samples_factor > 0.0))
        throw InputError("--samples-factor must be positive");
    parse_mode(p.mode);
    parse_spacing(p.spacing);
    parse_penalty(p.penalty);
}

SynthesisConfig synthesis_config(const Params& p)
{
    SynthesisConfig c;
    c.kappa = p.kappa;
    c.cg_tolerance = p.cg_tol;
    c.cg_max_iters = p.cg_max_iters;
    c.penalty = parse_penalty(p.penalty);
    c.threads = p.threads;
    c.validate();
    return c;
}

struct GraphInput {
    std::string digest;
    LaplacianOperator L;
};

GraphInput load_graph_input(Run& run)
{
    if (run.params().graph.empty())
        throw InputError("--graph is required");
    const Graph g = load_graph(run.params().graph);
    GraphInput in{digest(g), build_laplacian(g)};
    run.input("graph", run.params().graph, in.digest);
    return in;
}

Eigen::VectorXd load_signal_input(Run& run, int n)
{
    if (run.params().signal.empty())
        throw InputError("--signal is required");
    Eigen::VectorXd f = load_signal(run.params().signal);
    require_same_length(n, f.size(), "signal");
    run.input("signal", run.params().signal, digest(f));
    return f;
}

json tagged(json j, const std::string& graph_digest)
{
    j["graph_digest"] = graph_digest;
    return j;
}

json read_artifact(const fs::path& path, const std::string& graph_digest)
{
    json j = read_json(path);
    if (get_field<std::string>(j, "graph_digest", path.string()) != graph_digest)
        throw InputError(path.string() + " was produced for a different graph (digest mismatch)");
    return j;
}

/// Lambda-max estimate, one basis cache of degree max(K_density, K), density, design.
struct Setup {
    ChebyshevBasisCache cache;
    SpectralDensityEstimate density;
    FilterBankDesign bank;
};

Setup setup(Run& run, LaplacianOperator& L)
{
    const auto& p = run.params();
    return run.stage("setup", [&] {
        estimate_lambda_max(L, kDefaultPowerIterations, p.seed);
        auto cache = build_basis_cache(L, std::max(p.K_density, p.K), p.J, p.seed);
        auto density = estimate_cdf(L, cache, p.T_points);
        auto bank = build_filter_bank(density, p.M, parse_spacing(p.spacing), p.K, p.delta);
        return Setup{std::move(cache), std::move(density), std::move(bank)};
    });
}

void write_design(Run& run, const Setup& s, const std::string& gd)
{
    run.write("density.json", tagged(to_json(s.density), gd));
    run.write("cdf.csv", cdf_csv(s.density));
    run.write("design.json", tagged(to_json(s.bank), gd));
    run.write("filters.csv", filters_csv(s.bank));
}

struct ExactParts {
    EigenDecomposition eig;
    SpectralPartition spectral;
    VertexPartition vertices;
};

int target_stored(const Params& p, int n) { return static_cast<int>(std::lround(p.samples_factor * n)); }

/// Runs the analysis side and writes its artifacts; returns the coefficients
/// plus whatever synthesis needs in-process.
struct Analysis {
    AnalysisCoefficients coeffs;
    std::optional<SamplingPlan> plan;
    std::optional<ExactParts> exact;
};

Analysis analyze(Run& run, GraphInput& g, const Setup& s, const Eigen::VectorXd& f)
{
    const auto& p = run.params();
    const Mode mode = parse_mode(p.mode);
    Analysis a;
    if (mode == Mode::Exact) {
        if (target_stored(p, g.L.size()) != g.L.size())
            throw InputError("exact mode is critically sampled; --samples-factor must be 1");
        a.exact = run.stage("setup", [&] {
            ExactParts e{dense_eigendecomposition(g.L), {}, {}};
            e.spectral = partition_spectrum(e.eig, s.bank.adjusted_ends);
            e.vertices = partition_uniqueness_sets(e.eig, e.spectral);
            return e;
        });
        a.coeffs = run.stage("analysis", [&] { return exact_analyze(a.exact->eig, a.exact->spectral, a.exact->vertices, f); });
        run.write("partition.json", tagged(to_json(a.exact->spectral, a.exact->vertices), g.digest));
    } else {
        const int target = target_stored(p, g.L.size());
        if (mode == Mode::FastAdapted) {
            const double mean = f.mean();
            const Eigen::VectorXd centered = f.array() - mean;
            const auto filtered = run.stage("analysis", [&] { return filter_signal(g.L, s.bank, centered, p.threads); });
            a.plan = run.stage("setup", [&] {
                return build_sampling_plan(s.cache, s.bank, target, p.seed, AdaptedSignal{&filtered, mean});
            });
            a.coeffs = sample_filtered(*a.plan, filtered);
        } else {
            a.plan = run.stage("setup", [&] { return build_sampling_plan(s.cache, s.bank, target, p.seed); });
            a.coeffs = run.stage("analysis", [&] { return fast_analyze(g.L, s.bank, *a.plan, f, p.threads); });
        }
        run.write("plan.json", tagged(to_json(*a.plan), g.digest));
        run.write("weights.csv", weights_csv(*a.plan));
    }
    run.write("coefficients.csv", coefficients_csv(a.coeffs));
    run.results()["stored_values"] = a.coeffs.stored_count();
    return a;
}

Eigen::VectorXd synthesize(Run& run, GraphInput& g, const FilterBankDesign& bank, const Analysis& a)
{
    const auto& p = run.params();
    Eigen::VectorXd f;
    if (a.exact) {
        f = run.stage("synthesis",
                      [&] { return exact_synthesize(a.exact->eig, a.exact->spectral, a.exact->vertices, a.coeffs); });
        run.write("report.json", json{{"converged", true}, {"mode", "exact"}});
    } else {
        const auto config = synthesis_config(p);
        g.L.reset_matvec_count();
        const auto res = run.stage("synthesis", [&] { return synthesize_fast(g.L, bank, *a.plan, a.coeffs, config); });
        auto report = to_json(res);
        report["mode"] = p.mode;
        report["penalty"] = p.penalty;
        report["matvecs"] = g.L.matvec_count();
        run.write("report.json", report);
        if (!res.converged())
            warn("conjugate gradient did not converge in every band; see report.json");
        f = res.f;
    }
    run.write("reconstruction.csv", signal_csv(f));
    return f;
}

void cmd_density(Run& run)
{
    auto g = load_graph_input(run);
    const auto& p = run.params();
    const auto d = run.stage("setup", [&] {
        estimate_lambda_max(g.L, kDefaultPowerIterations, p.seed);
        const auto cache = build_basis_cache(g.L, p.K_density, p.J, p.seed);
        return estimate_cdf(g.L, cache, p.T_points);
    });
    run.write("density.json", tagged(to_json(d), g.digest));
    run.write("cdf.csv", cdf_csv(d));
}

void cmd_design(Run& run)
{
    auto g = load_graph_input(run);
    const auto s = setup(run, g.L);
    write_design(run, s, g.digest);
}

void cmd_analyze(Run& run)
{
    auto g = load_graph_input(run);
    const auto f = load_signal_input(run, g.L.size());
    const auto s = setup(run, g.L);
    write_design(run, s, g.digest);
    analyze(run, g, s, f);
}

void cmd_synthesize(Run& run)
{
    auto g = load_graph_input(run);
    const auto& p = run.params();
    const auto dir = run.artifacts_dir();
    const auto bank = design_from_json(read_artifact(dir / "design.json", g.digest));
    Analysis a;
    if (parse_mode(p.mode) == Mode::Exact) {
        auto [sp, vp] = partition_from_json(read_artifact(dir / "partition.json", g.digest));
        ExactParts e{run.stage("setup", [&] { return dense_eigendecomposition(g.L); }), sp, vp};
        if (partition_spectrum(e.eig, sp.band_ends).bands != sp.bands)
            throw NumericalError("recomputed spectral partition differs from partition.json");
        a.exact = std::move(e);
        a.coeffs = read_coefficients_csv(dir / "coefficients.csv", static_cast<int>(sp.bands.size()));
    } else {
        g.L.set_lambda_max(bank.lambda_max);
        a.plan = plan_from_json(read_artifact(dir / "plan.json", g.digest), read_weights_csv(dir / "weights.csv"));
        a.coeffs = read_coefficients_csv(dir / "coefficients.csv", bank.M);
        if (a.plan->mean.has_value() != a.coeffs.mean.has_value())
            throw InputError("coefficients.csv and plan.json disagree about the stored mean");
    }
    run.input("coefficients", (dir / "coefficients.csv").string(), file_digest(dir / "coefficients.csv"));
    synthesize(run, g, bank, a);
}

void cmd_roundtrip(Run& run)
{
    auto g = load_graph_input(run);
    const auto f = load_signal_input(run, g.L.size());
    const auto s = setup(run, g.L);
    write_design(run, s, g.digest);
    const auto a = analyze(run, g, s, f);
    const auto rec = synthesize(run, g, s.bank, a);
    const double err = nmse(f, rec);
    run.results()["nmse"] = err;
    std::cout << "nmse " << fmt(err) << '\n';
}

void cmd_compress(Run& run)
{
    auto g = load_graph_input(run);
    if (g.L.size() > kDefaultExactCap)
        throw InputError("compression uses the exact dictionary; N = " + std::to_string(g.L.size()) +
                         " exceeds the cap of " + std::to_string(kDefaultExactCap) + " vertices");
    const auto f = load_signal_input(run, g.L.size());
    const auto s = setup(run, g.L);
    const int n = g.L.size();
    auto T_list = run.params().T_list;
    if (T_list.empty())
        T_list = {std::max(1, n / 20), std::max(1, n / 10), std::max(1, n / 5), std::max(1, n / 2), n};
    for (int T : T_list)
        if (T < 1 || T > n)
            throw InputError("sparsity levels must lie in [1, N]");
    const int T_max = *std::max_element(T_list.begin(), T_list.end());

    const auto eig = run.stage("setup", [&] { return dense_eigendecomposition(g.L); });
    const auto sp = partition_spectrum(eig, s.bank.adjusted_ends);
    const auto vp = run.stage("setup", [&] { return partition_uniqueness_sets(eig, sp); });
    const Eigen::MatrixXd D = exact_dictionary(eig, sp, vp, true);
    const auto coeffs = exact_analyze(eig, sp, vp, f);

    const auto filter_omp = run.stage("analysis", [&] { return omp_sparse_code(D, f, T_max); });
    const auto delta_omp = run.stage("analysis", [&] { return omp_sparse_code(Eigen::MatrixXd::Identity(n, n), f, T_max); });

    std::vector<double> a, b;
    for (const auto& band : coeffs.bands)
        for (Eigen::Index t = 0; t < band.values.size(); ++t)
            a.push_back(std::abs(band.values[t]));
    for (Eigen::Index i = 0; i < n; ++i)
        b.push_back(std::abs(f[i]));
    std::sort(a.rbegin(), a.rend());
    std::sort(b.rbegin(), b.rend());
    std::ostringstream sorted;
    sorted << "rank,mcsfb,delta\n";
    for (int i = 0; i < n; ++i)
        sorted << i + 1 << ',' << fmt(a[i]) << ',' << fmt(b[i]) << '\n';
    run.write("sorted_coefficients.csv", sorted.str());

    const double energy = f.squaredNorm();
    auto curve = [&](const OmpResult& r, int T) {
        const auto& rn = r.residual_norms;
        const double res = rn.empty() ? std::sqrt(energy) : rn[std::min<size_t>(T, rn.size()) - 1];
        return res * res / energy;
    };
    std::ostringstream nm;
    nm << "T,mcsfb,delta\n";
    json results = json::array();
    for (int T : T_list) {
        nm << T << ',' << fmt(curve(filter_omp, T)) << ',' << fmt(curve(delta_omp, T)) << '\n';
        results.push_back({{"T", T}, {"mcsfb", curve(filter_omp, T)}, {"delta", curve(delta_omp, T)}});
    }
    run.write("nmse_vs_T.csv", nm.str());
    run.results()["nmse_vs_T"] = results;
}

using Command = void (*)(Run&);

const std::map<std::string, Command>& commands()
{
    static const std::map<std::string, Command> table{{"density", cmd_density},     {"design", cmd_design},
                                                      {"analyze", cmd_analyze},     {"synthesize", cmd_synthesize},
                                                      {"roundtrip", cmd_roundtrip}, {"compress", cmd_compress}};
    return table;
}

void execute(const std::string& command, const Params& p)
{
    validate(p);
    Run run(command, p);
    commands().at(command)(run);
    run.finish();
}

void add_common(CLI::App* sub, Params& p)
{
    sub->add_option("--graph", p.graph, "Matrix Market file or 1-based edge list");
    sub->add_option("--out-dir", p.out_dir, "Directory for artifacts");
    sub->add_option("--M", p.M, "Number of bands");
    sub->add_option("--K", p.K, "Transform filter degree");
    sub->add_option("--K-density", p.K_density, "Density estimation degree");
    sub->add_option("--J", p.J, "Random probe vectors");
    sub->add_option("--T-points", p.T_points, "Density interpolation points");
    sub->add_option("--delta", p.delta, "Band-end adjustment offset");
    sub->add_option("--spacing", p.spacing, "uniform-linear|uniform-log|adapted-linear|adapted-log");
    sub->add_option("--seed", p.seed, "Random seed");
    sub->add_option("--threads", p.threads, "Worker threads (default: MCSFB_THREADS or 1)");
}

void add_transform(CLI::App* sub, Params& p)
{
    sub->add_option("--signal", p.signal, "One value per line, or a CSV column");
    sub->add_option("--mode", p.mode, "exact|fast|fast-adapted");
    sub->add_option("--kappa", p.kappa, "Sample-fidelity weight");
    sub->add_option("--cg-tol", p.cg_tol, "CG relative residual tolerance");
    sub->add_option("--cg-max-iters", p.cg_max_iters, "CG iteration limit");
    sub->add_option("--penalty", p.penalty, "one-minus-h|rational|spline");
    sub->add_option("--samples-factor", p.samples_factor, "Stored values relative to N (1 = critical)");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"M-channel critically sampled graph filter banks"};
    app.require_subcommand(1);
    Params p;
    std::string manifest;
    std::string replay_out;

    std::map<std::string, CLI::App*> subs;
    const std::map<std::string, std::string> help{{"density", "Estimate the cumulative spectral density"},
                                                  {"design", "Design the filter bank"},
                                                  {"analyze", "Analyze a signal"},
                                                  {"synthesize", "Reconstruct a signal from analyze output"},
                                                  {"roundtrip", "Analyze, synthesize and report NMSE"},
                                                  {"compress", "OMP sparse coding against the exact dictionary"}};
    for (const auto& [name, text] : help) {
        auto* sub = app.add_subcommand(name, text);
        add_common(sub, p);
        if (name != "density" && name != "design")
            add_transform(sub, p);
        if (name == "synthesize")
            sub->add_option("--artifacts", p.artifacts, "Directory holding analyze output (default: --out-dir)");
        if (name == "compress")
            sub->add_option("--T-list", p.T_list, "Sparsity levels")->delimiter(',');
        subs[name] = sub;
    }
    auto* replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
    replay->add_option("manifest", manifest, "manifest.json")->required();
    replay->add_option("--out-dir", replay_out, "Override the recorded output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitInput;
    }

    try {
        if (replay->parsed()) {
            const json m = read_json(manifest);
            Params rp = params_from_json(get_field<json>(m, "params", manifest));
            if (!replay_out.empty())
                rp.out_dir = replay_out;
            const auto command = get_field<std::string>(m, "command", manifest);
            if (!commands().count(command))
                throw InputError(manifest + ": unknown command '" + command + "'");
            execute(command, rp);
        } else {
            for (const auto& [name, sub] : subs)
                if (sub->parsed())
                    execute(name, p);
        }
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
