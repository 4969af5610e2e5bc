#pragma once

#include <Eigen/Core>
#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mcsfb/coefficients.hpp"
#include "mcsfb/density.hpp"
#include "mcsfb/design.hpp"
#include "mcsfb/exact.hpp"
#include "mcsfb/graph.hpp"
#include "mcsfb/graph_io.hpp"
#include "mcsfb/sampling.hpp"
#include "mcsfb/synthesis.hpp"

namespace mcsfb {

using json = nlohmann::json;

/// 64-bit FNV-1a.
class Fnv1a {
public:
    void bytes(const void* data, std::size_t n)
    {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h_ ^= p[i];
            h_ *= 0x100000001b3ULL;
        }
    }
    template <class T>
    void value(const T& v)
    {
        static_assert(std::is_trivially_copyable_v<T>);
        bytes(&v, sizeof(T));
    }
    std::uint64_t get() const { return h_; }
    std::string hex() const
    {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h_));
        return buf;
    }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline std::string digest(const Graph& g)
{
    Fnv1a h;
    h.value(g.num_vertices());
    for (const auto& e : g.edges()) {
        h.value(e.i);
        h.value(e.j);
        h.value(e.w);
    }
    return h.hex();
}

inline std::string digest(const Eigen::VectorXd& v)
{
    Fnv1a h;
    h.value(static_cast<std::int64_t>(v.size()));
    h.bytes(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
    return h.hex();
}

inline std::string file_digest(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError("cannot open " + path.string());
    Fnv1a h;
    char buf[1 << 15];
    while (in.read(buf, sizeof buf) || in.gcount() > 0)
        h.bytes(buf, static_cast<std::size_t>(in.gcount()));
    return h.hex();
}

inline json read_json(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw InputError("cannot write " + path.string());
    out << text;
}

inline void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

/// Shortest text that reads back to the same double.
inline std::string fmt(double v)
{
    char buf[32];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v)
            break;
    }
    return buf;
}

template <class T>
T get_field(const json& j, const char* key, const std::string& what)
{
    if (!j.contains(key))
        throw InputError(what + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw InputError(what + ": field '" + key + "': " + e.what());
    }
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline Eigen::VectorXd to_eigen(const std::vector<double>& v)
{
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline json to_json(const SpectralDensityEstimate& d)
{
    json anchors = json::array();
    anchors.push_back({0.0, 1.0 / d.n_vertices});
    anchors.push_back({d.lambda_max, 1.0});
    return {{"lambda_max", d.lambda_max}, {"n_vertices", d.n_vertices}, {"xi", d.xi}, {"counts", d.counts},
            {"anchor_points", anchors}};
}

inline SpectralDensityEstimate density_from_json(const json& j)
{
    const std::string what = "density";
    return SpectralDensityEstimate::from_counts(get_field<double>(j, "lambda_max", what), get_field<int>(j, "n_vertices", what),
                                                get_field<std::vector<double>>(j, "xi", what),
                                                get_field<std::vector<double>>(j, "counts", what));
}

inline json to_json(const FilterBankDesign& d)
{
    json alpha = json::array();
    for (const auto& f : d.filters)
        alpha.push_back(to_std(f.alpha));
    return {{"mode", to_string(d.mode)},       {"M", d.M},
            {"K", d.K},                        {"delta", d.delta},
            {"lambda_max", d.lambda_max},      {"initial_ends", d.initial_ends},
            {"adjusted_ends", d.adjusted_ends}, {"alpha", alpha}};
}

inline FilterBankDesign design_from_json(const json& j)
{
    const std::string what = "filter bank";
    FilterBankDesign d;
    d.mode = parse_spacing(get_field<std::string>(j, "mode", what));
    d.K = get_field<int>(j, "K", what);
    d.delta = get_field<double>(j, "delta", what);
    d.lambda_max = get_field<double>(j, "lambda_max", what);
    d.initial_ends = get_field<std::vector<double>>(j, "initial_ends", what);
    d.adjusted_ends = get_field<std::vector<double>>(j, "adjusted_ends", what);
    const auto alpha = get_field<std::vector<std::vector<double>>>(j, "alpha", what);
    d.M = static_cast<int>(alpha.size());
    if (d.M < 1 || static_cast<int>(d.adjusted_ends.size()) != d.M + 1)
        throw InputError(what + ": alpha and adjusted_ends disagree on the band count");
    for (int m = 0; m < d.M; ++m) {
        if (static_cast<int>(alpha[m].size()) != d.K + 1)
            throw InputError(what + ": band " + std::to_string(m + 1) + " does not have K+1 coefficients");
        PolynomialFilter f;
        f.alpha = to_eigen(alpha[m]);
        f.band_lo = d.adjusted_ends[m];
        f.band_hi = d.adjusted_ends[m + 1];
        f.lambda_max = d.lambda_max;
        d.filters.push_back(std::move(f));
    }
    return d;
}

/// Each filter on `points` equispaced values of [0, lambda_max]: lambda,h1,...,hM.
inline std::string filters_csv(const FilterBankDesign& d, int points = 1000)
{
    std::ostringstream out;
    out << "lambda";
    for (int m = 1; m <= d.M; ++m)
        out << ",h" << m;
    out << '\n';
    for (int g = 0; g < points; ++g) {
        const double lam = d.lambda_max * g / (points - 1);
        out << fmt(lam);
        for (const auto& f : d.filters)
            out << ',' << fmt(f(lam));
        out << '\n';
    }
    return out.str();
}

inline std::string cdf_csv(const SpectralDensityEstimate& d, int points = 1000)
{
    std::ostringstream out;
    out << "z,cdf\n";
    for (int g = 0; g < points; ++g) {
        const double z = d.lambda_max * g / (points - 1);
        out << fmt(z) << ',' << fmt(d.cdf(z)) << '\n';
    }
    return out.str();
}

inline json to_json(const SamplingPlan& p)
{
    json bands = json::array();
    for (const auto& b : p.bands)
        bands.push_back({{"n", b.count}, {"weights_digest", digest(b.weights)}, {"vertices", b.vertices}});
    json j = {{"N_T", p.N_T},   {"adapted", p.adapted}, {"seed", p.seed}, {"count_mode", to_string(p.count_mode)},
              {"bands", bands}};
    if (p.mean)
        j["mean"] = *p.mean;
    return j;
}

/// Weights are kept out of the JSON; one column per band, N rows.
inline std::string weights_csv(const SamplingPlan& p)
{
    std::ostringstream out;
    for (size_t m = 0; m < p.bands.size(); ++m)
        out << (m ? "," : "") << "w" << m + 1;
    out << '\n';
    const auto n = p.bands.empty() ? 0 : p.bands[0].weights.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (size_t m = 0; m < p.bands.size(); ++m)
            out << (m ? "," : "") << fmt(p.bands[m].weights[i]);
        out << '\n';
    }
    return out.str();
}

inline std::vector<Eigen::VectorXd> read_weights_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    const auto M = static_cast<size_t>(std::count(line.begin(), line.end(), ',') + 1);
    std::vector<std::vector<double>> cols(M);
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        std::stringstream ss(line);
        std::string f;
        size_t c = 0;
        for (; std::getline(ss, f, ','); ++c) {
            double v = 0.0;
            if (c >= M || !detail::parse_double(f, v))
                throw InputError(path.string() + ":" + std::to_string(lineno) + ": malformed weight row");
            cols[c].push_back(v);
        }
        if (c != M)
            throw InputError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(M) + " columns");
    }
    std::vector<Eigen::VectorXd> out;
    for (const auto& c : cols)
        out.push_back(to_eigen(c));
    return out;
}

/// Plan from its JSON and the weight vectors; weight digests must match.
inline SamplingPlan plan_from_json(const json& j, const std::vector<Eigen::VectorXd>& weights)
{
    const std::string what = "sampling plan";
    SamplingPlan p;
    p.N_T = get_field<int>(j, "N_T", what);
    p.adapted = get_field<bool>(j, "adapted", what);
    p.seed = get_field<std::uint64_t>(j, "seed", what);
    p.count_mode = get_field<std::string>(j, "count_mode", what) == "cdf-diff" ? CountMode::CdfDiff : CountMode::Trace;
    if (j.contains("mean"))
        p.mean = get_field<double>(j, "mean", what);
    const auto bands = get_field<json>(j, "bands", what);
    if (bands.size() != weights.size())
        throw InputError(what + ": " + std::to_string(bands.size()) + " bands but " + std::to_string(weights.size()) +
                         " weight columns");
    for (size_t m = 0; m < bands.size(); ++m) {
        BandPlan b;
        b.count = get_field<int>(bands[m], "n", what);
        b.vertices = get_field<std::vector<int>>(bands[m], "vertices", what);
        b.weights = weights[m];
        if (digest(b.weights) != get_field<std::string>(bands[m], "weights_digest", what))
            throw InputError(what + ": weights of band " + std::to_string(m + 1) + " do not match their digest");
        if (static_cast<int>(b.vertices.size()) != b.count)
            throw InputError(what + ": band " + std::to_string(m + 1) + " vertex list does not have n entries");
        p.bands.push_back(std::move(b));
    }
    return p;
}

inline json to_json(const SpectralPartition& sp, const VertexPartition& vp)
{
    return {{"band_ends", sp.band_ends}, {"spectral", sp.bands}, {"vertices", vp.sets}};
}

inline std::pair<SpectralPartition, VertexPartition> partition_from_json(const json& j)
{
    const std::string what = "partition";
    SpectralPartition sp;
    VertexPartition vp;
    sp.band_ends = get_field<std::vector<double>>(j, "band_ends", what);
    sp.bands = get_field<std::vector<std::vector<int>>>(j, "spectral", what);
    vp.sets = get_field<std::vector<std::vector<int>>>(j, "vertices", what);
    if (sp.bands.size() != vp.sets.size() || sp.band_ends.size() != sp.bands.size() + 1)
        throw InputError(what + ": band counts disagree");
    return {sp, vp};
}

/// `band,vertex,value` rows; the stored mean, if any, is band 0 with vertex -1.
inline std::string coefficients_csv(const AnalysisCoefficients& c)
{
    std::ostringstream out;
    out << "band,vertex,value\n";
    if (c.mean)
        out << "0,-1," << fmt(*c.mean) << '\n';
    for (size_t m = 0; m < c.bands.size(); ++m)
        for (size_t t = 0; t < c.bands[m].vertices.size(); ++t)
            out << m + 1 << ',' << c.bands[m].vertices[t] << ',' << fmt(c.bands[m].values[static_cast<Eigen::Index>(t)])
                << '\n';
    return out.str();
}

inline AnalysisCoefficients read_coefficients_csv(const std::filesystem::path& path, int M)
{
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open " + path.string());
    std::vector<std::vector<int>> verts(static_cast<size_t>(M));
    std::vector<std::vector<double>> vals(static_cast<size_t>(M));
    AnalysisCoefficients c;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || (lineno == 1 && line.rfind("band", 0) == 0))
            continue;
        long band = 0, vertex = 0;
        double value = 0.0;
        char c1 = 0, c2 = 0;
        std::istringstream ss(line);
        if (!(ss >> band >> c1 >> vertex >> c2 >> value) || c1 != ',' || c2 != ',' || band < 0 || band > M)
            throw InputError(path.string() + ":" + std::to_string(lineno) + ": malformed coefficient row");
        if (band == 0) {
            c.mean = value;
            continue;
        }
        verts[band - 1].push_back(static_cast<int>(vertex));
        vals[band - 1].push_back(value);
    }
    for (int m = 0; m < M; ++m)
        c.bands.push_back({verts[m], to_eigen(vals[m])});
    return c;
}

inline json to_json(const SynthesisResult& r)
{
    json bands = json::array();
    for (const auto& b : r.bands)
        bands.push_back({{"iters", b.iterations}, {"residual", b.residual}, {"converged", b.converged}, {"n_samples", b.n_samples}});
    return {{"converged", r.converged()}, {"bands", bands}};
}

inline std::string signal_csv(const Eigen::VectorXd& f)
{
    std::ostringstream out;
    for (Eigen::Index i = 0; i < f.size(); ++i)
        out << fmt(f[i]) << '\n';
    return out.str();
}

} // namespace mcsfb
