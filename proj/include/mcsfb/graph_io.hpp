#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mcsfb/graph.hpp"

namespace mcsfb {

namespace detail {

inline std::string trim(const std::string& s)
{
    size_t b = 0;
    size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b])))
        ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1])))
        --e;
    return s.substr(b, e - b);
}

inline std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

[[noreturn]] inline void parse_fail(const std::filesystem::path& path, long line, const std::string& msg)
{
    throw InputError(path.string() + ":" + std::to_string(line) + ": " + msg);
}

inline bool parse_double(const std::string& tok, double& out)
{
    std::istringstream is(tok);
    is.imbue(std::locale::classic());
    is >> out;
    return !is.fail() && is.eof();
}

inline std::ifstream open_input(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open " + path.string());
    return in;
}

} // namespace detail

/// Matrix Market coordinate file holding a weighted adjacency matrix.
/// Symmetric files list each edge once; general files must be symmetric.
/// Diagonal entries are dropped with a warning.
inline Graph load_matrix_market(const std::filesystem::path& path)
{
    auto in = detail::open_input(path);
    std::string line;
    long lineno = 0;
    if (!std::getline(in, line))
        detail::parse_fail(path, 1, "empty file");
    ++lineno;
    std::istringstream banner(detail::lower(line));
    std::string tag, object, format, field, symmetry;
    banner >> tag >> object >> format >> field >> symmetry;
    if (tag != "%%matrixmarket" || object != "matrix" || format != "coordinate")
        detail::parse_fail(path, lineno, "expected '%%MatrixMarket matrix coordinate ...' banner");
    if (field != "real" && field != "integer" && field != "pattern")
        detail::parse_fail(path, lineno, "unsupported field '" + field + "'");
    if (symmetry != "symmetric" && symmetry != "general")
        detail::parse_fail(path, lineno, "unsupported symmetry '" + symmetry + "'");
    const bool pattern = field == "pattern";
    const bool symmetric = symmetry == "symmetric";

    long rows = -1, cols = -1, nnz = -1;
    while (std::getline(in, line)) {
        ++lineno;
        auto t = detail::trim(line);
        if (t.empty() || t[0] == '%')
            continue;
        std::istringstream hs(t);
        if (!(hs >> rows >> cols >> nnz))
            detail::parse_fail(path, lineno, "malformed size line");
        break;
    }
    if (rows < 1 || rows != cols || nnz < 0)
        detail::parse_fail(path, lineno, "adjacency matrix must be square and nonempty");

    std::map<std::pair<int, int>, double> entries;
    long seen = 0;
    bool dropped_diag = false;
    while (std::getline(in, line)) {
        ++lineno;
        auto t = detail::trim(line);
        if (t.empty() || t[0] == '%')
            continue;
        std::istringstream es(t);
        long i = 0, j = 0;
        double w = 1.0;
        if (!(es >> i >> j) || (!pattern && !(es >> w)))
            detail::parse_fail(path, lineno, "malformed entry");
        if (i < 1 || j < 1 || i > rows || j > cols)
            detail::parse_fail(path, lineno, "index out of range");
        ++seen;
        if (i == j) {
            dropped_diag = true;
            continue;
        }
        if (!(w > 0.0))
            detail::parse_fail(path, lineno, "nonpositive weight");
        const auto key = std::make_pair(static_cast<int>(i - 1), static_cast<int>(j - 1));
        entries[key] += w;
        if (symmetric)
            entries[{key.second, key.first}] += w;
    }
    if (seen != nnz)
        detail::parse_fail(path, lineno, "expected " + std::to_string(nnz) + " entries, found " + std::to_string(seen));
    if (dropped_diag)
        warn(path.string() + ": dropped diagonal (self-loop) entries");

    std::vector<Edge> edges;
    for (const auto& [key, w] : entries) {
        auto it = entries.find({key.second, key.first});
        if (it == entries.end() || it->second != w)
            throw InputError(path.string() + ": asymmetric input at (" + std::to_string(key.first + 1) + "," +
                             std::to_string(key.second + 1) + ")");
        if (key.first < key.second)
            edges.push_back({key.first, key.second, w});
    }
    return Graph::from_edges(static_cast<int>(rows), edges);
}

/// Whitespace-delimited `i j [w]` lines, 1-based, one undirected edge per
/// line. The vertex count is the largest index seen. '#' and '%' start comments.
inline Graph load_edge_list(const std::filesystem::path& path)
{
    auto in = detail::open_input(path);
    std::string line;
    long lineno = 0;
    std::vector<Edge> edges;
    int n = 0;
    bool dropped_loop = false;
    while (std::getline(in, line)) {
        ++lineno;
        auto t = detail::trim(line);
        if (t.empty() || t[0] == '#' || t[0] == '%')
            continue;
        std::replace(t.begin(), t.end(), ',', ' ');
        std::istringstream es(t);
        long i = 0, j = 0;
        if (!(es >> i >> j))
            detail::parse_fail(path, lineno, "expected 'i j w'");
        double w = 1.0;
        std::string wt;
        if (es >> wt && !detail::parse_double(wt, w))
            detail::parse_fail(path, lineno, "malformed weight '" + wt + "'");
        if (i < 1 || j < 1)
            detail::parse_fail(path, lineno, "vertex indices are 1-based");
        if (!(w > 0.0) || !std::isfinite(w))
            detail::parse_fail(path, lineno, "nonpositive weight");
        if (i == j) {
            dropped_loop = true;
            continue;
        }
        n = std::max<int>(n, static_cast<int>(std::max(i, j)));
        edges.push_back({static_cast<int>(i - 1), static_cast<int>(j - 1), w});
    }
    if (edges.empty())
        throw InputError(path.string() + ": no edges");
    if (dropped_loop)
        warn(path.string() + ": dropped self-loops");
    return Graph::from_edges(n, edges);
}

/// Dispatches on content: a '%%MatrixMarket' banner selects Matrix Market,
/// anything else is read as an edge list. Disconnected graphs are reduced to
/// their largest component.
inline Graph load_graph(const std::filesystem::path& path)
{
    std::string first;
    {
        auto in = detail::open_input(path);
        std::getline(in, first);
    }
    Graph g = detail::lower(first).rfind("%%matrixmarket", 0) == 0 ? load_matrix_market(path) : load_edge_list(path);
    return largest_component(g);
}

/// One real per line, or a CSV whose `column` (0-based) holds the values. A
/// non-numeric first row is taken as a header.
inline Eigen::VectorXd load_signal(const std::filesystem::path& path, int column = 0)
{
    auto in = detail::open_input(path);
    std::string line;
    long lineno = 0;
    std::vector<double> values;
    while (std::getline(in, line)) {
        ++lineno;
        auto t = detail::trim(line);
        if (t.empty() || t[0] == '#')
            continue;
        std::vector<std::string> fields;
        std::stringstream ss(t);
        std::string f;
        while (std::getline(ss, f, ','))
            fields.push_back(detail::trim(f));
        if (static_cast<int>(fields.size()) <= column)
            detail::parse_fail(path, lineno, "missing column " + std::to_string(column));
        double v = 0.0;
        if (!detail::parse_double(fields[column], v)) {
            if (values.empty() && lineno == 1)
                continue;
            detail::parse_fail(path, lineno, "not a number: '" + fields[column] + "'");
        }
        if (!std::isfinite(v))
            detail::parse_fail(path, lineno, "non-finite value");
        values.push_back(v);
    }
    if (values.empty())
        throw InputError(path.string() + ": empty signal");
    return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

inline void write_signal(const std::filesystem::path& path, const Eigen::VectorXd& f)
{
    std::ofstream out(path);
    if (!out)
        throw InputError("cannot write " + path.string());
    out << std::setprecision(17);
    for (Eigen::Index i = 0; i < f.size(); ++i)
        out << f[i] << '\n';
}

inline void write_matrix_market(const std::filesystem::path& path, const Graph& g)
{
    std::ofstream out(path);
    if (!out)
        throw InputError("cannot write " + path.string());
    const auto edges = g.edges();
    out << "%%MatrixMarket matrix coordinate real symmetric\n";
    out << g.num_vertices() << ' ' << g.num_vertices() << ' ' << edges.size() << '\n';
    out << std::setprecision(17);
    for (const auto& e : edges)
        out << e.j + 1 << ' ' << e.i + 1 << ' ' << e.w << '\n';
}

} // namespace mcsfb
