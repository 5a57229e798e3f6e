#include "dce/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dce/errors.hpp"

namespace dce {

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path + " for writing");
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    return in;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, sep)) out.push_back(cell);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_double(const std::string& s, const std::string& where) {
    // strtod handles the %.17g output including inf/nan spellings
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw DataError(where + ": cannot parse number '" + s + "'");
    return v;
}

std::uint64_t parse_uint(const std::string& s, const std::string& where) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw DataError(where + ": cannot parse integer '" + s + "'");
    }
    return v;
}

std::string expect_line(std::istream& in, const std::string& where) {
    std::string line;
    if (!std::getline(in, line)) throw DataError(where + ": unexpected end of file");
    return line;
}

std::vector<std::string> expect_header(std::istream& in, const std::string& key, const std::string& where) {
    auto cells = split(expect_line(in, where), ',');
    if (cells.empty() || cells[0] != key) throw DataError(where + ": expected header '" + key + "'");
    return cells;
}

}  // namespace

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_profile_csv(const std::string& path, const ExposureProfile& profile) {
    auto out = open_out(path);
    out << "t,EE,PFE,alive_count\n";
    for (std::size_t u = 0; u < profile.times.size(); ++u) {
        out << format_double(profile.times[u]) << ',' << format_double(profile.ee[u]) << ','
            << format_double(profile.pfe[u]) << ',' << profile.alive_counts[u] << '\n';
    }
    if (!out) throw DataError("write failed: " + path);
}

ExposureProfile read_profile_csv(const std::string& path) {
    auto in = open_in(path);
    if (expect_line(in, path) != "t,EE,PFE,alive_count") throw DataError(path + ": unexpected profile header");
    ExposureProfile p;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() != 4) throw DataError(path + ": expected 4 columns");
        p.times.push_back(parse_double(cells[0], path));
        p.ee.push_back(parse_double(cells[1], path));
        p.pfe.push_back(parse_double(cells[2], path));
        p.alive_counts.push_back(static_cast<std::size_t>(parse_uint(cells[3], path)));
    }
    return p;
}

void write_plot_dat(const std::string& path, const std::string& quantity, const std::vector<double>& t,
                    const std::vector<double>& value) {
    if (t.size() != value.size()) throw SizeError("plot: column lengths differ");
    auto out = open_out(path);
    out << "# t " << quantity << '\n';
    for (std::size_t i = 0; i < t.size(); ++i) out << format_double(t[i]) << ' ' << format_double(value[i]) << '\n';
}

void write_moment_matrix_csv(const std::string& path, const MomentMatrix& m) {
    auto out = open_out(path);
    out << "model_tag," << m.model_tag << '\n';
    out << "domain," << format_double(m.domain.lower) << ',' << format_double(m.domain.upper) << '\n';
    out << "dt," << format_double(m.dt) << '\n';
    out << "N," << m.degree() << '\n';
    out << "rows," << m.gamma.rows() << '\n';
    for (Eigen::Index i = 0; i < m.gamma.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.gamma.cols(); ++j) {
            if (j) out << ',';
            out << format_double(m.gamma(i, j));
        }
        out << '\n';
    }
    if (!out) throw DataError("write failed: " + path);
}

MomentMatrix read_moment_matrix_csv(const std::string& path) {
    auto in = open_in(path);
    MomentMatrix m;
    const auto tag = expect_header(in, "model_tag", path);
    m.model_tag = tag.size() > 1 ? tag[1] : "";
    const auto dom = expect_header(in, "domain", path);
    if (dom.size() != 3) throw DataError(path + ": malformed domain line");
    m.domain = Domain(parse_double(dom[1], path), parse_double(dom[2], path));
    const auto dt = expect_header(in, "dt", path);
    if (dt.size() != 2) throw DataError(path + ": malformed dt line");
    m.dt = parse_double(dt[1], path);
    const auto n = expect_header(in, "N", path);
    const auto rows = expect_header(in, "rows", path);
    if (n.size() != 2 || rows.size() != 2) throw DataError(path + ": malformed size line");
    const auto cols = static_cast<Eigen::Index>(parse_uint(n[1], path) + 1);
    const auto nrows = static_cast<Eigen::Index>(parse_uint(rows[1], path));
    m.gamma.resize(nrows, cols);
    for (Eigen::Index i = 0; i < nrows; ++i) {
        const auto cells = split(expect_line(in, path), ',');
        if (static_cast<Eigen::Index>(cells.size()) != cols) throw DataError(path + ": wrong number of columns");
        for (Eigen::Index j = 0; j < cols; ++j) m.gamma(i, j) = parse_double(cells[static_cast<std::size_t>(j)], path);
    }
    return m;
}

void write_ensemble_csv(const std::string& path, const PathEnsemble& e) {
    auto out = open_out(path);
    out << "seed," << e.seed << '\n';
    out << "measure," << to_string(e.measure) << '\n';
    out << "grid";
    for (double t : e.grid) out << ',' << format_double(t);
    out << '\n';
    for (std::size_t i = 0; i < e.paths; ++i) {
        for (std::size_t u = 0; u < e.grid.size(); ++u) {
            if (u) out << ',';
            out << format_double(e(i, u));
        }
        out << '\n';
    }
    if (!out) throw DataError("write failed: " + path);
}

PathEnsemble read_ensemble_csv(const std::string& path) {
    auto in = open_in(path);
    PathEnsemble e;
    const auto seed = expect_header(in, "seed", path);
    if (seed.size() != 2) throw DataError(path + ": malformed seed line");
    e.seed = parse_uint(seed[1], path);
    const auto meas = expect_header(in, "measure", path);
    if (meas.size() != 2) throw DataError(path + ": malformed measure line");
    try {
        e.measure = measure_from_string(meas[1]);
    } catch (const Error&) {
        throw DataError(path + ": unknown measure '" + meas[1] + "'");
    }
    const auto grid = expect_header(in, "grid", path);
    for (std::size_t k = 1; k < grid.size(); ++k) e.grid.push_back(parse_double(grid[k], path));
    const std::size_t steps = e.grid.size();
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() != steps) throw DataError(path + ": path row length does not match the grid");
        std::vector<double> r(steps);
        for (std::size_t u = 0; u < steps; ++u) r[u] = parse_double(cells[u], path);
        rows.push_back(std::move(r));
    }
    e.paths = rows.size();
    e.values.resize(steps * e.paths);
    for (std::size_t i = 0; i < e.paths; ++i) {
        for (std::size_t u = 0; u < steps; ++u) e.values[u * e.paths + i] = rows[i][u];
    }
    return e;
}

}  // namespace dce
