#ifndef HOMOGND_IO_GRID_HPP
#define HOMOGND_IO_GRID_HPP

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "homognd/grid.hpp"

namespace homognd {

enum class GridFileFormat { text, binary };

namespace detail {

inline std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_values(std::ostream& os, const std::vector<double>& v, GridFileFormat fmt,
                         int per_line) {
    if (fmt == GridFileFormat::binary) {
        os.write(reinterpret_cast<const char*>(v.data()),
                 static_cast<std::streamsize>(v.size() * sizeof(double)));
        return;
    }
    for (size_t q = 0; q < v.size(); ++q)
        os << fmt17(v[q]) << ((q % per_line == static_cast<size_t>(per_line) - 1) ? '\n' : ' ');
    if (v.size() % per_line != 0) os << '\n';
}

inline void read_values(std::istream& is, std::vector<double>& v, GridFileFormat fmt) {
    if (fmt == GridFileFormat::binary) {
        is.read(reinterpret_cast<char*>(v.data()),
                static_cast<std::streamsize>(v.size() * sizeof(double)));
        if (!is) throw std::runtime_error("grid file: truncated binary payload");
        return;
    }
    for (double& x : v)
        if (!(is >> x)) throw std::runtime_error("grid file: truncated value list");
}

}  // namespace detail

/// Torus grid file: header line "N kind [binary]", then row-major node
/// values (four entries per node for matrix fields).
inline void save_torus_field(const TorusField& f, const std::string& path,
                             GridFileFormat fmt = GridFileFormat::text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << f.n << ' ' << (f.kind == FieldKind::matrix ? "matrix" : "scalar");
    if (fmt == GridFileFormat::binary) os << " binary";
    os << '\n';
    detail::write_values(os, f.data, fmt, f.comps() * f.n);
}

inline TorusField load_torus_field(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::string header;
    std::getline(is, header);
    std::istringstream hs(header);
    int n = 0;
    std::string kind, flag;
    hs >> n >> kind;
    hs >> flag;
    if (n < 1 || (kind != "scalar" && kind != "matrix"))
        throw std::runtime_error("grid file: bad header '" + header + "'");
    TorusField f = (kind == "matrix") ? TorusField::matrix(n) : TorusField::scalar(n);
    detail::read_values(is, f.data,
                        flag == "binary" ? GridFileFormat::binary : GridFileFormat::text);
    return f;
}

/// Nodal grid file: header line "M [binary]", then (M+1)^2 row-major values.
inline void save_grid_function(const GridFunction& g, const std::string& path,
                               GridFileFormat fmt = GridFileFormat::text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << g.m;
    if (fmt == GridFileFormat::binary) os << " binary";
    os << '\n';
    detail::write_values(os, g.v, fmt, g.m + 1);
}

inline GridFunction load_grid_function(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::string header;
    std::getline(is, header);
    std::istringstream hs(header);
    int m = 0;
    std::string flag;
    hs >> m;
    hs >> flag;
    if (m < 1) throw std::runtime_error("grid file: bad header '" + header + "'");
    GridFunction g = GridFunction::zero(m);
    g.dirichlet = false;
    detail::read_values(is, g.v,
                        flag == "binary" ? GridFileFormat::binary : GridFileFormat::text);
    return g;
}

}  // namespace homognd

#endif  // HOMOGND_IO_GRID_HPP
