#pragma once

// Binary containers and CSV fixtures for Tensor3 and Matrix.
//
// Tensor container (little-endian):
//   char[4] "ODT3" | u32 version (=1) | u64 d1 | u64 d2 | u64 d3 | f64[d1*d2*d3]
// values in storage order (mode-1 fastest).
//
// Matrix container:
//   char[4] "ODTM" | u32 version (=1) | u64 rows | u64 cols | f64[rows*cols]
// values column-major.
//
// Tensor CSV: header "i,j,k,value", one line per nonzero, zero-based indices,
// values printed with 17 significant digits so they round-trip exactly.

#include "odt/errors.hpp"
#include "odt/tensor.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace odt::io {

static_assert(std::endian::native == std::endian::little,
              "binary containers assume a little-endian host");

inline constexpr std::uint32_t kContainerVersion = 1;

namespace detail {

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const std::string& path) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw input_error(path + ": truncated container");
    return v;
}

inline void check_magic(std::istream& is, const char* magic, const std::string& path) {
    char buf[4]{};
    is.read(buf, 4);
    if (!is || std::string(buf, 4) != std::string(magic, 4))
        throw input_error(path + ": bad magic, expected " + std::string(magic, 4));
    const auto version = read_pod<std::uint32_t>(is, path);
    if (version != kContainerVersion)
        throw input_error(path + ": unsupported container version " + std::to_string(version));
}

}  // namespace detail

inline void write_tensor(const std::filesystem::path& path, const Tensor3& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw input_error("cannot open " + path.string() + " for writing");
    os.write("ODT3", 4);
    detail::write_pod(os, kContainerVersion);
    for (std::size_t d : t.dims()) detail::write_pod(os, static_cast<std::uint64_t>(d));
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
}

[[nodiscard]] inline Tensor3 read_tensor(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw input_error("cannot open " + path.string());
    const std::string p = path.string();
    detail::check_magic(is, "ODT3", p);
    Tensor3::Dims dims{};
    for (auto& d : dims) d = static_cast<std::size_t>(detail::read_pod<std::uint64_t>(is, p));
    Tensor3 t(dims);
    is.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!is) throw input_error(p + ": truncated tensor payload");
    return t;
}

inline void write_matrix(const std::filesystem::path& path, const Matrix& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw input_error("cannot open " + path.string() + " for writing");
    os.write("ODTM", 4);
    detail::write_pod(os, kContainerVersion);
    detail::write_pod(os, static_cast<std::uint64_t>(m.rows()));
    detail::write_pod(os, static_cast<std::uint64_t>(m.cols()));
    os.write(reinterpret_cast<const char*>(m.data()),
             static_cast<std::streamsize>(m.size() * sizeof(double)));
}

[[nodiscard]] inline Matrix read_matrix(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw input_error("cannot open " + path.string());
    const std::string p = path.string();
    detail::check_magic(is, "ODTM", p);
    const auto rows = detail::read_pod<std::uint64_t>(is, p);
    const auto cols = detail::read_pod<std::uint64_t>(is, p);
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!is) throw input_error(p + ": truncated matrix payload");
    return m;
}

[[nodiscard]] inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_tensor_csv(std::ostream& os, const Tensor3& t) {
    os << "i,j,k,value\n";
    const auto [d1, d2, d3] = t.dims();
    for (std::size_t z = 0; z < d3; ++z)
        for (std::size_t y = 0; y < d2; ++y)
            for (std::size_t x = 0; x < d1; ++x)
                if (const double v = t(x, y, z); v != 0.0)
                    os << x << ',' << y << ',' << z << ',' << format_double(v) << '\n';
}

/// Reads a nonzero-list CSV into a tensor of the given dims. Repeated cells are rejected.
[[nodiscard]] inline Tensor3 read_tensor_csv(std::istream& is, const Tensor3::Dims& dims,
                                             const std::string& source = "tensor csv") {
    Tensor3 t(dims);
    Tensor3 seen(dims);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (lineno == 1) {
            if (line != "i,j,k,value")
                throw input_error(source + ":1: expected header i,j,k,value");
            continue;
        }
        std::istringstream ss(line);
        std::size_t x, y, z;
        double v;
        char c1, c2, c3;
        if (!(ss >> x >> c1 >> y >> c2 >> z >> c3 >> v) || c1 != ',' || c2 != ',' || c3 != ',')
            throw input_error(source + ":" + std::to_string(lineno) + ": malformed line");
        if (x >= dims[0] || y >= dims[1] || z >= dims[2])
            throw input_error(source + ":" + std::to_string(lineno) + ": index out of range");
        if (seen(x, y, z) != 0.0)
            throw input_error(source + ":" + std::to_string(lineno) + ": duplicate cell");
        seen(x, y, z) = 1.0;
        t(x, y, z) = v;
    }
    return t;
}

}  // namespace odt::io
