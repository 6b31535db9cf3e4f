#pragma once

// Matrix files: CSV (rows = channels, optional header line) and a raw
// little-endian binary layout "ADISMTX1", u32 rows, u32 cols, f64 row-major.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "adis/error.hpp"

namespace adis::io {

using Matrix = Eigen::MatrixXd;

inline constexpr char kMagic[8] = {'A', 'D', 'I', 'S', 'M', 'T', 'X', '1'};

struct LabeledMatrix {
    Matrix values;
    std::vector<std::string> column_labels;  // empty when the file had no header
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        std::size_t b = 0;
        while (b < cell.size() && cell[b] == ' ') ++b;
        cells.push_back(cell.substr(b));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

inline bool parse_double(const std::string& s, double& v) {
    if (s.empty()) return false;
    char* end = nullptr;
    v = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

inline LabeledMatrix read_csv(std::istream& is, const std::string& name = "<stream>") {
    LabeledMatrix out;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    std::size_t width = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        std::vector<double> row(cells.size());
        bool numeric = true;
        for (std::size_t j = 0; j < cells.size() && numeric; ++j) numeric = parse_double(cells[j], row[j]);
        if (!numeric) {
            if (rows.empty() && out.column_labels.empty()) {
                out.column_labels = cells;
                width = cells.size();
                continue;
            }
            throw IoError(name + ":" + std::to_string(lineno) + ": non-numeric entry");
        }
        if (width == 0) width = row.size();
        if (row.size() != width)
            throw IoError(name + ":" + std::to_string(lineno) + ": expected " + std::to_string(width) +
                          " columns, found " + std::to_string(row.size()));
        for (double v : row)
            if (!std::isfinite(v)) throw IoError(name + ":" + std::to_string(lineno) + ": non-finite entry");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IoError(name + ": no data rows");
    out.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < width; ++j) out.values(i, j) = rows[i][j];
    return out;
}

inline void write_csv(std::ostream& os, const Matrix& m,
                      const std::vector<std::string>& header = {}) {
    if (!header.empty()) {
        for (std::size_t j = 0; j < header.size(); ++j) os << (j ? "," : "") << header[j];
        os << '\n';
    }
    char buf[32];
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
            if (j) os << ',';
            os << buf;
        }
        os << '\n';
    }
}

namespace detail {
template <typename T>
void put_le(std::ostream& os, T v) {
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
        os.write(reinterpret_cast<const char*>(b), sizeof(T));
    } else {
        os.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
}
template <typename T>
bool get_le(std::istream& is, T& v) {
    unsigned char b[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) return false;
    if constexpr (std::endian::native == std::endian::big)
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
    return true;
}
}  // namespace detail

inline void write_binary(std::ostream& os, const Matrix& m) {
    os.write(kMagic, sizeof kMagic);
    detail::put_le(os, static_cast<std::uint32_t>(m.rows()));
    detail::put_le(os, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) detail::put_le(os, m(i, j));
}

inline Matrix read_binary(std::istream& is, const std::string& name = "<stream>") {
    char magic[8];
    if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw IoError(name + ": bad magic, not an ADIS binary matrix");
    std::uint32_t r = 0, c = 0;
    if (!detail::get_le(is, r) || !detail::get_le(is, c)) throw IoError(name + ": truncated header");
    Matrix m(r, c);
    for (std::uint32_t i = 0; i < r; ++i)
        for (std::uint32_t j = 0; j < c; ++j)
            if (!detail::get_le(is, m(i, j))) throw IoError(name + ": truncated data");
    if (!m.allFinite()) throw IoError(name + ": non-finite entry");
    return m;
}

inline bool looks_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    char magic[8];
    return is.read(magic, sizeof magic) && std::memcmp(magic, kMagic, sizeof kMagic) == 0;
}

/// Reads either format, sniffing the magic bytes.
inline LabeledMatrix load_matrix(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    if (looks_binary(path)) return {read_binary(is, path), {}};
    return read_csv(is, path);
}

inline void save_csv(const std::string& path, const Matrix& m,
                     const std::vector<std::string>& header = {}) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path);
    write_csv(os, m, header);
}

inline void save_binary(const std::string& path, const Matrix& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path);
    write_binary(os, m);
}

}  // namespace adis::io
