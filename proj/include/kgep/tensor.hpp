#pragma once

#include <Eigen/Dense>

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace kgep {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Little-endian binary helpers shared by the checkpoint formats.
namespace binio {

template <typename T>
void write_le(std::ostream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    }
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
        throw std::runtime_error("unexpected end of binary stream");
    }
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    }
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

inline void write_matrix(std::ostream& out, const Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) write_le<double>(out, m.data()[i]);
}

inline void read_matrix(std::istream& in, Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = read_le<double>(in);
}

inline void write_string(std::ostream& out, const std::string& s) {
    write_le<std::uint64_t>(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in, std::size_t max_size = (1u << 30)) {
    const auto n = read_le<std::uint64_t>(in);
    if (n > max_size) throw std::runtime_error("binary string length out of range");
    std::string s(n, '\0');
    if (!in.read(s.data(), static_cast<std::streamsize>(n))) {
        throw std::runtime_error("unexpected end of binary stream");
    }
    return s;
}

}  // namespace binio
}  // namespace kgep
