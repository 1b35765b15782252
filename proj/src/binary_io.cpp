#include "fapd/binary_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "fapd/error.hpp"

namespace fapd::io {

namespace {

template <typename T>
T to_little(T value) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bits = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(value);
        std::reverse(bits.begin(), bits.end());
        return std::bit_cast<T>(bits);
    }
    return value;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string() + " for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::Io, "short write to " + path.string());
}

template <typename T>
std::vector<T> read_blob(const std::filesystem::path& path, std::size_t expected_count) {
    const auto bytes = read_bytes(path);
    const std::size_t expected = expected_count * sizeof(T);
    if (bytes.size() != expected) {
        fail(ErrorKind::Format, path.string() + ": size mismatch, expected " + std::to_string(expected) +
                                    " bytes but data ends at byte offset " + std::to_string(bytes.size()));
    }
    std::vector<T> values(expected_count);
    for (std::size_t i = 0; i < expected_count; ++i) {
        T v;
        std::memcpy(&v, bytes.data() + i * sizeof(T), sizeof(T));
        values[i] = to_little(v);
    }
    return values;
}

template <typename T>
void append_blob(std::span<const T> values, std::vector<std::uint8_t>& out) {
    const std::size_t start = out.size();
    out.resize(start + values.size() * sizeof(T));
    for (std::size_t i = 0; i < values.size(); ++i) {
        const T v = to_little(values[i]);
        std::memcpy(out.data() + start + i * sizeof(T), &v, sizeof(T));
    }
}

}  // namespace

void write_f64(const std::filesystem::path& path, std::span<const double> values) {
    std::vector<std::uint8_t> bytes;
    append_blob(values, bytes);
    write_bytes(path, bytes);
}

void write_u32(const std::filesystem::path& path, std::span<const std::uint32_t> values) {
    std::vector<std::uint8_t> bytes;
    append_blob(values, bytes);
    write_bytes(path, bytes);
}

std::vector<double> read_f64(const std::filesystem::path& path, std::size_t expected_count) {
    return read_blob<double>(path, expected_count);
}

std::vector<std::uint32_t> read_u32(const std::filesystem::path& path, std::size_t expected_count) {
    return read_blob<std::uint32_t>(path, expected_count);
}

void encode_f64(std::span<const double> values, std::vector<std::uint8_t>& out) { append_blob(values, out); }

std::vector<double> decode_f64(std::span<const std::uint8_t> bytes) {
    if (bytes.size() % sizeof(double) != 0)
        fail(ErrorKind::Format, "f64 payload length " + std::to_string(bytes.size()) + " is not a multiple of 8");
    std::vector<double> values(bytes.size() / sizeof(double));
    for (std::size_t i = 0; i < values.size(); ++i) {
        double v;
        std::memcpy(&v, bytes.data() + i * sizeof(double), sizeof(double));
        values[i] = to_little(v);
    }
    return values;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string() + " for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    out << text;
    if (!out) fail(ErrorKind::Io, "short write to " + path.string());
}

}  // namespace fapd::io
