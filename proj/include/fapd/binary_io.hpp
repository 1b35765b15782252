#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fapd::io {

// Little-endian flat blobs. Readers verify the exact byte length and report
// the offending byte offset on mismatch.
void write_f64(const std::filesystem::path& path, std::span<const double> values);
void write_u32(const std::filesystem::path& path, std::span<const std::uint32_t> values);

std::vector<double> read_f64(const std::filesystem::path& path, std::size_t expected_count);
std::vector<std::uint32_t> read_u32(const std::filesystem::path& path, std::size_t expected_count);

void encode_f64(std::span<const double> values, std::vector<std::uint8_t>& out);
std::vector<double> decode_f64(std::span<const std::uint8_t> bytes);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace fapd::io
