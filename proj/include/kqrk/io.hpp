#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kqrk/matrix.hpp"

namespace kqrk::io {

/// Shortest-safe text form with 17 significant digits and '.' decimals;
/// parses back to the identical double.
std::string format_double(double v);

/// RFC 4180 field quoting (only when the field needs it).
std::string csv_field(std::string_view field);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// 64-bit FNV-1a of the bytes, as 16 lowercase hex digits.
std::string checksum(std::string_view bytes);
std::string file_checksum(const std::filesystem::path& path);

// Matrix CSV: one matrix row per line, no header.
std::string matrix_to_csv(const DenseMatrix& a);
DenseMatrix matrix_from_csv(std::string_view text, bool row_normalized = false);

/// Binary container, little-endian:
///   "KQRK" | u32 version | u64 m | u64 n | u8 row_normalized | m·n f64 row-major
inline constexpr std::uint32_t kContainerVersion = 1;
std::string matrix_to_binary(const DenseMatrix& a);
DenseMatrix matrix_from_binary(std::string_view bytes);

void save_matrix(const std::filesystem::path& path, const DenseMatrix& a);
DenseMatrix load_matrix(const std::filesystem::path& path);

// Vector CSV: a "value" header then one entry per line.
std::string vector_to_csv(std::span<const double> v);
std::vector<double> vector_from_csv(std::string_view text);

}  // namespace kqrk::io
