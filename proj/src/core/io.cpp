#include "kqrk/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "kqrk/error.hpp"
#include "kqrk/rng.hpp"

namespace kqrk::io {

static_assert(std::endian::native == std::endian::little, "binary container assumes little-endian host");

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::string csv_field(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

std::string checksum(std::string_view bytes) {
  const std::uint64_t h = Rng::fnv1a(bytes);
  char buf[17];
  static constexpr char hex[] = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) buf[15 - i] = hex[(h >> (4 * i)) & 0xf];
  buf[16] = '\0';
  return buf;
}

std::string file_checksum(const std::filesystem::path& path) { return checksum(read_file(path)); }

namespace {

double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(ErrorKind::FormatError, "not a number: '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(std::string_view bytes, std::size_t& pos) {
  if (pos + sizeof(T) > bytes.size()) throw Error(ErrorKind::FormatError, "truncated matrix container");
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::string matrix_to_csv(const DenseMatrix& a) {
  std::string out;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      if (j) out += ',';
      out += format_double(a(i, j));
    }
    out += '\n';
  }
  return out;
}

DenseMatrix matrix_from_csv(std::string_view text, bool row_normalized) {
  std::vector<double> entries;
  std::size_t rows = 0, cols = 0;
  for (std::string_view line : split_lines(text)) {
    std::size_t count = 0;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      entries.push_back(parse_double(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
      ++count;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (rows == 0) cols = count;
    else if (count != cols) throw Error(ErrorKind::FormatError, "ragged CSV matrix at row " + std::to_string(rows));
    ++rows;
  }
  if (rows == 0) throw Error(ErrorKind::FormatError, "empty CSV matrix");
  return DenseMatrix(rows, cols, std::move(entries), row_normalized);
}

std::string matrix_to_binary(const DenseMatrix& a) {
  std::string out = "KQRK";
  put<std::uint32_t>(out, kContainerVersion);
  put<std::uint64_t>(out, a.rows());
  put<std::uint64_t>(out, a.cols());
  put<std::uint8_t>(out, a.row_normalized() ? 1 : 0);
  out.reserve(out.size() + a.data().size() * sizeof(double));
  for (double v : a.data()) put<double>(out, v);
  return out;
}

DenseMatrix matrix_from_binary(std::string_view bytes) {
  if (bytes.substr(0, 4) != "KQRK") throw Error(ErrorKind::FormatError, "bad matrix container magic");
  std::size_t pos = 4;
  const auto version = take<std::uint32_t>(bytes, pos);
  if (version != kContainerVersion) {
    throw Error(ErrorKind::FormatError, "unsupported container version " + std::to_string(version));
  }
  const auto m = take<std::uint64_t>(bytes, pos);
  const auto n = take<std::uint64_t>(bytes, pos);
  const auto flag = take<std::uint8_t>(bytes, pos);
  if (flag > 1) throw Error(ErrorKind::FormatError, "bad row_normalized flag");
  if (m == 0 || n == 0 || bytes.size() - pos != m * n * sizeof(double)) {
    throw Error(ErrorKind::FormatError, "matrix container size mismatch");
  }
  std::vector<double> entries(m * n);
  std::memcpy(entries.data(), bytes.data() + pos, entries.size() * sizeof(double));
  return DenseMatrix(m, n, std::move(entries), flag == 1);
}

void save_matrix(const std::filesystem::path& path, const DenseMatrix& a) {
  write_file(path, path.extension() == ".csv" ? matrix_to_csv(a) : matrix_to_binary(a));
}

DenseMatrix load_matrix(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  return path.extension() == ".csv" ? matrix_from_csv(bytes) : matrix_from_binary(bytes);
}

std::string vector_to_csv(std::span<const double> v) {
  std::string out = "value\n";
  for (double x : v) {
    out += format_double(x);
    out += '\n';
  }
  return out;
}

std::vector<double> vector_from_csv(std::string_view text) {
  auto lines = split_lines(text);
  if (lines.empty() || lines.front() != "value") throw Error(ErrorKind::FormatError, "vector CSV missing 'value' header");
  std::vector<double> v;
  v.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) v.push_back(parse_double(lines[i]));
  return v;
}

}  // namespace kqrk::io
