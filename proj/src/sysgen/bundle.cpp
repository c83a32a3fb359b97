#include <string>

#include "kqrk/error.hpp"
#include "kqrk/io.hpp"
#include "kqrk/sysgen.hpp"

namespace kqrk::sysgen {

namespace {

constexpr const char* kMatrixFile = "matrix.kqrk";

struct VectorFile {
  const char* name;
  std::vector<double> CorruptedProblem::*member;
};

constexpr VectorFile kVectorFiles[] = {
    {"x_star.csv", &CorruptedProblem::x_star}, {"b_true.csv", &CorruptedProblem::b_true},
    {"eta.csv", &CorruptedProblem::eta},       {"xi.csv", &CorruptedProblem::xi},
    {"b.csv", &CorruptedProblem::b},
};

}  // namespace

void save_bundle(const std::filesystem::path& dir, const CorruptedProblem& p, const GenSpec& spec,
                 const std::string& tool_version) {
  std::filesystem::create_directories(dir);
  nlohmann::json checksums = nlohmann::json::object();

  const std::string matrix_bytes = io::matrix_to_binary(p.a);
  io::write_file(dir / kMatrixFile, matrix_bytes);
  checksums[kMatrixFile] = io::checksum(matrix_bytes);

  for (const auto& f : kVectorFiles) {
    const std::string text = io::vector_to_csv(p.*(f.member));
    io::write_file(dir / f.name, text);
    checksums[f.name] = io::checksum(text);
  }

  nlohmann::json manifest = {
      {"kind", "problem"},
      {"tool_version", tool_version},
      {"spec", to_json(spec)},
      {"row_norms", p.row_norms},
      {"checksums", checksums},
  };
  io::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

LoadedBundle load_bundle(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(io::read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::FormatError, "bad manifest in " + dir.string() + ": " + e.what());
  }
  if (manifest.value("kind", "") != "problem") {
    throw Error(ErrorKind::FormatError, dir.string() + " is not a problem bundle");
  }
  const auto& sums = manifest.at("checksums");
  const auto read_checked = [&](const std::string& name) {
    std::string bytes = io::read_file(dir / name);
    if (!sums.contains(name) || sums.at(name).get<std::string>() != io::checksum(bytes)) {
      throw Error(ErrorKind::FormatError, "checksum mismatch for " + (dir / name).string());
    }
    return bytes;
  };

  LoadedBundle out{{io::matrix_from_binary(read_checked(kMatrixFile)), {}, {}, {}, {}, {}, {}},
                   gen_spec_from_json(manifest.at("spec"))};
  out.problem.row_norms = manifest.at("row_norms").get<std::vector<double>>();
  for (const auto& f : kVectorFiles) out.problem.*(f.member) = io::vector_from_csv(read_checked(f.name));
  return out;
}

}  // namespace kqrk::sysgen
