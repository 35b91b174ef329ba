#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "fusionret/eval.hpp"
#include "fusionret/matrix.hpp"

namespace fusionret::io {

/// ARRAY is the NumPy .npy container (v1.0, 2-D, little-endian float32 or
/// float64, C order). CSV is comma-separated decimals, one row per line.
enum class MatrixFormat { Array, Csv };

/// `.npy` selects ARRAY, anything else CSV.
MatrixFormat format_for_path(const std::filesystem::path& path);

/// Loads a 2-D matrix, widening float32 to double. Parse errors carry the
/// byte offset (ARRAY) or line number (CSV); non-finite values raise
/// ValidationError with their coordinates.
Matrix load_matrix(const std::filesystem::path& path, MatrixFormat format);
inline Matrix load_matrix(const std::filesystem::path& path) {
  return load_matrix(path, format_for_path(path));
}

/// ARRAY output is always float64; CSV uses shortest round-trip decimals.
void write_matrix(const Matrix& m, const std::filesystem::path& path, MatrixFormat format);
inline void write_matrix(const Matrix& m, const std::filesystem::path& path) {
  write_matrix(m, path, format_for_path(path));
}

/// In-memory variants, used by the file functions and by tests that build
/// malformed inputs byte by byte. `source` only labels error messages.
Matrix parse_npy(const std::string& bytes, const std::string& source = "<memory>");
std::string serialize_npy(const Matrix& m);
Matrix parse_csv(const std::string& text, const std::string& source = "<memory>");
std::string serialize_csv(const Matrix& m);

struct ModelEntry {
  std::string name;
  std::filesystem::path path;  // resolved against the manifest's directory
};

/// JSON document:
///   {"queries": 3, "gallery": 3,
///    "relevant": [[0], [1], [2]]            (or {"0": [0], "1": [1], ...}),
///    "models": [{"name": "uit", "path": "uit.npy"}, ...]}   (optional)
struct Manifest {
  std::size_t n_queries = 0;
  std::size_t gallery_size = 0;
  GroundTruth gt = GroundTruth({}, 0);
  std::vector<ModelEntry> models;
};

/// Parses and validates a manifest; model files must exist.
Manifest load_manifest(const std::filesystem::path& path);
Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir,
                        const std::string& source = "<memory>");
GroundTruth load_ground_truth(const std::filesystem::path& path);

/// Model paths are written as given (not relativized).
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace fusionret::io
