#include "fusionret/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fusionret/error.hpp"

namespace fusionret::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "array I/O assumes a little-endian host");

namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;
constexpr std::size_t kPreludeLen = 10;  // magic + version + uint16 header length

[[noreturn]] void format_error(const std::string& source, std::size_t offset, const std::string& what) {
  throw FormatError(source + ": byte " + std::to_string(offset) + ": " + what);
}

void check_finite(const Matrix& m, const std::string& source) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (!std::isfinite(m(r, c))) {
        throw ValidationError(source + ": non-finite value at (" + std::to_string(r) + ", " +
                              std::to_string(c) + ")");
      }
    }
  }
}

// Minimal reader for the Python-literal dict in the .npy header.
class HeaderParser {
 public:
  HeaderParser(const std::string& header, std::size_t base, const std::string& source)
      : h_(header), base_(base), source_(source) {}

  std::string descr;
  bool fortran_order = false;
  std::vector<std::size_t> shape;

  void parse() {
    skip_ws();
    expect('{');
    bool seen_descr = false, seen_order = false, seen_shape = false;
    while (true) {
      skip_ws();
      if (peek() == '}') break;
      const std::size_t key_at = pos_;
      const std::string key = quoted();
      skip_ws();
      expect(':');
      skip_ws();
      if (key == "descr") {
        descr = quoted();
        seen_descr = true;
      } else if (key == "fortran_order") {
        fortran_order = boolean();
        seen_order = true;
      } else if (key == "shape") {
        shape = tuple();
        seen_shape = true;
      } else {
        fail(key_at, "unexpected header key '" + key + "'");
      }
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      skip_ws();
      if (peek() != '}') fail(pos_, "expected ',' or '}' in header");
    }
    if (!seen_descr || !seen_order || !seen_shape) {
      fail(0, "header lacks one of 'descr', 'fortran_order', 'shape'");
    }
  }

  [[noreturn]] void fail(std::size_t at, const std::string& what) const {
    format_error(source_, base_ + at, what);
  }

 private:
  char peek() const { return pos_ < h_.size() ? h_[pos_] : '\0'; }
  void skip_ws() {
    while (pos_ < h_.size() && (h_[pos_] == ' ' || h_[pos_] == '\n' || h_[pos_] == '\t')) ++pos_;
  }
  void expect(char c) {
    if (peek() != c) fail(pos_, std::string("expected '") + c + "' in header");
    ++pos_;
  }
  std::string quoted() {
    const char q = peek();
    if (q != '\'' && q != '"') fail(pos_, "expected quoted string in header");
    const std::size_t start = ++pos_;
    while (pos_ < h_.size() && h_[pos_] != q) ++pos_;
    if (pos_ >= h_.size()) fail(start, "unterminated string in header");
    return h_.substr(start, pos_++ - start);
  }
  bool boolean() {
    if (h_.compare(pos_, 4, "True") == 0) {
      pos_ += 4;
      return true;
    }
    if (h_.compare(pos_, 5, "False") == 0) {
      pos_ += 5;
      return false;
    }
    fail(pos_, "expected True or False in header");
  }
  std::vector<std::size_t> tuple() {
    expect('(');
    std::vector<std::size_t> dims;
    while (true) {
      skip_ws();
      if (peek() == ')') {
        ++pos_;
        return dims;
      }
      std::size_t v = 0;
      const char* begin = h_.data() + pos_;
      const char* end = h_.data() + h_.size();
      auto [ptr, ec] = std::from_chars(begin, end, v);
      if (ec != std::errc{}) fail(pos_, "expected integer dimension in shape");
      pos_ += static_cast<std::size_t>(ptr - begin);
      dims.push_back(v);
      skip_ws();
      if (peek() == ',') ++pos_;
      else if (peek() != ')') fail(pos_, "expected ',' or ')' in shape");
    }
  }

  const std::string& h_;
  std::size_t base_;
  const std::string& source_;
  std::size_t pos_ = 0;
};

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

MatrixFormat format_for_path(const fs::path& path) {
  return path.extension() == ".npy" ? MatrixFormat::Array : MatrixFormat::Csv;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError(path.string() + ": read failed");
  return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw IoError(path.string() + ": write failed");
}

Matrix parse_npy(const std::string& bytes, const std::string& source) {
  if (bytes.size() < kMagicLen || std::memcmp(bytes.data(), kMagic, kMagicLen) != 0) {
    format_error(source, 0, "missing \\x93NUMPY magic");
  }
  if (bytes.size() < kPreludeLen) format_error(source, bytes.size(), "truncated prelude");
  const auto major = static_cast<unsigned char>(bytes[6]);
  const auto minor = static_cast<unsigned char>(bytes[7]);
  if (major != 1 || minor != 0) {
    format_error(source, 6,
                 "unsupported format version " + std::to_string(major) + "." + std::to_string(minor) +
                     " (only 1.0)");
  }
  const std::size_t header_len = static_cast<unsigned char>(bytes[8]) |
                                 (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
  if (bytes.size() < kPreludeLen + header_len) {
    format_error(source, kPreludeLen, "header length " + std::to_string(header_len) +
                                          " runs past end of file");
  }
  const std::string header = bytes.substr(kPreludeLen, header_len);
  HeaderParser hp(header, kPreludeLen, source);
  hp.parse();

  std::size_t item = 0;
  if (hp.descr == "<f8") item = 8;
  else if (hp.descr == "<f4") item = 4;
  else hp.fail(0, "unsupported dtype '" + hp.descr + "' (need <f4 or <f8)");
  if (hp.fortran_order) hp.fail(0, "fortran_order arrays are not supported (row-major only)");
  if (hp.shape.size() != 2) {
    hp.fail(0, "expected a 2-D array, got " + std::to_string(hp.shape.size()) + " dimensions");
  }

  const std::size_t rows = hp.shape[0], cols = hp.shape[1];
  const std::size_t payload_at = kPreludeLen + header_len;
  const std::size_t expected = rows * cols * item;
  if (bytes.size() - payload_at != expected) {
    format_error(source, payload_at,
                 "payload has " + std::to_string(bytes.size() - payload_at) + " bytes, header declares " +
                     std::to_string(expected));
  }
  std::vector<double> data(rows * cols);
  const char* p = bytes.data() + payload_at;
  if (item == 8) {
    std::memcpy(data.data(), p, expected);
  } else {
    for (std::size_t i = 0; i < data.size(); ++i) {
      float f;
      std::memcpy(&f, p + 4 * i, 4);
      data[i] = static_cast<double>(f);
    }
  }
  Matrix m(rows, cols, std::move(data));
  check_finite(m, source);
  return m;
}

std::string serialize_npy(const Matrix& m) {
  std::string dict = "{'descr': '<f8', 'fortran_order': False, 'shape': (" + std::to_string(m.rows()) +
                     ", " + std::to_string(m.cols()) + "), }";
  // Pad with spaces so the payload starts on a 64-byte boundary; header ends in '\n'.
  const std::size_t unpadded = kPreludeLen + dict.size() + 1;
  dict.append((64 - unpadded % 64) % 64, ' ');
  dict.push_back('\n');

  std::string out(kMagic, kMagicLen);
  out.push_back('\x01');
  out.push_back('\x00');
  out.push_back(static_cast<char>(dict.size() & 0xff));
  out.push_back(static_cast<char>((dict.size() >> 8) & 0xff));
  out += dict;
  const auto data = m.data();
  out.append(reinterpret_cast<const char*>(data.data()), data.size() * sizeof(double));
  return out;
}

Matrix parse_csv(const std::string& text, const std::string& source) {
  std::vector<double> data;
  std::size_t cols = 0, rows = 0, line_no = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::size_t fields = 0;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string field = trim(std::string_view(line).substr(
          start, comma == std::string::npos ? std::string::npos : comma - start));
      double v = 0.0;
      const char* b = field.data();
      const char* e = b + field.size();
      // from_chars rejects a leading '+'.
      if (b != e && *b == '+') ++b;
      auto [ptr, ec] = std::from_chars(b, e, v);
      if (field.empty() || ec != std::errc{} || ptr != e) {
        throw FormatError(source + ": line " + std::to_string(line_no) + ": cannot parse '" + field +
                          "' as a number");
      }
      if (!std::isfinite(v)) {
        throw ValidationError(source + ": non-finite value at (" + std::to_string(rows) + ", " +
                              std::to_string(fields) + ") on line " + std::to_string(line_no));
      }
      data.push_back(v);
      ++fields;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (rows == 0) {
      cols = fields;
    } else if (fields != cols) {
      throw FormatError(source + ": line " + std::to_string(line_no) + ": " + std::to_string(fields) +
                        " fields, expected " + std::to_string(cols));
    }
    ++rows;
  }
  if (rows == 0) throw FormatError(source + ": no data rows");
  return Matrix(rows, cols, std::move(data));
}

std::string serialize_csv(const Matrix& m) {
  std::string out;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out.push_back(',');
      out += format_double(m(r, c));
    }
    out.push_back('\n');
  }
  return out;
}

Matrix load_matrix(const fs::path& path, MatrixFormat format) {
  const std::string bytes = read_file(path);
  return format == MatrixFormat::Array ? parse_npy(bytes, path.string()) : parse_csv(bytes, path.string());
}

void write_matrix(const Matrix& m, const fs::path& path, MatrixFormat format) {
  write_file(path, format == MatrixFormat::Array ? serialize_npy(m) : serialize_csv(m));
}

Manifest parse_manifest(const std::string& text, const fs::path& base_dir, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(source + ": byte " + std::to_string(e.byte) + ": invalid JSON");
  }
  if (!doc.is_object()) throw FormatError(source + ": top level must be an object");

  const auto count = [&](const char* key) -> std::size_t {
    if (!doc.contains(key) || !doc[key].is_number_unsigned()) {
      throw ValidationError(source + ": '" + key + "' must be a non-negative integer");
    }
    return doc[key].get<std::size_t>();
  };

  Manifest m;
  m.n_queries = count("queries");
  m.gallery_size = count("gallery");

  std::vector<std::vector<std::size_t>> relevant(m.n_queries);
  std::vector<char> seen(m.n_queries, 0);
  const auto read_set = [&](std::size_t q, const json& arr) {
    if (q >= m.n_queries) {
      throw ValidationError(source + ": query " + std::to_string(q) + " beyond declared count " +
                            std::to_string(m.n_queries));
    }
    if (!arr.is_array()) throw ValidationError(source + ": query " + std::to_string(q) + ": expected an index list");
    for (const auto& v : arr) {
      if (!v.is_number_unsigned()) {
        throw ValidationError(source + ": query " + std::to_string(q) + ": non-integer gallery index");
      }
      const auto idx = v.get<std::size_t>();
      if (idx >= m.gallery_size) {
        throw ValidationError(source + ": query " + std::to_string(q) + ": gallery index " +
                              std::to_string(idx) + " outside gallery of " + std::to_string(m.gallery_size));
      }
      relevant[q].push_back(idx);
    }
    seen[q] = 1;
  };

  if (!doc.contains("relevant")) throw ValidationError(source + ": missing 'relevant'");
  const json& rel = doc["relevant"];
  if (rel.is_array()) {
    for (std::size_t q = 0; q < rel.size(); ++q) read_set(q, rel[q]);
  } else if (rel.is_object()) {
    for (const auto& [key, value] : rel.items()) {
      std::size_t q = 0;
      auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), q);
      if (ec != std::errc{} || ptr != key.data() + key.size()) {
        throw ValidationError(source + ": relevant key '" + key + "' is not a query index");
      }
      read_set(q, value);
    }
  } else {
    throw ValidationError(source + ": 'relevant' must be a list or an object");
  }
  for (std::size_t q = 0; q < m.n_queries; ++q) {
    if (!seen[q]) throw ValidationError(source + ": no relevant set for query " + std::to_string(q));
  }
  try {
    m.gt = GroundTruth(std::move(relevant), m.gallery_size);
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  }

  if (doc.contains("models")) {
    const json& models = doc["models"];
    if (!models.is_array()) throw ValidationError(source + ": 'models' must be a list");
    for (std::size_t i = 0; i < models.size(); ++i) {
      const json& e = models[i];
      if (!e.is_object() || !e.contains("path") || !e["path"].is_string()) {
        throw ValidationError(source + ": model " + std::to_string(i) + " needs a string 'path'");
      }
      ModelEntry entry;
      entry.name = e.contains("name") && e["name"].is_string() ? e["name"].get<std::string>()
                                                               : "model_" + std::to_string(i);
      fs::path p = e["path"].get<std::string>();
      entry.path = p.is_absolute() ? p : base_dir / p;
      if (!fs::exists(entry.path)) {
        throw ValidationError(source + ": model " + std::to_string(i) + " file not found: " +
                              entry.path.string());
      }
      m.models.push_back(std::move(entry));
    }
  }
  return m;
}

Manifest load_manifest(const fs::path& path) {
  return parse_manifest(read_file(path), path.parent_path(), path.string());
}

GroundTruth load_ground_truth(const fs::path& path) { return load_manifest(path).gt; }

void write_manifest(const Manifest& manifest, const fs::path& path) {
  json doc;
  doc["queries"] = manifest.n_queries;
  doc["gallery"] = manifest.gallery_size;
  json rel = json::array();
  for (std::size_t q = 0; q < manifest.gt.n_queries(); ++q) {
    const auto set = manifest.gt.relevant(q);
    rel.push_back(std::vector<std::size_t>(set.begin(), set.end()));
  }
  doc["relevant"] = std::move(rel);
  if (!manifest.models.empty()) {
    json models = json::array();
    for (const auto& m : manifest.models) models.push_back({{"name", m.name}, {"path", m.path.string()}});
    doc["models"] = std::move(models);
  }
  write_file(path, doc.dump(1) + "\n");
}

}  // namespace fusionret::io
