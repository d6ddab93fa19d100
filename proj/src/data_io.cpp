#include "uflst/data_io.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include "uflst/binary_io.hpp"
#include "uflst/error.hpp"
#include "uflst/rng.hpp"

namespace uflst {

namespace {

std::ifstream open_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot open " + path);
  return in;
}

std::vector<std::string> split_fields(const std::string& line, char delimiter) {
  std::vector<std::string> out;
  if (delimiter == ' ') {
    std::istringstream s(line);
    std::string f;
    while (s >> f) out.push_back(f);
    return out;
  }
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delimiter, start);
    out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_double(const std::string& field, double& out) {
  const char* begin = field.c_str();
  while (*begin == ' ' || *begin == '\t') ++begin;
  if (*begin == '\0') return false;
  char* end = nullptr;
  out = std::strtod(begin, &end);
  while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
  return *end == '\0';
}

bool parse_int(const std::string& field, int& out) {
  double v;
  if (!parse_double(field, v) || v != std::floor(v) || std::abs(v) > 2e9) return false;
  out = static_cast<int>(v);
  return true;
}

}  // namespace

void Dataset::validate() const {
  require(features.rows() > 0 && features.cols() > 0, ErrorKind::kInput, "dataset is empty");
  require(features.all_finite(), ErrorKind::kInput, "dataset contains non-finite values");
  if (labels) {
    require(labels->size() == features.rows(), ErrorKind::kInput,
            "label count does not match the number of rows");
  }
}

void SyntheticSpec::validate() const {
  require(num_classes >= 1 && points_per_class >= 1, ErrorKind::kConfig,
          "synthetic spec needs at least one class and one point per class");
  require(input_dim >= 1, ErrorKind::kConfig, "synthetic input_dim must be positive");
  require(center_dim <= input_dim, ErrorKind::kConfig, "center_dim exceeds input_dim");
  require(separation >= 0.0 && within_std >= 0.0 && nuisance_std >= 0.0 && stretch >= 0.0, ErrorKind::kConfig,
          "synthetic scales must be non-negative");
  require(heldout_classes == 0 || heldout_points_per_class >= 1, ErrorKind::kConfig,
          "heldout classes need at least one point each");
}

std::pair<Dataset, Dataset> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t d = spec.input_dim;
  const std::size_t cd = spec.center_dim == 0 ? d : spec.center_dim;
  const std::size_t total_classes = spec.num_classes + spec.heldout_classes;

  Matrix centers(total_classes, cd);
  for (std::size_t c = 0; c < total_classes; ++c) {
    double norm2 = 0.0;
    while (norm2 == 0.0) {
      for (double& v : centers.row(c)) {
        v = rng.normal();
        norm2 += v * v;
      }
    }
    const double scale = spec.separation / std::sqrt(norm2);
    for (double& v : centers.row(c)) v *= scale;
  }

  const std::size_t dir_begin = cd == d ? 0 : cd;
  std::vector<double> direction(d, 0.0);
  if (spec.stretch > 0.0) {
    double norm2 = 0.0;
    while (norm2 == 0.0) {
      for (std::size_t k = dir_begin; k < d; ++k) {
        direction[k] = rng.normal();
        norm2 += direction[k] * direction[k];
      }
    }
    for (double& v : direction) v /= std::sqrt(norm2);
  }

  auto make = [&](std::size_t first_class, std::size_t classes, std::size_t per_class, Split split) {
    Dataset ds;
    ds.split = split;
    ds.features = Matrix(classes * per_class, d);
    ds.labels.emplace();
    std::size_t r = 0;
    for (std::size_t c = first_class; c < first_class + classes; ++c) {
      for (std::size_t i = 0; i < per_class; ++i, ++r) {
        auto row = ds.features.row(r);
        for (std::size_t k = 0; k < cd; ++k) row[k] = centers(c, k) + spec.within_std * rng.normal();
        for (std::size_t k = cd; k < d; ++k) row[k] = spec.nuisance_std * rng.normal();
        if (spec.stretch > 0.0) {
          const double t =
              spec.stretch * ((static_cast<double>(i) + rng.uniform01()) / static_cast<double>(per_class) - 0.5);
          for (std::size_t k = dir_begin; k < d; ++k) row[k] += t * direction[k];
        }
        ds.labels->push_back(static_cast<int>(c));
      }
    }
    return ds;
  };
  Dataset train = make(0, spec.num_classes, spec.points_per_class, Split::kTrain);
  Dataset test = make(spec.num_classes, spec.heldout_classes, spec.heldout_points_per_class, Split::kTest);
  return {std::move(train), std::move(test)};
}

MatrixFormat matrix_format_from_string(const std::string& name) {
  if (name == "raw64") return MatrixFormat::kRaw64;
  if (name == "dsv") return MatrixFormat::kDsv;
  if (name == "idx") return MatrixFormat::kIdx;
  fail(ErrorKind::kConfig, "unknown matrix format '" + name + "'");
}

const char* to_string(MatrixFormat f) noexcept {
  switch (f) {
    case MatrixFormat::kRaw64: return "raw64";
    case MatrixFormat::kDsv: return "dsv";
    case MatrixFormat::kIdx: return "idx";
  }
  return "unknown";
}

void write_raw64(const std::string& path, const Matrix& m) {
  std::ostringstream out;
  binary::put_u32(out, kRaw64Magic);
  binary::put_u32(out, static_cast<std::uint32_t>(m.rows()));
  binary::put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (double v : m.values()) binary::put_f64(out, v);
  binary::write_atomically(path, out.str());
}

Matrix read_raw64(const std::string& path) {
  std::ifstream in = open_binary(path);
  binary::Reader r(in, path);
  require(r.u32() == kRaw64Magic, ErrorKind::kParse, path + ": header mismatch at byte offset 0");
  const std::uint32_t n = r.u32();
  const std::uint32_t d = r.u32();
  Matrix m(n, d);
  for (double& v : m.values()) {
    const std::uint64_t at = r.offset();
    v = r.f64();
    require(std::isfinite(v), ErrorKind::kInput,
            path + ": non-finite value at byte offset " + std::to_string(at));
  }
  require(r.at_end(), ErrorKind::kParse,
          path + ": trailing bytes after byte offset " + std::to_string(r.offset()));
  return m;
}

void write_labels(const std::string& path, const std::vector<int>& labels) {
  std::string text;
  for (int l : labels) text += std::to_string(l) + "\n";
  binary::write_atomically(path, text);
}

std::vector<int> read_labels(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot open " + path);
  std::vector<int> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    int v;
    require(parse_int(line, v), ErrorKind::kParse,
            path + ": line " + std::to_string(line_no) + ": not an integer label");
    out.push_back(v);
  }
  return out;
}

Matrix read_dsv(const std::string& path, char delimiter, bool label_column,
                std::vector<int>* labels) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot open " + path);
  std::vector<double> values;
  std::size_t cols = 0, rows = 0, line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::vector<std::string> fields = split_fields(line, delimiter);
    const std::string where = path + ": line " + std::to_string(line_no);
    const std::size_t width = fields.size() - (label_column ? 1 : 0);
    require(fields.size() > (label_column ? 1u : 0u), ErrorKind::kParse, where + ": no feature columns");
    if (rows == 0) cols = width;
    require(width == cols, ErrorKind::kParse,
            where + ": ragged row with " + std::to_string(width) + " features, expected " +
                std::to_string(cols));
    for (std::size_t k = 0; k < width; ++k) {
      double v;
      require(parse_double(fields[k], v), ErrorKind::kParse,
              where + ": non-numeric field " + std::to_string(k + 1));
      require(std::isfinite(v), ErrorKind::kInput,
              where + ": non-finite field " + std::to_string(k + 1));
      values.push_back(v);
    }
    if (label_column) {
      int l;
      require(parse_int(fields.back(), l), ErrorKind::kParse, where + ": label is not an integer");
      if (labels) labels->push_back(l);
    }
    ++rows;
  }
  require(rows > 0, ErrorKind::kParse, path + ": no data rows");
  return Matrix(rows, cols, std::move(values));
}

namespace {

std::vector<std::uint32_t> read_idx_header(binary::Reader& r, const std::string& path) {
  char magic[4];
  r.bytes(magic, 4);
  require(magic[0] == 0 && magic[1] == 0, ErrorKind::kParse, path + ": header mismatch at byte offset 0");
  require(static_cast<unsigned char>(magic[2]) == 0x08, ErrorKind::kParse,
          path + ": only unsigned byte idx data is supported (byte offset 2)");
  const int ndim = static_cast<unsigned char>(magic[3]);
  require(ndim >= 1, ErrorKind::kParse, path + ": zero dimensions at byte offset 3");
  std::vector<std::uint32_t> dims;
  for (int i = 0; i < ndim; ++i) dims.push_back(r.u32_big_endian());
  return dims;
}

}  // namespace

Matrix read_idx_images(const std::string& path) {
  std::ifstream in = open_binary(path);
  binary::Reader r(in, path);
  const auto dims = read_idx_header(r, path);
  std::size_t width = 1;
  for (std::size_t i = 1; i < dims.size(); ++i) width *= dims[i];
  Matrix m(dims[0], width);
  std::vector<unsigned char> buf(m.size());
  r.bytes(reinterpret_cast<char*>(buf.data()), buf.size());
  for (std::size_t i = 0; i < buf.size(); ++i) m.data()[i] = buf[i] / 255.0;
  require(r.at_end(), ErrorKind::kParse,
          path + ": trailing bytes after byte offset " + std::to_string(r.offset()));
  return m;
}

std::vector<int> read_idx_labels(const std::string& path) {
  std::ifstream in = open_binary(path);
  binary::Reader r(in, path);
  const auto dims = read_idx_header(r, path);
  require(dims.size() == 1, ErrorKind::kParse, path + ": label file must be one-dimensional");
  std::vector<unsigned char> buf(dims[0]);
  r.bytes(reinterpret_cast<char*>(buf.data()), buf.size());
  return {buf.begin(), buf.end()};
}

Dataset load_matrix_dataset(const std::string& path, MatrixFormat format,
                            const LoadOptions& options) {
  Dataset ds;
  switch (format) {
    case MatrixFormat::kRaw64:
      ds.features = read_raw64(path);
      if (!options.labels_path.empty()) ds.labels = read_labels(options.labels_path);
      break;
    case MatrixFormat::kDsv: {
      std::vector<int> labels;
      ds.features = read_dsv(path, options.delimiter, options.label_column, &labels);
      if (options.label_column) ds.labels = std::move(labels);
      break;
    }
    case MatrixFormat::kIdx:
      ds.features = read_idx_images(path);
      if (!options.labels_path.empty()) ds.labels = read_idx_labels(options.labels_path);
      break;
  }
  ds.validate();
  return ds;
}

}  // namespace uflst
