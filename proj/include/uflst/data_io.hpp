#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uflst/matrix.hpp"

namespace uflst {

enum class Split { kTrain, kTest };

// Features plus optional ground truth. Training code only ever receives
// `features`; the labels stay with evaluation.
struct Dataset {
  Matrix features;
  std::optional<std::vector<int>> labels;
  Split split = Split::kTrain;

  std::size_t size() const noexcept { return features.rows(); }
  std::size_t dim() const noexcept { return features.cols(); }
  void validate() const;
};

struct SyntheticSpec {
  std::size_t num_classes = 20;
  std::size_t points_per_class = 50;
  std::size_t input_dim = 32;
  double separation = 1.0;  // radius of the sphere holding the class centers
  double within_std = 0.1;
  std::size_t heldout_classes = 5;
  std::size_t heldout_points_per_class = 50;
  // Centers and within-class noise live in the first `center_dim`
  // coordinates (0 = all of them); the remaining coordinates carry
  // class-independent Gaussian noise of std `nuisance_std`.
  std::size_t center_dim = 0;
  double nuisance_std = 0.0;
  // Every point is shifted by t * u along one unit direction u shared by all
  // classes and drawn in the nuisance coordinates (all coordinates when
  // center_dim is 0 or input_dim). Point i of a class draws t uniformly from
  // the i-th of per_class equal slices of [-stretch/2, stretch/2].
  double stretch = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Train labels are 0..num_classes-1; heldout labels continue after them, so
// the two sets are disjoint.
std::pair<Dataset, Dataset> generate_synthetic(const SyntheticSpec& spec);

enum class MatrixFormat { kRaw64, kDsv, kIdx };
MatrixFormat matrix_format_from_string(const std::string& name);
const char* to_string(MatrixFormat f) noexcept;

struct LoadOptions {
  char delimiter = ',';       // dsv; ' ' splits on any run of blanks
  bool label_column = false;  // dsv: last column is an integer label
  std::string labels_path;    // raw64: text labels; idx: idx1 label file
};

Dataset load_matrix_dataset(const std::string& path, MatrixFormat format,
                            const LoadOptions& options = {});

inline constexpr std::uint32_t kRaw64Magic = 0x34365752;  // "RW64"

void write_raw64(const std::string& path, const Matrix& m);
Matrix read_raw64(const std::string& path);

// One integer per line.
void write_labels(const std::string& path, const std::vector<int>& labels);
std::vector<int> read_labels(const std::string& path);

Matrix read_dsv(const std::string& path, char delimiter, bool label_column,
                std::vector<int>* labels);

// idx ubyte tensor (type 0x08), first dimension = rows, the rest flattened,
// bytes scaled by 1/255.
Matrix read_idx_images(const std::string& path);
std::vector<int> read_idx_labels(const std::string& path);

}  // namespace uflst
