#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"
#include "uflst/binary_io.hpp"
#include "uflst/data_io.hpp"

using namespace uflst;

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::string error_message(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("synthetic shapes and class-disjoint labels") {
  const auto [train, test] = generate_synthetic(SyntheticSpec{});
  CHECK(train.features.rows() == 1000);
  CHECK(train.features.cols() == 32);
  CHECK(test.features.rows() == 250);
  CHECK(test.features.cols() == 32);
  CHECK(train.split == Split::kTrain);
  CHECK(test.split == Split::kTest);
  for (int l : *train.labels) CHECK((l >= 0 && l < 20));
  for (int l : *test.labels) CHECK((l >= 20 && l < 25));
}

TEST_CASE("synthetic generation is deterministic per seed") {
  SyntheticSpec spec;
  spec.stretch = 3.0;
  spec.center_dim = 4;
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  CHECK(std::equal(a.first.features.values().begin(), a.first.features.values().end(),
                   b.first.features.values().begin()));
  spec.seed = 1;
  const auto c = generate_synthetic(spec);
  CHECK_FALSE(std::equal(a.first.features.values().begin(), a.first.features.values().end(),
                         c.first.features.values().begin()));
}

TEST_CASE("separation over std of 10 is separable by nearest centroid") {
  SyntheticSpec spec;
  spec.separation = 1.0;
  spec.within_std = 0.1;
  const auto [train, test] = generate_synthetic(spec);
  const std::size_t d = train.features.cols();
  std::vector<std::vector<double>> centroid(20, std::vector<double>(d, 0.0));
  std::vector<int> count(20, 0);
  for (std::size_t i = 0; i < train.features.rows(); ++i) {
    const auto c = static_cast<std::size_t>((*train.labels)[i]);
    for (std::size_t k = 0; k < d; ++k) centroid[c][k] += train.features(i, k);
    ++count[c];
  }
  for (std::size_t c = 0; c < 20; ++c)
    for (double& v : centroid[c]) v /= count[c];
  std::size_t correct = 0;
  for (std::size_t i = 0; i < train.features.rows(); ++i) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < 20; ++c) {
      double s = 0;
      for (std::size_t k = 0; k < d; ++k) s += std::pow(train.features(i, k) - centroid[c][k], 2);
      if (s < best_d) best_d = s, best = c;
    }
    correct += static_cast<int>(best) == (*train.labels)[i];
  }
  CHECK(static_cast<double>(correct) / 1000.0 > 0.99);
}

TEST_CASE("zero separation puts every class on the origin") {
  SyntheticSpec spec;
  spec.separation = 0.0;
  spec.within_std = 0.0;
  const auto [train, test] = generate_synthetic(spec);
  for (double v : train.features.values()) CHECK(v == 0.0);
}

TEST_CASE("stretch moves points along one shared direction") {
  SyntheticSpec spec;
  spec.within_std = 0.0;
  spec.center_dim = 4;
  spec.stretch = 8.0;
  spec.points_per_class = 10;
  const auto [train, test] = generate_synthetic(spec);
  // Same class: differences lie on a single line outside the center block.
  for (std::size_t k = 0; k < 4; ++k) CHECK(train.features(0, k) == doctest::Approx(train.features(9, k)));
  double spread = 0;
  for (std::size_t k = 4; k < 32; ++k) spread += std::pow(train.features(9, k) - train.features(0, k), 2);
  CHECK(std::sqrt(spread) > 5.0);
  CHECK(std::sqrt(spread) < 8.0);
}

TEST_CASE("SyntheticSpec validation") {
  SyntheticSpec spec;
  spec.center_dim = 40;
  CHECK(testutil::error_kind([&] { spec.validate(); }) == ErrorKind::kConfig);
  spec = SyntheticSpec{};
  spec.within_std = -1;
  CHECK(testutil::error_kind([&] { spec.validate(); }) == ErrorKind::kConfig);
}

TEST_CASE("raw64 round trip is bitwise exact") {
  const std::string dir = testutil::scratch_dir("raw64");
  Matrix m = testutil::random_matrix(7, 5, 3);
  m(0, 0) = -0.0;
  m(1, 1) = std::numeric_limits<double>::denorm_min();
  write_raw64(dir + "/m.raw64", m);
  const Matrix back = read_raw64(dir + "/m.raw64");
  REQUIRE(back.rows() == 7);
  REQUIRE(back.cols() == 5);
  CHECK(std::memcmp(back.values().data(), m.values().data(), 35 * sizeof(double)) == 0);

  const std::vector<int> labels{3, -1, 0, 12};
  write_labels(dir + "/l.txt", labels);
  CHECK(read_labels(dir + "/l.txt") == labels);

  write_labels(dir + "/l7.txt", {0, 0, 1, 1, 2, 2, 3});
  LoadOptions opts;
  opts.labels_path = dir + "/l7.txt";
  const Dataset ds = load_matrix_dataset(dir + "/m.raw64", MatrixFormat::kRaw64, opts);
  CHECK(ds.labels->size() == 7);
}

TEST_CASE("raw64 rejects bad headers, truncation and non-finite values") {
  const std::string dir = testutil::scratch_dir("raw64bad");
  write_raw64(dir + "/m.raw64", testutil::random_matrix(2, 2, 1));
  std::ifstream in(dir + "/m.raw64", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});

  std::string wrong = bytes;
  wrong[0] = 'X';
  write_text(dir + "/magic.raw64", wrong);
  CHECK(testutil::error_kind([&] { read_raw64(dir + "/magic.raw64"); }) == ErrorKind::kParse);
  write_text(dir + "/short.raw64", bytes.substr(0, bytes.size() - 3));
  CHECK(testutil::error_kind([&] { read_raw64(dir + "/short.raw64"); }) == ErrorKind::kFormat);
  write_text(dir + "/long.raw64", bytes + "x");
  CHECK(testutil::error_kind([&] { read_raw64(dir + "/long.raw64"); }) == ErrorKind::kParse);
  std::string with_nan = bytes;
  const double inf = std::numeric_limits<double>::infinity();
  std::memcpy(with_nan.data() + 12, &inf, sizeof(double));
  write_text(dir + "/inf.raw64", with_nan);
  CHECK(testutil::error_kind([&] { read_raw64(dir + "/inf.raw64"); }).has_value());
  CHECK(testutil::error_kind([&] { read_raw64(dir + "/missing.raw64"); }) == ErrorKind::kIo);
}

TEST_CASE("dsv parsing") {
  const std::string dir = testutil::scratch_dir("dsv");
  write_text(dir + "/ok.csv", "1,2,3\n4.5,-6,7e-1\n");
  const Matrix m = read_dsv(dir + "/ok.csv", ',', false, nullptr);
  CHECK(m.rows() == 2);
  CHECK(m(1, 2) == 0.7);

  write_text(dir + "/lab.tsv", "1\t2\t5\n3\t4\t6\n");
  std::vector<int> labels;
  const Matrix l = read_dsv(dir + "/lab.tsv", '\t', true, &labels);
  CHECK(l.cols() == 2);
  CHECK(labels == std::vector<int>{5, 6});

  write_text(dir + "/ws.txt", "1  2\n 3 4 \n");
  CHECK(read_dsv(dir + "/ws.txt", ' ', false, nullptr)(1, 0) == 3.0);

  write_text(dir + "/ragged.csv", "1,2,3\n4,5,6\n7,8\n");
  CHECK(testutil::error_kind([&] { read_dsv(dir + "/ragged.csv", ',', false, nullptr); }) == ErrorKind::kParse);
  CHECK(error_message([&] { read_dsv(dir + "/ragged.csv", ',', false, nullptr); }).find("line 3") !=
        std::string::npos);

  write_text(dir + "/text.csv", "1,2\n3,abc\n");
  CHECK(error_message([&] { read_dsv(dir + "/text.csv", ',', false, nullptr); }).find("line 2") !=
        std::string::npos);
  write_text(dir + "/nan.csv", "1,nan\n");
  CHECK(testutil::error_kind([&] { read_dsv(dir + "/nan.csv", ',', false, nullptr); }).has_value());
}

TEST_CASE("idx fixture of four 2x2 images") {
  const std::string dir = testutil::scratch_dir("idx");
  // 4-byte magic, three 4-byte big-endian dims, 16 pixel bytes: 32 bytes.
  std::vector<std::uint8_t> bytes{0, 0, 0x08, 3, 0, 0, 0, 4, 0, 0, 0, 2, 0, 0, 0, 2};
  for (int i = 0; i < 16; ++i) bytes.push_back(static_cast<std::uint8_t>(i * 17));
  REQUIRE(bytes.size() == 32);
  write_bytes(dir + "/img.idx", bytes);
  const Matrix m = read_idx_images(dir + "/img.idx");
  REQUIRE(m.rows() == 4);
  REQUIRE(m.cols() == 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t k = 0; k < 4; ++k) CHECK(m(i, k) == (static_cast<double>((i * 4 + k) * 17)) / 255.0);

  write_bytes(dir + "/lab.idx", {0, 0, 0x08, 1, 0, 0, 0, 4, 3, 1, 4, 1});
  CHECK(read_idx_labels(dir + "/lab.idx") == std::vector<int>{3, 1, 4, 1});
  LoadOptions opts;
  opts.labels_path = dir + "/lab.idx";
  CHECK(load_matrix_dataset(dir + "/img.idx", MatrixFormat::kIdx, opts).labels->size() == 4);

  bytes[2] = 0x0D;
  write_bytes(dir + "/float.idx", bytes);
  CHECK(testutil::error_kind([&] { read_idx_images(dir + "/float.idx"); }) == ErrorKind::kParse);
  bytes[2] = 0x08;
  bytes.pop_back();
  write_bytes(dir + "/short.idx", bytes);
  CHECK(testutil::error_kind([&] { read_idx_images(dir + "/short.idx"); }) == ErrorKind::kFormat);
}

TEST_CASE("format names") {
  CHECK(matrix_format_from_string("dsv") == MatrixFormat::kDsv);
  CHECK(std::string(to_string(MatrixFormat::kIdx)) == "idx");
  CHECK(testutil::error_kind([] { matrix_format_from_string("png"); }) == ErrorKind::kConfig);
}
