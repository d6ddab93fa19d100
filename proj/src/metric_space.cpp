#include "uflst/metric_space.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "uflst/binary_io.hpp"
#include "uflst/error.hpp"
#include "uflst/kernels.hpp"
#include "uflst/parallel.hpp"

namespace uflst {

Matrix pairwise_sq_euclidean(const Matrix& embeddings) {
  require(embeddings.rows() >= 1, ErrorKind::kInput, "need at least one point");
  require(embeddings.all_finite(), ErrorKind::kInput, "non-finite embedding");
  const std::size_t n = embeddings.rows();
  Matrix d(n, n);
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      d(i, j) = kernels::squared_distance(embeddings.row(i), embeddings.row(j));
    }
  });
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) d(i, j) = d(j, i);
  return d;
}

NeighborSets knn_sets(const Matrix& distances, std::size_t k) {
  const std::size_t n = distances.rows();
  require(distances.cols() == n, ErrorKind::kContractViolation, "distance matrix must be square");
  require(k >= 1, ErrorKind::kContractViolation, "k must be positive");
  NeighborSets out;
  out.k_requested = k;
  out.k = n == 0 ? 0 : std::min(k, n - 1);
  out.clamped = out.k != k;
  out.knn.resize(n);
  parallel_for(n, [&](std::size_t i) {
    std::vector<std::uint32_t> order;
    order.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) order.push_back(static_cast<std::uint32_t>(j));
    auto row = distances.row(i);
    auto closer = [&](std::uint32_t a, std::uint32_t b) {
      return row[a] < row[b] || (row[a] == row[b] && a < b);
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(out.k), order.end(), closer);
    order.resize(out.k);
    out.knn[i] = std::move(order);
  });
  return out;
}

ReciprocalSets k_reciprocal_sets(const NeighborSets& neighbors) {
  const std::size_t n = neighbors.knn.size();
  ReciprocalSets r(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::uint32_t j : neighbors.knn[i]) {
      const auto& back = neighbors.knn[j];
      if (std::find(back.begin(), back.end(), static_cast<std::uint32_t>(i)) != back.end()) {
        r[i].push_back(j);
      }
    }
    std::sort(r[i].begin(), r[i].end());
  }
  return r;
}

JaccardMatrix jaccard_matrix(const ReciprocalSets& reciprocal, std::size_t k_used) {
  const std::size_t n = reciprocal.size();
  // members[e] = points whose reciprocal set contains e
  std::vector<std::vector<std::uint32_t>> members(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::uint32_t e : reciprocal[i]) members[e].push_back(static_cast<std::uint32_t>(i));

  JaccardMatrix out{Matrix(n, n, 1.0), k_used};
  parallel_for(n, [&](std::size_t i) {
    std::vector<std::uint32_t> shared(n, 0);
    std::vector<std::uint32_t> touched;
    for (std::uint32_t e : reciprocal[i]) {
      for (std::uint32_t j : members[e]) {
        if (shared[j]++ == 0) touched.push_back(j);
      }
    }
    auto row = out.values.row(i);
    const std::size_t size_i = reciprocal[i].size();
    for (std::uint32_t j : touched) {
      const std::size_t inter = shared[j];
      const std::size_t uni = size_i + reciprocal[j].size() - inter;
      row[j] = 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
    }
    row[i] = 0.0;
  });
  return out;
}

JaccardMatrix krjd(const Matrix& embeddings, std::size_t k, bool* clamped) {
  const NeighborSets nb = knn_sets(pairwise_sq_euclidean(embeddings), k);
  if (clamped) *clamped = nb.clamped;
  return jaccard_matrix(k_reciprocal_sets(nb), nb.k);
}

void write_jaccard_dump(const std::string& path, const JaccardMatrix& j) {
  std::ostringstream out(std::ios::binary);
  out.write("KRJD", 4);
  binary::put_u32(out, 1);
  binary::put_u32(out, static_cast<std::uint32_t>(j.values.rows()));
  binary::put_u32(out, static_cast<std::uint32_t>(j.k_used));
  for (double v : j.values.values()) binary::put_f64(out, v);
  binary::write_atomically(path, out.str());
}

JaccardMatrix read_jaccard_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot open " + path);
  binary::Reader r(in, path);
  char magic[4];
  r.bytes(magic, 4);
  require(std::memcmp(magic, "KRJD", 4) == 0, ErrorKind::kFormat, path + ": bad magic bytes");
  require(r.u32() == 1, ErrorKind::kFormat, path + ": unsupported version");
  const std::uint32_t n = r.u32();
  JaccardMatrix j{Matrix(n, n), r.u32()};
  for (double& v : j.values.values()) v = r.f64();
  return j;
}

}  // namespace uflst
