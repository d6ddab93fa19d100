#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "uflst/matrix.hpp"

namespace uflst {

// knn[i] holds the k nearest other points of i (self excluded), ordered by
// ascending distance with ties broken by ascending index.
struct NeighborSets {
  std::size_t k = 0;
  std::size_t k_requested = 0;
  bool clamped = false;  // k_requested >= N, reduced to N - 1
  std::vector<std::vector<std::uint32_t>> knn;
};

// reciprocal[i] = { j in knn[i] : i in knn[j] }, sorted ascending.
using ReciprocalSets = std::vector<std::vector<std::uint32_t>>;

struct JaccardMatrix {
  Matrix values;
  std::size_t k_used = 0;
};

// Squared Euclidean distances between rows; symmetric with exact zero diagonal.
Matrix pairwise_sq_euclidean(const Matrix& embeddings);

NeighborSets knn_sets(const Matrix& distances, std::size_t k);

ReciprocalSets k_reciprocal_sets(const NeighborSets& neighbors);

// J_ij = 1 - |R_i n R_j| / |R_i u R_j|. Two empty sets are at distance 1
// (off-diagonal); the diagonal is 0.
JaccardMatrix jaccard_matrix(const ReciprocalSets& reciprocal, std::size_t k_used);

// Embeddings -> distances -> neighbors -> reciprocal sets -> Jaccard.
JaccardMatrix krjd(const Matrix& embeddings, std::size_t k, bool* clamped = nullptr);

// Dump layout: "KRJD" magic, u32 version 1, u32 N, u32 k, then N*N f64
// row-major, all little-endian.
void write_jaccard_dump(const std::string& path, const JaccardMatrix& j);
JaccardMatrix read_jaccard_dump(const std::string& path);

}  // namespace uflst
