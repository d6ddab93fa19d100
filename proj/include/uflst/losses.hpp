#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "uflst/episodes.hpp"
#include "uflst/gradcheck.hpp"
#include "uflst/matrix.hpp"

namespace uflst {

enum class LossKind {
  kPrototype,          // -log softmax(-||z - c||^2) over episode prototypes
  kTriplet,            // hinge, averaged over every valid triplet of the episode
  kSoftMarginTriplet,  // log(1 + exp(.)), averaged over every valid triplet
  kHardTriplet,        // batch-hard mined triplets (hinge, or soft margin if asked)
};

LossKind loss_kind_from_string(const std::string& name);
const char* to_string(LossKind k) noexcept;

struct LossConfig {
  LossKind kind = LossKind::kHardTriplet;
  double margin = 0.5;
  bool hard_soft_margin = false;  // kHardTriplet only

  void validate() const;
};

// Numerically safe log(1 + exp(x)).
double softplus(double x) noexcept;

struct TripletTerm {
  double value = 0.0;
  double pre_activation = 0.0;  // ||a-p||^2 - ||a-n||^2 + m
  std::vector<double> grad_anchor, grad_positive, grad_negative;
};

TripletTerm triplet_hinge_loss(std::span<const double> anchor, std::span<const double> positive,
                               std::span<const double> negative, double margin);
TripletTerm triplet_soft_margin_loss(std::span<const double> anchor,
                                     std::span<const double> positive,
                                     std::span<const double> negative, double margin);

struct Triplet {
  std::size_t anchor, positive, negative;
  friend bool operator==(const Triplet&, const Triplet&) = default;
};

struct MiningResult {
  std::vector<Triplet> triplets;
  std::size_t skipped_anchors = 0;  // anchors without a positive or a negative
};

// Per anchor: farthest same-class row and nearest other-class row by squared
// distance, ties to the lower index.
MiningResult mine_hard_triplets(const Matrix& embeddings, std::span<const int> classes);

// Every (anchor, positive, negative) with positive != anchor.
std::vector<Triplet> all_triplets(std::span<const int> classes);

// Rows of `embeddings` grouped into a prototype problem.
struct PrototypeLayout {
  std::vector<std::vector<std::size_t>> support;  // per class
  std::vector<std::size_t> query_rows;
  std::vector<int> query_class;  // index into support
};

PrototypeLayout prototype_layout(const EpisodicTask& task);

Matrix prototypes(const Matrix& embeddings, const PrototypeLayout& layout);

// softmax(-||z - c_k||^2) over k.
std::vector<double> prototype_probabilities(std::span<const double> query, const Matrix& protos);

// Mean over queries of -log p(true class); gradient flows into both query
// and support rows.
LossEvaluation prototype_loss(const Matrix& embeddings, const PrototypeLayout& layout);

// Mean of the chosen triplet loss over `triplets`.
LossEvaluation triplet_batch_loss(const Matrix& embeddings, std::span<const Triplet> triplets,
                                  double margin, bool soft_margin);

// Loss for an episode whose rows are in task.flat_indices() order.
LossEvaluation episode_loss(const EpisodicTask& task, const Matrix& embeddings,
                            const LossConfig& cfg);

EmbeddingLoss make_episode_loss(EpisodicTask task, LossConfig cfg);

}  // namespace uflst
