#include "uflst/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "uflst/error.hpp"
#include "uflst/kernels.hpp"

namespace uflst {

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

Matrix pairwise(const Matrix& z) {
  Matrix d(z.rows(), z.rows());
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = i + 1; j < z.rows(); ++j)
      d(i, j) = d(j, i) = kernels::squared_distance(z.row(i), z.row(j));
  return d;
}

// grad_i = sum_j 2 (C_ij + C_ji) (z_i - z_j) for L depending on d_ij = ||z_i - z_j||^2.
Matrix distance_gradient(const Matrix& z, const Matrix& coef) {
  Matrix g(z.rows(), z.cols());
  std::vector<double> diff(z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    for (std::size_t j = 0; j < z.rows(); ++j) {
      const double c = coef(i, j) + coef(j, i);
      if (i == j || c == 0.0) continue;
      auto zi = z.row(i);
      auto zj = z.row(j);
      for (std::size_t k = 0; k < z.cols(); ++k) diff[k] = zi[k] - zj[k];
      kernels::axpy(2.0 * c, diff, g.row(i));
    }
  }
  return g;
}

TripletTerm triplet_term(std::span<const double> a, std::span<const double> p,
                         std::span<const double> n, double margin, bool soft) {
  require(a.size() == p.size() && a.size() == n.size(), ErrorKind::kContractViolation,
          "triplet embeddings differ in width");
  TripletTerm t;
  t.pre_activation = kernels::squared_distance(a, p) - kernels::squared_distance(a, n) + margin;
  double slope;
  if (soft) {
    t.value = softplus(t.pre_activation);
    slope = 1.0 / (1.0 + std::exp(-t.pre_activation));
  } else {
    t.value = std::max(0.0, t.pre_activation);
    slope = t.pre_activation > 0.0 ? 1.0 : 0.0;
  }
  const std::size_t d = a.size();
  t.grad_anchor.resize(d);
  t.grad_positive.resize(d);
  t.grad_negative.resize(d);
  for (std::size_t k = 0; k < d; ++k) {
    t.grad_anchor[k] = slope * 2.0 * (n[k] - p[k]);
    t.grad_positive[k] = slope * -2.0 * (a[k] - p[k]);
    t.grad_negative[k] = slope * 2.0 * (a[k] - n[k]);
  }
  return t;
}

}  // namespace

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "prototype") return LossKind::kPrototype;
  if (name == "triplet") return LossKind::kTriplet;
  if (name == "soft_margin_triplet") return LossKind::kSoftMarginTriplet;
  if (name == "hard_triplet") return LossKind::kHardTriplet;
  fail(ErrorKind::kConfig, "unknown loss kind '" + name + "'");
}

const char* to_string(LossKind k) noexcept {
  switch (k) {
    case LossKind::kPrototype: return "prototype";
    case LossKind::kTriplet: return "triplet";
    case LossKind::kSoftMarginTriplet: return "soft_margin_triplet";
    case LossKind::kHardTriplet: return "hard_triplet";
  }
  return "unknown";
}

void LossConfig::validate() const {
  require(margin >= 0.0 && std::isfinite(margin), ErrorKind::kConfig, "margin must be >= 0");
}

double softplus(double x) noexcept {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

TripletTerm triplet_hinge_loss(std::span<const double> anchor, std::span<const double> positive,
                               std::span<const double> negative, double margin) {
  return triplet_term(anchor, positive, negative, margin, false);
}

TripletTerm triplet_soft_margin_loss(std::span<const double> anchor,
                                     std::span<const double> positive,
                                     std::span<const double> negative, double margin) {
  return triplet_term(anchor, positive, negative, margin, true);
}

MiningResult mine_hard_triplets(const Matrix& embeddings, std::span<const int> classes) {
  require(classes.size() == embeddings.rows(), ErrorKind::kContractViolation,
          "one class tag per embedding row expected");
  const Matrix d = pairwise(embeddings);
  MiningResult out;
  const std::size_t n = embeddings.rows();
  for (std::size_t a = 0; a < n; ++a) {
    std::size_t pos = n, neg = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == a) continue;
      if (classes[j] == classes[a]) {
        if (pos == n || d(a, j) > d(a, pos)) pos = j;
      } else if (neg == n || d(a, j) < d(a, neg)) {
        neg = j;
      }
    }
    if (pos == n || neg == n) {
      ++out.skipped_anchors;
      continue;
    }
    out.triplets.push_back({a, pos, neg});
  }
  return out;
}

std::vector<Triplet> all_triplets(std::span<const int> classes) {
  std::vector<Triplet> out;
  const std::size_t n = classes.size();
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t p = 0; p < n; ++p) {
      if (p == a || classes[p] != classes[a]) continue;
      for (std::size_t q = 0; q < n; ++q)
        if (classes[q] != classes[a]) out.push_back({a, p, q});
    }
  return out;
}

LossEvaluation triplet_batch_loss(const Matrix& embeddings, std::span<const Triplet> triplets,
                                  double margin, bool soft_margin) {
  require(!triplets.empty(), ErrorKind::kContractViolation, "no valid triplet in batch");
  const Matrix d = pairwise(embeddings);
  const std::size_t n = embeddings.rows();
  Matrix coef(n, n);
  LossEvaluation ev;
  const double inv = 1.0 / static_cast<double>(triplets.size());
  double total = 0.0;
  std::uint64_t sig = 0;
  for (const Triplet& t : triplets) {
    const double x = d(t.anchor, t.positive) - d(t.anchor, t.negative) + margin;
    double value, slope;
    if (soft_margin) {
      value = softplus(x);
      slope = 1.0 / (1.0 + std::exp(-x));
    } else {
      value = std::max(0.0, x);
      slope = x > 0.0 ? 1.0 : 0.0;
      sig = mix(sig, x > 0.0 ? 1 : 0);
    }
    total += value;
    coef(t.anchor, t.positive) += slope * inv;
    coef(t.anchor, t.negative) -= slope * inv;
  }
  ev.value = total * inv;
  ev.grad = distance_gradient(embeddings, coef);
  ev.branch_signature = sig;
  return ev;
}

PrototypeLayout prototype_layout(const EpisodicTask& task) {
  require(task.split, ErrorKind::kContractViolation, "prototype loss needs a support/query split");
  PrototypeLayout layout;
  std::size_t row = 0;
  for (std::size_t c = 0; c < task.members.size(); ++c) {
    std::vector<std::size_t> sup;
    for (std::size_t i = 0; i < task.members[c].size(); ++i, ++row) {
      if (i < task.support_shots) {
        sup.push_back(row);
      } else {
        layout.query_rows.push_back(row);
        layout.query_class.push_back(static_cast<int>(c));
      }
    }
    layout.support.push_back(std::move(sup));
  }
  return layout;
}

Matrix prototypes(const Matrix& embeddings, const PrototypeLayout& layout) {
  Matrix c(layout.support.size(), embeddings.cols());
  for (std::size_t k = 0; k < layout.support.size(); ++k) {
    require(!layout.support[k].empty(), ErrorKind::kContractViolation, "class without support");
    for (std::size_t r : layout.support[k]) kernels::axpy(1.0, embeddings.row(r), c.row(k));
    const double inv = 1.0 / static_cast<double>(layout.support[k].size());
    for (double& v : c.row(k)) v *= inv;
  }
  return c;
}

std::vector<double> prototype_probabilities(std::span<const double> query, const Matrix& protos) {
  std::vector<double> logits(protos.rows());
  for (std::size_t k = 0; k < protos.rows(); ++k) logits[k] = -kernels::squared_distance(query, protos.row(k));
  const double top = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double& l : logits) z += (l = std::exp(l - top));
  for (double& l : logits) l /= z;
  return logits;
}

LossEvaluation prototype_loss(const Matrix& embeddings, const PrototypeLayout& layout) {
  const std::size_t way = layout.support.size();
  require(way >= 2, ErrorKind::kContractViolation, "prototype loss needs at least two classes");
  require(!layout.query_rows.empty(), ErrorKind::kContractViolation, "no query rows");
  for (int c : layout.query_class) {
    require(c >= 0 && static_cast<std::size_t>(c) < way && !layout.support[static_cast<std::size_t>(c)].empty(),
            ErrorKind::kContractViolation, "query class absent from the support set");
  }
  const Matrix protos = prototypes(embeddings, layout);
  const std::size_t dim = embeddings.cols();
  const double inv_q = 1.0 / static_cast<double>(layout.query_rows.size());

  LossEvaluation ev;
  ev.grad = Matrix(embeddings.rows(), dim);
  Matrix proto_grad(way, dim);
  std::vector<double> dist(way), diff(dim);
  double total = 0.0;
  for (std::size_t qi = 0; qi < layout.query_rows.size(); ++qi) {
    auto z = embeddings.row(layout.query_rows[qi]);
    const auto target = static_cast<std::size_t>(layout.query_class[qi]);
    for (std::size_t k = 0; k < way; ++k) dist[k] = kernels::squared_distance(z, protos.row(k));
    const double nearest = *std::min_element(dist.begin(), dist.end());
    double z_sum = 0.0;
    for (std::size_t k = 0; k < way; ++k) z_sum += std::exp(-(dist[k] - nearest));
    // -log softmax = d_target + logsumexp(-d)
    total += dist[target] - nearest + std::log(z_sum);
    for (std::size_t k = 0; k < way; ++k) {
      const double prob = std::exp(-(dist[k] - nearest)) / z_sum;
      const double a = ((k == target ? 1.0 : 0.0) - prob) * inv_q;
      if (a == 0.0) continue;
      auto c = protos.row(k);
      for (std::size_t j = 0; j < dim; ++j) diff[j] = z[j] - c[j];
      kernels::axpy(2.0 * a, diff, ev.grad.row(layout.query_rows[qi]));
      kernels::axpy(-2.0 * a, diff, proto_grad.row(k));
    }
  }
  for (std::size_t k = 0; k < way; ++k) {
    const double share = 1.0 / static_cast<double>(layout.support[k].size());
    for (std::size_t r : layout.support[k]) kernels::axpy(share, proto_grad.row(k), ev.grad.row(r));
  }
  ev.value = total * inv_q;
  return ev;
}

LossEvaluation episode_loss(const EpisodicTask& task, const Matrix& embeddings,
                            const LossConfig& cfg) {
  const std::vector<int> classes = task.flat_classes();
  require(classes.size() == embeddings.rows(), ErrorKind::kContractViolation,
          "embedding rows do not match the episode");
  switch (cfg.kind) {
    case LossKind::kPrototype:
      return prototype_loss(embeddings, prototype_layout(task));
    case LossKind::kTriplet:
      return triplet_batch_loss(embeddings, all_triplets(classes), cfg.margin, false);
    case LossKind::kSoftMarginTriplet:
      return triplet_batch_loss(embeddings, all_triplets(classes), cfg.margin, true);
    case LossKind::kHardTriplet: {
      const MiningResult mined = mine_hard_triplets(embeddings, classes);
      LossEvaluation ev = triplet_batch_loss(embeddings, mined.triplets, cfg.margin, cfg.hard_soft_margin);
      std::uint64_t sig = ev.branch_signature;
      for (const Triplet& t : mined.triplets) sig = mix(mix(sig, t.positive), t.negative);
      ev.branch_signature = sig;
      return ev;
    }
  }
  fail(ErrorKind::kContractViolation, "unknown loss kind");
}

EmbeddingLoss make_episode_loss(EpisodicTask task, LossConfig cfg) {
  return [task = std::move(task), cfg](const Matrix& embeddings) {
    return episode_loss(task, embeddings, cfg);
  };
}

}  // namespace uflst
