#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "doctest.h"
#include "test_util.hpp"
#include "uflst/losses.hpp"
#include "uflst/network.hpp"
#include "uflst/rng.hpp"

using namespace uflst;
using quad = boost::multiprecision::cpp_bin_float_quad;

namespace {

// `way` classes of `per_class` consecutive rows.
EpisodicTask make_task(std::size_t way, std::size_t per_class, std::size_t support_shots = 0) {
  EpisodicTask t;
  std::size_t row = 0;
  for (std::size_t c = 0; c < way; ++c) {
    t.class_ids.push_back(static_cast<int>(c));
    std::vector<std::size_t> m(per_class);
    std::iota(m.begin(), m.end(), row);
    row += per_class;
    t.members.push_back(m);
  }
  t.split = support_shots > 0;
  t.support_shots = support_shots;
  return t;
}

double sq(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// Central differences on the embeddings; coordinates whose branch changes
// are skipped. Returns the largest relative error.
double embedding_fd_error(const EmbeddingLoss& loss, const Matrix& z, std::size_t* checked = nullptr) {
  const LossEvaluation base = loss(z);
  const double h = 1e-5;
  double worst = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t k = 0; k < z.cols(); ++k) {
      Matrix p = z, m = z;
      p(i, k) += h;
      m(i, k) -= h;
      const LossEvaluation lp = loss(p), lm = loss(m);
      if (lp.branch_signature != base.branch_signature || lm.branch_signature != base.branch_signature) continue;
      const double num = (lp.value - lm.value) / (2 * h);
      const double ana = base.grad(i, k);
      const double err = std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-3});
      worst = std::max(worst, err);
      ++n;
    }
  if (checked) *checked = n;
  return worst;
}

}  // namespace

TEST_CASE("K equidistant prototypes give ln K") {
  for (std::size_t k : {2u, 5u, 7u}) {
    // One-hot prototypes, query at the origin: all squared distances 1.
    Matrix z(2 * k, k);
    for (std::size_t c = 0; c < k; ++c) z(2 * c, c) = 1.0;
    PrototypeLayout layout;
    for (std::size_t c = 0; c < k; ++c) {
      layout.support.push_back({2 * c});
      layout.query_rows.push_back(2 * c + 1);
      layout.query_class.push_back(static_cast<int>(c));
    }
    CHECK(std::abs(prototype_loss(z, layout).value - std::log(static_cast<double>(k))) <= 1e-9);
  }
  CHECK(std::log(5.0) == doctest::Approx(1.60944).epsilon(1e-5));
}

TEST_CASE("query on its prototype with the others far away gives loss near zero") {
  Matrix z(4, 1);
  z(0, 0) = 0;
  z(1, 0) = 0;
  z(2, 0) = 1e3;
  z(3, 0) = 1e3;
  PrototypeLayout layout{{{0}, {2}}, {1}, {0}};
  CHECK(prototype_loss(z, layout).value < 1e-12);
}

TEST_CASE("prototypes are support means and probabilities sum to one") {
  const Matrix z = testutil::random_matrix(12, 5, 3);
  const PrototypeLayout layout = prototype_layout(make_task(3, 4, 2));
  const Matrix c = prototypes(z, layout);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t d = 0; d < 5; ++d)
      CHECK(c(k, d) == doctest::Approx((z(4 * k, d) + z(4 * k + 1, d)) / 2).epsilon(1e-15));
  for (std::size_t q : layout.query_rows) {
    const auto p = prototype_probabilities(z.row(q), c);
    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) <= 1e-12);
  }
  const Matrix big = testutil::random_matrix(12, 5, 4, 1e3);
  const auto p = prototype_probabilities(big.row(2), prototypes(big, layout));
  CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) <= 1e-12);
}

TEST_CASE("prototype loss matches a direct softmax and finite differences") {
  const Matrix z = testutil::random_matrix(12, 4, 21);
  const EpisodicTask task = make_task(3, 4, 2);
  const PrototypeLayout layout = prototype_layout(task);
  double expected = 0;
  for (std::size_t qi = 0; qi < layout.query_rows.size(); ++qi) {
    const auto q = z.row(layout.query_rows[qi]);
    std::vector<double> logits;
    for (std::size_t k = 0; k < 3; ++k) {
      std::vector<double> ck(4);
      for (std::size_t d = 0; d < 4; ++d) ck[d] = (z(4 * k, d) + z(4 * k + 1, d)) / 2;
      logits.push_back(-sq(q, ck));
    }
    double denom = 0;
    for (double l : logits) denom += std::exp(l);
    expected -= logits[static_cast<std::size_t>(layout.query_class[qi])] - std::log(denom);
  }
  expected /= static_cast<double>(layout.query_rows.size());
  LossConfig cfg;
  cfg.kind = LossKind::kPrototype;
  CHECK(episode_loss(task, z, cfg).value == doctest::Approx(expected).epsilon(1e-12));
  CHECK(episode_loss(task, z, cfg).value == prototype_loss(z, layout).value);
  CHECK(embedding_fd_error(make_episode_loss(task, cfg), z) < 1e-6);
  // Support rows receive gradient.
  CHECK(std::abs(prototype_loss(z, layout).grad(0, 0)) > 0.0);
}

TEST_CASE("hinge landmarks") {
  // ||a-p||^2 = 1, ||a-n||^2 = 2.
  const std::vector<double> a{0, 0}, p{1, 0}, n{0, std::sqrt(2.0)};
  const TripletTerm inactive = triplet_hinge_loss(a, p, n, 0.5);
  CHECK(inactive.value == 0.0);
  CHECK(std::all_of(inactive.grad_anchor.begin(), inactive.grad_anchor.end(), [](double g) { return g == 0.0; }));
  const std::vector<double> p2{std::sqrt(2.0), 0}, n2{0, 1};
  CHECK(triplet_hinge_loss(a, p2, n2, 0.5).value == doctest::Approx(1.5).epsilon(1e-15));
  // Exactly at the kink: value 0, zero subgradient.
  const std::vector<double> p3{1, 0}, n3{0, 1};
  const TripletTerm kink = triplet_hinge_loss(a, p3, n3, 0.0);
  CHECK(kink.value == 0.0);
  CHECK(kink.grad_positive[0] == 0.0);
}

TEST_CASE("soft-margin landmarks and stability") {
  CHECK(std::abs(softplus(0.0) - std::log(2.0)) <= 1e-12);
  CHECK(softplus(100.0) == doctest::Approx(100.0).epsilon(1e-15));
  CHECK(std::isfinite(softplus(800.0)));
  CHECK(softplus(800.0) == 800.0);
  CHECK(softplus(-800.0) >= 0.0);
  CHECK(softplus(-800.0) < 1e-300);
  const std::vector<double> a{0}, p{1}, n{1};
  CHECK(std::abs(triplet_soft_margin_loss(a, p, n, 0.0).value - std::log(2.0)) <= 1e-12);
}

TEST_CASE("soft-margin matches a 128-bit oracle") {
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    const double x = 60.0 * (rng.uniform01() - 0.5);
    const quad ref = boost::multiprecision::log1p(boost::multiprecision::exp(quad(x)));
    const double got = softplus(x);
    CHECK(std::abs(got - static_cast<double>(ref)) <= 1e-10 * std::max(1.0, std::abs(static_cast<double>(ref))));
    CHECK(std::abs(got - static_cast<double>(ref)) <= 4 * std::numeric_limits<double>::epsilon() * static_cast<double>(ref));
  }
  const Matrix z = testutil::random_matrix(3, 6, 90);
  const TripletTerm t = triplet_soft_margin_loss(z.row(0), z.row(1), z.row(2), 0.5);
  quad dp = 0, dn = 0;
  for (std::size_t k = 0; k < 6; ++k) {
    dp += (quad(z(0, k)) - z(1, k)) * (quad(z(0, k)) - z(1, k));
    dn += (quad(z(0, k)) - z(2, k)) * (quad(z(0, k)) - z(2, k));
  }
  const quad ref = boost::multiprecision::log1p(boost::multiprecision::exp(dp - dn + quad(0.5)));
  CHECK(std::abs(t.value - static_cast<double>(ref)) <= 1e-10);
}

TEST_CASE("soft margin dominates the hinge and converges to it") {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const Matrix z = testutil::random_matrix(3, 4, 1000 + i, 0.5 + 3 * rng.uniform01());
    const double h = triplet_hinge_loss(z.row(0), z.row(1), z.row(2), 0.5).value;
    const TripletTerm s = triplet_soft_margin_loss(z.row(0), z.row(1), z.row(2), 0.5);
    CHECK(s.value >= h);
    CHECK(s.value > 0.0);
    if (s.pre_activation > 30) CHECK(std::abs(s.value - h) <= 1e-6);
  }
  const std::vector<double> a{0}, p{6}, n{0.1};
  CHECK(std::abs(triplet_soft_margin_loss(a, p, n, 0.5).value - triplet_hinge_loss(a, p, n, 0.5).value) <= 1e-6);
}

TEST_CASE("triplet batch loss matches a scalar recomputation and finite differences") {
  const Matrix z = testutil::random_matrix(9, 3, 5);
  const EpisodicTask task = make_task(3, 3);
  const std::vector<int> classes = task.flat_classes();
  const auto triplets = all_triplets(classes);
  // 9 anchors x 2 positives x 6 negatives.
  CHECK(triplets.size() == 108);
  for (bool soft : {false, true}) {
    double expected = 0;
    for (const Triplet& t : triplets) {
      const double pre = sq(z.row(t.anchor), z.row(t.positive)) - sq(z.row(t.anchor), z.row(t.negative)) + 0.5;
      expected += soft ? std::log1p(std::exp(pre)) : std::max(0.0, pre);
    }
    expected /= static_cast<double>(triplets.size());
    CHECK(triplet_batch_loss(z, triplets, 0.5, soft).value == doctest::Approx(expected).epsilon(1e-12));
    LossConfig cfg;
    cfg.kind = soft ? LossKind::kSoftMarginTriplet : LossKind::kTriplet;
    std::size_t checked = 0;
    CHECK(embedding_fd_error(make_episode_loss(task, cfg), z, &checked) < 1e-6);
    CHECK(checked > 0);
  }
  CHECK(testutil::error_kind([&] { triplet_batch_loss(z, {}, 0.5, false); }) == ErrorKind::kContractViolation);
}

TEST_CASE("hard mining: forced geometry and coincident points") {
  Matrix z(4, 1);
  z(0, 0) = 0;
  z(1, 0) = 1;
  z(2, 0) = 10;
  z(3, 0) = 11;
  const std::vector<int> classes{0, 0, 1, 1};
  const MiningResult r = mine_hard_triplets(z, classes);
  CHECK(r.triplets[0] == Triplet{0, 1, 2});
  CHECK(r.skipped_anchors == 0);

  const Matrix same(8, 3, 1.5);
  const EpisodicTask task = make_task(2, 4);
  LossConfig cfg;
  const LossEvaluation ev = episode_loss(task, same, cfg);
  CHECK(ev.value == doctest::Approx(0.5).epsilon(1e-15));
  for (const Triplet& t : mine_hard_triplets(same, task.flat_classes()).triplets) {
    const TripletTerm term = triplet_hinge_loss(same.row(t.anchor), same.row(t.positive), same.row(t.negative), 0.5);
    CHECK(term.pre_activation == 0.5);
  }
}

TEST_CASE("hard mining matches an exhaustive oracle on an 8 x 4 episode") {
  const EpisodicTask task = make_task(8, 4);
  const std::vector<int> classes = task.flat_classes();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix z = testutil::random_matrix(32, 5, 40 + seed);
    const MiningResult r = mine_hard_triplets(z, classes);
    REQUIRE(r.triplets.size() == 32);
    for (std::size_t a = 0; a < 32; ++a) {
      std::size_t best_p = a, best_n = a;
      double dp = -1, dn = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < 32; ++j) {
        if (j == a) continue;
        const double d = sq(z.row(a), z.row(j));
        if (classes[j] == classes[a] && d > dp) dp = d, best_p = j;
        if (classes[j] != classes[a] && d < dn) dn = d, best_n = j;
      }
      CHECK(r.triplets[a] == Triplet{a, best_p, best_n});
    }
  }
}

TEST_CASE("hard mining skips anchors without positives") {
  const Matrix z = testutil::random_matrix(3, 2, 1);
  const MiningResult r = mine_hard_triplets(z, std::vector<int>{0, 0, 1});
  CHECK(r.triplets.size() == 2);
  CHECK(r.skipped_anchors == 1);
}

TEST_CASE("hard-mined loss dominates the all-triplet mean") {
  const EpisodicTask task = make_task(6, 4);
  LossConfig hard, plain;
  plain.kind = LossKind::kTriplet;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix z = testutil::random_matrix(24, 4, 300 + seed);
    CHECK(episode_loss(task, z, hard).value >= episode_loss(task, z, plain).value);
  }
}

TEST_CASE("every loss is translation invariant and nonnegative") {
  const Matrix z = testutil::random_matrix(12, 4, 77);
  Matrix shifted = z;
  for (std::size_t i = 0; i < 12; ++i)
    for (std::size_t k = 0; k < 4; ++k) shifted(i, k) += 3.0 + static_cast<double>(k);
  for (LossKind kind : {LossKind::kPrototype, LossKind::kTriplet, LossKind::kSoftMarginTriplet, LossKind::kHardTriplet}) {
    LossConfig cfg;
    cfg.kind = kind;
    const EpisodicTask task = make_task(3, 4, kind == LossKind::kPrototype ? 2 : 0);
    const double v = episode_loss(task, z, cfg).value;
    CHECK(std::abs(v - episode_loss(task, shifted, cfg).value) <= 1e-9);
    CHECK(v >= 0.0);
    if (kind == LossKind::kSoftMarginTriplet) CHECK(v > 0.0);
  }
}

TEST_CASE("every loss passes a finite-difference check through the encoder") {
  const std::vector<std::size_t> dims{5, 8, 8, 3};
  const ModelParams params = init_params(dims, 12);
  const Matrix batch = testutil::random_matrix(12, 5, 13);
  for (LossKind kind : {LossKind::kPrototype, LossKind::kTriplet, LossKind::kSoftMarginTriplet, LossKind::kHardTriplet}) {
    LossConfig cfg;
    cfg.kind = kind;
    const EpisodicTask task = make_task(3, 4, kind == LossKind::kPrototype ? 2 : 0);
    const GradientCheckReport r = gradient_check(make_episode_loss(task, cfg), params, batch);
    CHECK(r.max_relative_error < 1e-4);
    CHECK(r.checked > 0);
  }
}

TEST_CASE("loss config and names") {
  for (LossKind kind : {LossKind::kPrototype, LossKind::kTriplet, LossKind::kSoftMarginTriplet, LossKind::kHardTriplet})
    CHECK(loss_kind_from_string(to_string(kind)) == kind);
  CHECK(testutil::error_kind([] { loss_kind_from_string("focal"); }) == ErrorKind::kConfig);
  LossConfig cfg;
  cfg.margin = -0.1;
  CHECK(testutil::error_kind([&] { cfg.validate(); }) == ErrorKind::kConfig);
}
