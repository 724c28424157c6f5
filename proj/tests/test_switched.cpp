#include <doctest.h>

#include <array>

#include "dualqp/analysis.hpp"
#include "dualqp/switched.hpp"
#include "oracles.hpp"

using namespace dualqp;

namespace {

VectorXd vec(std::initializer_list<double> xs) {
  VectorXd v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

bool near(const VectorXd& a, const VectorXd& b, double tol = 1e-14) {
  return a.size() == b.size() && (a - b).cwiseAbs().maxCoeff() <= tol;
}

std::vector<std::vector<double>> as_lists(const DelayModel& dm) {
  std::vector<std::vector<double>> out;
  for (const auto& p : dm.per_node()) out.emplace_back(p.data(), p.data() + p.size());
  return out;
}

DelayModel random_delay(Rng& rng, Index q, Index nodes) {
  std::vector<VectorXd> per_node;
  for (Index i = 0; i < nodes; ++i) {
    VectorXd p(q);
    for (Index a = 0; a < q; ++a) p(a) = uniform01(rng) * (uniform01(rng) < 0.2 ? 0.0 : 1.0);
    if (p.sum() == 0) p(0) = 1;
    per_node.push_back(p / p.sum());
  }
  return DelayModel(q, per_node);
}

}  // namespace

TEST_CASE("aggregate probability examples") {
  const VectorXd two = aggregate_probability(DelayModel::uniform(vec({0.5, 0.5}), 2));
  CHECK(two(0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(two(1) == doctest::Approx(0.75).epsilon(1e-14));

  for (Index n : {1, 3, 7}) {
    const VectorXd fresh = aggregate_probability(DelayModel::uniform(vec({1, 0, 0, 0}), n));
    CHECK(fresh == vec({1, 0, 0, 0}));
  }

  const DelayModel dm3 = DelayModel::uniform(vec({0.2, 0.5, 0.3}), 3);
  const VectorXd three = aggregate_probability(dm3);
  CHECK(three(0) == doctest::Approx(0.008).epsilon(1e-12));
  CHECK(three(1) == doctest::Approx(0.335).epsilon(1e-12));
  CHECK(three(2) == doctest::Approx(0.657).epsilon(1e-12));
  const auto brute = oracle::brute_force_max_age(as_lists(dm3));
  for (Index r = 0; r < 3; ++r) CHECK(std::abs(three(r) - brute[static_cast<std::size_t>(r)]) < 1e-12);
}

TEST_CASE("aggregate probability matches enumeration on random models") {
  Rng rng(99);
  for (int t = 0; t < 1000; ++t) {
    const Index q = 1 + t % 4;
    const Index n = 1 + (t / 4) % 4;
    const DelayModel dm = random_delay(rng, q, n);
    const VectorXd pi = aggregate_probability(dm);
    REQUIRE(pi.size() == q);
    CHECK(pi.minCoeff() >= 0.0);
    CHECK(std::abs(pi.sum() - 1.0) < 1e-12);
    const auto brute = oracle::brute_force_max_age(as_lists(dm));
    double cum = 0;
    for (Index r = 0; r < q; ++r) {
      CHECK(std::abs(pi(r) - brute[static_cast<std::size_t>(r)]) < 1e-12);
      // Cumulative identity: sum_{j<=r} pi_j = prod_i F_i(r).
      cum += pi(r);
      double prod = 1;
      for (Index i = 0; i < n; ++i) prod *= dm.node(i).head(r + 1).sum();
      CHECK(std::abs(cum - prod) < 1e-12);
    }
  }
}

TEST_CASE("aggregate probability matches sampled max ages") {
  Rng rng(7);
  const DelayModel dm(3, {vec({0.6, 0.3, 0.1}), vec({0.2, 0.2, 0.6}), vec({0.9, 0.1, 0.0})});
  const VectorXd pi = aggregate_probability(dm);
  const int draws = 100000;
  std::array<int, 3> counts{};
  for (int s = 0; s < draws; ++s) {
    Index oldest = 0;
    for (Index i = 0; i < 3; ++i) oldest = std::max(oldest, sample_mode(dm.node(i), rng));
    ++counts[static_cast<std::size_t>(oldest)];
  }
  for (Index r = 0; r < 3; ++r) {
    const double sigma = std::sqrt(pi(r) * (1 - pi(r)) / draws);
    CHECK(std::abs(counts[static_cast<std::size_t>(r)] / double(draws) - pi(r)) <= 3 * sigma + 1e-12);
  }
}

TEST_CASE("delay model validation") {
  CHECK_THROWS_AS(DelayModel(2, {vec({0.5, 0.4})}), std::invalid_argument);
  CHECK_THROWS_AS(DelayModel(2, {vec({1.2, -0.2})}), std::invalid_argument);
  CHECK_THROWS_AS(DelayModel(2, {vec({1.0})}), std::invalid_argument);
  CHECK_THROWS_AS(DelayModel(0, {}), std::invalid_argument);
  CHECK_THROWS_AS(DelayModel(2, {}), std::invalid_argument);
  CHECK_NOTHROW(DelayModel(2, {vec({0.5, 0.5 + 1e-13})}));
  CHECK_THROWS_AS(check_probability_vector(vec({0.5, 0.6})), std::invalid_argument);
}

TEST_CASE("delay model from an aggregate") {
  const VectorXd target = vec({0.5, 0.5});
  const DelayModel dm = DelayModel::from_aggregate(target, 2);
  CHECK(dm.num_nodes() == 2);
  CHECK(dm.node(0)(0) == doctest::Approx(std::sqrt(0.5)));
  const VectorXd back = aggregate_probability(dm);
  CHECK((back - target).cwiseAbs().maxCoeff() < 1e-12);

  const VectorXd skewed = vec({0, 0, 0.08, 0.8, 0.11, 0.01, 0, 0});
  const VectorXd back8 = aggregate_probability(DelayModel::from_aggregate(skewed, 20));
  CHECK((back8 - skewed).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("delay model from age counts") {
  const DelayModel dm = DelayModel::from_age_counts({{3, 1}, {0, 4}});
  CHECK(dm.q() == 2);
  CHECK(dm.node(0)(0) == 0.75);
  CHECK(dm.node(1)(1) == 1.0);
  CHECK_THROWS_AS(DelayModel::from_age_counts({{0, 0}}), std::invalid_argument);
}

TEST_CASE("reduced modes on T1") {
  const SeparableQP t1 = oracle::make_t1();
  const SwitchedSystem sys = reduce_modes(t1, DelayModel::uniform(vec({0.5, 0.5}), 2));
  REQUIRE(sys.modes.size() == 2);
  MatrixXd w1(2, 2), w2(2, 2);
  w1 << 0.5, 0, 1, 0;
  w2 << 1, -0.5, 1, 0;
  CHECK((sys.modes[0] - w1).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((sys.modes[1] - w2).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(near(sys.C, vec({0.5, 0})));
  CHECK(sys.pi(0) == doctest::Approx(0.25));
  CHECK(sys.state_dim() == 2);

  SUBCASE("q = 1 has a single mode") {
    const SwitchedSystem one = reduce_modes(t1, DelayModel::uniform(vec({1}), 2));
    REQUIRE(one.modes.size() == 1);
    CHECK(one.modes[0](0, 0) == doctest::Approx(0.5));
    CHECK(one.pi == vec({1}));
  }
}

TEST_CASE("reduced modes for q = 3 with scalar R") {
  const double r = 0.3;
  const MatrixXd R = MatrixXd::Constant(1, 1, r);
  for (Index age = 0; age < 3; ++age) {
    MatrixXd expected = MatrixXd::Zero(3, 3);
    expected(0, 0) = 1;
    expected(0, age) -= r;
    expected(1, 0) = 1;
    expected(2, 1) = 1;
    CHECK((mode_matrix(R, 3, age) - expected).cwiseAbs().maxCoeff() < 1e-15);
  }
  CHECK_THROWS_AS(mode_matrix(R, 3, 3), std::out_of_range);
}

TEST_CASE("companion structure for block size m > 1") {
  const SeparableQP qp = oracle::random_qp(5, 3, 2, 2, 0.1);
  const SwitchedSystem sys = reduce_modes(qp, DelayModel::uniform(vec({0.2, 0.3, 0.5}), 3));
  const MatrixXd I = MatrixXd::Identity(2, 2);
  for (Index r = 0; r < 3; ++r) {
    const MatrixXd& W = sys.modes[static_cast<std::size_t>(r)];
    REQUIRE(W.rows() == 6);
    for (Index bc = 0; bc < 3; ++bc) {
      MatrixXd expected = MatrixXd::Zero(2, 2);
      if (bc == 0) expected += I;
      if (bc == r) expected -= sys.R;
      CHECK((W.block(0, 2 * bc, 2, 2) - expected).cwiseAbs().maxCoeff() < 1e-15);
    }
    for (Index br = 1; br < 3; ++br) {
      for (Index bc = 0; bc < 3; ++bc) {
        const MatrixXd expected = bc == br - 1 ? I : MatrixXd::Zero(2, 2);
        CHECK(W.block(2 * br, 2 * bc, 2, 2) == expected);
      }
    }
  }
}

TEST_CASE("mode count is q independent of N") {
  for (Index n : {2, 20, 200}) {
    const SeparableQP qp = oracle::random_qp(static_cast<std::uint64_t>(n), n, 1, 1, 0.01);
    const SwitchedSystem sys = reduce_modes(qp, DelayModel::uniform(vec({0.3, 0.3, 0.4}), n));
    CHECK(sys.modes.size() == 3);
    CHECK(sys.pi.size() == 3);
  }
}

TEST_CASE("sample mode") {
  Rng rng(1);
  for (int s = 0; s < 1000; ++s) {
    CHECK(sample_mode(vec({1, 0}), rng) == 0);
    CHECK(sample_mode(vec({0, 0, 1}), rng) == 2);
  }
  const int draws = 100000;
  int zeros = 0;
  for (int s = 0; s < draws; ++s) zeros += sample_mode(vec({0.25, 0.75}), rng) == 0;
  const double sigma = std::sqrt(0.25 * 0.75 / draws);
  CHECK(std::abs(zeros / double(draws) - 0.25) <= 3 * sigma);

  Rng a(5), b(5);
  for (int s = 0; s < 100; ++s) CHECK(sample_mode(vec({0.2, 0.3, 0.5}), a) == sample_mode(vec({0.2, 0.3, 0.5}), b));
}

TEST_CASE("step") {
  const SwitchedSystem sys = reduce_modes(oracle::make_t1(), DelayModel::uniform(vec({0.5, 0.5}), 2));
  CHECK(near(step(sys, vec({0, 0}), 0), vec({0.5, 0})));
  CHECK(near(step(sys, vec({1, 0}), 1), vec({1.5, 1})));
  const VectorXd Y_star = vec({1, 1});
  for (Index r = 0; r < 2; ++r) CHECK((step(sys, Y_star, r) - Y_star).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_THROWS_AS(step(sys, vec({1}), 0), std::invalid_argument);
  CHECK_THROWS_AS(step(sys, Y_star, 2), std::out_of_range);
}

TEST_CASE("fixed point is shared by every mode") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SeparableQP qp = oracle::random_qp(seed, 3, 2, 2, 0.05);
    const SwitchedSystem sys = reduce_modes(qp, DelayModel::uniform(vec({0.2, 0.3, 0.5}), 3));
    const VectorXd Y = make_augmented_state(closed_form_optimum(qp).y_star, 3);
    for (const auto& W : sys.modes) {
      CHECK(((MatrixXd::Identity(6, 6) - W) * Y - sys.C).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("always-fresh switching reproduces the synchronous iteration") {
  const SeparableQP qp = oracle::random_qp(31, 4, 2, 2, 0.05);
  const SwitchedSystem sys = make_switched_system(dual_map_coefficients(qp), vec({1, 0, 0}));
  VectorXd Y = make_augmented_state(VectorXd::Constant(2, 2.0), 3);
  VectorXd y = VectorXd::Constant(2, 2.0);
  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    Y = step(sys, Y, sample_mode(sys.pi, rng));
    y = dual_update_sync(qp, {y, k}, primal_update_all(qp, {y, k})).y;
    CHECK((Y.head(2) - y).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("synchronous and deterministic systems") {
  const SeparableQP t1 = oracle::make_t1();
  const AffineSystem sync = build_sync_system(t1, 2);
  MatrixXd w1(2, 2), w2(2, 2);
  w1 << 0.5, 0, 1, 0;
  w2 << 1, -0.5, 1, 0;
  CHECK((sync.W - w1).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(near(sync.C, vec({0.5, 0})));
  CHECK((build_det_async_system(t1, 2).W - w2).cwiseAbs().maxCoeff() < 1e-15);

  CHECK(build_sync_system(t1, 1).W(0, 0) == doctest::Approx(0.5));
  CHECK(build_det_async_system(t1, 1).W == build_sync_system(t1, 1).W);

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SeparableQP qp = oracle::random_qp(seed + 40, 3, 2, 3, 0.05);
    for (Index q = 1; q <= 4; ++q) {
      const SwitchedSystem sys = reduce_modes(qp, DelayModel::uniform(VectorXd::Constant(q, 1.0 / double(q)), 3));
      CHECK(build_det_async_system(qp, q).W == sys.modes.back());
      CHECK(build_sync_system(qp, q).W == sys.modes.front());
      const double rs = linalg::spectral_radius(build_sync_system(qp, q).W);
      CHECK(rs == doctest::Approx(sync_spectral_radius(qp)).epsilon(1e-10));
    }
  }
}

TEST_CASE("delayed mode matrix with per-node ages") {
  const SeparableQP qp = oracle::random_qp(8, 3, 1, 2, 0.1);
  const DualMapCoefficients co = dual_map_coefficients(qp);
  const MatrixXd W = delayed_mode_matrix(co.phi, {0, 2, 2}, 3);
  MatrixXd first = MatrixXd::Zero(2, 6);
  first.block(0, 0, 2, 2) = MatrixXd::Identity(2, 2) - co.phi[0];
  first.block(0, 4, 2, 2) = -co.phi[1] - co.phi[2];
  CHECK((W.topRows(2) - first).cwiseAbs().maxCoeff() < 1e-15);
  // All nodes at one age collapse to the reduced mode.
  CHECK((delayed_mode_matrix(co.phi, {1, 1, 1}, 3) - mode_matrix(co.R, 3, 1)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("joint mode enumeration") {
  const SeparableQP qp = oracle::random_qp(6, 2, 1, 1, 0.1);
  const DelayModel dm(2, {vec({0.3, 0.7}), vec({0.6, 0.4})});
  const auto joint = enumerate_joint_modes(qp, dm);
  REQUIRE(joint.size() == 4);
  // Node 0 is the most significant digit.
  CHECK(joint[1].ages == std::vector<Index>{0, 1});
  CHECK(joint[1].probability == doctest::Approx(0.3 * 0.4));
  CHECK(joint[2].ages == std::vector<Index>{1, 0});
  CHECK(joint[2].oldest_age == 1);
  double total = 0;
  for (const auto& j : joint) total += j.probability;
  CHECK(total == doctest::Approx(1.0));

  const DelayModel big = DelayModel::uniform(vec({0.5, 0.5}), 4);
  CHECK_THROWS_AS(enumerate_joint_modes(oracle::random_qp(1, 4, 1, 1, 0.1), big), std::invalid_argument);
  const DelayModel deep = DelayModel::uniform(vec({0.25, 0.25, 0.25, 0.25}), 2);
  CHECK_THROWS_AS(enumerate_joint_modes(qp, deep), std::invalid_argument);
}

TEST_CASE("augmented state back-fills the history") {
  const VectorXd Y = make_augmented_state(vec({1, 2}), 3);
  CHECK(Y == vec({1, 2, 1, 2, 1, 2}));
  CHECK_THROWS_AS(make_augmented_state(vec({1}), 0), std::invalid_argument);
}
