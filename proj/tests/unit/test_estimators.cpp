#include "fixtures.hpp"
#include "oracles.hpp"

#include "patopa/errors.hpp"
#include "patopa/estimators.hpp"
#include "patopa/features.hpp"
#include "patopa/scenario.hpp"

#include <doctest.h>

#include <random>

using namespace patopa;

namespace {

struct Instance {
  FeatureSystem fs;
  LineParams truth;
};

// 8-bus feeder measured at `level`, features on K_8.
Instance feeder_instance(double level, std::uint64_t seed, Index samples = 500) {
  const GridTopology k8 = complete_candidate_graph(8);
  const MeasurementSet clean =
      generate_measurements(fixtures::feeder8(), fixtures::feeder8_params(), samples, seed);
  const MeasurementSet noisy = apply_noise(clean, NoiseSpec::uniform(level, seed + 1));
  NoiseInfo noise;
  noise.stds = noise_stds_from_levels(noisy, NoiseSpec::uniform(level, 0));
  return {assemble_feature_system(k8, noisy, noise),
          align_params(fixtures::feeder8(), fixtures::feeder8_params(), k8)};
}

FeatureSystem raw_system(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  FeatureSystem fs;
  fs.X = X;
  fs.y = y;
  fs.n_edges = X.cols() / 2;
  return fs;
}

Eigen::VectorXd stacked(const LineParams& p) {
  Eigen::VectorXd x(2 * p.size());
  x << p.g, p.b;
  return x;
}

}  // namespace

TEST_CASE("method names round-trip") {
  for (Method m : {Method::kOls, Method::kTls, Method::kGlraDiag, Method::kPatopa}) {
    CHECK(parse_method(to_string(m)) == m);
  }
  CHECK(parse_method("glra_diag") == Method::kGlraDiag);
  CHECK_THROWS_AS(parse_method("ridge"), InvalidArgument);
}

TEST_CASE("ols examples") {
  const Instance inst = feeder_instance(0.0, 1, 300);
  const EstimationResult res = ols(inst.fs);
  const Eigen::VectorXd truth = stacked(inst.truth);
  CHECK((res.coefficients() - truth).norm() / truth.norm() < 1e-8);

  FeatureSystem zero = inst.fs;
  zero.y.setZero();
  CHECK(ols(zero).coefficients().isZero(1e-14));

  Eigen::MatrixXd X(2, 1);
  X << 1, 2;
  CHECK(ols_solve(X, Eigen::Vector2d(1, 2))(0) == doctest::Approx(1.0).epsilon(1e-15));

  Eigen::MatrixXd singular(3, 2);
  singular << 1, 2, 2, 4, 3, 6;
  CHECK_THROWS_AS(ols_solve(singular, Eigen::Vector3d(1, 2, 3)), SingularSystem);
}

TEST_CASE("tls on noiseless data coincides with ols") {
  const Instance inst = feeder_instance(0.0, 2, 300);
  const EstimationResult t = tls(inst.fs);
  const EstimationResult o = ols(inst.fs);
  CHECK(t.sigma < 1e-10 * inst.fs.augmented().norm());
  CHECK((t.coefficients() - o.coefficients()).norm() < 1e-8 * o.coefficients().norm());
}

TEST_CASE("tls equals brute-force orthogonal regression on toy systems") {
  {
    Eigen::MatrixXd X(2, 1);
    X << 1, 2;
    const Eigen::Vector2d y(1.1, 1.9);
    const double slope = tls_solve(X, y).a(0);
    const Eigen::VectorXd oracle =
        oracles::brute_force_orthogonal_regression(X, y, Eigen::VectorXd::Zero(1), 3.0);
    CHECK(std::abs(slope - oracle(0)) < 1e-8);
  }
  std::mt19937_64 rng(99);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index k : {1, 2, 3}) {
    for (int trial = 0; trial < 5; ++trial) {
      const Eigen::MatrixXd X = fixtures::random_matrix(12, k, rng, -2.0, 2.0);
      Eigen::VectorXd a(k);
      for (Index j = 0; j < k; ++j) a(j) = normal(rng);
      Eigen::VectorXd y = X * a;
      for (Index r = 0; r < y.size(); ++r) y(r) += 0.3 * normal(rng);
      const Eigen::VectorXd got = tls_solve(X, y).a;
      const Eigen::VectorXd oracle = oracles::brute_force_orthogonal_regression(
          X, y, Eigen::VectorXd::Zero(k), 4.0);
      CHECK((got - oracle).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("tls objective equals the squared smallest singular value") {
  const Instance inst = feeder_instance(0.05, 3, 200);
  const EstimationResult t = tls(inst.fs);
  const double dropped = (inst.fs.augmented() - t.fitted).squaredNorm();
  CHECK(dropped == doctest::Approx(t.sigma * t.sigma).epsilon(1e-9));
  // The fitted matrix is rank deficient along [a; -1].
  Eigen::VectorXd c(t.coefficients().size() + 1);
  c << t.coefficients(), -1.0;
  CHECK((t.fitted * c).norm() < 1e-8 * t.fitted.norm() * c.norm());
}

TEST_CASE("tls rejects a repeated smallest singular value") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(4, 2);
  X(0, 0) = 1.0;
  X(1, 1) = 1.0;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(4);
  y(2) = 1.0;
  CHECK_THROWS_AS(tls_solve(X, y), NongenericTls);
  CHECK_THROWS_AS(tls_solve(Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Ones(1)),
                  InsufficientData);
}

TEST_CASE("eiv log-likelihood examples") {
  const Instance clean = feeder_instance(0.0, 4, 100);
  CHECK(std::abs(eiv_log_likelihood(clean.fs, clean.truth)) < 1e-12);

  Eigen::MatrixXd X(1, 1);
  X << 1.0;
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(1, 2.0);
  const Eigen::VectorXd a = Eigen::VectorXd::Constant(1, 1.0);
  CHECK(eiv_log_likelihood(X, y, a, Eigen::MatrixXd::Ones(1, 2)) == doctest::Approx(-0.5));

  const Instance noisy = feeder_instance(0.05, 4, 100);
  FeatureSystem scaled = noisy.fs;
  scaled.W *= 3.5;
  CHECK(eiv_log_likelihood(scaled, noisy.truth) ==
        doctest::Approx(3.5 * eiv_log_likelihood(noisy.fs, noisy.truth)).epsilon(1e-12));
}

TEST_CASE("eiv log-likelihood is the exact per-row weighted orthogonal distance") {
  // Minimize sum w (x - xh)^2 + w_y (y - yh)^2 subject to yh = xh^T a by
  // direct Lagrange solution, one row at a time.
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd X = fixtures::random_matrix(6, 3, rng);
  const Eigen::VectorXd y = fixtures::random_matrix(6, 1, rng);
  const Eigen::VectorXd a = fixtures::random_matrix(3, 1, rng);
  const Eigen::MatrixXd W = fixtures::random_matrix(6, 4, rng, 0.5, 3.0);
  double total = 0.0;
  for (Index r = 0; r < 6; ++r) {
    // Stationarity: xh = x + lambda a / w, yh = y - lambda / w_y.
    const double res = y(r) - X.row(r).dot(a);
    double denom = 1.0 / W(r, 3);
    for (Index k = 0; k < 3; ++k) denom += a(k) * a(k) / W(r, k);
    const double lambda = res / denom;
    double cost = lambda * lambda / W(r, 3);
    for (Index k = 0; k < 3; ++k) cost += lambda * lambda * a(k) * a(k) / W(r, k);
    Eigen::RowVectorXd xh = X.row(r);
    for (Index k = 0; k < 3; ++k) xh(k) += lambda * a(k) / W(r, k);
    const double yh = y(r) - lambda / W(r, 3);
    CHECK(std::abs(yh - xh.dot(a)) < 1e-12);
    total += cost;
  }
  CHECK(eiv_log_likelihood(X, y, a, W) == doctest::Approx(-total).epsilon(1e-12));
}

TEST_CASE("sigma_norm examples and sandwich bound") {
  std::mt19937_64 rng(6);
  const Eigen::MatrixXd A = fixtures::random_matrix(5, 4, rng);
  CHECK(sigma_norm(A, Eigen::MatrixXd::Ones(5, 4)) == doctest::Approx(A.squaredNorm()));
  CHECK(sigma_norm(Eigen::MatrixXd::Zero(5, 4), Eigen::MatrixXd::Ones(5, 4)) == 0.0);
  CHECK(sigma_norm(A, Eigen::MatrixXd::Constant(5, 4, 4.0)) ==
        doctest::Approx(4.0 * A.squaredNorm()));
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::MatrixXd D = fixtures::random_matrix(7, 3, rng, -10, 10);
    const Eigen::MatrixXd W = fixtures::random_matrix(7, 3, rng, 1e-3, 1e3);
    const double value = sigma_norm(D, W);
    CHECK(W.minCoeff() * D.squaredNorm() <= value * (1 + 1e-14));
    CHECK(value <= W.maxCoeff() * D.squaredNorm() * (1 + 1e-14));
  }
}

TEST_CASE("condition number") {
  const Eigen::Matrix2d d = Eigen::Vector2d(1.0, 1e-3).asDiagonal();
  CHECK(condition_number(d) == doctest::Approx(1e3));
  Eigen::MatrixXd tall(3, 2);
  tall << 1, 2, 2, 4, 3, 6;
  CHECK(condition_number(tall) > 1e15);
}

namespace {

// The left-vector update written with an explicit orthogonal complement Q2.
void explicit_q2_step(const Eigen::MatrixXd& A, const Eigen::MatrixXd& V, GlraState& s) {
  const Index p = A.cols();
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
  const Eigen::MatrixXd Q = qr.householderQ();
  const Eigen::MatrixXd Q1 = Q.leftCols(p);
  const Eigen::MatrixXd Q2 = Q.rightCols(A.rows() - p);
  const Eigen::MatrixXd R = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  const Eigen::VectorXd Dd = V.transpose() * s.d.cwiseAbs2();
  const Eigen::VectorXd Dc = V * s.c.cwiseAbs2();
  const Eigen::VectorXd u = R.transpose().lu().solve(Dd.cwiseProduct(s.c));
  const Eigen::MatrixXd Dc2 = Dc.asDiagonal() * Q2;
  const Eigen::VectorXd w =
      -(Q2.transpose() * Dc2).lu().solve(Q2.transpose() * (Dc.asDiagonal() * (Q1 * u)));
  const Eigen::VectorXd l = Q1 * u + Q2 * w;
  const Eigen::VectorXd d = l.normalized();
  const Eigen::VectorXd c = R.lu().solve(Q1.transpose() * Dc.cwiseProduct(d));
  s.sigma = 1.0 / c.norm();
  s.c = c.normalized();
  s.d = d;
}

}  // namespace

TEST_CASE("fixed-point step without Q2 matches the explicit complement form") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd A = fixtures::random_matrix(14, 4, rng);
    const Eigen::MatrixXd V = fixtures::random_matrix(14, 4, rng, 0.2, 2.0);
    GlraState fast;
    fast.c = fixtures::random_matrix(4, 1, rng).normalized();
    fast.d = fixtures::random_matrix(14, 1, rng).normalized();
    GlraState slow = fast;
    const GlraFactors f = factor_augmented(A);
    for (int k = 1; k <= 3; ++k) {
      glra_iterate(f, V, fast, k);
      explicit_q2_step(A, V, slow);
      const double sign = fast.c.dot(slow.c) < 0 ? -1.0 : 1.0;
      slow.c *= sign;
      slow.d *= sign;
      CHECK((fast.c - slow.c).norm() < 1e-9);
      CHECK((fast.d - slow.d).norm() < 1e-9);
      CHECK(fast.sigma == doctest::Approx(slow.sigma).epsilon(1e-9));
    }
  }
}

TEST_CASE("diagonal GLRA with uniform weights matches tls") {
  for (std::uint64_t seed : {21u, 22u, 23u}) {
    Instance inst = feeder_instance(0.05, seed, 200);
    inst.fs.W.setConstant(2.5);
    const EstimationResult t = tls(inst.fs);
    const EstimationResult g = glra_diag(
        inst.fs, {.max_iter = 2000, .tol = 1e-13, .track_condition = false,
                  .warm_start = WarmStart::kOls});
    CHECK(g.converged);
    CHECK((g.coefficients() - t.coefficients()).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("diagonal GLRA beats tls likelihood early and drives the condition number up") {
  const Instance inst = feeder_instance(0.05, 31);
  const double tls_ll = tls(inst.fs).log_likelihood;
  const EstimationResult g = glra_diag(inst.fs, {.max_iter = 200});
  int crossover = -1;
  for (std::size_t k = 0; k < g.ll_trace.size(); ++k) {
    if (g.ll_trace[k] > tls_ll) {
      crossover = static_cast<int>(k) + 1;
      break;
    }
  }
  CHECK(crossover >= 1);
  CHECK(crossover <= 5);
  REQUIRE_FALSE(g.cond_trace.empty());
  CHECK(*std::max_element(g.cond_trace.begin(), g.cond_trace.end()) >= 1e10);
}

TEST_CASE("tls and diagonal GLRA deviations are within the weight-ratio bound") {
  for (std::uint64_t seed : {41u, 42u, 43u}) {
    const Instance inst = feeder_instance(0.05, seed, 200);
    const EstimationResult t = tls(inst.fs);
    const EstimationResult g = glra_diag(inst.fs, {.max_iter = 500, .track_condition = false});
    if (!g.converged) continue;
    const Eigen::MatrixXd A = inst.fs.augmented();
    const double tls_dev = sigma_norm(A - t.fitted, inst.fs.W);
    const double glra_dev = sigma_norm(A - g.fitted, inst.fs.W);
    CHECK(tls_dev <= inst.fs.W.maxCoeff() / inst.fs.W.minCoeff() * glra_dev);
  }
}

TEST_CASE("likelihood trace is nondecreasing after iteration 2 on most trials") {
  int monotone = 0;
  const int trials = 20;
  for (int trial = 0; trial < trials; ++trial) {
    const Instance inst = feeder_instance(0.05, 100 + trial, 300);
    const EstimationResult g = glra_diag(inst.fs, {.max_iter = 200, .track_condition = false});
    bool ok = true;
    for (std::size_t k = 2; k < g.ll_trace.size(); ++k) {
      if (g.ll_trace[k] < g.ll_trace[k - 1] - 1e-9 * std::abs(g.ll_trace[k - 1])) ok = false;
    }
    monotone += ok ? 1 : 0;
  }
  CHECK(monotone >= 19);
}

TEST_CASE("estimators are deterministic") {
  const Instance inst = feeder_instance(0.05, 55, 200);
  const EstimationResult a = glra_diag(inst.fs);
  const EstimationResult b = glra_diag(inst.fs);
  CHECK(a.coefficients() == b.coefficients());
  CHECK(a.ll_trace == b.ll_trace);
  CHECK(a.cond_trace == b.cond_trace);
  CHECK(tls(inst.fs).coefficients() == tls(inst.fs).coefficients());
}

TEST_CASE("diagonal GLRA input validation and exact fits") {
  Instance inst = feeder_instance(0.0, 61, 100);
  const EstimationResult exact = glra_diag(inst.fs);
  CHECK(exact.converged);
  CHECK((exact.coefficients() - stacked(inst.truth)).norm() < 1e-8 * stacked(inst.truth).norm());

  FeatureSystem unweighted = inst.fs;
  unweighted.W.resize(0, 0);
  CHECK_THROWS_AS(glra_diag(unweighted), InvalidArgument);

  FeatureSystem negative = inst.fs;
  negative.W(0, 0) = -1.0;
  CHECK_THROWS_AS(glra_diag(negative), InvalidArgument);

  const FeatureSystem tiny = inst.fs.time_slice(0, 1);
  CHECK_THROWS_AS(glra_diag(tiny), InsufficientData);

  CHECK_THROWS_AS(estimate(inst.fs, Method::kPatopa), InvalidArgument);
  CHECK_THROWS_AS(ols(raw_system(Eigen::MatrixXd(0, 0), Eigen::VectorXd())), InvalidArgument);
}
