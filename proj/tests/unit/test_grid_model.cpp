#include "fixtures.hpp"

#include "patopa/errors.hpp"
#include "patopa/grid_model.hpp"

#include <doctest.h>

#include <numeric>
#include <random>

using namespace patopa;

TEST_CASE("complete candidate graph sizes") {
  CHECK(complete_candidate_graph(8).n_edges() == 28);

  const GridTopology k2 = complete_candidate_graph(2);
  REQUIRE(k2.n_edges() == 1);
  Eigen::MatrixXi expected(1, 2);
  expected << 1, -1;
  CHECK(k2.incidence() == expected);

  const GridTopology k5 = complete_candidate_graph(5);
  CHECK(k5.n_edges() == 10);
  const Eigen::VectorXi degree = k5.incidence().cwiseAbs().colwise().sum().transpose();
  CHECK((degree.array() == 4).all());

  CHECK_THROWS_AS(complete_candidate_graph(1), InvalidArgument);
}

TEST_CASE("incidence rows carry one +1 at the lower bus and one -1") {
  const GridTopology topo = GridTopology::from_edges(5, {{3, 1}, {0, 4}, {2, 3}});
  for (Index i = 0; i < topo.n_edges(); ++i) {
    const auto row = topo.incidence().row(i);
    CHECK(row.sum() == 0);
    CHECK(row.cwiseAbs().sum() == 2);
    CHECK(row(topo.endpoints()(i, 0)) == 1);
    CHECK(row(topo.endpoints()(i, 1)) == -1);
    CHECK(topo.endpoints()(i, 0) < topo.endpoints()(i, 1));
  }
  CHECK(topo.find(1, 3).value() == 0);
  CHECK(topo.find(3, 1).value() == 0);
  CHECK_FALSE(topo.find(0, 1).has_value());
}

TEST_CASE("from_edges rejects malformed edge lists") {
  CHECK_THROWS_AS(GridTopology::from_edges(3, {{1, 1}}), InvalidArgument);
  CHECK_THROWS_AS(GridTopology::from_edges(3, {{0, 1}, {1, 0}}), InvalidArgument);
  CHECK_THROWS_AS(GridTopology::from_edges(3, {{0, 3}}), InvalidArgument);
  CHECK_THROWS_AS(GridTopology::from_edges(0, {}), InvalidArgument);
}

TEST_CASE("restrict_topology") {
  const GridTopology k8 = complete_candidate_graph(8);
  const std::vector<Index> seven{0, 3, 5, 9, 14, 20, 27};
  const GridTopology sub = restrict_topology(k8, seven);
  CHECK(sub.n_edges() == 7);
  CHECK(sub.edge(0) == k8.edge(0));
  CHECK(sub.edge(6) == k8.edge(27));

  std::vector<Index> all(28);
  std::iota(all.begin(), all.end(), Index{0});
  CHECK(restrict_topology(k8, all) == k8);

  const GridTopology empty = restrict_topology(k8, std::vector<Index>{});
  CHECK(empty.n_edges() == 0);
  CHECK(empty.n_bus() == 8);

  CHECK_THROWS_AS(restrict_topology(k8, std::vector<Index>{28}), InvalidArgument);
}

TEST_CASE("assemble_admittance examples") {
  {
    const GridTopology topo = GridTopology::from_edges(2, {{0, 1}});
    LineParams p{Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, -2.0)};
    const AdmittanceMatrix y = assemble_admittance(topo, p);
    Eigen::Matrix2d G, B;
    G << 1, -1, -1, 1;
    B << -2, 2, 2, -2;
    CHECK(y.G == G);
    CHECK(y.B == B);
  }
  {
    const GridTopology topo = complete_candidate_graph(4);
    const AdmittanceMatrix y = assemble_admittance(topo, LineParams::zeros(6));
    CHECK(y.G.isZero(0.0));
    CHECK(y.B.isZero(0.0));
  }
  {
    const GridTopology topo = GridTopology::from_edges(3, {{0, 1}, {1, 2}});
    LineParams p{Eigen::Vector2d(1.0, 2.0), Eigen::Vector2d::Zero()};
    const AdmittanceMatrix y = assemble_admittance(topo, p);
    CHECK(y.G.diagonal() == Eigen::Vector3d(1.0, 3.0, 2.0));
  }
  CHECK_THROWS_AS(assemble_admittance(complete_candidate_graph(3), LineParams::zeros(2)),
                  InvalidArgument);
}

TEST_CASE("admittance rows sum to zero and restriction matches zeroing") {
  std::mt19937_64 rng(7);
  // Multiples of 1/8 keep every partial sum exact, so the zero row sum is exact.
  std::uniform_int_distribution<int> u(-40, 40);
  std::bernoulli_distribution coin(0.4);
  for (int trial = 0; trial < 25; ++trial) {
    const GridTopology k6 = complete_candidate_graph(6);
    LineParams p = LineParams::zeros(k6.n_edges());
    for (Index j = 0; j < p.size(); ++j) {
      p.g(j) = u(rng) / 8.0;
      p.b(j) = u(rng) / 8.0;
    }
    const AdmittanceMatrix full = assemble_admittance(k6, p);
    CHECK((full.G.rowwise().sum().array() == 0.0).all());
    CHECK((full.B.rowwise().sum().array() == 0.0).all());

    std::vector<Index> keep;
    LineParams zeroed = p;
    for (Index j = 0; j < p.size(); ++j) {
      if (coin(rng)) {
        keep.push_back(j);
      } else {
        zeroed.g(j) = 0.0;
        zeroed.b(j) = 0.0;
      }
    }
    const GridTopology sub = restrict_topology(k6, keep);
    LineParams sub_p = LineParams::zeros(sub.n_edges());
    for (std::size_t k = 0; k < keep.size(); ++k) {
      sub_p.g(static_cast<Index>(k)) = p.g(keep[k]);
      sub_p.b(static_cast<Index>(k)) = p.b(keep[k]);
    }
    const AdmittanceMatrix a = assemble_admittance(sub, sub_p);
    const AdmittanceMatrix b = assemble_admittance(k6, zeroed);
    CHECK((a.G - b.G).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((a.B - b.B).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("admittance row sums vanish to round-off for arbitrary reals") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  const GridTopology k7 = complete_candidate_graph(7);
  LineParams p = LineParams::zeros(k7.n_edges());
  for (Index j = 0; j < p.size(); ++j) {
    p.g(j) = u(rng);
    p.b(j) = u(rng);
  }
  const AdmittanceMatrix y = assemble_admittance(k7, p);
  CHECK(y.G.rowwise().sum().cwiseAbs().maxCoeff() < 1e-13);
  CHECK(y.B.rowwise().sum().cwiseAbs().maxCoeff() < 1e-13);
  CHECK(y.G.isApprox(y.G.transpose(), 0.0));
}

TEST_CASE("incidence of a connected edge set has rank n-1") {
  const GridTopology tree = fixtures::feeder8();
  const Eigen::MatrixXd s = tree.incidence().cast<double>();
  CHECK(Eigen::FullPivLU<Eigen::MatrixXd>(s).rank() == 7);

  const GridTopology k5 = complete_candidate_graph(5);
  CHECK(Eigen::FullPivLU<Eigen::MatrixXd>(k5.incidence().cast<double>()).rank() == 4);

  // Two components lose one more rank.
  const GridTopology split = GridTopology::from_edges(5, {{0, 1}, {2, 3}, {3, 4}});
  CHECK(Eigen::FullPivLU<Eigen::MatrixXd>(split.incidence().cast<double>()).rank() == 3);
}

TEST_CASE("align_params and edge_positions") {
  const GridTopology k8 = complete_candidate_graph(8);
  const GridTopology tree = fixtures::feeder8();
  const LineParams p = fixtures::feeder8_params();
  const LineParams aligned = align_params(tree, p, k8);
  CHECK(aligned.size() == 28);
  CHECK(aligned.g.sum() == doctest::Approx(p.g.sum()));
  const auto pos = edge_positions(tree, k8);
  REQUIRE(pos.size() == 7);
  for (std::size_t k = 0; k < pos.size(); ++k) {
    CHECK(k8.edge(pos[k]) == tree.edge(static_cast<Index>(k)));
    CHECK(aligned.b(pos[k]) == p.b(static_cast<Index>(k)));
  }
  CHECK_THROWS_AS(edge_positions(k8, tree), InvalidArgument);
}
