#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "pan/error.hpp"
#include "pan/met.hpp"

using namespace pan;

namespace {

const Graph& k3() {
  static const Graph g = build_graph(3, {{0, 1}, {1, 2}, {0, 2}});
  return g;
}

}  // namespace

TEST_CASE("boltzmann_weights") {
  CHECK(boltzmann_weights(0, 0.3).w == std::vector<double>{1.0});
  const auto w = boltzmann_weights(2, 1.0).w;
  REQUIRE(w.size() == 3);
  CHECK(w[0] == 1.0);
  CHECK(w[1] == doctest::Approx(0.36787944117144233).epsilon(1e-15));
  CHECK(w[2] == doctest::Approx(0.1353352832366127).epsilon(1e-15));
  CHECK(boltzmann_weights(1, 1e12).w[1] == doctest::Approx(1.0).epsilon(1e-11));
  CHECK_THROWS_AS(boltzmann_weights(2, 0.0), Error);
  CHECK_THROWS_AS(boltzmann_weights(2, -1.0), Error);
}

TEST_CASE("met_matrix: cutoff 0 is the identity") {
  std::mt19937_64 rng(5);
  const Graph g = oracle::random_graph(5, 0.5, rng);
  for (auto norm : {Normalization::RowStochastic, Normalization::Symmetric}) {
    const auto met = met_matrix(g, boltzmann_weights(0, 1.0), norm);
    CHECK(max_abs_diff(met.m, DenseMatrix::identity(5)) == 0.0);
    CHECK(met_diag(met) == std::vector<double>(5, 1.0));
  }
}

TEST_CASE("met_matrix: K3 row-stochastic") {
  const auto met = met_matrix(k3(), boltzmann_weights(2, 1.0), Normalization::RowStochastic);
  for (std::size_t i = 0; i < 3; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < 3; ++j) row += met.m(i, j);
    CHECK(row == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK(met.diag[0] == doctest::Approx(met.diag[1]).epsilon(1e-15));
  CHECK(met.diag[1] == doctest::Approx(met.diag[2]).epsilon(1e-15));
  // S_ii = 1 + 2e^-2, Z_i = 1 + 2e^-1 + 4e^-2 (hand count).
  const double e1 = std::exp(-1.0), e2 = std::exp(-2.0);
  CHECK(met.diag[0] == doctest::Approx((1 + 2 * e2) / (1 + 2 * e1 + 4 * e2)).epsilon(1e-14));
}

TEST_CASE("met_matrix: P2 symmetric by hand") {
  PathWeights w{1, {1.0, 1.0}, false, 1.0};
  const auto met = met_matrix(build_graph(2, {{0, 1}}), w, Normalization::Symmetric);
  CHECK(met.z == std::vector<double>{2.0, 2.0});
  CHECK(max_abs_diff(met.m, DenseMatrix{{0.5, 0.5}, {0.5, 0.5}}) < 1e-15);
  CHECK(met.diag[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(met.diag[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("met_matrix: star centre has the largest diagonal") {
  const Graph star = build_graph(4, {{0, 1}, {0, 2}, {0, 3}});
  PathWeights w{2, {1.0, 1.0, 1.0}, false, 1.0};
  const auto met = met_matrix(star, w, Normalization::RowStochastic);
  for (std::size_t leaf = 1; leaf < 4; ++leaf) CHECK(met.diag[0] > met.diag[leaf]);
}

TEST_CASE("met_matrix: matches brute-force enumeration") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> pos(0.05, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng() % 6;
    auto edges = oracle::random_edges(n, 0.5, rng);
    const Graph g = build_graph(n, edges);
    PathWeights w;
    w.cutoff = rng() % 4;
    for (std::size_t l = 0; l <= w.cutoff; ++l) w.w.push_back(pos(rng));
    for (bool sym : {false, true}) {
      const auto met = met_matrix(g, w, sym ? Normalization::Symmetric : Normalization::RowStochastic);
      const auto ref = oracle::met(n, edges, w.w, sym);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) CHECK(std::abs(met.m(i, j) - ref[i][j]) < 1e-12);
    }
  }
}

TEST_CASE("met_matrix: bad weights") {
  const Graph g = build_graph(2, {{0, 1}});
  PathWeights wrong_len{2, {1.0, 1.0}, false, 1.0};
  CHECK_THROWS_AS(met_matrix(g, wrong_len), Error);
  PathWeights zero_w0{1, {0.0, 1.0}, false, 1.0};
  CHECK_THROWS_AS(met_matrix(g, zero_w0), Error);
  // An isolated node with w[0] = 0 has an empty row of S.
  const auto powers = walk_count_powers(build_graph(2, {}), 1);
  const double w[] = {0.0, 1.0};
  try {
    partition_values(powers, w);
    FAIL("expected ZeroPartition");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroPartition);
  }
}

TEST_CASE("normalized_powers sum back to the MET matrix") {
  std::mt19937_64 rng(8);
  const Graph g = oracle::random_graph(5, 0.6, rng);
  const auto w = boltzmann_weights(3, 0.7);
  const auto powers = walk_count_powers(g, 3);
  const auto z = partition_values(powers, w.w);
  for (auto norm : {Normalization::RowStochastic, Normalization::Symmetric}) {
    const auto parts = normalized_powers(powers, z, norm);
    DenseMatrix total(5, 5, 0.0);
    for (std::size_t l = 0; l < parts.size(); ++l) {
      DenseMatrix p = parts[l];
      p *= w.w[l];
      total += p;
    }
    CHECK(max_abs_diff(total, met_matrix(g, w, norm).m) < 1e-14);
  }
}

TEST_CASE("parse_normalization") {
  CHECK(parse_normalization("sym") == Normalization::Symmetric);
  CHECK(parse_normalization("row") == Normalization::RowStochastic);
  CHECK(parse_normalization(to_string(Normalization::RowStochastic)) == Normalization::RowStochastic);
  CHECK_THROWS_AS(parse_normalization("spectral"), Error);
}
