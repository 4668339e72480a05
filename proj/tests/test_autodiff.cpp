#include <doctest.h>

#include <cmath>
#include <random>

#include "pan/autodiff.hpp"
#include "pan/error.hpp"

using namespace pan;

namespace {

DenseMatrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  DenseMatrix m(r, c);
  for (double& x : m.data()) x = u(rng);
  return m;
}

// Reduces any [n x d] output to a scalar with a non-uniform upstream gradient.
Tensor squash(const Tensor& out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Tensor proj = out.tape().constant(random_matrix(out.cols(), 1, rng));
  return sum(tanh(matmul(out, proj)));
}

void expect_gradients_match(ParameterStore& params, const std::function<Tensor(Tape&)>& f, double tol = 1e-6) {
  const auto report = grad_check(params, f, 1e-5, tol);
  for (const auto& g : report.groups) {
    INFO("group " << g.group << " rel err " << g.max_rel_error);
    CHECK(g.passed);
  }
}

}  // namespace

TEST_CASE("ParameterStore") {
  ParameterStore ps;
  CHECK(ps.add("a.W", DenseMatrix(2, 3)) == 0);
  CHECK(ps.add("b", DenseMatrix(1, 1)) == 1);
  CHECK_THROWS_AS(ps.add("a.W", DenseMatrix(1, 1)), Error);
  CHECK(ps.find("b") == 1u);
  CHECK_FALSE(ps.find("c").has_value());
  CHECK(ps.element_count() == 7);
  CHECK(parameter_group("conv1.W") == "conv1");
  CHECK(parameter_group("head") == "head");
}

TEST_CASE("relu backward and sigmoid slope") {
  ParameterStore ps;
  ps.add("x", DenseMatrix{{-1.0, 2.0}});
  ps.add("z", DenseMatrix{{0.0}});
  Tape tape(&ps);
  const Tensor x = tape.parameter("x");
  const Tensor y = relu(x);
  const Tensor xs[] = {x};
  const auto g = tape.backward_to(sum(y), xs);
  CHECK(g[0] == DenseMatrix{{0.0, 1.0}});

  const Tensor z = tape.parameter("z");
  const Tensor s = sigmoid(z);
  CHECK(s.scalar() == 0.5);
  const Tensor zs[] = {z};
  CHECK(tape.backward_to(s, zs)[0](0, 0) == 0.25);
}

TEST_CASE("sum of a parameter gives ones; unused parameters get zero") {
  ParameterStore ps;
  ps.add("W", DenseMatrix{{1, 2}, {3, 4}});
  ps.add("p", DenseMatrix{{5}});
  Tape tape(&ps);
  const auto grads = tape.backward(sum(tape.parameter("W")));
  CHECK(grads[0] == DenseMatrix(2, 2, 1.0));
  CHECK(grads[1] == DenseMatrix(1, 1, 0.0));
}

TEST_CASE("zero upstream gives zero gradients") {
  ParameterStore ps;
  ps.add("W", DenseMatrix{{1, 2}, {3, 4}});
  Tape tape(&ps);
  const Tensor loss = scale(sum(tape.parameter("W")), 0.0);
  CHECK(tape.backward(loss)[0] == DenseMatrix(2, 2, 0.0));
}

TEST_CASE("backward rejects a non-scalar loss and repeated backward is stable") {
  ParameterStore ps;
  ps.add("W", DenseMatrix{{1, 2}});
  Tape tape(&ps);
  const Tensor w = tape.parameter("W");
  CHECK_THROWS_AS(tape.backward(w), Error);
  const Tensor loss = sum(exp(w));
  CHECK(tape.backward(loss) == tape.backward(loss));
}

TEST_CASE("non-finite values name the op") {
  Tape tape;
  const Tensor x = tape.constant(DenseMatrix{{800.0}});
  try {
    exp(x);
    FAIL("expected NonFiniteValue");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteValue);
    CHECK(std::string(e.what()).find("exp") != std::string::npos);
  }
}

TEST_CASE("shape mismatches throw") {
  Tape tape;
  const Tensor a = tape.constant(DenseMatrix(2, 3));
  const Tensor b = tape.constant(DenseMatrix(2, 3));
  CHECK_THROWS_AS(matmul(a, b), Error);
  CHECK_THROWS_AS(add(a, tape.constant(DenseMatrix(3, 2))), Error);
  CHECK_THROWS_AS(column_mean(tape.constant(DenseMatrix(0, 3))), Error);
}

TEST_CASE("grad_check: linear map is exact to rounding") {
  std::mt19937_64 rng(1);
  ParameterStore ps;
  ps.add("lin.W", random_matrix(3, 2, rng));
  const DenseMatrix x = random_matrix(4, 3, rng);
  const auto report = grad_check(ps, [&](Tape& t) { return sum(matmul(t.constant(x), t.parameter("lin.W"))); });
  CHECK(report.passed);
  CHECK(report.worst_rel_error < 1e-9);
}

TEST_CASE("grad_check flags inputs near a relu kink") {
  ParameterStore ps;
  ps.add("x", DenseMatrix{{1e-7, 1.0}});
  const auto report = grad_check(ps, [](Tape& t) { return sum(relu(t.parameter("x"))); });
  CHECK(report.near_kink);
  CHECK(report.min_kink_distance == doctest::Approx(1e-7));
}

TEST_CASE("primitive gradients agree with finite differences") {
  std::mt19937_64 rng(42);
  ParameterStore ps;
  ps.add("a", random_matrix(3, 4, rng));
  ps.add("b", random_matrix(4, 2, rng));
  ps.add("c", random_matrix(3, 4, rng));
  ps.add("bias", random_matrix(1, 4, rng));
  ps.add("s", DenseMatrix{{0.7}});
  ps.add("g", random_matrix(3, 1, rng));
  ps.add("sq", random_matrix(3, 3, rng));
  ps.add("w", random_matrix(3, 1, rng));
  // Keep relu inputs away from 0.
  for (double& v : ps[0].value.data())
    if (std::abs(v) < 0.05) v = 0.3;

  SUBCASE("matmul") { expect_gradients_match(ps, [](Tape& t) { return squash(matmul(t.parameter("a"), t.parameter("b")), 1); }); }
  SUBCASE("add / broadcast") {
    expect_gradients_match(ps, [](Tape& t) {
      return squash(add_row_broadcast(add(t.parameter("a"), t.parameter("c")), t.parameter("bias")), 2);
    });
  }
  SUBCASE("scale") {
    expect_gradients_match(ps, [](Tape& t) { return squash(scale(scale(t.parameter("a"), t.parameter("s")), -1.5), 3); });
  }
  SUBCASE("relu / sigmoid / tanh / exp") {
    expect_gradients_match(ps, [](Tape& t) {
      const Tensor a = t.parameter("a");
      return squash(add(add(relu(a), sigmoid(a)), add(tanh(a), exp(a))), 4);
    });
  }
  SUBCASE("row_gather with repeats") {
    const std::vector<std::size_t> rows{2, 0, 2};
    expect_gradients_match(ps, [&](Tape& t) { return squash(row_gather(t.parameter("a"), rows), 5); });
  }
  SUBCASE("row_scale") {
    expect_gradients_match(ps, [](Tape& t) { return squash(row_scale(t.parameter("a"), t.parameter("g")), 6); });
  }
  SUBCASE("column_mean and concat_rows") {
    expect_gradients_match(ps, [](Tape& t) {
      const Tensor parts[] = {t.parameter("a"), t.parameter("c"), t.parameter("bias")};
      return squash(column_mean(concat_rows(parts)), 7);
    });
  }
  SUBCASE("diagonal") {
    expect_gradients_match(ps, [](Tape& t) { return squash(diagonal(t.parameter("sq")), 8); });
  }
  SUBCASE("linear_combination") {
    std::vector<DenseMatrix> basis{random_matrix(2, 2, rng), random_matrix(2, 2, rng), random_matrix(2, 2, rng)};
    expect_gradients_match(ps, [&](Tape& t) { return squash(linear_combination(basis, t.parameter("w")), 9); });
  }
  SUBCASE("batch_norm, training mode") {
    expect_gradients_match(ps, [](Tape& t) {
      return squash(batch_norm(t.parameter("a"), t.parameter("bias"), t.parameter("bias"), nullptr, true), 10);
    });
  }
  SUBCASE("batch_norm, evaluation mode") {
    BatchNormState state(4);
    state.running_mean = random_matrix(1, 4, rng);
    state.running_var = random_matrix(1, 4, rng, 0.5, 2.0);
    expect_gradients_match(ps, [&](Tape& t) {
      return squash(batch_norm(t.parameter("c"), t.parameter("bias"), t.parameter("bias"), state), 11);
    });
  }
}

TEST_CASE("embedding_lookup_sum") {
  ParameterStore ps;
  ps.add("t0", DenseMatrix{{1}, {2}});
  ps.add("t1", DenseMatrix{{10}, {20}});
  Tape tape(&ps);
  const Tensor tables[] = {tape.parameter("t0"), tape.parameter("t1")};
  const Tensor out = embedding_lookup_sum(tables, IntMatrix{{1, 0}, {1, 1}});
  CHECK(out.value() == DenseMatrix{{12}, {22}});
  const auto g = tape.backward(sum(out));
  CHECK(g[0] == DenseMatrix{{0}, {2}});
  CHECK(g[1] == DenseMatrix{{1}, {1}});
  CHECK_THROWS_AS(embedding_lookup_sum(tables, IntMatrix{{2, 0}}), Error);
  CHECK_THROWS_AS(embedding_lookup_sum(tables, IntMatrix{{-1, 0}}), Error);
}

TEST_CASE("batch_norm running statistics") {
  Tape tape;
  const Tensor x = tape.constant(DenseMatrix{{1.0}, {3.0}});
  const Tensor gamma = tape.constant(DenseMatrix{{1.0}});
  const Tensor beta = tape.constant(DenseMatrix{{0.0}});
  BatchNormState state(1);
  const Tensor y = batch_norm(x, gamma, beta, &state, true);
  // Biased variance 1 normalizes; unbiased variance 2 feeds the running average.
  CHECK(y.value()(0, 0) == doctest::Approx(-1.0 / std::sqrt(1.0 + 1e-5)));
  CHECK(state.running_mean(0, 0) == doctest::Approx(0.2));
  CHECK(state.running_var(0, 0) == doctest::Approx(0.9 * 1.0 + 0.1 * 2.0));
  const Tensor e = batch_norm(x, gamma, beta, state);
  CHECK(e.value()(0, 0) == doctest::Approx((1.0 - 0.2) / std::sqrt(1.1 + 1e-5)));
}
