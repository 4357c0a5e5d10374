#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "hes/rng.hpp"
#include "hes/theory.hpp"

using namespace hes;
using namespace hes::theory;

namespace {

std::vector<double> eigen_oracle(const DenseMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  const auto& v = solver.eigenvalues();
  return {v.data(), v.data() + v.size()};
}

std::vector<double> grid() {
  std::vector<double> g;
  for (int i = 0; i <= 10; ++i) g.push_back(i / 10.0);
  return g;
}

}  // namespace

TEST_CASE("expected propagation examples") {
  CHECK(expected_propagation(3, 0.0, 0.0).matrix == DenseMatrix::Identity(6, 6));
  CHECK(expected_propagation(1, 0.7, 0.0).matrix == DenseMatrix::Identity(2, 2));
  const auto e = expected_propagation(3, 0.5, 0.1);
  CHECK(e.matrix(0, 0) == doctest::Approx(1.0 / 2.3).epsilon(1e-14));
  CHECK(e.matrix(0, 1) == doctest::Approx(0.5 / 2.3).epsilon(1e-14));
  CHECK(e.matrix(0, 3) == doctest::Approx(0.1 / 2.3).epsilon(1e-14));
  for (auto p : grid())
    for (auto q : grid()) {
      if (q > p) continue;
      const auto m = expected_propagation(4, p, q).matrix;
      for (Index i = 0; i < m.rows(); ++i) CHECK(std::abs(m.row(i).sum() - 1.0) <= 1e-12);
    }
  CHECK_THROWS(expected_propagation(3, 0.1, 0.5));
  CHECK_THROWS(expected_propagation(0, 0.5, 0.1));
  CHECK_THROWS(expected_propagation(3, 1.5, 0.1));
}

TEST_CASE("closed-form eigenvalue examples") {
  const auto s0 = eigenvalues_closed_form(4, 0.0, 0.0);
  CHECK(s0.lambda0 == 1.0);
  CHECK(s0.lambda1 == 1.0);
  CHECK(s0.lambda_rest == 1.0);
  CHECK(eigenvalues_closed_form(5, 1.0, 0.0).lambda_rest == 0.0);
  const auto s = eigenvalues_closed_form(3, 0.5, 0.1);
  CHECK(s.lambda_rest == doctest::Approx(0.5 / 2.3).epsilon(1e-14));
  CHECK(s.rest_multiplicity == 4);
}

TEST_CASE("closed form matches both eigensolvers over the grid") {
  double worst = 0.0;
  for (Index n = 2; n <= 10; ++n)
    for (auto p : grid())
      for (auto q : grid()) {
        if (q > p) continue;
        const auto m = expected_propagation(n, p, q).matrix;
        const auto closed = eigenvalues_closed_form(n, p, q).sorted();
        const auto jacobi = symmetric_eigenvalues(m);
        const auto oracle = eigen_oracle(m);
        REQUIRE(closed.size() == static_cast<std::size_t>(2 * n));
        for (std::size_t i = 0; i < closed.size(); ++i) {
          worst = std::max(worst, std::abs(closed[i] - oracle[i]));
          worst = std::max(worst, std::abs(jacobi[i] - oracle[i]));
        }
      }
  CHECK(worst <= 1e-9);
}

TEST_CASE("eigenvalue multiplicities") {
  for (Index n = 2; n <= 10; ++n)
    for (auto p : grid())
      for (auto q : grid()) {
        if (q > p) continue;
        const auto s = eigenvalues_closed_form(n, p, q);
        // distinct values only; coincident closed-form values merge counts
        if (std::abs(s.lambda0 - s.lambda1) < 1e-6 || std::abs(s.lambda0 - s.lambda_rest) < 1e-6 ||
            std::abs(s.lambda1 - s.lambda_rest) < 1e-6)
          continue;
        const auto numeric = symmetric_eigenvalues(expected_propagation(n, p, q).matrix);
        const auto count = [&](double target) {
          return std::count_if(numeric.begin(), numeric.end(), [&](double v) { return std::abs(v - target) <= 1e-8; });
        };
        CHECK(count(s.lambda0) == 1);
        CHECK(count(s.lambda1) == 1);
        CHECK(count(s.lambda_rest) == 2 * n - 2);
      }
}

TEST_CASE("smallest eigenvalue") {
  CHECK(smallest_eigenvalue(4, 1.0, 0.0).value == 0.0);
  CHECK(smallest_eigenvalue(4, 0.0, 0.0).value == 1.0);
  const auto s = smallest_eigenvalue(3, 0.5, 0.1);
  CHECK(s.minimality_guaranteed);
  const auto numeric = eigen_oracle(expected_propagation(3, 0.5, 0.1).matrix);
  CHECK(std::abs(s.value - numeric.front()) <= 1e-9);
  CHECK(s.value == doctest::Approx(0.217391).epsilon(1e-6));
  CHECK(!smallest_eigenvalue(3, 0.1, 0.3).minimality_guaranteed);
}

TEST_CASE("Jacobi solver on random symmetric matrices") {
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const Index n = 1 + static_cast<Index>(rng.below(30));
    DenseMatrix a(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j <= i; ++j) a(i, j) = a(j, i) = rng.normal();
    const auto got = symmetric_eigenvalues(a);
    const auto want = eigen_oracle(a);
    for (Index i = 0; i < n; ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-9);
  }
  DenseMatrix asym = DenseMatrix::Identity(2, 2);
  asym(0, 1) = 1.0;
  CHECK_THROWS(symmetric_eigenvalues(asym));
}

TEST_CASE("layer products") {
  CHECK(gntk_product(1, 3, Schedule::quadratic(3)) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  CHECK(gntk_product_reduced(1, 3) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  CHECK(gntk_product(5, 4, Schedule::custom(std::vector<double>(5, 0.0), std::vector<double>(5, 0.0))) == 1.0);
  CHECK_THROWS(gntk_product(0, 3, Schedule::quadratic(3)));
  CHECK_THROWS(Schedule::quadratic(2));
  CHECK_THROWS(gntk_product(3, 3, Schedule::custom({0.1}, {0.0})));
  for (Index n : {3, 5, 10}) {
    const auto sched = Schedule::quadratic(n);
    for (Index l = 1; l <= 50; ++l)
      CHECK(gntk_product(l, n, sched) == doctest::Approx(gntk_product_reduced(l, n)).epsilon(1e-12));
  }
}

TEST_CASE("products are non-increasing in depth when factors are <= 1") {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> p(30), q(30);
    for (std::size_t i = 0; i < 30; ++i) {
      p[i] = rng.uniform();
      q[i] = p[i] * rng.uniform();
    }
    const auto sched = Schedule::custom(p, q);
    double prev = 1.0;
    for (Index l = 1; l <= 30; ++l) {
      const double v = gntk_product(l, 4, sched);
      CHECK(v <= prev);
      prev = v;
    }
  }
}

TEST_CASE("limit value") {
  // Independent long-double evaluation of 2 csch(sqrt2 pi) sin(pi/sqrt2).
  const long double r2pi = std::sqrt(2.0L) * std::numbers::pi_v<long double>;
  const long double n3 = 2.0L / std::sinh(r2pi) * std::sin(std::numbers::pi_v<long double> / std::sqrt(2.0L));
  CHECK(std::abs(limit_value(3) - static_cast<double>(n3)) <= 1e-15);
  CHECK(std::abs(limit_value(3) - 0.03742) <= 5e-5);
  CHECK(std::abs(gntk_product_reduced(100000, 3) / limit_value(3) - 1.0) <= 1e-4);
  for (Index n : {3, 5, 10})
    CHECK(std::abs(gntk_product(10000, n, Schedule::quadratic(n)) / limit_value(n) - 1.0) <= 1e-3);
  double prev_gap = INFINITY;
  for (Index n = 3; n <= 50; ++n) {
    CHECK(limit_value(n) > 0.0);
    const double gap = std::abs(limit_value_approx(n) - limit_value(n)) / limit_value(n);
    CHECK(gap < prev_gap);
    prev_gap = gap;
  }
  CHECK_THROWS(limit_value(2));
}

TEST_CASE("report layout") {
  const auto r = report(3, 0.5, 0.1, 100);
  CHECK(r["eigen"]["max_abs_error"].get<double>() <= 1e-9);
  CHECK(r["product"]["limit"].get<double>() == limit_value(3));
  const auto r2 = report(2, 0.5, 0.1, 10);
  CHECK(r2["product"]["limit"].is_null());
}
