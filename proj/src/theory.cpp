#include "hes/theory.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>
#include <stdexcept>
#include <string>

namespace hes::theory {

namespace {

void check_probabilities(double p, double q) {
  if (!(p >= 0.0 && p <= 1.0 && q >= 0.0 && q <= 1.0))
    throw std::invalid_argument("SBM probabilities must lie in [0, 1]");
}

double expected_degree(Index n, double p, double q) {
  return static_cast<double>(n - 1) * p + static_cast<double>(n) * q + 1.0;
}

}  // namespace

SbmExpectation expected_propagation(Index n, double p, double q) {
  if (n < 1) throw std::invalid_argument("expected_propagation needs N >= 1");
  check_probabilities(p, q);
  if (q > p) throw std::invalid_argument("expected_propagation needs q <= p");
  const double d = expected_degree(n, p, q);
  SbmExpectation e{n, p, q, DenseMatrix(2 * n, 2 * n)};
  for (Index i = 0; i < 2 * n; ++i) {
    for (Index j = 0; j < 2 * n; ++j) {
      if (i == j)
        e.matrix(i, j) = 1.0 / d;
      else if (i / n == j / n)
        e.matrix(i, j) = p / d;
      else
        e.matrix(i, j) = q / d;
    }
  }
  return e;
}

std::vector<double> Spectrum::sorted() const {
  std::vector<double> v{lambda0, lambda1};
  v.insert(v.end(), static_cast<std::size_t>(rest_multiplicity), lambda_rest);
  std::sort(v.begin(), v.end());
  return v;
}

Spectrum eigenvalues_closed_form(Index n, double p, double q) {
  if (n < 1) throw std::invalid_argument("eigenvalues_closed_form needs N >= 1");
  check_probabilities(p, q);
  const double d = expected_degree(n, p, q);
  const auto nf = static_cast<double>(n);
  return {1.0, ((nf - 1.0) * p - nf * q + 1.0) / d, (1.0 - p) / d, 2 * n - 2};
}

SmallestEigenvalue smallest_eigenvalue(Index n, double p, double q) {
  if (n < 1) throw std::invalid_argument("smallest_eigenvalue needs N >= 1");
  check_probabilities(p, q);
  SmallestEigenvalue out{(1.0 - p) / expected_degree(n, p, q), p > q};
  if (!out.minimality_guaranteed)
    std::cerr << "warning: p <= q; (1-p)/d is not guaranteed to be the smallest eigenvalue\n";
  return out;
}

std::vector<double> symmetric_eigenvalues(const DenseMatrix& input, double symmetry_tol, int max_sweeps) {
  if (input.rows() != input.cols()) throw ShapeError("eigensolver needs a square matrix");
  const Index n = input.rows();
  if ((input - input.transpose()).cwiseAbs().maxCoeff() > symmetry_tol)
    throw std::invalid_argument("eigensolver input is not symmetric");
  DenseMatrix a = 0.5 * (input + input.transpose());
  const double scale = std::max(a.cwiseAbs().maxCoeff(), 1.0);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (std::sqrt(off) <= 1e-15 * scale) break;
    for (Index p = 0; p < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        // Rotation zeroing a(p, q).
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eig(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) eig[i] = a(i, i);
  std::sort(eig.begin(), eig.end());
  return eig;
}

Schedule Schedule::quadratic(Index n) {
  if (n < 3) throw std::invalid_argument("quadratic schedule needs N >= 3 (the first factor vanishes at N = 2)");
  Schedule s;
  s.quadratic_ = true;
  s.n_ = n;
  return s;
}

Schedule Schedule::custom(std::vector<double> p, std::vector<double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("custom schedule: p and q lengths differ");
  for (std::size_t i = 0; i < p.size(); ++i) check_probabilities(p[i], q[i]);
  Schedule s;
  s.p_ = std::move(p);
  s.q_ = std::move(q);
  return s;
}

LayerProbabilities Schedule::at(Index layer) const {
  if (layer < 1) throw std::invalid_argument("schedule layers are 1-based");
  if (quadratic_) {
    const auto i2 = static_cast<double>(layer) * static_cast<double>(layer);
    return {1.0 / (static_cast<double>(n_ - 1) * i2), 1.0 / (static_cast<double>(n_) * i2)};
  }
  if (layer > static_cast<Index>(p_.size()))
    throw std::invalid_argument("custom schedule shorter than requested depth");
  return {p_[layer - 1], q_[layer - 1]};
}

double gntk_product(Index layers, Index n, const Schedule& schedule) {
  if (layers < 1) throw std::invalid_argument("gntk_product needs L >= 1");
  if (n < 1) throw std::invalid_argument("gntk_product needs N >= 1");
  double psi = 1.0;
  for (Index i = 1; i <= layers; ++i) {
    const auto [p, q] = schedule.at(i);
    psi *= (1.0 - p) / expected_degree(n, p, q);
  }
  return psi;
}

double gntk_product_reduced(Index layers, Index n) {
  if (layers < 1) throw std::invalid_argument("gntk_product needs L >= 1");
  if (n < 3) throw std::invalid_argument("quadratic schedule needs N >= 3");
  const auto m = static_cast<double>(n - 1);
  double psi = 1.0;
  for (Index i = 1; i <= layers; ++i) {
    const auto i2 = static_cast<double>(i) * static_cast<double>(i);
    psi *= (m * i2 - 1.0) / (m * (i2 + 2.0));
  }
  return psi;
}

double limit_value(Index n) {
  if (n <= 2) throw std::invalid_argument("limit_value needs N >= 3");
  const double pi = std::numbers::pi;
  const double root2pi = std::numbers::sqrt2 * pi;
  const auto m = static_cast<double>(n - 1);
  return std::sqrt(2.0 * m) / std::sinh(root2pi) * std::sin(pi / std::sqrt(m));
}

double limit_value_approx(Index n) {
  if (n < 1) throw std::invalid_argument("limit_value_approx needs N >= 1");
  const double pi = std::numbers::pi;
  const auto nf = static_cast<double>(n);
  return std::sqrt(2.0 * nf) / std::sinh(std::numbers::sqrt2 * pi) * std::sin(pi / std::sqrt(nf));
}

nlohmann::json report(Index n, double p, double q, Index layers) {
  using nlohmann::json;
  json out;
  {
    const auto closed = eigenvalues_closed_form(n, p, q);
    json eig = {{"N", n}, {"p", p}, {"q", q}};
    eig["closed_form"] = {{"lambda0", closed.lambda0},
                          {"lambda1", closed.lambda1},
                          {"lambda_rest", closed.lambda_rest},
                          {"rest_multiplicity", closed.rest_multiplicity}};
    const auto smallest = smallest_eigenvalue(n, p, q);
    eig["smallest"] = {{"value", smallest.value}, {"minimality_guaranteed", smallest.minimality_guaranteed}};
    if (q <= p) {
      const auto numeric = symmetric_eigenvalues(expected_propagation(n, p, q).matrix);
      const auto expected = closed.sorted();
      double max_err = 0.0;
      for (std::size_t i = 0; i < numeric.size(); ++i) max_err = std::max(max_err, std::abs(numeric[i] - expected[i]));
      eig["numeric"] = numeric;
      eig["max_abs_error"] = max_err;
    } else {
      eig["numeric"] = nullptr;
      eig["max_abs_error"] = nullptr;
    }
    out["eigen"] = std::move(eig);
  }
  {
    json prod = {{"N", n}, {"L", layers}};
    if (n >= 3) {
      const double psi = gntk_product(layers, n, Schedule::quadratic(n));
      const double lim = limit_value(n);
      const double approx = limit_value_approx(n);
      prod["psi"] = psi;
      prod["limit"] = lim;
      prod["limit_approx"] = approx;
      prod["gap"] = psi / lim - 1.0;
      prod["approx_relative_gap"] = std::abs(approx - lim) / lim;
    } else {
      prod["psi"] = nullptr;
      prod["limit"] = nullptr;
      prod["note"] = "quadratic schedule undefined for N <= 2: the first factor ((N-1) - 1) vanishes";
    }
    out["product"] = std::move(prod);
  }
  return out;
}

}  // namespace hes::theory
