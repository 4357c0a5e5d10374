#pragma once

#include <functional>
#include <vector>

#include <json.hpp>

#include "hes/types.hpp"

namespace hes::theory {

/// Expected row-normalized, self-looped adjacency of a balanced two-block
/// SBM with N nodes per block: diagonal 1/d, intra-block p/d, inter-block
/// q/d, d = (N-1)p + Nq + 1.
struct SbmExpectation {
  Index n = 0;
  double p = 0.0;
  double q = 0.0;
  DenseMatrix matrix;
};

/// Requires N >= 1 and 0 <= q <= p <= 1.
SbmExpectation expected_propagation(Index n, double p, double q);

struct Spectrum {
  double lambda0 = 1.0;
  double lambda1 = 0.0;
  double lambda_rest = 0.0;
  Index rest_multiplicity = 0;  // 2N - 2

  /// All 2N eigenvalues, ascending.
  std::vector<double> sorted() const;
};

Spectrum eigenvalues_closed_form(Index n, double p, double q);

struct SmallestEigenvalue {
  double value = 0.0;
  /// False when p <= q: the formula is returned but need not be the minimum.
  bool minimality_guaranteed = true;
};

/// (1 - p) / ((N-1)p + Nq + 1)
SmallestEigenvalue smallest_eigenvalue(Index n, double p, double q);

/// Cyclic Jacobi rotations for a dense symmetric matrix. Returns eigenvalues
/// ascending. Throws if the input is not symmetric within `symmetry_tol`.
std::vector<double> symmetric_eigenvalues(const DenseMatrix& a, double symmetry_tol = 1e-12, int max_sweeps = 100);

struct LayerProbabilities {
  double p = 0.0;
  double q = 0.0;
};

/// Per-layer (p_i, q_i), i = 1..L.
class Schedule {
 public:
  /// p_i = 1/((N-1) i^2), q_i = 1/(N i^2). Requires N >= 3.
  static Schedule quadratic(Index n);
  /// Explicit sequences; both must have at least L entries when evaluated.
  static Schedule custom(std::vector<double> p, std::vector<double> q);

  LayerProbabilities at(Index layer) const;  // 1-based
  bool is_quadratic() const { return quadratic_; }

 private:
  bool quadratic_ = false;
  Index n_ = 0;
  std::vector<double> p_;
  std::vector<double> q_;
};

/// Psi(L) = prod_{i=1}^L (1 - p_i) / ((N-1) p_i + N q_i + 1).
double gntk_product(Index layers, Index n, const Schedule& schedule);

/// Psi(L) for the quadratic schedule through its reduced factor
/// ((N-1) i^2 - 1) / ((N-1)(i^2 + 2)).
double gntk_product_reduced(Index layers, Index n);

/// lim Psi(L) = sqrt(2(N-1)) csch(sqrt(2) pi) sin(pi / sqrt(N-1)), N >= 3.
double limit_value(Index n);

/// The large-N form sqrt(2N) csch(sqrt(2) pi) sin(pi / sqrt(N)).
double limit_value_approx(Index n);

/// {"eigen": {...}, "product": {...}} for the given grid point and depth.
nlohmann::json report(Index n, double p, double q, Index layers);

}  // namespace hes::theory
