#pragma once

#include <Eigen/Dense>

#include <cmath>

namespace nelson {

/// n-point Gauss-Legendre rule on [-1, 1]. Nodes start from the eigenvalues
/// of the Jacobi matrix (Golub-Welsch) and are polished by Newton steps on
/// the Legendre recurrence; weights use 2 / ((1 - x^2) P_n'(x)^2).
template <typename Scalar = double>
class GaussLegendre {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  explicit GaussLegendre(int n) : nodes_(n), weights_(n) {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    Matrix jacobi = Matrix::Zero(n, n);
    for (int k = 1; k < n; ++k) {
      const Scalar beta = Scalar(k) / std::sqrt(Scalar(4 * k * k - 1));
      jacobi(k, k - 1) = jacobi(k - 1, k) = beta;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> solver(jacobi, Eigen::EigenvaluesOnly);
    for (int i = 0; i < n; ++i) {
      Scalar x = solver.eigenvalues()(i);
      Scalar dp = 1;
      for (int it = 0; it < 3; ++it) {
        auto [p, d] = legendre(n, x);
        dp = d;
        x -= p / d;
      }
      dp = legendre(n, x).second;
      nodes_(i) = x;
      weights_(i) = 2 / ((1 - x * x) * dp * dp);
    }
  }

  int size() const { return static_cast<int>(nodes_.size()); }
  const Vector& nodes() const { return nodes_; }
  const Vector& weights() const { return weights_; }

  /// Composite rule over `panels` equal sub-intervals of [a, b].
  template <typename F>
  Scalar integrate(F&& f, Scalar a, Scalar b, int panels = 1) const {
    const Scalar width = (b - a) / Scalar(panels);
    Scalar total = 0;
    for (int p = 0; p < panels; ++p) {
      const Scalar lo = a + width * Scalar(p);
      const Scalar half = width / 2, mid = lo + half;
      Scalar sum = 0;
      for (int i = 0; i < size(); ++i) sum += weights_(i) * f(mid + half * nodes_(i));
      total += half * sum;
    }
    return total;
  }

 private:
  static std::pair<Scalar, Scalar> legendre(int n, Scalar x) {
    Scalar p0 = 1, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const Scalar p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    const Scalar dp = n * (x * p1 - p0) / (x * x - 1);
    return {p1, dp};
  }

  Vector nodes_;
  Vector weights_;
};

}  // namespace nelson
