#pragma once

#include "patopa/features.hpp"
#include "patopa/grid_model.hpp"

#include <Eigen/Dense>

#include <string_view>
#include <vector>

namespace patopa {

enum class Method { kOls, kTls, kGlraDiag, kPatopa };

std::string_view to_string(Method method);
/// Accepts OLS, TLS, GLRA_DIAG, PATOPA (case-insensitive). Throws InvalidArgument.
Method parse_method(std::string_view name);

struct EstimationResult {
  Eigen::VectorXd g_hat;
  Eigen::VectorXd b_hat;
  double log_likelihood = 0.0;
  int iterations = 0;
  /// Validation-free log-likelihood of the current estimate, one entry per iteration.
  std::vector<double> ll_trace;
  /// Condition number of the fitted matrix [X^, y^], one entry per iteration.
  std::vector<double> cond_trace;
  Method method = Method::kOls;
  bool converged = true;
  /// Smallest singular value (TLS) or the Lagrange scale (diagonal GLRA).
  double sigma = 0.0;
  /// Fitted augmented matrix [X^, y^] (TLS and diagonal GLRA only).
  Eigen::MatrixXd fitted;

  LineParams params() const { return {g_hat, b_hat}; }
  /// Stacked [g; b].
  Eigen::VectorXd coefficients() const;
};

/// Weighted squared norm sum_ij w_ij a_ij^2 of a deviation matrix under a
/// diagonal covariance stored entry-wise in `weights`.
template <typename DerivedA, typename DerivedW>
typename DerivedA::Scalar sigma_norm(const Eigen::MatrixBase<DerivedA>& deviation,
                                     const Eigen::MatrixBase<DerivedW>& weights) {
  eigen_assert(deviation.rows() == weights.rows() && deviation.cols() == weights.cols());
  return (weights.array() * deviation.array().square()).sum();
}

/// Log-likelihood of a fixed coefficient vector a = [g; b] under the diagonal
/// error-in-variables model, up to an additive constant:
///
///   -sum_r (y_r - x_r^T a)^2 / (sum_k a_k^2 / w_rk + 1 / w_ry)
///
/// Each term is the weighted squared distance from row r of [X, y] to the
/// hyperplane {[x, y] : y = x^T a}.
template <typename DerivedX, typename DerivedY, typename DerivedA, typename DerivedW>
typename DerivedX::Scalar eiv_log_likelihood(const Eigen::MatrixBase<DerivedX>& X,
                                             const Eigen::MatrixBase<DerivedY>& y,
                                             const Eigen::MatrixBase<DerivedA>& a,
                                             const Eigen::MatrixBase<DerivedW>& weights) {
  using Scalar = typename DerivedX::Scalar;
  const Index k = X.cols();
  eigen_assert(a.size() == k && weights.cols() == k + 1 && weights.rows() == X.rows());
  const auto residual = (y - X * a).eval();
  const auto spread =
      (weights.leftCols(k).cwiseInverse() * a.cwiseAbs2()).eval();
  Scalar ll(0);
  for (Index r = 0; r < X.rows(); ++r) {
    const Scalar denom = spread(r) + Scalar(1) / weights(r, k);
    ll -= residual(r) * residual(r) / denom;
  }
  return ll;
}

/// Same on a feature system and line parameters; unit weights when fs.W is empty.
double eiv_log_likelihood(const FeatureSystem& fs, const LineParams& params);

/// Least squares on raw arrays. Throws SingularSystem when X lacks full column rank.
Eigen::VectorXd ols_solve(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

struct TlsSolution {
  Eigen::VectorXd a;
  /// Smallest singular value of [X, y].
  double sigma_min = 0.0;
  /// Matching right singular vector.
  Eigen::VectorXd v;
};

/// Closed-form total least squares on raw arrays. Throws NongenericTls when
/// the smallest singular value of [X, y] is not simple.
TlsSolution tls_solve(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

/// sigma_max / sigma_min.
double condition_number(const Eigen::MatrixXd& m);

/// Ordinary least squares on the output-error model.
EstimationResult ols(const FeatureSystem& fs);

/// Total least squares on [X, y] (identity covariance).
EstimationResult tls(const FeatureSystem& fs);

enum class WarmStart { kTls, kOls };

struct GlraOptions {
  int max_iter = 500;
  double tol = 1e-10;
  bool track_condition = true;
  WarmStart warm_start = WarmStart::kTls;
};

/// Thin QR of the augmented matrix A = Q1 R.
struct GlraFactors {
  Eigen::MatrixXd Q1;
  Eigen::MatrixXd R;
};

GlraFactors factor_augmented(const Eigen::MatrixXd& augmented);

/// Iterate of the diagonal-weight low-rank fixed point
///   A c = sigma D_c d,  A^T d = sigma D_d c,  |c| = |d| = 1.
struct GlraState {
  Eigen::VectorXd c;
  Eigen::VectorXd d;
  double sigma = 0.0;
  Eigen::VectorXd Dc;
  Eigen::VectorXd Dd;
};

/// One fixed-point sweep. `reciprocal` holds 1/w entry-wise. The component of
/// d outside range(A) is obtained from D_c l in range(A) and Q1^T l = z, i.e.
/// l = D_c^{-1} Q1 (Q1^T D_c^{-1} Q1)^{-1} z, which never forms Q2.
/// Throws IterationFailure (with `iteration`) on a singular inner solve.
void glra_iterate(const GlraFactors& factors, const Eigen::MatrixXd& reciprocal,
                  GlraState& state, int iteration);

/// Fitted matrix A - sigma diag(d) V diag(c).
Eigen::MatrixXd glra_fitted(const Eigen::MatrixXd& augmented, const Eigen::MatrixXd& reciprocal,
                            const GlraState& state);

/// Weighted low-rank approximation with diagonal covariance.
EstimationResult glra_diag(const FeatureSystem& fs, const GlraOptions& options = {});

/// Runs the requested single-shot estimator (OLS, TLS or GLRA_DIAG).
EstimationResult estimate(const FeatureSystem& fs, Method method,
                          const GlraOptions& options = {});

}  // namespace patopa
