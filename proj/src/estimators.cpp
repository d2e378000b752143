#include "patopa/estimators.hpp"

#include "patopa/errors.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <string>

namespace patopa {

namespace {

// Relative residual below which [X, y] is treated as exactly rank deficient.
constexpr double kExactFit = 1e-12;
// Relative spacing under which the two smallest singular values are tied.
constexpr double kSingularGap = 1e-10;
// |c_last| below this cannot be rescaled to -1.
constexpr double kMinLastEntry = 1e-12;

void require_columns(const FeatureSystem& fs) {
  if (fs.X.cols() == 0) throw InvalidArgument("feature system has no unknowns");
  if (fs.X.rows() != fs.y.size()) throw InvalidArgument("X and y row counts differ");
  if (fs.W.size() > 0 && (fs.W.rows() != fs.X.rows() || fs.W.cols() != fs.X.cols() + 1)) {
    throw InvalidArgument("weight matrix must be rows x (unknowns + 1)");
  }
}

Eigen::MatrixXd weights_or_unit(const FeatureSystem& fs) {
  if (fs.W.size() > 0) return fs.W;
  return Eigen::MatrixXd::Ones(fs.X.rows(), fs.X.cols() + 1);
}

void split_coefficients(const Eigen::VectorXd& a, Index m, EstimationResult& out) {
  out.g_hat = a.head(m);
  out.b_hat = a.segment(m, m);
}

// [a; -1] / |[a; -1]|
Eigen::VectorXd null_direction(const Eigen::VectorXd& a) {
  Eigen::VectorXd c(a.size() + 1);
  c << a, -1.0;
  return c.normalized();
}

Eigen::VectorXd coefficients_from_direction(const Eigen::VectorXd& c) {
  const double last = c(c.size() - 1);
  if (std::abs(last) < kMinLastEntry) {
    throw CannotNormalize("null-space direction has last entry " + std::to_string(last) +
                          "; cannot scale it to -1");
  }
  return -c.head(c.size() - 1) / last;
}

}  // namespace

std::string_view to_string(Method method) {
  switch (method) {
    case Method::kOls: return "OLS";
    case Method::kTls: return "TLS";
    case Method::kGlraDiag: return "GLRA_DIAG";
    case Method::kPatopa: return "PATOPA";
  }
  return "UNKNOWN";
}

Method parse_method(std::string_view name) {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
  for (Method m : {Method::kOls, Method::kTls, Method::kGlraDiag, Method::kPatopa}) {
    if (upper == to_string(m)) return m;
  }
  throw InvalidArgument("unknown method '" + std::string(name) + "'");
}

Eigen::VectorXd EstimationResult::coefficients() const {
  Eigen::VectorXd a(g_hat.size() + b_hat.size());
  a << g_hat, b_hat;
  return a;
}

double eiv_log_likelihood(const FeatureSystem& fs, const LineParams& params) {
  if (params.size() != fs.n_edges) {
    throw InvalidArgument("parameter length does not match the feature system");
  }
  Eigen::VectorXd a(2 * fs.n_edges);
  a << params.g, params.b;
  return eiv_log_likelihood(fs.X, fs.y, a, weights_or_unit(fs));
}

double condition_number(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::VectorXd sv;
  if (m.rows() > m.cols()) {
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    const Eigen::MatrixXd r =
        qr.matrixQR().topRows(m.cols()).triangularView<Eigen::Upper>();
    sv = Eigen::JacobiSVD<Eigen::MatrixXd>(r).singularValues();
  } else {
    sv = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
  }
  const double smallest = sv(sv.size() - 1);
  if (smallest == 0.0) return std::numeric_limits<double>::infinity();
  return sv(0) / smallest;
}

Eigen::VectorXd ols_solve(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.cols() == 0) throw InvalidArgument("no unknowns to solve for");
  if (X.rows() != y.size()) throw InvalidArgument("X and y row counts differ");
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < X.cols()) {
    throw SingularSystem("feature matrix has rank " + std::to_string(qr.rank()) + " of " +
                             std::to_string(X.cols()) + " columns",
                         qr.rank(), X.cols());
  }
  return qr.solve(y);
}

TlsSolution tls_solve(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.cols() == 0) throw InvalidArgument("no unknowns to solve for");
  if (X.rows() != y.size()) throw InvalidArgument("X and y row counts differ");
  const Index p = X.cols() + 1;
  if (X.rows() < p) {
    throw InsufficientData("[X, y] needs at least " + std::to_string(p) + " rows, has " +
                               std::to_string(X.rows()),
                           p);
  }
  Eigen::MatrixXd a(X.rows(), p);
  a << X, y;
  // Singular values and right vectors of A equal those of its R factor.
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(r, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double smallest = sv(p - 1);
  if (sv(p - 2) - smallest <= kSingularGap * sv(0)) {
    throw NongenericTls("smallest singular value of [X, y] is not simple (" +
                        std::to_string(sv(p - 2)) + " vs " + std::to_string(smallest) + ")");
  }

  // (X^T X - sigma_min^2 I)^{-1} X^T y
  Eigen::MatrixXd normal = X.transpose() * X;
  normal.diagonal().array() -= smallest * smallest;
  const Eigen::LLT<Eigen::MatrixXd> llt(normal);
  if (llt.info() != Eigen::Success) {
    throw NongenericTls("X^T X - sigma_min^2 I is not positive definite");
  }
  return {llt.solve(X.transpose() * y), smallest, svd.matrixV().col(p - 1)};
}

EstimationResult ols(const FeatureSystem& fs) {
  require_columns(fs);
  EstimationResult out;
  out.method = Method::kOls;
  split_coefficients(ols_solve(fs.X, fs.y), fs.n_edges, out);
  out.log_likelihood = eiv_log_likelihood(fs, out.params());
  out.iterations = 1;
  out.ll_trace = {out.log_likelihood};
  return out;
}

EstimationResult tls(const FeatureSystem& fs) {
  require_columns(fs);
  const TlsSolution sol = tls_solve(fs.X, fs.y);
  const Eigen::MatrixXd a = fs.augmented();
  EstimationResult out;
  out.method = Method::kTls;
  split_coefficients(sol.a, fs.n_edges, out);
  out.fitted = a - (a * sol.v) * sol.v.transpose();
  out.sigma = sol.sigma_min;
  out.log_likelihood = eiv_log_likelihood(fs, out.params());
  out.iterations = 1;
  out.ll_trace = {out.log_likelihood};
  out.cond_trace = {condition_number(out.fitted)};
  return out;
}

GlraFactors factor_augmented(const Eigen::MatrixXd& augmented) {
  const Index p = augmented.cols();
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(augmented);
  GlraFactors f;
  f.Q1 = qr.householderQ() * Eigen::MatrixXd::Identity(augmented.rows(), p);
  f.R = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  return f;
}

void glra_iterate(const GlraFactors& factors, const Eigen::MatrixXd& reciprocal,
                  GlraState& state, int iteration) {
  const auto& Q1 = factors.Q1;
  const auto& R = factors.R;
  state.Dd = reciprocal.transpose() * state.d.cwiseAbs2();
  state.Dc = reciprocal * state.c.cwiseAbs2();

  // z = R^{-T} D_d c
  const Eigen::VectorXd z =
      R.triangularView<Eigen::Upper>().transpose().solve(state.Dd.cwiseProduct(state.c));

  const Eigen::VectorXd inv_dc = state.Dc.cwiseInverse();
  const Eigen::MatrixXd scaled = Q1.array().colwise() * inv_dc.cwiseSqrt().array();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(Q1.cols(), Q1.cols());
  gram.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose());
  const Eigen::LLT<Eigen::MatrixXd> llt(gram.selfadjointView<Eigen::Lower>());
  if (llt.info() != Eigen::Success) {
    throw IterationFailure("Q1^T D_c^{-1} Q1 is singular at iteration " +
                               std::to_string(iteration),
                           iteration);
  }
  const Eigen::VectorXd l = inv_dc.cwiseProduct(Q1 * llt.solve(z));
  const double l_norm = l.norm();
  if (!(l_norm > 0.0) || !std::isfinite(l_norm)) {
    throw IterationFailure("degenerate left direction at iteration " +
                               std::to_string(iteration),
                           iteration);
  }
  Eigen::VectorXd d = l / l_norm;

  // c = R^{-1} Q1^T D_c d, then normalized; sigma is the normalizing factor.
  Eigen::VectorXd c =
      R.triangularView<Eigen::Upper>().solve(Q1.transpose() * state.Dc.cwiseProduct(d));
  const double c_norm = c.norm();
  if (!(c_norm > 0.0) || !std::isfinite(c_norm)) {
    throw IterationFailure("degenerate right direction at iteration " +
                               std::to_string(iteration),
                           iteration);
  }
  c /= c_norm;
  // The pair (c, d) is defined up to a joint sign; keep c aligned with the
  // previous iterate so the step size is meaningful.
  if (c.dot(state.c) < 0.0) {
    c = -c;
    d = -d;
  }
  state.c = std::move(c);
  state.d = std::move(d);
  state.sigma = 1.0 / c_norm;
}

Eigen::MatrixXd glra_fitted(const Eigen::MatrixXd& augmented, const Eigen::MatrixXd& reciprocal,
                            const GlraState& state) {
  return augmented -
         state.sigma * (state.d.asDiagonal() * reciprocal * state.c.asDiagonal());
}

EstimationResult glra_diag(const FeatureSystem& fs, const GlraOptions& options) {
  require_columns(fs);
  if (fs.W.size() == 0) throw InvalidArgument("diagonal GLRA needs entry weights");
  if (!(fs.W.array() > 0.0).all() || !fs.W.allFinite()) {
    throw InvalidArgument("diagonal GLRA needs strictly positive, finite weights");
  }
  const Eigen::MatrixXd a = fs.augmented();
  if (a.rows() < a.cols()) {
    throw InsufficientData("[X, y] needs at least " + std::to_string(a.cols()) + " rows, has " +
                               std::to_string(a.rows()),
                           a.cols());
  }
  const Eigen::MatrixXd reciprocal = fs.W.cwiseInverse();

  Eigen::VectorXd start;
  if (options.warm_start == WarmStart::kTls) {
    try {
      start = tls(fs).coefficients();
    } catch (const NongenericTls& e) {
      spdlog::debug("glra_diag: TLS warm start unavailable ({}), using OLS", e.what());
      start = ols(fs).coefficients();
    }
  } else {
    start = ols(fs).coefficients();
  }

  GlraState state;
  state.c = null_direction(start);
  const Eigen::VectorXd residual = a * state.c;
  state.sigma = residual.norm();

  EstimationResult out;
  out.method = Method::kGlraDiag;

  auto record = [&](const Eigen::VectorXd& coef) {
    const double ll = eiv_log_likelihood(fs.X, fs.y, coef, fs.W);
    out.ll_trace.push_back(ll);
    if (options.track_condition) {
      out.cond_trace.push_back(condition_number(glra_fitted(a, reciprocal, state)));
    }
  };

  if (state.sigma <= kExactFit * a.norm()) {
    // [X, y] is already rank deficient along c: sigma = 0 satisfies the
    // stationarity conditions with any unit d in the left null space.
    state.sigma = 0.0;
    state.d = Eigen::VectorXd::Zero(a.rows());
    state.d(0) = 1.0;
    const Eigen::VectorXd coef = coefficients_from_direction(state.c);
    split_coefficients(coef, fs.n_edges, out);
    record(coef);
    out.iterations = 1;
    out.converged = true;
    out.log_likelihood = out.ll_trace.back();
    out.fitted = a;
    return out;
  }
  state.d = residual / state.sigma;

  const GlraFactors factors = factor_augmented(a);
  out.converged = false;
  Eigen::VectorXd coef = start;
  for (int k = 1; k <= options.max_iter; ++k) {
    const Eigen::VectorXd previous = state.c;
    glra_iterate(factors, reciprocal, state, k);
    coef = coefficients_from_direction(state.c);
    record(coef);
    out.iterations = k;
    if ((state.c - previous).norm() < options.tol) {
      out.converged = true;
      break;
    }
  }

  split_coefficients(coef, fs.n_edges, out);
  out.sigma = state.sigma;
  out.log_likelihood = out.ll_trace.back();
  out.fitted = glra_fitted(a, reciprocal, state);
  for (std::size_t k = 2; k < out.ll_trace.size(); ++k) {
    if (out.ll_trace[k] < out.ll_trace[k - 1]) {
      spdlog::debug("glra_diag: log-likelihood decreased at iteration {} ({} -> {})", k + 1,
                    out.ll_trace[k - 1], out.ll_trace[k]);
      break;
    }
  }
  if (!out.converged) {
    spdlog::debug("glra_diag: no convergence after {} iterations", out.iterations);
  }
  return out;
}

EstimationResult estimate(const FeatureSystem& fs, Method method, const GlraOptions& options) {
  switch (method) {
    case Method::kOls: return ols(fs);
    case Method::kTls: return tls(fs);
    case Method::kGlraDiag: return glra_diag(fs, options);
    case Method::kPatopa: break;
  }
  throw InvalidArgument("estimate() handles OLS, TLS and GLRA_DIAG only");
}

}  // namespace patopa
