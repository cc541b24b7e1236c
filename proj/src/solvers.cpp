#include "crc/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include <Eigen/Eigenvalues>

#include "crc/costs.hpp"

namespace crc {

namespace {

void require_query(const FeatureDictionary& dict, const Vector& y) {
  if (y.size() != dict.dim()) {
    std::ostringstream msg;
    msg << "query length " << y.size() << " does not match feature dimension "
        << dict.dim();
    throw Error(msg.str());
  }
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw Error(std::string(name) + " must be finite and > 0");
  }
}

void require_nonnegative(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw Error(std::string(name) + " must be finite and >= 0");
  }
}

Eigen::LLT<Matrix> factor_spd(const Matrix& system, const char* what) {
  Eigen::LLT<Matrix> llt(system);
  if (llt.info() != Eigen::Success) {
    throw Error(std::string(what) + ": system matrix is not positive definite");
  }
  return llt;
}

void require_patch_pair(const LocalDictionary& local, const TestPatchSet& test,
                        int j) {
  if (test.patch_dim() != local.patch_dim()) {
    std::ostringstream msg;
    msg << "test patch dimension " << test.patch_dim()
        << " does not match dictionary patch dimension " << local.patch_dim();
    throw Error(msg.str());
  }
  if (test.count() != local.location_count()) {
    std::ostringstream msg;
    msg << "test patch count " << test.count()
        << " does not match dictionary location count "
        << local.location_count();
    throw Error(msg.str());
  }
  if (j < 0 || j >= local.location_count()) {
    std::ostringstream msg;
    msg << "location " << j << " out of range [0, " << local.location_count()
        << ")";
    throw Error(msg.str());
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// System assembly

Matrix crc_system(const FeatureDictionary& dict, double lambda) {
  require_nonnegative(lambda, "lambda");
  Matrix system = dict.gram();
  system.diagonal().array() += lambda;
  return system;
}

Matrix ecrc_whiten(const FeatureDictionary& dict, const CovarianceModel& cov) {
  if (cov.R.rows() != dict.dim()) {
    throw Error("covariance dimension does not match feature dimension");
  }
  return cov.solve(dict.data());
}

Matrix ecrc_system(const FeatureDictionary& dict, const Matrix& whitened,
                   double lambda) {
  require_nonnegative(lambda, "lambda");
  Matrix system = dict.data().transpose() * whitened;
  system = 0.5 * (system + system.transpose());  // kill solve round-off skew
  system.diagonal().array() += lambda;
  return system;
}

Matrix procrc_system(const FeatureDictionary& dict, double lambda, double gamma) {
  ClassPriorWeights ones{Vector::Ones(dict.num_classes())};
  return eprocrc_system(dict, lambda, gamma, ones);
}

Matrix eprocrc_system(const FeatureDictionary& dict, double lambda, double gamma,
                      const ClassPriorWeights& priors) {
  require_nonnegative(lambda, "lambda");
  require_nonnegative(gamma, "gamma");
  const int c = dict.num_classes();
  if (priors.beta_c.size() != c) {
    throw Error("per-class prior weights must have one entry per class");
  }
  for (int k = 0; k < c; ++k) {
    require_nonnegative(priors.beta_c[k], "class prior weight");
  }

  const Matrix& gram = dict.gram();
  const ClassPartition& part = dict.partition();

  // Σ_k β_k (I−S_k) G (I−S_k) = (Σβ)G − D_β G − G D_β + blockdiag_β(G),
  // where D_β carries β_class(t) on the diagonal and blockdiag_β keeps the
  // class-diagonal blocks of G scaled by β_k.
  Vector col_weight(dict.count());
  for (int k = 0; k < c; ++k) {
    col_weight.segment(part.offsets[k], part.counts[k])
        .setConstant(priors.beta_c[k]);
  }
  Matrix coupling = priors.beta_c.sum() * gram;
  coupling -= col_weight.asDiagonal() * gram;
  coupling -= gram * col_weight.asDiagonal();
  for (int k = 0; k < c; ++k) {
    coupling.block(part.offsets[k], part.offsets[k], part.counts[k],
                   part.counts[k]) +=
        priors.beta_c[k] * gram.block(part.offsets[k], part.offsets[k],
                                      part.counts[k], part.counts[k]);
  }

  Matrix system = gram + (gamma / static_cast<double>(c)) * coupling;
  system.diagonal().array() += lambda;
  return system;
}

double kernel_eval(const KernelSpec& kernel, const Vector& u, const Vector& v) {
  kernel.validate();
  if (u.size() != v.size()) throw Error("kernel arguments differ in length");
  switch (kernel.kind) {
    case KernelSpec::Kind::Linear:
      return u.dot(v);
    case KernelSpec::Kind::Rbf:
      return std::exp(-(u - v).squaredNorm() / (2.0 * kernel.sigma * kernel.sigma));
  }
  throw Error("unhandled kernel kind");
}

Matrix kcrc_gram(const FeatureDictionary& dict, const KernelSpec& kernel) {
  kernel.validate();
  if (kernel.kind == KernelSpec::Kind::Linear) return dict.gram();

  const Matrix& x = dict.data();
  const int n = dict.count();
  Matrix gram(n, n);
  const Vector sq = x.colwise().squaredNorm();
  const double inv = 1.0 / (2.0 * kernel.sigma * kernel.sigma);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i <= j; ++i) {
      const double d2 = sq[i] + sq[j] - 2.0 * x.col(i).dot(x.col(j));
      const double v = std::exp(-std::max(d2, 0.0) * inv);
      gram(i, j) = v;
      gram(j, i) = v;
    }
  }
  return gram;
}

Vector kcrc_vector(const FeatureDictionary& dict, const KernelSpec& kernel,
                   const Vector& y) {
  require_query(dict, y);
  const int n = dict.count();
  Vector k_y(n);
  for (int t = 0; t < n; ++t) {
    k_y[t] = kernel_eval(kernel, dict.data().col(t), y);
  }
  return k_y;
}

Matrix gpcrc_system(const Matrix& gram, int loc_start, int loc_count,
                    double lambda, double gamma) {
  require_nonnegative(lambda, "lambda");
  require_nonnegative(gamma, "gamma");
  if (gram.rows() != gram.cols()) throw Error("gram matrix must be square");
  if (loc_start < 0 || loc_count < 1 || loc_start + loc_count > gram.cols()) {
    throw Error("location column range out of bounds");
  }
  // (I−S) G (I−S) zeroes every row and column in the selected range.
  Matrix coupling = gram;
  coupling.middleRows(loc_start, loc_count).setZero();
  coupling.middleCols(loc_start, loc_count).setZero();

  Matrix system = gram + gamma * coupling;
  system.diagonal().array() += lambda;
  return system;
}

// ---------------------------------------------------------------------------
// One-shot solvers

CoefficientSolution crc_solve(const FeatureDictionary& dict, const Vector& y,
                              double lambda) {
  require_query(dict, y);
  require_nonnegative(lambda, "lambda");

  const Vector rhs = dict.data().transpose() * y;
  Vector alpha;
  if (lambda > 0.0) {
    alpha = dict.gram_solve(lambda, rhs);
  } else {
    Eigen::LLT<Matrix> llt(dict.gram());
    if (llt.info() != Eigen::Success) {
      throw Error("singular system: lambda = 0 requires invertible XtX");
    }
    alpha = llt.solve(rhs);
  }

  CoefficientSolution sol;
  sol.achieved_cost = crc_cost(dict.data(), y, lambda, alpha);
  sol.grad_norm = crc_grad(dict.data(), y, lambda, alpha).norm();
  sol.alpha = std::move(alpha);
  return sol;
}

CoefficientSolution ecrc_solve(const FeatureDictionary& dict,
                               const CovarianceModel& cov, const Vector& y,
                               double lambda) {
  require_query(dict, y);
  require_nonnegative(lambda, "lambda");

  const Matrix whitened = ecrc_whiten(dict, cov);
  const Matrix system = ecrc_system(dict, whitened, lambda);
  const Vector rhs = whitened.transpose() * y;
  const auto llt = factor_spd(system, "covariance-whitened solve");
  Vector alpha = llt.solve(rhs);
  // The whitened normal equations inherit the covariance's conditioning, so
  // one round of iterative refinement against the freshly recomputed
  // stationarity residual recovers the accuracy the factorization loses.
  for (int pass = 0; pass < 2; ++pass) {
    const Vector residual =
        dict.data().transpose() * cov.solve(Vector(y - dict.data() * alpha)) -
        lambda * alpha;
    alpha += llt.solve(residual);
  }

  CoefficientSolution sol;
  sol.achieved_cost = ecrc_cost(dict.data(), cov, y, lambda, alpha);
  sol.grad_norm = ecrc_grad(dict.data(), cov, y, lambda, alpha).norm();
  sol.alpha = std::move(alpha);
  return sol;
}

CoefficientSolution procrc_solve(const FeatureDictionary& dict, const Vector& y,
                                 double lambda, double gamma) {
  ClassPriorWeights ones{Vector::Ones(dict.num_classes())};
  return eprocrc_solve(dict, y, lambda, gamma, ones);
}

CoefficientSolution eprocrc_solve(const FeatureDictionary& dict, const Vector& y,
                                  double lambda, double gamma,
                                  const ClassPriorWeights& priors) {
  require_query(dict, y);
  require_positive(lambda, "lambda");
  require_nonnegative(gamma, "gamma");

  const Matrix system = eprocrc_system(dict, lambda, gamma, priors);
  const Vector rhs = dict.data().transpose() * y;
  Vector alpha = factor_spd(system, "collaborative solve").solve(rhs);

  CoefficientSolution sol;
  sol.achieved_cost = eprocrc_cost(dict.data(), dict.partition(), y, lambda,
                                   gamma, priors.beta_c, alpha);
  sol.grad_norm = eprocrc_grad(dict.data(), dict.partition(), y, lambda, gamma,
                               priors.beta_c, alpha)
                      .norm();
  sol.alpha = std::move(alpha);
  return sol;
}

ClassPriorWeights compute_class_priors(const FeatureDictionary& dict) {
  const int c = dict.num_classes();
  const Vector global = dict.data().rowwise().mean();
  Vector raw(c);
  for (int k = 0; k < c; ++k) {
    raw[k] = (global - dict.class_block(k).rowwise().mean()).norm();
  }
  const double mean = raw.mean();
  if (mean == 0.0) return ClassPriorWeights{Vector::Ones(c)};
  return ClassPriorWeights{raw / mean};
}

Vector project_simplex(const Vector& z) {
  const int n = static_cast<int>(z.size());
  if (n < 1) throw Error("cannot project an empty vector onto the simplex");
  std::vector<double> u(z.data(), z.data() + n);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cumulative = 0.0;
  double theta = 0.0;
  int support = 0;
  for (int i = 0; i < n; ++i) {
    cumulative += u[static_cast<std::size_t>(i)];
    const double candidate = (cumulative - 1.0) / static_cast<double>(i + 1);
    if (u[static_cast<std::size_t>(i)] - candidate > 0.0) {
      theta = candidate;
      support = i + 1;
    }
  }
  if (support == 0) {
    // Only reachable through non-finite input; fall back to uniform.
    return Vector::Constant(n, 1.0 / static_cast<double>(n));
  }
  return (z.array() - theta).max(0.0).matrix();
}

CoefficientSolution rcrc_solve(const FeatureDictionary& dict, const Vector& y,
                               double lambda, double tau, double eta,
                               double tolerance, int max_iters,
                               std::vector<double>* cost_trace,
                               Vector* weights_out) {
  require_query(dict, y);
  require_positive(lambda, "lambda");
  require_nonnegative(tau, "tau");
  require_nonnegative(eta, "eta");
  require_positive(tolerance, "tolerance");
  if (max_iters < 1) throw Error("max_iters must be >= 1");

  const Matrix& x = dict.data();
  const Matrix& gram = dict.gram();
  const ClassPartition& part = dict.partition();
  const int c = part.num_classes();
  const int n = dict.count();
  const Vector rhs = x.transpose() * y;

  // v_t = 1/(c·n_class(t)) so that vᵀα is the blended coefficient mean.
  Vector v(n);
  for (int k = 0; k < c; ++k) {
    v.segment(part.offsets[k], part.counts[k])
        .setConstant(1.0 / (static_cast<double>(c) * part.counts[k]));
  }

  auto solve_alpha = [&](const Vector& w) -> Vector {
    // XᵀX + λI + τ·(D_w − u vᵀ − v uᵀ + s·v vᵀ) with u_t = w_class(t),
    // s = Σ_k w_k n_k; the deviation penalty expanded over class blocks.
    Vector u(n);
    double s = 0.0;
    for (int k = 0; k < c; ++k) {
      u.segment(part.offsets[k], part.counts[k]).setConstant(w[k]);
      s += w[k] * part.counts[k];
    }
    Matrix system = gram;
    system.diagonal().array() += lambda;
    system.diagonal() += tau * u;
    system.noalias() -= tau * (u * v.transpose());
    system.noalias() -= tau * (v * u.transpose());
    system.noalias() += (tau * s) * (v * v.transpose());
    return factor_spd(system, "weighted-deviation solve").solve(rhs);
  };

  auto solve_weights = [&](const Vector& alpha) -> Vector {
    const Vector dev = class_deviations(part, alpha);
    if (eta > 0.0) {
      return project_simplex(-(tau / (2.0 * eta)) * dev);
    }
    // Linear objective over the simplex: optimum at the vertex of smallest
    // deviation (first index on ties).
    int best = 0;
    for (int k = 1; k < c; ++k) {
      if (dev[k] < dev[best]) best = k;
    }
    Vector w = Vector::Zero(c);
    w[best] = 1.0;
    return w;
  };

  Vector w = Vector::Constant(c, 1.0 / static_cast<double>(c));
  Vector alpha = solve_alpha(w);
  double cost = rcrc_cost(x, part, y, lambda, tau, eta, w, alpha);
  if (cost_trace != nullptr) {
    cost_trace->clear();
    cost_trace->push_back(cost);
  }

  bool converged = false;
  int iterations = 1;
  while (iterations < max_iters) {
    w = solve_weights(alpha);
    alpha = solve_alpha(w);
    ++iterations;
    const double next = rcrc_cost(x, part, y, lambda, tau, eta, w, alpha);
    if (cost_trace != nullptr) cost_trace->push_back(next);
    const double decrease = cost - next;
    cost = next;
    if (decrease < tolerance) {
      converged = true;
      break;
    }
  }

  if (weights_out != nullptr) *weights_out = w;

  CoefficientSolution sol;
  sol.achieved_cost = cost;
  sol.grad_norm = rcrc_grad_alpha(x, part, y, lambda, tau, w, alpha).norm();
  sol.converged = converged;
  sol.iterations = iterations;
  sol.alpha = std::move(alpha);
  return sol;
}

CoefficientSolution kcrc_solve_gram(const Matrix& gram, const Vector& k_y,
                                    double k_yy, double lambda) {
  require_positive(lambda, "lambda");
  if (gram.rows() != gram.cols() || gram.rows() != k_y.size()) {
    throw Error("kernel solve: dimension mismatch");
  }

  Matrix system = gram;
  system.diagonal().array() += lambda;
  Eigen::LLT<Matrix> llt(system);
  if (llt.info() != Eigen::Success) {
    // λ > 0 means failure implies an indefinite Gram matrix; report how far
    // from positive semidefinite it is.
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram,
                                              Eigen::EigenvaluesOnly);
    std::ostringstream msg;
    msg << "kernel Gram matrix is not positive semidefinite (most negative "
           "eigenvalue "
        << eig.eigenvalues().minCoeff() << ")";
    throw Error(msg.str());
  }
  Vector alpha = llt.solve(k_y);

  CoefficientSolution sol;
  sol.achieved_cost = kcrc_cost(gram, k_y, k_yy, lambda, alpha);
  sol.grad_norm = kcrc_grad(gram, k_y, lambda, alpha).norm();
  sol.alpha = std::move(alpha);
  return sol;
}

CoefficientSolution kcrc_solve(const FeatureDictionary& dict, const Vector& y,
                               double lambda, const KernelSpec& kernel) {
  require_query(dict, y);
  const Matrix gram = kcrc_gram(dict, kernel);
  const Vector k_y = kcrc_vector(dict, kernel, y);
  const double k_yy = kernel_eval(kernel, y, y);
  return kcrc_solve_gram(gram, k_y, k_yy, lambda);
}

CoefficientSolution pcrc_patch_solve(const LocalDictionary& local,
                                     const TestPatchSet& test, int j,
                                     double lambda) {
  require_patch_pair(local, test, j);
  require_nonnegative(lambda, "lambda");

  const Matrix mj = local.location_matrix(j);
  const Vector y = test.patches.col(j);
  Matrix system = mj.transpose() * mj;
  system.diagonal().array() += lambda;
  Eigen::LLT<Matrix> llt(system);
  if (llt.info() != Eigen::Success) {
    throw Error("singular system: patch solve requires lambda > 0 or an "
                "invertible local Gram matrix");
  }
  Vector alpha = llt.solve(mj.transpose() * y);

  CoefficientSolution sol;
  sol.achieved_cost = crc_cost(mj, y, lambda, alpha);
  sol.grad_norm = crc_grad(mj, y, lambda, alpha).norm();
  sol.alpha = std::move(alpha);
  return sol;
}

CoefficientSolution gpcrc_solve(const LocalDictionary& local,
                                const TestPatchSet& test, int j, double lambda,
                                double gamma) {
  require_patch_pair(local, test, j);
  require_positive(lambda, "lambda");
  require_nonnegative(gamma, "gamma");

  const Matrix& m = local.augmented();
  const int n = local.sample_count();
  const Matrix gram = m.transpose() * m;
  const Matrix system = gpcrc_system(gram, j * n, n, lambda, gamma);
  const Vector y = test.patches.col(j);
  Vector alpha = factor_spd(system, "location-coupled solve")
                     .solve(m.transpose() * y);

  CoefficientSolution sol;
  sol.achieved_cost = gpcrc_cost(m, j * n, n, y, lambda, gamma, alpha);
  sol.grad_norm = gpcrc_grad(m, j * n, n, y, lambda, gamma, alpha).norm();
  sol.alpha = std::move(alpha);
  return sol;
}

CoefficientSolution pprocrc_solve(const Matrix& X, const Matrix& Y,
                                  const Vector& y, double lambda,
                                  double gamma) {
  if (X.rows() != y.size() || Y.rows() != y.size()) {
    throw Error("coupled solve: X, Y, and y must share the feature dimension");
  }
  require_positive(lambda, "lambda");
  require_positive(gamma, "gamma");

  const Eigen::Index n = X.cols();
  const Eigen::Index q = Y.cols();
  Matrix system(n + q, n + q);
  system.topLeftCorner(n, n) = 2.0 * (X.transpose() * X);
  system.topLeftCorner(n, n).diagonal().array() += lambda;
  system.topRightCorner(n, q) = -(X.transpose() * Y);
  system.bottomLeftCorner(q, n) = system.topRightCorner(n, q).transpose();
  system.bottomRightCorner(q, q) = 2.0 * (Y.transpose() * Y);
  system.bottomRightCorner(q, q).diagonal().array() += gamma;

  Vector rhs(n + q);
  rhs.head(n) = X.transpose() * y;
  rhs.tail(q) = Y.transpose() * y;

  const Vector packed = factor_spd(system, "coupled solve").solve(rhs);
  Vector alpha = packed.head(n);
  Vector beta = packed.tail(q);

  CoefficientSolution sol;
  sol.achieved_cost = pprocrc_cost(X, Y, y, lambda, gamma, alpha, beta);
  const double ga = pprocrc_grad_alpha(X, Y, y, lambda, alpha, beta).squaredNorm();
  const double gb = pprocrc_grad_beta(X, Y, y, gamma, alpha, beta).squaredNorm();
  sol.grad_norm = std::sqrt(ga + gb);
  sol.alpha = std::move(alpha);
  sol.beta = std::move(beta);
  return sol;
}

// ---------------------------------------------------------------------------
// Batched contexts

SpdSolveContext::SpdSolveContext(const Matrix& system, const char* what)
    : llt_(factor_spd(system, what)) {}

Vector SpdSolveContext::solve(const Vector& rhs) const {
  return llt_.solve(rhs);
}

Matrix SpdSolveContext::solve(const Matrix& rhs) const {
  return llt_.solve(rhs);
}

PairedBatchSolver::PairedBatchSolver(Matrix X, double lambda, double gamma)
    : X_(std::move(X)), lambda_(lambda), gamma_(gamma) {
  require_positive(lambda_, "lambda");
  require_positive(gamma_, "gamma");
  Matrix dual = 2.0 * (X_ * X_.transpose());
  dual.diagonal().array() += lambda_;
  dual_.compute(dual);
  if (dual_.info() != Eigen::Success) {
    throw Error("coupled batch solve: dictionary factorization failed");
  }
}

Vector PairedBatchSolver::apply_dict_inverse(const Vector& u) const {
  // (2XᵀX + λI)⁻¹u = (u − 2Xᵀ(2XXᵀ + λI)⁻¹Xu)/λ: the d×d dual system stands
  // in for the (much larger) coefficient-space system.
  const Vector w = dual_.solve(X_ * u);
  return (u - 2.0 * (X_.transpose() * w)) / lambda_;
}

std::vector<CoefficientSolution> PairedBatchSolver::solve_image(
    const Matrix& Y) const {
  if (Y.rows() != X_.rows()) {
    throw Error("coupled batch solve: Y feature dimension mismatch");
  }
  const Eigen::Index n = X_.cols();
  const Eigen::Index q = Y.cols();
  if (q < 1) throw Error("coupled batch solve: Y must have at least one column");

  // Block elimination of α from
  //   [A −P; −Pᵀ C][α; β] = [Xᵀy; Yᵀy],  A = 2XᵀX+λI, P = XᵀY, C = 2YᵀY+γI:
  // the β system is the Schur complement W = C − Pᵀ A⁻¹ P.
  const Matrix p = X_.transpose() * Y;
  Matrix a_inv_p(n, q);
  for (Eigen::Index i = 0; i < q; ++i) {
    a_inv_p.col(i) = apply_dict_inverse(p.col(i));
  }
  const Matrix yty = Y.transpose() * Y;
  Matrix schur = 2.0 * yty - p.transpose() * a_inv_p;
  schur.diagonal().array() += gamma_;
  schur = 0.5 * (schur + schur.transpose());
  Eigen::LLT<Matrix> schur_llt(schur);
  if (schur_llt.info() != Eigen::Success) {
    throw Error("coupled batch solve: Schur complement factorization failed");
  }

  std::vector<CoefficientSolution> out(static_cast<std::size_t>(q));
  for (Eigen::Index i = 0; i < q; ++i) {
    const Vector y = Y.col(i);
    const Vector t = a_inv_p.col(i);       // A⁻¹ Xᵀy_i, since Xᵀy_i = P col i
    const Vector g = yty.col(i) + p.transpose() * t;
    Vector beta = schur_llt.solve(g);
    Vector alpha = t + a_inv_p * beta;     // A⁻¹(Xᵀy_i + Pβ)

    CoefficientSolution sol;
    sol.achieved_cost = pprocrc_cost(X_, Y, y, lambda_, gamma_, alpha, beta);
    const double ga =
        pprocrc_grad_alpha(X_, Y, y, lambda_, alpha, beta).squaredNorm();
    const double gb =
        pprocrc_grad_beta(X_, Y, y, gamma_, alpha, beta).squaredNorm();
    sol.grad_norm = std::sqrt(ga + gb);
    sol.alpha = std::move(alpha);
    sol.beta = std::move(beta);
    out[static_cast<std::size_t>(i)] = std::move(sol);
  }
  return out;
}

}  // namespace crc
