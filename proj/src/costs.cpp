#include "crc/costs.hpp"

#include <sstream>

namespace crc {

namespace {

void check_lengths(const Matrix& X, const Vector& y, const Vector& alpha,
                   const char* what) {
  if (X.rows() != y.size() || X.cols() != alpha.size()) {
    std::ostringstream msg;
    msg << what << ": dimension mismatch (X " << X.rows() << "x" << X.cols()
        << ", y " << y.size() << ", alpha " << alpha.size() << ")";
    throw Error(msg.str());
  }
}

void check_partition(const ClassPartition& part, const Vector& alpha,
                     const char* what) {
  if (part.total() != alpha.size()) {
    std::ostringstream msg;
    msg << what << ": partition covers " << part.total()
        << " coefficients but alpha has " << alpha.size();
    throw Error(msg.str());
  }
}

/// Per-class reconstructions X_k α_k stacked as columns (d × c).
Matrix class_reconstructions(const Matrix& X, const ClassPartition& part,
                             const Vector& alpha) {
  const int c = part.num_classes();
  Matrix recon(X.rows(), c);
  for (int k = 0; k < c; ++k) {
    recon.col(k) = X.middleCols(part.offsets[k], part.counts[k]) *
                   alpha.segment(part.offsets[k], part.counts[k]);
  }
  return recon;
}

}  // namespace

double crc_cost(const Matrix& X, const Vector& y, double lambda,
                const Vector& alpha) {
  check_lengths(X, y, alpha, "ridge cost");
  return (y - X * alpha).squaredNorm() + lambda * alpha.squaredNorm();
}

Vector crc_grad(const Matrix& X, const Vector& y, double lambda,
                const Vector& alpha) {
  check_lengths(X, y, alpha, "ridge gradient");
  return 2.0 * (X.transpose() * (X * alpha - y)) + 2.0 * lambda * alpha;
}

double ecrc_cost(const Matrix& X, const CovarianceModel& cov, const Vector& y,
                 double lambda, const Vector& alpha) {
  check_lengths(X, y, alpha, "whitened cost");
  const Vector residual = y - X * alpha;
  return residual.dot(cov.solve(residual)) + lambda * alpha.squaredNorm();
}

Vector ecrc_grad(const Matrix& X, const CovarianceModel& cov, const Vector& y,
                 double lambda, const Vector& alpha) {
  check_lengths(X, y, alpha, "whitened gradient");
  const Vector residual = y - X * alpha;
  return -2.0 * (X.transpose() * cov.solve(residual)) + 2.0 * lambda * alpha;
}

double eprocrc_cost(const Matrix& X, const ClassPartition& part, const Vector& y,
                    double lambda, double gamma, const Vector& priors,
                    const Vector& alpha) {
  check_lengths(X, y, alpha, "collaborative cost");
  check_partition(part, alpha, "collaborative cost");
  const int c = part.num_classes();
  if (priors.size() != c) throw Error("collaborative cost: priors length != c");

  const Vector full = X * alpha;
  double coupling = 0.0;
  const Matrix recon = class_reconstructions(X, part, alpha);
  for (int k = 0; k < c; ++k) {
    coupling += priors[k] * (full - recon.col(k)).squaredNorm();
  }
  return (y - full).squaredNorm() + lambda * alpha.squaredNorm() +
         gamma / static_cast<double>(c) * coupling;
}

Vector eprocrc_grad(const Matrix& X, const ClassPartition& part, const Vector& y,
                    double lambda, double gamma, const Vector& priors,
                    const Vector& alpha) {
  check_lengths(X, y, alpha, "collaborative gradient");
  check_partition(part, alpha, "collaborative gradient");
  const int c = part.num_classes();
  if (priors.size() != c) throw Error("collaborative gradient: priors length != c");

  const Vector full = X * alpha;
  Vector grad = 2.0 * (X.transpose() * (full - y)) + 2.0 * lambda * alpha;

  // d/dα of Σ_k β_k‖X(I−S_k)α‖²: each term contributes
  // 2β_k (I−S_k)ᵀXᵀ X(I−S_k)α = 2β_k (I−S_k)ᵀXᵀ (full − X_kα_k).
  const Matrix recon = class_reconstructions(X, part, alpha);
  const double scale = 2.0 * gamma / static_cast<double>(c);
  for (int k = 0; k < c; ++k) {
    const Vector gap = full - recon.col(k);
    Vector term = X.transpose() * gap;
    term.segment(part.offsets[k], part.counts[k]) -=
        X.middleCols(part.offsets[k], part.counts[k]).transpose() * gap;
    grad += scale * priors[k] * term;
  }
  return grad;
}

double procrc_cost(const Matrix& X, const ClassPartition& part, const Vector& y,
                   double lambda, double gamma, const Vector& alpha) {
  return eprocrc_cost(X, part, y, lambda, gamma,
                      Vector::Ones(part.num_classes()), alpha);
}

Vector procrc_grad(const Matrix& X, const ClassPartition& part, const Vector& y,
                   double lambda, double gamma, const Vector& alpha) {
  return eprocrc_grad(X, part, y, lambda, gamma,
                      Vector::Ones(part.num_classes()), alpha);
}

double blended_mean(const ClassPartition& part, const Vector& alpha) {
  check_partition(part, alpha, "blended mean");
  const int c = part.num_classes();
  double sum = 0.0;
  for (int k = 0; k < c; ++k) {
    sum += alpha.segment(part.offsets[k], part.counts[k]).mean();
  }
  return sum / static_cast<double>(c);
}

Vector class_deviations(const ClassPartition& part, const Vector& alpha) {
  check_partition(part, alpha, "class deviations");
  const int c = part.num_classes();
  const double bar = blended_mean(part, alpha);
  Vector dev(c);
  for (int k = 0; k < c; ++k) {
    dev[k] = (alpha.segment(part.offsets[k], part.counts[k]).array() - bar)
                 .matrix()
                 .squaredNorm();
  }
  return dev;
}

double rcrc_cost(const Matrix& X, const ClassPartition& part, const Vector& y,
                 double lambda, double tau, double eta, const Vector& w,
                 const Vector& alpha) {
  check_lengths(X, y, alpha, "weighted-deviation cost");
  if (w.size() != part.num_classes()) {
    throw Error("weighted-deviation cost: weight length != c");
  }
  return (y - X * alpha).squaredNorm() + lambda * alpha.squaredNorm() +
         tau * w.dot(class_deviations(part, alpha)) + eta * w.squaredNorm();
}

Vector rcrc_grad_alpha(const Matrix& X, const ClassPartition& part,
                       const Vector& y, double lambda, double tau,
                       const Vector& w, const Vector& alpha) {
  check_lengths(X, y, alpha, "weighted-deviation gradient");
  if (w.size() != part.num_classes()) {
    throw Error("weighted-deviation gradient: weight length != c");
  }
  const int c = part.num_classes();
  const double bar = blended_mean(part, alpha);

  Vector grad = 2.0 * (X.transpose() * (X * alpha - y)) + 2.0 * lambda * alpha;

  // Σ_k w_k‖T_kα‖² with T_k = S_k − 1_k vᵀ and v_t = 1/(c·n_class(t)):
  // gradient 2τ Σ_k w_k T_kᵀ(T_kα). T_kα puts α_t − ᾱ at class-k slots;
  // T_kᵀ u = S_k u − v (1_kᵀ u).
  Vector v(alpha.size());
  for (int k = 0; k < c; ++k) {
    v.segment(part.offsets[k], part.counts[k])
        .setConstant(1.0 / (static_cast<double>(c) * part.counts[k]));
  }
  for (int k = 0; k < c; ++k) {
    const auto block = alpha.segment(part.offsets[k], part.counts[k]);
    const Vector tk = block.array() - bar;  // class-k slots of T_kα
    grad.segment(part.offsets[k], part.counts[k]) += 2.0 * tau * w[k] * tk;
    grad -= 2.0 * tau * w[k] * tk.sum() * v;
  }
  return grad;
}

double kcrc_cost(const Matrix& K, const Vector& k_y, double k_yy, double lambda,
                 const Vector& alpha) {
  if (K.rows() != K.cols() || K.rows() != alpha.size() ||
      k_y.size() != alpha.size()) {
    throw Error("kernel cost: dimension mismatch");
  }
  return k_yy - 2.0 * k_y.dot(alpha) + alpha.dot(K * alpha) +
         lambda * alpha.squaredNorm();
}

Vector kcrc_grad(const Matrix& K, const Vector& k_y, double lambda,
                 const Vector& alpha) {
  if (K.rows() != K.cols() || K.rows() != alpha.size() ||
      k_y.size() != alpha.size()) {
    throw Error("kernel gradient: dimension mismatch");
  }
  return 2.0 * (K * alpha) + 2.0 * lambda * alpha - 2.0 * k_y;
}

double gpcrc_cost(const Matrix& M, int loc_start, int loc_count, const Vector& y,
                  double lambda, double gamma, const Vector& p) {
  check_lengths(M, y, p, "location-coupled cost");
  if (loc_start < 0 || loc_count < 1 || loc_start + loc_count > M.cols()) {
    throw Error("location-coupled cost: selector range out of bounds");
  }
  const Vector full = M * p;
  const Vector own = M.middleCols(loc_start, loc_count) *
                     p.segment(loc_start, loc_count);
  return (y - full).squaredNorm() + lambda * p.squaredNorm() +
         gamma * (full - own).squaredNorm();
}

Vector gpcrc_grad(const Matrix& M, int loc_start, int loc_count, const Vector& y,
                  double lambda, double gamma, const Vector& p) {
  check_lengths(M, y, p, "location-coupled gradient");
  if (loc_start < 0 || loc_count < 1 || loc_start + loc_count > M.cols()) {
    throw Error("location-coupled gradient: selector range out of bounds");
  }
  const Vector full = M * p;
  const Vector gap = full - M.middleCols(loc_start, loc_count) *
                                p.segment(loc_start, loc_count);
  Vector grad = 2.0 * (M.transpose() * (full - y)) + 2.0 * lambda * p;
  Vector coupling = M.transpose() * gap;
  coupling.segment(loc_start, loc_count) -=
      M.middleCols(loc_start, loc_count).transpose() * gap;
  return grad + 2.0 * gamma * coupling;
}

double pprocrc_cost(const Matrix& X, const Matrix& Y, const Vector& y,
                    double lambda, double gamma, const Vector& alpha,
                    const Vector& beta) {
  check_lengths(X, y, alpha, "coupled cost");
  check_lengths(Y, y, beta, "coupled cost");
  const Vector rx = y - X * alpha;
  const Vector ry = y - Y * beta;
  const Vector gap = Y * beta - X * alpha;
  return rx.squaredNorm() + ry.squaredNorm() + lambda * alpha.squaredNorm() +
         gamma * beta.squaredNorm() + gap.squaredNorm();
}

Vector pprocrc_grad_alpha(const Matrix& X, const Matrix& Y, const Vector& y,
                          double lambda, const Vector& alpha,
                          const Vector& beta) {
  check_lengths(X, y, alpha, "coupled gradient");
  check_lengths(Y, y, beta, "coupled gradient");
  const Vector xa = X * alpha;
  return 2.0 * (X.transpose() * (xa - y)) + 2.0 * lambda * alpha +
         2.0 * (X.transpose() * (xa - Y * beta));
}

Vector pprocrc_grad_beta(const Matrix& X, const Matrix& Y, const Vector& y,
                         double gamma, const Vector& alpha, const Vector& beta) {
  check_lengths(X, y, alpha, "coupled gradient");
  check_lengths(Y, y, beta, "coupled gradient");
  const Vector yb = Y * beta;
  return 2.0 * (Y.transpose() * (yb - y)) + 2.0 * gamma * beta +
         2.0 * (Y.transpose() * (yb - X * alpha));
}

}  // namespace crc
