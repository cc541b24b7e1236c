#pragma once

#include "crc/dictionary.hpp"
#include "crc/types.hpp"

namespace crc {

// Objective values and analytic gradients for every solver in the family.
// Solvers use these to report achieved cost and stationarity; tests compare
// the gradients against finite differences and feed the pairs to the descent
// oracle. All functions are pure and operate on plain matrices.

/// ‖y − Xα‖² + λ‖α‖²
double crc_cost(const Matrix& X, const Vector& y, double lambda, const Vector& alpha);
Vector crc_grad(const Matrix& X, const Vector& y, double lambda, const Vector& alpha);

/// (y − Xα)ᵀ R⁻¹ (y − Xα) + λ‖α‖²
double ecrc_cost(const Matrix& X, const CovarianceModel& cov, const Vector& y,
                 double lambda, const Vector& alpha);
Vector ecrc_grad(const Matrix& X, const CovarianceModel& cov, const Vector& y,
                 double lambda, const Vector& alpha);

/// ‖y − Xα‖² + λ‖α‖² + (γ/c)·Σ_k β_k·‖Xα − X_k α_k‖², with per-class weights
/// β_k (length c). The unweighted form is the same with β_k ≡ 1.
double eprocrc_cost(const Matrix& X, const ClassPartition& part, const Vector& y,
                    double lambda, double gamma, const Vector& priors,
                    const Vector& alpha);
Vector eprocrc_grad(const Matrix& X, const ClassPartition& part, const Vector& y,
                    double lambda, double gamma, const Vector& priors,
                    const Vector& alpha);
double procrc_cost(const Matrix& X, const ClassPartition& part, const Vector& y,
                   double lambda, double gamma, const Vector& alpha);
Vector procrc_grad(const Matrix& X, const ClassPartition& part, const Vector& y,
                   double lambda, double gamma, const Vector& alpha);

/// Blended coefficient mean ᾱ = mean over classes of the class-block means.
double blended_mean(const ClassPartition& part, const Vector& alpha);
/// dev_i = Σ_{t in class i} (α_t − ᾱ)², one entry per class.
Vector class_deviations(const ClassPartition& part, const Vector& alpha);

/// ‖y − Xα‖² + λ‖α‖² + τ·Σ_i w_i·dev_i(α) + η‖w‖², for fixed weights w on the
/// probability simplex.
double rcrc_cost(const Matrix& X, const ClassPartition& part, const Vector& y,
                 double lambda, double tau, double eta, const Vector& w,
                 const Vector& alpha);
Vector rcrc_grad_alpha(const Matrix& X, const ClassPartition& part, const Vector& y,
                       double lambda, double tau, const Vector& w,
                       const Vector& alpha);

/// Kernel ridge objective in coefficient space:
/// k(y,y) − 2·k_yᵀα + αᵀKα + λ‖α‖², equal to ‖φ(y) − Φα‖² + λ‖α‖² in the
/// feature space the kernel induces.
double kcrc_cost(const Matrix& K, const Vector& k_y, double k_yy, double lambda,
                 const Vector& alpha);
Vector kcrc_grad(const Matrix& K, const Vector& k_y, double lambda,
                 const Vector& alpha);

/// ‖y − Mp‖² + λ‖p‖² + γ‖M(I − S)p‖², where S selects the contiguous column
/// range [loc_start, loc_start + loc_count) of M.
double gpcrc_cost(const Matrix& M, int loc_start, int loc_count, const Vector& y,
                  double lambda, double gamma, const Vector& p);
Vector gpcrc_grad(const Matrix& M, int loc_start, int loc_count, const Vector& y,
                  double lambda, double gamma, const Vector& p);

/// ‖y − Xα‖² + ‖y − Yβ‖² + λ‖α‖² + γ‖β‖² + ‖Yβ − Xα‖²
double pprocrc_cost(const Matrix& X, const Matrix& Y, const Vector& y,
                    double lambda, double gamma, const Vector& alpha,
                    const Vector& beta);
Vector pprocrc_grad_alpha(const Matrix& X, const Matrix& Y, const Vector& y,
                          double lambda, const Vector& alpha, const Vector& beta);
Vector pprocrc_grad_beta(const Matrix& X, const Matrix& Y, const Vector& y,
                         double gamma, const Vector& alpha, const Vector& beta);

}  // namespace crc
