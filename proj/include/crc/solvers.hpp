#pragma once

#include <vector>

#include <Eigen/Cholesky>

#include "crc/dictionary.hpp"
#include "crc/patching.hpp"
#include "crc/types.hpp"

namespace crc {

// ---------------------------------------------------------------------------
// System assembly. Every whole-image solver reduces to an SPD linear system
// whose matrix does not depend on the query, so harness code factors once per
// dictionary and reuses the factor across queries. The builders are exposed
// so tests can check the assembled forms independently.

/// XᵀX + λI
Matrix crc_system(const FeatureDictionary& dict, double lambda);

/// Xᵀ R⁻¹ X + λI (pass whitened = R⁻¹X, from ecrc_whiten, to avoid refactoring R)
Matrix ecrc_system(const FeatureDictionary& dict, const Matrix& whitened, double lambda);
/// R⁻¹ X, computed column-wise through the covariance factorization.
Matrix ecrc_whiten(const FeatureDictionary& dict, const CovarianceModel& cov);

/// XᵀX + λI + (γ/c)·Σ_k β_k·(I−S_k)ᵀ XᵀX (I−S_k), with priors β ≡ 1.
Matrix procrc_system(const FeatureDictionary& dict, double lambda, double gamma);
/// Same with explicit per-class priors β.
Matrix eprocrc_system(const FeatureDictionary& dict, double lambda, double gamma,
                      const ClassPriorWeights& priors);

/// Kernel evaluation k(u, v) for the configured kernel.
double kernel_eval(const KernelSpec& kernel, const Vector& u, const Vector& v);
/// N×N kernel Gram matrix over the dictionary columns.
Matrix kcrc_gram(const FeatureDictionary& dict, const KernelSpec& kernel);
/// Length-N vector k(y) with k(y)_t = k(x_t, y).
Vector kcrc_vector(const FeatureDictionary& dict, const KernelSpec& kernel,
                   const Vector& y);

/// MᵀM + λI + γ·(I−S_j)ᵀ MᵀM (I−S_j) over the augmented local dictionary,
/// with S_j selecting location j's columns. gram must be MᵀM (pass it in so
/// the caller can amortize the product across locations).
Matrix gpcrc_system(const Matrix& gram, int loc_start, int loc_count,
                    double lambda, double gamma);

// ---------------------------------------------------------------------------
// One-shot solvers. Each returns coefficients plus the achieved objective
// value and the analytic-gradient norm at the solution.

CoefficientSolution crc_solve(const FeatureDictionary& dict, const Vector& y,
                              double lambda);

CoefficientSolution ecrc_solve(const FeatureDictionary& dict,
                               const CovarianceModel& cov, const Vector& y,
                               double lambda);

CoefficientSolution procrc_solve(const FeatureDictionary& dict, const Vector& y,
                                 double lambda, double gamma);

CoefficientSolution eprocrc_solve(const FeatureDictionary& dict, const Vector& y,
                                  double lambda, double gamma,
                                  const ClassPriorWeights& priors);

/// Per-class weights from centroid distances: raw_c = ‖mean(X) − mean(X_c)‖₂,
/// normalized to mean 1; all-zero distances fall back to uniform weights.
ClassPriorWeights compute_class_priors(const FeatureDictionary& dict);

/// Alternating minimization over coefficients α and simplex weights w.
/// Each iteration updates w (closed form: simplex projection for η > 0, vertex
/// argmin for η = 0) and then α (ridge-type SPD solve), so the returned α is
/// exactly stationary for the final w. Stops when the cost decrease drops
/// below config.tolerance or after config.max_iters iterations; running past
/// the budget sets converged = false on the result instead of throwing.
CoefficientSolution rcrc_solve(const FeatureDictionary& dict, const Vector& y,
                               double lambda, double tau, double eta,
                               double tolerance = 1e-10, int max_iters = 200,
                               std::vector<double>* cost_trace = nullptr,
                               Vector* weights_out = nullptr);

/// Euclidean projection onto the probability simplex {w ≥ 0, Σw = 1}.
Vector project_simplex(const Vector& z);

CoefficientSolution kcrc_solve(const FeatureDictionary& dict, const Vector& y,
                               double lambda, const KernelSpec& kernel);
/// Low-level kernel solve on a precomputed Gram matrix and kernel vector;
/// verifies positive semidefiniteness and reports the most negative
/// eigenvalue estimate on failure.
CoefficientSolution kcrc_solve_gram(const Matrix& gram, const Vector& k_y,
                                    double k_yy, double lambda);

/// Ridge solve on the location-j dictionary M_j against test patch y_j.
CoefficientSolution pcrc_patch_solve(const LocalDictionary& local,
                                     const TestPatchSet& test, int j,
                                     double lambda);

/// Ridge solve on the augmented dictionary with the location-coupling penalty
/// γ‖M p − M_j p_j‖².
CoefficientSolution gpcrc_solve(const LocalDictionary& local,
                                const TestPatchSet& test, int j, double lambda,
                                double gamma);

/// Coupled solve for one query y against dictionary X (d×N) and the query
/// image's own patch matrix Y (d×q): minimizes
///   ‖y−Xα‖² + ‖y−Yβ‖² + λ‖α‖² + γ‖β‖² + ‖Yβ−Xα‖²
/// via the SPD block system
///   [2XᵀX+λI   −XᵀY ] [α]   [Xᵀy]
///   [−YᵀX   2YᵀY+γI] [β] = [Yᵀy].
/// Result carries alpha (length N) and beta (length q). Requires λ, γ > 0.
CoefficientSolution pprocrc_solve(const Matrix& X, const Matrix& Y,
                                  const Vector& y, double lambda, double gamma);

// ---------------------------------------------------------------------------
// Reusable factorizations for batched classification.

/// Factors one SPD system matrix and solves many right-hand sides.
class SpdSolveContext {
 public:
  explicit SpdSolveContext(const Matrix& system, const char* what = "system");
  Vector solve(const Vector& rhs) const;
  Matrix solve(const Matrix& rhs) const;
  int size() const { return static_cast<int>(llt_.matrixLLT().rows()); }

 private:
  Eigen::LLT<Matrix> llt_;
};

/// Batched coupled solver: the dictionary-side elimination is shared across
/// query images. Internally applies (2XᵀX+λI)⁻¹ through the d×d dual system
/// (2XXᵀ+λI), so cost scales with the feature dimension rather than the
/// (large) column count of the augmented dictionary; per image it forms the
/// q×q Schur complement in β once and back-substitutes per patch. Produces
/// the same solutions as pprocrc_solve.
class PairedBatchSolver {
 public:
  PairedBatchSolver(Matrix X, double lambda, double gamma);

  /// Solves the coupled system for every column y_i of Y with that same Y as
  /// the self-representation block; returns one solution per column.
  std::vector<CoefficientSolution> solve_image(const Matrix& Y) const;

  const Matrix& dictionary() const { return X_; }

 private:
  Vector apply_dict_inverse(const Vector& u) const;  // (2XᵀX+λI)⁻¹ u

  Matrix X_;
  double lambda_;
  double gamma_;
  Eigen::LLT<Matrix> dual_;  // factorization of 2XXᵀ + λI (d×d)
};

}  // namespace crc
