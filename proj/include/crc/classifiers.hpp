#pragma once

#include <utility>
#include <vector>

#include "crc/dictionary.hpp"
#include "crc/patching.hpp"
#include "crc/solvers.hpp"
#include "crc/types.hpp"

namespace crc {

/// Per-class residuals for one query. r_i ≥ 0, +∞ for classes whose
/// coefficients are exactly zero. argmin_class follows the documented
/// tie-break (smallest index among equal minima). margin is the gap between
/// the two smallest residuals (+∞ when only one class exists or the
/// runner-up is unrepresentable).
struct ResidualVector {
  Vector r;
  int argmin_class = 0;
  double margin = 0.0;
};

/// r_i = ‖y − X_i α_i‖² / ‖α_i‖² over columns of X grouped by column_class
/// (values in [0, num_classes)). Works for both contiguous class-sorted
/// dictionaries and the interleaved augmented patch dictionary.
ResidualVector class_residuals_labeled(const Eigen::Ref<const Matrix>& X,
                                       const std::vector<int>& column_class,
                                       int num_classes, const Vector& y,
                                       const Vector& alpha);

ResidualVector class_residuals(const FeatureDictionary& dict, const Vector& y,
                               const CoefficientSolution& solution);

/// Alternative decision statistic r_i = ‖Xα − X_i α_i‖²: distance of the
/// class-i reconstruction from the full collaborative reconstruction.
ResidualVector class_gap_residuals_labeled(const Eigen::Ref<const Matrix>& X,
                                           const std::vector<int>& column_class,
                                           int num_classes, const Vector& alpha);

/// Residuals evaluated in the kernel feature space, where the reconstruction
/// error of class i is k(y,y) − 2·k_i(y)ᵀα_i + α_iᵀ K_ii α_i (clamped at 0
/// against round-off). Normalized divides by ‖α_i‖²; ClassGap measures
/// ‖Φα − Φ_i α_i‖² through the Gram matrix instead.
ResidualVector kernel_class_residuals(const Matrix& gram, const Vector& k_y,
                                      double k_yy, const ClassPartition& part,
                                      const Vector& alpha,
                                      ResidualRule rule = ResidualRule::Normalized);

/// Everything classify_global may need beyond the dictionary: the covariance
/// model (built from the dictionary when absent) and per-class priors
/// (computed from centroids when absent).
struct ClassifyContext {
  const CovarianceModel* covariance = nullptr;
  const ClassPriorWeights* priors = nullptr;
};

/// Whole-image decision: solve with the requested method, compute per-class
/// residuals under config.residual, return argmin class. Methods accepted:
/// crc, ecrc, rcrc, kcrc, procrc, eprocrc. Throws when every class residual
/// is +∞ (no class representable).
std::pair<int, ResidualVector> classify_global(const FeatureDictionary& dict,
                                               const Vector& y, Method method,
                                               const SolverConfig& config,
                                               const ClassifyContext& ctx = {});

/// Single-patch decision at location j. pcrc solves on M_j; gpcrc solves on
/// the augmented dictionary with the location-coupling penalty and restricts
/// residuals over all augmented columns by class.
std::pair<int, ResidualVector> classify_patch(const LocalDictionary& local,
                                              const TestPatchSet& test, int j,
                                              Method method,
                                              const SolverConfig& config);

/// Vote outcome across the q patches of one image. votes sums to q; aggregate
/// holds the per-class residual sums used for tie-breaking.
struct VoteTally {
  std::vector<int> votes;
  Vector aggregate;
  int winner = 0;
};

/// Majority vote with the deterministic tie-break hierarchy: most votes, then
/// smallest aggregate residual among the tied classes, then smallest class
/// index. Patch i contributes labels[i] and residuals[i].
VoteTally majority_vote(const std::vector<int>& labels,
                        const std::vector<ResidualVector>& residuals,
                        int num_classes);

/// Full patch-voting pipeline for the single-dictionary methods: classify
/// every patch of the test image (jobs-way parallel, schedule-independent),
/// then vote. method must be pcrc or gpcrc.
std::pair<int, VoteTally> classify_patch_vote(const LocalDictionary& local,
                                              const TestPatchSet& test,
                                              Method method,
                                              const SolverConfig& config,
                                              int jobs = 1);

/// Coupled-representation decision: for each test patch, solve the coupled
/// system against the augmented training-patch dictionary and the test
/// image's own patch matrix, label the patch from the per-class residuals of
/// the dictionary coefficients, then vote.
std::pair<int, VoteTally> classify_pprocrc(const LocalDictionary& local,
                                           const TestPatchSet& test,
                                           double lambda, double gamma,
                                           int jobs = 1);

/// Same decision computed through a prepared batch solver (shared dictionary
/// elimination); used by the benchmark harness.
std::pair<int, VoteTally> classify_pprocrc_batch(const PairedBatchSolver& solver,
                                                 const LocalDictionary& local,
                                                 const TestPatchSet& test);

}  // namespace crc
