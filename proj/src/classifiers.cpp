#include "crc/classifiers.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "crc/parallel.hpp"

namespace crc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Fills argmin_class and margin from r under the documented tie-break
/// (smallest index among equal minima).
void rank_residuals(ResidualVector& rv) {
  const int c = static_cast<int>(rv.r.size());
  int best = 0;
  for (int k = 1; k < c; ++k) {
    if (rv.r[k] < rv.r[best]) best = k;
  }
  rv.argmin_class = best;

  if (c == 1) {
    rv.margin = kInf;
    return;
  }
  double second = kInf;
  for (int k = 0; k < c; ++k) {
    if (k != best && rv.r[k] < second) second = rv.r[k];
  }
  if (std::isinf(rv.r[best])) {
    rv.margin = 0.0;  // nothing representable; caller decides what to do
  } else if (std::isinf(second)) {
    rv.margin = kInf;
  } else {
    rv.margin = second - rv.r[best];
  }
}

void check_labeled(const Eigen::Ref<const Matrix>& X,
                   const std::vector<int>& column_class, int num_classes,
                   const Vector& alpha) {
  if (num_classes < 1) throw Error("residuals need at least one class");
  if (static_cast<Eigen::Index>(column_class.size()) != X.cols() ||
      X.cols() != alpha.size()) {
    throw Error("residuals: column labels, dictionary, and coefficients "
                "disagree in length");
  }
}

/// Per-class reconstructions X_i α_i (d × c) and coefficient energies ‖α_i‖².
std::pair<Matrix, Vector> class_parts(const Eigen::Ref<const Matrix>& X,
                                      const std::vector<int>& column_class,
                                      int num_classes, const Vector& alpha) {
  Matrix recon = Matrix::Zero(X.rows(), num_classes);
  Vector energy = Vector::Zero(num_classes);
  for (Eigen::Index t = 0; t < X.cols(); ++t) {
    const int k = column_class[static_cast<std::size_t>(t)];
    if (k < 0 || k >= num_classes) {
      std::ostringstream msg;
      msg << "column " << t << " labeled " << k << ", outside [0, "
          << num_classes << ")";
      throw Error(msg.str());
    }
    recon.col(k) += alpha[t] * X.col(t);
    energy[k] += alpha[t] * alpha[t];
  }
  return {std::move(recon), std::move(energy)};
}

std::pair<int, ResidualVector> finalize(ResidualVector rv, const char* what) {
  if (std::isinf(rv.r[rv.argmin_class])) {
    throw Error(std::string(what) +
                ": every class residual is infinite (no class representable)");
  }
  return {rv.argmin_class, std::move(rv)};
}

}  // namespace

ResidualVector class_residuals_labeled(const Eigen::Ref<const Matrix>& X,
                                       const std::vector<int>& column_class,
                                       int num_classes, const Vector& y,
                                       const Vector& alpha) {
  check_labeled(X, column_class, num_classes, alpha);
  if (y.size() != X.rows()) throw Error("residuals: query length mismatch");

  auto [recon, energy] = class_parts(X, column_class, num_classes, alpha);
  ResidualVector rv;
  rv.r.resize(num_classes);
  for (int k = 0; k < num_classes; ++k) {
    rv.r[k] = energy[k] == 0.0
                  ? kInf
                  : (y - recon.col(k)).squaredNorm() / energy[k];
  }
  rank_residuals(rv);
  return rv;
}

ResidualVector class_residuals(const FeatureDictionary& dict, const Vector& y,
                               const CoefficientSolution& solution) {
  return class_residuals_labeled(dict.data(), dict.labels(), dict.num_classes(),
                                 y, solution.alpha);
}

ResidualVector class_gap_residuals_labeled(const Eigen::Ref<const Matrix>& X,
                                           const std::vector<int>& column_class,
                                           int num_classes,
                                           const Vector& alpha) {
  check_labeled(X, column_class, num_classes, alpha);

  auto [recon, energy] = class_parts(X, column_class, num_classes, alpha);
  const Vector full = X * alpha;
  ResidualVector rv;
  rv.r.resize(num_classes);
  for (int k = 0; k < num_classes; ++k) {
    rv.r[k] = (full - recon.col(k)).squaredNorm();
  }
  rank_residuals(rv);
  return rv;
}

ResidualVector kernel_class_residuals(const Matrix& gram, const Vector& k_y,
                                      double k_yy, const ClassPartition& part,
                                      const Vector& alpha, ResidualRule rule) {
  const int c = part.num_classes();
  if (gram.rows() != alpha.size() || k_y.size() != alpha.size() ||
      part.total() != alpha.size()) {
    throw Error("kernel residuals: dimension mismatch");
  }

  ResidualVector rv;
  rv.r.resize(c);
  if (rule == ResidualRule::Normalized) {
    for (int k = 0; k < c; ++k) {
      const auto a = alpha.segment(part.offsets[k], part.counts[k]);
      const double energy = a.squaredNorm();
      if (energy == 0.0) {
        rv.r[k] = kInf;
        continue;
      }
      const auto kk = gram.block(part.offsets[k], part.offsets[k],
                                 part.counts[k], part.counts[k]);
      const auto ky = k_y.segment(part.offsets[k], part.counts[k]);
      const double sq = k_yy - 2.0 * ky.dot(a) + a.dot(kk * a);
      rv.r[k] = std::max(sq, 0.0) / energy;
    }
  } else {
    for (int k = 0; k < c; ++k) {
      // ‖Φα − Φ_kα_k‖² = zᵀGz with z = α outside class k, 0 inside.
      Vector z = alpha;
      z.segment(part.offsets[k], part.counts[k]).setZero();
      rv.r[k] = std::max(z.dot(gram * z), 0.0);
    }
  }
  rank_residuals(rv);
  return rv;
}

std::pair<int, ResidualVector> classify_global(const FeatureDictionary& dict,
                                               const Vector& y, Method method,
                                               const SolverConfig& config,
                                               const ClassifyContext& ctx) {
  config.validate();
  if (is_patch_method(method)) {
    throw Error(std::string("method ") + method_name(method) +
                " classifies patches; use the patch pipeline");
  }

  if (method == Method::Kcrc) {
    const Matrix gram = kcrc_gram(dict, config.kernel);
    const Vector k_y = kcrc_vector(dict, config.kernel, y);
    const double k_yy = kernel_eval(config.kernel, y, y);
    const CoefficientSolution sol =
        kcrc_solve_gram(gram, k_y, k_yy, config.lambda);
    return finalize(kernel_class_residuals(gram, k_y, k_yy, dict.partition(),
                                           sol.alpha, config.residual),
                    "kernel classification");
  }

  CoefficientSolution sol;
  switch (method) {
    case Method::Crc:
      sol = crc_solve(dict, y, config.lambda);
      break;
    case Method::Ecrc: {
      if (ctx.covariance != nullptr) {
        sol = ecrc_solve(dict, *ctx.covariance, y, config.lambda);
      } else {
        sol = ecrc_solve(dict, build_covariance(dict), y, config.lambda);
      }
      break;
    }
    case Method::Rcrc:
      sol = rcrc_solve(dict, y, config.lambda, config.tau, config.eta,
                       config.tolerance, config.max_iters);
      break;
    case Method::Procrc:
      sol = procrc_solve(dict, y, config.lambda, config.gamma);
      break;
    case Method::Eprocrc: {
      if (ctx.priors != nullptr) {
        sol = eprocrc_solve(dict, y, config.lambda, config.gamma, *ctx.priors);
      } else {
        sol = eprocrc_solve(dict, y, config.lambda, config.gamma,
                            compute_class_priors(dict));
      }
      break;
    }
    default:
      throw Error("unhandled whole-image method");
  }

  ResidualVector rv =
      config.residual == ResidualRule::Normalized
          ? class_residuals(dict, y, sol)
          : class_gap_residuals_labeled(dict.data(), dict.labels(),
                                        dict.num_classes(), sol.alpha);
  return finalize(std::move(rv), "classification");
}

std::pair<int, ResidualVector> classify_patch(const LocalDictionary& local,
                                              const TestPatchSet& test, int j,
                                              Method method,
                                              const SolverConfig& config) {
  config.validate();
  if (method == Method::Pcrc) {
    const CoefficientSolution sol =
        pcrc_patch_solve(local, test, j, config.lambda);
    const Vector y = test.patches.col(j);
    ResidualVector rv =
        config.residual == ResidualRule::Normalized
            ? class_residuals_labeled(local.location_block(j), local.labels(),
                                      local.num_classes(), y, sol.alpha)
            : class_gap_residuals_labeled(local.location_block(j),
                                          local.labels(), local.num_classes(),
                                          sol.alpha);
    return finalize(std::move(rv), "patch classification");
  }
  if (method == Method::Gpcrc) {
    const CoefficientSolution sol =
        gpcrc_solve(local, test, j, config.lambda, config.gamma);
    const Vector y = test.patches.col(j);
    ResidualVector rv =
        config.residual == ResidualRule::Normalized
            ? class_residuals_labeled(local.augmented(), local.column_labels(),
                                      local.num_classes(), y, sol.alpha)
            : class_gap_residuals_labeled(local.augmented(),
                                          local.column_labels(),
                                          local.num_classes(), sol.alpha);
    return finalize(std::move(rv), "patch classification");
  }
  throw Error(std::string("method ") + method_name(method) +
              " is not a per-patch method (expected pcrc or gpcrc)");
}

VoteTally majority_vote(const std::vector<int>& labels,
                        const std::vector<ResidualVector>& residuals,
                        int num_classes) {
  if (labels.empty()) throw Error("majority vote over an empty patch set");
  if (labels.size() != residuals.size()) {
    throw Error("majority vote: label and residual counts differ");
  }
  if (num_classes < 1) throw Error("majority vote needs at least one class");

  VoteTally tally;
  tally.votes.assign(static_cast<std::size_t>(num_classes), 0);
  tally.aggregate = Vector::Zero(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int label = labels[i];
    if (label < 0 || label >= num_classes) {
      throw Error("majority vote: patch label out of range");
    }
    if (residuals[i].r.size() != num_classes) {
      throw Error("majority vote: residual vector has wrong class count");
    }
    ++tally.votes[static_cast<std::size_t>(label)];
    tally.aggregate += residuals[i].r;
  }

  // Most votes; tie → smallest aggregate residual; tie again → smallest index.
  int best = 0;
  for (int k = 1; k < num_classes; ++k) {
    const bool more_votes = tally.votes[static_cast<std::size_t>(k)] >
                            tally.votes[static_cast<std::size_t>(best)];
    const bool tied_votes = tally.votes[static_cast<std::size_t>(k)] ==
                            tally.votes[static_cast<std::size_t>(best)];
    if (more_votes ||
        (tied_votes && tally.aggregate[k] < tally.aggregate[best])) {
      best = k;
    }
  }
  tally.winner = best;
  return tally;
}

std::pair<int, VoteTally> classify_patch_vote(const LocalDictionary& local,
                                              const TestPatchSet& test,
                                              Method method,
                                              const SolverConfig& config,
                                              int jobs) {
  const int q = local.location_count();
  if (test.count() != q) {
    throw Error("test patch count does not match dictionary locations");
  }
  std::vector<int> labels(static_cast<std::size_t>(q));
  std::vector<ResidualVector> residuals(static_cast<std::size_t>(q));
  std::vector<std::string> failures(static_cast<std::size_t>(q));
  parallel_for(q, jobs, [&](std::int64_t j) {
    try {
      auto [label, rv] =
          classify_patch(local, test, static_cast<int>(j), method, config);
      labels[static_cast<std::size_t>(j)] = label;
      residuals[static_cast<std::size_t>(j)] = std::move(rv);
    } catch (const std::exception& e) {
      failures[static_cast<std::size_t>(j)] = e.what();
    }
  });
  for (int j = 0; j < q; ++j) {
    if (!failures[static_cast<std::size_t>(j)].empty()) {
      std::ostringstream msg;
      msg << "patch " << j << ": " << failures[static_cast<std::size_t>(j)];
      throw Error(msg.str());
    }
  }
  VoteTally tally = majority_vote(labels, residuals, local.num_classes());
  const int winner = tally.winner;
  return {winner, std::move(tally)};
}

std::pair<int, VoteTally> classify_pprocrc_batch(const PairedBatchSolver& solver,
                                                 const LocalDictionary& local,
                                                 const TestPatchSet& test) {
  if (solver.dictionary().cols() != local.augmented().cols() ||
      solver.dictionary().rows() != local.augmented().rows()) {
    throw Error("coupled classification: solver was prepared for a different "
                "dictionary");
  }
  if (test.patch_dim() != local.patch_dim() ||
      test.count() != local.location_count()) {
    throw Error("coupled classification: test patches do not match the "
                "dictionary geometry");
  }

  const std::vector<CoefficientSolution> sols = solver.solve_image(test.patches);
  const int q = test.count();
  std::vector<int> labels(static_cast<std::size_t>(q));
  std::vector<ResidualVector> residuals(static_cast<std::size_t>(q));
  for (int i = 0; i < q; ++i) {
    ResidualVector rv = class_residuals_labeled(
        local.augmented(), local.column_labels(), local.num_classes(),
        test.patches.col(i), sols[static_cast<std::size_t>(i)].alpha);
    auto [label, ranked] = finalize(std::move(rv), "coupled classification");
    labels[static_cast<std::size_t>(i)] = label;
    residuals[static_cast<std::size_t>(i)] = std::move(ranked);
  }
  VoteTally tally = majority_vote(labels, residuals, local.num_classes());
  const int winner = tally.winner;
  return {winner, std::move(tally)};
}

std::pair<int, VoteTally> classify_pprocrc(const LocalDictionary& local,
                                           const TestPatchSet& test,
                                           double lambda, double gamma,
                                           int jobs) {
  (void)jobs;  // per-image work is small; parallelism lives across images
  PairedBatchSolver solver(local.augmented(), lambda, gamma);
  return classify_pprocrc_batch(solver, local, test);
}

}  // namespace crc
