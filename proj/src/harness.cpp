#include "crc/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "crc/classifiers.hpp"
#include "crc/dictionary.hpp"
#include "crc/parallel.hpp"
#include "crc/patching.hpp"
#include "crc/rng.hpp"
#include "crc/solvers.hpp"

namespace crc {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

void RunConfig::validate() const {
  solver.validate();
  if (folds < 2) throw Error("fold count must be >= 2");
  if (pca_rank < 0) throw Error("pca rank must be >= 0");
  if (patch_override &&
      (patch_override->h < 1 || patch_override->w < 1 ||
       patch_override->stride < 1)) {
    throw Error("patch override parameters must be >= 1");
  }
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void check_dataset(const LoadedDataset& data) {
  if (data.sample_count() < 1) throw Error("dataset is empty");
  if (static_cast<int>(data.labels.size()) != data.sample_count()) {
    throw Error("label count does not match sample count");
  }
  if (data.num_classes < 2) {
    throw Error("need at least two classes to classify");
  }
  for (int label : data.labels) {
    if (label < 0 || label >= data.num_classes) {
      throw Error("label outside [0, num_classes)");
    }
  }
}

void check_indices(const LoadedDataset& data, const std::vector<int>& train,
                   const std::vector<int>& test) {
  if (train.empty()) throw Error("training split is empty");
  const int n = data.sample_count();
  for (int idx : train) {
    if (idx < 0 || idx >= n) throw Error("train index out of range");
  }
  for (int idx : test) {
    if (idx < 0 || idx >= n) throw Error("test index out of range");
  }
}

/// Same rule the single-query classifiers enforce: an all-infinite residual
/// vector means no class could represent the query at all.
int require_representable(const ResidualVector& rv) {
  if (std::isinf(rv.r[rv.argmin_class])) {
    throw Error("every class residual is infinite (no class representable)");
  }
  return rv.argmin_class;
}

/// Whole image as one feature column, through the same row-major flattening
/// the patch pipeline uses.
Vector flatten_image(const Image& img) {
  const PatchGrid grid =
      make_grid(static_cast<int>(img.rows()), static_cast<int>(img.cols()),
                static_cast<int>(img.rows()), static_cast<int>(img.cols()), 1);
  return raw_patch_columns(img, grid).col(0);
}

Vector sample_feature(const LoadedDataset& data, int index) {
  if (data.has_images()) {
    return flatten_image(data.images[static_cast<std::size_t>(index)]);
  }
  return data.features.col(index);
}

/// Queries get the same normalization as dictionary columns, except that a
/// zero query passes through unchanged: the solve then returns α = 0 and the
/// classifier reports the honest "no class representable" error.
Vector prepare_query(Vector y, NormMode mode) {
  if (mode == NormMode::UnitL2) {
    const double n = y.norm();
    if (n > 0.0) y /= n;
  }
  return y;
}

struct SplitEval {
  std::vector<int> predictions;
  double build_seconds = 0.0;
  double classify_seconds = 0.0;
};

void rethrow_first_failure(const std::vector<std::string>& failures,
                           const std::vector<int>& test) {
  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (!failures[i].empty()) {
      throw Error("sample " + std::to_string(test[i]) + ": " + failures[i]);
    }
  }
}

// ---------------------------------------------------------------------------
// Whole-image methods: one dictionary, per-query SPD solves against a
// factorization prepared once per split.

struct GlobalEngine {
  const FeatureDictionary& dict;
  const RunConfig& config;
  std::optional<CovarianceModel> cov;
  std::optional<ClassPriorWeights> priors;
  std::optional<SpdSolveContext> system;  // ecrc / procrc / eprocrc
  Matrix whitened;                        // ecrc: R⁻¹X
  Matrix gram;                            // kcrc
  std::optional<SpdSolveContext> kernel_system;
};

GlobalEngine prepare_global(const FeatureDictionary& dict,
                            const RunConfig& config) {
  GlobalEngine eng{dict, config, {}, {}, {}, {}, {}, {}};
  const SolverConfig& sc = config.solver;
  switch (config.method) {
    case Method::Crc:
      dict.gram_factorization(sc.lambda);  // warm before the parallel loop
      break;
    case Method::Ecrc:
      eng.cov = build_covariance(dict);
      eng.whitened = ecrc_whiten(dict, *eng.cov);
      eng.system.emplace(ecrc_system(dict, eng.whitened, sc.lambda),
                         "whitened collaborative system");
      break;
    case Method::Procrc:
      eng.system.emplace(procrc_system(dict, sc.lambda, sc.gamma),
                         "class-coupled system");
      break;
    case Method::Eprocrc:
      eng.priors = compute_class_priors(dict);
      eng.system.emplace(eprocrc_system(dict, sc.lambda, sc.gamma, *eng.priors),
                         "prior-weighted system");
      break;
    case Method::Rcrc:
      dict.gram();  // warm the cached Gram
      break;
    case Method::Kcrc: {
      eng.gram = kcrc_gram(dict, sc.kernel);
      Matrix sys = eng.gram;
      sys.diagonal().array() += sc.lambda;
      eng.kernel_system.emplace(sys, "kernel system");
      break;
    }
    default:
      throw Error(std::string(method_name(config.method)) +
                  " is a patch method; it has no whole-image path");
  }
  return eng;
}

int classify_with_engine(const GlobalEngine& eng, const Vector& y) {
  const FeatureDictionary& dict = eng.dict;
  const SolverConfig& sc = eng.config.solver;

  Vector alpha;
  switch (eng.config.method) {
    case Method::Crc:
      alpha = dict.gram_solve(sc.lambda, dict.data().transpose() * y);
      break;
    case Method::Ecrc:
      alpha = eng.system->solve(Vector(eng.whitened.transpose() * y));
      break;
    case Method::Procrc:
    case Method::Eprocrc:
      alpha = eng.system->solve(Vector(dict.data().transpose() * y));
      break;
    case Method::Rcrc: {
      CoefficientSolution sol =
          rcrc_solve(dict, y, sc.lambda, sc.tau, sc.eta, sc.tolerance,
                     sc.max_iters);
      alpha = std::move(sol.alpha);
      break;
    }
    case Method::Kcrc: {
      const Vector k_y = kcrc_vector(dict, sc.kernel, y);
      const double k_yy = kernel_eval(sc.kernel, y, y);
      alpha = eng.kernel_system->solve(k_y);
      return require_representable(kernel_class_residuals(
          eng.gram, k_y, k_yy, dict.partition(), alpha, sc.residual));
    }
    default:
      throw Error("unsupported method in whole-image path");
  }

  if (sc.residual == ResidualRule::Normalized) {
    CoefficientSolution sol;
    sol.alpha = std::move(alpha);
    return require_representable(class_residuals(dict, y, sol));
  }
  return require_representable(class_gap_residuals_labeled(
      dict.data(), dict.labels(), dict.num_classes(), alpha));
}

SplitEval evaluate_global(const LoadedDataset& data,
                          const std::vector<int>& train,
                          const std::vector<int>& test,
                          const RunConfig& config) {
  const auto t0 = Clock::now();

  const Eigen::Index dim = data.has_images()
                               ? data.images[0].size()
                               : data.features.rows();
  Matrix train_cols(dim, static_cast<Eigen::Index>(train.size()));
  std::vector<int> train_labels(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    train_cols.col(static_cast<Eigen::Index>(i)) =
        sample_feature(data, train[i]);
    train_labels[i] = data.labels[static_cast<std::size_t>(train[i])];
  }
  const FeatureDictionary dict =
      build_dictionary(train_cols, train_labels, config.norm);
  const GlobalEngine eng = prepare_global(dict, config);

  SplitEval out;
  out.build_seconds = seconds_since(t0);

  const auto t1 = Clock::now();
  const int n = static_cast<int>(test.size());
  out.predictions.assign(static_cast<std::size_t>(n), -1);
  std::vector<std::string> failures(static_cast<std::size_t>(n));
  parallel_for(n, resolve_jobs(config.jobs), [&](std::int64_t i) {
    try {
      const Vector y = prepare_query(
          sample_feature(data, test[static_cast<std::size_t>(i)]), config.norm);
      out.predictions[static_cast<std::size_t>(i)] =
          classify_with_engine(eng, y);
    } catch (const std::exception& e) {
      failures[static_cast<std::size_t>(i)] = e.what();
    }
  });
  rethrow_first_failure(failures, test);
  out.classify_seconds = seconds_since(t1);
  return out;
}

// ---------------------------------------------------------------------------
// Patch methods: per-fold local dictionaries, patch classification, voting.

SplitEval evaluate_patch(const LoadedDataset& data,
                         const std::vector<int>& train,
                         const std::vector<int>& test,
                         const RunConfig& config) {
  if (!data.has_images()) {
    throw Error(std::string(method_name(config.method)) +
                " needs image data, but the dataset has only feature vectors");
  }
  const std::optional<PatchParams> pp =
      config.patch_override ? config.patch_override : data.patch;
  if (!pp) {
    throw Error("no patch grid configured (set one in the manifest or pass an "
                "override)");
  }

  const auto t0 = Clock::now();
  const Image& first = data.images[0];
  const PatchGrid grid =
      make_grid(static_cast<int>(first.rows()), static_cast<int>(first.cols()),
                pp->h, pp->w, pp->stride);

  std::vector<Image> train_images;
  std::vector<int> train_labels;
  train_images.reserve(train.size());
  train_labels.reserve(train.size());
  for (int idx : train) {
    train_images.push_back(data.images[static_cast<std::size_t>(idx)]);
    train_labels.push_back(data.labels[static_cast<std::size_t>(idx)]);
  }
  const LocalDictionary local = build_local_dictionaries(
      train_images, train_labels, grid, config.norm, config.pca_rank);
  const PcaBasis* pca = local.pca() ? &*local.pca() : nullptr;

  const SolverConfig& sc = config.solver;
  const int q = local.location_count();
  const int c = local.num_classes();
  const int n = static_cast<int>(test.size());
  const int jobs = resolve_jobs(config.jobs);

  SplitEval out;
  out.predictions.assign(static_cast<std::size_t>(n), -1);
  std::vector<std::string> failures(static_cast<std::size_t>(n));

  if (config.method == Method::Pcrc) {
    // One factorization per grid location, shared by every test patch there.
    std::vector<SpdSolveContext> loc_ctx;
    loc_ctx.reserve(static_cast<std::size_t>(q));
    for (int j = 0; j < q; ++j) {
      const auto block = local.location_block(j);
      Matrix sys = block.transpose() * block;
      sys.diagonal().array() += sc.lambda;
      loc_ctx.emplace_back(sys, "patch system");
    }
    out.build_seconds = seconds_since(t0);

    const auto t1 = Clock::now();
    parallel_for(n, jobs, [&](std::int64_t i) {
      try {
        const TestPatchSet patches = extract_patches(
            data.images[static_cast<std::size_t>(
                test[static_cast<std::size_t>(i)])],
            grid, config.norm, pca);
        std::vector<int> patch_labels(static_cast<std::size_t>(q));
        std::vector<ResidualVector> patch_res(static_cast<std::size_t>(q));
        for (int j = 0; j < q; ++j) {
          const auto block = local.location_block(j);
          const Vector p = patches.patches.col(j);
          const Vector alpha =
              loc_ctx[static_cast<std::size_t>(j)].solve(
                  Vector(block.transpose() * p));
          ResidualVector rv =
              sc.residual == ResidualRule::Normalized
                  ? class_residuals_labeled(block, local.labels(), c, p, alpha)
                  : class_gap_residuals_labeled(block, local.labels(), c,
                                                alpha);
          patch_labels[static_cast<std::size_t>(j)] = require_representable(rv);
          patch_res[static_cast<std::size_t>(j)] = std::move(rv);
        }
        out.predictions[static_cast<std::size_t>(i)] =
            majority_vote(patch_labels, patch_res, c).winner;
      } catch (const std::exception& e) {
        failures[static_cast<std::size_t>(i)] = e.what();
      }
    });
    rethrow_first_failure(failures, test);
    out.classify_seconds = seconds_since(t1);
    return out;
  }

  if (config.method == Method::Gpcrc) {
    const Matrix& M = local.augmented();
    const Matrix gram = M.transpose() * M;
    out.build_seconds = seconds_since(t0);

    const auto t1 = Clock::now();
    std::vector<TestPatchSet> sets(static_cast<std::size_t>(n));
    parallel_for(n, jobs, [&](std::int64_t i) {
      try {
        sets[static_cast<std::size_t>(i)] = extract_patches(
            data.images[static_cast<std::size_t>(
                test[static_cast<std::size_t>(i)])],
            grid, config.norm, pca);
      } catch (const std::exception& e) {
        failures[static_cast<std::size_t>(i)] = e.what();
      }
    });
    rethrow_first_failure(failures, test);

    // Location-outer order: each location's coupled system is factored once
    // and applied to that location's patch of every test image.
    std::vector<std::vector<int>> patch_labels(
        static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(q)));
    std::vector<std::vector<ResidualVector>> patch_res(
        static_cast<std::size_t>(n),
        std::vector<ResidualVector>(static_cast<std::size_t>(q)));
    for (int j = 0; j < q; ++j) {
      std::optional<SpdSolveContext> ctx;
      try {
        ctx.emplace(gpcrc_system(gram, j * local.sample_count(),
                                 local.sample_count(), sc.lambda, sc.gamma),
                    "location-coupled system");
      } catch (const std::exception& e) {
        throw Error("patch location " + std::to_string(j) + ": " + e.what());
      }
      parallel_for(n, jobs, [&](std::int64_t i) {
        try {
          const Vector p = sets[static_cast<std::size_t>(i)].patches.col(j);
          const Vector alpha = ctx->solve(Vector(M.transpose() * p));
          ResidualVector rv =
              sc.residual == ResidualRule::Normalized
                  ? class_residuals_labeled(M, local.column_labels(), c, p,
                                            alpha)
                  : class_gap_residuals_labeled(M, local.column_labels(), c,
                                                alpha);
          patch_labels[static_cast<std::size_t>(i)]
                      [static_cast<std::size_t>(j)] = require_representable(rv);
          patch_res[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
              std::move(rv);
        } catch (const std::exception& e) {
          failures[static_cast<std::size_t>(i)] = e.what();
        }
      });
      rethrow_first_failure(failures, test);
    }
    for (int i = 0; i < n; ++i) {
      out.predictions[static_cast<std::size_t>(i)] =
          majority_vote(patch_labels[static_cast<std::size_t>(i)],
                        patch_res[static_cast<std::size_t>(i)], c)
              .winner;
    }
    out.classify_seconds = seconds_since(t1);
    return out;
  }

  // pprocrc: shared dictionary-side elimination, per-image batched solve.
  const PairedBatchSolver solver(local.augmented(), sc.lambda, sc.gamma);
  out.build_seconds = seconds_since(t0);

  const auto t1 = Clock::now();
  parallel_for(n, jobs, [&](std::int64_t i) {
    try {
      const TestPatchSet patches = extract_patches(
          data.images[static_cast<std::size_t>(
              test[static_cast<std::size_t>(i)])],
          grid, config.norm, pca);
      out.predictions[static_cast<std::size_t>(i)] =
          classify_pprocrc_batch(solver, local, patches).first;
    } catch (const std::exception& e) {
      failures[static_cast<std::size_t>(i)] = e.what();
    }
  });
  rethrow_first_failure(failures, test);
  out.classify_seconds = seconds_since(t1);
  return out;
}

SplitEval evaluate_split_timed(const LoadedDataset& data,
                               const std::vector<int>& train,
                               const std::vector<int>& test,
                               const RunConfig& config) {
  check_indices(data, train, test);
  if (is_patch_method(config.method)) {
    return evaluate_patch(data, train, test, config);
  }
  return evaluate_global(data, train, test, config);
}

}  // namespace

std::vector<int> evaluate_split(const LoadedDataset& data,
                                const std::vector<int>& train_indices,
                                const std::vector<int>& test_indices,
                                const RunConfig& config) {
  config.validate();
  check_dataset(data);
  return evaluate_split_timed(data, train_indices, test_indices, config)
      .predictions;
}

BenchmarkReport run_benchmark(
    const LoadedDataset& data, const RunConfig& config,
    const std::function<void(const FoldResult&)>& on_fold) {
  config.validate();
  check_dataset(data);

  const auto t0 = Clock::now();
  const FoldPlan plan = kfold_split(data.labels, config.folds, config.seed);

  BenchmarkReport report;
  report.dataset = data.name;
  report.config = config;
  const int c = data.num_classes;
  report.confusion.assign(static_cast<std::size_t>(c),
                          std::vector<int>(static_cast<std::size_t>(c), 0));

  for (int f = 0; f < config.folds; ++f) {
    const auto& train = plan.train_indices[static_cast<std::size_t>(f)];
    const auto& test = plan.test_indices[static_cast<std::size_t>(f)];
    SplitEval ev;
    try {
      ev = evaluate_split_timed(data, train, test, config);
    } catch (const std::exception& e) {
      throw Error("fold " + std::to_string(f) + ": " + e.what());
    }

    FoldResult fr;
    fr.fold = f;
    fr.total = static_cast<int>(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
      const int truth = data.labels[static_cast<std::size_t>(test[i])];
      const int predicted = ev.predictions[i];
      if (predicted == truth) ++fr.correct;
      report.confusion[static_cast<std::size_t>(truth)]
                      [static_cast<std::size_t>(predicted)] += 1;
    }
    fr.accuracy = fr.total > 0 ? static_cast<double>(fr.correct) / fr.total : 0.0;
    fr.build_seconds = ev.build_seconds;
    fr.classify_seconds = ev.classify_seconds;
    report.folds.push_back(fr);
    if (on_fold) on_fold(fr);
  }

  double sum = 0.0;
  for (const FoldResult& fr : report.folds) sum += fr.accuracy;
  report.mean_accuracy = sum / static_cast<double>(report.folds.size());
  double ss = 0.0;
  for (const FoldResult& fr : report.folds) {
    const double d = fr.accuracy - report.mean_accuracy;
    ss += d * d;
  }
  report.std_accuracy =
      std::sqrt(ss / static_cast<double>(report.folds.size() - 1));
  report.total_seconds = seconds_since(t0);
  return report;
}

BenchmarkReport run_benchmark_manifest(
    const std::string& manifest_path, const RunConfig& config,
    const std::function<void(const FoldResult&)>& on_fold) {
  return run_benchmark(load_dataset(manifest_path), config, on_fold);
}

GridSearchResult grid_search(const LoadedDataset& data, const RunConfig& base,
                             const std::vector<double>& lambda_grid,
                             const std::vector<double>& gamma_grid,
                             const std::vector<double>& tau_grid) {
  base.validate();
  check_dataset(data);
  if (lambda_grid.empty() || gamma_grid.empty() || tau_grid.empty()) {
    throw Error("hyperparameter grids must be non-empty");
  }

  auto cleaned = [](std::vector<double> g) {
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    return g;
  };
  const std::vector<double> lams = cleaned(lambda_grid);
  const std::vector<double> gams = cleaned(gamma_grid);
  const std::vector<double> taus = cleaned(tau_grid);

  const FoldPlan outer = kfold_split(data.labels, base.folds, base.seed);

  GridSearchResult result;
  bool have_best = false;
  for (double lam : lams) {
    for (double gam : gams) {
      for (double tau : taus) {
        RunConfig cfg = base;
        cfg.solver.lambda = lam;
        cfg.solver.gamma = gam;
        cfg.solver.tau = tau;
        cfg.validate();

        double outer_sum = 0.0;
        for (int f = 0; f < base.folds; ++f) {
          const auto& tr = outer.train_indices[static_cast<std::size_t>(f)];
          std::vector<int> sub_labels(tr.size());
          for (std::size_t i = 0; i < tr.size(); ++i) {
            sub_labels[i] = data.labels[static_cast<std::size_t>(tr[i])];
          }
          const FoldPlan inner = kfold_split(sub_labels, base.folds,
                                             mix_seed(base.seed, 1000 + f));
          double inner_sum = 0.0;
          for (int g = 0; g < base.folds; ++g) {
            auto map_back = [&tr](const std::vector<int>& local) {
              std::vector<int> global;
              global.reserve(local.size());
              for (int idx : local) {
                global.push_back(tr[static_cast<std::size_t>(idx)]);
              }
              return global;
            };
            const std::vector<int> itrain =
                map_back(inner.train_indices[static_cast<std::size_t>(g)]);
            const std::vector<int> itest =
                map_back(inner.test_indices[static_cast<std::size_t>(g)]);
            const std::vector<int> preds =
                evaluate_split_timed(data, itrain, itest, cfg).predictions;
            int correct = 0;
            for (std::size_t i = 0; i < itest.size(); ++i) {
              if (preds[i] ==
                  data.labels[static_cast<std::size_t>(itest[i])]) {
                ++correct;
              }
            }
            inner_sum += itest.empty()
                             ? 0.0
                             : static_cast<double>(correct) /
                                   static_cast<double>(itest.size());
          }
          outer_sum += inner_sum / static_cast<double>(base.folds);
        }
        const double score = outer_sum / static_cast<double>(base.folds);

        result.table.push_back({lam, gam, tau, score});
        // Strict improvement only: ascending iteration order makes ties fall
        // to the smallest λ, then γ, then τ.
        if (!have_best || score > result.best_score) {
          result.best = cfg;
          result.best_score = score;
          have_best = true;
        }
      }
    }
  }
  result.best_report = run_benchmark(data, result.best);
  return result;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

ordered_json config_to_json(const RunConfig& c) {
  ordered_json j;
  j["method"] = method_name(c.method);
  j["lambda"] = c.solver.lambda;
  j["gamma"] = c.solver.gamma;
  j["tau"] = c.solver.tau;
  j["eta"] = c.solver.eta;
  j["kernel"] = {{"kind", kernel_kind_name(c.solver.kernel.kind)},
                 {"sigma", c.solver.kernel.sigma}};
  j["tolerance"] = c.solver.tolerance;
  j["max_iters"] = c.solver.max_iters;
  j["residual"] = residual_rule_name(c.solver.residual);
  j["folds"] = c.folds;
  j["seed"] = c.seed;
  if (c.patch_override) {
    j["patch"] = {{"h", c.patch_override->h},
                  {"w", c.patch_override->w},
                  {"stride", c.patch_override->stride}};
  } else {
    j["patch"] = nullptr;
  }
  j["pca_rank"] = c.pca_rank;
  j["norm"] = norm_mode_name(c.norm);
  j["jobs"] = c.jobs;
  return j;
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  c.method = parse_method(j.at("method").get<std::string>());
  c.solver.lambda = j.at("lambda").get<double>();
  c.solver.gamma = j.at("gamma").get<double>();
  c.solver.tau = j.at("tau").get<double>();
  c.solver.eta = j.at("eta").get<double>();
  c.solver.kernel.kind =
      parse_kernel_kind(j.at("kernel").at("kind").get<std::string>());
  c.solver.kernel.sigma = j.at("kernel").at("sigma").get<double>();
  c.solver.tolerance = j.at("tolerance").get<double>();
  c.solver.max_iters = j.at("max_iters").get<int>();
  c.solver.residual =
      parse_residual_rule(j.at("residual").get<std::string>());
  c.folds = j.at("folds").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  if (!j.at("patch").is_null()) {
    PatchParams p;
    p.h = j.at("patch").at("h").get<int>();
    p.w = j.at("patch").at("w").get<int>();
    p.stride = j.at("patch").at("stride").get<int>();
    c.patch_override = p;
  }
  c.pca_rank = j.at("pca_rank").get<int>();
  c.norm = parse_norm_mode(j.at("norm").get<std::string>());
  c.jobs = j.at("jobs").get<int>();
  return c;
}

ordered_json report_to_json(const BenchmarkReport& r) {
  if (r.folds.empty()) throw Error("report has no folds");
  ordered_json j;
  j["dataset"] = r.dataset;
  j["method"] = method_name(r.config.method);
  j["version"] = r.version;
  j["config"] = config_to_json(r.config);
  ordered_json folds = ordered_json::array();
  for (const FoldResult& f : r.folds) {
    ordered_json fj;
    fj["fold"] = f.fold;
    fj["correct"] = f.correct;
    fj["total"] = f.total;
    fj["accuracy"] = f.accuracy;
    fj["build_seconds"] = f.build_seconds;
    fj["classify_seconds"] = f.classify_seconds;
    folds.push_back(std::move(fj));
  }
  j["folds"] = std::move(folds);
  j["mean_accuracy"] = r.mean_accuracy;
  j["std_accuracy"] = r.std_accuracy;
  j["confusion"] = r.confusion;
  j["total_seconds"] = r.total_seconds;
  return j;
}

}  // namespace

std::string emit_report_json(const BenchmarkReport& report) {
  return report_to_json(report).dump(2) + "\n";
}

std::string emit_report_csv(const BenchmarkReport& report) {
  if (report.folds.empty()) throw Error("report has no folds");
  std::ostringstream out;
  out.precision(17);
  out << "method,fold,accuracy,mean,std,seconds\n";
  for (const FoldResult& f : report.folds) {
    out << method_name(report.config.method) << ',' << f.fold << ','
        << f.accuracy << ',' << report.mean_accuracy << ','
        << report.std_accuracy << ','
        << (f.build_seconds + f.classify_seconds) << "\n";
  }
  return out.str();
}

BenchmarkReport parse_report_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(std::string("report: invalid JSON: ") + e.what());
  }
  BenchmarkReport r;
  try {
    r.dataset = doc.at("dataset").get<std::string>();
    r.version = doc.at("version").get<std::string>();
    r.config = config_from_json(doc.at("config"));
    for (const json& fj : doc.at("folds")) {
      FoldResult f;
      f.fold = fj.at("fold").get<int>();
      f.correct = fj.at("correct").get<int>();
      f.total = fj.at("total").get<int>();
      f.accuracy = fj.at("accuracy").get<double>();
      f.build_seconds = fj.at("build_seconds").get<double>();
      f.classify_seconds = fj.at("classify_seconds").get<double>();
      r.folds.push_back(f);
    }
    r.mean_accuracy = doc.at("mean_accuracy").get<double>();
    r.std_accuracy = doc.at("std_accuracy").get<double>();
    r.confusion = doc.at("confusion").get<std::vector<std::vector<int>>>();
    r.total_seconds = doc.at("total_seconds").get<double>();
  } catch (const json::exception& e) {
    throw Error(std::string("report: ") + e.what());
  }
  if (r.folds.empty()) throw Error("report has no folds");
  return r;
}

std::string emit_grid_json(const GridSearchResult& result) {
  ordered_json j;
  j["best"] = config_to_json(result.best);
  j["best_score"] = result.best_score;
  ordered_json table = ordered_json::array();
  for (const GridSearchRow& row : result.table) {
    ordered_json rj;
    rj["lambda"] = row.lambda;
    rj["gamma"] = row.gamma;
    rj["tau"] = row.tau;
    rj["score"] = row.score;
    table.push_back(std::move(rj));
  }
  j["table"] = std::move(table);
  j["best_report"] = report_to_json(result.best_report);
  return j.dump(2) + "\n";
}

std::string emit_run_config_json(const RunConfig& config) {
  return config_to_json(config).dump();
}

BenchmarkReport scrub_timing(BenchmarkReport report) {
  for (FoldResult& f : report.folds) {
    f.build_seconds = 0.0;
    f.classify_seconds = 0.0;
  }
  report.total_seconds = 0.0;
  report.config.jobs = 0;
  return report;
}

}  // namespace crc
