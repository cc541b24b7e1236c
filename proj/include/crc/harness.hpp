#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "crc/datasets.hpp"
#include "crc/types.hpp"

namespace crc {

/// Everything one benchmark run depends on. Identical configs on identical
/// manifests produce identical reports (timing fields aside).
struct RunConfig {
  Method method = Method::Crc;
  SolverConfig solver;
  int folds = 5;
  std::uint64_t seed = 42;
  std::optional<PatchParams> patch_override;  // wins over the manifest's grid
  int pca_rank = 0;                           // 0 = raw patch features
  NormMode norm = NormMode::UnitL2;
  int jobs = 0;  // parallelism cap; 0 = all cores; results independent of it

  void validate() const;  // throws Error
};

struct FoldResult {
  int fold = 0;
  int correct = 0;
  int total = 0;
  double accuracy = 0.0;
  double build_seconds = 0.0;     // dictionary construction
  double classify_seconds = 0.0;  // test-split evaluation
};

struct BenchmarkReport {
  std::string dataset;
  RunConfig config;
  std::vector<FoldResult> folds;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // sample standard deviation over folds
  std::vector<std::vector<int>> confusion;  // true class × predicted class
  double total_seconds = 0.0;
  std::string version = kVersion;
};

/// k-fold cross validation of one method: per fold, the dictionary (and any
/// patch-level projection) is built from the training split only, every test
/// sample is classified, and accuracy is tallied. Deterministic given
/// (dataset, config). on_fold, when set, is called after each completed fold
/// (progress reporting; has no effect on the result).
BenchmarkReport run_benchmark(
    const LoadedDataset& data, const RunConfig& config,
    const std::function<void(const FoldResult&)>& on_fold = {});
BenchmarkReport run_benchmark_manifest(
    const std::string& manifest_path, const RunConfig& config,
    const std::function<void(const FoldResult&)>& on_fold = {});

/// Per-sample predictions for one train/test split; the building block behind
/// run_benchmark and grid_search. Returns predicted labels aligned with
/// test_indices.
std::vector<int> evaluate_split(const LoadedDataset& data,
                                const std::vector<int>& train_indices,
                                const std::vector<int>& test_indices,
                                const RunConfig& config);

struct GridSearchRow {
  double lambda = 0.0;
  double gamma = 0.0;
  double tau = 0.0;
  double score = 0.0;  // mean over outer folds of the inner-CV mean accuracy
};

struct GridSearchResult {
  RunConfig best;
  double best_score = 0.0;              // nested-CV score of the winner
  BenchmarkReport best_report;          // run_benchmark of the winning config
  std::vector<GridSearchRow> table;
};

/// Exhaustive (λ, γ, τ) search by nested cross validation: candidate configs
/// are scored with an inner k-fold on each outer fold's training split, so
/// model selection never sees an outer test sample. Score ties break to the
/// smaller λ, then γ, then τ.
GridSearchResult grid_search(const LoadedDataset& data, const RunConfig& base,
                             const std::vector<double>& lambda_grid,
                             const std::vector<double>& gamma_grid,
                             const std::vector<double>& tau_grid);

/// Serialization. JSON round-trips every numeric field exactly; CSV rows are
/// method, fold, accuracy, mean, std, seconds.
std::string emit_report_json(const BenchmarkReport& report);
std::string emit_report_csv(const BenchmarkReport& report);
BenchmarkReport parse_report_json(const std::string& json_text);

std::string emit_grid_json(const GridSearchResult& result);

/// Compact one-line JSON echo of a run configuration; the same object that
/// appears under "config" in report JSON.
std::string emit_run_config_json(const RunConfig& config);

/// Zeroes the wall-clock fields and the jobs echo (both are execution
/// details, not results); lets callers compare reports for the determinism
/// guarantee, which excludes exactly those fields.
BenchmarkReport scrub_timing(BenchmarkReport report);

}  // namespace crc
