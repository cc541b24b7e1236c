#pragma once

#include <memory>
#include <vector>

#include <Eigen/Cholesky>

#include "crc/types.hpp"

namespace crc {

/// Column layout of a class-sorted matrix: class i occupies columns
/// [offsets[i], offsets[i] + counts[i]).
struct ClassPartition {
  std::vector<int> offsets;
  std::vector<int> counts;

  int num_classes() const { return static_cast<int>(counts.size()); }
  int total() const;
  void check_class(int i) const;  // throws Error on out-of-range index
};

/// Builds the partition for contiguous labels 0..c-1 and the stable
/// class-sorted column order. Throws on negative labels or an empty class.
ClassPartition make_partition(const std::vector<int>& sorted_labels);

/// Divides each column by its Euclidean norm when mode == UnitL2; throws on a
/// zero column. Returns the matrix unchanged when mode == None.
Matrix normalize_columns(Matrix m, NormMode mode);

/// Training feature matrix with a class partition and a lazily filled cache of
/// the Gram matrix and its ridge factorization. Immutable after construction
/// and safe to share across threads; cache fill is single-initialization.
class FeatureDictionary {
 public:
  FeatureDictionary(Matrix features, std::vector<int> labels, NormMode mode);
  ~FeatureDictionary();
  FeatureDictionary(FeatureDictionary&&) noexcept;
  FeatureDictionary& operator=(FeatureDictionary&&) noexcept;
  FeatureDictionary(const FeatureDictionary&) = delete;
  FeatureDictionary& operator=(const FeatureDictionary&) = delete;

  const Matrix& data() const { return data_; }
  int dim() const { return static_cast<int>(data_.rows()); }
  int count() const { return static_cast<int>(data_.cols()); }
  int num_classes() const { return partition_.num_classes(); }
  const ClassPartition& partition() const { return partition_; }
  /// Class label of stored column t.
  const std::vector<int>& labels() const { return labels_; }
  /// Original input column index of stored column t (columns are class-sorted).
  const std::vector<int>& source_index() const { return source_index_; }
  NormMode norm_mode() const { return norm_mode_; }

  int class_count(int i) const;
  int class_offset(int i) const;
  /// Columns of class i as a view into the stored (class-sorted) matrix.
  auto class_block(int i) const {
    partition_.check_class(i);
    return data_.middleCols(partition_.offsets[i], partition_.counts[i]);
  }

  /// XᵀX, computed on first use and shared afterwards.
  const Matrix& gram() const;
  /// Cholesky factor of (XᵀX + λI); refactorized only when λ changes.
  std::shared_ptr<const Eigen::LLT<Matrix>> gram_factorization(double lambda) const;
  /// Solves (XᵀX + λI) z = rhs through the cached factorization.
  Vector gram_solve(double lambda, const Vector& rhs) const;

 private:
  Matrix data_;
  std::vector<int> labels_;
  std::vector<int> source_index_;
  ClassPartition partition_;
  NormMode norm_mode_;

  struct Cache;
  std::unique_ptr<Cache> cache_;
};

FeatureDictionary build_dictionary(Matrix features, std::vector<int> labels,
                                   NormMode mode = NormMode::UnitL2);

/// Returns the class-i columns as a dense matrix.
Matrix class_submatrix(const FeatureDictionary& dict, int i);

/// Feature covariance R used by the covariance-whitened solver. R is kept
/// symmetric positive definite by construction (identity, or sample
/// covariance plus a ridge).
struct CovarianceModel {
  Matrix R;
  Eigen::LLT<Matrix> factorization;
  bool is_identity = false;

  Vector solve(const Vector& v) const;  // R⁻¹ v
  Matrix solve(const Matrix& m) const;  // R⁻¹ M, column-wise
};

/// Sample covariance of the dictionary columns (divisor N−1) plus ridge·I.
/// Pass ridge < 0 to use the default 1e-6·trace(cov)/d. Requires N ≥ 2.
CovarianceModel build_covariance(const FeatureDictionary& dict, double ridge = -1.0);

/// R = I (no whitening); never adds a ridge.
CovarianceModel identity_covariance(int dim);

}  // namespace crc
