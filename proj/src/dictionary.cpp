#include "crc/dictionary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>

namespace crc {

int ClassPartition::total() const {
  return std::accumulate(counts.begin(), counts.end(), 0);
}

void ClassPartition::check_class(int i) const {
  if (i < 0 || i >= num_classes()) {
    std::ostringstream msg;
    msg << "class index " << i << " out of range [0, " << num_classes() << ")";
    throw Error(msg.str());
  }
}

ClassPartition make_partition(const std::vector<int>& sorted_labels) {
  int c = 0;
  for (int label : sorted_labels) {
    if (label < 0) throw Error("class labels must be >= 0");
    c = std::max(c, label + 1);
  }
  if (sorted_labels.empty()) throw Error("at least one sample is required");

  ClassPartition part;
  part.offsets.assign(c, 0);
  part.counts.assign(c, 0);
  for (int label : sorted_labels) ++part.counts[label];
  for (int i = 0; i < c; ++i) {
    if (part.counts[i] == 0) {
      std::ostringstream msg;
      msg << "class " << i << " has no samples (labels must cover 0.." << c - 1
          << ")";
      throw Error(msg.str());
    }
    if (i > 0) part.offsets[i] = part.offsets[i - 1] + part.counts[i - 1];
  }
  return part;
}

Matrix normalize_columns(Matrix m, NormMode mode) {
  if (mode == NormMode::None) return m;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const double norm = m.col(c).norm();
    if (norm == 0.0) {
      std::ostringstream msg;
      msg << "column " << c << " has zero norm; cannot unit-normalize";
      throw Error(msg.str());
    }
    // A column already unit to within the norm tolerance stays untouched,
    // which makes normalization exactly idempotent.
    if (std::abs(norm - 1.0) > 1e-12) m.col(c) /= norm;
  }
  return m;
}

struct FeatureDictionary::Cache {
  std::once_flag gram_once;
  Matrix gram;

  std::mutex mutex;
  double lambda = std::numeric_limits<double>::quiet_NaN();
  std::shared_ptr<const Eigen::LLT<Matrix>> factorization;
};

FeatureDictionary::FeatureDictionary(Matrix features, std::vector<int> labels,
                                     NormMode mode)
    : norm_mode_(mode), cache_(std::make_unique<Cache>()) {
  if (features.rows() < 1 || features.cols() < 1) {
    throw Error("feature matrix must be at least 1x1");
  }
  if (static_cast<Eigen::Index>(labels.size()) != features.cols()) {
    std::ostringstream msg;
    msg << "label count " << labels.size() << " does not match sample count "
        << features.cols();
    throw Error(msg.str());
  }

  // Stable class sort: columns grouped by class, original order kept within
  // each class so results do not depend on input permutation beyond labels.
  source_index_.resize(labels.size());
  std::iota(source_index_.begin(), source_index_.end(), 0);
  std::stable_sort(source_index_.begin(), source_index_.end(),
                   [&](int a, int b) { return labels[a] < labels[b]; });

  labels_.resize(labels.size());
  Matrix sorted(features.rows(), features.cols());
  for (std::size_t t = 0; t < source_index_.size(); ++t) {
    labels_[t] = labels[source_index_[t]];
    sorted.col(static_cast<Eigen::Index>(t)) = features.col(source_index_[t]);
  }
  partition_ = make_partition(labels_);
  data_ = normalize_columns(std::move(sorted), mode);
}

FeatureDictionary::~FeatureDictionary() = default;
FeatureDictionary::FeatureDictionary(FeatureDictionary&&) noexcept = default;
FeatureDictionary& FeatureDictionary::operator=(FeatureDictionary&&) noexcept =
    default;

int FeatureDictionary::class_count(int i) const {
  partition_.check_class(i);
  return partition_.counts[i];
}

int FeatureDictionary::class_offset(int i) const {
  partition_.check_class(i);
  return partition_.offsets[i];
}

const Matrix& FeatureDictionary::gram() const {
  std::call_once(cache_->gram_once,
                 [this] { cache_->gram = data_.transpose() * data_; });
  return cache_->gram;
}

std::shared_ptr<const Eigen::LLT<Matrix>> FeatureDictionary::gram_factorization(
    double lambda) const {
  if (!(lambda > 0.0)) {
    throw Error("gram factorization requires lambda > 0");
  }
  const Matrix& g = gram();
  std::lock_guard<std::mutex> lock(cache_->mutex);
  if (!cache_->factorization || cache_->lambda != lambda) {
    Matrix system = g;
    system.diagonal().array() += lambda;
    auto llt = std::make_shared<Eigen::LLT<Matrix>>(system);
    if (llt->info() != Eigen::Success) {
      throw Error("ridge gram factorization failed");
    }
    cache_->factorization = std::move(llt);
    cache_->lambda = lambda;
  }
  return cache_->factorization;
}

Vector FeatureDictionary::gram_solve(double lambda, const Vector& rhs) const {
  return gram_factorization(lambda)->solve(rhs);
}

FeatureDictionary build_dictionary(Matrix features, std::vector<int> labels,
                                   NormMode mode) {
  return FeatureDictionary(std::move(features), std::move(labels), mode);
}

Matrix class_submatrix(const FeatureDictionary& dict, int i) {
  return dict.class_block(i);
}

Vector CovarianceModel::solve(const Vector& v) const {
  if (is_identity) return v;
  return factorization.solve(v);
}

Matrix CovarianceModel::solve(const Matrix& m) const {
  if (is_identity) return m;
  return factorization.solve(m);
}

CovarianceModel build_covariance(const FeatureDictionary& dict, double ridge) {
  const int n = dict.count();
  if (n < 2) throw Error("sample covariance requires at least 2 samples");

  const Matrix& x = dict.data();
  const Vector mean = x.rowwise().mean();
  const Matrix centered = x.colwise() - mean;
  Matrix r = (centered * centered.transpose()) / static_cast<double>(n - 1);
  if (ridge < 0.0) {
    ridge = 1e-6 * r.trace() / static_cast<double>(dict.dim());
  }
  r.diagonal().array() += ridge;

  CovarianceModel model;
  model.R = std::move(r);
  model.factorization.compute(model.R);
  if (model.factorization.info() != Eigen::Success) {
    // Report the smallest pivot so the failure is diagnosable.
    const Vector diag = model.factorization.matrixLLT().diagonal();
    std::ostringstream msg;
    msg << "covariance factorization failed (smallest pivot "
        << diag.minCoeff() << "); increase the ridge";
    throw Error(msg.str());
  }
  return model;
}

CovarianceModel identity_covariance(int dim) {
  if (dim < 1) throw Error("covariance dimension must be >= 1");
  CovarianceModel model;
  model.R = Matrix::Identity(dim, dim);
  model.factorization.compute(model.R);
  model.is_identity = true;
  return model;
}

}  // namespace crc
