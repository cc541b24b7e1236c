#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "crc/dictionary.hpp"
#include "crc/types.hpp"

namespace crc {

/// Grayscale image: row r, column c addressed as img(r, c), intensities as
/// real values (file readers produce [0, 1]).
using Image = Matrix;

/// Overlapping patch grid anchored at (0,0). Locations are counted with floor
/// division, so border pixels that do not fit a full patch are dropped.
/// Location index j runs row-major over the grid.
struct PatchGrid {
  int image_h = 0;
  int image_w = 0;
  int patch_h = 0;
  int patch_w = 0;
  int stride = 0;

  int rows() const { return (image_h - patch_h) / stride + 1; }
  int cols() const { return (image_w - patch_w) / stride + 1; }
  int count() const { return rows() * cols(); }  // q

  /// Grid coordinates of location j.
  std::pair<int, int> location(int j) const;
  /// Top-left pixel of location j: (row·stride, col·stride).
  std::pair<int, int> pixel_origin(int j) const;

  void validate() const;  // throws Error on impossible geometry
};

PatchGrid make_grid(int image_h, int image_w, int patch_h, int patch_w, int stride);

/// Counts for a grid: (rows, cols, q). Validates the geometry.
struct PatchCount {
  int rows;
  int cols;
  int q;
};
PatchCount patch_count(const PatchGrid& grid);

/// Orthonormal basis fitted to training patch columns; projects raw flattened
/// patches to rank-r coordinates. Sign of each basis vector is fixed so the
/// largest-magnitude component is positive, making the fit deterministic.
struct PcaBasis {
  Vector mean;   // length = raw patch dimension
  Matrix basis;  // raw-dim × rank, orthonormal columns

  int rank() const { return static_cast<int>(basis.cols()); }
  Matrix project(const Matrix& raw_columns) const;
};

/// Fits a rank-r basis to the given raw patch columns (mean-centered SVD).
/// rank must be in [1, min(dim, columns)].
PcaBasis fit_patch_pca(const Matrix& raw_columns, int rank);

/// The q patches of one test image as columns of Y (d_p × q), column j being
/// the flattened (row-major) patch at location j, projected and normalized the
/// same way as the training patches.
struct TestPatchSet {
  Matrix patches;  // d_p × q
  PatchGrid grid;

  int patch_dim() const { return static_cast<int>(patches.rows()); }
  int count() const { return static_cast<int>(patches.cols()); }
};

TestPatchSet extract_patches(const Image& image, const PatchGrid& grid,
                             NormMode mode = NormMode::UnitL2,
                             const PcaBasis* pca = nullptr);

/// Per-location training dictionaries M_j plus the augmented all-location
/// matrix M (d_p × N·q), stored location-major: column j·N + s is the
/// location-j patch of (class-sorted) training sample s. Every location block
/// therefore shares the parent class partition. Immutable after build.
class LocalDictionary {
 public:
  LocalDictionary(Matrix augmented, PatchGrid grid, std::vector<int> labels,
                  ClassPartition partition, NormMode mode,
                  std::optional<PcaBasis> pca);

  const Matrix& augmented() const { return augmented_; }
  const PatchGrid& grid() const { return grid_; }
  int patch_dim() const { return static_cast<int>(augmented_.rows()); }
  int sample_count() const { return partition_.total(); }
  int location_count() const { return grid_.count(); }
  int num_classes() const { return partition_.num_classes(); }

  /// Per-sample class labels in stored (class-sorted) order.
  const std::vector<int>& labels() const { return labels_; }
  const ClassPartition& partition() const { return partition_; }
  NormMode norm_mode() const { return norm_mode_; }
  const std::optional<PcaBasis>& pca() const { return pca_; }

  /// M_j as a view: the N columns for location j.
  auto location_block(int j) const {
    check_location(j);
    return augmented_.middleCols(static_cast<Eigen::Index>(j) * sample_count(),
                                 sample_count());
  }
  Matrix location_matrix(int j) const;  // dense copy of M_j

  /// Provenance of augmented column t.
  int column_sample(int t) const { return t % sample_count(); }
  int column_location(int t) const { return t / sample_count(); }
  int column_class(int t) const { return labels_[column_sample(t)]; }
  /// Class label per augmented column, materialized once at construction.
  const std::vector<int>& column_labels() const { return column_labels_; }

 private:
  void check_location(int j) const;

  Matrix augmented_;
  PatchGrid grid_;
  std::vector<int> labels_;
  std::vector<int> column_labels_;
  ClassPartition partition_;
  NormMode norm_mode_;
  std::optional<PcaBasis> pca_;
};

/// Extracts every grid patch from every training image, optionally fits a
/// rank-r basis on those training patches (pca_rank > 0), and assembles the
/// augmented dictionary. Images are reordered class-sorted like
/// build_dictionary; labels are per input image.
LocalDictionary build_local_dictionaries(const std::vector<Image>& images,
                                         const std::vector<int>& labels,
                                         const PatchGrid& grid,
                                         NormMode mode = NormMode::UnitL2,
                                         int pca_rank = 0);

/// Flattens image patches into raw columns (no projection, no normalization),
/// one column per location, row-major pixel order. Shared by training and
/// test paths so both sides see identical featurization.
Matrix raw_patch_columns(const Image& image, const PatchGrid& grid);

}  // namespace crc
