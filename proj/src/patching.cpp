#include "crc/patching.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <utility>

#include <Eigen/SVD>

namespace crc {

std::pair<int, int> PatchGrid::location(int j) const {
  return {j / cols(), j % cols()};
}

std::pair<int, int> PatchGrid::pixel_origin(int j) const {
  auto [row, col] = location(j);
  return {row * stride, col * stride};
}

void PatchGrid::validate() const {
  if (image_h < 1 || image_w < 1) throw Error("image dimensions must be >= 1");
  if (patch_h < 1 || patch_w < 1) throw Error("patch dimensions must be >= 1");
  if (stride < 1) throw Error("stride must be >= 1");
  if (patch_h > image_h || patch_w > image_w) {
    std::ostringstream msg;
    msg << "patch " << patch_h << "x" << patch_w << " does not fit image "
        << image_h << "x" << image_w;
    throw Error(msg.str());
  }
}

PatchGrid make_grid(int image_h, int image_w, int patch_h, int patch_w,
                    int stride) {
  PatchGrid grid{image_h, image_w, patch_h, patch_w, stride};
  grid.validate();
  return grid;
}

PatchCount patch_count(const PatchGrid& grid) {
  grid.validate();
  return PatchCount{grid.rows(), grid.cols(), grid.count()};
}

Matrix raw_patch_columns(const Image& image, const PatchGrid& grid) {
  grid.validate();
  if (image.rows() != grid.image_h || image.cols() != grid.image_w) {
    std::ostringstream msg;
    msg << "image " << image.rows() << "x" << image.cols()
        << " does not match grid " << grid.image_h << "x" << grid.image_w;
    throw Error(msg.str());
  }
  const int q = grid.count();
  const int dim = grid.patch_h * grid.patch_w;
  Matrix cols(dim, q);
  for (int j = 0; j < q; ++j) {
    auto [r0, c0] = grid.pixel_origin(j);
    // Flatten row-major: pixel (u, v) of the patch lands at u·patch_w + v.
    for (int u = 0; u < grid.patch_h; ++u) {
      for (int v = 0; v < grid.patch_w; ++v) {
        cols(u * grid.patch_w + v, j) = image(r0 + u, c0 + v);
      }
    }
  }
  return cols;
}

Matrix PcaBasis::project(const Matrix& raw_columns) const {
  if (raw_columns.rows() != mean.size()) {
    throw Error("patch dimension does not match the fitted projection basis");
  }
  return basis.transpose() * (raw_columns.colwise() - mean);
}

PcaBasis fit_patch_pca(const Matrix& raw_columns, int rank) {
  const Eigen::Index dim = raw_columns.rows();
  const Eigen::Index n = raw_columns.cols();
  if (rank < 1 || rank > std::min(dim, n)) {
    std::ostringstream msg;
    msg << "projection rank " << rank << " must be in [1, " << std::min(dim, n)
        << "]";
    throw Error(msg.str());
  }

  PcaBasis out;
  out.mean = raw_columns.rowwise().mean();
  const Matrix centered = raw_columns.colwise() - out.mean;
  Eigen::JacobiSVD<Matrix> svd(centered, Eigen::ComputeThinU);
  out.basis = svd.matrixU().leftCols(rank);

  // Fix each direction's sign so the fit is unique: the entry of largest
  // magnitude (first such row on ties) is made positive.
  for (int c = 0; c < rank; ++c) {
    Eigen::Index best = 0;
    out.basis.col(c).cwiseAbs().maxCoeff(&best);
    if (out.basis(best, c) < 0.0) out.basis.col(c) = -out.basis.col(c);
  }
  return out;
}

TestPatchSet extract_patches(const Image& image, const PatchGrid& grid,
                             NormMode mode, const PcaBasis* pca) {
  Matrix cols = raw_patch_columns(image, grid);
  if (pca != nullptr) cols = pca->project(cols);
  return TestPatchSet{normalize_columns(std::move(cols), mode), grid};
}

LocalDictionary::LocalDictionary(Matrix augmented, PatchGrid grid,
                                 std::vector<int> labels,
                                 ClassPartition partition, NormMode mode,
                                 std::optional<PcaBasis> pca)
    : augmented_(std::move(augmented)),
      grid_(grid),
      labels_(std::move(labels)),
      partition_(std::move(partition)),
      norm_mode_(mode),
      pca_(std::move(pca)) {
  const int n = partition_.total();
  const int q = grid_.count();
  if (augmented_.cols() != static_cast<Eigen::Index>(n) * q) {
    throw Error("augmented dictionary width does not match samples x locations");
  }
  column_labels_.resize(static_cast<std::size_t>(augmented_.cols()));
  for (Eigen::Index t = 0; t < augmented_.cols(); ++t) {
    column_labels_[static_cast<std::size_t>(t)] =
        labels_[static_cast<std::size_t>(t % n)];
  }
}

void LocalDictionary::check_location(int j) const {
  if (j < 0 || j >= location_count()) {
    std::ostringstream msg;
    msg << "location " << j << " out of range [0, " << location_count() << ")";
    throw Error(msg.str());
  }
}

Matrix LocalDictionary::location_matrix(int j) const {
  return location_block(j);
}

LocalDictionary build_local_dictionaries(const std::vector<Image>& images,
                                         const std::vector<int>& labels,
                                         const PatchGrid& grid, NormMode mode,
                                         int pca_rank) {
  grid.validate();
  if (images.empty()) throw Error("at least one training image is required");
  if (images.size() != labels.size()) {
    throw Error("image count does not match label count");
  }
  for (const Image& img : images) {
    if (img.rows() != grid.image_h || img.cols() != grid.image_w) {
      std::ostringstream msg;
      msg << "training image " << img.rows() << "x" << img.cols()
          << " does not match grid " << grid.image_h << "x" << grid.image_w;
      throw Error(msg.str());
    }
  }

  // Same stable class sort as the whole-image dictionary, so per-sample
  // indices line up between the two representations.
  std::vector<int> order(images.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return labels[a] < labels[b]; });
  std::vector<int> sorted_labels(labels.size());
  for (std::size_t t = 0; t < order.size(); ++t) {
    sorted_labels[t] = labels[static_cast<std::size_t>(order[t])];
  }
  ClassPartition partition = make_partition(sorted_labels);

  const int n = static_cast<int>(images.size());
  const int q = grid.count();
  const int raw_dim = grid.patch_h * grid.patch_w;

  // Raw patches first: location-major layout, column j·N + s holds patch j of
  // sorted sample s.
  Matrix raw(raw_dim, static_cast<Eigen::Index>(n) * q);
  for (int s = 0; s < n; ++s) {
    const Matrix cols = raw_patch_columns(images[static_cast<std::size_t>(order[s])], grid);
    for (int j = 0; j < q; ++j) {
      raw.col(static_cast<Eigen::Index>(j) * n + s) = cols.col(j);
    }
  }

  std::optional<PcaBasis> pca;
  Matrix features;
  if (pca_rank > 0) {
    pca = fit_patch_pca(raw, pca_rank);
    features = pca->project(raw);
  } else {
    features = std::move(raw);
  }

  return LocalDictionary(normalize_columns(std::move(features), mode), grid,
                         std::move(sorted_labels), std::move(partition), mode,
                         std::move(pca));
}

}  // namespace crc
