#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "crc/patching.hpp"
#include "crc/types.hpp"

namespace crc {

// ---------------------------------------------------------------------------
// Binary feature-matrix files ("FMX1"): magic, u32 LE rows d, u32 LE cols N,
// then d·N f64 LE values column-major. Round-trips bit-exactly.

Matrix read_fmx(const std::string& path);
void write_fmx(const std::string& path, const Matrix& m);

// ---------------------------------------------------------------------------
// Binary PGM (P5) images, maxval ≤ 65535, scaled to [0, 1] on read.

Image read_pgm(const std::string& path);
/// Quantizes to maxval levels; values are clamped to [0, 1] first.
void write_pgm(const std::string& path, const Image& img, int maxval = 255);

// ---------------------------------------------------------------------------
// Labels travel in a sibling CSV of "index,label" lines (0-based, one line
// per sample, indices must cover 0..N−1 exactly).

std::vector<int> read_labels_csv(const std::string& path, int expected_count);
void write_labels_csv(const std::string& path, const std::vector<int>& labels);

/// Hex-encoded SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);

// ---------------------------------------------------------------------------
// Synthetic fine-grained data: every class shares one pool of background
// textures; class identity lives only in a small signature patch stamped at a
// random grid-aligned position. Background patches therefore collide across
// classes, which is exactly the confounder the patch-voting methods target.

struct SyntheticSpec {
  int n_classes = 2;
  std::vector<int> samples_per_class;  // length n_classes; imbalance allowed
  int image_h = 32;
  int image_w = 32;
  int fg_h = 16;  // foreground signature size
  int fg_w = 16;
  double contrast = 0.3;     // signature amplitude (±contrast per cell)
  int background_pool = 4;   // textures shared across classes
  double noise_sigma = 0.02; // additive Gaussian pixel noise
  std::uint64_t seed = 0;

  int total_samples() const;
  void validate() const;  // throws Error
};

/// Deterministic generation: the seed fully determines every pixel. Images
/// come out class-major (all class-0 samples first); each image draws from
/// its own RNG stream, so sample i is identical regardless of how many other
/// samples are requested.
std::pair<std::vector<Image>, std::vector<int>> synth_generate(const SyntheticSpec& spec);

SyntheticSpec synthetic_spec_from_json(const std::string& json_text);
std::string synthetic_spec_to_json(const SyntheticSpec& spec);

// ---------------------------------------------------------------------------
// Dataset manifests: a JSON document naming the dataset, its classes, where
// the payload lives, optional patch-grid parameters, and a SHA-256 checksum
// per referenced file. Loads fail closed on any checksum mismatch.

struct PatchParams {
  int h = 0;
  int w = 0;
  int stride = 0;
};

struct DatasetManifest {
  std::string name;
  std::vector<std::string> class_names;
  std::string source;  // "feature-file" | "image-directory" | "synthetic-spec"
  std::string features_path;         // feature-file
  std::vector<std::string> images;   // image-directory, one PGM per sample
  std::string labels_path;           // feature-file / image-directory
  std::optional<SyntheticSpec> synthetic;  // synthetic-spec
  std::optional<PatchParams> patch;
  std::map<std::string, std::string> sha256;  // relative path → hex digest

  int num_classes() const { return static_cast<int>(class_names.size()); }
};

DatasetManifest read_manifest(const std::string& path);
void write_manifest(const std::string& path, const DatasetManifest& manifest);

/// A manifest's payload in memory. Feature-file datasets populate features
/// (d×N); image datasets populate images. Labels are per sample.
struct LoadedDataset {
  std::string name;
  int num_classes = 0;
  Matrix features;
  std::vector<Image> images;
  std::vector<int> labels;
  std::optional<PatchParams> patch;

  bool has_images() const { return !images.empty(); }
  int sample_count() const;
};

/// Reads the manifest, verifies every checksum, then loads or generates the
/// payload. Relative paths resolve against the manifest's directory.
LoadedDataset load_dataset(const std::string& manifest_path);

/// Writes one synthetic dataset to disk: PGM per image, labels CSV, and a
/// checksummed image-directory manifest. Returns the manifest path.
std::string write_synthetic_dataset(const SyntheticSpec& spec,
                                    const std::optional<PatchParams>& patch,
                                    const std::string& out_dir,
                                    const std::string& name);

// ---------------------------------------------------------------------------
// Stratified k-fold splitting.

struct FoldPlan {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<int>> test_indices;   // per fold, ascending
  std::vector<std::vector<int>> train_indices;  // complement, ascending
};

/// Shuffles each class independently (seeded) and deals samples round-robin,
/// so per-fold class counts differ by at most one. Throws when any class has
/// fewer than k samples.
FoldPlan kfold_split(const std::vector<int>& labels, int k, std::uint64_t seed);

}  // namespace crc
