#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "crc/datasets.hpp"
#include "crc/dictionary.hpp"
#include "crc/patching.hpp"
#include "crc/rng.hpp"
#include "crc/types.hpp"

namespace testsup {

/// Self-deleting scratch directory for file-format and CLI tests.
struct TempDir {
  std::filesystem::path path;

  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

std::string slurp(const std::string& path);
void spit(const std::string& path, const std::string& text);

// --- deterministic random instances ---------------------------------------

crc::Matrix random_matrix(crc::Rng& rng, int rows, int cols);
crc::Vector random_vector(crc::Rng& rng, int n);
std::vector<int> cyclic_labels(int n, int c);

/// Gaussian features, labels cycling over c classes, built with the given
/// normalization.
crc::FeatureDictionary random_dictionary(
    crc::Rng& rng, int d, int n, int c,
    crc::NormMode mode = crc::NormMode::UnitL2);

/// Strictly positive random image (no zero patches under unit-l2).
crc::Image random_image(crc::Rng& rng, int h, int w);

/// A complete patch-classification fixture: training images and labels, the
/// grid, the built local dictionary, and one extracted query patch set.
struct PatchWorld {
  std::vector<crc::Image> images;
  std::vector<int> labels;
  crc::PatchGrid grid;
  crc::LocalDictionary local;
  crc::Image query_image;
  crc::TestPatchSet query;
};

PatchWorld random_patch_world(crc::Rng& rng, int image_h, int image_w,
                              int patch, int stride, int n_per_class, int c,
                              int pca_rank = 0);

/// In-memory synthetic dataset ready for the harness.
crc::LoadedDataset synthetic_dataset(const crc::SyntheticSpec& spec,
                                     const crc::PatchParams& patch,
                                     const std::string& name = "synthetic");

// --- CLI driving -----------------------------------------------------------

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr merged
};

/// Runs the benchmark binary named by the CRCBENCH_BIN environment variable.
CliResult run_cli(const std::string& args);
std::string crcbench_path();

}  // namespace testsup
