#include "support.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace testsup {

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path = std::filesystem::temp_directory_path() /
         ("crctest-" + std::to_string(::getpid()) + "-" +
          std::to_string(counter.fetch_add(1)));
  std::filesystem::create_directories(path);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path, ec);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot create " + path);
  out << text;
}

crc::Matrix random_matrix(crc::Rng& rng, int rows, int cols) {
  return rng.gaussian_matrix(rows, cols);
}

crc::Vector random_vector(crc::Rng& rng, int n) {
  return rng.gaussian_vector(n);
}

std::vector<int> cyclic_labels(int n, int c) {
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i % c;
  return labels;
}

crc::FeatureDictionary random_dictionary(crc::Rng& rng, int d, int n, int c,
                                         crc::NormMode mode) {
  return crc::build_dictionary(random_matrix(rng, d, n), cyclic_labels(n, c),
                               mode);
}

crc::Image random_image(crc::Rng& rng, int h, int w) {
  crc::Image img(h, w);
  for (int r = 0; r < h; ++r) {
    for (int col = 0; col < w; ++col) img(r, col) = rng.uniform(0.05, 1.0);
  }
  return img;
}

PatchWorld random_patch_world(crc::Rng& rng, int image_h, int image_w,
                              int patch, int stride, int n_per_class, int c,
                              int pca_rank) {
  const int total = n_per_class * c;
  std::vector<crc::Image> images;
  images.reserve(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) {
    images.push_back(random_image(rng, image_h, image_w));
  }
  std::vector<int> labels = cyclic_labels(total, c);
  crc::PatchGrid grid = crc::make_grid(image_h, image_w, patch, patch, stride);
  crc::LocalDictionary local = crc::build_local_dictionaries(
      images, labels, grid, crc::NormMode::UnitL2, pca_rank);
  crc::Image query_image = random_image(rng, image_h, image_w);
  const crc::PcaBasis* pca = local.pca() ? &*local.pca() : nullptr;
  crc::TestPatchSet query =
      crc::extract_patches(query_image, grid, crc::NormMode::UnitL2, pca);
  return PatchWorld{std::move(images), std::move(labels), grid,
                    std::move(local), std::move(query_image),
                    std::move(query)};
}

crc::LoadedDataset synthetic_dataset(const crc::SyntheticSpec& spec,
                                     const crc::PatchParams& patch,
                                     const std::string& name) {
  crc::LoadedDataset data;
  data.name = name;
  data.num_classes = spec.n_classes;
  auto [images, labels] = crc::synth_generate(spec);
  data.images = std::move(images);
  data.labels = std::move(labels);
  data.patch = patch;
  return data;
}

std::string crcbench_path() {
  const char* p = std::getenv("CRCBENCH_BIN");
  if (p == nullptr || *p == '\0') {
    throw std::runtime_error("CRCBENCH_BIN environment variable is not set");
  }
  return p;
}

CliResult run_cli(const std::string& args) {
  TempDir capture;
  const std::string out_file = capture.file("cli-output.txt");
  const std::string cmd =
      crcbench_path() + " " + args + " >" + out_file + " 2>&1";
  const int status = std::system(cmd.c_str());
  CliResult result;
  if (status == -1) {
    result.exit_code = -1;
  } else if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  } else {
    result.exit_code = -2;
  }
  result.output = slurp(out_file);
  return result;
}

}  // namespace testsup
