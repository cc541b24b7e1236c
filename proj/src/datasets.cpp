#include "crc/datasets.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <utility>

#include <openssl/evp.h>

#include <json.hpp>

#include "crc/rng.hpp"

namespace crc {

namespace fs = std::filesystem;
using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

// --- little-endian primitives (independent of host byte order) -------------

void put_u32le(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32le(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64le(std::ostream& out, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) {
    b[i] = static_cast<unsigned char>(bits >> (8 * i));
  }
  out.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64le(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot create " + path);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// FMX1

Matrix read_fmx(const std::string& path) {
  std::ifstream in = open_input(path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "FMX1") {
    throw Error(path + ": bad magic (expected FMX1)");
  }
  const std::uint32_t d = get_u32le(in);
  const std::uint32_t n = get_u32le(in);
  if (!in) throw Error(path + ": truncated header");
  if (d == 0 || n == 0) throw Error(path + ": zero dimension rejected");
  const std::uint64_t elems = static_cast<std::uint64_t>(d) * n;
  if (elems > (1ull << 28)) {
    throw Error(path + ": dimension overflow (matrix too large)");
  }

  Matrix m(d, n);
  for (std::uint32_t c = 0; c < n; ++c) {
    for (std::uint32_t r = 0; r < d; ++r) {
      m(r, c) = get_f64le(in);
    }
    if (!in) throw Error(path + ": truncated payload");
  }
  // Exactly d·N values: trailing bytes mean the file is not what it claims.
  in.peek();
  if (!in.eof()) throw Error(path + ": trailing bytes after payload");
  return m;
}

void write_fmx(const std::string& path, const Matrix& m) {
  if (m.rows() < 1 || m.cols() < 1) {
    throw Error("refusing to write an empty matrix to " + path);
  }
  if (m.rows() > static_cast<Eigen::Index>(UINT32_MAX) ||
      m.cols() > static_cast<Eigen::Index>(UINT32_MAX)) {
    throw Error("matrix too large for the feature-file format");
  }
  std::ofstream out = open_output(path);
  out.write("FMX1", 4);
  put_u32le(out, static_cast<std::uint32_t>(m.rows()));
  put_u32le(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      put_f64le(out, m(r, c));
    }
  }
  if (!out) throw Error("write failed for " + path);
}

// ---------------------------------------------------------------------------
// PGM (P5)

namespace {

/// Reads the next header token, skipping whitespace and '#' comment lines.
std::string pgm_token(std::istream& in, const std::string& path) {
  int ch = in.get();
  while (ch != EOF) {
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = in.get();
      ch = in.get();
    } else if (std::isspace(ch)) {
      ch = in.get();
    } else {
      break;
    }
  }
  if (ch == EOF) throw Error(path + ": truncated header");
  std::string token;
  while (ch != EOF && !std::isspace(ch)) {
    token.push_back(static_cast<char>(ch));
    ch = in.get();
  }
  // The single whitespace after the last header token was just consumed.
  return token;
}

int pgm_int(std::istream& in, const std::string& path, const char* what) {
  const std::string token = pgm_token(in, path);
  try {
    std::size_t pos = 0;
    const int v = std::stoi(token, &pos);
    if (pos != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw Error(path + ": malformed " + what + " '" + token + "'");
  }
}

}  // namespace

Image read_pgm(const std::string& path) {
  std::ifstream in = open_input(path);
  if (pgm_token(in, path) != "P5") {
    throw Error(path + ": not a binary PGM (P5) file");
  }
  const int w = pgm_int(in, path, "width");
  const int h = pgm_int(in, path, "height");
  const int maxval = pgm_int(in, path, "maxval");
  if (w < 1 || h < 1) throw Error(path + ": non-positive image size");
  if (maxval < 1 || maxval > 65535) {
    throw Error(path + ": maxval out of range [1, 65535]");
  }

  const bool wide = maxval > 255;
  const std::size_t pixel_bytes = wide ? 2 : 1;
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * pixel_bytes);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw Error(path + ": pixel data shorter than header promises");
  }

  Image img(h, w);
  const double scale = 1.0 / maxval;
  std::size_t at = 0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      int v;
      if (wide) {
        v = (static_cast<int>(raw[at]) << 8) | raw[at + 1];  // MSB first
        at += 2;
      } else {
        v = raw[at++];
      }
      if (v > maxval) throw Error(path + ": pixel value exceeds maxval");
      img(r, c) = v * scale;
    }
  }
  return img;
}

void write_pgm(const std::string& path, const Image& img, int maxval) {
  if (img.rows() < 1 || img.cols() < 1) {
    throw Error("refusing to write an empty image to " + path);
  }
  if (maxval < 1 || maxval > 65535) {
    throw Error("maxval out of range [1, 65535]");
  }
  std::ofstream out = open_output(path);
  out << "P5\n" << img.cols() << " " << img.rows() << "\n" << maxval << "\n";
  const bool wide = maxval > 255;
  for (Eigen::Index r = 0; r < img.rows(); ++r) {
    for (Eigen::Index c = 0; c < img.cols(); ++c) {
      const double clamped = std::clamp(img(r, c), 0.0, 1.0);
      const int v = static_cast<int>(std::lround(clamped * maxval));
      if (wide) {
        const unsigned char b[2] = {static_cast<unsigned char>(v >> 8),
                                    static_cast<unsigned char>(v & 0xff)};
        out.write(reinterpret_cast<const char*>(b), 2);
      } else {
        const unsigned char b = static_cast<unsigned char>(v);
        out.write(reinterpret_cast<const char*>(&b), 1);
      }
    }
  }
  if (!out) throw Error("write failed for " + path);
}

// ---------------------------------------------------------------------------
// Labels CSV

std::vector<int> read_labels_csv(const std::string& path, int expected_count) {
  std::ifstream in = open_input(path);
  std::vector<int> labels(static_cast<std::size_t>(expected_count), -1);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos) {
      std::ostringstream msg;
      msg << path << ":" << line_no << ": expected 'index,label'";
      throw Error(msg.str());
    }
    int index;
    int label;
    try {
      index = std::stoi(line.substr(0, comma));
      label = std::stoi(line.substr(comma + 1));
    } catch (const std::exception&) {
      std::ostringstream msg;
      msg << path << ":" << line_no << ": malformed integers";
      throw Error(msg.str());
    }
    if (index < 0 || index >= expected_count) {
      std::ostringstream msg;
      msg << path << ":" << line_no << ": index " << index
          << " outside [0, " << expected_count << ")";
      throw Error(msg.str());
    }
    if (label < 0) {
      std::ostringstream msg;
      msg << path << ":" << line_no << ": negative label";
      throw Error(msg.str());
    }
    if (labels[static_cast<std::size_t>(index)] != -1) {
      std::ostringstream msg;
      msg << path << ":" << line_no << ": duplicate index " << index;
      throw Error(msg.str());
    }
    labels[static_cast<std::size_t>(index)] = label;
  }
  for (int i = 0; i < expected_count; ++i) {
    if (labels[static_cast<std::size_t>(i)] == -1) {
      std::ostringstream msg;
      msg << path << ": no label for index " << i;
      throw Error(msg.str());
    }
  }
  return labels;
}

void write_labels_csv(const std::string& path, const std::vector<int>& labels) {
  std::ofstream out = open_output(path);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out << i << "," << labels[i] << "\n";
  }
  if (!out) throw Error("write failed for " + path);
}

// ---------------------------------------------------------------------------
// SHA-256

std::string sha256_file(const std::string& path) {
  std::ifstream in = open_input(path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("cannot initialize SHA-256");
  }
  char buf[65536];
  while (in) {
    in.read(buf, sizeof(buf));
    const std::streamsize got = in.gcount();
    if (got > 0 &&
        EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(got)) != 1) {
      EVP_MD_CTX_free(ctx);
      throw Error("SHA-256 update failed");
    }
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("SHA-256 finalization failed");
  }
  EVP_MD_CTX_free(ctx);

  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generation

int SyntheticSpec::total_samples() const {
  int total = 0;
  for (int n : samples_per_class) total += n;
  return total;
}

void SyntheticSpec::validate() const {
  if (n_classes < 1) throw Error("synthetic spec: need at least one class");
  if (static_cast<int>(samples_per_class.size()) != n_classes) {
    throw Error("synthetic spec: samples_per_class length must equal classes");
  }
  for (int n : samples_per_class) {
    if (n < 1) throw Error("synthetic spec: every class needs >= 1 sample");
  }
  if (image_h < 1 || image_w < 1) {
    throw Error("synthetic spec: image dimensions must be >= 1");
  }
  if (fg_h < 1 || fg_w < 1) {
    throw Error("synthetic spec: foreground dimensions must be >= 1");
  }
  if (fg_h > image_h || fg_w > image_w) {
    throw Error("synthetic spec: foreground larger than image");
  }
  if (background_pool < 1) {
    throw Error("synthetic spec: background pool must be >= 1");
  }
  if (!(contrast >= 0.0) || !std::isfinite(contrast)) {
    throw Error("synthetic spec: contrast must be finite and >= 0");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw Error("synthetic spec: noise sigma must be finite and >= 0");
  }
  if (total_samples() > 1000000) {
    throw Error("synthetic spec: more than 1e6 samples requested");
  }
}

namespace {

// Stream tags keep the independent RNG streams of one seed from colliding:
// image i uses stream i, backgrounds and class signatures live far above any
// realistic sample count.
constexpr std::uint64_t kBackgroundStream = 1u << 24;
constexpr std::uint64_t kSignatureStream = 1u << 25;

/// Separable box blur applied in place; the building block for every
/// low-frequency field the generator draws.
void box_smooth(Image& img, int radius, int passes) {
  const int h = static_cast<int>(img.rows());
  const int w = static_cast<int>(img.cols());
  for (int pass = 0; pass < passes; ++pass) {
    Image tmp(h, w);
    for (int r = 0; r < h; ++r) {  // horizontal
      for (int c = 0; c < w; ++c) {
        double sum = 0.0;
        int cnt = 0;
        for (int k = -radius; k <= radius; ++k) {
          const int cc = c + k;
          if (cc >= 0 && cc < w) {
            sum += img(r, cc);
            ++cnt;
          }
        }
        tmp(r, c) = sum / cnt;
      }
    }
    for (int c = 0; c < w; ++c) {  // vertical
      for (int r = 0; r < h; ++r) {
        double sum = 0.0;
        int cnt = 0;
        for (int k = -radius; k <= radius; ++k) {
          const int rr = r + k;
          if (rr >= 0 && rr < h) {
            sum += tmp(rr, c);
            ++cnt;
          }
        }
        img(r, c) = sum / cnt;
      }
    }
  }
}

/// Low-frequency texture: uniform noise smoothed by repeated box blurs, then
/// rescaled into [0.25, 0.75] so foreground stamps never saturate.
Image make_texture(int h, int w, Rng& rng) {
  Image img(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) img(r, c) = rng.uniform();
  }
  box_smooth(img, std::max(1, std::min(h, w) / 8), 2);

  const double lo = img.minCoeff();
  const double hi = img.maxCoeff();
  if (hi - lo < 1e-12) {
    img.setConstant(0.5);
  } else {
    img = ((img.array() - lo) / (hi - lo) * 0.5 + 0.25).matrix();
  }
  return img;
}

/// Class signature: the sign field of smoothed noise — ±1 blobs, scaled by
/// contrast at stamp time so the pattern (and every RNG stream) is
/// contrast-independent. Blobs make nearby shifts of the signature overlap
/// heavily, so local patches degrade gracefully when a test image's stamp
/// position was never seen in training.
Image make_signature(int fg_h, int fg_w, Rng& rng) {
  Image sig(fg_h, fg_w);
  for (int r = 0; r < fg_h; ++r) {
    for (int c = 0; c < fg_w; ++c) sig(r, c) = rng.uniform();
  }
  box_smooth(sig, std::max(1, std::min(fg_h, fg_w) / 4), 2);

  const double mid = 0.5 * (sig.minCoeff() + sig.maxCoeff());
  for (int r = 0; r < fg_h; ++r) {
    for (int c = 0; c < fg_w; ++c) {
      sig(r, c) = sig(r, c) >= mid ? 1.0 : -1.0;
    }
  }
  return sig;
}

}  // namespace

std::pair<std::vector<Image>, std::vector<int>> synth_generate(
    const SyntheticSpec& spec) {
  spec.validate();

  std::vector<Image> textures;
  textures.reserve(static_cast<std::size_t>(spec.background_pool));
  for (int b = 0; b < spec.background_pool; ++b) {
    Rng rng(mix_seed(spec.seed, kBackgroundStream + static_cast<std::uint64_t>(b)));
    textures.push_back(make_texture(spec.image_h, spec.image_w, rng));
  }

  std::vector<Image> signatures;
  signatures.reserve(static_cast<std::size_t>(spec.n_classes));
  for (int k = 0; k < spec.n_classes; ++k) {
    Rng rng(mix_seed(spec.seed, kSignatureStream + static_cast<std::uint64_t>(k)));
    signatures.push_back(make_signature(spec.fg_h, spec.fg_w, rng));
  }

  // Stamp positions align to quarter-signature steps: coarse enough to be a
  // grid, fine enough that the (background, position) combinations outnumber
  // the per-class samples, which is what makes the backgrounds confounding.
  const int step_r = std::max(1, spec.fg_h / 4);
  const int step_c = std::max(1, spec.fg_w / 4);
  const int pos_r = (spec.image_h - spec.fg_h) / step_r + 1;
  const int pos_c = (spec.image_w - spec.fg_w) / step_c + 1;

  std::vector<Image> images;
  std::vector<int> labels;
  images.reserve(static_cast<std::size_t>(spec.total_samples()));
  labels.reserve(images.capacity());

  std::uint64_t index = 0;
  for (int k = 0; k < spec.n_classes; ++k) {
    for (int s = 0; s < spec.samples_per_class[static_cast<std::size_t>(k)];
         ++s, ++index) {
      // One independent stream per image, drawn in a fixed order (background,
      // position, noise) so changing contrast or sigma never shifts the rest.
      Rng rng(mix_seed(spec.seed, index));
      const int b = rng.uniform_int(spec.background_pool);
      const int pr = rng.uniform_int(pos_r);
      const int pc = rng.uniform_int(pos_c);
      const Matrix noise = rng.gaussian_matrix(spec.image_h, spec.image_w);

      Image img = textures[static_cast<std::size_t>(b)];
      img.block(pr * step_r, pc * step_c, spec.fg_h, spec.fg_w) +=
          spec.contrast * signatures[static_cast<std::size_t>(k)];
      img += spec.noise_sigma * noise;
      img = img.array().min(1.0).max(0.0).matrix();

      images.push_back(std::move(img));
      labels.push_back(k);
    }
  }
  return {std::move(images), std::move(labels)};
}

SyntheticSpec synthetic_spec_from_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(std::string("synthetic spec: invalid JSON: ") + e.what());
  }
  SyntheticSpec spec;
  try {
    spec.n_classes = doc.at("classes").get<int>();
    const auto& spc = doc.at("samples_per_class");
    if (spc.is_number()) {
      spec.samples_per_class.assign(
          static_cast<std::size_t>(std::max(spec.n_classes, 0)),
          spc.get<int>());
    } else {
      spec.samples_per_class = spc.get<std::vector<int>>();
    }
    spec.image_h = doc.at("image").at("h").get<int>();
    spec.image_w = doc.at("image").at("w").get<int>();
    spec.fg_h = doc.at("foreground").at("h").get<int>();
    spec.fg_w = doc.at("foreground").at("w").get<int>();
    spec.contrast = doc.at("foreground").at("contrast").get<double>();
    spec.background_pool = doc.at("background_pool").get<int>();
    spec.noise_sigma = doc.value("noise_sigma", 0.0);
    spec.seed = doc.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw Error(std::string("synthetic spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

std::string synthetic_spec_to_json(const SyntheticSpec& spec) {
  ordered_json doc;
  doc["classes"] = spec.n_classes;
  doc["samples_per_class"] = spec.samples_per_class;
  doc["image"] = {{"h", spec.image_h}, {"w", spec.image_w}};
  doc["foreground"] = {{"h", spec.fg_h}, {"w", spec.fg_w},
                       {"contrast", spec.contrast}};
  doc["background_pool"] = spec.background_pool;
  doc["noise_sigma"] = spec.noise_sigma;
  doc["seed"] = spec.seed;
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Manifests

namespace {

PatchParams patch_from_json(const json& j) {
  PatchParams p;
  p.h = j.at("h").get<int>();
  p.w = j.at("w").get<int>();
  p.stride = j.at("stride").get<int>();
  if (p.h < 1 || p.w < 1 || p.stride < 1) {
    throw Error("manifest: patch parameters must be >= 1");
  }
  return p;
}

}  // namespace

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in = open_input(path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(path + ": invalid JSON: " + e.what());
  }

  DatasetManifest m;
  try {
    m.name = doc.at("name").get<std::string>();
    m.class_names = doc.at("classes").get<std::vector<std::string>>();
    m.source = doc.at("source").get<std::string>();
    if (m.source == "feature-file") {
      m.features_path = doc.at("features_path").get<std::string>();
      m.labels_path = doc.at("labels_path").get<std::string>();
    } else if (m.source == "image-directory") {
      m.images = doc.at("images").get<std::vector<std::string>>();
      m.labels_path = doc.at("labels_path").get<std::string>();
      if (m.images.empty()) throw Error(path + ": empty image list");
    } else if (m.source == "synthetic-spec") {
      m.synthetic = synthetic_spec_from_json(doc.at("synthetic").dump());
    } else {
      throw Error(path + ": unknown source '" + m.source + "'");
    }
    if (doc.contains("patch") && !doc.at("patch").is_null()) {
      m.patch = patch_from_json(doc.at("patch"));
    }
    if (doc.contains("sha256")) {
      m.sha256 = doc.at("sha256").get<std::map<std::string, std::string>>();
    }
  } catch (const json::exception& e) {
    throw Error(path + ": " + e.what());
  }
  if (m.class_names.empty()) throw Error(path + ": no classes listed");
  return m;
}

void write_manifest(const std::string& path, const DatasetManifest& m) {
  ordered_json doc;
  doc["name"] = m.name;
  doc["classes"] = m.class_names;
  doc["source"] = m.source;
  if (m.source == "feature-file") {
    doc["features_path"] = m.features_path;
    doc["labels_path"] = m.labels_path;
  } else if (m.source == "image-directory") {
    doc["images"] = m.images;
    doc["labels_path"] = m.labels_path;
  } else if (m.source == "synthetic-spec") {
    if (!m.synthetic) throw Error("manifest: synthetic source without a spec");
    doc["synthetic"] = json::parse(synthetic_spec_to_json(*m.synthetic));
  } else {
    throw Error("manifest: unknown source '" + m.source + "'");
  }
  if (m.patch) {
    doc["patch"] = {{"h", m.patch->h}, {"w", m.patch->w},
                    {"stride", m.patch->stride}};
  }
  doc["sha256"] = m.sha256;
  std::ofstream out = open_output(path);
  out << doc.dump(2) << "\n";
  if (!out) throw Error("write failed for " + path);
}

int LoadedDataset::sample_count() const {
  return has_images() ? static_cast<int>(images.size())
                      : static_cast<int>(features.cols());
}

namespace {

void verify_checksum(const DatasetManifest& m, const fs::path& base,
                     const std::string& rel) {
  const auto it = m.sha256.find(rel);
  if (it == m.sha256.end()) {
    throw Error("manifest lists no checksum for referenced file " + rel);
  }
  const std::string actual = sha256_file((base / rel).string());
  if (actual != it->second) {
    throw Error("checksum mismatch for " + rel + " (expected " + it->second +
                ", got " + actual + ")");
  }
}

}  // namespace

LoadedDataset load_dataset(const std::string& manifest_path) {
  const DatasetManifest m = read_manifest(manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();

  LoadedDataset data;
  data.name = m.name;
  data.num_classes = m.num_classes();
  data.patch = m.patch;

  if (m.source == "feature-file") {
    verify_checksum(m, base, m.features_path);
    verify_checksum(m, base, m.labels_path);
    data.features = read_fmx((base / m.features_path).string());
    data.labels = read_labels_csv((base / m.labels_path).string(),
                                  static_cast<int>(data.features.cols()));
  } else if (m.source == "image-directory") {
    for (const std::string& rel : m.images) verify_checksum(m, base, rel);
    verify_checksum(m, base, m.labels_path);
    data.images.reserve(m.images.size());
    for (const std::string& rel : m.images) {
      data.images.push_back(read_pgm((base / rel).string()));
    }
    data.labels = read_labels_csv((base / m.labels_path).string(),
                                  static_cast<int>(data.images.size()));
  } else {
    auto [images, labels] = synth_generate(*m.synthetic);
    data.images = std::move(images);
    data.labels = std::move(labels);
  }

  for (int label : data.labels) {
    if (label >= data.num_classes) {
      std::ostringstream msg;
      msg << "label " << label << " exceeds the " << data.num_classes
          << " classes the manifest names";
      throw Error(msg.str());
    }
  }
  return data;
}

std::string write_synthetic_dataset(const SyntheticSpec& spec,
                                    const std::optional<PatchParams>& patch,
                                    const std::string& out_dir,
                                    const std::string& name) {
  spec.validate();
  fs::create_directories(out_dir);
  const fs::path base(out_dir);

  auto [images, labels] = synth_generate(spec);

  DatasetManifest m;
  m.name = name;
  for (int k = 0; k < spec.n_classes; ++k) {
    m.class_names.push_back("class" + std::to_string(k));
  }
  m.source = "image-directory";
  m.labels_path = "labels.csv";
  m.patch = patch;

  for (std::size_t i = 0; i < images.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "img_%05zu.pgm", i);
    const std::string rel(buf);
    write_pgm((base / rel).string(), images[i]);
    m.images.push_back(rel);
  }
  write_labels_csv((base / m.labels_path).string(), labels);

  for (const std::string& rel : m.images) {
    m.sha256[rel] = sha256_file((base / rel).string());
  }
  m.sha256[m.labels_path] = sha256_file((base / m.labels_path).string());

  const std::string manifest_path = (base / "manifest.json").string();
  write_manifest(manifest_path, m);
  return manifest_path;
}

// ---------------------------------------------------------------------------
// k-fold splitting

FoldPlan kfold_split(const std::vector<int>& labels, int k,
                     std::uint64_t seed) {
  if (k < 2) throw Error("fold count must be >= 2");
  if (labels.empty()) throw Error("cannot split an empty label set");

  int c = 0;
  for (int label : labels) {
    if (label < 0) throw Error("labels must be >= 0");
    c = std::max(c, label + 1);
  }

  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(c));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class[static_cast<std::size_t>(labels[i])].push_back(
        static_cast<int>(i));
  }

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.test_indices.assign(static_cast<std::size_t>(k), {});

  for (int cls = 0; cls < c; ++cls) {
    auto& members = by_class[static_cast<std::size_t>(cls)];
    if (static_cast<int>(members.size()) < k) {
      std::ostringstream msg;
      msg << "class " << cls << " has " << members.size()
          << " samples, fewer than the " << k << " folds requested";
      throw Error(msg.str());
    }
    // Seeded Fisher-Yates per class, then round-robin dealing: fold sizes per
    // class differ by at most one.
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(cls)));
    for (int i = static_cast<int>(members.size()) - 1; i > 0; --i) {
      const int j = rng.uniform_int(i + 1);
      std::swap(members[static_cast<std::size_t>(i)],
                members[static_cast<std::size_t>(j)]);
    }
    for (std::size_t t = 0; t < members.size(); ++t) {
      plan.test_indices[t % static_cast<std::size_t>(k)].push_back(members[t]);
    }
  }

  plan.train_indices.assign(static_cast<std::size_t>(k), {});
  std::vector<char> in_test(labels.size());
  for (int f = 0; f < k; ++f) {
    auto& test = plan.test_indices[static_cast<std::size_t>(f)];
    std::sort(test.begin(), test.end());
    std::fill(in_test.begin(), in_test.end(), 0);
    for (int idx : test) in_test[static_cast<std::size_t>(idx)] = 1;
    auto& train = plan.train_indices[static_cast<std::size_t>(f)];
    train.reserve(labels.size() - test.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (!in_test[i]) train.push_back(static_cast<int>(i));
    }
  }
  return plan;
}

}  // namespace crc
