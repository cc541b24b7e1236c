// crcbench: synthesize datasets, benchmark classifiers with k-fold CV,
// classify single inputs, and grid-search regularization weights.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "crc/classifiers.hpp"
#include "crc/datasets.hpp"
#include "crc/dictionary.hpp"
#include "crc/harness.hpp"
#include "crc/parallel.hpp"
#include "crc/patching.hpp"
#include "crc/solvers.hpp"
#include "crc/types.hpp"

namespace {

using crc::Error;
using ordered_json = nlohmann::ordered_json;

// Flag bundle shared by bench / classify / gridsearch.
struct MethodFlags {
  std::string method = "crc";
  double lambda = crc::SolverConfig{}.lambda;
  double gamma = crc::SolverConfig{}.gamma;
  double tau = crc::SolverConfig{}.tau;
  double eta = crc::SolverConfig{}.eta;
  std::string kernel = "linear";
  double sigma = 1.0;
  std::string residual = "normalized";
  double tolerance = crc::SolverConfig{}.tolerance;
  int max_iters = crc::SolverConfig{}.max_iters;
  int folds = 5;
  std::uint64_t seed = 42;
  int jobs = 0;
  int patch_h = 0;
  int patch_w = 0;
  int patch_stride = 0;
  int pca_rank = 0;
  std::string norm = "unit-l2";
};

void add_method_flags(CLI::App* cmd, MethodFlags* f, bool with_folds) {
  cmd->add_option("--method", f->method,
                  "classifier: crc, ecrc, rcrc, kcrc, pcrc, gpcrc, procrc, "
                  "eprocrc, pprocrc")
      ->required();
  cmd->add_option("--lambda", f->lambda, "coefficient shrinkage weight");
  cmd->add_option("--gamma", f->gamma, "collaboration/coupling weight");
  cmd->add_option("--tau", f->tau, "class-deviation relaxation weight");
  cmd->add_option("--eta", f->eta, "relaxation-weight regularizer");
  cmd->add_option("--kernel", f->kernel, "kernel kind: linear or rbf");
  cmd->add_option("--sigma", f->sigma, "rbf bandwidth");
  cmd->add_option("--residual", f->residual,
                  "decision rule: normalized or class-gap");
  cmd->add_option("--tolerance", f->tolerance,
                  "iterative-solver stopping tolerance");
  cmd->add_option("--max-iters", f->max_iters, "iterative-solver budget");
  if (with_folds) {
    cmd->add_option("--folds", f->folds, "cross-validation fold count");
  }
  cmd->add_option("--seed", f->seed, "seed for every random choice");
  cmd->add_option("--jobs", f->jobs,
                  "parallelism cap (0 = all cores; never affects results)");
  cmd->add_option("--patch-h", f->patch_h, "patch height override");
  cmd->add_option("--patch-w", f->patch_w, "patch width override");
  cmd->add_option("--patch-stride", f->patch_stride, "patch stride override");
  cmd->add_option("--pca", f->pca_rank,
                  "patch feature rank (0 keeps raw pixels)");
  cmd->add_option("--norm", f->norm, "column normalization: unit-l2 or none");
}

crc::RunConfig to_run_config(const MethodFlags& f) {
  crc::RunConfig config;
  config.method = crc::parse_method(f.method);
  config.solver.lambda = f.lambda;
  config.solver.gamma = f.gamma;
  config.solver.tau = f.tau;
  config.solver.eta = f.eta;
  config.solver.kernel.kind = crc::parse_kernel_kind(f.kernel);
  config.solver.kernel.sigma = f.sigma;
  config.solver.residual = crc::parse_residual_rule(f.residual);
  config.solver.tolerance = f.tolerance;
  config.solver.max_iters = f.max_iters;
  config.folds = f.folds;
  config.seed = f.seed;
  config.jobs = f.jobs;
  config.pca_rank = f.pca_rank;
  config.norm = crc::parse_norm_mode(f.norm);
  const bool any_patch = f.patch_h > 0 || f.patch_w > 0 || f.patch_stride > 0;
  if (any_patch) {
    if (f.patch_h < 1 || f.patch_w < 1 || f.patch_stride < 1) {
      throw Error("--patch-h, --patch-w, and --patch-stride must be set "
                  "together and positive");
    }
    config.patch_override = crc::PatchParams{f.patch_h, f.patch_w,
                                             f.patch_stride};
  }
  config.validate();
  return config;
}

void print_resolved(const std::string& command, const ordered_json& detail) {
  ordered_json line;
  line["command"] = command;
  for (auto it = detail.begin(); it != detail.end(); ++it) {
    line[it.key()] = it.value();
  }
  std::cout << "config: " << line.dump() << "\n";
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot create " + path);
  out << text;
  if (!out) throw Error("write failed for " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// ---------------------------------------------------------------------------

int run_synth(const std::string& spec_path, const std::string& out_dir,
              const std::string& name, const MethodFlags& f) {
  const crc::SyntheticSpec spec =
      crc::synthetic_spec_from_json(read_text(spec_path));
  std::optional<crc::PatchParams> patch;
  if (f.patch_h > 0 || f.patch_w > 0 || f.patch_stride > 0) {
    if (f.patch_h < 1 || f.patch_w < 1 || f.patch_stride < 1) {
      throw Error("--patch-h, --patch-w, and --patch-stride must be set "
                  "together and positive");
    }
    patch = crc::PatchParams{f.patch_h, f.patch_w, f.patch_stride};
  }

  ordered_json detail;
  detail["spec"] = nlohmann::json::parse(crc::synthetic_spec_to_json(spec));
  detail["out"] = out_dir;
  detail["name"] = name;
  if (patch) {
    detail["patch"] = {{"h", patch->h}, {"w", patch->w},
                       {"stride", patch->stride}};
  }
  print_resolved("synth", detail);

  const std::string manifest =
      crc::write_synthetic_dataset(spec, patch, out_dir, name);
  std::cout << "wrote " << spec.total_samples() << " images\n";
  std::cout << "manifest: " << manifest << "\n";
  return 0;
}

int run_bench(const std::string& manifest, const MethodFlags& f,
              const std::string& out_path, const std::string& csv_path) {
  const crc::RunConfig config = to_run_config(f);
  ordered_json detail;
  detail["manifest"] = manifest;
  detail["config"] =
      nlohmann::json::parse(crc::emit_run_config_json(config));
  print_resolved("bench", detail);

  const crc::BenchmarkReport report = crc::run_benchmark_manifest(
      manifest, config, [](const crc::FoldResult& fr) {
        std::cout << "fold " << fr.fold << ": accuracy " << fr.accuracy << " ("
                  << fr.correct << "/" << fr.total << ") in "
                  << fr.build_seconds + fr.classify_seconds << "s\n";
      });

  std::cout << "mean accuracy " << report.mean_accuracy << " +/- "
            << report.std_accuracy << " over " << report.folds.size()
            << " folds (" << report.total_seconds << "s)\n";

  const std::string json_text = crc::emit_report_json(report);
  if (!out_path.empty()) {
    write_text(out_path, json_text);
    std::cout << "report: " << out_path << "\n";
  }
  if (!csv_path.empty()) {
    write_text(csv_path, crc::emit_report_csv(report));
    std::cout << "csv: " << csv_path << "\n";
  }
  if (out_path.empty() && csv_path.empty()) {
    std::cout << json_text;
  }
  return 0;
}

int run_classify(const std::string& manifest, const std::string& input,
                 const MethodFlags& f) {
  const crc::RunConfig config = to_run_config(f);
  ordered_json detail;
  detail["manifest"] = manifest;
  detail["input"] = input;
  detail["config"] =
      nlohmann::json::parse(crc::emit_run_config_json(config));
  print_resolved("classify", detail);

  const crc::DatasetManifest meta = crc::read_manifest(manifest);
  const crc::LoadedDataset data = crc::load_dataset(manifest);
  auto class_name = [&meta](int k) {
    return k >= 0 && k < static_cast<int>(meta.class_names.size())
               ? meta.class_names[static_cast<std::size_t>(k)]
               : std::string("?");
  };
  auto print_residuals = [](const crc::Vector& r) {
    std::cout << "residuals:";
    for (Eigen::Index i = 0; i < r.size(); ++i) std::cout << " " << r(i);
    std::cout << "\n";
  };

  if (crc::is_patch_method(config.method)) {
    if (!data.has_images()) {
      throw Error("patch methods need an image dataset");
    }
    if (!ends_with(input, ".pgm")) {
      throw Error("patch methods classify PGM images only");
    }
    const std::optional<crc::PatchParams> pp =
        config.patch_override ? config.patch_override : data.patch;
    if (!pp) {
      throw Error("no patch grid configured (set one in the manifest or pass "
                  "an override)");
    }
    const crc::Image query = crc::read_pgm(input);
    const crc::Image& first = data.images[0];
    if (query.rows() != first.rows() || query.cols() != first.cols()) {
      throw Error("input image size does not match the dataset's images");
    }
    const crc::PatchGrid grid = crc::make_grid(
        static_cast<int>(first.rows()), static_cast<int>(first.cols()), pp->h,
        pp->w, pp->stride);
    const crc::LocalDictionary local = crc::build_local_dictionaries(
        data.images, data.labels, grid, config.norm, config.pca_rank);
    const crc::PcaBasis* pca = local.pca() ? &*local.pca() : nullptr;
    const crc::TestPatchSet patches =
        crc::extract_patches(query, grid, config.norm, pca);

    std::pair<int, crc::VoteTally> result;
    if (config.method == crc::Method::Pprocrc) {
      result = crc::classify_pprocrc(local, patches, config.solver.lambda,
                                     config.solver.gamma,
                                     crc::resolve_jobs(config.jobs));
    } else {
      result = crc::classify_patch_vote(local, patches, config.method,
                                        config.solver,
                                        crc::resolve_jobs(config.jobs));
    }
    std::cout << "predicted class " << result.first << " ("
              << class_name(result.first) << ")\n";
    std::cout << "votes:";
    for (int v : result.second.votes) std::cout << " " << v;
    std::cout << "\n";
    print_residuals(result.second.aggregate);
    return 0;
  }

  // Whole-image path: the dictionary holds every sample of the dataset.
  const Eigen::Index dim = data.has_images() ? data.images[0].size()
                                             : data.features.rows();
  crc::Matrix columns(dim, data.sample_count());
  if (data.has_images()) {
    const crc::PatchGrid whole = crc::make_grid(
        static_cast<int>(data.images[0].rows()),
        static_cast<int>(data.images[0].cols()),
        static_cast<int>(data.images[0].rows()),
        static_cast<int>(data.images[0].cols()), 1);
    for (int i = 0; i < data.sample_count(); ++i) {
      columns.col(i) = crc::raw_patch_columns(
                           data.images[static_cast<std::size_t>(i)], whole)
                           .col(0);
    }
  } else {
    columns = data.features;
  }
  const crc::FeatureDictionary dict =
      crc::build_dictionary(columns, data.labels, config.norm);

  crc::Matrix queries;
  if (ends_with(input, ".pgm")) {
    const crc::Image img = crc::read_pgm(input);
    const crc::PatchGrid whole =
        crc::make_grid(static_cast<int>(img.rows()),
                       static_cast<int>(img.cols()),
                       static_cast<int>(img.rows()),
                       static_cast<int>(img.cols()), 1);
    queries = crc::raw_patch_columns(img, whole);
  } else if (ends_with(input, ".fmx")) {
    queries = crc::read_fmx(input);
  } else {
    throw Error("input must be a .pgm image or a .fmx feature file");
  }
  if (queries.rows() != dict.dim()) {
    throw Error("input dimension does not match the dictionary");
  }

  for (Eigen::Index s = 0; s < queries.cols(); ++s) {
    crc::Vector y = queries.col(s);
    if (config.norm == crc::NormMode::UnitL2) {
      const double n = y.norm();
      if (n > 0.0) y /= n;
    }
    const auto [label, residuals] =
        crc::classify_global(dict, y, config.method, config.solver);
    if (queries.cols() > 1) std::cout << "sample " << s << ": ";
    std::cout << "predicted class " << label << " (" << class_name(label)
              << "), margin " << residuals.margin << "\n";
    print_residuals(residuals.r);
  }
  return 0;
}

int run_gridsearch(const std::string& manifest, const MethodFlags& f,
                   std::vector<double> lambda_grid,
                   std::vector<double> gamma_grid,
                   std::vector<double> tau_grid,
                   const std::string& out_path) {
  const crc::RunConfig base = to_run_config(f);
  if (lambda_grid.empty()) lambda_grid = {base.solver.lambda};
  if (gamma_grid.empty()) gamma_grid = {base.solver.gamma};
  if (tau_grid.empty()) tau_grid = {base.solver.tau};

  ordered_json detail;
  detail["manifest"] = manifest;
  detail["config"] = nlohmann::json::parse(crc::emit_run_config_json(base));
  detail["lambda_grid"] = lambda_grid;
  detail["gamma_grid"] = gamma_grid;
  detail["tau_grid"] = tau_grid;
  print_resolved("gridsearch", detail);

  const crc::LoadedDataset data = crc::load_dataset(manifest);
  const crc::GridSearchResult result =
      crc::grid_search(data, base, lambda_grid, gamma_grid, tau_grid);

  for (const crc::GridSearchRow& row : result.table) {
    std::cout << "lambda " << row.lambda << " gamma " << row.gamma << " tau "
              << row.tau << " -> score " << row.score << "\n";
  }
  std::cout << "best: lambda " << result.best.solver.lambda << " gamma "
            << result.best.solver.gamma << " tau " << result.best.solver.tau
            << " (score " << result.best_score << ", benchmark accuracy "
            << result.best_report.mean_accuracy << ")\n";

  const std::string json_text = crc::emit_grid_json(result);
  if (!out_path.empty()) {
    write_text(out_path, json_text);
    std::cout << "table: " << out_path << "\n";
  } else {
    std::cout << json_text;
  }
  return 0;
}

int run_formats() {
  std::cout <<
      R"(Feature matrix file (.fmx)
  Byte layout, little-endian:
    bytes 0-3   magic "FMX1"
    bytes 4-7   u32 d   feature dimension (rows)
    bytes 8-11  u32 N   sample count (columns)
    then d*N    f64     values, column-major (sample after sample)
  Exactly d*N values must follow the header; zero dimensions are invalid.
  Values round-trip bit-exactly through read/write.

Image files (.pgm)
  Binary PGM ("P5"), maxval up to 65535 (two-byte samples are MSB first).
  Pixels are scaled to [0, 1] on read; writing clamps to [0, 1] and
  quantizes to the chosen maxval, so a round trip is exact to 1/maxval.

Labels file (labels.csv)
  One "index,label" pair per line, 0-based; the indices must cover
  0..N-1 exactly, in any order. Labels are class ids 0..C-1.

Dataset manifest (manifest.json)
  {
    "name":     dataset name,
    "classes":  [class name, ...],
    "source":   "feature-file" | "image-directory" | "synthetic-spec",
    ...source-specific fields:
      feature-file:    "features_path", "labels_path"
      image-directory: "images" (list of PGM paths), "labels_path"
      synthetic-spec:  "synthetic" (generator parameters, incl. seed)
    "patch":    optional {"h", "w", "stride"} default patch grid,
    "sha256":   {relative path: hex digest} for every referenced file
  }
  Relative paths resolve against the manifest's directory. Loading
  verifies every checksum and fails closed on a mismatch or a missing
  digest. Synthetic datasets are regenerated from the embedded
  parameters instead of being read from disk.

Benchmark report (report.json)
  {
    "dataset", "method", "version",
    "config":  full run configuration echo (see the "config:" line any
               run prints; reports are reproducible from it),
    "folds":   [{"fold", "correct", "total", "accuracy",
                 "build_seconds", "classify_seconds"}, ...],
    "mean_accuracy", "std_accuracy",
    "confusion": true-class x predicted-class counts,
    "total_seconds"
  }
  Reports round-trip exactly: emit, parse, and emit again is
  byte-identical. Only the *_seconds fields vary between identical runs.
)";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"collaborative-representation classifier benchmark"};
  app.require_subcommand(1);
  app.set_version_flag("--version", crc::kVersion);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string synth_spec;
  std::string synth_out;
  std::string synth_name = "synthetic";
  MethodFlags synth_flags;
  synth->add_option("--spec", synth_spec, "generator parameter JSON file")
      ->required();
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--name", synth_name, "dataset name");
  synth->add_option("--patch-h", synth_flags.patch_h,
                    "default patch height for the manifest");
  synth->add_option("--patch-w", synth_flags.patch_w,
                    "default patch width for the manifest");
  synth->add_option("--patch-stride", synth_flags.patch_stride,
                    "default patch stride for the manifest");

  // bench
  auto* bench = app.add_subcommand("bench", "k-fold cross-validation run");
  std::string bench_manifest;
  std::string bench_out;
  std::string bench_csv;
  MethodFlags bench_flags;
  bench->add_option("--manifest", bench_manifest, "dataset manifest")
      ->required();
  add_method_flags(bench, &bench_flags, /*with_folds=*/true);
  bench->add_option("--out", bench_out, "write the JSON report here");
  bench->add_option("--csv", bench_csv, "write the CSV report here");

  // classify
  auto* classify = app.add_subcommand("classify", "classify one input");
  std::string classify_manifest;
  std::string classify_input;
  MethodFlags classify_flags;
  classify->add_option("--manifest", classify_manifest, "dataset manifest")
      ->required();
  classify->add_option("--input", classify_input, "PGM image or FMX file")
      ->required();
  add_method_flags(classify, &classify_flags, /*with_folds=*/false);

  // gridsearch
  auto* grid = app.add_subcommand("gridsearch",
                                  "nested-CV regularization search");
  std::string grid_manifest;
  std::string grid_out;
  MethodFlags grid_flags;
  std::vector<double> lambda_grid;
  std::vector<double> gamma_grid;
  std::vector<double> tau_grid;
  grid->add_option("--manifest", grid_manifest, "dataset manifest")
      ->required();
  add_method_flags(grid, &grid_flags, /*with_folds=*/true);
  grid->add_option("--lambda-grid", lambda_grid, "lambda candidates")
      ->delimiter(',');
  grid->add_option("--gamma-grid", gamma_grid, "gamma candidates")
      ->delimiter(',');
  grid->add_option("--tau-grid", tau_grid, "tau candidates")->delimiter(',');
  grid->add_option("--out", grid_out, "write the JSON table here");

  // formats
  auto* formats =
      app.add_subcommand("formats", "describe the file formats used");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) {
      return run_synth(synth_spec, synth_out, synth_name, synth_flags);
    }
    if (bench->parsed()) {
      return run_bench(bench_manifest, bench_flags, bench_out, bench_csv);
    }
    if (classify->parsed()) {
      return run_classify(classify_manifest, classify_input, classify_flags);
    }
    if (grid->parsed()) {
      return run_gridsearch(grid_manifest, grid_flags, lambda_grid,
                            gamma_grid, tau_grid, grid_out);
    }
    if (formats->parsed()) {
      return run_formats();
    }
    std::cerr << "error: no subcommand selected\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
