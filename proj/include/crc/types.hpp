#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace crc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr const char* kVersion = "0.1.0";

/// Thrown for every recoverable failure (bad input, singular system,
/// malformed file, checksum mismatch).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Method {
  Crc,
  Ecrc,
  Rcrc,
  Kcrc,
  Pcrc,
  Gpcrc,
  Procrc,
  Eprocrc,
  Pprocrc,
};

const char* method_name(Method m);
Method parse_method(const std::string& name);

/// Patch methods classify per-patch and vote; the rest classify the whole
/// feature vector at once.
bool is_patch_method(Method m);

enum class NormMode { UnitL2, None };

const char* norm_mode_name(NormMode m);
NormMode parse_norm_mode(const std::string& name);

/// How per-class residuals are ranked: Normalized divides the class
/// reconstruction error by the class coefficient energy; ClassGap ranks by
/// the distance between the full reconstruction and the class-only one.
enum class ResidualRule { Normalized, ClassGap };

const char* residual_rule_name(ResidualRule r);
ResidualRule parse_residual_rule(const std::string& name);

struct KernelSpec {
  enum class Kind { Linear, Rbf };
  Kind kind = Kind::Linear;
  double sigma = 1.0;  // rbf bandwidth, k(u,v) = exp(-|u-v|^2 / (2 sigma^2))

  void validate() const;
};

const char* kernel_kind_name(KernelSpec::Kind k);
KernelSpec::Kind parse_kernel_kind(const std::string& name);

struct SolverConfig {
  double lambda = 1e-3;  // coefficient ridge weight
  double gamma = 1e-3;   // collaboration / coupling weight
  double tau = 1e-3;     // rcrc relaxation weight
  double eta = 1e-3;     // rcrc weight-smoothing
  KernelSpec kernel;
  double tolerance = 1e-10;  // convergence threshold for iterative solves
  int max_iters = 200;
  ResidualRule residual = ResidualRule::Normalized;

  void validate() const;
};

/// Result of one coefficient solve. `beta` is present only for the coupled
/// patch solver. `grad_norm` is the Euclidean norm of the analytic cost
/// gradient at the returned point.
struct CoefficientSolution {
  Vector alpha;
  std::optional<Vector> beta;
  double achieved_cost = 0.0;
  double grad_norm = 0.0;
  bool converged = true;
  int iterations = 0;
};

/// Per-class nonnegative weights, normalized to mean 1.
struct ClassPriorWeights {
  Vector beta_c;
};

}  // namespace crc
