#include "crc/types.hpp"

#include <cmath>

namespace crc {

const char* method_name(Method m) {
  switch (m) {
    case Method::Crc: return "crc";
    case Method::Ecrc: return "ecrc";
    case Method::Rcrc: return "rcrc";
    case Method::Kcrc: return "kcrc";
    case Method::Pcrc: return "pcrc";
    case Method::Gpcrc: return "gpcrc";
    case Method::Procrc: return "procrc";
    case Method::Eprocrc: return "eprocrc";
    case Method::Pprocrc: return "pprocrc";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::Crc, Method::Ecrc, Method::Rcrc, Method::Kcrc,
                   Method::Pcrc, Method::Gpcrc, Method::Procrc, Method::Eprocrc,
                   Method::Pprocrc}) {
    if (name == method_name(m)) return m;
  }
  throw Error("unknown method '" + name +
              "' (expected one of crc, ecrc, rcrc, kcrc, pcrc, gpcrc, procrc, "
              "eprocrc, pprocrc)");
}

bool is_patch_method(Method m) {
  return m == Method::Pcrc || m == Method::Gpcrc || m == Method::Pprocrc;
}

const char* norm_mode_name(NormMode m) {
  return m == NormMode::UnitL2 ? "unit-l2" : "none";
}

NormMode parse_norm_mode(const std::string& name) {
  if (name == "unit-l2") return NormMode::UnitL2;
  if (name == "none") return NormMode::None;
  throw Error("unknown norm mode '" + name + "' (expected unit-l2 or none)");
}

const char* residual_rule_name(ResidualRule r) {
  return r == ResidualRule::Normalized ? "normalized" : "class-gap";
}

ResidualRule parse_residual_rule(const std::string& name) {
  if (name == "normalized") return ResidualRule::Normalized;
  if (name == "class-gap") return ResidualRule::ClassGap;
  throw Error("unknown residual rule '" + name +
              "' (expected normalized or class-gap)");
}

const char* kernel_kind_name(KernelSpec::Kind k) {
  return k == KernelSpec::Kind::Linear ? "linear" : "rbf";
}

KernelSpec::Kind parse_kernel_kind(const std::string& name) {
  if (name == "linear") return KernelSpec::Kind::Linear;
  if (name == "rbf") return KernelSpec::Kind::Rbf;
  throw Error("unknown kernel '" + name + "' (expected linear or rbf)");
}

void KernelSpec::validate() const {
  if (kind == Kind::Rbf && !(sigma > 0.0 && std::isfinite(sigma))) {
    throw Error("rbf kernel requires a positive finite bandwidth");
  }
}

void SolverConfig::validate() const {
  auto check_weight = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(std::string(name) + " must be finite and >= 0");
    }
  };
  check_weight(lambda, "lambda");
  check_weight(gamma, "gamma");
  check_weight(tau, "tau");
  check_weight(eta, "eta");
  kernel.validate();
  if (!(tolerance > 0.0) || !std::isfinite(tolerance)) {
    throw Error("tolerance must be finite and > 0");
  }
  if (max_iters < 1) throw Error("max_iters must be >= 1");
}

}  // namespace crc
