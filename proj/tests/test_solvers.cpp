#include <doctest.h>

#include <cmath>
#include <vector>

#include "crc/costs.hpp"
#include "crc/rng.hpp"
#include "crc/solvers.hpp"
#include "oracle.hpp"
#include "support.hpp"

using crc::CovarianceModel;
using crc::Error;
using crc::FeatureDictionary;
using crc::Image;
using crc::KernelSpec;
using crc::Matrix;
using crc::NormMode;
using crc::Rng;
using crc::Vector;

namespace {

// Stationarity bound used throughout: gradient norm small relative to the
// query magnitude.
bool stationary(double grad_norm, const Vector& y) {
  return grad_norm <= 1e-8 * (1.0 + y.norm());
}

FeatureDictionary identity_dictionary() {
  return crc::build_dictionary(Matrix::Identity(2, 2), {0, 1});
}

}  // namespace

TEST_SUITE("solvers") {

// --- ridge (baseline collaborative) ----------------------------------------

TEST_CASE("ridge solve on the identity dictionary halves the query") {
  auto dict = identity_dictionary();
  Vector y(2);
  y << 1.0, 0.0;
  auto sol = crc::crc_solve(dict, y, 1.0);
  CHECK(sol.alpha[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(sol.alpha[1] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(sol.achieved_cost == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(stationary(sol.grad_norm, y));
}

TEST_CASE("ridge solve with zero regularizer inverts an invertible system") {
  Matrix x(2, 1);
  x << 1.0, 0.0;
  auto dict = crc::build_dictionary(x, {0});
  Vector y(2);
  y << 2.0, 0.0;
  auto sol = crc::crc_solve(dict, y, 0.0);
  CHECK(sol.alpha[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(sol.achieved_cost == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("ridge solve matches the descent oracle") {
  Rng rng(41);
  for (int trial = 0; trial < 5; ++trial) {
    const int d = 5, n = 8, c = 2;
    auto dict = testsup::random_dictionary(rng, d, n, c);
    Vector y = testsup::random_vector(rng, d);
    const double lambda = rng.uniform(0.05, 0.5);

    auto sol = crc::crc_solve(dict, y, lambda);
    const Matrix& x = dict.data();
    auto oracle = testsup::oracle_descent_solve(
        [&](const Vector& a) { return crc::crc_cost(x, y, lambda, a); },
        [&](const Vector& a) { return crc::crc_grad(x, y, lambda, a); },
        Vector::Zero(n));
    REQUIRE(oracle.converged);
    CHECK((sol.alpha - oracle.x).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(stationary(crc::crc_grad(x, y, lambda, sol.alpha).norm(), y));
  }
}

TEST_CASE("ridge normal equations hold at the solution") {
  Rng rng(42);
  auto dict = testsup::random_dictionary(rng, 9, 14, 3);
  Vector y = testsup::random_vector(rng, 9);
  const double lambda = 0.2;
  auto sol = crc::crc_solve(dict, y, lambda);
  Vector lhs = (dict.gram() + lambda * Matrix::Identity(14, 14)) * sol.alpha;
  Vector rhs = dict.data().transpose() * y;
  CHECK((lhs - rhs).norm() <= 1e-9 * rhs.norm());
}

// --- covariance-whitened ----------------------------------------------------

TEST_CASE("whitened solve with the identity covariance reduces to ridge") {
  Rng rng(43);
  auto dict = testsup::random_dictionary(rng, 6, 10, 2);
  Vector y = testsup::random_vector(rng, 6);
  auto cov = crc::identity_covariance(6);
  auto plain = crc::crc_solve(dict, y, 0.1);
  auto white = crc::ecrc_solve(dict, cov, y, 0.1);
  // The whitened path runs iterative refinement, which can perturb the
  // solution by a few ulps even when the initial factorization is exact.
  CHECK((plain.alpha - white.alpha).norm() <= 1e-12 * (1.0 + plain.alpha.norm()));
}

TEST_CASE("whitening by 2I is ridge with a doubled regularizer") {
  Rng rng(44);
  auto dict = testsup::random_dictionary(rng, 5, 9, 3);
  Vector y = testsup::random_vector(rng, 5);
  CovarianceModel cov;
  cov.R = 2.0 * Matrix::Identity(5, 5);
  cov.factorization.compute(cov.R);
  auto white = crc::ecrc_solve(dict, cov, y, 0.1);
  auto doubled = crc::crc_solve(dict, y, 0.2);
  CHECK((white.alpha - doubled.alpha).norm() <= 1e-10);
}

TEST_CASE("whitened solve matches the descent oracle") {
  Rng rng(45);
  for (int trial = 0; trial < 3; ++trial) {
    const int d = 5, n = 8;
    auto dict = testsup::random_dictionary(rng, d, n, 2);
    auto cov = crc::build_covariance(dict, 0.3);
    Vector y = testsup::random_vector(rng, d);
    const double lambda = rng.uniform(0.05, 0.5);

    auto sol = crc::ecrc_solve(dict, cov, y, lambda);
    const Matrix& x = dict.data();
    auto oracle = testsup::oracle_descent_solve(
        [&](const Vector& a) { return crc::ecrc_cost(x, cov, y, lambda, a); },
        [&](const Vector& a) { return crc::ecrc_grad(x, cov, y, lambda, a); },
        Vector::Zero(n));
    REQUIRE(oracle.converged);
    CHECK((sol.alpha - oracle.x).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(stationary(crc::ecrc_grad(x, cov, y, lambda, sol.alpha).norm(), y));
  }
}

// --- class-coupled ----------------------------------------------------------

TEST_CASE("class coupling with zero weight reduces to ridge") {
  Rng rng(46);
  auto dict = testsup::random_dictionary(rng, 6, 9, 3);
  Vector y = testsup::random_vector(rng, 6);
  auto plain = crc::crc_solve(dict, y, 0.1);
  auto coupled = crc::procrc_solve(dict, y, 0.1, 0.0);
  CHECK((plain.alpha - coupled.alpha).norm() == 0.0);
}

TEST_CASE("class coupling vanishes with a single class") {
  Rng rng(47);
  auto dict = testsup::random_dictionary(rng, 6, 8, 1);
  Vector y = testsup::random_vector(rng, 6);
  auto plain = crc::crc_solve(dict, y, 0.1);
  auto coupled = crc::procrc_solve(dict, y, 0.1, 7.5);
  CHECK((plain.alpha - coupled.alpha).norm() <= 1e-10);
}

TEST_CASE("class-coupled solve matches the descent oracle") {
  Rng rng(48);
  for (int trial = 0; trial < 3; ++trial) {
    const int d = 6, n = 9, c = 3;
    auto dict = testsup::random_dictionary(rng, d, n, c);
    Vector y = testsup::random_vector(rng, d);
    const double lambda = rng.uniform(0.05, 0.5);
    const double gamma = rng.uniform(0.05, 0.5);

    auto sol = crc::procrc_solve(dict, y, lambda, gamma);
    const Matrix& x = dict.data();
    const auto& part = dict.partition();
    auto oracle = testsup::oracle_descent_solve(
        [&](const Vector& a) {
          return crc::procrc_cost(x, part, y, lambda, gamma, a);
        },
        [&](const Vector& a) {
          return crc::procrc_grad(x, part, y, lambda, gamma, a);
        },
        Vector::Zero(n));
    REQUIRE(oracle.converged);
    CHECK((sol.alpha - oracle.x).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(stationary(
        crc::procrc_grad(x, part, y, lambda, gamma, sol.alpha).norm(), y));
  }
}

TEST_CASE("the assembled class-coupled system matches a brute-force build") {
  Rng rng(49);
  auto dict = testsup::random_dictionary(rng, 5, 8, 3);
  const double lambda = 0.3, gamma = 0.7;
  const Matrix& g = dict.gram();
  const int n = dict.count(), c = dict.num_classes();

  Matrix brute = g;
  for (int k = 0; k < c; ++k) {
    Matrix sel = Matrix::Zero(n, n);  // I − S_k
    for (int t = 0; t < n; ++t) {
      if (dict.labels()[t] != k) sel(t, t) = 1.0;
    }
    brute += (gamma / c) * sel * g * sel;
  }
  brute.diagonal().array() += lambda;
  CHECK((crc::procrc_system(dict, lambda, gamma) - brute).norm() <=
        1e-12 * brute.norm());
}

// --- prior-weighted class coupling ------------------------------------------

TEST_CASE("unit priors reproduce the unweighted class coupling") {
  Rng rng(50);
  auto dict = testsup::random_dictionary(rng, 6, 9, 3);
  Vector y = testsup::random_vector(rng, 6);
  crc::ClassPriorWeights ones{Vector::Ones(3)};
  auto plain = crc::procrc_solve(dict, y, 0.1, 0.4);
  auto weighted = crc::eprocrc_solve(dict, y, 0.1, 0.4, ones);
  CHECK((plain.alpha - weighted.alpha).norm() == 0.0);
}

TEST_CASE("prior weights from centroids normalize to mean one") {
  Rng rng(51);
  auto dict = testsup::random_dictionary(rng, 7, 12, 3);
  auto priors = crc::compute_class_priors(dict);
  REQUIRE(priors.beta_c.size() == 3);
  CHECK(priors.beta_c.mean() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(priors.beta_c.minCoeff() >= 0.0);

  // Independent recomputation from the definition.
  Vector global = dict.data().rowwise().mean();
  Vector raw(3);
  for (int k = 0; k < 3; ++k) {
    raw[k] = (global - crc::class_submatrix(dict, k).rowwise().mean()).norm();
  }
  raw /= raw.mean();
  CHECK((priors.beta_c - raw).norm() <= 1e-12);
}

TEST_CASE("coincident class centroids fall back to uniform priors") {
  // Two classes containing the same two columns: both centroids equal the
  // global mean, so every raw distance is zero.
  Matrix x(2, 4);
  x << 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0;
  auto dict = crc::build_dictionary(x, {0, 0, 1, 1});
  auto priors = crc::compute_class_priors(dict);
  CHECK(priors.beta_c[0] == 1.0);
  CHECK(priors.beta_c[1] == 1.0);
}

TEST_CASE("prior-weighted solve matches the descent oracle") {
  Rng rng(52);
  for (int trial = 0; trial < 3; ++trial) {
    const int d = 6, n = 9, c = 3;
    auto dict = testsup::random_dictionary(rng, d, n, c);
    Vector y = testsup::random_vector(rng, d);
    const double lambda = rng.uniform(0.05, 0.5);
    const double gamma = rng.uniform(0.05, 0.5);
    auto priors = crc::compute_class_priors(dict);

    auto sol = crc::eprocrc_solve(dict, y, lambda, gamma, priors);
    const Matrix& x = dict.data();
    const auto& part = dict.partition();
    auto oracle = testsup::oracle_descent_solve(
        [&](const Vector& a) {
          return crc::eprocrc_cost(x, part, y, lambda, gamma, priors.beta_c, a);
        },
        [&](const Vector& a) {
          return crc::eprocrc_grad(x, part, y, lambda, gamma, priors.beta_c, a);
        },
        Vector::Zero(n));
    REQUIRE(oracle.converged);
    CHECK((sol.alpha - oracle.x).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("prior weight vector must match the class count") {
  Rng rng(53);
  auto dict = testsup::random_dictionary(rng, 4, 6, 3);
  Vector y = testsup::random_vector(rng, 4);
  crc::ClassPriorWeights bad{Vector::Ones(2)};
  CHECK_THROWS_WITH_AS((void)crc::eprocrc_solve(dict, y, 0.1, 0.1, bad),
                       doctest::Contains("one entry per class"), Error);
}

// --- weighted-deviation relaxation ------------------------------------------

TEST_CASE("simplex projection handles interior, vertex, and negative inputs") {
  Vector z(2);
  z << 0.5, 0.5;
  CHECK((crc::project_simplex(z) - z).norm() == 0.0);

  z << 2.0, 0.0;
  Vector v = crc::project_simplex(z);
  CHECK(v[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(v[1] == doctest::Approx(0.0).epsilon(1e-14));

  z << -1.0, -3.0;
  v = crc::project_simplex(z);
  CHECK(v[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(v[1] == doctest::Approx(0.0).epsilon(1e-14));

  Vector one(1);
  one << -5.0;
  CHECK(crc::project_simplex(one)[0] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("simplex projection lands on the simplex and is idempotent") {
  Rng rng(54);
  for (int trial = 0; trial < 20; ++trial) {
    Vector z = testsup::random_vector(rng, 1 + rng.uniform_int(6));
    Vector w = crc::project_simplex(z);
    CHECK(w.minCoeff() >= 0.0);
    CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((crc::project_simplex(w) - w).norm() <= 1e-12);
  }
}

TEST_CASE("blended mean and class deviations match hand arithmetic") {
  auto part = crc::make_partition({0, 0, 1});
  Vector alpha(3);
  alpha << 1.0, 2.0, 6.0;
  // Class means 1.5 and 6: the blend averages the class means, not the
  // coefficients, so unbalanced classes do not skew it.
  CHECK(crc::blended_mean(part, alpha) == doctest::Approx(3.75).epsilon(1e-15));
  Vector dev = crc::class_deviations(part, alpha);
  CHECK(dev[0] == doctest::Approx(10.625).epsilon(1e-12));   // (1−3.75)² + (2−3.75)²
  CHECK(dev[1] == doctest::Approx(5.0625).epsilon(1e-12));   // (6−3.75)²
}

TEST_CASE("zero relaxation weight reduces to ridge") {
  Rng rng(55);
  auto dict = testsup::random_dictionary(rng, 6, 9, 3);
  Vector y = testsup::random_vector(rng, 6);
  auto plain = crc::crc_solve(dict, y, 0.1);
  auto relaxed = crc::rcrc_solve(dict, y, 0.1, 0.0, 0.05);
  CHECK(relaxed.converged);
  CHECK((plain.alpha - relaxed.alpha).norm() <= 1e-10);
}

TEST_CASE("single-class relaxation solves the centered ridge system") {
  Rng rng(56);
  const int d = 6, n = 8;
  auto dict = testsup::random_dictionary(rng, d, n, 1);
  Vector y = testsup::random_vector(rng, d);
  const double lambda = 0.2, tau = 0.4;

  auto sol = crc::rcrc_solve(dict, y, lambda, tau, 0.1);
  REQUIRE(sol.converged);

  // One class forces w = [1], so the stationary point solves
  // (XᵀX + λI + τ(I − (1/n)𝟙𝟙ᵀ)) α = Xᵀy.
  Matrix centering = Matrix::Identity(n, n) -
                     Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
  Matrix system = dict.gram() + lambda * Matrix::Identity(n, n) + tau * centering;
  Vector direct = system.llt().solve(dict.data().transpose() * y);
  CHECK((sol.alpha - direct).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("alternating minimization never increases the cost") {
  Rng rng(57);
  auto dict = testsup::random_dictionary(rng, 8, 12, 3);
  Vector y = testsup::random_vector(rng, 8);
  std::vector<double> trace;
  auto sol = crc::rcrc_solve(dict, y, 0.1, 0.6, 0.3, 1e-12, 100, &trace);
  REQUIRE(trace.size() >= 2);
  for (std::size_t i = 1; i < trace.size(); ++i) {
    CHECK(trace[i] <= trace[i - 1] + 1e-12 * (1.0 + std::abs(trace[i - 1])));
  }
  CHECK(sol.achieved_cost == doctest::Approx(trace.back()).epsilon(1e-12));
}

TEST_CASE("relaxation coefficients are stationary for the final weights") {
  Rng rng(58);
  auto dict = testsup::random_dictionary(rng, 7, 10, 2);
  Vector y = testsup::random_vector(rng, 7);
  Vector w;
  auto sol = crc::rcrc_solve(dict, y, 0.15, 0.5, 0.2, 1e-12, 200, nullptr, &w);
  REQUIRE(sol.converged);
  REQUIRE(w.size() == 2);
  CHECK(w.minCoeff() >= 0.0);
  CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-10));
  Vector grad = crc::rcrc_grad_alpha(dict.data(), dict.partition(), y, 0.15,
                                     0.5, w, sol.alpha);
  CHECK(stationary(grad.norm(), y));
}

TEST_CASE("zero weight smoothing drives the weights to a vertex") {
  Rng rng(59);
  auto dict = testsup::random_dictionary(rng, 6, 9, 3);
  Vector y = testsup::random_vector(rng, 6);
  Vector w;
  auto sol = crc::rcrc_solve(dict, y, 0.1, 0.5, 0.0, 1e-12, 200, nullptr, &w);
  REQUIRE(sol.converged);
  int ones = 0, zeros = 0;
  for (int i = 0; i < w.size(); ++i) {
    if (w[i] == 1.0) ++ones;
    if (w[i] == 0.0) ++zeros;
  }
  CHECK(ones == 1);
  CHECK(zeros == 2);
}

TEST_CASE("an exhausted iteration budget reports non-convergence") {
  Rng rng(60);
  auto dict = testsup::random_dictionary(rng, 6, 9, 3);
  Vector y = testsup::random_vector(rng, 6);
  auto sol = crc::rcrc_solve(dict, y, 0.1, 0.5, 0.2, 1e-12, 1);
  CHECK_FALSE(sol.converged);
  CHECK(sol.iterations == 1);
}

// --- kernel -----------------------------------------------------------------

TEST_CASE("the linear kernel reproduces the ridge solution") {
  Rng rng(61);
  auto dict = testsup::random_dictionary(rng, 10, 6, 2);
  Vector y = testsup::random_vector(rng, 10);
  KernelSpec linear;  // defaults to the inner-product kernel
  auto plain = crc::crc_solve(dict, y, 0.1);
  auto kernel = crc::kcrc_solve(dict, y, 0.1, linear);
  CHECK((plain.alpha - kernel.alpha).norm() <= 1e-10);
}

TEST_CASE("a huge rbf bandwidth approaches the all-ones kernel limit") {
  Rng rng(62);
  const int n = 6;
  auto dict = testsup::random_dictionary(rng, 5, n, 2);
  Vector y = testsup::random_vector(rng, 5);
  y /= y.norm();
  KernelSpec rbf;
  rbf.kind = KernelSpec::Kind::Rbf;
  rbf.sigma = 1e6;
  const double lambda = 0.1;
  auto sol = crc::kcrc_solve(dict, y, lambda, rbf);
  // With k ≡ 1 the system (𝟙𝟙ᵀ + λI)α = 𝟙 has the symmetric solution
  // α = 𝟙 / (n + λ).
  Vector limit = Vector::Constant(n, 1.0 / (n + lambda));
  CHECK((sol.alpha - limit).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("rbf kernel values match the definition") {
  Rng rng(63);
  Vector u = testsup::random_vector(rng, 4);
  Vector v = testsup::random_vector(rng, 4);
  KernelSpec rbf;
  rbf.kind = KernelSpec::Kind::Rbf;
  rbf.sigma = 0.7;
  double expected = std::exp(-(u - v).squaredNorm() / (2.0 * 0.49));
  CHECK(crc::kernel_eval(rbf, u, v) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(crc::kernel_eval(rbf, u, u) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("the rbf gram matrix is symmetric with a unit diagonal") {
  Rng rng(64);
  auto dict = testsup::random_dictionary(rng, 6, 8, 2);
  KernelSpec rbf;
  rbf.kind = KernelSpec::Kind::Rbf;
  rbf.sigma = 0.9;
  Matrix gram = crc::kcrc_gram(dict, rbf);
  CHECK((gram - gram.transpose()).norm() == 0.0);
  for (int i = 0; i < 8; ++i) {
    CHECK(gram(i, i) == doctest::Approx(1.0).epsilon(1e-14));
  }
  // Entry-wise agreement with the scalar kernel.
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      double direct =
          crc::kernel_eval(rbf, dict.data().col(i), dict.data().col(j));
      CHECK(gram(i, j) == doctest::Approx(direct).epsilon(1e-12));
    }
  }
}

TEST_CASE("kernel solve matches the descent oracle in coefficient space") {
  Rng rng(65);
  for (int trial = 0; trial < 3; ++trial) {
    const int d = 5, n = 7;
    auto dict = testsup::random_dictionary(rng, d, n, 2);
    Vector y = testsup::random_vector(rng, d);
    KernelSpec rbf;
    rbf.kind = KernelSpec::Kind::Rbf;
    rbf.sigma = 1.2;
    const double lambda = rng.uniform(0.05, 0.5);

    Matrix gram = crc::kcrc_gram(dict, rbf);
    Vector k_y = crc::kcrc_vector(dict, rbf, y);
    const double k_yy = crc::kernel_eval(rbf, y, y);
    auto sol = crc::kcrc_solve_gram(gram, k_y, k_yy, lambda);
    auto oracle = testsup::oracle_descent_solve(
        [&](const Vector& a) { return crc::kcrc_cost(gram, k_y, k_yy, lambda, a); },
        [&](const Vector& a) { return crc::kcrc_grad(gram, k_y, lambda, a); },
        Vector::Zero(n));
    REQUIRE(oracle.converged);
    CHECK((sol.alpha - oracle.x).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("an indefinite gram matrix is rejected with an eigenvalue estimate") {
  Matrix gram(2, 2);
  gram << 1.0, 0.0, 0.0, -1.0;
  Vector k_y(2);
  k_y << 1.0, 1.0;
  CHECK_THROWS_WITH_AS((void)crc::kcrc_solve_gram(gram, k_y, 1.0, 0.1),
                       doctest::Contains("positive semidefinite"), Error);
}

TEST_CASE("kernel parameters are validated") {
  KernelSpec bad;
  bad.kind = KernelSpec::Kind::Rbf;
  bad.sigma = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad.sigma = -1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

// --- per-location patch solve -----------------------------------------------

TEST_CASE("patch solve on an identity location dictionary halves the query") {
  Image a(1, 2), b(1, 2), q(1, 2);
  a << 1.0, 0.0;
  b << 0.0, 1.0;
  q << 0.0, 1.0;
  auto grid = crc::make_grid(1, 2, 1, 2, 1);
  auto local = crc::build_local_dictionaries({a, b}, {0, 1}, grid);
  auto test = crc::extract_patches(q, grid);
  auto sol = crc::pcrc_patch_solve(local, test, 0, 1.0);
  CHECK(sol.alpha[0] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(sol.alpha[1] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("patch solve matches a ridge solve on the location dictionary") {
  Rng rng(66);
  auto world = testsup::random_patch_world(rng, 8, 8, 4, 4, 3, 2);
  const double lambda = 0.2;
  for (int j = 0; j < world.local.location_count(); ++j) {
    auto sol = crc::pcrc_patch_solve(world.local, world.query, j, lambda);
    Matrix mj = world.local.location_matrix(j);
    Vector yj = world.query.patches.col(j);
    const int n = static_cast<int>(mj.cols());
    Matrix system = mj.transpose() * mj + lambda * Matrix::Identity(n, n);
    Vector direct = system.llt().solve(mj.transpose() * yj);
    CHECK((sol.alpha - direct).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(stationary(crc::crc_grad(mj, yj, lambda, sol.alpha).norm(), yj));
  }
}

// --- location-coupled patch solve -------------------------------------------

TEST_CASE("location coupling with zero weight is ridge on the joint dictionary") {
  Rng rng(67);
  auto world = testsup::random_patch_world(rng, 6, 6, 3, 3, 2, 2);
  const double lambda = 0.15;
  const Matrix& m = world.local.augmented();
  const int w = static_cast<int>(m.cols());
  for (int j = 0; j < world.local.location_count(); ++j) {
    auto sol = crc::gpcrc_solve(world.local, world.query, j, lambda, 0.0);
    Matrix system = m.transpose() * m + lambda * Matrix::Identity(w, w);
    Vector direct = system.llt().solve(m.transpose() * world.query.patches.col(j));
    CHECK((sol.alpha - direct).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("a single location makes the coupling penalty vanish") {
  Rng rng(68);
  auto world = testsup::random_patch_world(rng, 4, 4, 4, 4, 3, 2);  // q = 1
  REQUIRE(world.local.location_count() == 1);
  auto with = crc::gpcrc_solve(world.local, world.query, 0, 0.2, 5.0);
  auto without = crc::gpcrc_solve(world.local, world.query, 0, 0.2, 0.0);
  CHECK((with.alpha - without.alpha).norm() <= 1e-12);
  // And both agree with the per-location ridge solve.
  auto plain = crc::pcrc_patch_solve(world.local, world.query, 0, 0.2);
  CHECK((with.alpha - plain.alpha).norm() <= 1e-12);
}

TEST_CASE("the location-coupled system zeroes the selected rows and columns") {
  Rng rng(69);
  Matrix m = testsup::random_matrix(rng, 5, 8);
  Matrix gram = m.transpose() * m;
  const double lambda = 0.1, gamma = 0.8;
  const int start = 2, count = 3;

  Matrix sel = Matrix::Identity(8, 8);  // I − S
  for (int t = start; t < start + count; ++t) sel(t, t) = 0.0;
  Matrix brute = gram + gamma * sel * gram * sel;
  brute.diagonal().array() += lambda;
  CHECK((crc::gpcrc_system(gram, start, count, lambda, gamma) - brute).norm() <=
        1e-12 * brute.norm());
}

TEST_CASE("location-coupled solve matches the descent oracle") {
  Rng rng(70);
  for (int trial = 0; trial < 3; ++trial) {
    auto world = testsup::random_patch_world(rng, 6, 6, 3, 3, 2, 2);
    const double lambda = rng.uniform(0.05, 0.5);
    const double gamma = rng.uniform(0.05, 0.5);
    const int j = rng.uniform_int(world.local.location_count());
    const int n = world.local.sample_count();

    auto sol = crc::gpcrc_solve(world.local, world.query, j, lambda, gamma);
    const Matrix& m = world.local.augmented();
    Vector yj = world.query.patches.col(j);
    auto oracle = testsup::oracle_descent_solve(
        [&](const Vector& p) {
          return crc::gpcrc_cost(m, j * n, n, yj, lambda, gamma, p);
        },
        [&](const Vector& p) {
          return crc::gpcrc_grad(m, j * n, n, yj, lambda, gamma, p);
        },
        Vector::Zero(m.cols()));
    REQUIRE(oracle.converged);
    CHECK((sol.alpha - oracle.x).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(stationary(
        crc::gpcrc_grad(m, j * n, n, yj, lambda, gamma, sol.alpha).norm(), yj));
  }
}

// --- coupled dictionary + self-representation solve -------------------------

TEST_CASE("coupled solve on twin identity blocks splits the query evenly") {
  Matrix X = Matrix::Identity(2, 2);
  Matrix Y = Matrix::Identity(2, 2);
  Vector y(2);
  y << 1.0, 0.0;
  auto sol = crc::pprocrc_solve(X, Y, y, 1.0, 1.0);
  REQUIRE(sol.beta.has_value());
  CHECK(sol.alpha[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(sol.alpha[1] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK((*sol.beta)[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK((*sol.beta)[1] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(sol.achieved_cost == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("coupled cost at zero coefficients is twice the query energy") {
  Rng rng(71);
  Matrix X = testsup::random_matrix(rng, 4, 6);
  Matrix Y = testsup::random_matrix(rng, 4, 3);
  Vector y = testsup::random_vector(rng, 4);
  double c0 = crc::pprocrc_cost(X, Y, y, 0.3, 0.2, Vector::Zero(6), Vector::Zero(3));
  CHECK(c0 == doctest::Approx(2.0 * y.squaredNorm()).epsilon(1e-14));
}

TEST_CASE("a huge self-representation penalty removes the second block") {
  Rng rng(72);
  Matrix X = testsup::random_matrix(rng, 4, 6);
  Matrix Y = testsup::random_matrix(rng, 4, 3);
  Vector y = testsup::random_vector(rng, 4);
  const double lambda = 0.1;
  auto sol = crc::pprocrc_solve(X, Y, y, lambda, 1e8);
  REQUIRE(sol.beta.has_value());
  CHECK(sol.beta->norm() <= 1e-6);
  // α limits to the solution of (2XᵀX + λI)α = Xᵀy.
  Matrix system = 2.0 * X.transpose() * X + lambda * Matrix::Identity(6, 6);
  Vector limit = system.llt().solve(X.transpose() * y);
  CHECK((sol.alpha - limit).cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("coupled solve matches the descent oracle on the joint variable") {
  Rng rng(73);
  for (int trial = 0; trial < 3; ++trial) {
    const int d = 4, n = 6, q = 3;
    Matrix X = testsup::random_matrix(rng, d, n);
    Matrix Y = testsup::random_matrix(rng, d, q);
    Vector y = testsup::random_vector(rng, d);
    const double lambda = rng.uniform(0.05, 0.5);
    const double gamma = rng.uniform(0.05, 0.5);

    auto sol = crc::pprocrc_solve(X, Y, y, lambda, gamma);
    REQUIRE(sol.beta.has_value());
    auto value = [&](const Vector& z) {
      return crc::pprocrc_cost(X, Y, y, lambda, gamma, z.head(n), z.tail(q));
    };
    auto grad = [&](const Vector& z) {
      Vector g(n + q);
      g.head(n) =
          crc::pprocrc_grad_alpha(X, Y, y, lambda, z.head(n), z.tail(q));
      g.tail(q) = crc::pprocrc_grad_beta(X, Y, y, gamma, z.head(n), z.tail(q));
      return g;
    };
    auto oracle = testsup::oracle_descent_solve(value, grad, Vector::Zero(n + q));
    REQUIRE(oracle.converged);
    CHECK((sol.alpha - oracle.x.head(n)).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((*sol.beta - oracle.x.tail(q)).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("coupled solve agrees with an independently assembled block system") {
  Rng rng(74);
  for (int trial = 0; trial < 3; ++trial) {
    const int d = 5, n = 7, q = 4;
    Matrix X = testsup::random_matrix(rng, d, n);
    Matrix Y = testsup::random_matrix(rng, d, q);
    Vector y = testsup::random_vector(rng, d);
    const double lambda = 0.2, gamma = 0.3;

    auto sol = crc::pprocrc_solve(X, Y, y, lambda, gamma);
    REQUIRE(sol.beta.has_value());

    Matrix S(n + q, n + q);
    S.topLeftCorner(n, n) = 2.0 * X.transpose() * X;
    S.topLeftCorner(n, n).diagonal().array() += lambda;
    S.topRightCorner(n, q) = -X.transpose() * Y;
    S.bottomLeftCorner(q, n) = -Y.transpose() * X;
    S.bottomRightCorner(q, q) = 2.0 * Y.transpose() * Y;
    S.bottomRightCorner(q, q).diagonal().array() += gamma;
    Vector rhs(n + q);
    rhs.head(n) = X.transpose() * y;
    rhs.tail(q) = Y.transpose() * y;
    Vector z = S.ldlt().solve(rhs);

    CHECK((sol.alpha - z.head(n)).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((*sol.beta - z.tail(q)).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("the batched coupled solver reproduces the one-shot solver") {
  Rng rng(75);
  const int d = 6, n = 10, q = 4;
  Matrix X = testsup::random_matrix(rng, d, n);
  Matrix Y = testsup::random_matrix(rng, d, q);
  crc::PairedBatchSolver batch(X, 0.15, 0.25);
  auto solutions = batch.solve_image(Y);
  REQUIRE(solutions.size() == static_cast<std::size_t>(q));
  for (int i = 0; i < q; ++i) {
    auto direct = crc::pprocrc_solve(X, Y, Y.col(i), 0.15, 0.25);
    REQUIRE(solutions[i].beta.has_value());
    CHECK((solutions[i].alpha - direct.alpha).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((*solutions[i].beta - *direct.beta).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("coupled solve requires strictly positive regularizers") {
  Matrix X = Matrix::Identity(2, 2);
  Vector y(2);
  y << 1.0, 0.0;
  CHECK_THROWS_AS((void)crc::pprocrc_solve(X, X, y, 0.0, 1.0), Error);
  CHECK_THROWS_AS((void)crc::pprocrc_solve(X, X, y, 1.0, 0.0), Error);
  Matrix Y3 = Matrix::Identity(3, 3);
  CHECK_THROWS_WITH_AS((void)crc::pprocrc_solve(X, Y3, y, 1.0, 1.0),
                       doctest::Contains("feature dimension"), Error);
}

// --- gradients and local optimality -----------------------------------------

TEST_CASE("analytic gradients match central finite differences") {
  Rng rng(76);
  const int d = 5, n = 8, c = 2;
  auto dict = testsup::random_dictionary(rng, d, n, c);
  auto cov = crc::build_covariance(dict, 0.4);
  Vector y = testsup::random_vector(rng, d);
  const Matrix& x = dict.data();
  const auto& part = dict.partition();
  const double lambda = 0.2, gamma = 0.3, tau = 0.4;
  Vector w(2);
  w << 0.6, 0.4;
  KernelSpec rbf;
  rbf.kind = KernelSpec::Kind::Rbf;
  rbf.sigma = 1.1;
  Matrix gram = crc::kcrc_gram(dict, rbf);
  Vector k_y = crc::kcrc_vector(dict, rbf, y);
  const double k_yy = crc::kernel_eval(rbf, y, y);

  for (int trial = 0; trial < 20; ++trial) {
    Vector a = testsup::random_vector(rng, n);
    auto check_pair = [&](double, const Vector& analytic,
                          const std::function<double(const Vector&)>& value) {
      Vector fd = testsup::finite_difference_grad(value, a);
      CHECK((analytic - fd).norm() <= 1e-5 * (1.0 + analytic.norm()));
    };

    check_pair(0.0, crc::crc_grad(x, y, lambda, a), [&](const Vector& v) {
      return crc::crc_cost(x, y, lambda, v);
    });
    check_pair(0.0, crc::ecrc_grad(x, cov, y, lambda, a), [&](const Vector& v) {
      return crc::ecrc_cost(x, cov, y, lambda, v);
    });
    check_pair(0.0, crc::procrc_grad(x, part, y, lambda, gamma, a),
               [&](const Vector& v) {
                 return crc::procrc_cost(x, part, y, lambda, gamma, v);
               });
    check_pair(0.0, crc::rcrc_grad_alpha(x, part, y, lambda, tau, w, a),
               [&](const Vector& v) {
                 return crc::rcrc_cost(x, part, y, lambda, tau, 0.1, w, v);
               });
    check_pair(0.0, crc::kcrc_grad(gram, k_y, lambda, a), [&](const Vector& v) {
      return crc::kcrc_cost(gram, k_y, k_yy, lambda, v);
    });

    Vector priors(2);
    priors << 1.4, 0.6;
    check_pair(0.0, crc::eprocrc_grad(x, part, y, lambda, gamma, priors, a),
               [&](const Vector& v) {
                 return crc::eprocrc_cost(x, part, y, lambda, gamma, priors, v);
               });
  }
}

TEST_CASE("location-coupled and coupled gradients match finite differences") {
  Rng rng(78);
  const int d = 4, n = 6, q = 3;
  Matrix M = testsup::random_matrix(rng, d, n);
  Matrix X = testsup::random_matrix(rng, d, n);
  Matrix Y = testsup::random_matrix(rng, d, q);
  Vector y = testsup::random_vector(rng, d);
  const double lambda = 0.2, gamma = 0.3;

  for (int trial = 0; trial < 20; ++trial) {
    Vector p = testsup::random_vector(rng, n);
    Vector ga = crc::gpcrc_grad(M, 2, 2, y, lambda, gamma, p);
    Vector gfd = testsup::finite_difference_grad(
        [&](const Vector& v) {
          return crc::gpcrc_cost(M, 2, 2, y, lambda, gamma, v);
        },
        p);
    CHECK((ga - gfd).norm() <= 1e-5 * (1.0 + ga.norm()));

    Vector a = testsup::random_vector(rng, n);
    Vector b = testsup::random_vector(rng, q);
    Vector jga = crc::pprocrc_grad_alpha(X, Y, y, lambda, a, b);
    Vector jgb = crc::pprocrc_grad_beta(X, Y, y, gamma, a, b);
    Vector jfa = testsup::finite_difference_grad(
        [&](const Vector& v) {
          return crc::pprocrc_cost(X, Y, y, lambda, gamma, v, b);
        },
        a);
    Vector jfb = testsup::finite_difference_grad(
        [&](const Vector& v) {
          return crc::pprocrc_cost(X, Y, y, lambda, gamma, a, v);
        },
        b);
    CHECK((jga - jfa).norm() <= 1e-5 * (1.0 + jga.norm()));
    CHECK((jgb - jfb).norm() <= 1e-5 * (1.0 + jgb.norm()));
  }
}

TEST_CASE("closed-form solutions are local minima along random directions") {
  Rng rng(77);
  const int d = 5, n = 8;
  auto dict = testsup::random_dictionary(rng, d, n, 2);
  Vector y = testsup::random_vector(rng, d);
  const Matrix& x = dict.data();
  const auto& part = dict.partition();
  const double lambda = 0.2, gamma = 0.3, eps = 1e-3;

  auto probe = [&](const Vector& at,
                   const std::function<double(const Vector&)>& value) {
    const double f0 = value(at);
    for (int k = 0; k < 8; ++k) {
      Vector dir = rng.gaussian_vector(static_cast<int>(at.size()));
      dir /= dir.norm();
      CHECK(value(at + eps * dir) >= f0 - 1e-12 * (1.0 + std::abs(f0)));
    }
  };

  probe(crc::crc_solve(dict, y, lambda).alpha,
        [&](const Vector& v) { return crc::crc_cost(x, y, lambda, v); });
  probe(crc::procrc_solve(dict, y, lambda, gamma).alpha, [&](const Vector& v) {
    return crc::procrc_cost(x, part, y, lambda, gamma, v);
  });

  Matrix Y = testsup::random_matrix(rng, d, 3);
  auto coupled = crc::pprocrc_solve(x, Y, y, lambda, gamma);
  REQUIRE(coupled.beta.has_value());
  Vector joint(n + 3);
  joint.head(n) = coupled.alpha;
  joint.tail(3) = *coupled.beta;
  probe(joint, [&](const Vector& z) {
    return crc::pprocrc_cost(x, Y, y, lambda, gamma, z.head(n), z.tail(3));
  });
}

TEST_CASE("solver configuration validation rejects bad values") {
  crc::SolverConfig config;
  CHECK_NOTHROW(config.validate());
  config.lambda = -1.0;
  CHECK_THROWS_AS(config.validate(), Error);
  config.lambda = 1e-3;
  config.tolerance = 0.0;
  CHECK_THROWS_AS(config.validate(), Error);
  config.tolerance = 1e-10;
  config.max_iters = 0;
  CHECK_THROWS_AS(config.validate(), Error);
}

}  // TEST_SUITE
