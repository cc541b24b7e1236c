#include <doctest.h>

#include <algorithm>
#include <vector>

#include "crc/dictionary.hpp"
#include "crc/rng.hpp"
#include "support.hpp"

using crc::Error;
using crc::Matrix;
using crc::NormMode;
using crc::Rng;
using crc::Vector;

TEST_SUITE("dictionary") {

TEST_CASE("identity features with one column per class pass through unchanged") {
  Matrix x = Matrix::Identity(2, 2);
  auto dict = crc::build_dictionary(x, {0, 1});
  CHECK(dict.dim() == 2);
  CHECK(dict.count() == 2);
  CHECK(dict.num_classes() == 2);
  CHECK(dict.class_count(0) == 1);
  CHECK(dict.class_count(1) == 1);
  CHECK((dict.data() - Matrix::Identity(2, 2)).norm() == 0.0);
  CHECK(dict.labels() == std::vector<int>{0, 1});
}

TEST_CASE("unit normalization scales a 3-4-5 column to 0.6-0.8") {
  Matrix x(2, 1);
  x << 3.0, 4.0;
  auto dict = crc::build_dictionary(x, {0});
  CHECK(dict.data()(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(dict.data()(1, 0) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(dict.data().col(0).norm() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("normalization is idempotent") {
  Rng rng(11);
  Matrix x = testsup::random_matrix(rng, 6, 9);
  Matrix once = crc::normalize_columns(x, NormMode::UnitL2);
  Matrix twice = crc::normalize_columns(once, NormMode::UnitL2);
  // A unit column divided by its own norm must be bit-identical.
  CHECK((once.array() == twice.array()).all());
}

TEST_CASE("norm mode none keeps columns untouched") {
  Rng rng(12);
  Matrix x = testsup::random_matrix(rng, 4, 5);
  auto dict = crc::build_dictionary(x, {0, 1, 0, 1, 0}, NormMode::None);
  // class-sorted order: original columns 0,2,4 then 1,3
  CHECK((dict.data().col(0).array() == x.col(0).array()).all());
  CHECK((dict.data().col(3).array() == x.col(1).array()).all());
}

TEST_CASE("columns are class-sorted with stable order and provenance") {
  Rng rng(13);
  Matrix x = testsup::random_matrix(rng, 5, 6);
  std::vector<int> labels = {2, 0, 1, 0, 2, 1};
  auto dict = crc::build_dictionary(x, labels, NormMode::None);
  CHECK(dict.source_index() == std::vector<int>{1, 3, 2, 5, 0, 4});
  for (int t = 0; t < dict.count(); ++t) {
    const int s = dict.source_index()[t];
    CHECK(dict.labels()[t] == labels[s]);
    CHECK((dict.data().col(t).array() == x.col(s).array()).all());
  }
  CHECK(std::is_sorted(dict.labels().begin(), dict.labels().end()));
}

TEST_CASE("class blocks tile the stored matrix in order") {
  Rng rng(14);
  auto dict = testsup::random_dictionary(rng, 7, 12, 3);
  int col = 0;
  for (int i = 0; i < dict.num_classes(); ++i) {
    Matrix block = crc::class_submatrix(dict, i);
    CHECK(block.cols() == dict.class_count(i));
    for (int j = 0; j < block.cols(); ++j, ++col) {
      CHECK((block.col(j).array() == dict.data().col(col).array()).all());
      CHECK(dict.labels()[col] == i);
    }
  }
  CHECK(col == dict.count());
  CHECK_THROWS_AS((void)crc::class_submatrix(dict, 3), Error);
  CHECK_THROWS_AS((void)crc::class_submatrix(dict, -1), Error);
}

TEST_CASE("per-class content is invariant to input column order") {
  Rng rng(15);
  Matrix x = testsup::random_matrix(rng, 6, 8);
  std::vector<int> labels = {0, 1, 2, 0, 1, 2, 0, 1};
  auto dict1 = crc::build_dictionary(x, labels);

  // Feed the same columns in a shuffled order.
  std::vector<int> perm = {5, 2, 7, 0, 3, 6, 1, 4};
  Matrix xs(6, 8);
  std::vector<int> ls(8);
  for (int j = 0; j < 8; ++j) {
    xs.col(j) = x.col(perm[j]);
    ls[j] = labels[perm[j]];
  }
  auto dict2 = crc::build_dictionary(xs, ls);

  for (int i = 0; i < 3; ++i) {
    Matrix a = crc::class_submatrix(dict1, i);
    Matrix b = crc::class_submatrix(dict2, i);
    REQUIRE(a.cols() == b.cols());
    // Same column multiset per class: sort columns by a stable key and compare.
    auto sorted_cols = [](Matrix m) {
      std::vector<int> idx(static_cast<int>(m.cols()));
      for (size_t k = 0; k < idx.size(); ++k) idx[k] = static_cast<int>(k);
      std::sort(idx.begin(), idx.end(), [&](int p, int q) {
        for (int r = 0; r < m.rows(); ++r) {
          if (m(r, p) != m(r, q)) return m(r, p) < m(r, q);
        }
        return false;
      });
      Matrix out(m.rows(), m.cols());
      for (size_t k = 0; k < idx.size(); ++k) out.col(k) = m.col(idx[k]);
      return out;
    };
    CHECK((sorted_cols(a) - sorted_cols(b)).norm() == 0.0);
  }
}

TEST_CASE("gram matrix equals the direct product") {
  Rng rng(16);
  auto dict = testsup::random_dictionary(rng, 8, 12, 3);
  Matrix direct = dict.data().transpose() * dict.data();
  CHECK((dict.gram() - direct).norm() <= 1e-12 * (1.0 + direct.norm()));
  CHECK((dict.gram() - dict.gram().transpose()).norm() == 0.0);
}

TEST_CASE("ridge gram factorization solves to working precision") {
  Rng rng(17);
  auto dict = testsup::random_dictionary(rng, 6, 10, 2);
  const double lambda = 0.05;
  Vector rhs = testsup::random_vector(rng, 10);
  Vector z = dict.gram_solve(lambda, rhs);
  Matrix system = dict.gram() + lambda * Matrix::Identity(10, 10);
  CHECK((system * z - rhs).norm() <= 1e-9 * rhs.norm());

  // The factorization cache returns the same object for a repeated lambda.
  auto f1 = dict.gram_factorization(lambda);
  auto f2 = dict.gram_factorization(lambda);
  CHECK(f1.get() == f2.get());
}

TEST_CASE("gram factorization rejects a non-positive ridge") {
  Rng rng(18);
  auto dict = testsup::random_dictionary(rng, 4, 6, 2);
  CHECK_THROWS_AS((void)dict.gram_factorization(0.0), Error);
  CHECK_THROWS_AS((void)dict.gram_factorization(-1.0), Error);
}

TEST_CASE("construction rejects malformed inputs") {
  Matrix x = Matrix::Identity(3, 3);
  CHECK_THROWS_WITH_AS(crc::build_dictionary(x, {0, 1}), doctest::Contains("label"),
                       Error);
  CHECK_THROWS_WITH_AS(crc::build_dictionary(x, {0, -1, 1}),
                       doctest::Contains(">= 0"), Error);
  // A gap in the label range leaves class 1 empty.
  CHECK_THROWS_WITH_AS(crc::build_dictionary(x, {0, 2, 2}),
                       doctest::Contains("no samples"), Error);
  CHECK_THROWS_AS(crc::build_dictionary(Matrix(), {}), Error);

  Matrix with_zero = Matrix::Identity(3, 3);
  with_zero.col(1).setZero();
  CHECK_THROWS_WITH_AS(crc::build_dictionary(with_zero, {0, 1, 2}),
                       doctest::Contains("zero norm"), Error);
  // The same matrix is accepted when normalization is off.
  CHECK_NOTHROW(crc::build_dictionary(with_zero, {0, 1, 2}, NormMode::None));
}

TEST_CASE("sample covariance of two opposite unit columns plus ridge") {
  Matrix x(2, 2);
  x << 1.0, -1.0, 0.0, 0.0;
  auto dict = crc::build_dictionary(x, {0, 1});
  auto cov = crc::build_covariance(dict, 0.5);
  Matrix expected(2, 2);
  expected << 2.5, 0.0, 0.0, 0.5;
  CHECK((cov.R - expected).norm() <= 1e-15);
  CHECK_FALSE(cov.is_identity);

  // R is diagonal, so the solve is exact division.
  Vector v(2);
  v << 5.0, 1.0;
  Vector solved = cov.solve(v);
  CHECK(solved[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(solved[1] == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("covariance without a ridge fails on rank-deficient data") {
  Matrix x(2, 2);
  x << 1.0, -1.0, 0.0, 0.0;
  auto dict = crc::build_dictionary(x, {0, 1});
  CHECK_THROWS_WITH_AS((void)crc::build_covariance(dict, 0.0),
                       doctest::Contains("pivot"), Error);
}

TEST_CASE("default covariance ridge keeps random data positive definite") {
  Rng rng(19);
  // Fewer samples than dimensions: the raw sample covariance is singular.
  auto dict = testsup::random_dictionary(rng, 12, 6, 2);
  auto cov = crc::build_covariance(dict);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov.R);
  CHECK(eig.eigenvalues().minCoeff() > 0.0);

  Vector v = testsup::random_vector(rng, 12);
  Vector solved = cov.solve(v);
  CHECK((cov.R * solved - v).norm() <= 1e-9 * v.norm());
}

TEST_CASE("covariance requires at least two samples") {
  Matrix x(2, 1);
  x << 1.0, 0.0;
  auto dict = crc::build_dictionary(x, {0});
  CHECK_THROWS_WITH_AS((void)crc::build_covariance(dict),
                       doctest::Contains("at least 2"), Error);
}

TEST_CASE("identity covariance solves are the identity map") {
  auto cov = crc::identity_covariance(3);
  CHECK(cov.is_identity);
  Vector v(3);
  v << 1.0, -2.0, 3.0;
  CHECK((cov.solve(v) - v).norm() == 0.0);
  Matrix m = Matrix::Random(3, 4);
  CHECK((cov.solve(m) - m).norm() == 0.0);
  CHECK_THROWS_AS((void)crc::identity_covariance(0), Error);
}

TEST_CASE("partition bookkeeping matches hand counts") {
  auto part = crc::make_partition({0, 0, 1, 2, 2, 2});
  CHECK(part.num_classes() == 3);
  CHECK(part.total() == 6);
  CHECK(part.offsets == std::vector<int>{0, 2, 3});
  CHECK(part.counts == std::vector<int>{2, 1, 3});
  CHECK_THROWS_AS(part.check_class(3), Error);
}

}  // TEST_SUITE
