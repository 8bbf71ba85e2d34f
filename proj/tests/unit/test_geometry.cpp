#include <doctest.h>

#include "lsedit/errors.hpp"
#include "lsedit/geometry.hpp"
#include "support.hpp"

using namespace lsedit;

namespace {

Direction dir(const std::string& name, const Vector& v) { return Direction::from_raw(name, v, 0.0, {}); }

std::vector<Direction> random_directions(int count, int d, std::uint64_t seed) {
  const Matrix m = testing::gaussian(d, count, seed);
  std::vector<Direction> out;
  for (int j = 0; j < count; ++j) out.push_back(dir("n" + std::to_string(j), m.col(j)));
  return out;
}

}  // namespace

TEST_CASE("hand case: (1,1)/sqrt2 against (1,0) gives (0,1)") {
  Vector a(2), b(2);
  a << 1, 1;
  b << 1, 0;
  const std::vector<Direction> basis_dirs{dir("x", b)};
  const auto basis = orthonormalize(basis_dirs, 2);
  const auto p = project_out(dir("t", a), basis);
  CHECK(std::abs(p.unit()[0]) < 1e-12);
  CHECK(p.unit()[1] == doctest::Approx(1.0));
  CHECK(residual_norm(dir("t", a), basis) == doctest::Approx(std::sqrt(0.5)));
  CHECK(format_provenance(p.provenance()) == "projected(x)");
}

TEST_CASE("projection agrees with the explicit projector") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto nuisance = random_directions(4, 12, seed);
    Matrix a(12, 4);
    for (int j = 0; j < 4; ++j) a.col(j) = nuisance[static_cast<std::size_t>(j)].unit();
    const Matrix projector = a * (a.transpose() * a).inverse() * a.transpose();
    const auto basis = orthonormalize(nuisance, 12);
    REQUIRE(basis.basis.size() == 4);

    const Vector raw = testing::gaussian(12, 1, seed + 100).col(0);
    const auto target = dir("t", raw);
    const Vector expected = (Matrix::Identity(12, 12) - projector) * target.unit();
    const auto p = project_out(target, basis);
    CHECK((p.unit() - expected.normalized()).norm() < 1e-10);
    CHECK(residual_norm(target, basis) == doctest::Approx(expected.norm()).epsilon(1e-10));
    CHECK(p.calibration() == doctest::Approx(target.calibration() * expected.norm()).epsilon(1e-10));
  }
}

TEST_CASE("basis is orthonormal and drops dependent inputs") {
  auto dirs = random_directions(3, 6, 7);
  const Vector combo = dirs[0].unit() + 2.0 * dirs[1].unit();
  dirs.push_back(dir("combo", combo));
  const auto basis = orthonormalize(dirs, 6);
  CHECK(basis.basis.size() == 3);
  CHECK(basis.dropped == std::vector<std::string>{"combo"});
  CHECK(basis.source_names.size() == 4);
  for (std::size_t i = 0; i < basis.basis.size(); ++i) {
    for (std::size_t j = 0; j < basis.basis.size(); ++j) {
      CHECK(std::abs(basis.basis[i].dot(basis.basis[j]) - (i == j ? 1.0 : 0.0)) < 1e-12);
    }
  }
}

TEST_CASE("projection is idempotent and orthogonal to the basis") {
  const auto nuisance = random_directions(5, 20, 21);
  const auto basis = orthonormalize(nuisance, 20);
  const auto p = project_out(dir("t", testing::gaussian(20, 1, 22).col(0)), basis);
  for (const auto& b : basis.basis) CHECK(std::abs(p.unit().dot(b)) < 1e-9);
  const auto twice = project_out(p, basis);
  CHECK((twice.unit() - p.unit()).norm() < 1e-9);
}

TEST_CASE("direction inside the span becomes degenerate") {
  const auto nuisance = random_directions(2, 5, 31);
  const auto basis = orthonormalize(nuisance, 5);
  const auto p = project_out(dir("t", nuisance[0].unit() - nuisance[1].unit()), basis);
  CHECK(p.degenerate());
}

TEST_CASE("dimension mismatch is rejected") {
  const auto nuisance = random_directions(2, 5, 41);
  CHECK_THROWS_AS(orthonormalize(nuisance, 4), ValidationError);
  const auto basis = orthonormalize(nuisance, 5);
  CHECK_THROWS_AS(project_out(dir("t", Vector::Ones(4)), basis), ValidationError);
}

TEST_CASE("projection never increases calibration") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto nuisance = random_directions(3, 8, seed + 50);
    const auto basis = orthonormalize(nuisance, 8);
    const auto t = Direction::from_raw("t", 3.0 * testing::gaussian(8, 1, seed + 80).col(0), 0, {});
    CHECK(project_out(t, basis).calibration() <= t.calibration());
  }
}
