#include <spinnoise/atomic.hpp>

#include <doctest.h>

#include <cmath>
#include <stdexcept>

using namespace spinnoise;

namespace {

Matrix commutator(const Matrix& a, const Matrix& b) { return a * b - b * a; }

// Sum of m^2 over one multiplet divided by the full dimension.
double counted_variance(double f, int dim) {
  double sum = 0.0;
  for (double m = -f; m <= f + 1e-9; m += 1.0) sum += m * m;
  return sum / dim;
}

}  // namespace

TEST_CASE("thermal multiplet variances match direct state counting") {
  const auto ops = build_operators(AtomSpec::rb87());
  REQUIRE(ops.dim == 8);
  CHECK(std::abs(thermal_variance(ops, ops.Fza) - 1.25) < 1e-12);
  CHECK(std::abs(thermal_variance(ops, ops.Fzb) - 0.25) < 1e-12);
  CHECK(std::abs(thermal_variance(ops, ops.Fz) - 1.5) < 1e-12);
  CHECK(std::abs(thermal_covariance(ops, ops.Fza, ops.Fzb)) < 1e-14);
}

TEST_CASE("closed-form multiplet variance agrees with counting for several spins") {
  for (double spin : {0.5, 1.0, 1.5, 2.5, 3.5}) {
    AtomSpec atom;
    atom.nuclear_spin = spin;
    const auto ops = build_operators(atom);
    CAPTURE(spin);
    CHECK(std::abs(multiplet_variance(spin, spin + 0.5) - counted_variance(spin + 0.5, ops.dim)) <
          1e-14);
    CHECK(std::abs(multiplet_variance(spin, spin - 0.5) - counted_variance(spin - 0.5, ops.dim)) <
          1e-14);
    CHECK(std::abs(thermal_variance(ops, ops.Fza) - multiplet_variance(spin, spin + 0.5)) < 1e-12);
  }
}

TEST_CASE("eigenobservable variances are 1/24 and 5/24 and uncorrelated") {
  const auto ops = build_operators(AtomSpec::rb87());
  REQUIRE(ops.Fz_plus.has_value());
  REQUIRE(ops.Fz_minus.has_value());
  CHECK(std::abs(thermal_variance(ops, *ops.Fz_plus) - 1.0 / 24.0) < 1e-14);
  CHECK(std::abs(thermal_variance(ops, *ops.Fz_minus) - 5.0 / 24.0) < 1e-14);
  CHECK(std::abs(thermal_covariance(ops, *ops.Fz_plus, *ops.Fz_minus)) < 1e-14);
}

TEST_CASE("angular momentum algebra holds in the product space") {
  AtomSpec atom;
  atom.nuclear_spin = 2.5;
  const auto ops = build_operators(atom);
  const Complex i(0.0, 1.0);
  CHECK((commutator(ops.Fx, ops.Fy) - i * ops.Fz).norm() < 1e-12);
  CHECK((commutator(ops.Sy, ops.Sz) - i * ops.Sx).norm() < 1e-12);
  CHECK((commutator(ops.Iz, ops.Ix) - i * ops.Iy).norm() < 1e-12);
  CHECK(commutator(ops.Ix, ops.Sx).norm() < 1e-12);
  CHECK((ops.Pa + ops.Pb - ops.identity()).norm() < 1e-12);
  CHECK((ops.Pa * ops.Pa - ops.Pa).norm() < 1e-12);
  for (const Matrix* m : {&ops.Fx, &ops.Fy, &ops.Fz, &ops.IdotS, &ops.Fza, &ops.Fya}) {
    CHECK(is_hermitian(*m));
  }
}

TEST_CASE("I.S is diagonal in the coupled basis with eigenvalues I/2 and -(I+1)/2") {
  const auto ops = build_operators(AtomSpec::rb87());
  const Matrix expected_a = 0.75 * ops.Pa;
  const Matrix expected_b = -1.25 * ops.Pb;
  CHECK((ops.IdotS - expected_a - expected_b).norm() < 1e-12);
  CHECK(ops.upper_block_size() == 5);
}

TEST_CASE("coupled basis is orthonormal") {
  const auto ops = build_operators(AtomSpec::rb87());
  const Matrix gram = ops.coupled_basis.adjoint() * ops.coupled_basis;
  CHECK((gram - ops.identity()).norm() < 1e-12);
}

TEST_CASE("spin matrices satisfy J^2 = j(j+1)") {
  for (double j : {0.5, 1.0, 1.5, 4.0}) {
    const auto s = spin_matrices(j);
    const Matrix j2 = s.x * s.x + s.y * s.y + s.z * s.z;
    const auto n = static_cast<int>(2 * j + 1);
    CHECK((j2 - j * (j + 1) * Matrix::Identity(n, n)).norm() < 1e-12);
  }
}

TEST_CASE("invalid nuclear spins are rejected") {
  AtomSpec atom;
  atom.nuclear_spin = 0.3;
  CHECK_THROWS_AS(atom.validate(), std::invalid_argument);
  atom.nuclear_spin = 0.0;
  CHECK_THROWS_AS(build_operators(atom), std::invalid_argument);
  atom.nuclear_spin = 1.5;
  atom.hyperfine_splitting_hz = -1.0;
  CHECK_THROWS_AS(atom.validate(), std::invalid_argument);
}
