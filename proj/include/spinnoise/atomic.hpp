// Angular-momentum operator algebra for a single alkali atom in its ground
// electronic state: electron spin 1/2 coupled to nuclear spin I.
#pragma once

#include <Eigen/Dense>

#include <complex>
#include <optional>
#include <string>

namespace spinnoise {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

struct AtomSpec {
  double nuclear_spin = 1.5;
  /// Ground-state hyperfine splitting in Hz (not angular).
  double hyperfine_splitting_hz = 6.834682611e9;
  std::string isotope_label = "87Rb";

  static AtomSpec rb87() { return {}; }

  /// Throws std::invalid_argument unless 2I is a positive integer and W > 0.
  void validate() const;
  int twice_nuclear_spin() const;
  int dimension() const { return 2 * (twice_nuclear_spin() + 1); }
  double upper_f() const { return nuclear_spin + 0.5; }
  double lower_f() const { return nuclear_spin - 0.5; }
};

/// Dense operators on the (2I+1)*2 dimensional ground manifold, written in the
/// coupled basis |F, m_F> with the upper multiplet a = I+1/2 first and m_F
/// descending inside each block.
struct SpinOperatorSet {
  AtomSpec atom;
  int dim = 0;

  Matrix Ix, Iy, Iz;
  Matrix Sx, Sy, Sz;
  Matrix Fx, Fy, Fz;
  Matrix IdotS;
  Matrix Pa, Pb;
  Matrix Fza, Fzb;
  Matrix Fya, Fyb;
  // Eigenobservable combinations; only defined for I = 3/2.
  std::optional<Matrix> Fz_plus, Fz_minus;

  /// Columns are the coupled states expanded in the product basis
  /// |m_I, m_S> (m_I descending, then m_S descending).
  Matrix coupled_basis;

  Matrix identity() const { return Matrix::Identity(dim, dim); }
  int upper_block_size() const { return static_cast<int>(2 * atom.upper_f() + 1); }
};

SpinOperatorSet build_operators(const AtomSpec& atom);

/// Spin matrices (Jx, Jy, Jz) of a single angular momentum j in the |j, m>
/// basis with m descending.
struct AngularMomentum {
  Matrix x, y, z, raise, lower;
};
AngularMomentum spin_matrices(double j);

bool is_hermitian(const Matrix& m, double tol = 1e-12);

/// Tr(rho0 O^2) - Tr(rho0 O)^2 with rho0 = 1/d.
double thermal_variance(const SpinOperatorSet& ops, const Matrix& observable);

/// Symmetrized covariance 1/2 Tr(rho0 {A,B}) - Tr(rho0 A) Tr(rho0 B).
double thermal_covariance(const SpinOperatorSet& ops, const Matrix& a, const Matrix& b);

/// Closed form (2F+1)/(2(2I+1)) * F(F+1)/3 for the variance of F_z restricted
/// to multiplet F.
double multiplet_variance(double nuclear_spin, double f);

}  // namespace spinnoise
