#include "spinnoise/atomic.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace spinnoise {

void AtomSpec::validate() const {
  const double twice = 2.0 * nuclear_spin;
  if (!(twice >= 1.0) || std::abs(twice - std::round(twice)) > 1e-12) {
    throw std::invalid_argument("nuclear spin must be a positive half-integer or integer, got " +
                                std::to_string(nuclear_spin));
  }
  if (!(hyperfine_splitting_hz > 0.0)) {
    throw std::invalid_argument("hyperfine splitting must be positive");
  }
}

int AtomSpec::twice_nuclear_spin() const {
  return static_cast<int>(std::lround(2.0 * nuclear_spin));
}

AngularMomentum spin_matrices(double j) {
  const int n = static_cast<int>(std::lround(2.0 * j)) + 1;
  AngularMomentum am;
  am.z = Matrix::Zero(n, n);
  am.raise = Matrix::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    const double m = j - k;
    am.z(k, k) = m;
    if (k > 0) {
      // <m+1| J+ |m>, row k-1 holds m+1
      am.raise(k - 1, k) = std::sqrt(j * (j + 1) - m * (m + 1));
    }
  }
  am.lower = am.raise.adjoint();
  am.x = 0.5 * (am.raise + am.lower);
  am.y = Complex(0.0, -0.5) * (am.raise - am.lower);
  return am;
}

namespace {

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

// Appends the ladder |F, F>, |F, F-1>, ..., |F, -F> generated from `top` by
// repeated application of the normalized lowering operator.
void append_ladder(Matrix& basis, int& column, Vector top, const Matrix& f_lower, double f) {
  const int count = static_cast<int>(std::lround(2.0 * f)) + 1;
  Vector state = std::move(top);
  for (int k = 0; k < count; ++k) {
    basis.col(column++) = state;
    const double m = f - k;
    if (k + 1 < count) {
      state = f_lower * state / std::sqrt(f * (f + 1) - m * (m - 1));
    }
  }
}

}  // namespace

SpinOperatorSet build_operators(const AtomSpec& atom) {
  atom.validate();
  const double nuclear = atom.nuclear_spin;
  const int n_nuc = atom.twice_nuclear_spin() + 1;
  const int dim = 2 * n_nuc;

  const AngularMomentum i_mat = spin_matrices(nuclear);
  const AngularMomentum s_mat = spin_matrices(0.5);
  const Matrix id_nuc = Matrix::Identity(n_nuc, n_nuc);
  const Matrix id_el = Matrix::Identity(2, 2);

  // Product basis |m_I, m_S>.
  const Matrix ix = kron(i_mat.x, id_el), iy = kron(i_mat.y, id_el), iz = kron(i_mat.z, id_el);
  const Matrix sx = kron(id_nuc, s_mat.x), sy = kron(id_nuc, s_mat.y), sz = kron(id_nuc, s_mat.z);
  const Matrix f_lower = kron(i_mat.lower, id_el) + kron(id_nuc, s_mat.lower);

  const double f_a = nuclear + 0.5;
  const double f_b = nuclear - 0.5;

  Matrix basis = Matrix::Zero(dim, dim);
  int column = 0;
  Vector top_a = Vector::Zero(dim);
  top_a(0) = 1.0;  // |m_I = I, m_S = +1/2>
  append_ladder(basis, column, top_a, f_lower, f_a);

  // |b, m = b> lives in the span of |I, -1/2> and |I-1, +1/2>; orthogonalize
  // against |a, m = b> keeping the |I, -1/2> coefficient positive.
  Vector top_b = Vector::Zero(dim);
  top_b(1) = 1.0;
  const Vector a_same_m = basis.col(1);
  top_b -= a_same_m * a_same_m.dot(top_b);
  top_b /= top_b.norm();
  append_ladder(basis, column, top_b, f_lower, f_b);

  const double ortho_error = (basis.adjoint() * basis - Matrix::Identity(dim, dim)).norm();
  if (ortho_error > 1e-12) {
    throw std::runtime_error("coupled basis failed orthonormality check: error " +
                             std::to_string(ortho_error));
  }

  auto to_coupled = [&basis](const Matrix& m) -> Matrix { return basis.adjoint() * m * basis; };

  SpinOperatorSet ops;
  ops.atom = atom;
  ops.dim = dim;
  ops.coupled_basis = basis;
  ops.Ix = to_coupled(ix);
  ops.Iy = to_coupled(iy);
  ops.Iz = to_coupled(iz);
  ops.Sx = to_coupled(sx);
  ops.Sy = to_coupled(sy);
  ops.Sz = to_coupled(sz);
  ops.Fx = ops.Ix + ops.Sx;
  ops.Fy = ops.Iy + ops.Sy;
  ops.Fz = ops.Iz + ops.Sz;
  ops.IdotS = ops.Ix * ops.Sx + ops.Iy * ops.Sy + ops.Iz * ops.Sz;

  // Multiplet projectors from the F^2 eigenspaces.
  const Matrix f_squared = ops.Fx * ops.Fx + ops.Fy * ops.Fy + ops.Fz * ops.Fz;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(f_squared);
  ops.Pa = Matrix::Zero(dim, dim);
  const double casimir_a = f_a * (f_a + 1);
  for (int k = 0; k < dim; ++k) {
    if (std::abs(solver.eigenvalues()(k) - casimir_a) < 1e-9) {
      const Vector v = solver.eigenvectors().col(k);
      ops.Pa += v * v.adjoint();
    }
  }
  ops.Pb = Matrix::Identity(dim, dim) - ops.Pa;

  ops.Fza = ops.Pa * ops.Fz * ops.Pa;
  ops.Fzb = ops.Pb * ops.Fz * ops.Pb;
  ops.Fya = ops.Pa * ops.Fy * ops.Pa;
  ops.Fyb = ops.Pb * ops.Fy * ops.Pb;

  if (atom.twice_nuclear_spin() == 3) {
    ops.Fz_plus = (ops.Fza + ops.Fzb) / 6.0;
    ops.Fz_minus = (-ops.Fza + 5.0 * ops.Fzb) / 6.0;
  }
  return ops;
}

bool is_hermitian(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.norm());
  return (m - m.adjoint()).norm() <= tol * scale;
}

namespace {

void check_observable(const SpinOperatorSet& ops, const Matrix& o) {
  if (o.rows() != ops.dim || o.cols() != ops.dim) {
    throw std::invalid_argument("observable dimension does not match the operator set");
  }
  if (!is_hermitian(o)) {
    throw std::invalid_argument("observable is not Hermitian");
  }
}

}  // namespace

double thermal_variance(const SpinOperatorSet& ops, const Matrix& observable) {
  check_observable(ops, observable);
  const double d = ops.dim;
  const double mean = observable.trace().real() / d;
  const double second = (observable * observable).trace().real() / d;
  return second - mean * mean;
}

double thermal_covariance(const SpinOperatorSet& ops, const Matrix& a, const Matrix& b) {
  check_observable(ops, a);
  check_observable(ops, b);
  const double d = ops.dim;
  const double sym = 0.5 * (a * b + b * a).trace().real() / d;
  return sym - (a.trace().real() / d) * (b.trace().real() / d);
}

double multiplet_variance(double nuclear_spin, double f) {
  return (2 * f + 1) / (2 * (2 * nuclear_spin + 1)) * f * (f + 1) / 3.0;
}

}  // namespace spinnoise
