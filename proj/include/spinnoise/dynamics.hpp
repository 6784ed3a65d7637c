// Spin-exchange master equation for an alkali ground state: nonlinear
// evolution, linearization about the unpolarized state, and eigenmode
// analysis of the resulting Liouvillian.
#pragma once

#include "spinnoise/atomic.hpp"

#include <span>
#include <vector>

namespace spinnoise {

struct SEParams {
  /// Spin-exchange rate Gamma in s^-1.
  double gamma_se = 0.0;
  /// Bare-electron Larmor frequency in rad/s; the field points along x.
  double omega_e = 0.0;

  /// Gamma = n sigma v.
  static SEParams from_collisions(double number_density_m3, double cross_section_m2,
                                  double relative_speed_m_s, double omega_e = 0.0);
  /// Zeeman frequency of either multiplet, omega_e / (2I + 1).
  double omega_0(const AtomSpec& atom) const { return omega_e / (2 * atom.nuclear_spin + 1); }
  void validate() const;
};

struct DensityMatrix {
  Matrix rho;

  static DensityMatrix thermal(int dim);
  /// exp(beta F_z) / Z.
  static DensityMatrix spin_temperature(const SpinOperatorSet& ops, double beta);

  /// Throws std::invalid_argument when rho is not Hermitian, not unit-trace,
  /// or has an eigenvalue below -1e-10.
  void validate(double tol = 1e-12) const;
};

/// phi = rho/4 + S.rho S, the purely nuclear part of rho.
Matrix nuclear_part(const Matrix& rho, const SpinOperatorSet& ops);

/// Gamma [phi (1 + 4 <S>.S) - rho] with <S> = Tr(S rho).
Matrix se_term(const Matrix& rho, const SpinOperatorSet& ops, double gamma_se);

/// Full nonlinear right-hand side; hyperfine splitting enters as 2 pi W.
Matrix master_rhs(const Matrix& rho, const SpinOperatorSet& ops, const SEParams& params);

struct Trajectory {
  std::vector<double> times;
  std::vector<Matrix> states;
};

/// Fixed-step RK4 of the nonlinear master equation. Requires
/// dt <= 0.05 / max(2 pi W, omega_e, Gamma). Every `store_every`-th step (and
/// the final state) is stored.
Trajectory evolve_nonlinear(const DensityMatrix& rho0, const SEParams& params,
                            const SpinOperatorSet& ops, double t_final, double dt,
                            int store_every = 1);

/// Linear generator acting on column-stacked deviations d rho from 1/d.
struct Liouvillian {
  int dim = 0;  // d; matrices are d^2 x d^2
  Matrix hyperfine;
  Matrix zeeman;
  Matrix se;

  Matrix total() const { return hyperfine + zeeman + se; }
  Matrix apply(const Matrix& drho) const;
};

Liouvillian build_linearized_liouvillian(const SEParams& params, const SpinOperatorSet& ops);

/// Max over the given deviations of |L(d) - [RHS(rho0 + d) - RHS(rho0)]| / |L(d)|.
double linearization_mismatch(const Liouvillian& liouvillian, const SEParams& params,
                              const SpinOperatorSet& ops, std::span<const Matrix> deviations);

Matrix vectorize_to_matrix(const Vector& v, int dim);
Vector vectorize(const Matrix& m);

struct Eigenmode {
  Complex eigenvalue;
  Matrix mode;  // d x d, unit Frobenius norm
};

/// Dense eigendecomposition, sorted by |Re lambda| ascending.
std::vector<Eigenmode> liouvillian_eigenmodes(const Liouvillian& liouvillian);

/// |Tr(O^dagger m)| / |O|.
double mode_overlap(const Matrix& observable, const Matrix& mode);

/// Rows indexed by observable, columns by time: Tr(O exp(L t) d rho0).
std::vector<std::vector<double>> observable_trajectories(const Liouvillian& liouvillian,
                                                         const Matrix& drho0,
                                                         std::span<const Matrix> observables,
                                                         std::span<const double> times);

struct ExponentialFit {
  std::vector<double> rates;       // decay rates, ascending
  std::vector<double> amplitudes;  // matching amplitudes
  double residual_rms = 0.0;       // relative to max |y|
  bool flagged = false;            // residual above threshold
};

/// Least-squares fit of y(t) = sum_k A_k exp(-r_k t) with one or two terms.
ExponentialFit extract_rates(std::span<const double> times, std::span<const double> values,
                             int terms = 1, double residual_threshold = 1e-6);

struct RateSet {
  double gamma_a = 0.0;
  double gamma_b = 0.0;
  double gamma_plus = 0.0;
  double gamma_minus = 0.0;
};

struct ZeroFieldAnalysis {
  double gamma_plus = 0.0;
  double gamma_minus = 0.0;
  /// Distinct real parts (as positive rates) of all modes overlapping
  /// F_za or F_zb, ascending.
  std::vector<double> sector_rates;
};

/// Zero-field (omega_e = 0) eigen-rates of the F_z sector.
ZeroFieldAnalysis zero_field_rates(const SEParams& params, const SpinOperatorSet& ops);

struct TransverseMode {
  double rate = 0.0;       // -Re lambda
  double frequency = 0.0;  // signed Im lambda of the co-rotating component
};

struct WeakCouplingAnalysis {
  TransverseMode a;
  TransverseMode b;
  /// Every mode whose overlap with F_z or F_y exceeds the threshold.
  std::vector<Complex> overlapping_eigenvalues;
};

/// Transverse (F_z, F_y with the field along x) eigenmodes in a dc field.
/// For each multiplet the mode dominating the overlap with the circular
/// component F_zF + i F_yF is selected.
WeakCouplingAnalysis weak_coupling_rates(const SEParams& params, const SpinOperatorSet& ops);

struct EigenobservableDirections {
  /// Coefficients (c_a, c_b), unit norm, of c_a F_za + c_b F_zb.
  Eigen::Vector2d slow;
  Eigen::Vector2d fast;
  double slow_rate = 0.0;
  double fast_rate = 0.0;
};

/// Left eigenvectors of the 2x2 propagator of (<F_za>, <F_zb>) obtained from
/// two independent initial deviations evolved to `time`.
EigenobservableDirections zero_field_eigenobservables(const SEParams& params,
                                                      const SpinOperatorSet& ops, double time);

/// Ratio 2 pi W / Gamma and omega_0 / Gamma used when extracting rates.
struct RateRegime {
  double hyperfine_over_gamma = 1e8;
  double larmor_over_gamma = 100.0;
};

/// Full rate table for a given Gamma: transverse weak-coupling rates and
/// zero-field rates, each from the Liouvillian eigenanalysis.
RateSet compute_rate_set(double gamma_se, double nuclear_spin, RateRegime regime = {});

struct SpinTemperatureFit {
  double beta = 0.0;
  double distance = 0.0;  // Frobenius distance to exp(beta F_z)/Z
};

/// Least-squares projection of rho onto the spin-temperature family.
SpinTemperatureFit fit_spin_temperature(const Matrix& rho, const SpinOperatorSet& ops);

}  // namespace spinnoise
