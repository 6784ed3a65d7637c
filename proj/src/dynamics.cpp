#include "spinnoise/dynamics.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace spinnoise {

namespace {

constexpr Complex kMinusI{0.0, -1.0};

double hyperfine_angular(const AtomSpec& atom) {
  return 2.0 * std::numbers::pi * atom.hyperfine_splitting_hz;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

// Superoperator of X -> [H, X] under column stacking.
Matrix commutator_superop(const Matrix& h) {
  const Matrix id = Matrix::Identity(h.rows(), h.cols());
  return kron(id, h) - kron(h.transpose(), id);
}

}  // namespace

SEParams SEParams::from_collisions(double number_density_m3, double cross_section_m2,
                                   double relative_speed_m_s, double omega_e) {
  SEParams p;
  p.gamma_se = number_density_m3 * cross_section_m2 * relative_speed_m_s;
  p.omega_e = omega_e;
  p.validate();
  return p;
}

void SEParams::validate() const {
  if (!(gamma_se >= 0.0) || !std::isfinite(gamma_se)) {
    throw std::invalid_argument("spin-exchange rate must be finite and non-negative");
  }
  if (!std::isfinite(omega_e)) throw std::invalid_argument("Larmor frequency must be finite");
}

DensityMatrix DensityMatrix::thermal(int dim) {
  return {Matrix::Identity(dim, dim) / static_cast<double>(dim)};
}

DensityMatrix DensityMatrix::spin_temperature(const SpinOperatorSet& ops, double beta) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(ops.Fz);
  const Eigen::VectorXd weights = (beta * solver.eigenvalues().array()).exp();
  Matrix rho = solver.eigenvectors() * weights.cast<Complex>().asDiagonal() *
               solver.eigenvectors().adjoint();
  rho /= weights.sum();
  return {rho};
}

void DensityMatrix::validate(double tol) const {
  if (rho.rows() != rho.cols()) throw std::invalid_argument("density matrix is not square");
  if ((rho - rho.adjoint()).norm() > tol) {
    throw std::invalid_argument("density matrix is not Hermitian");
  }
  if (std::abs(rho.trace() - 1.0) > tol) {
    throw std::invalid_argument("density matrix trace differs from 1");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(rho, Eigen::EigenvaluesOnly);
  if (solver.eigenvalues().minCoeff() < -1e-10) {
    throw std::invalid_argument("density matrix has a negative eigenvalue");
  }
}

Matrix nuclear_part(const Matrix& rho, const SpinOperatorSet& ops) {
  return rho / 4.0 + ops.Sx * rho * ops.Sx + ops.Sy * rho * ops.Sy + ops.Sz * rho * ops.Sz;
}

Matrix se_term(const Matrix& rho, const SpinOperatorSet& ops, double gamma_se) {
  const Matrix phi = nuclear_part(rho, ops);
  const Complex sx = (ops.Sx * rho).trace();
  const Complex sy = (ops.Sy * rho).trace();
  const Complex sz = (ops.Sz * rho).trace();
  const Matrix polarization = ops.identity() + 4.0 * (sx * ops.Sx + sy * ops.Sy + sz * ops.Sz);
  return gamma_se * (phi * polarization - rho);
}

Matrix master_rhs(const Matrix& rho, const SpinOperatorSet& ops, const SEParams& params) {
  const double hf = hyperfine_angular(ops.atom) / (ops.atom.nuclear_spin + 0.5);
  Matrix out = (hf * kMinusI) * (ops.IdotS * rho - rho * ops.IdotS);
  if (params.omega_e != 0.0) {
    out += (params.omega_e * kMinusI) * (ops.Sx * rho - rho * ops.Sx);
  }
  if (params.gamma_se != 0.0) out += se_term(rho, ops, params.gamma_se);
  return out;
}

Trajectory evolve_nonlinear(const DensityMatrix& rho0, const SEParams& params,
                            const SpinOperatorSet& ops, double t_final, double dt,
                            int store_every) {
  params.validate();
  rho0.validate();
  const double fastest = std::max({hyperfine_angular(ops.atom), std::abs(params.omega_e),
                                   params.gamma_se});
  if (!(dt > 0.0) || dt > 0.05 / fastest * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "time step " << dt << " s exceeds the stability limit " << 0.05 / fastest << " s";
    throw std::invalid_argument(msg.str());
  }
  if (t_final < 0.0) throw std::invalid_argument("final time must be non-negative");
  if (store_every < 1) store_every = 1;

  const auto steps = static_cast<long>(std::ceil(t_final / dt - 1e-9));
  Trajectory traj;
  traj.times.push_back(0.0);
  traj.states.push_back(rho0.rho);

  Matrix rho = rho0.rho;
  for (long n = 1; n <= steps; ++n) {
    const double h = std::min(dt, t_final - (n - 1) * dt);
    const Matrix k1 = master_rhs(rho, ops, params);
    const Matrix k2 = master_rhs(rho + 0.5 * h * k1, ops, params);
    const Matrix k3 = master_rhs(rho + 0.5 * h * k2, ops, params);
    const Matrix k4 = master_rhs(rho + h * k3, ops, params);
    rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    rho = 0.5 * (rho + rho.adjoint()).eval();

    const double drift = std::abs(rho.trace() - 1.0);
    if (drift > 1e-8) {
      std::ostringstream msg;
      msg << "trace drift " << drift << " at t = " << n * dt << " s (step " << n << ")";
      throw std::runtime_error(msg.str());
    }
    if (n % store_every == 0 || n == steps) {
      DensityMatrix{rho}.validate(1e-10);
      traj.times.push_back(std::min(n * dt, t_final));
      traj.states.push_back(rho);
    }
  }
  return traj;
}

Vector vectorize(const Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

Matrix vectorize_to_matrix(const Vector& v, int dim) {
  return Eigen::Map<const Matrix>(v.data(), dim, dim);
}

Matrix Liouvillian::apply(const Matrix& drho) const {
  return vectorize_to_matrix(total() * vectorize(drho), dim);
}

Liouvillian build_linearized_liouvillian(const SEParams& params, const SpinOperatorSet& ops) {
  params.validate();
  const int d = ops.dim;
  const int d2 = d * d;
  Liouvillian lv;
  lv.dim = d;

  const double hf = hyperfine_angular(ops.atom) / (ops.atom.nuclear_spin + 0.5);
  lv.hyperfine = (hf * kMinusI) * commutator_superop(ops.IdotS);
  lv.zeeman = (params.omega_e * kMinusI) * commutator_superop(ops.Sx);

  // Gamma [d/4 + sum_i S_i d S_i + 4 rho0 sum_i Tr(S_i d) S_i - d], rho0 = 1/d.
  Matrix se = -0.75 * Matrix::Identity(d2, d2);
  for (const Matrix* s : {&ops.Sx, &ops.Sy, &ops.Sz}) {
    se += kron(s->transpose(), *s);
    const Matrix st = s->transpose();
    se += (4.0 / d) * vectorize(*s) * vectorize(st).transpose();
  }
  lv.se = params.gamma_se * se;
  return lv;
}

double linearization_mismatch(const Liouvillian& liouvillian, const SEParams& params,
                              const SpinOperatorSet& ops, std::span<const Matrix> deviations) {
  const Matrix rho0 = DensityMatrix::thermal(ops.dim).rho;
  const Matrix base = master_rhs(rho0, ops, params);
  double worst = 0.0;
  for (const Matrix& d : deviations) {
    const Matrix linear = liouvillian.apply(d);
    const Matrix finite = master_rhs(rho0 + d, ops, params) - base;
    worst = std::max(worst, (linear - finite).norm() / linear.norm());
  }
  return worst;
}

std::vector<Eigenmode> liouvillian_eigenmodes(const Liouvillian& liouvillian) {
  const Matrix l = liouvillian.total();
  if (!l.allFinite()) throw std::invalid_argument("Liouvillian has non-finite entries");
  Eigen::ComplexEigenSolver<Matrix> solver(l);
  if (solver.info() != Eigen::Success) {
    Eigen::JacobiSVD<Matrix> svd(l);
    const auto& sv = svd.singularValues();
    std::ostringstream msg;
    msg << "eigensolver failed; condition estimate " << sv(0) / sv(sv.size() - 1);
    throw std::runtime_error(msg.str());
  }
  std::vector<Eigenmode> modes;
  modes.reserve(l.rows());
  for (Eigen::Index k = 0; k < l.rows(); ++k) {
    Matrix m = vectorize_to_matrix(solver.eigenvectors().col(k), liouvillian.dim);
    m /= m.norm();
    modes.push_back({solver.eigenvalues()(k), std::move(m)});
  }
  std::stable_sort(modes.begin(), modes.end(), [](const Eigenmode& x, const Eigenmode& y) {
    return std::abs(x.eigenvalue.real()) < std::abs(y.eigenvalue.real());
  });
  return modes;
}

double mode_overlap(const Matrix& observable, const Matrix& mode) {
  return std::abs((observable.adjoint() * mode).trace()) / observable.norm();
}

std::vector<std::vector<double>> observable_trajectories(const Liouvillian& liouvillian,
                                                         const Matrix& drho0,
                                                         std::span<const Matrix> observables,
                                                         std::span<const double> times) {
  if (!is_hermitian(drho0, 1e-10)) throw std::invalid_argument("initial deviation must be Hermitian");
  if (std::abs(drho0.trace()) > 1e-10 * std::max(1.0, drho0.norm())) {
    throw std::invalid_argument("initial deviation must be traceless");
  }
  const Matrix l = liouvillian.total();
  const Vector v0 = vectorize(drho0);
  std::vector<std::vector<double>> table(observables.size(), std::vector<double>(times.size()));
  for (std::size_t j = 0; j < times.size(); ++j) {
    const Matrix propagator = (l * times[j]).exp();
    const Matrix state = vectorize_to_matrix(propagator * v0, liouvillian.dim);
    for (std::size_t i = 0; i < observables.size(); ++i) {
      table[i][j] = (observables[i] * state).trace().real();
    }
  }
  return table;
}

namespace {

// Amplitudes for fixed rates by linear least squares; returns residual vector.
Eigen::VectorXd exp_residual(std::span<const double> t, std::span<const double> y,
                             const std::vector<double>& rates, Eigen::VectorXd& amplitudes) {
  const auto n = static_cast<Eigen::Index>(t.size());
  Eigen::MatrixXd basis(n, static_cast<Eigen::Index>(rates.size()));
  Eigen::VectorXd target(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    target(i) = y[i];
    for (std::size_t k = 0; k < rates.size(); ++k) basis(i, k) = std::exp(-rates[k] * t[i]);
  }
  amplitudes = basis.colPivHouseholderQr().solve(target);
  return target - basis * amplitudes;
}

// Variable-projection Gauss-Newton on the nonlinear rates.
std::vector<double> refine_rates(std::span<const double> t, std::span<const double> y,
                                 std::vector<double> rates) {
  Eigen::VectorXd amp;
  Eigen::VectorXd r = exp_residual(t, y, rates, amp);
  double cost = r.squaredNorm();
  double lambda = 1e-3;
  for (int iter = 0; iter < 200 && cost > 0.0; ++iter) {
    const auto p = static_cast<Eigen::Index>(rates.size());
    Eigen::MatrixXd jac(r.size(), p);
    for (Eigen::Index k = 0; k < p; ++k) {
      std::vector<double> bumped = rates;
      const double h = 1e-7 * std::max(std::abs(rates[k]), 1e-3);
      bumped[k] += h;
      Eigen::VectorXd amp_b;
      jac.col(k) = (exp_residual(t, y, bumped, amp_b) - r) / h;
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * r;
    bool accepted = false;
    for (int tries = 0; tries < 30 && !accepted; ++tries) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-300);
      const Eigen::VectorXd step = a.ldlt().solve(-grad);
      std::vector<double> trial = rates;
      for (Eigen::Index k = 0; k < p; ++k) trial[k] += step(k);
      Eigen::VectorXd amp_t;
      const Eigen::VectorXd rt = exp_residual(t, y, trial, amp_t);
      const double ct = rt.squaredNorm();
      if (std::isfinite(ct) && ct < cost) {
        const double rel = (cost - ct) / cost;
        rates = trial;
        r = rt;
        cost = ct;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        if (rel < 1e-14 || step.norm() < 1e-13 * (1.0 + Eigen::Map<Eigen::VectorXd>(rates.data(), p).norm())) {
          return rates;
        }
      } else {
        lambda *= 10.0;
      }
    }
    if (!accepted) break;
  }
  return rates;
}

}  // namespace

ExponentialFit extract_rates(std::span<const double> times, std::span<const double> values,
                             int terms, double residual_threshold) {
  if (times.size() != values.size() || times.size() < static_cast<std::size_t>(2 * terms)) {
    throw std::invalid_argument("need matching time/value arrays with enough samples");
  }
  if (terms != 1 && terms != 2) throw std::invalid_argument("only one or two exponential terms");

  const double ymax = std::abs(*std::max_element(values.begin(), values.end(),
                                                 [](double a, double b) { return std::abs(a) < std::abs(b); }));
  ExponentialFit fit;
  if (ymax == 0.0) {
    fit.rates.assign(terms, 0.0);
    fit.amplitudes.assign(terms, 0.0);
    return fit;
  }

  std::vector<double> rates;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*hi - *lo <= 1e-13 * ymax) {
    rates.assign(terms, 0.0);
  } else if (terms == 1) {
    const bool single_signed = *lo > 0.0 || *hi < 0.0;
    double rate0 = 1.0 / (times.back() - times.front());
    if (single_signed) {
      // log-linear least squares
      double st = 0, sl = 0, stt = 0, stl = 0;
      const double n = static_cast<double>(times.size());
      for (std::size_t i = 0; i < times.size(); ++i) {
        const double l = std::log(std::abs(values[i]));
        st += times[i];
        sl += l;
        stt += times[i] * times[i];
        stl += times[i] * l;
      }
      rate0 = -(n * stl - st * sl) / (n * stt - st * st);
    }
    rates = refine_rates(times, values, {rate0});
  } else {
    // Prony estimate from uniformly spaced samples, then refinement.
    const std::size_t n = times.size();
    const double dt = times[1] - times[0];
    Eigen::MatrixXd a(n - 2, 2);
    Eigen::VectorXd b(n - 2);
    for (std::size_t i = 0; i + 2 < n; ++i) {
      a(i, 0) = values[i + 1];
      a(i, 1) = values[i];
      b(i) = values[i + 2];
    }
    const Eigen::Vector2d c = a.colPivHouseholderQr().solve(b);
    const double disc = c(0) * c(0) + 4 * c(1);
    std::vector<double> guess;
    if (disc > 0) {
      for (double z : {0.5 * (c(0) + std::sqrt(disc)), 0.5 * (c(0) - std::sqrt(disc))}) {
        guess.push_back(z > 0 ? -std::log(z) / dt : 1.0 / dt);
      }
    } else {
      const double r0 = 1.0 / (times.back() - times.front());
      guess = {r0, 10 * r0};
    }
    rates = refine_rates(times, values, guess);
  }

  std::vector<std::size_t> order(rates.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  Eigen::VectorXd amp;
  const Eigen::VectorXd res = exp_residual(times, values, rates, amp);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return rates[x] < rates[y]; });
  for (std::size_t k : order) {
    fit.rates.push_back(rates[k]);
    fit.amplitudes.push_back(amp(static_cast<Eigen::Index>(k)));
  }
  fit.residual_rms = std::sqrt(res.squaredNorm() / res.size()) / ymax;
  fit.flagged = fit.residual_rms > residual_threshold;
  return fit;
}

ZeroFieldAnalysis zero_field_rates(const SEParams& params, const SpinOperatorSet& ops) {
  SEParams zf = params;
  zf.omega_e = 0.0;
  const auto modes = liouvillian_eigenmodes(build_linearized_liouvillian(zf, ops));
  ZeroFieldAnalysis out;
  const double cluster = 1e-4 * std::max(params.gamma_se, 1e-300);
  for (const Eigenmode& m : modes) {
    const double overlap = std::max(mode_overlap(ops.Fza, m.mode), mode_overlap(ops.Fzb, m.mode));
    if (overlap <= 1e-6) continue;
    const double rate = -m.eigenvalue.real();
    if (out.sector_rates.empty() || std::abs(rate - out.sector_rates.back()) > cluster) {
      out.sector_rates.push_back(rate);
    }
  }
  std::sort(out.sector_rates.begin(), out.sector_rates.end());
  if (!out.sector_rates.empty()) out.gamma_plus = out.sector_rates[0];
  if (out.sector_rates.size() > 1) out.gamma_minus = out.sector_rates[1];
  return out;
}

WeakCouplingAnalysis weak_coupling_rates(const SEParams& params, const SpinOperatorSet& ops) {
  const auto modes = liouvillian_eigenmodes(build_linearized_liouvillian(params, ops));
  const Matrix circ_a = ops.Fza + Complex(0, 1) * ops.Fya;
  const Matrix circ_b = ops.Fzb + Complex(0, 1) * ops.Fyb;
  WeakCouplingAnalysis out;
  double best_a = -1.0, best_b = -1.0;
  for (const Eigenmode& m : modes) {
    if (std::max(mode_overlap(ops.Fz, m.mode), mode_overlap(ops.Fy, m.mode)) > 1e-6) {
      out.overlapping_eigenvalues.push_back(m.eigenvalue);
    }
    const double oa = mode_overlap(circ_a, m.mode);
    const double ob = mode_overlap(circ_b, m.mode);
    if (oa > best_a) {
      best_a = oa;
      out.a = {-m.eigenvalue.real(), m.eigenvalue.imag()};
    }
    if (ob > best_b) {
      best_b = ob;
      out.b = {-m.eigenvalue.real(), m.eigenvalue.imag()};
    }
  }
  return out;
}

EigenobservableDirections zero_field_eigenobservables(const SEParams& params,
                                                      const SpinOperatorSet& ops, double time) {
  SEParams zf = params;
  zf.omega_e = 0.0;
  const Liouvillian lv = build_linearized_liouvillian(zf, ops);
  const std::vector<Matrix> observables{ops.Fza, ops.Fzb};
  const std::vector<double> times{0.0, time};

  Eigen::Matrix2d x0, xt;
  int col = 0;
  for (const Matrix* init : {&ops.Fza, &ops.Fzb}) {
    const auto table = observable_trajectories(lv, *init, observables, times);
    x0(0, col) = table[0][0];
    x0(1, col) = table[1][0];
    xt(0, col) = table[0][1];
    xt(1, col) = table[1][1];
    ++col;
  }
  // e(t) = P e(0); left eigenvectors of P are eigenobservable coefficients.
  const Eigen::Matrix2d propagator = xt * x0.inverse();
  Eigen::EigenSolver<Eigen::Matrix2d> solver(propagator.transpose());
  const Eigen::Vector2d mu = solver.eigenvalues().real();
  const int slow = mu(0) >= mu(1) ? 0 : 1;
  const int fast = 1 - slow;

  auto direction = [&](int k) {
    Eigen::Vector2d v = solver.eigenvectors().col(k).real();
    v.normalize();
    if (v(1) < 0) v = -v;
    return v;
  };
  EigenobservableDirections out;
  out.slow = direction(slow);
  out.fast = direction(fast);
  out.slow_rate = -std::log(mu(slow)) / time;
  out.fast_rate = -std::log(mu(fast)) / time;
  return out;
}

RateSet compute_rate_set(double gamma_se, double nuclear_spin, RateRegime regime) {
  RateSet rs;
  if (gamma_se < 0.0) throw std::invalid_argument("spin-exchange rate must be non-negative");
  if (gamma_se == 0.0) return rs;

  AtomSpec atom;
  atom.nuclear_spin = nuclear_spin;
  atom.hyperfine_splitting_hz = regime.hyperfine_over_gamma * gamma_se / (2.0 * std::numbers::pi);
  atom.isotope_label = "rate-regime";
  const SpinOperatorSet ops = build_operators(atom);

  SEParams weak{gamma_se, regime.larmor_over_gamma * gamma_se * (2 * nuclear_spin + 1)};
  const WeakCouplingAnalysis wc = weak_coupling_rates(weak, ops);
  rs.gamma_a = wc.a.rate;
  rs.gamma_b = wc.b.rate;

  const ZeroFieldAnalysis zf = zero_field_rates({gamma_se, 0.0}, ops);
  rs.gamma_plus = zf.gamma_plus;
  rs.gamma_minus = zf.gamma_minus;
  return rs;
}

SpinTemperatureFit fit_spin_temperature(const Matrix& rho, const SpinOperatorSet& ops) {
  const double d = ops.dim;
  const double fz_mean = (ops.Fz * rho).trace().real();
  double beta = fz_mean * d / (ops.Fz * ops.Fz).trace().real();
  for (int iter = 0; iter < 50; ++iter) {
    const Matrix model = DensityMatrix::spin_temperature(ops, beta).rho;
    const double mean = (ops.Fz * model).trace().real();
    const Matrix deriv = ops.Fz * model - mean * model;  // d model / d beta
    const Matrix residual = rho - model;
    const double num = (deriv.adjoint() * residual).trace().real();
    const double den = deriv.squaredNorm();
    if (den == 0.0) break;
    const double step = num / den;
    beta += step;
    if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(beta))) break;
  }
  return {beta, (rho - DensityMatrix::spin_temperature(ops, beta).rho).norm()};
}

}  // namespace spinnoise
