#include "spinnoise/fitting.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace spinnoise {

using std::numbers::pi;

std::string to_string(FitStatus status) {
  switch (status) {
    case FitStatus::Converged:
      return "converged";
    case FitStatus::MaxIterations:
      return "max_iterations";
    case FitStatus::Singular:
      return "singular";
  }
  return "unknown";
}

SpectrumModel FitResult::model() const {
  SpectrumModel m;
  m.floor = floor;
  for (const auto& c : components) m.components.push_back({c.center, c.fwhm, c.area});
  return m;
}

ComponentTemplate auto_component() {
  return {ParamSpec::free(), ParamSpec::free(), ParamSpec::free()};
}

namespace {

enum class Kind { Center, Fwhm, Area, Floor };

bool is_log(Kind k) { return k == Kind::Fwhm || k == Kind::Area; }

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::Center:
      return "center";
    case Kind::Fwhm:
      return "fwhm";
    case Kind::Area:
      return "area";
    case Kind::Floor:
      return "floor";
  }
  return "?";
}

// A fit slot is one (component, field) pair or the floor. Slots map onto
// internal parameters: free slots own one, tied slots share their group's.
struct Slot {
  Kind kind;
  int component;  // -1 for the floor
  ParamSpec spec;
  int param = -1;
};

// Log parameters map theta to lower + exp(theta).
struct Parameter {
  Kind kind;
  bool log;
  double natural = 0.0;  // untransformed initial value
  double lower = 0.0;
};

struct Guess {
  double floor, center, fwhm, area;
};

Guess peak_pick(const std::vector<double>& f, const std::vector<double>& y) {
  const std::size_t n = f.size();
  std::vector<double> sorted = y;
  std::sort(sorted.begin(), sorted.end());
  Guess g{};
  g.floor = sorted[n / 10];
  const auto peak_it = std::max_element(y.begin(), y.end());
  const std::size_t peak = static_cast<std::size_t>(peak_it - y.begin());
  g.center = f[peak];
  const double height = *peak_it - g.floor;
  const double span = f.back() - f.front();
  const double spacing = n > 1 ? span / static_cast<double>(n - 1) : 1.0;
  if (!(height > 0.0)) {
    g.fwhm = std::max(3.0 * spacing, 1e-3);
    g.area = 0.0;
    return g;
  }
  const double half = g.floor + 0.5 * height;
  std::size_t lo = peak, hi = peak;
  while (lo > 0 && y[lo] > half) --lo;
  while (hi + 1 < n && y[hi] > half) ++hi;
  g.fwhm = std::max(f[hi] - f[lo], std::max(spacing, 1e-3));
  double integral = 0.0;
  for (std::size_t i = lo; i < hi; ++i) {
    integral += 0.5 * (y[i] + y[i + 1] - 2.0 * g.floor) * (f[i + 1] - f[i]);
  }
  // The half-maximum core holds half the area of a Lorentzian.
  g.area = std::max(2.0 * integral, 0.5 * pi * height * g.fwhm * 1e-3);
  return g;
}

double transform(const Parameter& p, double natural) {
  return p.log ? std::log(natural - p.lower) : natural;
}
double untransform(const Parameter& p, double theta) {
  return p.log ? p.lower + std::exp(theta) : theta;
}

class LorentzianObjective {
 public:
  LorentzianObjective(const FitProblem& problem, std::vector<Slot> slots,
                      std::vector<Parameter> params)
      : slots_(std::move(slots)), params_(std::move(params)) {
    for (std::size_t i = 0; i < problem.freq_hz.size(); ++i) {
      const double f = problem.freq_hz[i];
      const bool masked = std::any_of(problem.masks.begin(), problem.masks.end(),
                                      [f](const FrequencyMask& m) { return m.contains(f); });
      const double w = problem.weights.empty() ? 1.0 : problem.weights[i];
      if (masked || w == 0.0) continue;
      freq_.push_back(f);
      data_.push_back(problem.psd[i]);
      root_weight_.push_back(std::sqrt(w));
    }
    scale_ = 0.0;
    for (double v : data_) scale_ = std::max(scale_, std::abs(v));
    if (!(scale_ > 0.0)) scale_ = 1.0;
    components_ = static_cast<int>(problem.components.size());
  }

  std::size_t bins() const { return freq_.size(); }
  std::size_t size() const { return params_.size(); }
  double scale() const { return scale_; }
  const std::vector<Slot>& slots() const { return slots_; }
  const std::vector<Parameter>& params() const { return params_; }
  const std::vector<double>& freq() const { return freq_; }

  // Natural value of every slot.
  std::vector<double> slot_values(const Eigen::VectorXd& theta) const {
    std::vector<double> v(slots_.size());
    for (std::size_t s = 0; s < slots_.size(); ++s) {
      const Slot& slot = slots_[s];
      if (slot.param < 0) {
        v[s] = slot.spec.value;
      } else {
        const double base = untransform(params_[slot.param], theta[slot.param]);
        v[s] = slot.spec.mode == ParamMode::Tied ? slot.spec.ratio * base + slot.spec.offset : base;
      }
    }
    return v;
  }

  // Residuals (scaled by 1/scale) and, optionally, derivatives with respect
  // to theta (`natural` = false) or to the untransformed parameters.
  Eigen::VectorXd residuals(const Eigen::VectorXd& theta, Eigen::MatrixXd* jac,
                            bool natural = false) const {
    const std::vector<double> v = slot_values(theta);
    const std::size_t n = bins();
    Eigen::VectorXd r(n);
    if (jac) jac->setZero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(size()));

    // d slot / d parameter
    std::vector<double> chain(slots_.size(), 0.0);
    for (std::size_t s = 0; s < slots_.size(); ++s) {
      const Slot& slot = slots_[s];
      if (slot.param < 0) continue;
      const double ratio = slot.spec.mode == ParamMode::Tied ? slot.spec.ratio : 1.0;
      const Parameter& p = params_[slot.param];
      chain[s] = ratio * ((p.log && !natural) ? std::exp(theta[slot.param]) : 1.0);
    }

    const std::size_t floor_slot = slots_.size() - 1;
    for (std::size_t i = 0; i < n; ++i) {
      const double f = freq_[i];
      double model = v[floor_slot];
      if (jac && slots_[floor_slot].param >= 0) {
        (*jac)(static_cast<Eigen::Index>(i), slots_[floor_slot].param) += chain[floor_slot];
      }
      for (int c = 0; c < components_; ++c) {
        const std::size_t sc = 3 * c, sw = sc + 1, sa = sc + 2;
        const double center = v[sc], h = 0.5 * v[sw], area = v[sa];
        const double dm = f - center, dp = f + center;
        const double dmin = dm * dm + h * h, dplus = dp * dp + h * h;
        const double shape = h / pi * (1.0 / dmin + 1.0 / dplus);
        model += area * shape;
        if (!jac) continue;
        const auto row = static_cast<Eigen::Index>(i);
        if (slots_[sa].param >= 0) (*jac)(row, slots_[sa].param) += chain[sa] * shape;
        if (slots_[sc].param >= 0) {
          const double d = area * h / pi *
                           (2.0 * dm / (dmin * dmin) - 2.0 * dp / (dplus * dplus));
          (*jac)(row, slots_[sc].param) += chain[sc] * d;
        }
        if (slots_[sw].param >= 0) {
          const double d = 0.5 * area / pi *
                           ((dm * dm - h * h) / (dmin * dmin) + (dp * dp - h * h) / (dplus * dplus));
          (*jac)(row, slots_[sw].param) += chain[sw] * d;
        }
      }
      const double rw = root_weight_[i] / scale_;
      r[static_cast<Eigen::Index>(i)] = rw * (model - data_[i]);
      if (jac) jac->row(static_cast<Eigen::Index>(i)) *= rw;
    }
    return r;
  }

  double weighted_data_norm2() const {
    double s = 0.0;
    for (std::size_t i = 0; i < bins(); ++i) {
      const double v = root_weight_[i] * data_[i] / scale_;
      s += v * v;
    }
    return s;
  }

 private:
  std::vector<Slot> slots_;
  std::vector<Parameter> params_;
  std::vector<double> freq_, data_, root_weight_;
  double scale_ = 1.0;
  int components_ = 0;
};

void validate_problem(const FitProblem& p) {
  const std::size_t n = p.freq_hz.size();
  if (n == 0 || p.psd.size() != n) throw std::invalid_argument("frequency and PSD sizes differ or are empty");
  if (!p.weights.empty() && p.weights.size() != n) throw std::invalid_argument("weight count differs from bin count");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(p.freq_hz[i]) || !std::isfinite(p.psd[i])) {
      throw std::invalid_argument("fit data must be finite");
    }
    if (!p.weights.empty() && !(p.weights[i] >= 0.0 && std::isfinite(p.weights[i]))) {
      throw std::invalid_argument("weights must be finite and non-negative");
    }
    if (i > 0 && !(p.freq_hz[i] > p.freq_hz[i - 1])) {
      throw std::invalid_argument("frequency grid must be strictly increasing");
    }
  }
  for (const auto& m : p.masks) {
    if (!(m.hi_hz >= m.lo_hz)) throw std::invalid_argument("mask interval reversed");
  }
  if (p.max_iterations < 1) throw std::invalid_argument("max_iterations must be positive");
  if (!(p.min_fwhm_hz >= 0.0) || !std::isfinite(p.min_fwhm_hz)) {
    throw std::invalid_argument("minimum fwhm must be finite and >= 0");
  }
}

}  // namespace

FitResult fit_lorentzians(const FitProblem& problem) {
  validate_problem(problem);

  // Unmasked data for guesses and the mask-fraction check.
  std::vector<double> uf, uy;
  for (std::size_t i = 0; i < problem.freq_hz.size(); ++i) {
    const double f = problem.freq_hz[i];
    const bool masked = std::any_of(problem.masks.begin(), problem.masks.end(),
                                    [f](const FrequencyMask& m) { return m.contains(f); });
    if (!masked) {
      uf.push_back(f);
      uy.push_back(problem.psd[i]);
    }
  }
  if (static_cast<double>(uf.size()) < 0.1 * static_cast<double>(problem.freq_hz.size()) || uf.empty()) {
    throw std::invalid_argument("masks exclude 90% or more of the bins");
  }
  const Guess guess = peak_pick(uf, uy);

  std::vector<Slot> slots;
  for (int c = 0; c < static_cast<int>(problem.components.size()); ++c) {
    const auto& t = problem.components[c];
    slots.push_back({Kind::Center, c, t.center});
    slots.push_back({Kind::Fwhm, c, t.fwhm});
    slots.push_back({Kind::Area, c, t.area});
  }
  slots.push_back({Kind::Floor, -1, problem.floor});

  auto auto_value = [&](Kind k) {
    switch (k) {
      case Kind::Center:
        return guess.center;
      case Kind::Fwhm:
        return guess.fwhm;
      case Kind::Area:
        return guess.area > 0.0 ? guess.area : 1e-6 * guess.fwhm * std::max(std::abs(guess.floor), 1e-300);
      case Kind::Floor:
        return guess.floor;
    }
    return 0.0;
  };

  std::vector<Parameter> params;
  std::map<int, int> group_param;
  std::map<int, Kind> group_kind;
  for (auto& slot : slots) {
    const ParamSpec& s = slot.spec;
    const std::string where = std::string(kind_name(slot.kind)) +
                              (slot.component >= 0 ? " of component " + std::to_string(slot.component) : "");
    switch (s.mode) {
      case ParamMode::Fixed:
        if (!std::isfinite(s.value)) throw std::invalid_argument("fixed " + where + " needs a finite value");
        if (slot.kind == Kind::Fwhm && !(s.value > 0.0)) throw std::invalid_argument("fixed fwhm must be > 0");
        if (slot.kind == Kind::Area && !(s.value >= 0.0)) throw std::invalid_argument("fixed area must be >= 0");
        break;
      case ParamMode::Free: {
        double init = std::isfinite(s.value) ? s.value : auto_value(slot.kind);
        if (is_log(slot.kind) && !(init > 0.0)) init = auto_value(slot.kind);
        if (is_log(slot.kind) && !(init > 0.0)) init = 1e-300;
        const double lower = slot.kind == Kind::Fwhm ? problem.min_fwhm_hz : 0.0;
        if (is_log(slot.kind) && !(init > lower)) init = 2.0 * lower;
        slot.param = static_cast<int>(params.size());
        params.push_back({slot.kind, is_log(slot.kind), init, lower});
        break;
      }
      case ParamMode::Tied: {
        if (s.group < 0) throw std::invalid_argument("tied " + where + " needs a group id >= 0");
        if (slot.kind == Kind::Floor) throw std::invalid_argument("the floor cannot be tied");
        if (s.offset != 0.0 && slot.kind != Kind::Center) {
          throw std::invalid_argument("offsets are only allowed on tied centers");
        }
        if (is_log(slot.kind) ? !(s.ratio > 0.0) : (s.ratio == 0.0 || !std::isfinite(s.ratio))) {
          throw std::invalid_argument("tie ratio of " + where + " invalid");
        }
        auto it = group_param.find(s.group);
        if (it == group_param.end()) {
          double member = std::isfinite(s.value) ? s.value : auto_value(slot.kind);
          double base = (member - s.offset) / s.ratio;
          if (is_log(slot.kind) && !(base > 0.0)) base = auto_value(slot.kind) / s.ratio;
          const double lower = slot.kind == Kind::Fwhm ? problem.min_fwhm_hz : 0.0;
          if (is_log(slot.kind) && !(base > lower)) base = 2.0 * lower;
          group_param[s.group] = static_cast<int>(params.size());
          group_kind[s.group] = slot.kind;
          params.push_back({slot.kind, is_log(slot.kind), base, lower});
          slot.param = static_cast<int>(params.size()) - 1;
        } else {
          if (group_kind[s.group] != slot.kind) {
            throw std::invalid_argument("tie group " + std::to_string(s.group) + " mixes parameter kinds");
          }
          slot.param = it->second;
        }
        break;
      }
    }
  }
  if (params.empty()) throw std::invalid_argument("fit has no free parameters");

  const LorentzianObjective obj(problem, slots, params);
  const auto np = static_cast<Eigen::Index>(obj.size());
  if (obj.bins() < obj.size()) throw std::invalid_argument("fewer usable bins than free parameters");

  Eigen::VectorXd theta(np);
  for (Eigen::Index k = 0; k < np; ++k) theta[k] = transform(params[k], params[k].natural);

  FitResult result;
  result.free_parameters = static_cast<int>(np);
  result.used_bins = obj.bins();

  Eigen::MatrixXd jac;
  Eigen::VectorXd r = obj.residuals(theta, &jac);
  double cost = 0.5 * r.squaredNorm();
  if (!std::isfinite(cost)) throw std::invalid_argument("initial guess gives a non-finite residual");
  result.cost_history.push_back(cost);
  const double cost_floor = 1e-28 * obj.weighted_data_norm2();

  // Convergence scale of each parameter's step.
  auto step_scale = [&](Eigen::Index k, const std::vector<double>& values) {
    const Parameter& p = params[k];
    if (p.log) return 1.0;
    double scale = std::abs(untransform(p, theta[k]));
    if (p.kind == Kind::Center) {
      for (std::size_t s = 0; s < slots.size(); ++s) {
        if (obj.slots()[s].param == k) scale = std::max(scale, values[s + 1]);  // that line's fwhm
      }
    } else {
      scale = std::max(scale, 1e-3 * obj.scale());
    }
    return scale;
  };

  double lambda = 1e-3;
  bool done = false;
  std::string reason = "iteration limit reached";
  int iter = 0;
  for (; iter < problem.max_iterations && !done; ++iter) {
    if (cost <= cost_floor) {
      done = true;
      reason = "residual at rounding level";
      break;
    }
    const Eigen::MatrixXd a = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * r;
    Eigen::VectorXd diag = a.diagonal();
    const double diag_max = diag.maxCoeff();
    for (Eigen::Index k = 0; k < np; ++k) diag[k] = std::max(diag[k], 1e-30 * std::max(diag_max, 1e-300));

    bool accepted = false;
    while (!accepted) {
      Eigen::MatrixXd damped = a;
      damped.diagonal() += lambda * diag;
      const Eigen::VectorXd step = damped.ldlt().solve(-g);
      const Eigen::VectorXd trial = theta + step;
      Eigen::MatrixXd trial_jac;
      const Eigen::VectorXd trial_r = obj.residuals(trial, &trial_jac);
      const double trial_cost = 0.5 * trial_r.squaredNorm();
      if (step.allFinite() && std::isfinite(trial_cost) && trial_cost <= cost) {
        accepted = true;
        const std::vector<double> values = obj.slot_values(theta);
        bool small_step = true;
        for (Eigen::Index k = 0; k < np; ++k) {
          if (std::abs(step[k]) > 1e-8 * step_scale(k, values)) small_step = false;
        }
        const bool flat = cost - trial_cost <= 1e-10 * cost;
        theta = trial;
        r = trial_r;
        jac = trial_jac;
        cost = trial_cost;
        result.cost_history.push_back(cost);
        lambda = std::max(lambda / 10.0, 1e-15);
        if (small_step) {
          done = true;
          reason = "relative step below 1e-8";
        } else if (flat) {
          done = true;
          reason = "relative residual change below 1e-10";
        }
      } else {
        lambda *= 10.0;
        if (lambda > 1e16) {
          done = true;
          reason = "no further decrease possible";
          break;
        }
      }
    }
  }
  result.iterations = iter;

  // Uncertainties from the normal matrix in untransformed parameters, with
  // columns of vanishing norm (e.g. shape of a zero-area line) left out.
  Eigen::MatrixXd jn;
  const Eigen::VectorXd rn = obj.residuals(theta, &jn, true);
  const double rss = rn.squaredNorm() * obj.scale() * obj.scale();
  const double dof = static_cast<double>(obj.bins()) - static_cast<double>(np);
  result.residual_norm = std::sqrt(rss);
  result.reduced_residual = rss / std::max(dof, 1.0);

  Eigen::VectorXd col_norm(np);
  for (Eigen::Index k = 0; k < np; ++k) col_norm[k] = jn.col(k).norm();
  const double max_norm = col_norm.maxCoeff();
  std::vector<Eigen::Index> kept;
  for (Eigen::Index k = 0; k < np; ++k) {
    if (col_norm[k] > 1e-10 * max_norm) kept.push_back(k);
  }
  Eigen::VectorXd sigma = Eigen::VectorXd::Constant(np, std::numeric_limits<double>::quiet_NaN());
  bool singular = kept.size() < static_cast<std::size_t>(np);
  if (!kept.empty()) {
    Eigen::MatrixXd jk(jn.rows(), static_cast<Eigen::Index>(kept.size()));
    for (std::size_t j = 0; j < kept.size(); ++j) jk.col(static_cast<Eigen::Index>(j)) = jn.col(kept[j]) / col_norm[kept[j]];
    const Eigen::MatrixXd normal = jk.transpose() * jk;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(normal);
    const double emin = es.eigenvalues().minCoeff(), emax = es.eigenvalues().maxCoeff();
    result.condition_number = emin > 0.0 ? emax / emin : std::numeric_limits<double>::infinity();
    if (result.condition_number > 1e14) {
      singular = true;
    } else {
      const Eigen::MatrixXd cov = normal.inverse() * (result.reduced_residual / (obj.scale() * obj.scale()));
      for (std::size_t j = 0; j < kept.size(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        sigma[kept[j]] = std::sqrt(std::max(cov(jj, jj), 0.0)) / col_norm[kept[j]];
      }
    }
  } else {
    result.condition_number = std::numeric_limits<double>::infinity();
  }
  if (kept.size() < static_cast<std::size_t>(np) && result.condition_number <= 1e14) {
    // Unidentifiable columns only: remaining parameters keep their sigmas.
    result.condition_number = std::numeric_limits<double>::infinity();
  }

  const std::vector<double> values = obj.slot_values(theta);
  auto slot_sigma = [&](std::size_t s) {
    const Slot& slot = obj.slots()[s];
    if (slot.param < 0) return 0.0;
    const double ratio = slot.spec.mode == ParamMode::Tied ? std::abs(slot.spec.ratio) : 1.0;
    return ratio * sigma[slot.param];
  };
  for (std::size_t c = 0; c < problem.components.size(); ++c) {
    FittedComponent fc;
    fc.center = values[3 * c];
    fc.fwhm = values[3 * c + 1];
    fc.area = values[3 * c + 2];
    fc.center_sigma = slot_sigma(3 * c);
    fc.fwhm_sigma = slot_sigma(3 * c + 1);
    fc.area_sigma = slot_sigma(3 * c + 2);
    result.components.push_back(fc);
  }
  result.floor = values.back();
  result.floor_sigma = slot_sigma(values.size() - 1);

  std::ostringstream msg;
  msg << reason;
  if (!done) {
    result.status = FitStatus::MaxIterations;
  } else if (singular && kept.size() == static_cast<std::size_t>(np)) {
    result.status = FitStatus::Singular;
    msg << "; normal matrix singular (condition " << result.condition_number << ")";
  } else {
    result.status = FitStatus::Converged;
    if (singular) msg << "; " << (np - static_cast<Eigen::Index>(kept.size())) << " parameter(s) not identifiable";
  }
  result.converged = result.status == FitStatus::Converged;
  result.message = msg.str();
  return result;
}

DcFitResult fit_dc_spectrum(const std::vector<double>& freq_hz, const std::vector<double>& psd,
                            const DcFieldSpec& spec) {
  spec.validate();
  if (freq_hz.empty() || freq_hz.size() != psd.size()) {
    throw std::invalid_argument("frequency and PSD sizes differ or are empty");
  }
  const Guess g = peak_pick(freq_hz, psd);
  const double split = spec.nuclear_zeeman_split_hz;
  const bool degenerate = split == 0.0;

  FitProblem p;
  p.freq_hz = freq_hz;
  p.psd = psd;
  p.floor = ParamSpec::free(g.floor);
  ComponentTemplate a, b;
  a.center = ParamSpec::tied(0, 1.0, 0.0, spec.resonance_hz);
  b.center = ParamSpec::tied(0, 1.0, split);
  if (degenerate) {
    a.fwhm = ParamSpec::tied(1, 1.0, 0.0, g.fwhm);
    b.fwhm = ParamSpec::tied(1);
    a.area = ParamSpec::tied(2, 1.0, 0.0, 0.5 * g.area);
    b.area = ParamSpec::tied(2);
  } else {
    a.fwhm = ParamSpec::free(g.fwhm);
    b.fwhm = ParamSpec::free(3.0 * g.fwhm);
    a.area = ParamSpec::free(5.0 / 6.0 * g.area);
    b.area = ParamSpec::free(1.0 / 6.0 * g.area);
  }
  p.components = {a, b};

  DcFitResult out;
  out.fit = fit_lorentzians(p);
  out.degenerate = degenerate;
  if (degenerate) {
    out.fit.message += "; zero split: widths and areas tied equal";
  }
  const auto& ca = out.fit.components[0];
  const auto& cb = out.fit.components[1];
  out.gamma_a_over_pi_hz = ca.fwhm - spec.wall_broadening_hz;
  out.gamma_b_over_pi_hz = cb.fwhm - spec.wall_broadening_hz;
  out.total_area = ca.area + cb.area;
  return out;
}

}  // namespace spinnoise
