#pragma once

// The pulsed dissipative qubit channel: one cycle is a free unitary rotation
// followed by a short dissipative laser pulse. This header builds the cycle
// superoperator, composes it, finds its steady state, converts between
// superoperator and Kraus forms, and constructs the time-reversed (Crooks)
// channel with respect to the steady state.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <numbers>
#include <string>
#include <vector>

#include "epmft/errors.hpp"
#include "epmft/linops.hpp"
#include "epmft/state.hpp"

namespace epmft {

inline constexpr double kFixedPointTol = 1e-10;
inline constexpr double kUniqueGapTol = 1e-9;

struct PulseParams {
  double p_abs = 0.700;
  double p_d = 0.255;
  double alpha = std::numbers::pi / 4.0;
  double omega_tau = 2.0 * std::numbers::pi * 0.9;

  // Fitted operating point of the NV experiment.
  static PulseParams nv_reference() { return PulseParams{}; }

  EnergyLevels levels() const { return EnergyLevels{omega_tau}; }

  void validate() const {
    auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!in_unit(p_abs)) raise(Errc::DomainError, "p_abs must lie in [0, 1]");
    if (!in_unit(p_d)) raise(Errc::DomainError, "p_d must lie in [0, 1]");
    if (!(alpha >= 0.0 && alpha <= std::numbers::pi / 2.0 + 1e-15))
      raise(Errc::DomainError, "alpha must lie in [0, pi/2]");
    if (!std::isfinite(omega_tau)) raise(Errc::DomainError, "omega_tau must be finite");
  }
};

// Linear map on vectorized 2x2 operators (column stacking, see vectorize()).
struct Superoperator {
  Matrix4 matrix = Matrix4::identity();

  static Superoperator identity() { return Superoperator{}; }

  friend Superoperator operator*(const Superoperator& a, const Superoperator& b) {
    return Superoperator{a.matrix * b.matrix};
  }
};

inline Matrix2 apply(const Superoperator& map, const Matrix2& a) {
  return unvectorize(map.matrix * vectorize(a));
}

struct KrausSet {
  std::vector<Matrix2> operators;
  double rank_tol = kDefaultRankTol;

  std::size_t rank() const { return operators.size(); }

  // sum_l K_l^dagger K_l, equal to the identity for a trace-preserving set.
  Matrix2 completeness() const {
    Matrix2 s;
    for (const auto& k : operators) s += k.adjoint() * k;
    return s;
  }

  double completeness_defect() const { return (completeness() - Matrix2::identity()).max_abs(); }

  Superoperator superoperator() const {
    Superoperator out{Matrix4::zero()};
    for (const auto& k : operators) out.matrix += kron(k.conj(), k);
    return out;
  }
};

inline Matrix2 apply(const KrausSet& set, const Matrix2& a) {
  Matrix2 out;
  for (const auto& k : set.operators) out += k * a * k.adjoint();
  return out;
}

// Anything that acts linearly on 2x2 operators through apply().
template <class T>
concept LinearChannel = requires(const T& map, const Matrix2& a) {
  { apply(map, a) } -> std::same_as<Matrix2>;
};

template <LinearChannel Map>
DensityMatrix apply_channel(const Map& map, const DensityMatrix& rho) {
  return DensityMatrix::from_matrix(apply(map, rho.matrix()));
}

// Max deviation of tr(Phi(E_kj)) from delta_kj over the matrix units.
inline double trace_preservation_defect(const Superoperator& map) {
  double d = 0.0;
  for (std::size_t c = 0; c < 4; ++c) {
    const cplx expected = (c == 0 || c == 3) ? 1.0 : 0.0;
    d = std::max(d, std::abs(map.matrix(0, c) + map.matrix(3, c) - expected));
  }
  return d;
}

// Dissipative laser pulse in the energy basis.
inline Superoperator build_pulse_superoperator(const PulseParams& params) {
  params.validate();
  const double pa = params.p_abs, pd = params.p_d;
  const double c = std::cos(params.alpha), s = std::sin(params.alpha);
  const double kc = 1.0 - (1.0 - pd) * c * c;
  const double ks = 1.0 - (1.0 - pd) * s * s;
  const double ksc = (1.0 - pd) * s * c;

  const double rows[4][4] = {
      {2.0 - pa * (kc - pd * c), pa * ksc, pa * ksc, pa * (pd * c + kc)},
      {pa * (ksc + pd * s), 2.0 - pa * (1.0 + ks), -pa * (ks - 1.0), pa * (pd * s - ksc)},
      {pa * (ksc + pd * s), -pa * (ks - 1.0), 2.0 - pa * (1.0 + ks), pa * (pd * s - ksc)},
      {pa * (kc - pd * c), -pa * ksc, -pa * ksc, 2.0 - pa * (pd * c + kc)},
  };
  Superoperator out{Matrix4::zero()};
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t col = 0; col < 4; ++col) out.matrix(r, col) = 0.5 * rows[r][col];
  return out;
}

// Free evolution rho -> U rho U^dagger with U = exp(-i H tau), H = omega sigma_z / 2.
inline Superoperator build_unitary_superoperator(double omega_tau) {
  const Matrix2 u = Matrix2::diagonal({std::polar(1.0, -0.5 * omega_tau), std::polar(1.0, 0.5 * omega_tau)});
  return Superoperator{kron(u.conj(), u)};
}

inline Superoperator build_unitary_superoperator(const PulseParams& params) {
  return build_unitary_superoperator(params.omega_tau);
}

// (S U)^N; N = 0 gives the identity.
inline Superoperator compose_cycles(const Superoperator& pulse, const Superoperator& unitary, unsigned n) {
  return Superoperator{power(pulse.matrix * unitary.matrix, n)};
}

struct FixedPoint {
  DensityMatrix state;
  double spectral_gap = 0.0;        // 1 - |lambda_2|
  cplx subdominant_eigenvalue{};    // lambda_2
};

inline FixedPoint fixed_point(const Superoperator& one_cycle) {
  const double tp = trace_preservation_defect(one_cycle);
  if (tp > 1e-9) raise(Errc::NotTracePreserving, "trace defect " + std::to_string(tp));

  const auto ev = eigenvalues(one_cycle.matrix);
  std::size_t lead = 0;
  for (std::size_t k = 1; k < 4; ++k)
    if (std::abs(ev[k] - 1.0) < std::abs(ev[lead] - 1.0)) lead = k;
  cplx second{};
  for (std::size_t k = 0; k < 4; ++k)
    if (k != lead && std::abs(ev[k]) > std::abs(second)) second = ev[k];
  if (std::abs(second) >= 1.0 - kUniqueGapTol)
    raise(Errc::NonUniqueFixedPoint, "eigenvalue 1 is not simple (|lambda_2| = " +
                                         std::to_string(std::abs(second)) + ")");

  // (L - I) x = 0 with the first row replaced by the trace constraint.
  Matrix4 system = one_cycle.matrix - Matrix4::identity();
  system(0, 0) = 1.0;
  system(0, 1) = 0.0;
  system(0, 2) = 0.0;
  system(0, 3) = 1.0;
  Vector4 rhs;
  rhs[0] = 1.0;
  Vector4 x;
  try {
    x = solve(system, rhs);
  } catch (const Error&) {
    raise(Errc::NonUniqueFixedPoint, "steady-state linear system is singular");
  }
  const Matrix2 rho = unvectorize(x);
  FixedPoint out{DensityMatrix::from_matrix(rho, kFixedPointTol), 1.0 - std::abs(second), second};
  const double residual = (apply(one_cycle, out.state.matrix()) - out.state.matrix()).max_abs();
  if (residual > kFixedPointTol)
    raise(Errc::InvariantViolation, "fixed-point residual " + std::to_string(residual));
  return out;
}

// Choi matrix J = sum_kj E_kj kron Phi(E_kj). With column stacking its
// eigenvectors are vec(K_l) up to normalization.
inline Matrix4 choi_matrix(const Superoperator& map) {
  Matrix4 j;
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t l = 0; l < 2; ++l) {
      Matrix2 unit;
      unit(k, l) = 1.0;
      j += kron(unit, apply(map, unit));
    }
  return j;
}

namespace detail {

// Makes the largest-magnitude entry (first in column-stacked order on ties)
// real and positive.
inline Matrix2 canonical_phase(const Matrix2& k) {
  const Vector4 v = vectorize(k);
  double best = 0.0;
  for (std::size_t i = 0; i < 4; ++i) best = std::max(best, std::abs(v[i]));
  if (best == 0.0) return k;
  for (std::size_t i = 0; i < 4; ++i) {
    if (std::abs(v[i]) >= best * (1.0 - 1e-9)) {
      const cplx rot = std::conj(v[i]) / std::abs(v[i]);
      return k * rot;
    }
  }
  return k;
}

}  // namespace detail

inline KrausSet kraus_from_choi(const Superoperator& map, double rank_tol = kDefaultRankTol) {
  const double tp = trace_preservation_defect(map);
  if (tp > 1e-9) raise(Errc::NotTracePreserving, "trace defect " + std::to_string(tp));
  const Matrix4 j = choi_matrix(map);
  if (j.hermiticity_defect() > 1e-10)
    raise(Errc::InvariantViolation, "map is not Hermiticity preserving");
  const auto eig = hermitian_eig(j);
  if (eig.values[3] < -rank_tol)
    raise(Errc::NotCompletelyPositive, "Choi eigenvalue " + std::to_string(eig.values[3]));

  KrausSet out;
  out.rank_tol = rank_tol;
  for (std::size_t l = 0; l < 4; ++l) {
    if (eig.values[l] <= rank_tol) continue;
    Vector4 col = eig.column(l);
    const double scale = std::sqrt(eig.values[l]);
    for (auto& x : col.data) x *= scale;
    out.operators.push_back(detail::canonical_phase(unvectorize(col)));
  }
  return out;
}

// K~_l = (rho*)^{1/2} K_l^dagger (rho*)^{-1/2}.
inline KrausSet time_reversed_channel(const KrausSet& forward, const DensityMatrix& rho_star,
                                      double fixed_tol = 1e-9) {
  const double residual = (apply(forward, rho_star.matrix()) - rho_star.matrix()).max_abs();
  if (residual > fixed_tol)
    raise(Errc::NotAFixedPoint, "state is not invariant under the forward channel (residual " +
                                    std::to_string(residual) + ")");
  const PsdRoots roots = psd_sqrt_and_invsqrt(rho_star.matrix(), forward.rank_tol);
  KrausSet out;
  out.rank_tol = forward.rank_tol;
  for (const auto& k : forward.operators)
    out.operators.push_back(detail::canonical_phase(roots.sqrt * k.adjoint() * roots.inv_sqrt));
  return out;
}

// Forward N-pulse map in both representations plus its time reversal.
struct PulsedProcess {
  unsigned pulses = 0;
  Superoperator forward;
  KrausSet forward_kraus;
  KrausSet reversed;
};

// Caches the single-cycle map and its steady state for one parameter point.
class PulsedChannelModel {
 public:
  explicit PulsedChannelModel(const PulseParams& params)
      : params_(params),
        pulse_(build_pulse_superoperator(params)),
        unitary_(build_unitary_superoperator(params)),
        one_cycle_(pulse_ * unitary_),
        fixed_(reference_state(one_cycle_)) {}

  // Uses a caller-supplied pulse map in place of the one built from params.
  PulsedChannelModel(const PulseParams& params, const Superoperator& pulse)
      : params_(params),
        pulse_(pulse),
        unitary_(build_unitary_superoperator(params)),
        one_cycle_(pulse_ * unitary_),
        fixed_(reference_state(one_cycle_)) {}

  const PulseParams& params() const { return params_; }
  EnergyLevels levels() const { return params_.levels(); }
  const Superoperator& pulse() const { return pulse_; }
  const Superoperator& unitary() const { return unitary_; }
  const Superoperator& one_cycle() const { return one_cycle_; }
  const FixedPoint& fixed() const { return fixed_; }
  bool fixed_point_unique() const { return fixed_.spectral_gap > 0.0; }

  Superoperator forward(unsigned n) const { return compose_cycles(pulse_, unitary_, n); }

  // The reversed channel is rebuilt from the composed map's Kraus set.
  PulsedProcess process(unsigned n) const {
    PulsedProcess p;
    p.pulses = n;
    p.forward = forward(n);
    p.forward_kraus = kraus_from_choi(p.forward);
    p.reversed = time_reversed_channel(p.forward_kraus, fixed_.state);
    return p;
  }

 private:
  // A unital cycle (p_abs = 0 leaves only the free rotation) fixes every
  // diagonal state; I/2 is used as the reference there, which makes the
  // reversed Kraus operators the adjoints.
  static FixedPoint reference_state(const Superoperator& one_cycle) {
    try {
      return fixed_point(one_cycle);
    } catch (const Error& e) {
      if (e.code() != Errc::NonUniqueFixedPoint) throw;
      const Matrix2 half = Matrix2::identity() * 0.5;
      if ((apply(one_cycle, half) - half).max_abs() > kFixedPointTol) throw;
      return FixedPoint{DensityMatrix::from_matrix(half), 0.0, cplx(1.0, 0.0)};
    }
  }

  PulseParams params_;
  Superoperator pulse_;
  Superoperator unitary_;
  Superoperator one_cycle_;
  FixedPoint fixed_;
};

}  // namespace epmft
