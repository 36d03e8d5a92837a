#pragma once

// Qubit states in the Hamiltonian eigenbasis.
//
// Basis convention: index 0 carries energy +omega/2 (the excited level),
// index 1 carries -omega/2. |+>_y = (|0> + i|1>)/sqrt(2).

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "epmft/errors.hpp"
#include "epmft/linops.hpp"

namespace epmft {

inline constexpr double kStateTraceTol = 1e-12;
inline constexpr double kStatePsdTol = 1e-10;

// Energy levels of H = omega sigma_z / 2 with hbar = 1 and omega in units of
// 1/tau, so omega equals the dimensionless product omega*tau.
struct EnergyLevels {
  double omega = 0.0;

  double energy(std::size_t k) const { return k == 0 ? 0.5 * omega : -0.5 * omega; }
  std::array<double, 2> values() const { return {energy(0), energy(1)}; }
};

inline Matrix2 projector(std::size_t k) {
  Matrix2 p;
  p(k, k) = 1.0;
  return p;
}

// Population of level k, i.e. tr(Pi_k A); defined for any operator A.
inline double population(const Matrix2& a, std::size_t k) { return a(k, k).real(); }

class DensityMatrix {
 public:
  DensityMatrix() : m_(Matrix2::identity() * 0.5) {}

  // Validates and Hermitizes. Throws InvariantViolation for anything that is
  // not a unit-trace PSD Hermitian matrix.
  static DensityMatrix from_matrix(const Matrix2& m, double herm_tol = kStatePsdTol) {
    if (!m.all_finite()) raise(Errc::InvariantViolation, "density matrix has non-finite entries");
    if (m.hermiticity_defect() > herm_tol) raise(Errc::InvariantViolation, "density matrix is not Hermitian");
    const Matrix2 h = m.hermitian_part();
    const double tr = h.trace().real();
    if (std::abs(tr - 1.0) > std::max(kStateTraceTol, herm_tol))
      raise(Errc::InvariantViolation, "density matrix trace " + std::to_string(tr) + " differs from 1");
    // 2x2 PSD test: smallest eigenvalue of a Hermitian 2x2.
    const double a = h(0, 0).real(), d = h(1, 1).real();
    const double lmin = 0.5 * (a + d) - std::sqrt(0.25 * (a - d) * (a - d) + std::norm(h(0, 1)));
    if (lmin < -kStatePsdTol) raise(Errc::InvariantViolation, "density matrix is not positive semidefinite");
    DensityMatrix out;
    out.m_ = h;
    return out;
  }

  const Matrix2& matrix() const { return m_; }
  double population(std::size_t k) const { return m_(k, k).real(); }
  std::array<double, 2> populations() const { return {population(0), population(1)}; }

  // Diagonal part P in the energy basis.
  Matrix2 diagonal_part() const {
    Matrix2 p;
    p(0, 0) = m_(0, 0);
    p(1, 1) = m_(1, 1);
    return p;
  }

  // Traceless, strictly off-diagonal coherence chi = rho - P.
  Matrix2 coherence() const { return m_ - diagonal_part(); }

  bool has_coherence(double tol = 1e-15) const { return std::abs(m_(0, 1)) > tol; }

 private:
  Matrix2 m_;
};

enum class BasisState { ket0, ket1, plus_y, minus_y };

inline constexpr std::array<BasisState, 4> kAllBasisStates{BasisState::ket0, BasisState::ket1,
                                                           BasisState::plus_y, BasisState::minus_y};

constexpr std::size_t index_of(BasisState s) { return static_cast<std::size_t>(s); }

constexpr std::string_view label(BasisState s) {
  switch (s) {
    case BasisState::ket0: return "ket0";
    case BasisState::ket1: return "ket1";
    case BasisState::plus_y: return "plus_y";
    case BasisState::minus_y: return "minus_y";
  }
  return "?";
}

// Accepts both the file spelling (plus_y) and the CLI spelling (plus-y).
inline std::optional<BasisState> parse_basis_state(std::string_view text) {
  if (text == "ket0") return BasisState::ket0;
  if (text == "ket1") return BasisState::ket1;
  if (text == "plus_y" || text == "plus-y") return BasisState::plus_y;
  if (text == "minus_y" || text == "minus-y") return BasisState::minus_y;
  return std::nullopt;
}

inline DensityMatrix basis_state(BasisState s) {
  Matrix2 m;
  switch (s) {
    case BasisState::ket0: m(0, 0) = 1.0; break;
    case BasisState::ket1: m(1, 1) = 1.0; break;
    case BasisState::plus_y:
      m = Matrix2{{0.5, cplx(0, -0.5), cplx(0, 0.5), 0.5}};
      break;
    case BasisState::minus_y:
      m = Matrix2{{0.5, cplx(0, 0.5), cplx(0, -0.5), 0.5}};
      break;
  }
  return DensityMatrix::from_matrix(m);
}

// Convex weights over the four prepared basis states.
struct LabelMixture {
  std::array<double, 4> weights{};

  double weight(BasisState s) const { return weights[index_of(s)]; }

  void validate() const {
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) raise(Errc::DomainError, "mixture weights must be non-negative");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) raise(Errc::DomainError, "mixture weights must sum to 1");
  }

  static LabelMixture pure(BasisState s) {
    LabelMixture m;
    m.weights[index_of(s)] = 1.0;
    return m;
  }
};

// The experimental family rho0(p) = 1/2 [[1+p, -i(1-p)], [i(1-p), 1-p]]:
// weight p on the excited level |0> and 1-p on |+>_y.
inline LabelMixture experimental_mixture(double p) {
  if (!(p >= 0.0 && p <= 1.0)) raise(Errc::DomainError, "mixing probability must lie in [0, 1]");
  LabelMixture m;
  m.weights[index_of(BasisState::ket0)] = p;
  m.weights[index_of(BasisState::plus_y)] = 1.0 - p;
  return m;
}

inline DensityMatrix prepare(const LabelMixture& mix) {
  mix.validate();
  Matrix2 m;
  for (BasisState s : kAllBasisStates) {
    const double w = mix.weight(s);
    if (w != 0.0) m += basis_state(s).matrix() * w;
  }
  return DensityMatrix::from_matrix(m);
}

inline DensityMatrix experimental_initial_state(double p) { return prepare(experimental_mixture(p)); }

// Thermal populations exp(-beta E_k)/Z; beta may take either sign.
inline std::array<double, 2> thermal_populations(double beta, const EnergyLevels& levels) {
  // Shift by the larger exponent to avoid overflow for large |beta omega|.
  const double x0 = -beta * levels.energy(0), x1 = -beta * levels.energy(1);
  const double top = std::max(x0, x1);
  const double w0 = std::exp(x0 - top), w1 = std::exp(x1 - top);
  return {w0 / (w0 + w1), w1 / (w0 + w1)};
}

inline DensityMatrix thermal_state(double beta, const EnergyLevels& levels) {
  const auto p = thermal_populations(beta, levels);
  return DensityMatrix::from_matrix(Matrix2::diagonal({p[0], p[1]}));
}

// State specification shared by the CLI and config files:
// ket0 | ket1 | plus-y | minus-y | mix:<p>
struct StateSpec {
  std::string text = "plus-y";
  LabelMixture mixture = LabelMixture::pure(BasisState::plus_y);
};

inline StateSpec parse_state_spec(std::string_view text) {
  StateSpec spec;
  spec.text = std::string(text);
  if (auto s = parse_basis_state(text)) {
    spec.mixture = LabelMixture::pure(*s);
    return spec;
  }
  if (text.starts_with("mix:")) {
    const std::string num(text.substr(4));
    std::size_t used = 0;
    double p = 0.0;
    try {
      p = std::stod(num, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != num.size()) raise(Errc::ParseError, "state: cannot parse mixing probability in '" + spec.text + "'");
    if (!(p >= 0.0 && p <= 1.0)) raise(Errc::ParseError, "state: mixing probability out of [0, 1] in '" + spec.text + "'");
    spec.mixture = experimental_mixture(p);
    return spec;
  }
  raise(Errc::ParseError, "state: unknown initial state '" + spec.text + "'");
}

}  // namespace epmft
