#include <cmath>
#include <numbers>

#include "support.hpp"

using namespace epmft;
using namespace testing_support;

TEST(DensityMatrix, Validation) {
  EXPECT_NO_THROW(DensityMatrix::from_matrix(Matrix2::identity() * 0.5));
  EXPECT_ERRC(DensityMatrix::from_matrix(Matrix2::identity()), Errc::InvariantViolation);
  EXPECT_ERRC(DensityMatrix::from_matrix(Matrix2::diagonal({1.5, -0.5})), Errc::InvariantViolation);
  Matrix2 nonherm = Matrix2::identity() * 0.5;
  nonherm(0, 1) = 0.1;
  EXPECT_ERRC(DensityMatrix::from_matrix(nonherm), Errc::InvariantViolation);
  Matrix2 nan = Matrix2::identity() * 0.5;
  nan(0, 0) = std::nan("");
  EXPECT_ERRC(DensityMatrix::from_matrix(nan), Errc::InvariantViolation);
}

TEST(DensityMatrix, DiagonalCoherenceSplit) {
  for (int t = 0; t < 50; ++t) {
    const auto rho = random_state();
    const Matrix2 chi = rho.coherence();
    EXPECT_LT(distance(rho.diagonal_part() + chi, rho.matrix()), 1e-15);
    EXPECT_EQ(chi(0, 0), cplx{});
    EXPECT_EQ(chi(1, 1), cplx{});
  }
}

TEST(BasisStates, PlusYIsEigenstateOfSigmaY) {
  const Matrix2 sy{{0.0, cplx(0, -1), cplx(0, 1), 0.0}};
  const Matrix2 p = basis_state(BasisState::plus_y).matrix();
  const Matrix2 m = basis_state(BasisState::minus_y).matrix();
  EXPECT_NEAR((sy * p).trace().real(), 1.0, 1e-15);
  EXPECT_NEAR((sy * m).trace().real(), -1.0, 1e-15);
  EXPECT_EQ(p(0, 1), cplx(0, -0.5));
}

TEST(BasisStates, LabelsRoundTrip) {
  for (BasisState s : kAllBasisStates) EXPECT_EQ(parse_basis_state(label(s)), s);
  EXPECT_EQ(parse_basis_state("plus-y"), BasisState::plus_y);
  EXPECT_EQ(parse_basis_state("minus-y"), BasisState::minus_y);
  EXPECT_FALSE(parse_basis_state("ket2"));
}

TEST(ExperimentalState, EndPoints) {
  EXPECT_LT(distance(experimental_initial_state(0.0).matrix(), basis_state(BasisState::plus_y).matrix()), 1e-15);
  EXPECT_LT(distance(experimental_initial_state(1.0).matrix(), basis_state(BasisState::ket0).matrix()), 1e-15);
}

TEST(ExperimentalState, PopulationsAndCoherence) {
  const auto rho = experimental_initial_state(0.38);
  EXPECT_NEAR(rho.population(0), 0.69, 1e-15);
  EXPECT_NEAR(rho.population(1), 0.31, 1e-15);
  EXPECT_NEAR(std::abs(rho.matrix()(0, 1)), 0.31, 1e-15);
  EXPECT_NEAR(rho.matrix()(0, 1).imag(), -0.31, 1e-15);
}

TEST(ExperimentalState, RangeChecked) {
  EXPECT_ERRC(experimental_initial_state(-0.1), Errc::DomainError);
  EXPECT_ERRC(experimental_initial_state(1.1), Errc::DomainError);
}

TEST(StateSpec, Parsing) {
  EXPECT_EQ(parse_state_spec("ket1").mixture.weight(BasisState::ket1), 1.0);
  EXPECT_EQ(parse_state_spec("plus-y").mixture.weight(BasisState::plus_y), 1.0);
  const auto m = parse_state_spec("mix:0.38").mixture;
  EXPECT_DOUBLE_EQ(m.weight(BasisState::ket0), 0.38);
  EXPECT_DOUBLE_EQ(m.weight(BasisState::plus_y), 0.62);
  EXPECT_ERRC(parse_state_spec("mix:"), Errc::ParseError);
  EXPECT_ERRC(parse_state_spec("mix:0.3x"), Errc::ParseError);
  EXPECT_ERRC(parse_state_spec("mix:1.5"), Errc::ParseError);
  EXPECT_ERRC(parse_state_spec("thermal"), Errc::ParseError);
}

TEST(Mixture, Validation) {
  LabelMixture m;
  EXPECT_ERRC(m.validate(), Errc::DomainError);
  m.weights = {0.5, 0.6, 0.0, -0.1};
  EXPECT_ERRC(m.validate(), Errc::DomainError);
  m.weights = {0.25, 0.25, 0.25, 0.25};
  EXPECT_LT(distance(prepare(m).matrix(), Matrix2::identity() * 0.5), 1e-15);
}

TEST(Thermal, PopulationsAndSign) {
  const EnergyLevels levels{2.0};
  const auto p = thermal_populations(0.0, levels);
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  const auto hot = thermal_populations(1.0, levels);  // level 0 has higher energy
  EXPECT_NEAR(hot[0] / hot[1], std::exp(-2.0), 1e-15);
  const auto inverted = thermal_populations(-1.0, levels);
  EXPECT_GT(inverted[0], inverted[1]);
  const auto extreme = thermal_populations(-1e4, levels);
  EXPECT_TRUE(std::isfinite(extreme[0]) && std::isfinite(extreme[1]));
  EXPECT_DOUBLE_EQ(extreme[0], 1.0);
}
