#pragma once

#include <random>

#include <gtest/gtest.h>

#include "epmft/channel.hpp"
#include "epmft/errors.hpp"
#include "epmft/linops.hpp"
#include "epmft/state.hpp"

// Expects `stmt` to throw epmft::Error with the given code.
#define EXPECT_ERRC(stmt, errc)                                                        \
  do {                                                                                 \
    try {                                                                              \
      stmt;                                                                            \
      ADD_FAILURE() << "expected " << epmft::to_string(errc) << ", nothing thrown";    \
    } catch (const epmft::Error& e_) {                                                 \
      EXPECT_EQ(e_.code(), errc) << e_.what();                                         \
    }                                                                                  \
  } while (0)

namespace testing_support {

using namespace epmft;

inline std::mt19937_64& rng() {
  static std::mt19937_64 gen(20240611);
  return gen;
}

inline double uniform(double lo = -1.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng());
}

template <std::size_t N>
Matrix<N> random_matrix() {
  Matrix<N> m;
  for (auto& x : m.data) x = cplx(uniform(), uniform());
  return m;
}

template <std::size_t N>
Matrix<N> random_hermitian() {
  const auto a = random_matrix<N>();
  return (a + a.adjoint()) * 0.5;
}

// Random full-rank state: A A^dagger / tr, mixed with a little identity.
inline DensityMatrix random_state(double floor = 0.02) {
  const auto a = random_matrix<2>();
  Matrix2 m = a * a.adjoint();
  m = m * (1.0 / m.trace().real());
  return DensityMatrix::from_matrix(m * (1.0 - 2.0 * floor) + Matrix2::identity() * floor);
}

inline PulseParams random_params() {
  PulseParams p;
  p.p_abs = uniform(0.05, 1.0);
  p.p_d = uniform(0.0, 1.0);
  p.alpha = uniform(0.05, 1.5);
  p.omega_tau = uniform(0.0, 2.0 * 3.141592653589793);
  return p;
}

inline PulseParams reference_params() { return PulseParams::nv_reference(); }

}  // namespace testing_support
