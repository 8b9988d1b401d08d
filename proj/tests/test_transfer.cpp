#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "qplab/transfer.hpp"

using namespace qplab;

namespace {

const double kFreeE3Rate = std::log((3.0 + std::sqrt(5.0)) / 2.0);

}  // namespace

TEST(StepMatrix, Substitution) {
  EXPECT_EQ(step_matrix(0.0, 0.0), (Matrix2<double>{0.0, 1.0, -1.0, 0.0}));
  EXPECT_EQ(step_matrix(3.0, 1.0), (Matrix2<double>{2.0, 1.0, -1.0, 0.0}));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(determinant(step_matrix(u(rng), u(rng))), 1.0);
}

TEST(Cocycle, FreeZeroEnergyIsARotation) {
  const auto v = TrigPotential::zero();
  for (long long n : {1LL, 2LL, 7LL, 1000LL, 10000LL})
    EXPECT_EQ(cocycle(Frequency::golden(), {0.1, 0.0}, 0.0, n, v).log_norm, 0.0);
}

TEST(Cocycle, ConstantCocycleGrowsAtTheSpectralRadius) {
  // Oracle: power iteration on the constant one-step matrix.
  const double oracle_rate = oracle::power_iteration_log_radius({-3.0, 1.0, -1.0, 0.0});
  EXPECT_NEAR(oracle_rate, kFreeE3Rate, 1e-12);
  EXPECT_NEAR(kFreeE3Rate, 0.9624, 1e-4);
  const auto r = cocycle(Frequency::golden(), {0.4, 0.0}, 3.0, 1000, TrigPotential::zero());
  EXPECT_NEAR(r.log_norm / 1000.0, kFreeE3Rate, 1e-3);
}

TEST(Cocycle, AlmostMathieuLongProductExceedsHermanBound) {
  const auto r = cocycle(Frequency::golden(), {0.3, 0.0}, 0.0, 10000, TrigPotential::cosine(5.0));
  EXPECT_GE(r.log_norm / 10000.0, std::log(2.5) - 0.05);
}

TEST(Cocycle, DeterminantIsOneAndNormWithinGrowthBound) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0), e(-10.0, 10.0);
  for (int trial = 0; trial < 100; ++trial) {
    const TrigPotential v = oracle::random_potential(rng);
    const double E = e(rng);
    const long long n = 1 + static_cast<long long>(u(rng) * 3000);
    const auto r = cocycle(Frequency::golden(), {u(rng), 0.0}, E, n, v);
    // det = 1 is resolvable only relative to ||M||^2.
    if (r.log_norm < 15.0) {
      const auto m = r.direction.to_matrix();
      EXPECT_NEAR(m[0] * m[3] - m[1] * m[2], 1.0, 1e-12 * std::exp(2.0 * r.log_norm) * n);
    }
    const double bound = n * log_growth_bound(v, E) + 1.0;
    EXPECT_LE(r.log_norm, bound);
    // ||M^-1|| = ||M|| for det 1, so the inverse bound is the same inequality.
    EXPECT_GE(r.log_norm, -1e-12);
  }
}

TEST(Cocycle, CompositionReproducesTheLongerProduct) {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(0.0, 1.0), e(-6.0, 6.0);
  std::uniform_int_distribution<int> len(1, 400);
  const Frequency w = Frequency::golden();
  for (int trial = 0; trial < 100; ++trial) {
    const TrigPotential v = oracle::random_potential(rng, 3, 2.0);
    const double E = e(rng);
    const Phase theta{u(rng), 0.0};
    const long long n1 = len(rng), n2 = len(rng);
    const auto whole = cocycle(w, theta, E, n1 + n2, v).direction;
    const auto first = cocycle(w, theta, E, n1, v).direction;
    const auto second = cocycle(w, w.shift(theta, n1), E, n2, v).direction;
    const auto composed = second * first;
    const double scale = whole.log_norm();
    for (int i = 0; i < 4; ++i) {
      // Entries far below the norm carry only normwise accuracy.
      if (whole.log_abs_entry(i) < scale - 10.0) continue;
      EXPECT_LE(relative_difference(whole.entry(i), composed.entry(i)), 1e-9) << "trial " << trial;
    }
  }
}

TEST(CocycleComplex, RealLineRestrictionMatches) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const TrigPotential v = oracle::random_potential(rng);
    const double x = u(rng);
    const auto real = cocycle(Frequency::golden(), {x, 0.0}, 0.7, 500, v);
    const auto cplx = cocycle_complex(Frequency::golden(), {std::complex<double>(x, 0.0), 0.0}, 0.7, 500, v);
    EXPECT_NEAR(cplx.log_norm, real.log_norm, 1e-10 * std::max(1.0, std::fabs(real.log_norm)));
  }
  const auto free = cocycle_complex(Frequency::golden(), {std::complex<double>(0.2, 0.05), 0.0}, 0.0, 300,
                                    TrigPotential::zero());
  EXPECT_NEAR(free.log_norm, 0.0, 1e-12);
}

TEST(CocycleComplex, StripExceeded) {
  EXPECT_THROW(cocycle_complex(Frequency::golden(), {std::complex<double>(0.0, 0.2), 0.0}, 0.0, 10,
                               TrigPotential::cosine(1.0, 1.0)),
               StripExceeded);
}

TEST(CocycleComplex, GrowthWhenThePotentialStaysAwayFromE) {
  // On Im z = y0, |cos(2 pi (x + i y0))| >= sinh(2 pi y0) for every x.
  const double y0 = 0.15;
  const double eps = 0.99 * std::sinh(two_pi * y0);
  const double lambda = 200.0 / eps;
  const TrigPotential v = TrigPotential::cosine(lambda, 2.0);
  for (long long n : {1LL, 10LL, 200LL, 1000LL}) {
    const auto r = cocycle_complex(Frequency::golden(), {std::complex<double>(0.0, y0), 0.0}, 0.0, n, v);
    EXPECT_GE(r.log_norm, n * std::log(lambda * eps - 1.0));
  }
}

TEST(DetRecurrence, SmallBoxes) {
  const Frequency w = Frequency::golden();
  const auto v = TrigPotential::cosine(5.0);
  const double a = v(w.shift({0.2, 0.0}, 4));
  const auto one = det_recurrence({4, 4}, w, {0.2, 0.0}, 1.5, v);
  EXPECT_NEAR(one.d_n.to_double(), a - 1.5, 1e-14);
  EXPECT_EQ(one.d_n1.to_double(), 1.0);
  EXPECT_TRUE(one.d_n2.is_zero());
  const double b = v(w.shift({0.2, 0.0}, 5));
  const auto two = det_recurrence({4, 5}, w, {0.2, 0.0}, 1.5, v);
  EXPECT_NEAR(two.d_n.to_double(), (a - 1.5) * (b - 1.5) - 1.0, 1e-13);
  EXPECT_NEAR(two.d_n1.to_double(), a - 1.5, 1e-14);
}

TEST(DetRecurrence, MatchesDenseDeterminants) {
  std::mt19937_64 rng(24);
  std::uniform_real_distribution<double> u(0.0, 1.0), e(-5.0, 5.0);
  std::uniform_int_distribution<int> len(1, 12);
  const Frequency w = Frequency::golden();
  for (int trial = 0; trial < 300; ++trial) {
    const TrigPotential v = oracle::random_potential(rng);
    const double E = e(rng);
    const Phase theta{u(rng), 0.0};
    const int n = len(rng);
    std::vector<double> diag = orbit_values(v, w, theta, 1, n);
    for (double& d : diag) d -= E;
    const long double ref = oracle::determinant(oracle::tridiagonal(diag));
    const auto t = det_recurrence({1, n}, w, theta, E, v);
    const double got = t.d_n.to_double();
    EXPECT_LE(std::fabs(got - ref), 1e-9 * std::fabs(ref) + 1e-12) << "n=" << n;
    // The recurrence itself.
    if (n >= 2) {
      const auto shorter = det_recurrence({1, n - 1}, w, theta, E, v);
      EXPECT_LE(relative_difference(shorter.d_n, t.d_n1), 1e-12);
    }
  }
}

TEST(DetIdentity, FreeCase) {
  EXPECT_LE(verify_det_identity(4, Frequency::golden(), {0.0, 0.0}, 0.0, TrigPotential::zero()), 1e-12);
}

TEST(DetIdentity, AlmostMathieuAndRandomConfigurations) {
  std::mt19937_64 rng(25);
  std::uniform_real_distribution<double> u(0.0, 1.0), e(-10.0, 10.0);
  std::uniform_int_distribution<int> len(3, 64);
  const Frequency w = Frequency::golden();
  EXPECT_LE(verify_det_identity(64, w, {u(rng), 0.0}, 0.0, TrigPotential::cosine(5.0)), 1e-9);
  for (int trial = 0; trial < 200; ++trial) {
    const TrigPotential v = oracle::random_potential(rng);
    EXPECT_LE(verify_det_identity(len(rng), w, {u(rng), 0.0}, e(rng), v), 1e-9);
  }
  EXPECT_THROW(verify_det_identity(2, w, {0.0, 0.0}, 0.0, TrigPotential::zero()), std::invalid_argument);
}

TEST(GrowthEnvelope, FreeCaseAndIdentityShift) {
  const auto g = growth_envelope(50, Frequency::golden(), {0.3, 0.0}, 0.0, TrigPotential::zero(), 0, 10);
  EXPECT_TRUE(g.holds);
  for (double x : g.log_norms) EXPECT_EQ(x, 0.0);
  const auto id = growth_envelope(300, Frequency::golden(), {0.3, 0.0}, 1.0, TrigPotential::cosine(5.0), 0, 0);
  EXPECT_EQ(id.max_excess, 0.0);
}

TEST(GrowthEnvelope, ShiftBoundForAlmostMathieu) {
  const auto g = growth_envelope(500, Frequency::golden(), {0.1, 0.0}, 0.5, TrigPotential::cosine(5.0), -20, 20);
  EXPECT_TRUE(g.holds);
  EXPECT_EQ(g.log_norms.size(), 500u);
  EXPECT_NEAR(g.constant, 2.0 * std::log(1.0 + 5.0 * std::exp(two_pi * 0.1) + 0.5), 1e-6);
}
