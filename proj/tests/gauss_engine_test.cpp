#include <gtest/gtest.h>

#include "lemma_checks.hpp"

namespace padic_density {
namespace {

using testing::LemmaStats;

void expect_ok(const LemmaStats& st, int min_draws) {
  EXPECT_TRUE(st.ok()) << st.failures << " of " << st.draws << " failed; first: " << st.first_failure;
  EXPECT_GE(st.draws, min_draws);
}

PadicApprox val(const FieldSpec& spec, detail::i64 num, int shift) {
  return PadicApprox::from_int(spec, num, 12).shifted(shift);
}

TEST(GaussEngine, SignOfGaussSum) {
  EXPECT_EQ(gauss_sign(FieldSpec::create(3, 1)), ClosedValue::imag_unit(3));
  EXPECT_EQ(gauss_sign(FieldSpec::create(5, 1)), ClosedValue::one(5));
  EXPECT_EQ(gauss_sign(FieldSpec::create(7, 1)), ClosedValue::imag_unit(7));
  EXPECT_EQ(gauss_sign(FieldSpec::create(13, 1)), ClosedValue::one(13));
  // G(1) = -i sqrt 3 for Q_3.
  const auto s3 = FieldSpec::create(3, 1);
  const ClosedValue g = gauss_sum_closed(RingElem::from_int(s3, 1, 1));
  EXPECT_EQ(g, -(ClosedValue::imag_unit(3) * ClosedValue::sqrt_p(3)));
}

TEST(GaussEngine, QuadraticIntegralExamples) {
  const auto s3 = FieldSpec::create(3, 1);
  EXPECT_EQ(quadratic_integral_odd(val(s3, 1, 2), PadicApprox::zero(s3)), ClosedValue::one(3));
  EXPECT_EQ(quadratic_integral_odd(val(s3, 1, -2), PadicApprox::zero(s3)), ClosedValue(3, Rational(1, 3)));
  // ord sigma > ord tau < 0.
  EXPECT_TRUE(quadratic_integral_odd(val(s3, 1, -1), val(s3, 1, -2)).is_zero());
  // 1/3 twisted integral is -i / sqrt 3.
  const ClosedValue tw = twisted_unit_integral(val(s3, 1, -1));
  EXPECT_NEAR(tw.numeric().real(), 0, 1e-12);
  EXPECT_NEAR(tw.numeric().imag(), -1 / std::sqrt(3.0), 1e-12);
  EXPECT_TRUE(twisted_unit_integral(val(s3, 1, 0)).is_zero());
  EXPECT_TRUE(twisted_unit_integral(val(s3, 1, -2)).is_zero());

  const auto s2 = FieldSpec::create(2, 1);
  EXPECT_TRUE(quadratic_integral_dyadic(val(s2, 1, -1), PadicApprox::zero(s2)).is_zero());
  // sigma = 1/8: e(1/8) / 2 with e(x) = exp(-2 pi i x).
  const auto v = quadratic_integral_dyadic(val(s2, 1, -3), PadicApprox::zero(s2)).numeric();
  EXPECT_NEAR(v.real(), std::cos(std::numbers::pi / 4) / 2, 1e-12);
  EXPECT_NEAR(v.imag(), -std::sin(std::numbers::pi / 4) / 2, 1e-12);

  EXPECT_EQ(hyperbolic_integral(val(s2, 1, -1), PadicApprox::zero(s2), PadicApprox::zero(s2)),
            ClosedValue(2, Rational(1, 2)));
  EXPECT_TRUE(hyperbolic_integral(val(s2, 1, 0), val(s2, 1, -1), PadicApprox::zero(s2)).is_zero());
  const RingElem rho = select_rho(s2, 12);
  EXPECT_EQ(anisotropic_integral(val(s2, 1, -1), PadicApprox::zero(s2), PadicApprox::zero(s2), rho),
            ClosedValue(2, Rational(-1, 2)));
}

TEST(GaussEngine, UnitShellExamples) {
  const auto s2 = FieldSpec::create(2, 1);
  const RingElem one = RingElem::from_int(s2, 6, 1);
  EXPECT_EQ(unit_shell_integral(one, val(s2, -1, -3), val(s2, 1, 0), 0), ClosedValue(2, Rational(1, 2)));
  EXPECT_TRUE(unit_shell_integral(one, PadicApprox::zero(s2), val(s2, 1, 0), 0).is_zero());
  EXPECT_TRUE(unit_shell_integral(one, val(s2, 1, -4), val(s2, 1, 0), 1).is_zero());
}

TEST(GaussEngine, DyadicQuadraticSum) {
  const auto s2 = FieldSpec::create(2, 1);
  const RingElem one = RingElem::from_int(s2, 1, 1), zero = RingElem::from_int(s2, 1, 0);
  EXPECT_EQ(dyadic_quadratic_sum(one, one).to_closed_value(), ClosedValue(2, Rational(2)));
  EXPECT_TRUE(dyadic_quadratic_sum(one, zero).to_closed_value().is_zero());
  // Exhaustive for f = 2.
  const auto s4 = FieldSpec::create(2, 2);
  const GrContext res(s4, 1);
  for (detail::i64 a = 1; a < 4; ++a)
    for (detail::i64 b = 0; b < 4; ++b) {
      const RingElem s(s4, 1, res.decode(a)), t(s4, 1, res.decode(b));
      EXPECT_TRUE(compare(dyadic_quadratic_sum(s, t), dyadic_quadratic_sum_closed(s, t)).equal);
    }
}

TEST(GaussEngine, GaussSumsMatchOracle) { expect_ok(testing::check_gauss_sums(15), 100); }
TEST(GaussEngine, OddQuadraticIntegralMatchesOracle) { expect_ok(testing::check_quadratic_odd(30), 100); }
TEST(GaussEngine, TwistedUnitIntegralMatchesOracle) { expect_ok(testing::check_twisted_unit(30), 100); }
TEST(GaussEngine, DyadicQuadraticIntegralMatchesOracle) { expect_ok(testing::check_quadratic_dyadic(40), 100); }
TEST(GaussEngine, HyperbolicIntegralMatchesOracle) { expect_ok(testing::check_hyperbolic(30), 100); }
TEST(GaussEngine, AnisotropicIntegralMatchesOracle) { expect_ok(testing::check_anisotropic(40), 100); }
TEST(GaussEngine, UnitShellIntegralMatchesOracle) { expect_ok(testing::check_unit_shell(50), 100); }
TEST(GaussEngine, DyadicQuadraticSumMatchesOracle) { expect_ok(testing::check_dyadic_quadratic_sum(30), 100); }

}  // namespace
}  // namespace padic_density
