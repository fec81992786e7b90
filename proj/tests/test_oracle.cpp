#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "opaug/oracle.hpp"

#include <cmath>

using namespace opaug;

namespace {

InducedModel two_state_uniform() {
    Matrix p(2, 2);
    p << 0.5, 0.5, 0.5, 0.5;
    Vector b(2);
    b << 1.0, 0.0;
    return InducedModel(p, b, Vector::Zero(2), 0.5);
}

}  // namespace

TEST_CASE("exhaustive sufficient statistics of the two-state uniform instance") {
    const auto model = two_state_uniform();
    const auto st = exhaustive_sufficient_stats(model, 1, NormSpec::residual());
    CHECK(st.b_m_sq == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(st.mean_num == doctest::Approx(13.0 / 12.0).epsilon(1e-12));
    CHECK(st.mean_den == doctest::Approx(197.0 / 144.0).epsilon(1e-12));
    CHECK(exhaustive_epsilon_star(model, 1, NormSpec::residual()) ==
          doctest::Approx(156.0 / 197.0).epsilon(1e-12));
}

TEST_CASE("exhaustive MSE curve hits the enumerated values") {
    const auto model = two_state_uniform();
    const double eps_star = 156.0 / 197.0;
    const auto curve = exhaustive_mse_curve(model, 1, {1.0, 0.85, eps_star},
                                            NormSpec::residual());
    CHECK(curve.mse_values[0] == doctest::Approx(29.0 / 144.0).epsilon(1e-12));
    CHECK(curve.mse_values[1] == doctest::Approx(8453.0 / 57600.0).epsilon(1e-12));
    CHECK(curve.mse_values[2] == doctest::Approx(28.0 / 197.0).epsilon(1e-12));
    // the quadratic's minimum is at the ratio of the sufficient statistics
    CHECK(-curve.a1 / (2.0 * curve.a2) == doctest::Approx(eps_star).epsilon(1e-12));
    // and MSE(eps*) is below every other sampled point
    CHECK(curve.mse_values[2] < curve.mse_values[0]);
    CHECK(curve.mse_values[2] < curve.mse_values[1]);
}

TEST_CASE("Monte-Carlo statistics converge to the exhaustive values") {
    const auto model = two_state_uniform();
    const RandomStream rng(301, 0);
    const auto st = mc_sufficient_stats(model, 1, 40000, NormSpec::residual(), rng);
    const auto exact = exhaustive_sufficient_stats(model, 1, NormSpec::residual());
    const double se1 = std::sqrt(st.var_num / 40000.0);
    const double se2 = std::sqrt(st.var_den / 40000.0);
    CHECK(std::abs(st.mean_num - exact.mean_num) < 5.0 * se1);
    CHECK(std::abs(st.mean_den - exact.mean_den) < 5.0 * se2);

    const auto star = mc_epsilon_star(model, 1, 40000, NormSpec::residual(), rng);
    CHECK(star.std_error > 0.0);
    CHECK(std::abs(star.value - 156.0 / 197.0) < 5.0 * star.std_error + 1e-6);
}

TEST_CASE("Monte-Carlo statistics are bit-reproducible for a fixed stream") {
    const auto model = two_state_uniform();
    const RandomStream rng(302, 5);
    const auto a = mc_sufficient_stats(model, 2, 500, NormSpec::residual(), rng);
    const auto b = mc_sufficient_stats(model, 2, 500, NormSpec::residual(), rng);
    CHECK(a.mean_num == b.mean_num);
    CHECK(a.mean_den == b.mean_den);
    CHECK(a.var_num == b.var_num);
    CHECK(a.cov_nd == b.cov_nd);
}

TEST_CASE("reward-noise trace term is exact on deterministic transitions") {
    // point-mass rows: P hat == P always, A Ahat^{-1} = I, so
    // E[s2] = ||b||^2 + sum_i cov_i / n exactly.
    Matrix p(2, 2);
    p << 0.0, 1.0, 1.0, 0.0;
    Vector b(2), cov(2);
    b << 1.0, -2.0;
    cov << 0.5, 0.25;
    const InducedModel model(p, b, cov, 0.5);
    const double b_m_sq = b.squaredNorm();

    const std::int64_t n = 4;
    const auto st = exhaustive_sufficient_stats(model, n, NormSpec::residual());
    CHECK(st.mean_num == doctest::Approx(b_m_sq).epsilon(1e-12));
    CHECK(st.mean_den ==
          doctest::Approx(b_m_sq + (0.5 + 0.25) / static_cast<double>(n)).epsilon(1e-12));
}

TEST_CASE("trace mode and sampled reward noise agree within Monte-Carlo error") {
    Matrix p(2, 2);
    p << 0.7, 0.3, 0.4, 0.6;
    Vector b(2), cov(2);
    b << 1.0, 0.5;
    cov << 0.4, 0.8;
    const InducedModel model(p, b, cov, 0.6);

    const RandomStream rng_a(303, 0);
    const RandomStream rng_b(303, 1);
    const std::int64_t trials = 40000;
    const auto trace =
        mc_sufficient_stats(model, 3, trials, NormSpec::residual(), rng_a,
                            RewardNoiseMode::Trace);
    const auto sampled =
        mc_sufficient_stats(model, 3, trials, NormSpec::residual(), rng_b,
                            RewardNoiseMode::Sample);
    const double se = std::sqrt((trace.var_den + sampled.var_den) / trials);
    CHECK(std::abs(trace.mean_den - sampled.mean_den) < 5.0 * se);
    const double se1 = std::sqrt((trace.var_num + sampled.var_num) / trials);
    CHECK(std::abs(trace.mean_num - sampled.mean_num) < 5.0 * se1);
}

TEST_CASE("surrogate MSE reproduces the closed-form quadratic and its minimizer") {
    const auto model = two_state_uniform();
    const auto moments = compute_moments(model.transition, model.reward, model.reward_cov, 1,
                                         model.discount, NormSpec::residual());
    CHECK(surrogate_mse(moments, moments.b_m_sq, 0.85) ==
          doctest::Approx(0.096875).epsilon(1e-12));
    // the surrogate's minimizer is theta
    const double lo = surrogate_mse(moments, moments.b_m_sq, 0.85);
    CHECK(lo < surrogate_mse(moments, moments.b_m_sq, 0.84));
    CHECK(lo < surrogate_mse(moments, moments.b_m_sq, 0.86));
}

TEST_CASE("error reduction comes from the fitted quadratic") {
    const auto model = two_state_uniform();
    const auto curve = exhaustive_mse_curve(model, 1, {}, NormSpec::residual());
    const auto rep = error_reduction(curve, 0.85);
    CHECK(rep.mse_naive == doctest::Approx(29.0 / 144.0).epsilon(1e-12));
    CHECK(rep.mse_augmented == doctest::Approx(8453.0 / 57600.0).epsilon(1e-12));
    CHECK(rep.eta == doctest::Approx(3147.0 / 11600.0).epsilon(1e-12));
}

TEST_CASE("exhaustive enumeration refuses oversized outcome spaces") {
    Matrix p = Matrix::Constant(8, 8, 1.0 / 8.0);
    Vector b = Vector::Ones(8);
    const InducedModel model(p, b, Vector::Zero(8), 0.5);
    CHECK_THROWS_AS(exhaustive_sufficient_stats(model, 12, NormSpec::residual()), GuardError);
}

TEST_CASE("l2 and residual norms give different but internally consistent answers") {
    const auto model = two_state_uniform();
    const auto res = exhaustive_sufficient_stats(model, 2, NormSpec::residual());
    const auto l2 = exhaustive_sufficient_stats(model, 2, NormSpec::l2_exact());
    CHECK(res.mean_den != doctest::Approx(l2.mean_den).epsilon(1e-6));
    // b_m_sq in the l2 norm is ||v||^2 = ||A^{-1} b||^2
    const Vector v = BellmanOperator(model.transition, model.discount).solve(model.reward);
    CHECK(l2.b_m_sq == doctest::Approx(v.squaredNorm()).epsilon(1e-12));
}
