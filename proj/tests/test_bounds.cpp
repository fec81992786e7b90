#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "opaug/bounds.hpp"
#include "opaug/environments.hpp"
#include "opaug/rng.hpp"

#include <cmath>

using namespace opaug;

namespace {

Matrix random_stochastic(int s, RandomStream& rng) {
    Matrix p(s, s);
    for (int i = 0; i < s; ++i) {
        double sum = 0.0;
        for (int j = 0; j < s; ++j) {
            p(i, j) = 0.05 + rng.uniform();
            sum += p(i, j);
        }
        p.row(i) /= sum;
    }
    return p;
}

}  // namespace

TEST_CASE("basic bounds: thresholds and upper bound at gamma = 1/2") {
    const auto b = basic_bounds(0.5, 16);
    CHECK(b.n_positive_threshold == doctest::Approx(8.0));
    CHECK(b.n_upper_threshold == doctest::Approx(16.0));
    CHECK(b.upper_bound == doctest::Approx(1.5));
    CHECK(b.positivity_applies);
    CHECK(b.upper_applies);

    const auto small = basic_bounds(0.5, 7);
    CHECK_FALSE(small.positivity_applies);
    CHECK_FALSE(small.upper_applies);
    CHECK_THROWS_AS(basic_bounds(1.0, 4), InvalidArgument);
}

TEST_CASE("spread bound on the two-state uniform instance") {
    Matrix p(2, 2);
    p << 0.5, 0.5, 0.5, 0.5;
    Vector b(2);
    b << 1.0, 0.0;
    const auto s = spread_bound(p, b, 0.5, 2);
    CHECK(s.p_max == doctest::Approx(0.5));
    CHECK(s.b_max == doctest::Approx(1.0));
    const double spread = 0.5 + 0.5 * std::sqrt(2.0);
    const double cond = 0.5 / 2.0 * 1.0 * spread * spread;
    CHECK(s.condition_value == doctest::Approx(cond).epsilon(1e-14));
    CHECK(s.applicable == (cond <= 0.5));
    CHECK(s.upper_bound == doctest::Approx(1.0 + cond).epsilon(1e-14));
}

TEST_CASE("value envelope contains the true value on random instances") {
    RandomStream rng(401, 0);
    for (int t = 0; t < 50; ++t) {
        const int s = 2 + static_cast<int>(rng.next_u64() % 7);
        const double gamma = 0.2 + 0.6 * rng.uniform();
        const Matrix p = random_stochastic(s, rng);
        Vector b(s);
        for (int i = 0; i < s; ++i) b[i] = rng.normal();
        const auto [lower, upper] = value_envelope(p, b, gamma);
        const Vector v = BellmanOperator(p, gamma).solve(b);
        CHECK((v.array() >= lower.array() - 1e-10).all());
        CHECK((v.array() <= upper.array() + 1e-10).all());
    }
}

TEST_CASE("absolute dominance holds on random instances") {
    RandomStream rng(402, 0);
    for (int t = 0; t < 50; ++t) {
        const int s = 2 + static_cast<int>(rng.next_u64() % 7);
        const double gamma = 0.2 + 0.7 * rng.uniform();
        const Matrix p = random_stochastic(s, rng);
        Vector b(s);
        for (int i = 0; i < s; ++i) b[i] = rng.normal();
        CHECK(abs_dominance_check(p, b, gamma));
    }
}

TEST_CASE("kappa counts the widest row support") {
    EnvConfig cfg;
    cfg.family = EnvFamily::Circle;
    cfg.size = 64;
    cfg.gamma = 0.9;
    for (int sigma : {1, 2, 4}) {
        cfg.sigma = sigma;
        const auto model = make_induced_model(cfg);
        // the policy mixes both actions, widening the support beyond one action's 2*sigma+1
        CHECK(transition_kappa(model.transition) >= 2 * sigma + 1);
        const auto [mdp, policy] = circle_env(cfg);
        CHECK(transition_kappa(mdp.transition[0]) == 2 * sigma + 1);
    }
}

TEST_CASE("neumann requirement: closed form with natural log") {
    // kappa=4, |S|=64, gamma=0.5, C=1, q=2:
    // 2 * 0.25 * 4 / 0.25 * ln(2 * 64^2) = 8 ln(8192)
    const double expected = 8.0 * std::log(8192.0);
    CHECK(neumann_requirement(4, 64, 0.5, 1.0, 2) ==
          static_cast<std::int64_t>(std::ceil(expected)));
    CHECK(neumann_requirement(4, 64, 0.5, 1.0, 2) == 73);
    CHECK_THROWS_AS(neumann_requirement(0, 64, 0.5, 1.0, 2), InvalidArgument);
    CHECK_THROWS_AS(neumann_requirement(4, 64, 0.5, 0.0, 2), InvalidArgument);
}

TEST_CASE("spectral radius of a hand-built perturbation") {
    Matrix p(2, 2);
    p << 0.5, 0.5, 0.5, 0.5;
    const BellmanOperator op(p, 0.5);
    Matrix p_hat(2, 2);
    p_hat << 1.0, 0.0, 0.0, 1.0;
    const auto s = make_perturbation(op, p, p_hat, 0.5);
    // Y = [[-0.25, 0.25], [0.25, -0.25]] * A^{-1} has eigenvalues {0, -1/2}
    CHECK(spectral_radius_yhat(s) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(yhat_inf_norm_bound(s, 0.5) == doctest::Approx(1.0).epsilon(1e-12));

    const auto zero = make_perturbation(op, p, p, 0.5);
    CHECK(spectral_radius_yhat(zero) == doctest::Approx(0.0));
}

TEST_CASE("bounds report aggregates the individual pieces") {
    Matrix p(2, 2);
    p << 0.5, 0.5, 0.5, 0.5;
    Vector b(2);
    b << 1.0, 0.0;
    const auto rep = bounds_report(p, b, 0.5, 16);
    CHECK(rep.n_positive_threshold == doctest::Approx(8.0));
    CHECK(rep.upper_bound_basic == doctest::Approx(1.5));
    CHECK(rep.kappa == 2);
    CHECK(rep.neumann_n_required == neumann_requirement(2, 2, 0.5, 1.0, 2));
    CHECK_FALSE(rep.spectral_radius.has_value());

    const BellmanOperator op(p, 0.5);
    Matrix p_hat(2, 2);
    p_hat << 1.0, 0.0, 0.0, 1.0;
    const auto pert = make_perturbation(op, p, p_hat, 0.5);
    const auto with_radius = bounds_report(p, b, 0.5, 16, 1.0, 2, &pert);
    REQUIRE(with_radius.spectral_radius.has_value());
    CHECK(*with_radius.spectral_radius == doctest::Approx(0.5).epsilon(1e-12));
}
