#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "opaug/rng.hpp"
#include "opaug/sampling.hpp"
#include "opaug/environments.hpp"

#include <cmath>
#include <vector>

using namespace opaug;

TEST_CASE("streams are reproducible and substreams are independent of draw order") {
    RandomStream a(42, 7);
    RandomStream b(42, 7);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    const RandomStream parent(99, 0);
    RandomStream s3_first = parent.substream(3);
    const std::uint64_t expect = s3_first.next_u64();
    RandomStream s0 = parent.substream(0);
    (void)s0.next_u64();
    RandomStream s3_again = parent.substream(3);
    CHECK(s3_again.next_u64() == expect);

    // distinct stream ids diverge
    RandomStream c(42, 8);
    RandomStream d(42, 7);
    CHECK(c.next_u64() != d.next_u64());
}

TEST_CASE("uniform draws live in [0,1) with roughly correct mean") {
    RandomStream rng(1, 0);
    double sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(std::abs(sum / n - 0.5) < 0.01);
}

TEST_CASE("normal draws have mean 0 and variance 1 within Monte-Carlo error") {
    RandomStream rng(2, 0);
    const int n = 40000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        s += x;
        s2 += x * x;
    }
    CHECK(std::abs(s / n) < 0.02);
    CHECK(std::abs(s2 / n - 1.0) < 0.03);
}

TEST_CASE("binomial matches its first two moments and respects edge cases") {
    RandomStream rng(3, 0);
    CHECK(rng.binomial(10, 0.0) == 0);
    CHECK(rng.binomial(10, 1.0) == 10);
    CHECK(rng.binomial(0, 0.5) == 0);

    const int trials = 20000;
    const double p = 0.3;
    const std::uint64_t count = 12;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < trials; ++i) {
        const double k = static_cast<double>(rng.binomial(count, p));
        s += k;
        s2 += k * k;
    }
    const double mean = s / trials;
    const double var = s2 / trials - mean * mean;
    CHECK(std::abs(mean - count * p) < 0.05);
    CHECK(std::abs(var - count * p * (1.0 - p)) < 0.1);
}

TEST_CASE("multinomial counts sum to n and match cell expectations") {
    RandomStream rng(4, 0);
    Eigen::RowVectorXd probs(4);
    probs << 0.1, 0.2, 0.3, 0.4;
    const std::uint64_t n = 50;
    const int trials = 5000;
    std::vector<std::uint64_t> counts(4);
    std::vector<double> means(4, 0.0);
    for (int t = 0; t < trials; ++t) {
        rng.multinomial(n, probs, counts);
        std::uint64_t total = 0;
        for (auto c : counts) total += c;
        REQUIRE(total == n);
        for (int j = 0; j < 4; ++j) means[static_cast<std::size_t>(j)] += static_cast<double>(counts[static_cast<std::size_t>(j)]);
    }
    for (int j = 0; j < 4; ++j)
        CHECK(std::abs(means[static_cast<std::size_t>(j)] / trials - n * probs[j]) < 0.3);
}

TEST_CASE("estimated model: rows are empirical frequencies with resolution 1/n") {
    const auto model = random_dense_env(6, 0.8, 11);
    RandomStream rng(5, 0);
    const std::int64_t n = 16;
    const auto est = sample_estimated_model(model, n, rng);
    CHECK(est.discount == model.discount);
    for (int i = 0; i < 6; ++i) {
        CHECK(est.transition_hat.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
        for (int j = 0; j < 6; ++j) {
            const double scaled = est.transition_hat(i, j) * static_cast<double>(n);
            CHECK(std::abs(scaled - std::round(scaled)) < 1e-9);
        }
        CHECK(est.samples_per_state[static_cast<std::size_t>(i)] == n);
    }
    // deterministic rewards: b hat = b up to the rounding of the n-fold average
    CHECK((est.reward_hat - model.reward).norm() < 1e-14);
    CHECK(est.reward_cov_hat.norm() == 0.0);
}

TEST_CASE("estimated model consistency: mean over many draws approaches P") {
    const auto model = random_dense_env(4, 0.8, 12);
    RandomStream rng(6, 0);
    std::vector<EstimatedModel> models;
    for (int t = 0; t < 3000; ++t) {
        RandomStream sub = rng.substream(static_cast<std::uint64_t>(t));
        models.push_back(sample_estimated_model(model, 8, sub));
    }
    const Matrix mean = empirical_mean_transition(models);
    CHECK((mean - model.transition).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("reward covariance: oracle mode uses truth/n, sample mode needs n >= 2") {
    EnvConfig cfg;
    cfg.family = EnvFamily::Circle;
    cfg.size = 16;
    cfg.sigma = 1;
    cfg.delta = 0.2;
    cfg.gamma = 0.9;
    const auto model = make_induced_model(cfg);

    RandomStream rng(7, 0);
    const auto est = sample_estimated_model(model, 10, rng, RewardCovMode::Oracle);
    CHECK((est.reward_cov_hat - model.reward_cov / 10.0).norm() < 1e-14);

    RandomStream rng2(7, 1);
    CHECK_THROWS_AS(sample_estimated_model(model, 1, rng2, RewardCovMode::Sample),
                    InvalidArgument);

    // sample-mode variance should concentrate near the oracle value
    RandomStream rng3(7, 2);
    const std::int64_t n = 4000;
    const auto big = sample_estimated_model(model, n, rng3, RewardCovMode::Sample);
    const Vector target = model.reward_cov / static_cast<double>(n);
    CHECK(((big.reward_cov_hat - target).cwiseAbs().array() <=
           0.2 * model.reward_cov.maxCoeff() / static_cast<double>(n) + 1e-12)
              .all());
}

TEST_CASE("reward estimates average n noisy draws") {
    Matrix p(1, 1);
    p << 1.0;
    Vector b(1), cov(1);
    b << 2.0;
    cov << 1.0;
    const InducedModel model(p, b, cov, 0.5);
    RandomStream rng(8, 0);
    const std::int64_t n = 100000;
    const auto est = sample_estimated_model(model, n, rng);
    CHECK(std::abs(est.reward_hat[0] - 2.0) < 0.02);  // sd = 1/sqrt(n) ~ 0.003
}
