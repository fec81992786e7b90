#pragma once

#include "opaug/mdp.hpp"
#include "opaug/rng.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>

namespace opaug {

enum class EnvFamily { Circle, Torus, RandomDense, RandomSparse };

inline const char* env_family_name(EnvFamily f) {
    switch (f) {
        case EnvFamily::Circle: return "circle";
        case EnvFamily::Torus: return "torus";
        case EnvFamily::RandomDense: return "random_dense";
        case EnvFamily::RandomSparse: return "random_sparse";
    }
    return "?";
}

struct EnvConfig {
    EnvFamily family = EnvFamily::Circle;
    int size = 64;        // N for circle, grid side for torus, |S| for graphs
    int sigma = 1;        // transition spread
    double delta = 0.0;   // reward noise std
    double gamma = 0.9;
    std::uint64_t seed = 0;  // graph families only
};

// Walk on a ring of N states with actions {+1, -1}: the step is (1+Z) a with
// Z uniform on {-sigma, ..., sigma}. Reward sin(2 pi s / N) + a cos(...) / 10.
// Policy pi(a | s) = 1/2 + (1/5) a sin(2 pi s / N).
inline std::pair<TabularMdp, Policy> circle_env(const EnvConfig& cfg) {
    if (cfg.size < 2) throw InvalidArgument("circle_env: need N >= 2");
    if (cfg.sigma < 1) throw InvalidArgument("circle_env: need sigma >= 1");
    const int n = cfg.size;
    const double mass = 1.0 / (2.0 * cfg.sigma + 1.0);
    std::vector<Matrix> trans(2, Matrix::Zero(n, n));
    Matrix reward(n, 2), noise(n, 2);
    Matrix policy(n, 2);
    for (int s = 0; s < n; ++s) {
        const double angle = 2.0 * std::numbers::pi * s / n;
        for (int ai = 0; ai < 2; ++ai) {
            const int a = ai == 0 ? 1 : -1;
            for (int z = -cfg.sigma; z <= cfg.sigma; ++z) {
                const int next = ((s + (1 + z) * a) % n + n) % n;
                trans[static_cast<std::size_t>(ai)](s, next) += mass;  // offsets may collide mod N
            }
            reward(s, ai) = std::sin(angle) + a * std::cos(angle) / 10.0;
            noise(s, ai) = cfg.delta;
            policy(s, ai) = 0.5 + 0.2 * a * std::sin(angle);
        }
    }
    return {TabularMdp(std::move(trans), std::move(reward), std::move(noise), cfg.gamma),
            Policy(std::move(policy))};
}

// N x N torus with actions {(+1,0), (-1,0), (0,+1), (0,-1)}; per-axis step
// (1+Z) a as in the circle case. Reward 2 + sin(2 pi i / N) + cos(2 pi j / N).
inline std::pair<TabularMdp, Policy> torus_env(const EnvConfig& cfg) {
    if (cfg.size < 2) throw InvalidArgument("torus_env: need N >= 2");
    if (cfg.sigma < 1) throw InvalidArgument("torus_env: need sigma >= 1");
    const int n = cfg.size;
    const int states = n * n;
    const double mass = 1.0 / (2.0 * cfg.sigma + 1.0);
    const int actions[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    std::vector<Matrix> trans(4, Matrix::Zero(states, states));
    Matrix reward(states, 4), noise(states, 4);
    Matrix policy(states, 4);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const int s = i * n + j;
            const double ai_angle = 2.0 * std::numbers::pi * i / n;
            const double aj_angle = 2.0 * std::numbers::pi * j / n;
            const double r = 2.0 + std::sin(ai_angle) + std::cos(aj_angle);
            for (int a = 0; a < 4; ++a) {
                const int a1 = actions[a][0], a2 = actions[a][1];
                for (int z = -cfg.sigma; z <= cfg.sigma; ++z) {
                    const int ni = ((i + (1 + z) * a1) % n + n) % n;
                    const int nj = ((j + (1 + z) * a2) % n + n) % n;
                    trans[static_cast<std::size_t>(a)](s, ni * n + nj) += mass;
                }
                reward(s, a) = r;
                noise(s, a) = cfg.delta;
                policy(s, a) = 0.25 + 0.05 * (a1 * std::cos(ai_angle) + a2 * std::sin(aj_angle));
            }
        }
    }
    return {TabularMdp(std::move(trans), std::move(reward), std::move(noise), cfg.gamma),
            Policy(std::move(policy))};
}

// Random walk on a fully connected directed graph with U(0,1) edge weights;
// b ~ N(0, I), deterministic rewards.
inline InducedModel random_dense_env(int size, double gamma, std::uint64_t seed) {
    if (size < 2) throw InvalidArgument("random_dense_env: need size >= 2");
    RandomStream rng(seed, 0);
    Matrix p(size, size);
    for (int i = 0; i < size; ++i) {
        double sum = 0.0;
        for (int j = 0; j < size; ++j) {
            p(i, j) = rng.uniform();
            sum += p(i, j);
        }
        p.row(i) /= sum;
    }
    Vector b(size);
    for (int i = 0; i < size; ++i) b[i] = rng.normal();
    return InducedModel(std::move(p), std::move(b), Vector::Zero(size), gamma);
}

// Random walk on a sparse directed graph: each vertex v picks v1, v2 != v and
// contributes edges (v1, v) and (v, v2); all existing edges get unit weight
// (duplicates collapse). Every vertex ends with indegree and outdegree >= 1.
inline InducedModel random_sparse_env(int size, double gamma, std::uint64_t seed) {
    if (size < 3) throw InvalidArgument("random_sparse_env: need size >= 3");
    RandomStream rng(seed, 0);
    Matrix adj = Matrix::Zero(size, size);
    for (int v = 0; v < size; ++v) {
        auto pick_other = [&] {
            auto r = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(size - 1));
            return r >= v ? r + 1 : r;
        };
        const int v1 = pick_other();
        const int v2 = pick_other();
        adj(v1, v) = 1.0;
        adj(v, v2) = 1.0;
    }
    Matrix p(size, size);
    for (int i = 0; i < size; ++i) p.row(i) = adj.row(i) / adj.row(i).sum();
    Vector b(size);
    for (int i = 0; i < size; ++i) b[i] = rng.normal();
    return InducedModel(std::move(p), std::move(b), Vector::Zero(size), gamma);
}

// Uniform entry point: graph families produce the induced model directly,
// circle/torus go through policy induction.
inline InducedModel make_induced_model(const EnvConfig& cfg) {
    switch (cfg.family) {
        case EnvFamily::Circle: {
            const auto [mdp, policy] = circle_env(cfg);
            return induce_policy_model(mdp, policy);
        }
        case EnvFamily::Torus: {
            const auto [mdp, policy] = torus_env(cfg);
            return induce_policy_model(mdp, policy);
        }
        case EnvFamily::RandomDense:
            return random_dense_env(cfg.size, cfg.gamma, cfg.seed);
        case EnvFamily::RandomSparse:
            return random_sparse_env(cfg.size, cfg.gamma, cfg.seed);
    }
    throw InvalidArgument("make_induced_model: unknown family");
}

}  // namespace opaug
