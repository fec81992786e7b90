#pragma once

#include "opaug/augmentation.hpp"
#include "opaug/mdp.hpp"
#include "opaug/rng.hpp"
#include "opaug/sampling.hpp"

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace opaug {

// How reward noise enters the ground-truth MSE evaluation. Trace mode uses
// the decomposition E over b hat of the error into a deterministic-b term
// plus tr(cov[b hat] Ahat^{-T} A^T M A Ahat^{-1}); Sample mode draws b hat.
enum class RewardNoiseMode { Trace, Sample };

// Both epsilon* and MSE(epsilon) are determined by the two sufficient
// statistics of a draw: s1 = b^T M A vhat and s2 = ||A vhat||_M^2 (+ reward
// trace term). One pass over draws serves every epsilon.
struct SufficientStats {
    double mean_num = 0.0;   // E[s1]
    double mean_den = 0.0;   // E[s2]
    double var_num = 0.0;    // sample variance of s1
    double var_den = 0.0;    // sample variance of s2
    double cov_nd = 0.0;     // sample covariance (s1, s2)
    std::int64_t trials = 0;
    double b_m_sq = 0.0;     // ||b||_M^2
    std::vector<double> s1;  // per-trial values (empty for exhaustive stats)
    std::vector<double> s2;
};

namespace detail {

struct NormContext {
    bool identity;  // Residual: skip the M products
    Matrix m;       // materialized otherwise
};

// In the oracle the evaluation norm is fixed; the plug-in variant of the l2
// norm only differs on the factor-estimation side, so it evaluates as l2.
inline NormContext oracle_norm(const NormSpec& norm, const BellmanOperator& op) {
    if (norm.kind == NormKind::Residual) return {true, {}};
    if (norm.kind == NormKind::L2PlugIn) {
        return {false, NormSpec::l2_exact().materialize(&op, nullptr)};
    }
    return {false, norm.materialize(&op, nullptr)};
}

inline double quad(const NormContext& ctx, const Vector& x) {
    return ctx.identity ? x.squaredNorm() : x.dot(ctx.m * x);
}

inline double bilinear(const NormContext& ctx, const Vector& x, const Vector& y) {
    return ctx.identity ? x.dot(y) : x.dot(ctx.m * y);
}

// Sufficient statistics of a single realized P hat (and optionally b hat).
inline std::pair<double, double> draw_stats(const Matrix& a, const Vector& b,
                                            const Vector& est_cov, const Matrix& p_hat,
                                            double gamma, const NormContext& ctx,
                                            const Vector* b_hat) {
    const BellmanOperator a_hat(p_hat, gamma);
    const Vector v_hat = a_hat.solve(b_hat ? *b_hat : b);
    const Vector av = a * v_hat;
    double s1 = bilinear(ctx, b, av);
    double s2 = quad(ctx, av);
    if (!b_hat && est_cov.maxCoeff() > 0.0) {
        // trace term: sum_i cov_ii || A Ahat^{-1} e_i ||_M^2
        const Matrix w = a * a_hat.inverse();
        for (Eigen::Index i = 0; i < w.cols(); ++i) {
            if (est_cov[i] == 0.0) continue;
            s2 += est_cov[i] * quad(ctx, w.col(i));
        }
    }
    return {s1, s2};
}

inline void finalize_moments(SufficientStats& st) {
    const auto t = static_cast<double>(st.trials);
    st.mean_num = pairwise_sum(st.s1) / t;
    st.mean_den = pairwise_sum(st.s2) / t;
    if (st.trials < 2) return;
    double vn = 0, vd = 0, cnd = 0;
    for (std::int64_t i = 0; i < st.trials; ++i) {
        const double dn = st.s1[static_cast<std::size_t>(i)] - st.mean_num;
        const double dd = st.s2[static_cast<std::size_t>(i)] - st.mean_den;
        vn += dn * dn;
        vd += dd * dd;
        cnd += dn * dd;
    }
    st.var_num = vn / (t - 1);
    st.var_den = vd / (t - 1);
    st.cov_nd = cnd / (t - 1);
}

}  // namespace detail

// Monte-Carlo sufficient statistics over `trials` i.i.d. draws of the
// estimated model. Trials use per-trial substreams, so any execution order
// reproduces the same statistics.
inline SufficientStats mc_sufficient_stats(const InducedModel& model, std::int64_t n,
                                           std::int64_t trials, const NormSpec& norm,
                                           const RandomStream& rng,
                                           RewardNoiseMode mode = RewardNoiseMode::Trace) {
    if (trials < 2) throw InvalidArgument("mc_sufficient_stats: need trials >= 2");
    if (n < 1) throw InvalidArgument("mc_sufficient_stats: need n >= 1");
    const int S = model.num_states();
    const BellmanOperator op(model.transition, model.discount);
    const auto ctx = detail::oracle_norm(norm, op);
    const Vector est_cov = model.reward_cov / static_cast<double>(n);

    SufficientStats st;
    st.trials = trials;
    st.b_m_sq = detail::quad(ctx, model.reward);  // MSE(0) = b^T M b, since A v = b
    st.s1.resize(static_cast<std::size_t>(trials));
    st.s2.resize(static_cast<std::size_t>(trials));

    Matrix p_hat(S, S);
    Vector b_hat(S);
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(S));
    for (std::int64_t t = 0; t < trials; ++t) {
        RandomStream sub = rng.substream(static_cast<std::uint64_t>(t));
        for (int i = 0; i < S; ++i) {
            sub.multinomial(static_cast<std::uint64_t>(n), model.transition.row(i), counts);
            for (int j = 0; j < S; ++j)
                p_hat(i, j) = static_cast<double>(counts[static_cast<std::size_t>(j)]) /
                              static_cast<double>(n);
        }
        std::pair<double, double> s;
        if (mode == RewardNoiseMode::Sample) {
            for (int i = 0; i < S; ++i)
                b_hat[i] = model.reward[i] +
                           (est_cov[i] > 0.0 ? std::sqrt(est_cov[i]) * sub.normal() : 0.0);
            s = detail::draw_stats(op.matrix(), model.reward, est_cov, p_hat, model.discount,
                                   ctx, &b_hat);
        } else {
            s = detail::draw_stats(op.matrix(), model.reward, est_cov, p_hat, model.discount,
                                   ctx, nullptr);
        }
        st.s1[static_cast<std::size_t>(t)] = s.first;
        st.s2[static_cast<std::size_t>(t)] = s.second;
    }
    detail::finalize_moments(st);
    return st;
}

namespace detail {

inline double log_multinomial_pmf(const std::vector<int>& counts, const std::vector<double>& probs,
                                  std::int64_t n) {
    double lp = std::lgamma(static_cast<double>(n) + 1.0);
    for (std::size_t j = 0; j < counts.size(); ++j) {
        lp -= std::lgamma(static_cast<double>(counts[j]) + 1.0);
        if (counts[j] > 0) lp += static_cast<double>(counts[j]) * std::log(probs[j]);
    }
    return lp;
}

// Lexicographic enumeration of all compositions of n into k parts.
inline bool next_composition(std::vector<int>& c, int n) {
    const std::size_t k = c.size();
    if (k == 1) return false;
    // find the rightmost position before the last with a nonzero to move
    for (std::size_t i = k - 1; i-- > 0;) {
        if (c[i] > 0) {
            c[i] -= 1;
            int tail = 0;
            for (std::size_t j = i + 1; j < k; ++j) {
                tail += c[j];
                c[j] = 0;
            }
            c[i + 1] = tail + 1;
            // redistribute: everything after i+1 was zeroed; move all to i+1
            (void)n;
            return true;
        }
    }
    return false;
}

inline double binom(std::int64_t n, std::int64_t k) {
    return std::exp(std::lgamma(static_cast<double>(n) + 1.0) -
                    std::lgamma(static_cast<double>(k) + 1.0) -
                    std::lgamma(static_cast<double>(n - k) + 1.0));
}

}  // namespace detail

// Exact sufficient statistics by enumerating every multinomial outcome of
// P hat with its probability. Rows enumerate over their support only.
// Guarded: the total outcome count must not exceed 1e6.
inline SufficientStats exhaustive_sufficient_stats(const InducedModel& model, std::int64_t n,
                                                   const NormSpec& norm) {
    if (n < 1) throw InvalidArgument("exhaustive_sufficient_stats: need n >= 1");
    const int S = model.num_states();
    const BellmanOperator op(model.transition, model.discount);
    const auto ctx = detail::oracle_norm(norm, op);
    const Vector est_cov = model.reward_cov / static_cast<double>(n);

    std::vector<std::vector<int>> support(static_cast<std::size_t>(S));
    std::vector<std::vector<double>> probs(static_cast<std::size_t>(S));
    double total_outcomes = 1.0;
    for (int i = 0; i < S; ++i) {
        for (int j = 0; j < S; ++j)
            if (model.transition(i, j) > 1e-15) {
                support[static_cast<std::size_t>(i)].push_back(j);
                probs[static_cast<std::size_t>(i)].push_back(model.transition(i, j));
            }
        const auto k = static_cast<std::int64_t>(support[static_cast<std::size_t>(i)].size());
        total_outcomes *= detail::binom(n + k - 1, k - 1);
        if (total_outcomes > 1e6)
            throw GuardError("exhaustive_sufficient_stats: more than 1e6 multinomial outcomes");
    }

    SufficientStats st;
    st.trials = 0;
    st.b_m_sq = detail::quad(ctx, model.reward);  // MSE(0) = b^T M b, since A v = b

    Matrix p_hat = Matrix::Zero(S, S);
    std::vector<std::vector<int>> counts(static_cast<std::size_t>(S));
    double sum_num = 0.0, sum_den = 0.0, sum_w = 0.0;

    // depth-first over rows; each level owns one row's composition
    auto recurse = [&](auto&& self, int row, double log_w) -> void {
        if (row == S) {
            const double w = std::exp(log_w);
            if (w == 0.0) return;
            const auto s = detail::draw_stats(op.matrix(), model.reward, est_cov, p_hat,
                                              model.discount, ctx, nullptr);
            sum_num += w * s.first;
            sum_den += w * s.second;
            sum_w += w;
            return;
        }
        const auto r = static_cast<std::size_t>(row);
        const std::size_t k = support[r].size();
        auto& c = counts[r];
        c.assign(k, 0);
        c[0] = static_cast<int>(n);
        do {
            for (std::size_t j = 0; j < k; ++j)
                p_hat(row, support[r][j]) =
                    static_cast<double>(c[j]) / static_cast<double>(n);
            const double lw = detail::log_multinomial_pmf(c, probs[r], n);
            self(self, row + 1, log_w + lw);
        } while (detail::next_composition(c, static_cast<int>(n)));
        for (std::size_t j = 0; j < k; ++j) p_hat(row, support[r][j]) = 0.0;
    };
    recurse(recurse, 0, 0.0);

    // probabilities sum to one up to rounding; renormalize the means
    st.mean_num = sum_num / sum_w;
    st.mean_den = sum_den / sum_w;
    return st;
}

// Monte-Carlo estimate of epsilon* = E[b^T M A vhat] / E[||A vhat||_M^2],
// with a delta-method standard error on the ratio.
struct RatioEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

inline RatioEstimate ratio_from_stats(const SufficientStats& st) {
    if (st.mean_den == 0.0) throw DegenerateInstance("epsilon*: zero denominator estimate");
    RatioEstimate r;
    r.value = st.mean_num / st.mean_den;
    if (st.trials >= 2) {
        const double m1 = st.mean_num, m2 = st.mean_den;
        const double v = st.var_num / (m2 * m2) - 2.0 * m1 * st.cov_nd / (m2 * m2 * m2) +
                         m1 * m1 * st.var_den / (m2 * m2 * m2 * m2);
        r.std_error = std::sqrt(std::max(v, 0.0) / static_cast<double>(st.trials));
    }
    return r;
}

inline RatioEstimate mc_epsilon_star(const InducedModel& model, std::int64_t n,
                                     std::int64_t trials, const NormSpec& norm,
                                     const RandomStream& rng,
                                     RewardNoiseMode mode = RewardNoiseMode::Trace) {
    return ratio_from_stats(mc_sufficient_stats(model, n, trials, norm, rng, mode));
}

inline double exhaustive_epsilon_star(const InducedModel& model, std::int64_t n,
                                      const NormSpec& norm) {
    const auto st = exhaustive_sufficient_stats(model, n, norm);
    if (st.mean_den == 0.0) throw DegenerateInstance("epsilon*: zero denominator");
    return st.mean_num / st.mean_den;
}

// Empirical MSE(epsilon) curve. MSE is exactly quadratic in epsilon, so each
// point is evaluated from the shared sufficient statistics; quad_coeffs are
// (a2, a1, a0) with MSE(eps) = a2 eps^2 + a1 eps + a0.
struct MseCurve {
    std::vector<double> epsilons;
    std::vector<double> mse_values;
    std::vector<double> std_errors;
    double a2 = 0.0, a1 = 0.0, a0 = 0.0;
};

inline MseCurve curve_from_stats(const SufficientStats& st, const std::vector<double>& epsilons) {
    MseCurve curve;
    curve.epsilons = epsilons;
    curve.a2 = st.mean_den;
    curve.a1 = -2.0 * st.mean_num;
    curve.a0 = st.b_m_sq;
    for (const double eps : epsilons) {
        curve.mse_values.push_back(curve.a0 + curve.a1 * eps + curve.a2 * eps * eps);
        if (st.trials >= 2) {
            // per-point variance of (a0 - 2 eps s1 + eps^2 s2)
            const double v = 4.0 * eps * eps * st.var_num +
                             eps * eps * eps * eps * st.var_den -
                             4.0 * eps * eps * eps * st.cov_nd;
            curve.std_errors.push_back(
                std::sqrt(std::max(v, 0.0) / static_cast<double>(st.trials)));
        } else {
            curve.std_errors.push_back(0.0);
        }
    }
    return curve;
}

inline MseCurve mse_curve(const InducedModel& model, std::int64_t n,
                          const std::vector<double>& epsilons, std::int64_t trials,
                          const NormSpec& norm, const RandomStream& rng,
                          RewardNoiseMode mode = RewardNoiseMode::Trace) {
    return curve_from_stats(mc_sufficient_stats(model, n, trials, norm, rng, mode), epsilons);
}

inline MseCurve exhaustive_mse_curve(const InducedModel& model, std::int64_t n,
                                     const std::vector<double>& epsilons, const NormSpec& norm) {
    return curve_from_stats(exhaustive_sufficient_stats(model, n, norm), epsilons);
}

// Second-order MSE surrogate (the quadratic whose exact minimizer is the
// closed-form factor): (1-eps)^2 ||b||_M^2 + (g+h+t) eps^2 - h eps.
inline double surrogate_mse(const AugmentationMoments& moments, double b_norm_sq, double epsilon) {
    const double one_minus = 1.0 - epsilon;
    return one_minus * one_minus * b_norm_sq +
           (moments.g_scalar + moments.h_scalar + moments.t_scalar) * epsilon * epsilon -
           moments.h_scalar * epsilon;
}

// Relative error reduction eta = (MSE(1) - MSE(eps)) / MSE(1), read off the
// fitted quadratic rather than the raw noisy points.
struct ReductionReport {
    double mse_naive = 0.0;
    double mse_augmented = 0.0;
    double eta = 0.0;
};

inline ReductionReport error_reduction(const MseCurve& curve, double epsilon) {
    ReductionReport rep;
    rep.mse_naive = curve.a0 + curve.a1 + curve.a2;
    rep.mse_augmented = curve.a0 + curve.a1 * epsilon + curve.a2 * epsilon * epsilon;
    if (rep.mse_naive <= 0.0)
        throw DegenerateInstance("error_reduction: MSE(1) is nonpositive");
    rep.eta = (rep.mse_naive - rep.mse_augmented) / rep.mse_naive;
    return rep;
}

}  // namespace opaug
