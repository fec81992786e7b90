#pragma once

#include "opaug/mdp.hpp"
#include "opaug/rng.hpp"
#include "opaug/sampling.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace opaug {

// Covariance of one estimated transition row under multinomial sampling:
// B_i = (1/n_i) (diag(p_i) - p_i p_i^T). Symmetric, PSD, zero row sums.
inline Matrix row_covariance(const Vector& p_i, std::int64_t n_i) {
    if (n_i < 1) throw InvalidArgument("row_covariance: need n_i >= 1");
    Vector row = p_i;
    detail::check_probability_row(row.transpose(), "row_covariance");
    Matrix b = row.asDiagonal();
    b.noalias() -= row * row.transpose();
    return b / static_cast<double>(n_i);
}

// Second-moment matrices of the perturbation Y hat for a given norm M, plus
// the scalars entering theta. All entries scale exactly as 1/n.
struct AugmentationMoments {
    std::vector<Matrix> b_list;  // per-state row covariances B_i
    Matrix g_matrix;             // G = E[Y^T M Y]
    Matrix h_matrix;             // H = E[(Y^T)^2 M + M Y^2]
    Matrix m_matrix;             // the materialized M
    double g_scalar = 0.0;       // b^T G b
    double h_scalar = 0.0;       // b^T H b
    double t_scalar = 0.0;       // tr(cov[b hat] (M + G + H))
    double b_m_sq = 0.0;         // b^T M b
};

// One realized perturbation: Z = gamma (P - P hat), Y = Z A^{-1}.
struct PerturbationSample {
    Matrix z_hat;
    Matrix y_hat;
};

inline PerturbationSample make_perturbation(const BellmanOperator& op, const Matrix& p,
                                            const Matrix& p_hat, double gamma) {
    if (p.rows() != p_hat.rows() || p.cols() != p_hat.cols())
        throw DimensionError("make_perturbation: shape mismatch");
    PerturbationSample s;
    s.z_hat = gamma * (p - p_hat);
    s.y_hat = s.z_hat * op.inverse();
    return s;
}

// Assemble G, H and the theta scalars from (P, b, cov[b hat], n, gamma, M).
// The staging follows the O(|S|^3) assembly: only column i of B_i A^{-1}
// contributes through diag(e_i), so C is filled column by column.
inline AugmentationMoments compute_moments(const Matrix& p, const Vector& b,
                                           const Vector& reward_cov,
                                           const std::vector<std::int64_t>& samples_per_state,
                                           double gamma, const NormSpec& norm) {
    const auto S = p.rows();
    if (b.size() != S || reward_cov.size() != S ||
        static_cast<Eigen::Index>(samples_per_state.size()) != S)
        throw DimensionError("compute_moments: shape mismatch");
    if (!(gamma >= 0.0 && gamma < 1.0))
        throw InvalidArgument("compute_moments: gamma must lie in [0,1)");

    const BellmanOperator op(p, gamma);
    const Matrix& ainv = op.inverse();
    const Matrix m = norm.materialize(&op, &op);

    AugmentationMoments res;
    res.m_matrix = m;
    res.b_list.reserve(static_cast<std::size_t>(S));
    Matrix d = Matrix::Zero(S, S);   // sum_i M_ii B_i
    Matrix c = Matrix::Zero(S, S);   // sum_i B_i A^{-1} diag(e_i), column-sparse
    for (Eigen::Index i = 0; i < S; ++i) {
        res.b_list.push_back(
            row_covariance(p.row(i).transpose(), samples_per_state[static_cast<std::size_t>(i)]));
        const Matrix& bi = res.b_list.back();
        d.noalias() += m(i, i) * bi;
        c.col(i).noalias() = bi * ainv.col(i);
    }
    const double g2 = gamma * gamma;
    res.g_matrix.noalias() = g2 * ainv.transpose() * d * ainv;
    const Matrix c_full = g2 * ainv.transpose() * c;  // E[(Y^T)^2]
    res.h_matrix.noalias() = c_full * m;
    res.h_matrix.noalias() += m * c_full.transpose();

    res.b_m_sq = b.dot(m * b);
    res.g_scalar = b.dot(res.g_matrix * b);
    res.h_scalar = b.dot(res.h_matrix * b);
    res.t_scalar = (reward_cov.array() *
                    (m + res.g_matrix + res.h_matrix).diagonal().array())
                       .sum();
    return res;
}

inline AugmentationMoments compute_moments(const Matrix& p, const Vector& b,
                                           const Vector& reward_cov, std::int64_t n,
                                           double gamma, const NormSpec& norm) {
    std::vector<std::int64_t> ns(static_cast<std::size_t>(p.rows()), n);
    return compute_moments(p, b, reward_cov, ns, gamma, norm);
}

namespace detail {

struct ThetaParts {
    double value;
    double numerator;
    double denominator;
};

inline ThetaParts theta_from_moments(const AugmentationMoments& m) {
    if (m.b_m_sq <= 0.0)
        throw DegenerateInstance("theta: b^T M b is zero, factor undefined", m.g_scalar,
                                 m.h_scalar, m.t_scalar);
    const double num = m.b_m_sq + m.h_scalar / 2.0;
    const double den = m.b_m_sq + m.g_scalar + m.h_scalar + m.t_scalar;
    if (den <= 1e-14 * m.b_m_sq)
        throw DegenerateInstance("theta: nonpositive denominator", m.g_scalar, m.h_scalar,
                                 m.t_scalar);
    return {num / den, num, den};
}

}  // namespace detail

// theta(b, P) = (b^T (M + H/2) b) / (b^T (M + G + H) b + tr(cov (M + G + H))).
// Evaluated on the truth this is the oracle factor; on the estimate it is the
// plug-in factor -- one code path for both.
inline double theta(const Matrix& p, const Vector& b, const Vector& reward_cov,
                    const std::vector<std::int64_t>& samples_per_state, double gamma,
                    const NormSpec& norm) {
    return detail::theta_from_moments(
               compute_moments(p, b, reward_cov, samples_per_state, gamma, norm))
        .value;
}

inline double theta(const Matrix& p, const Vector& b, const Vector& reward_cov, std::int64_t n,
                    double gamma, const NormSpec& norm) {
    std::vector<std::int64_t> ns(static_cast<std::size_t>(p.rows()), n);
    return theta(p, b, reward_cov, ns, gamma, norm);
}

// Summary of the factors computed for one configuration.
struct FactorReport {
    std::optional<double> epsilon_circ;   // oracle theta(b, P)
    std::optional<double> epsilon_tilde;  // plug-in theta(b hat, P hat)
    std::optional<double> epsilon_boot;   // bootstrap approximation
    NormKind norm_kind = NormKind::Residual;
    double numerator = 0.0;
    double denominator = 0.0;
};

// Algorithm-1 plug-in factor: theta evaluated on the estimated quantities.
inline FactorReport plugin_factor(const EstimatedModel& est, const NormSpec& norm) {
    const auto moments = compute_moments(est.transition_hat, est.reward_hat, est.reward_cov_hat,
                                         est.samples_per_state, est.discount, norm);
    const auto parts = detail::theta_from_moments(moments);
    FactorReport report;
    report.epsilon_tilde = parts.value;
    report.norm_kind = norm.kind;
    report.numerator = parts.numerator;
    report.denominator = parts.denominator;
    return report;
}

// v tilde = epsilon * A hat^{-1} b hat.
inline Vector augmented_value(const EstimatedModel& est, double epsilon) {
    const BellmanOperator op(est.transition_hat, est.discount);
    return epsilon * op.solve(est.reward_hat);
}

// Bootstrap alternative: resample P tilde ~ M_n(P hat) l times, build the
// empirical G tilde / H tilde from Y = gamma (P tilde - P hat) A hat^{-1},
// and evaluate the same ratio. Converges to plugin_factor as l grows.
inline double bootstrap_factor(const EstimatedModel& est, std::int64_t l, const NormSpec& norm,
                               RandomStream& rng) {
    if (l < 1) throw InvalidArgument("bootstrap_factor: need l >= 1");
    const int S = est.num_states();
    const BellmanOperator op(est.transition_hat, est.discount);
    const Matrix& ainv = op.inverse();
    const Matrix m = norm.materialize(&op, &op);

    Matrix g_acc = Matrix::Zero(S, S);
    Matrix c_acc = Matrix::Zero(S, S);  // accumulates (Y^T)^2
    Matrix p_tilde(S, S);
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(S));
    for (std::int64_t j = 0; j < l; ++j) {
        for (int i = 0; i < S; ++i) {
            const auto n =
                static_cast<std::uint64_t>(est.samples_per_state[static_cast<std::size_t>(i)]);
            rng.multinomial(n, est.transition_hat.row(i), counts);
            for (int k = 0; k < S; ++k)
                p_tilde(i, k) = static_cast<double>(counts[static_cast<std::size_t>(k)]) /
                                static_cast<double>(n);
        }
        const Matrix y = est.discount * (est.transition_hat - p_tilde) * ainv;
        g_acc.noalias() += y.transpose() * m * y;
        c_acc.noalias() += y.transpose() * y.transpose();
    }
    const Matrix g = g_acc / static_cast<double>(l);
    const Matrix c = c_acc / static_cast<double>(l);
    const Matrix h = c * m + m * c.transpose();

    const Vector& b = est.reward_hat;
    const double b_m_sq = b.dot(m * b);
    if (b_m_sq <= 0.0) throw DegenerateInstance("bootstrap_factor: b^T M b is zero");
    const double gs = b.dot(g * b);
    const double hs = b.dot(h * b);
    const double ts =
        (est.reward_cov_hat.array() * (m + g + h).diagonal().array()).sum();
    const double den = b_m_sq + gs + hs + ts;
    if (den <= 1e-14 * b_m_sq)
        throw DegenerateInstance("bootstrap_factor: nonpositive denominator", gs, hs, ts);
    return (b_m_sq + hs / 2.0) / den;
}

}  // namespace opaug
