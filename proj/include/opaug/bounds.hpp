#pragma once

#include "opaug/augmentation.hpp"
#include "opaug/mdp.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>

namespace opaug {

// Sample-size thresholds and the n-dependent upper bound for the closed-form
// factor in the residual norm.
struct BasicBounds {
    double n_positive_threshold = 0.0;  // 8 gamma^2 / (1-gamma)^2
    double n_upper_threshold = 0.0;     // 16 gamma^2 / (1-gamma)^2
    double upper_bound = 0.0;           // 1 + 8 gamma^2 / ((1-gamma)^2 n)
    bool positivity_applies = false;    // n >= n_positive_threshold
    bool upper_applies = false;         // n >= n_upper_threshold
};

inline BasicBounds basic_bounds(double gamma, std::int64_t n) {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidArgument("basic_bounds: gamma in [0,1)");
    if (n < 1) throw InvalidArgument("basic_bounds: n >= 1");
    BasicBounds b;
    const double ratio = gamma * gamma / ((1.0 - gamma) * (1.0 - gamma));
    b.n_positive_threshold = 8.0 * ratio;
    b.n_upper_threshold = 16.0 * ratio;
    b.upper_bound = 1.0 + 8.0 * ratio / static_cast<double>(n);
    b.positivity_applies = static_cast<double>(n) >= b.n_positive_threshold;
    b.upper_applies = static_cast<double>(n) >= b.n_upper_threshold;
    return b;
}

// Tighter upper bound for spread (P, b):
// 1 + (p_M/n)(gamma^2/(1-gamma)^2)((1-gamma) + gamma sqrt(|S|) b_M/||b||_2)^2,
// applicable when the displayed quantity is <= 1/2.
struct SpreadBound {
    double condition_value = 0.0;
    bool applicable = false;
    double upper_bound = 0.0;
    double p_max = 0.0;
    double b_max = 0.0;
};

inline SpreadBound spread_bound(const Matrix& p, const Vector& b, double gamma, std::int64_t n) {
    if (b.size() != p.rows()) throw DimensionError("spread_bound: size mismatch");
    const double b_norm = b.norm();
    if (b_norm == 0.0) throw InvalidArgument("spread_bound: b must be nonzero");
    SpreadBound s;
    s.p_max = p.maxCoeff();
    s.b_max = b.cwiseAbs().maxCoeff();
    const double ratio = gamma * gamma / ((1.0 - gamma) * (1.0 - gamma));
    const double spread =
        (1.0 - gamma) + gamma * std::sqrt(static_cast<double>(p.rows())) * s.b_max / b_norm;
    s.condition_value = s.p_max / static_cast<double>(n) * ratio * spread * spread;
    s.applicable = s.condition_value <= 0.5;
    s.upper_bound = 1.0 + s.condition_value;
    return s;
}

// Entrywise envelope b + gamma/(1-gamma) b_min 1 <= (I-gamma P)^{-1} b
//                 <= b + gamma/(1-gamma) b_max 1 (signed min/max).
inline std::pair<Vector, Vector> value_envelope(const Matrix& p, const Vector& b, double gamma) {
    if (b.size() != p.rows()) throw DimensionError("value_envelope: size mismatch");
    const double factor = gamma / (1.0 - gamma);
    const Vector lower = b.array() + factor * b.minCoeff();
    const Vector upper = b.array() + factor * b.maxCoeff();
    return {lower, upper};
}

// |A^{-1} b| <= A^{-1} |b| entrywise; always true, used as a test oracle.
inline bool abs_dominance_check(const Matrix& p, const Vector& b, double gamma) {
    const BellmanOperator op(p, gamma);
    const Vector x = op.solve(b);
    const Vector y = op.solve(b.cwiseAbs());
    return (x.cwiseAbs().array() <= y.array() + 1e-12).all();
}

// kappa = largest number of nonzero transitions over all rows of P.
inline int transition_kappa(const Matrix& p) {
    int kappa = 0;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        int cnt = 0;
        for (Eigen::Index j = 0; j < p.cols(); ++j)
            if (p(i, j) > 1e-15) ++cnt;
        kappa = std::max(kappa, cnt);
    }
    return kappa;
}

// Smallest n guaranteeing P[rho(Y hat) < 1/C] >= 1 - |S|^{1-q}:
// n >= (2 C^2 gamma^2 kappa / (1-gamma)^2) log(2 |S|^q), natural log.
inline std::int64_t neumann_requirement(int kappa, int num_states, double gamma, double c,
                                        int q) {
    if (c <= 0.0) throw InvalidArgument("neumann_requirement: C > 0");
    if (q < 2) throw InvalidArgument("neumann_requirement: q >= 2");
    if (kappa < 1) throw InvalidArgument("neumann_requirement: kappa >= 1");
    const double threshold = 2.0 * c * c * gamma * gamma * static_cast<double>(kappa) /
                             ((1.0 - gamma) * (1.0 - gamma)) *
                             std::log(2.0 * std::pow(static_cast<double>(num_states), q));
    return static_cast<std::int64_t>(std::ceil(threshold));
}

inline std::int64_t neumann_requirement(const Matrix& p, double gamma, double c, int q) {
    return neumann_requirement(transition_kappa(p), static_cast<int>(p.rows()), gamma, c, q);
}

// rho(Y hat): dense eigendecomposition up to 256 states, power iteration on
// Y^T Y beyond that.
inline double spectral_radius_yhat(const PerturbationSample& sample) {
    const Matrix& y = sample.y_hat;
    if (y.rows() <= 256) {
        Eigen::EigenSolver<Matrix> es(y, /*computeEigenvectors=*/false);
        if (es.info() != Eigen::Success)
            throw GuardError("spectral_radius_yhat: eigensolver failed");
        return es.eigenvalues().cwiseAbs().maxCoeff();
    }
    // power iteration on the symmetrized problem gives ||Y||_2 >= rho(Y);
    // beyond the dense cutoff the 2-norm stands in for the radius
    Vector v = Vector::Ones(y.rows()).normalized();
    double est = 0.0;
    for (int it = 0; it < 200; ++it) {
        Vector w = y.transpose() * (y * v);
        const double norm = w.norm();
        if (norm == 0.0) return 0.0;
        v = w / norm;
        est = std::sqrt(norm);
    }
    return est;
}

// Proof-chain metadata: ||Y hat||_inf <= ||Z hat||_inf / (1 - gamma).
inline double yhat_inf_norm_bound(const PerturbationSample& sample, double gamma) {
    const double z_inf = sample.z_hat.cwiseAbs().rowwise().sum().maxCoeff();
    return z_inf / (1.0 - gamma);
}

// Everything in one report, for the CLI and the preflight checks.
struct BoundsReport {
    double n_positive_threshold = 0.0;
    double n_upper_threshold = 0.0;
    double upper_bound_basic = 0.0;
    double p_max = 0.0;
    double b_max = 0.0;
    double spread_condition = 0.0;
    bool spread_applicable = false;
    double upper_bound_spread = 0.0;
    int kappa = 0;
    std::int64_t neumann_n_required = 0;
    std::optional<double> spectral_radius;
};

inline BoundsReport bounds_report(const Matrix& p, const Vector& b, double gamma, std::int64_t n,
                                  double c = 1.0, int q = 2,
                                  const PerturbationSample* sample = nullptr) {
    BoundsReport rep;
    const auto basic = basic_bounds(gamma, n);
    rep.n_positive_threshold = basic.n_positive_threshold;
    rep.n_upper_threshold = basic.n_upper_threshold;
    rep.upper_bound_basic = basic.upper_bound;
    const auto spread = spread_bound(p, b, gamma, n);
    rep.p_max = spread.p_max;
    rep.b_max = spread.b_max;
    rep.spread_condition = spread.condition_value;
    rep.spread_applicable = spread.applicable;
    rep.upper_bound_spread = spread.upper_bound;
    rep.kappa = transition_kappa(p);
    rep.neumann_n_required = neumann_requirement(rep.kappa, static_cast<int>(p.rows()), gamma, c, q);
    if (sample) rep.spectral_radius = spectral_radius_yhat(*sample);
    return rep;
}

}  // namespace opaug
