#pragma once

#include "opaug/common.hpp"

#include <Eigen/LU>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

namespace opaug {

namespace detail {

// Probability rows are renormalized when the sum is off by at most 1e-9
// (config-file rounding) and rejected otherwise.
template <typename Derived>
void check_probability_row(Eigen::MatrixBase<Derived>&& row, const char* what) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < row.size(); ++j) {
        if (row[j] < 0.0) throw InvalidArgument(std::string(what) + ": negative probability entry");
        sum += row[j];
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw InvalidArgument(std::string(what) + ": row sum deviates from 1 by more than 1e-9");
    if (sum != 1.0) row /= sum;
}

}  // namespace detail

// Ground-truth environment: transition tensor indexed [action](state, state'),
// per-(state, action) mean reward and reward noise standard deviation, and
// the discount factor.
struct TabularMdp {
    int num_states = 0;
    int num_actions = 0;
    std::vector<Matrix> transition;   // one |S| x |S| matrix per action
    Matrix reward_mean;               // |S| x |A|
    Matrix reward_noise_std;          // |S| x |A|
    double discount = 0.0;

    TabularMdp(std::vector<Matrix> trans, Matrix rewards, Matrix noise_std, double gamma)
        : num_states(static_cast<int>(rewards.rows())),
          num_actions(static_cast<int>(rewards.cols())),
          transition(std::move(trans)),
          reward_mean(std::move(rewards)),
          reward_noise_std(std::move(noise_std)),
          discount(gamma) {
        if (num_states <= 0 || num_actions <= 0)
            throw InvalidArgument("TabularMdp: need at least one state and one action");
        if (!(discount > 0.0 && discount < 1.0))
            throw InvalidArgument("TabularMdp: discount must lie strictly inside (0,1)");
        if (static_cast<int>(transition.size()) != num_actions)
            throw DimensionError("TabularMdp: transition tensor has wrong number of actions");
        if (reward_noise_std.rows() != num_states || reward_noise_std.cols() != num_actions)
            throw DimensionError("TabularMdp: reward_noise_std shape mismatch");
        if ((reward_noise_std.array() < 0.0).any())
            throw InvalidArgument("TabularMdp: reward noise std must be nonnegative");
        for (auto& pa : transition) {
            if (pa.rows() != num_states || pa.cols() != num_states)
                throw DimensionError("TabularMdp: transition matrix shape mismatch");
            for (int s = 0; s < num_states; ++s)
                detail::check_probability_row(pa.row(s), "TabularMdp transition");
        }
    }
};

// Row s is the action distribution followed in state s.
struct Policy {
    Matrix probs;  // |S| x |A|

    explicit Policy(Matrix p) : probs(std::move(p)) {
        for (int s = 0; s < probs.rows(); ++s)
            detail::check_probability_row(probs.row(s), "Policy");
    }
};

// Policy-induced pair (P, b) plus the per-sample reward variance. reward_cov
// holds the variance of a *single* observed reward at each state; divide by
// the sample count n to get cov[b hat] for an n-sample average.
struct InducedModel {
    Matrix transition;   // P, |S| x |S|
    Vector reward;       // b
    Vector reward_cov;   // diagonal of the per-sample reward covariance
    double discount = 0.0;

    InducedModel(Matrix p, Vector b, Vector cov, double gamma)
        : transition(std::move(p)), reward(std::move(b)), reward_cov(std::move(cov)), discount(gamma) {
        if (discount < 0.0 || discount >= 1.0)
            throw InvalidArgument("InducedModel: discount must lie in [0,1)");
        const auto n = transition.rows();
        if (transition.cols() != n || reward.size() != n || reward_cov.size() != n)
            throw DimensionError("InducedModel: shape mismatch");
        if ((reward_cov.array() < 0.0).any())
            throw InvalidArgument("InducedModel: reward covariance must be nonnegative");
        for (Eigen::Index s = 0; s < n; ++s)
            detail::check_probability_row(transition.row(s), "InducedModel transition");
    }

    int num_states() const { return static_cast<int>(transition.rows()); }
};

// A = I - gamma * P, factored once and reused for all solves with A and A^T.
// The explicit inverse is built lazily (first use) and then shared; the
// operator is immutable and safe to share read-only across workers.
class BellmanOperator {
public:
    BellmanOperator(const Matrix& p, double gamma)
        : a_(Matrix::Identity(p.rows(), p.cols()) - gamma * p), lu_(a_) {}

    explicit BellmanOperator(Matrix a) : a_(std::move(a)), lu_(a_) {}

    const Matrix& matrix() const { return a_; }
    Eigen::Index size() const { return a_.rows(); }

    Vector solve(const Vector& y) const {
        if (y.size() != a_.rows()) throw DimensionError("BellmanOperator::solve: size mismatch");
        return lu_.solve(y);
    }

    Vector solve_transpose(const Vector& y) const {
        if (y.size() != a_.rows())
            throw DimensionError("BellmanOperator::solve_transpose: size mismatch");
        return lu_.transpose().solve(y);
    }

    // Dense A^{-1}; intended for |S| <= 256 where it simplifies moment assembly.
    const Matrix& inverse() const {
        std::call_once(inv_once_, [this] { inv_ = lu_.inverse(); });
        return inv_;
    }

private:
    Matrix a_;
    Eigen::PartialPivLU<Matrix> lu_;
    mutable std::once_flag inv_once_;
    mutable Matrix inv_;
};

enum class NormKind { Residual, L2Exact, L2PlugIn, CustomM };

// The weighting matrix M of the norm ||x||_M^2 = x^T A^T M A x. Residual is
// the implicit identity; L2Exact uses M = A^{-T} A^{-1} of the true operator
// (so the norm is plain l2); L2PlugIn uses the same construction from the
// estimated operator.
struct NormSpec {
    NormKind kind = NormKind::Residual;
    Matrix m_matrix;  // only materialized for CustomM

    static NormSpec residual() { return {NormKind::Residual, {}}; }
    static NormSpec l2_exact() { return {NormKind::L2Exact, {}}; }
    static NormSpec l2_plugin() { return {NormKind::L2PlugIn, {}}; }

    static NormSpec custom(Matrix m) {
        if (m.rows() != m.cols()) throw InvalidArgument("NormSpec: M must be square");
        if (!m.isApprox(m.transpose(), 1e-12))
            throw InvalidArgument("NormSpec: M must be symmetric within 1e-12");
        Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() <= 0.0)
            throw InvalidArgument("NormSpec: M must be positive definite");
        return {NormKind::CustomM, std::move(m)};
    }

    // Dense M for the given operators. `exact_op` is the ground-truth A
    // (needed for L2Exact), `plugin_op` the estimated one (for L2PlugIn);
    // pass whichever side the caller has access to.
    Matrix materialize(const BellmanOperator* exact_op, const BellmanOperator* plugin_op) const {
        switch (kind) {
            case NormKind::Residual: {
                const BellmanOperator* any = exact_op ? exact_op : plugin_op;
                if (!any) throw InvalidArgument("NormSpec: no operator to size M from");
                return Matrix::Identity(any->size(), any->size());
            }
            case NormKind::L2Exact: {
                if (!exact_op)
                    throw InvalidArgument("NormSpec: L2Exact needs the ground-truth operator");
                const Matrix& ainv = exact_op->inverse();
                return ainv.transpose() * ainv;
            }
            case NormKind::L2PlugIn: {
                if (!plugin_op)
                    throw InvalidArgument("NormSpec: L2PlugIn needs the estimated operator");
                const Matrix& ainv = plugin_op->inverse();
                return ainv.transpose() * ainv;
            }
            case NormKind::CustomM:
                return m_matrix;
        }
        throw InvalidArgument("NormSpec: unknown kind");
    }
};

inline const char* norm_kind_name(NormKind k) {
    switch (k) {
        case NormKind::Residual: return "residual";
        case NormKind::L2Exact: return "l2_exact";
        case NormKind::L2PlugIn: return "l2_plugin";
        case NormKind::CustomM: return "custom";
    }
    return "?";
}

// Mix the MDP with a policy: P = sum_a P^a . pi_a, b = sum_a r_a . pi_a, and
// the per-sample reward variance Var_a[r] + E_a[delta^2] at each state.
inline InducedModel induce_policy_model(const TabularMdp& mdp, const Policy& policy) {
    if (policy.probs.rows() != mdp.num_states || policy.probs.cols() != mdp.num_actions)
        throw DimensionError("induce_policy_model: policy shape does not match MDP");
    const int S = mdp.num_states;
    const int A = mdp.num_actions;
    Matrix p = Matrix::Zero(S, S);
    Vector b = Vector::Zero(S);
    Vector cov = Vector::Zero(S);
    for (int s = 0; s < S; ++s) {
        double mean = 0.0, second = 0.0;
        for (int a = 0; a < A; ++a) {
            const double w = policy.probs(s, a);
            p.row(s) += w * mdp.transition[a].row(s);
            const double m = mdp.reward_mean(s, a);
            const double d = mdp.reward_noise_std(s, a);
            mean += w * m;
            second += w * (m * m + d * d);
        }
        b[s] = mean;
        const double var = second - mean * mean;
        cov[s] = var > 0.0 ? var : 0.0;  // clip tiny negative rounding
    }
    return InducedModel(std::move(p), std::move(b), std::move(cov), mdp.discount);
}

inline BellmanOperator bellman_operator(const InducedModel& model) {
    return BellmanOperator(model.transition, model.discount);
}

inline Vector solve_value(const BellmanOperator& op, const Vector& b) { return op.solve(b); }

// ||x||_M^2 = x^T A^T M A x. Residual avoids materializing M; L2Exact
// collapses to the plain squared euclidean norm.
inline double m_norm_sq(const Vector& x, const NormSpec& norm, const BellmanOperator& op) {
    if (x.size() != op.size()) throw DimensionError("m_norm_sq: size mismatch");
    const Vector ax = op.matrix() * x;
    switch (norm.kind) {
        case NormKind::Residual:
            return ax.squaredNorm();
        case NormKind::L2Exact:
            return x.squaredNorm();
        case NormKind::L2PlugIn:
        case NormKind::CustomM: {
            const Matrix m = norm.materialize(&op, &op);
            return ax.dot(m * ax);
        }
    }
    throw InvalidArgument("m_norm_sq: unknown norm kind");
}

}  // namespace opaug
