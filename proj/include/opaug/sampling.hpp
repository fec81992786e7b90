#pragma once

#include "opaug/mdp.hpp"
#include "opaug/rng.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace opaug {

// Empirical model under the multinomial sampling assumption: each row of
// P hat is a count vector over n_i transitions divided by n_i, and b hat is
// the average of n_i observed rewards per state.
struct EstimatedModel {
    Matrix transition_hat;
    Vector reward_hat;
    Vector reward_cov_hat;                    // diagonal of Sigma tilde
    std::vector<std::int64_t> samples_per_state;
    double discount = 0.0;

    int num_states() const { return static_cast<int>(transition_hat.rows()); }
};

enum class RewardCovMode {
    Oracle,  // pass through the ground-truth per-sample variance / n
    Sample,  // unbiased sample variance of the n reward draws / n
};

// Draw (P hat, b hat, Sigma tilde) from the ground truth. Pure given its
// RandomStream; a single stream must not be shared across workers.
inline EstimatedModel sample_estimated_model(const InducedModel& model,
                                             const std::vector<std::int64_t>& samples_per_state,
                                             RandomStream& rng,
                                             RewardCovMode cov_mode = RewardCovMode::Oracle) {
    const int S = model.num_states();
    if (static_cast<int>(samples_per_state.size()) != S)
        throw DimensionError("sample_estimated_model: samples_per_state size mismatch");
    for (auto n : samples_per_state)
        if (n < 1) throw InvalidArgument("sample_estimated_model: need n >= 1 per state");

    Matrix p_hat(S, S);
    Vector b_hat(S), cov_hat(S);
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(S));
    std::vector<double> draws;
    for (int i = 0; i < S; ++i) {
        const auto n = static_cast<std::uint64_t>(samples_per_state[static_cast<std::size_t>(i)]);
        rng.multinomial(n, model.transition.row(i), counts);
        for (int j = 0; j < S; ++j)
            p_hat(i, j) = static_cast<double>(counts[static_cast<std::size_t>(j)]) /
                          static_cast<double>(n);

        const double sd = std::sqrt(model.reward_cov[i]);
        draws.assign(n, 0.0);
        double sum = 0.0;
        for (std::uint64_t k = 0; k < n; ++k) {
            const double r = model.reward[i] + (sd > 0.0 ? sd * rng.normal() : 0.0);
            draws[k] = r;
            sum += r;
        }
        const double mean = sum / static_cast<double>(n);
        b_hat[i] = mean;

        if (cov_mode == RewardCovMode::Oracle) {
            cov_hat[i] = model.reward_cov[i] / static_cast<double>(n);
        } else {
            if (n < 2)
                throw InvalidArgument(
                    "sample_estimated_model: sample-variance mode needs n >= 2");
            double ss = 0.0;
            for (double r : draws) ss += (r - mean) * (r - mean);
            const double var = ss / static_cast<double>(n - 1);
            cov_hat[i] = var / static_cast<double>(n);
        }
    }
    return EstimatedModel{std::move(p_hat), std::move(b_hat), std::move(cov_hat),
                          samples_per_state, model.discount};
}

inline EstimatedModel sample_estimated_model(const InducedModel& model, std::int64_t n,
                                             RandomStream& rng,
                                             RewardCovMode cov_mode = RewardCovMode::Oracle) {
    if (n < 1) throw InvalidArgument("sample_estimated_model: need n >= 1");
    std::vector<std::int64_t> ns(static_cast<std::size_t>(model.num_states()), n);
    return sample_estimated_model(model, ns, rng, cov_mode);
}

// Entrywise mean of the sampled transition matrices (unbiasedness helper).
inline Matrix empirical_mean_transition(const std::vector<EstimatedModel>& models) {
    if (models.empty()) throw InvalidArgument("empirical_mean_transition: empty list");
    Matrix mean = Matrix::Zero(models.front().transition_hat.rows(),
                               models.front().transition_hat.cols());
    for (const auto& m : models) {
        if (m.transition_hat.rows() != mean.rows() || m.transition_hat.cols() != mean.cols())
            throw DimensionError("empirical_mean_transition: shape mismatch");
        mean += m.transition_hat;
    }
    return mean / static_cast<double>(models.size());
}

}  // namespace opaug
