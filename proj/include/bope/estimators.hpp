#pragma once

#include <functional>
#include <optional>
#include <utility>

#include "bope/core.hpp"
#include "bope/kernels.hpp"
#include "bope/weights.hpp"

namespace bope {

// Plug-in reward predictor r_hat(s, a). Usually backed by a Regressor over
// encode_state_action features; arbitrary functions are accepted so oracles
// and collapse identities can be tested directly.
struct RewardModel {
    std::function<double(const Eigen::RowVectorXd&, const Action&)> fn;

    static RewardModel from_function(std::function<double(const Eigen::RowVectorXd&, const Action&)> f) {
        return RewardModel{std::move(f)};
    }
    static RewardModel from_regressor(Regressor reg, ActionKind kind, std::optional<int> k);

    double at(const Eigen::Ref<const Eigen::RowVectorXd>& state, const Action& a) const {
        return fn(state, a);
    }
};

struct EstimatorResult {
    double value = 0.0;
    double n_effective = 0.0;  // sum of J * rho for weighted forms, n otherwise
    long clipped_count = 0;
    std::optional<double> tau_used;
};

// Mean of r_hat over proposed actions.
EstimatorResult direct_method(const RewardModel& model, const StateMatrix& states,
                              const ProposedActions& proposed);

// w_i = J(a_i, a'_i) * rho_i. Unnormalized: (1/n) sum w_i r_i. Normalized
// (Hajek): sum w_i r_i / sum w_i; throws AllZeroWeights when the weight sum
// vanishes (no overlap) instead of returning NaN.
EstimatorResult importance_sampling(const LoggedDataset& logged, const ProposedActions& proposed,
                                    const WeightVector& weights, const RejectionSpec& rejection,
                                    bool normalized);

// (1/n) sum [ (r_i - r_hat(s_i, a_i)) * J * rho_i + r_hat(s_i, a'_i) ].
EstimatorResult doubly_robust(const LoggedDataset& logged, const ProposedActions& proposed,
                              const RewardModel& model, const WeightVector& weights,
                              const RejectionSpec& rejection);

// Per-unit switch on the raw weight rho_i (not J * rho_i, so the threshold
// means the same thing in discrete and continuous action spaces): units with
// rho_i <= tau contribute the IS term (or the DR term when dr_flavor), the
// rest contribute r_hat(s_i, a'_i).
EstimatorResult switch_estimator(const LoggedDataset& logged, const ProposedActions& proposed,
                                 const RewardModel& model, const WeightVector& weights,
                                 const RejectionSpec& rejection, double tau, bool dr_flavor);

// Picks tau from candidates by an MSE proxy:
//   empirical variance of per-unit contributions / n
//   + (max |r| * switched fraction)^2.
// Ties go to the smallest tau. Returns the chosen tau and its estimate.
std::pair<double, EstimatorResult> tune_switch_tau(const LoggedDataset& logged,
                                                   const ProposedActions& proposed,
                                                   const RewardModel& model, const WeightVector& weights,
                                                   const RejectionSpec& rejection,
                                                   const std::vector<double>& candidates, bool dr_flavor);

}  // namespace bope
