#include "bope/estimators.hpp"

#include <cmath>
#include <limits>
#include <memory>

namespace bope {

namespace {

void check_inputs(const LoggedDataset& logged, const ProposedActions& proposed,
                  const WeightVector& weights, const RejectionSpec& rejection) {
    if (proposed.n() != logged.n()) throw LengthMismatch("proposed actions length != logged n");
    if (weights.n() != logged.n()) throw LengthMismatch("weight vector length != logged n");
    if (rejection.kind != logged.kind) throw VariantMismatch("rejection spec variant differs from actions");
    if (action_kind_of(proposed.actions) != logged.kind)
        throw VariantMismatch("proposed actions variant differs from logged actions");
}

Vector rejection_values(const LoggedDataset& logged, const ProposedActions& proposed,
                        const RejectionSpec& rejection) {
    Vector J(logged.n());
    for (Eigen::Index i = 0; i < logged.n(); ++i)
        J[i] = rejection_term(rejection, logged.actions[static_cast<std::size_t>(i)],
                              proposed.actions[static_cast<std::size_t>(i)]);
    return J;
}

}  // namespace

RewardModel RewardModel::from_regressor(Regressor reg, ActionKind kind, std::optional<int> k) {
    if (kind == ActionKind::Discrete && !k.has_value())
        throw MissingK("discrete reward model needs the number of actions k");
    auto shared = std::make_shared<Regressor>(std::move(reg));
    return RewardModel{[shared, kind, k](const Eigen::RowVectorXd& state, const Action& a) {
        Eigen::RowVectorXd row;
        if (kind == ActionKind::Discrete) {
            row.setZero(state.size() + *k);
            row.head(state.size()) = state;
            if (a.index < 0 || a.index >= *k) throw DimensionMismatch("action index outside 0..k-1");
            row[state.size() + a.index] = 1.0;
        } else {
            row.resize(state.size() + 1);
            row.head(state.size()) = state;
            row[state.size()] = a.value;
        }
        return shared->predict_row(row);
    }};
}

EstimatorResult direct_method(const RewardModel& model, const StateMatrix& states,
                              const ProposedActions& proposed) {
    if (proposed.n() != states.rows()) throw LengthMismatch("proposed actions length != state rows");
    if (states.rows() < 1) throw LengthMismatch("empty state matrix");

    double sum = 0.0;
    for (Eigen::Index i = 0; i < states.rows(); ++i)
        sum += model.at(states.row(i), proposed.actions[static_cast<std::size_t>(i)]);

    EstimatorResult res;
    res.value = sum / static_cast<double>(states.rows());
    res.n_effective = static_cast<double>(states.rows());
    return res;
}

EstimatorResult importance_sampling(const LoggedDataset& logged, const ProposedActions& proposed,
                                    const WeightVector& weights, const RejectionSpec& rejection,
                                    bool normalized) {
    check_inputs(logged, proposed, weights, rejection);
    const Vector J = rejection_values(logged, proposed, rejection);
    const Vector w = J.cwiseProduct(weights.weights);

    const double wsum = w.sum();
    const double wr = w.dot(logged.rewards);

    EstimatorResult res;
    res.n_effective = wsum;
    res.clipped_count = weights.clipped_count;
    if (normalized) {
        if (wsum == 0.0)
            throw AllZeroWeights("all rejection-weighted importance weights are zero (no overlap)");
        res.value = wr / wsum;
    } else {
        res.value = wr / static_cast<double>(logged.n());
    }
    return res;
}

EstimatorResult doubly_robust(const LoggedDataset& logged, const ProposedActions& proposed,
                              const RewardModel& model, const WeightVector& weights,
                              const RejectionSpec& rejection) {
    check_inputs(logged, proposed, weights, rejection);
    const Vector J = rejection_values(logged, proposed, rejection);

    double sum = 0.0, neff = 0.0;
    for (Eigen::Index i = 0; i < logged.n(); ++i) {
        const auto& a = logged.actions[static_cast<std::size_t>(i)];
        const auto& ap = proposed.actions[static_cast<std::size_t>(i)];
        const double w = J[i] * weights.weights[i];
        neff += w;
        sum += (logged.rewards[i] - model.at(logged.states.row(i), a)) * w +
               model.at(logged.states.row(i), ap);
    }

    EstimatorResult res;
    res.value = sum / static_cast<double>(logged.n());
    res.n_effective = neff;
    res.clipped_count = weights.clipped_count;
    return res;
}

EstimatorResult switch_estimator(const LoggedDataset& logged, const ProposedActions& proposed,
                                 const RewardModel& model, const WeightVector& weights,
                                 const RejectionSpec& rejection, double tau, bool dr_flavor) {
    check_inputs(logged, proposed, weights, rejection);
    if (!(tau > 0.0)) throw OutOfRange("tau must be positive");
    const Vector J = rejection_values(logged, proposed, rejection);

    double sum = 0.0, neff = 0.0;
    for (Eigen::Index i = 0; i < logged.n(); ++i) {
        const auto& a = logged.actions[static_cast<std::size_t>(i)];
        const auto& ap = proposed.actions[static_cast<std::size_t>(i)];
        const double rho = weights.weights[i];
        if (rho <= tau) {
            const double w = J[i] * rho;
            neff += w;
            if (dr_flavor) {
                sum += (logged.rewards[i] - model.at(logged.states.row(i), a)) * w +
                       model.at(logged.states.row(i), ap);
            } else {
                sum += w * logged.rewards[i];
            }
        } else {
            sum += model.at(logged.states.row(i), ap);
        }
    }

    EstimatorResult res;
    res.value = sum / static_cast<double>(logged.n());
    res.n_effective = neff;
    res.clipped_count = weights.clipped_count;
    res.tau_used = tau;
    return res;
}

std::pair<double, EstimatorResult> tune_switch_tau(const LoggedDataset& logged,
                                                   const ProposedActions& proposed,
                                                   const RewardModel& model, const WeightVector& weights,
                                                   const RejectionSpec& rejection,
                                                   const std::vector<double>& candidates, bool dr_flavor) {
    if (candidates.empty()) throw EmptyCandidates("tau candidate list is empty");
    check_inputs(logged, proposed, weights, rejection);
    const Vector J = rejection_values(logged, proposed, rejection);
    const Eigen::Index n = logged.n();
    const double reward_range = logged.rewards.cwiseAbs().maxCoeff();

    std::vector<double> sorted = candidates;
    std::sort(sorted.begin(), sorted.end());

    double best_tau = sorted.front();
    double best_proxy = std::numeric_limits<double>::infinity();
    Vector contrib(n);

    for (const double tau : sorted) {
        if (!(tau > 0.0)) throw OutOfRange("tau candidates must be positive");
        long switched = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& a = logged.actions[static_cast<std::size_t>(i)];
            const auto& ap = proposed.actions[static_cast<std::size_t>(i)];
            const double rho = weights.weights[i];
            if (rho <= tau) {
                const double w = J[i] * rho;
                contrib[i] = dr_flavor
                                 ? (logged.rewards[i] - model.at(logged.states.row(i), a)) * w +
                                       model.at(logged.states.row(i), ap)
                                 : w * logged.rewards[i];
            } else {
                contrib[i] = model.at(logged.states.row(i), ap);
                ++switched;
            }
        }
        const double mean = contrib.mean();
        const double var = (contrib.array() - mean).square().sum() / static_cast<double>(n);
        const double switch_frac = static_cast<double>(switched) / static_cast<double>(n);
        const double proxy = var / static_cast<double>(n) +
                             (reward_range * switch_frac) * (reward_range * switch_frac);
        if (proxy < best_proxy) {  // strict: ascending scan keeps the smallest tied tau
            best_proxy = proxy;
            best_tau = tau;
        }
    }

    return {best_tau, switch_estimator(logged, proposed, model, weights, rejection, best_tau, dr_flavor)};
}

}  // namespace bope
