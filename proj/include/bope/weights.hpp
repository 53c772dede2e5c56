#pragma once

#include <optional>

#include "bope/classify.hpp"
#include "bope/core.hpp"

namespace bope {

// The binary discrimination problem behind balancing-weight estimation:
// observed-policy rows (label 0) stacked above proposed-policy rows (label 1),
// exactly n of each, so the class prior ratio is 1 by construction. Row i and
// row n+i share the same state features.
struct DiscriminationSet {
    Matrix features;
    IntVector labels;
};

// Per-unit importance weights with clipping metadata.
//
// Weights from classifier ratios lie in [eps/(1-eps), (1-eps)/eps] where
// eps = clip_epsilon; weights from inverse propensities lie in
// (0, 1/clip_epsilon] with clip_epsilon acting as the probability/density
// floor. Either way every weight is finite and strictly positive.
struct WeightVector {
    Vector weights;
    double clip_epsilon = 1e-3;
    long clipped_count = 0;
    int folds = 0;

    Eigen::Index n() const { return weights.size(); }
};

// Logging-policy model: per-class probabilities for discrete actions, or a
// Gaussian around a fitted mean for continuous ones (the generalized
// propensity score).
struct PropensityModel {
    ActionKind kind = ActionKind::Discrete;

    // Discrete branch.
    std::optional<MulticlassClassifier> multiclass;

    // Continuous branch: action | state ~ Normal(mean_model(s), variance).
    std::optional<Regressor> mean_model;
    double variance = 1.0;
    bool variance_floored = false;  // set when all residuals were zero

    // pi0_hat(a | s): probability mass (discrete) or density (continuous).
    double density_at(const Eigen::Ref<const Eigen::RowVectorXd>& state, const Action& a) const;
    Vector density(const StateMatrix& states, const std::vector<Action>& actions) const;
};

// Stacks state features with an encoded action block: one-hot of width k for
// discrete actions, the raw scalar for continuous ones.
Matrix encode_state_action(const Eigen::Ref<const StateMatrix>& states,
                           const std::vector<Action>& actions, std::optional<int> k);

// Infers the number of discrete actions from logged and proposed lists.
int infer_num_actions(const LoggedDataset& logged, const ProposedActions& proposed);

// Builds the 2n-row discrimination set: observed block first, proposed block
// second, labels [0]*n ++ [1]*n.
DiscriminationSet build_discrimination_set(const LoggedDataset& logged, const ProposedActions& proposed,
                                           std::optional<int> k = std::nullopt);

// rho = clamp(p, eps, 1-eps) / (1 - clamp(p, eps, 1-eps)).
double ratio_from_probability(double p_hat, double clip_epsilon);

// Balancing weights via K-fold cross-fitting: for each fold, a classifier
// trained on the other folds' discrimination rows scores the held-out fold's
// observed rows. Weights are a function of (s, a, a') only; rewards are never
// read. Deterministic given rng.
WeightVector estimate_bope_weights(const LoggedDataset& logged, const ProposedActions& proposed,
                                   const ClassifierConfig& config, int folds, double clip_epsilon,
                                   RngSpec rng);

// As above but with a classifier fitted elsewhere (e.g. on an independent
// training split); scores the logged units directly.
WeightVector bope_weights_from_classifier(const ProbabilisticClassifier& clf, const LoggedDataset& logged,
                                          std::optional<int> k, double clip_epsilon);

// Fits the logging-policy model on a training split.
PropensityModel fit_propensity_discrete(const Eigen::Ref<const StateMatrix>& states,
                                        const std::vector<Action>& actions, int k,
                                        const ClassifierConfig& cfg, RngSpec rng);

// Continuous: mean model g(s) fitted to actions; variance = training MSE of
// g, floored at 1e-8 (variance_floored records when the floor applied).
PropensityModel fit_propensity_continuous(const Eigen::Ref<const StateMatrix>& states,
                                          const std::vector<Action>& actions,
                                          const ClassifierConfig& cfg, RngSpec rng);

inline constexpr double kVarianceFloor = 1e-8;

// weight_i = 1 / max(pi0_hat(a_i | s_i), clip_epsilon_density).
WeightVector propensity_weights(const PropensityModel& model, const LoggedDataset& logged,
                                double clip_epsilon_density);

}  // namespace bope
