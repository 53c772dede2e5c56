#pragma once

#include <string>

#include "bope/core.hpp"

namespace bope {

// Tabular oracle bandit with fully known logging and target policies, reward
// means, and therefore exact ground truth. Rewards are Bernoulli draws of the
// per-cell means, so boundedness holds by construction.
struct DiscreteOracle {
    std::string name;
    Vector state_probs;     // m, sums to 1
    Matrix state_features;  // m x p, rows must be distinct
    Matrix pi0;             // m x k, rows sum to 1
    Matrix pi1;             // m x k, rows sum to 1
    Matrix reward_means;    // m x k, values in [0, 1]

    Eigen::Index num_states() const { return state_probs.size(); }
    Eigen::Index num_actions() const { return pi0.cols(); }
};

// Validates row sums, the overlap condition (pi1 > 0 implies pi0 > 0), and
// reward-mean bounds. All constructions go through here.
DiscreteOracle make_discrete_oracle(std::string name, Vector state_probs, Matrix state_features,
                                    Matrix pi0, Matrix pi1, Matrix reward_means);

struct LinearFn {
    double intercept = 0.0;
    double slope = 0.0;
    double operator()(double s) const { return intercept + slope * s; }
};

// Scalar-action oracle: states from a one-dimensional law, logging actions
// Gaussian around mu0(s), target actions deterministic or Gaussian around
// mu1(s), and reward -(a - center(s))^2 (bounded second derivative in a).
struct ContinuousOracle {
    enum class StateLaw { Normal, Uniform };

    std::string name;
    StateLaw state_law = StateLaw::Normal;
    double state_a = 0.0;  // mean (Normal) or lower bound (Uniform)
    double state_b = 1.0;  // stddev (Normal) or upper bound (Uniform)
    LinearFn mu0;
    double sigma0 = 1.0;
    bool pi1_deterministic = true;
    LinearFn mu1;
    double sigma1 = 0.0;
    LinearFn reward_center;

    double reward(double a, double s) const {
        const double d = a - reward_center(s);
        return -d * d;
    }
};

ContinuousOracle make_continuous_oracle(ContinuousOracle oracle);

// i.i.d. draws s ~ state law, a ~ pi0(.|s), r ~ reward law.
LoggedDataset generate_logged(const DiscreteOracle& oracle, std::size_t n, RngSpec rng);
LoggedDataset generate_logged(const ContinuousOracle& oracle, std::size_t n, RngSpec rng);

// Target-policy actions at the logged states.
ProposedActions sample_proposed(const DiscreteOracle& oracle, const LoggedDataset& logged, RngSpec rng);
ProposedActions sample_proposed(const ContinuousOracle& oracle, const LoggedDataset& logged, RngSpec rng);

// Exact target value by enumeration over the (state, action) support.
double true_value(const DiscreteOracle& oracle);

struct McValue {
    double value = 0.0;
    double se = 0.0;
};

// Monte Carlo target value with its standard error.
McValue true_value_mc(const ContinuousOracle& oracle, std::size_t draws, RngSpec rng);

// pi1(a|s) / pi0(a|s); the state marginal cancels since both policies share it.
double true_ratio(const DiscreteOracle& oracle, const Action& a, Eigen::Index state_index);

// Density ratio for Gaussian target policies. A deterministic target has no
// density, so the ratio is undefined there.
double true_ratio(const ContinuousOracle& oracle, const Action& a, double state);

// Recovers the oracle state index from a logged feature row (exact match).
Eigen::Index state_index_of(const DiscreteOracle& oracle, const Eigen::Ref<const Eigen::RowVectorXd>& row);

// Shipped presets. p1: the 2-state/2-action matched-action oracle. p2: five
// states, three actions, non-uniform logging, overlapping stochastic target.
// p2_null: p2's logging policy with pi1 == pi0 and action-independent reward
// means (a pure null effect). p3: continuous, mu0(s)=s, sigma0=1, target
// a' = s + 0.5, reward -(a-s)^2.
DiscreteOracle preset_p1();
DiscreteOracle preset_p2();
DiscreteOracle preset_p2_null();
ContinuousOracle preset_p3();

}  // namespace bope
