#include "bope/synthetic.hpp"

#include <cmath>

namespace bope {

namespace {

void check_prob_rows(const Matrix& table, const char* what) {
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
        double sum = 0.0;
        for (Eigen::Index j = 0; j < table.cols(); ++j) {
            if (table(i, j) < 0.0) throw OutOfRange(std::string(what) + " has a negative probability");
            sum += table(i, j);
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw OutOfRange(std::string(what) + " row " + std::to_string(i) + " sums to " +
                             std::to_string(sum));
    }
}

double sample_state(const ContinuousOracle& oracle, Rng& gen) {
    if (oracle.state_law == ContinuousOracle::StateLaw::Normal)
        return oracle.state_a + oracle.state_b * gen.normal();
    return oracle.state_a + (oracle.state_b - oracle.state_a) * gen.uniform01();
}

double normal_density(double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return 0.39894228040143267793994605993438 / sd * std::exp(-0.5 * z * z);
}

}  // namespace

DiscreteOracle make_discrete_oracle(std::string name, Vector state_probs, Matrix state_features,
                                    Matrix pi0, Matrix pi1, Matrix reward_means) {
    const Eigen::Index m = state_probs.size();
    const Eigen::Index k = pi0.cols();
    if (m < 1 || k < 2) throw OutOfRange("oracle needs at least 1 state and 2 actions");
    if (state_features.rows() != m || pi0.rows() != m || pi1.rows() != m || reward_means.rows() != m ||
        pi1.cols() != k || reward_means.cols() != k)
        throw DimensionMismatch("oracle table shapes disagree");

    double psum = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
        if (state_probs[i] < 0.0) throw OutOfRange("negative state probability");
        psum += state_probs[i];
    }
    if (std::abs(psum - 1.0) > 1e-12) throw OutOfRange("state probabilities do not sum to 1");

    check_prob_rows(pi0, "pi0");
    check_prob_rows(pi1, "pi1");

    // Overlap: wherever the target policy puts mass, logging must too.
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < k; ++j)
            if (pi1(i, j) > 0.0 && pi0(i, j) == 0.0)
                throw OutOfRange("support violation: pi1 > 0 where pi0 = 0 at state " +
                                 std::to_string(i) + ", action " + std::to_string(j));

    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < k; ++j)
            if (reward_means(i, j) < 0.0 || reward_means(i, j) > 1.0)
                throw OutOfRange("reward means must lie in [0, 1]");

    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = i + 1; j < m; ++j)
            if (state_features.row(i) == state_features.row(j))
                throw OutOfRange("oracle state feature rows must be distinct");

    DiscreteOracle oracle;
    oracle.name = std::move(name);
    oracle.state_probs = std::move(state_probs);
    oracle.state_features = std::move(state_features);
    oracle.pi0 = std::move(pi0);
    oracle.pi1 = std::move(pi1);
    oracle.reward_means = std::move(reward_means);
    return oracle;
}

ContinuousOracle make_continuous_oracle(ContinuousOracle oracle) {
    if (!(oracle.sigma0 > 0.0)) throw OutOfRange("sigma0 must be positive");
    if (!oracle.pi1_deterministic && !(oracle.sigma1 > 0.0))
        throw OutOfRange("stochastic pi1 needs sigma1 > 0");
    if (oracle.state_law == ContinuousOracle::StateLaw::Normal && !(oracle.state_b > 0.0))
        throw OutOfRange("state stddev must be positive");
    if (oracle.state_law == ContinuousOracle::StateLaw::Uniform && !(oracle.state_b > oracle.state_a))
        throw OutOfRange("uniform state law needs a < b");
    return oracle;
}

LoggedDataset generate_logged(const DiscreteOracle& oracle, std::size_t n, RngSpec rng) {
    if (n < 1) throw LengthMismatch("need n >= 1");
    Rng gen(rng);
    StateMatrix states(n, oracle.state_features.cols());
    std::vector<Action> actions;
    actions.reserve(n);
    Vector rewards(static_cast<Eigen::Index>(n));

    for (std::size_t i = 0; i < n; ++i) {
        const int s = gen.categorical(oracle.state_probs);
        const int a = gen.categorical(oracle.pi0.row(s).transpose());
        states.row(static_cast<Eigen::Index>(i)) = oracle.state_features.row(s);
        actions.push_back(Action::discrete(a));
        rewards[static_cast<Eigen::Index>(i)] = gen.uniform01() < oracle.reward_means(s, a) ? 1.0 : 0.0;
    }
    return make_logged_dataset(std::move(states), std::move(actions), std::move(rewards));
}

LoggedDataset generate_logged(const ContinuousOracle& oracle, std::size_t n, RngSpec rng) {
    if (n < 1) throw LengthMismatch("need n >= 1");
    Rng gen(rng);
    StateMatrix states(n, 1);
    std::vector<Action> actions;
    actions.reserve(n);
    Vector rewards(static_cast<Eigen::Index>(n));

    for (std::size_t i = 0; i < n; ++i) {
        const double s = sample_state(oracle, gen);
        const double a = oracle.mu0(s) + oracle.sigma0 * gen.normal();
        states(static_cast<Eigen::Index>(i), 0) = s;
        actions.push_back(Action::continuous(a));
        rewards[static_cast<Eigen::Index>(i)] = oracle.reward(a, s);
    }
    return make_logged_dataset(std::move(states), std::move(actions), std::move(rewards));
}

ProposedActions sample_proposed(const DiscreteOracle& oracle, const LoggedDataset& logged, RngSpec rng) {
    Rng gen(rng);
    std::vector<Action> actions;
    actions.reserve(static_cast<std::size_t>(logged.n()));
    for (Eigen::Index i = 0; i < logged.n(); ++i) {
        const Eigen::Index s = state_index_of(oracle, logged.states.row(i));
        actions.push_back(Action::discrete(gen.categorical(oracle.pi1.row(s).transpose())));
    }
    return make_proposed_actions(std::move(actions), logged);
}

ProposedActions sample_proposed(const ContinuousOracle& oracle, const LoggedDataset& logged, RngSpec rng) {
    Rng gen(rng);
    std::vector<Action> actions;
    actions.reserve(static_cast<std::size_t>(logged.n()));
    for (Eigen::Index i = 0; i < logged.n(); ++i) {
        const double s = logged.states(i, 0);
        double a = oracle.mu1(s);
        if (!oracle.pi1_deterministic) a += oracle.sigma1 * gen.normal();
        actions.push_back(Action::continuous(a));
    }
    return make_proposed_actions(std::move(actions), logged);
}

double true_value(const DiscreteOracle& oracle) {
    double v = 0.0;
    for (Eigen::Index s = 0; s < oracle.num_states(); ++s)
        for (Eigen::Index a = 0; a < oracle.num_actions(); ++a)
            v += oracle.state_probs[s] * oracle.pi1(s, a) * oracle.reward_means(s, a);
    return v;
}

McValue true_value_mc(const ContinuousOracle& oracle, std::size_t draws, RngSpec rng) {
    if (draws < 2) throw OutOfRange("need at least 2 draws");
    Rng gen(rng);
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t i = 0; i < draws; ++i) {
        const double s = sample_state(oracle, gen);
        double a = oracle.mu1(s);
        if (!oracle.pi1_deterministic) a += oracle.sigma1 * gen.normal();
        const double r = oracle.reward(a, s);
        sum += r;
        sumsq += r * r;
    }
    const double nd = static_cast<double>(draws);
    McValue mc;
    mc.value = sum / nd;
    const double var = std::max(0.0, (sumsq - nd * mc.value * mc.value) / (nd - 1.0));
    mc.se = std::sqrt(var / nd);
    return mc;
}

double true_ratio(const DiscreteOracle& oracle, const Action& a, Eigen::Index state_index) {
    if (a.kind != ActionKind::Discrete) throw VariantMismatch("expected a discrete action");
    if (state_index < 0 || state_index >= oracle.num_states()) throw OutOfRange("state index out of range");
    if (a.index < 0 || a.index >= oracle.num_actions()) throw OutOfRange("action index out of range");
    const double denom = oracle.pi0(state_index, a.index);
    if (denom == 0.0) throw ZeroDenominator("pi0 is zero at this (state, action)");
    return oracle.pi1(state_index, a.index) / denom;
}

double true_ratio(const ContinuousOracle& oracle, const Action& a, double state) {
    if (a.kind != ActionKind::Continuous) throw VariantMismatch("expected a continuous action");
    if (oracle.pi1_deterministic)
        throw ZeroDenominator("deterministic target policy has no density ratio");
    const double num = normal_density(a.value, oracle.mu1(state), oracle.sigma1);
    const double den = normal_density(a.value, oracle.mu0(state), oracle.sigma0);
    if (den == 0.0) throw ZeroDenominator("pi0 density underflowed to zero");
    return num / den;
}

Eigen::Index state_index_of(const DiscreteOracle& oracle, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    for (Eigen::Index s = 0; s < oracle.num_states(); ++s)
        if (oracle.state_features.row(s) == row) return s;
    throw OutOfRange("feature row does not match any oracle state");
}

DiscreteOracle preset_p1() {
    Vector probs(2);
    probs << 0.5, 0.5;
    Matrix features(2, 1);
    features << 0.0, 1.0;
    Matrix pi0(2, 2);
    pi0 << 0.5, 0.5, 0.5, 0.5;
    Matrix pi1(2, 2);
    pi1 << 1.0, 0.0, 0.0, 1.0;
    Matrix rmean(2, 2);
    rmean << 1.0, 0.0, 0.0, 1.0;
    return make_discrete_oracle("p1", probs, features, pi0, pi1, rmean);
}

DiscreteOracle preset_p2() {
    Vector probs(5);
    probs << 0.3, 0.25, 0.2, 0.15, 0.1;
    Matrix features(5, 1);
    features << 0.0, 1.0, 2.0, 3.0, 4.0;
    Matrix pi0(5, 3);
    pi0 << 0.5, 0.3, 0.2,
           0.3, 0.2, 0.5,
           0.2, 0.5, 0.3,
           0.5, 0.2, 0.3,
           0.3, 0.5, 0.2;
    Matrix pi1(5, 3);
    pi1 << 0.2, 0.3, 0.5,
           0.5, 0.3, 0.2,
           0.3, 0.5, 0.2,
           0.2, 0.5, 0.3,
           0.5, 0.2, 0.3;
    Matrix rmean(5, 3);
    rmean << 0.9, 0.1, 0.5,
             0.2, 0.8, 0.4,
             0.6, 0.3, 0.7,
             0.1, 0.9, 0.3,
             0.5, 0.6, 0.2;
    return make_discrete_oracle("p2", probs, features, pi0, pi1, rmean);
}

DiscreteOracle preset_p2_null() {
    DiscreteOracle base = preset_p2();
    Matrix rmean(5, 3);
    rmean << 0.7, 0.7, 0.7,
             0.4, 0.4, 0.4,
             0.6, 0.6, 0.6,
             0.3, 0.3, 0.3,
             0.5, 0.5, 0.5;
    return make_discrete_oracle("p2_null", base.state_probs, base.state_features, base.pi0, base.pi0,
                                rmean);
}

ContinuousOracle preset_p3() {
    ContinuousOracle oracle;
    oracle.name = "p3";
    oracle.state_law = ContinuousOracle::StateLaw::Normal;
    oracle.state_a = 0.0;
    oracle.state_b = 1.0;
    oracle.mu0 = LinearFn{0.0, 1.0};
    oracle.sigma0 = 1.0;
    oracle.pi1_deterministic = true;
    oracle.mu1 = LinearFn{0.5, 1.0};
    oracle.reward_center = LinearFn{0.0, 1.0};
    return make_continuous_oracle(oracle);
}

}  // namespace bope
