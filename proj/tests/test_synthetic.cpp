#include <doctest.h>

#include <cmath>

#include "bope/synthetic.hpp"

using namespace bope;

namespace {

// Monte Carlo oracle for the discrete true value, independent of the
// enumeration path.
double mc_value(const DiscreteOracle& oracle, std::size_t draws, RngSpec spec) {
    Rng gen(spec);
    double sum = 0.0;
    for (std::size_t i = 0; i < draws; ++i) {
        const int s = gen.categorical(oracle.state_probs);
        const int a = gen.categorical(oracle.pi1.row(s).transpose());
        sum += gen.uniform01() < oracle.reward_means(s, a) ? 1.0 : 0.0;
    }
    return sum / static_cast<double>(draws);
}

double mc_se_bound(std::size_t draws) { return 3.0 * 0.5 / std::sqrt(static_cast<double>(draws)); }

// Wilson-Hilferty chi-square critical values at alpha = 0.001, frozen for the
// degrees of freedom used below.
constexpr double kChi2Crit3 = 16.26624;   // df = 3
constexpr double kChi2Crit14 = 36.12327;  // df = 14

double chi_square_statistic(const DiscreteOracle& oracle, const LoggedDataset& logged) {
    const auto m = oracle.num_states();
    const auto k = oracle.num_actions();
    Matrix counts = Matrix::Zero(m, k);
    for (Eigen::Index i = 0; i < logged.n(); ++i) {
        const auto s = state_index_of(oracle, logged.states.row(i));
        counts(s, logged.actions[static_cast<std::size_t>(i)].index) += 1.0;
    }
    double stat = 0.0;
    const double n = static_cast<double>(logged.n());
    for (Eigen::Index s = 0; s < m; ++s) {
        for (Eigen::Index a = 0; a < k; ++a) {
            const double expected = n * oracle.state_probs[s] * oracle.pi0(s, a);
            if (expected == 0.0) continue;
            const double d = counts(s, a) - expected;
            stat += d * d / expected;
        }
    }
    return stat;
}

}  // namespace

TEST_CASE("preset p1 enumerates to exactly 1") {
    CHECK(true_value(preset_p1()) == 1.0);
}

TEST_CASE("uniform policies with half rewards enumerate to one half") {
    Vector probs(2);
    probs << 0.5, 0.5;
    Matrix features(2, 1);
    features << 0, 1;
    Matrix uniform(2, 2);
    uniform << 0.5, 0.5, 0.5, 0.5;
    Matrix rmean = Matrix::Constant(2, 2, 0.5);
    const auto oracle = make_discrete_oracle("half", probs, features, uniform, uniform, rmean);
    CHECK(true_value(oracle) == doctest::Approx(0.5));
}

TEST_CASE("every shipped discrete preset matches a Monte Carlo oracle") {
    std::uint64_t salt = 0;
    for (const auto& oracle : {preset_p1(), preset_p2(), preset_p2_null()}) {
        const double mc = mc_value(oracle, 100000, RngSpec{600 + salt++, 0});
        CHECK(std::abs(true_value(oracle) - mc) < mc_se_bound(100000));
    }
}

TEST_CASE("continuous target on its own reward center scores zero") {
    ContinuousOracle oracle = preset_p3();
    oracle.mu1 = LinearFn{0.0, 1.0};  // a' = s, reward -(a - s)^2
    const auto mc = true_value_mc(make_continuous_oracle(oracle), 50000, RngSpec{62, 0});
    CHECK(mc.value == 0.0);
    CHECK(mc.se == 0.0);
}

TEST_CASE("preset p3 value is -0.25") {
    const auto mc = true_value_mc(preset_p3(), 200000, RngSpec{63, 0});
    CHECK(mc.value == doctest::Approx(-0.25).epsilon(0.02));
    CHECK(std::abs(mc.value + 0.25) < 3.0 * mc.se + 1e-9);
}

TEST_CASE("true ratios from the tables") {
    const auto p1 = preset_p1();
    CHECK(true_ratio(p1, Action::discrete(0), 0) == 2.0);   // matched: 1 / 0.5
    CHECK(true_ratio(p1, Action::discrete(1), 0) == 0.0);   // mismatched, deterministic target
    const auto null_oracle = preset_p2_null();
    for (Eigen::Index s = 0; s < null_oracle.num_states(); ++s)
        for (int a = 0; a < 3; ++a) CHECK(true_ratio(null_oracle, Action::discrete(a), s) == 1.0);
}

TEST_CASE("true ratio rejects a zero logging denominator") {
    Vector probs(1);
    probs << 1.0;
    Matrix features(1, 1);
    features << 0;
    Matrix pi0(1, 2), pi1(1, 2), rmean(1, 2);
    pi0 << 1.0, 0.0;
    pi1 << 1.0, 0.0;  // support condition holds: pi1 = 0 where pi0 = 0
    rmean << 0.5, 0.5;
    const auto oracle = make_discrete_oracle("corner", probs, features, pi0, pi1, rmean);
    CHECK_THROWS_AS(true_ratio(oracle, Action::discrete(1), 0), ZeroDenominator);
}

TEST_CASE("gaussian continuous ratio; deterministic target has none") {
    ContinuousOracle oracle = preset_p3();
    CHECK_THROWS_AS(true_ratio(oracle, Action::continuous(0.5), 0.0), ZeroDenominator);

    oracle.pi1_deterministic = false;
    oracle.sigma1 = 1.0;  // same sigma as logging
    const auto gaussian = make_continuous_oracle(oracle);
    // At a halfway point between the two means the densities are equal.
    CHECK(true_ratio(gaussian, Action::continuous(0.25), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("support violation is rejected at construction") {
    Vector probs(1);
    probs << 1.0;
    Matrix features(1, 1);
    features << 0;
    Matrix pi0(1, 2), pi1(1, 2), rmean(1, 2);
    pi0 << 1.0, 0.0;
    pi1 << 0.5, 0.5;  // target puts mass where logging has none
    rmean << 0.5, 0.5;
    CHECK_THROWS_AS(make_discrete_oracle("bad", probs, features, pi0, pi1, rmean), OutOfRange);
}

TEST_CASE("probability rows must sum to one") {
    Vector probs(1);
    probs << 1.0;
    Matrix features(1, 1);
    features << 0;
    Matrix pi0(1, 2), pi1(1, 2), rmean(1, 2);
    pi0 << 0.6, 0.3;
    pi1 << 0.5, 0.5;
    rmean << 0.5, 0.5;
    CHECK_THROWS_AS(make_discrete_oracle("bad", probs, features, pi0, pi1, rmean), OutOfRange);
}

TEST_CASE("generate_logged is reproducible and respects the tables") {
    const auto oracle = preset_p1();
    const auto a = generate_logged(oracle, 4, RngSpec{64, 0});
    const auto b = generate_logged(oracle, 4, RngSpec{64, 0});
    CHECK(a.states == b.states);
    CHECK(a.rewards == b.rewards);
    for (int i = 0; i < 4; ++i)
        CHECK(a.actions[static_cast<std::size_t>(i)].index == b.actions[static_cast<std::size_t>(i)].index);

    const auto big = generate_logged(oracle, 20000, RngSpec{64, 1});
    double ones = 0.0;
    for (const auto& act : big.actions) ones += act.index;
    CHECK(ones / 20000.0 > 0.48);
    CHECK(ones / 20000.0 < 0.52);
}

TEST_CASE("all-one reward means produce all-one rewards") {
    Vector probs(2);
    probs << 0.5, 0.5;
    Matrix features(2, 1);
    features << 0, 1;
    Matrix uniform(2, 2);
    uniform << 0.5, 0.5, 0.5, 0.5;
    const auto oracle =
        make_discrete_oracle("ones", probs, features, uniform, uniform, Matrix::Ones(2, 2));
    const auto logged = generate_logged(oracle, 500, RngSpec{65, 0});
    CHECK(logged.rewards.minCoeff() == 1.0);
}

TEST_CASE("logged draws pass a chi-square fit against the logging tables") {
    {
        const auto oracle = preset_p1();  // 4 cells, df 3
        const auto logged = generate_logged(oracle, 50000, RngSpec{66, 0});
        CHECK(chi_square_statistic(oracle, logged) < kChi2Crit3);
    }
    {
        const auto oracle = preset_p2();  // 15 cells, df 14
        const auto logged = generate_logged(oracle, 50000, RngSpec{66, 1});
        CHECK(chi_square_statistic(oracle, logged) < kChi2Crit14);
    }
}

TEST_CASE("sample_proposed follows deterministic and stochastic targets") {
    const auto p1 = preset_p1();
    const auto logged = generate_logged(p1, 200, RngSpec{67, 0});
    const auto proposed = sample_proposed(p1, logged, RngSpec{67, 1});
    for (Eigen::Index i = 0; i < logged.n(); ++i)
        CHECK(proposed.actions[static_cast<std::size_t>(i)].index ==
              static_cast<int>(logged.states(i, 0)));

    const auto p2 = preset_p2();
    const auto logged2 = generate_logged(p2, 300, RngSpec{67, 2});
    const auto once = sample_proposed(p2, logged2, RngSpec{67, 3});
    const auto again = sample_proposed(p2, logged2, RngSpec{67, 3});
    for (std::size_t i = 0; i < once.actions.size(); ++i)
        CHECK(once.actions[i].index == again.actions[i].index);
}
