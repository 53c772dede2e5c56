#include <doctest.h>

#include <cmath>

#include "bope/weights.hpp"

using namespace bope;

namespace {

// 2-state matched-action bandit: s uniform on {0,1}, logging uniform on two
// actions, target a' = s, reward 1{a == s}. True ratio: 2 on matched pairs,
// 0 on mismatched (Bayes posterior 2/3 on the matched cells).
struct PairedData {
    LoggedDataset logged;
    ProposedActions proposed;
};

PairedData two_state(int n, RngSpec spec) {
    Rng gen(spec);
    StateMatrix states(n, 1);
    std::vector<Action> acts, prop;
    Vector rewards(n);
    for (int i = 0; i < n; ++i) {
        const int s = static_cast<int>(gen.below(2));
        const int a = static_cast<int>(gen.below(2));
        states(i, 0) = s;
        acts.push_back(Action::discrete(a));
        prop.push_back(Action::discrete(s));
        rewards[i] = a == s ? 1.0 : 0.0;
    }
    PairedData out{make_logged_dataset(std::move(states), std::move(acts), std::move(rewards)), {}};
    out.proposed = make_proposed_actions(std::move(prop), out.logged);
    return out;
}

// Same uniform policy on both sides; every true ratio is 1.
PairedData uninformative(int n, RngSpec spec) {
    Rng gen(spec);
    StateMatrix states(n, 1);
    std::vector<Action> acts, prop;
    Vector rewards(n);
    for (int i = 0; i < n; ++i) {
        states(i, 0) = gen.normal();
        acts.push_back(Action::discrete(static_cast<int>(gen.below(2))));
        prop.push_back(Action::discrete(static_cast<int>(gen.below(2))));
        rewards[i] = gen.uniform01();
    }
    PairedData out{make_logged_dataset(std::move(states), std::move(acts), std::move(rewards)), {}};
    out.proposed = make_proposed_actions(std::move(prop), out.logged);
    return out;
}

ClassifierConfig small_gbt() { return ClassifierConfig::gbt(30, 2, 0.3, 20); }

}  // namespace

TEST_CASE("encode_state_action") {
    StateMatrix s(1, 2);
    s << 1.5, -2.0;

    const Matrix disc = encode_state_action(s, {Action::discrete(1)}, 3);
    REQUIRE(disc.cols() == 5);
    CHECK(disc(0, 0) == 1.5);
    CHECK(disc(0, 2) == 0.0);
    CHECK(disc(0, 3) == 1.0);
    CHECK(disc(0, 4) == 0.0);

    const Matrix cont = encode_state_action(s, {Action::continuous(0.7)}, std::nullopt);
    REQUIRE(cont.cols() == 3);
    CHECK(cont(0, 2) == 0.7);

    CHECK_THROWS_AS(encode_state_action(s, {Action::discrete(5)}, 3), DimensionMismatch);
    CHECK_THROWS_AS(encode_state_action(s, {Action::discrete(0)}, std::nullopt), MissingK);
}

TEST_CASE("build_discrimination_set layout") {
    StateMatrix s(3, 1);
    s << 0, 1, 2;
    Vector r = Vector::Zero(3);
    const auto logged =
        make_logged_dataset(s, {Action::discrete(0), Action::discrete(1), Action::discrete(0)}, r);
    const auto proposed =
        make_proposed_actions({Action::discrete(1), Action::discrete(1), Action::discrete(0)}, logged);

    const auto set = build_discrimination_set(logged, proposed);
    REQUIRE(set.features.rows() == 6);
    REQUIRE(set.labels.size() == 6);
    for (int i = 0; i < 3; ++i) {
        CHECK(set.labels[i] == 0);
        CHECK(set.labels[3 + i] == 1);
        // Paired rows share state features.
        CHECK(set.features(i, 0) == set.features(3 + i, 0));
    }
    // Identical actions give identical paired rows.
    CHECK(set.features.row(2) == set.features.row(5));

    CHECK_THROWS_AS(build_discrimination_set(logged, ProposedActions{{}}), LengthMismatch);
}

TEST_CASE("ratio_from_probability") {
    CHECK(ratio_from_probability(0.5, 1e-3) == 1.0);
    CHECK(ratio_from_probability(0.75, 1e-3) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(ratio_from_probability(0.9999, 0.01) == doctest::Approx(99.0).epsilon(1e-12));
    CHECK_THROWS_AS(ratio_from_probability(0.0, 1e-3), OutOfRange);
    CHECK_THROWS_AS(ratio_from_probability(0.5, 0.6), OutOfRange);
}

TEST_CASE("bope weights: uninformative policies give mean weight near one") {
    const auto data = uninformative(5000, RngSpec{31, 0});
    const auto wv = estimate_bope_weights(data.logged, data.proposed, small_gbt(), 5, 1e-3, RngSpec{31, 1});
    CHECK(wv.weights.mean() > 0.9);
    CHECK(wv.weights.mean() < 1.1);
    CHECK(wv.folds == 5);
}

TEST_CASE("bope weights: matched-pair ratio approaches 2 on the 2-state bandit") {
    const auto data = two_state(20000, RngSpec{32, 0});
    const auto wv = estimate_bope_weights(data.logged, data.proposed, small_gbt(), 5, 1e-3, RngSpec{32, 1});
    double sum = 0.0;
    int count = 0;
    for (Eigen::Index i = 0; i < data.logged.n(); ++i) {
        if (data.logged.actions[static_cast<std::size_t>(i)] ==
            data.proposed.actions[static_cast<std::size_t>(i)]) {
            sum += wv.weights[i];
            ++count;
        }
    }
    REQUIRE(count > 0);
    const double mean_matched = sum / count;
    CHECK(mean_matched > 1.8);
    CHECK(mean_matched < 2.2);
}

TEST_CASE("bope weights: folds=1 rejected") {
    const auto data = uninformative(50, RngSpec{33, 0});
    CHECK_THROWS_AS(estimate_bope_weights(data.logged, data.proposed, small_gbt(), 1, 1e-3, RngSpec{}),
                    FoldTooSmall);
}

TEST_CASE("bope weights never read rewards") {
    auto data = uninformative(400, RngSpec{34, 0});
    const auto w1 = estimate_bope_weights(data.logged, data.proposed, small_gbt(), 4, 1e-3, RngSpec{34, 1});
    data.logged.rewards.setConstant(123.0);
    const auto w2 = estimate_bope_weights(data.logged, data.proposed, small_gbt(), 4, 1e-3, RngSpec{34, 1});
    CHECK((w1.weights - w2.weights).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("bope weights stay inside the clip interval and finite") {
    const double eps = 1e-2;
    const auto data = two_state(600, RngSpec{35, 0});
    const auto wv = estimate_bope_weights(data.logged, data.proposed, small_gbt(), 3, eps, RngSpec{35, 1});
    const double lo = eps / (1.0 - eps), hi = (1.0 - eps) / eps;
    for (Eigen::Index i = 0; i < wv.n(); ++i) {
        CHECK(std::isfinite(wv.weights[i]));
        CHECK(wv.weights[i] >= lo);
        CHECK(wv.weights[i] <= hi);
        CHECK(wv.weights[i] > 0.0);
    }
}

TEST_CASE("bope weights: block swap inverts weights (uninformative case)") {
    const auto data = uninformative(4000, RngSpec{36, 0});
    const auto forward =
        estimate_bope_weights(data.logged, data.proposed, small_gbt(), 5, 1e-3, RngSpec{36, 1});

    // Swap observed and proposed blocks.
    const auto swapped_logged =
        make_logged_dataset(data.logged.states, data.proposed.actions, data.logged.rewards);
    const auto swapped_proposed = make_proposed_actions(data.logged.actions, swapped_logged);
    const auto backward =
        estimate_bope_weights(swapped_logged, swapped_proposed, small_gbt(), 5, 1e-3, RngSpec{36, 1});

    const double product = forward.weights.mean() * backward.weights.mean();
    CHECK(product > 0.8);
    CHECK(product < 1.25);
}

TEST_CASE("bope weights: ratio error shrinks with sample size (45 of 50 seeds)") {
    auto mean_ratio_error = [](int n, RngSpec data_spec, RngSpec fit_spec) {
        const auto data = two_state(n, data_spec);
        const auto wv = estimate_bope_weights(data.logged, data.proposed, small_gbt(), 5, 1e-3, fit_spec);
        double err = 0.0;
        for (Eigen::Index i = 0; i < data.logged.n(); ++i) {
            const bool matched = data.logged.actions[static_cast<std::size_t>(i)] ==
                                 data.proposed.actions[static_cast<std::size_t>(i)];
            const double truth = matched ? 2.0 : 0.0;
            err += std::abs(wv.weights[i] - truth);
        }
        return err / static_cast<double>(data.logged.n());
    };

    int wins = 0;
    for (std::uint64_t rep = 0; rep < 50; ++rep) {
        const double big = mean_ratio_error(20000, RngSpec{700 + rep, 0}, RngSpec{700 + rep, 1});
        const double small = mean_ratio_error(500, RngSpec{700 + rep, 2}, RngSpec{700 + rep, 3});
        if (big < small) ++wins;
    }
    CHECK(wins >= 45);
}

TEST_CASE("discrete propensity on uniform logging recovers 1/k") {
    const int n = 20000, k = 4;
    Rng gen(RngSpec{37, 0});
    StateMatrix states(n, 1);
    std::vector<Action> acts;
    for (int i = 0; i < n; ++i) {
        states(i, 0) = gen.normal();  // uninformative
        acts.push_back(Action::discrete(static_cast<int>(gen.below(k))));
    }
    const auto model =
        fit_propensity_discrete(states, acts, k, ClassifierConfig::gbt(10, 2, 0.3, 50), RngSpec{37, 1});
    const Vector probs_row = model.multiclass->predict_proba(states.topRows(20)).row(3).transpose();
    for (int a = 0; a < k; ++a) {
        CHECK(probs_row[a] > 0.22);
        CHECK(probs_row[a] < 0.28);
    }
}

TEST_CASE("continuous propensity: exact mean model floors the variance") {
    const int n = 50;
    StateMatrix states(n, 1);
    std::vector<Action> acts;
    for (int i = 0; i < n; ++i) {
        states(i, 0) = 0.1 * i;
        acts.push_back(Action::continuous(2.0 * states(i, 0) + 1.0));
    }
    const auto model = fit_propensity_continuous(states, acts, ClassifierConfig::linear(0.0), RngSpec{});
    CHECK(model.variance == kVarianceFloor);
    CHECK(model.variance_floored);
}

TEST_CASE("continuous propensity density at the mean is 1/(sigma sqrt(2 pi))") {
    const int n = 50;
    StateMatrix states(n, 1);
    std::vector<Action> acts;
    for (int i = 0; i < n; ++i) {
        states(i, 0) = 0.1 * i;
        acts.push_back(Action::continuous(states(i, 0)));
    }
    auto model = fit_propensity_continuous(states, acts, ClassifierConfig::linear(0.0), RngSpec{});
    model.variance = 1.0;  // pin sigma for the analytic check
    Eigen::RowVectorXd s(1);
    s << 2.0;
    const double g = model.mean_model->predict_row(s);
    CHECK(model.density_at(s, Action::continuous(g)) == doctest::Approx(0.3989422804).epsilon(1e-9));

    // Inverse-density weight at the mean is sqrt(2 pi).
    StateMatrix qs(1, 1);
    qs << 2.0;
    Vector qr = Vector::Zero(1);
    const auto logged = make_logged_dataset(qs, {Action::continuous(g)}, qr);
    const auto wv = propensity_weights(model, logged, 1e-6);
    CHECK(wv.weights[0] == doctest::Approx(std::sqrt(2.0 * 3.14159265358979)).epsilon(1e-9));
}

TEST_CASE("propensity weights: exact quarter probabilities give weight 4") {
    StateMatrix states = StateMatrix::Zero(8, 1);
    std::vector<Action> acts;
    for (int i = 0; i < 8; ++i) acts.push_back(Action::discrete(i % 4));
    const auto model =
        fit_propensity_discrete(states, acts, 4, ClassifierConfig::gbt(5, 1, 0.5, 1), RngSpec{});

    Vector r = Vector::Zero(8);
    const auto logged = make_logged_dataset(states, acts, r);
    const auto wv = propensity_weights(model, logged, 1e-6);
    for (Eigen::Index i = 0; i < 8; ++i) CHECK(wv.weights[i] == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("propensity weights hit the density floor") {
    const int n = 50;
    StateMatrix states(n, 1);
    std::vector<Action> acts;
    Rng gen(RngSpec{38, 0});
    for (int i = 0; i < n; ++i) {
        states(i, 0) = 0.1 * i;
        acts.push_back(Action::continuous(states(i, 0) + 0.01 * gen.normal()));
    }
    const auto model = fit_propensity_continuous(states, acts, ClassifierConfig::linear(0.0), RngSpec{});

    StateMatrix qs(1, 1);
    qs << 0.0;
    Vector qr = Vector::Zero(1);
    const auto logged = make_logged_dataset(qs, {Action::continuous(1e9)}, qr);  // far tail
    const auto wv = propensity_weights(model, logged, 1e-6);
    CHECK(wv.weights[0] == doctest::Approx(1e6).epsilon(1e-12));
    CHECK(wv.clipped_count == 1);
}

TEST_CASE("propensity weights reject variant mismatch") {
    StateMatrix states = StateMatrix::Zero(4, 1);
    std::vector<Action> acts;
    for (int i = 0; i < 4; ++i) acts.push_back(Action::discrete(i % 2));
    const auto model =
        fit_propensity_discrete(states, acts, 2, ClassifierConfig::gbt(3, 1, 0.5, 1), RngSpec{});

    StateMatrix cs = StateMatrix::Zero(2, 1);
    Vector cr = Vector::Zero(2);
    const auto cont = make_logged_dataset(cs, {Action::continuous(0.0), Action::continuous(1.0)}, cr);
    CHECK_THROWS_AS(propensity_weights(model, cont, 1e-6), VariantMismatch);
}
