#include <doctest.h>

#include <cmath>

#include "bope/diagnostics.hpp"
#include "bope/synthetic.hpp"

using namespace bope;

namespace {

WeightVector wv_of(const Vector& w) {
    WeightVector wv;
    wv.weights = w;
    return wv;
}

struct PairedData {
    LoggedDataset logged;
    ProposedActions proposed;
    WeightVector true_weights;
};

PairedData oracle_draw(const DiscreteOracle& oracle, int n, RngSpec spec) {
    PairedData out{generate_logged(oracle, static_cast<std::size_t>(n), spec), {}, {}};
    out.proposed = sample_proposed(oracle, out.logged, substream(spec, 1));
    out.true_weights.weights.resize(n);
    for (Eigen::Index i = 0; i < n; ++i)
        out.true_weights.weights[i] = true_ratio(oracle, out.logged.actions[static_cast<std::size_t>(i)],
                                                 state_index_of(oracle, out.logged.states.row(i)));
    return out;
}

}  // namespace

TEST_CASE("l1 discrepancy is exactly zero under the identity configuration") {
    StateMatrix s(3, 2);
    s << 1, 2, 3, 4, 5, 6;
    Vector r = Vector::Zero(3);
    const std::vector<Action> acts = {Action::discrete(0), Action::discrete(1), Action::discrete(0)};
    const auto logged = make_logged_dataset(s, acts, r);
    const auto proposed = make_proposed_actions(acts, logged);

    const auto fmap = FeatureMap::defaults(ActionKind::Discrete, 2, 2);
    const auto report = l1_discrepancy(logged, proposed, wv_of(Vector::Ones(3)), fmap);
    CHECK(report.discrepancy == 0.0);
    CHECK(report.gaps.size() == fmap.dim_phi * fmap.dim_psi);
}

TEST_CASE("l1 discrepancy arithmetic example") {
    // phi(a) = a, psi = 1: |(1/2)(2*0 + 2*0) - (1/2)(1 + 1)| = 1.
    StateMatrix s(2, 1);
    s << 9.0, 9.0;
    Vector r = Vector::Zero(2);
    const auto logged =
        make_logged_dataset(s, {Action::continuous(0.0), Action::continuous(0.0)}, r);
    const auto proposed =
        make_proposed_actions({Action::continuous(1.0), Action::continuous(1.0)}, logged);

    FeatureMap fmap;
    fmap.dim_phi = 1;
    fmap.phi = [](const Action& a) {
        Vector v(1);
        v[0] = a.value;
        return v;
    };
    fmap.dim_psi = 1;
    fmap.psi = [](const Eigen::RowVectorXd&) {
        Vector v(1);
        v[0] = 1.0;
        return v;
    };
    Vector w(2);
    w << 2.0, 2.0;
    CHECK(l1_discrepancy(logged, proposed, wv_of(w), fmap).discrepancy == doctest::Approx(1.0));
}

TEST_CASE("true weights balance the 2-state oracle at Monte Carlo rate") {
    const auto oracle = preset_p1();
    const int n = 20000;
    const auto data = oracle_draw(oracle, n, RngSpec{61, 0});
    const auto fmap = FeatureMap::defaults(ActionKind::Discrete, 2, 1);
    const auto report = l1_discrepancy(data.logged, data.proposed, data.true_weights, fmap);
    CHECK(report.discrepancy < 0.05);

    // Per-coordinate gaps within 3/sqrt(n) of the per-unit contribution scale.
    for (int j = 0; j < fmap.dim_phi; ++j) {
        for (int l = 0; l < fmap.dim_psi; ++l) {
            double m = 0.0, ss = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const Vector psi = fmap.psi(data.logged.states.row(i));
                const double diff =
                    data.true_weights.weights[i] *
                        fmap.phi(data.logged.actions[static_cast<std::size_t>(i)])[j] * psi[l] -
                    fmap.phi(data.proposed.actions[static_cast<std::size_t>(i)])[j] * psi[l];
                m += diff;
                ss += diff * diff;
            }
            m /= n;
            const double sd = std::sqrt(std::max(0.0, ss / n - m * m));
            const double scale = std::max(sd, 1e-12);
            CHECK(std::abs(report.gaps[j * fmap.dim_psi + l]) < 3.0 / std::sqrt(double(n)) * scale);
        }
    }

    // Both divergences vanish when the estimate is the truth.
    CHECK(ratio_divergence(data.true_weights.weights, data.true_weights.weights,
                           Divergence::SquaredError) == 0.0);
    CHECK(ratio_divergence(data.true_weights.weights, data.true_weights.weights, Divergence::KlStyle) ==
          doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("ratio divergence examples") {
    Vector est(1), truth(1);
    est << 2.0;
    truth << 1.0;
    CHECK(ratio_divergence(est, truth, Divergence::SquaredError) == doctest::Approx(1.0));
    est << 1.0;
    CHECK(ratio_divergence(est, truth, Divergence::KlStyle) == doctest::Approx(0.0));
    truth << -1.0;
    CHECK_THROWS_AS(ratio_divergence(est, truth, Divergence::SquaredError), NonPositiveTruth);
    Vector wrong(2);
    wrong << 1.0, 1.0;
    CHECK_THROWS_AS(ratio_divergence(est, wrong, Divergence::SquaredError), LengthMismatch);
}

TEST_CASE("kl-style divergence is positive for mismatched ratios") {
    Vector est(3), truth(3);
    est << 0.5, 2.0, 1.5;
    truth << 1.0, 1.0, 1.0;
    CHECK(ratio_divergence(est, truth, Divergence::KlStyle) > 0.0);
}

TEST_CASE("weight summary") {
    Vector w1 = Vector::Ones(4);
    const auto s1 = weight_summary(wv_of(w1));
    CHECK(s1.effective_sample_size == doctest::Approx(4.0));

    Vector w2(4);
    w2 << 4.0, 0.001, 0.001, 0.001;
    const auto s2 = weight_summary(wv_of(w2));
    CHECK(s2.effective_sample_size == doctest::Approx(1.0015).epsilon(1e-3));
    CHECK(s2.max == 4.0);

    Vector w3(2);
    w3 << 2.0, 2.0;
    CHECK(weight_summary(wv_of(w3)).mean == doctest::Approx(2.0));
}

TEST_CASE("imbalance shrinks with classifier quality (45 of 50 seeds)") {
    const auto oracle = preset_p1();
    const auto cfg = ClassifierConfig::gbt(30, 2, 0.3, 20);
    const auto fmap = FeatureMap::defaults(ActionKind::Discrete, 2, 1);

    auto imbalance = [&](int n, RngSpec spec) {
        const auto data = oracle_draw(oracle, n, spec);
        const auto wv =
            estimate_bope_weights(data.logged, data.proposed, cfg, 5, 1e-3, substream(spec, 9));
        return l1_discrepancy(data.logged, data.proposed, wv, fmap).discrepancy;
    };

    int wins = 0;
    for (std::uint64_t rep = 0; rep < 50; ++rep) {
        const double big = imbalance(10000, RngSpec{800 + rep, 0});
        const double small = imbalance(500, RngSpec{800 + rep, 1});
        if (big < small) ++wins;
    }
    CHECK(wins >= 45);
}
