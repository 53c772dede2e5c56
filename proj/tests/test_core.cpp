#include <doctest.h>

#include <cstring>

#include "bope/core.hpp"

using namespace bope;

namespace {

StateMatrix states2x1() {
    StateMatrix s(2, 1);
    s << 0.0, 1.0;
    return s;
}

}  // namespace

TEST_CASE("make_logged_dataset validates and accepts") {
    Vector r(2);
    r << 1.0, 0.0;
    const auto ds = make_logged_dataset(states2x1(), {Action::discrete(0), Action::discrete(1)}, r);
    CHECK(ds.n() == 2);
    CHECK(ds.kind == ActionKind::Discrete);
}

TEST_CASE("make_logged_dataset rejects length mismatch") {
    Vector r(2);
    r << 1.0, 0.0;
    CHECK_THROWS_AS(make_logged_dataset(states2x1(), {Action::discrete(0)}, r), LengthMismatch);
}

TEST_CASE("make_logged_dataset rejects non-finite states") {
    StateMatrix s(2, 1);
    s << 0.0, std::numeric_limits<double>::quiet_NaN();
    Vector r(2);
    r << 1.0, 0.0;
    CHECK_THROWS_AS(make_logged_dataset(s, {Action::discrete(0), Action::discrete(1)}, r),
                    NonFiniteValue);
}

TEST_CASE("make_logged_dataset rejects mixed variants") {
    Vector r(2);
    r << 1.0, 0.0;
    CHECK_THROWS_AS(make_logged_dataset(states2x1(), {Action::discrete(0), Action::continuous(0.5)}, r),
                    MixedActionVariant);
}

TEST_CASE("deterministic policy ignores rng") {
    const Policy p = Policy::deterministic([](const Eigen::RowVectorXd&) { return Action::discrete(0); });
    StateMatrix s(3, 1);
    s << 1.0, 2.0, 3.0;
    const auto a = sample_policy_actions(p, s, RngSpec{7, 0});
    const auto b = sample_policy_actions(p, s, RngSpec{8, 4});
    REQUIRE(a.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(a[i].index == 0);
        CHECK(b[i].index == 0);
    }
}

TEST_CASE("stochastic policy is reproducible given the spec") {
    const Policy p = Policy::stochastic(
        [](const Eigen::RowVectorXd&, Rng& g) { return Action::discrete(static_cast<int>(g.below(2))); });
    StateMatrix s = StateMatrix::Zero(50, 1);
    const auto a = sample_policy_actions(p, s, RngSpec{42, 3});
    const auto b = sample_policy_actions(p, s, RngSpec{42, 3});
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].index == b[i].index);
}

TEST_CASE("uniform policy hits the binomial interval at n=10000") {
    const Policy p = Policy::stochastic(
        [](const Eigen::RowVectorXd&, Rng& g) { return Action::discrete(static_cast<int>(g.below(2))); });
    StateMatrix s = StateMatrix::Zero(10000, 1);
    const auto a = sample_policy_actions(p, s, RngSpec{1, 0});
    double ones = 0;
    for (const auto& act : a) ones += act.index;
    const double frac = ones / 10000.0;
    CHECK(frac > 0.48);
    CHECK(frac < 0.52);
}

TEST_CASE("rng streams are bit-reproducible and distinct") {
    Rng a(RngSpec{123, 5}), b(RngSpec{123, 5}), c(RngSpec{123, 6});
    bool any_diff = false;
    for (int i = 0; i < 64; ++i) {
        const auto va = a.next_u64();
        CHECK(va == b.next_u64());
        if (va != c.next_u64()) any_diff = true;
    }
    CHECK(any_diff);
}

TEST_CASE("rng uniform01 and normal have sane moments") {
    Rng g(RngSpec{2024, 0});
    double usum = 0.0, nsum = 0.0, nsq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = g.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        usum += u;
        const double z = g.normal();
        nsum += z;
        nsq += z * z;
    }
    CHECK(usum / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(nsum / n == doctest::Approx(0.0).epsilon(0.02));
    CHECK(nsq / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("substream derivation is stable") {
    const RngSpec parent{9, 17};
    const RngSpec a = substream(parent, 3);
    const RngSpec b = substream(parent, 3);
    const RngSpec c = substream(parent, 4);
    CHECK(a.stream == b.stream);
    CHECK(a.stream != c.stream);
    CHECK(a.seed == parent.seed);
}

TEST_CASE("categorical sampling matches probabilities") {
    Vector probs(3);
    probs << 0.2, 0.5, 0.3;
    Rng g(RngSpec{77, 0});
    Vector counts = Vector::Zero(3);
    const int n = 100000;
    for (int i = 0; i < n; ++i) counts[g.categorical(probs)] += 1.0;
    for (int j = 0; j < 3; ++j) CHECK(counts[j] / n == doctest::Approx(probs[j]).epsilon(0.05));
}

TEST_CASE("categorical never lands on zero-probability cells") {
    Vector probs(3);
    probs << 0.5, 0.0, 0.5;
    Rng g(RngSpec{5, 5});
    for (int i = 0; i < 10000; ++i) CHECK(g.categorical(probs) != 1);
}
