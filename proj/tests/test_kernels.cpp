#include <doctest.h>

#include <cmath>

#include "bope/kernels.hpp"

using namespace bope;

namespace {

// Trapezoid quadrature oracle on a fixed grid.
double trapezoid(KernelKind kind, double lo, double hi, double step, bool squared) {
    double sum = 0.0;
    double prev = kernel_eval(kind, lo);
    if (squared) prev *= prev;
    for (double u = lo + step; u <= hi + 1e-12; u += step) {
        double v = kernel_eval(kind, u);
        if (squared) v *= v;
        sum += 0.5 * (prev + v) * step;
        prev = v;
    }
    return sum;
}

}  // namespace

TEST_CASE("kernel point values") {
    CHECK(kernel_eval(KernelKind::Gaussian, 0.0) == doctest::Approx(0.3989422804).epsilon(1e-9));
    CHECK(kernel_eval(KernelKind::Gaussian, 1.0) == doctest::Approx(0.2419707245).epsilon(1e-9));
    CHECK(kernel_eval(KernelKind::Epanechnikov, 0.0) == doctest::Approx(0.75));
    CHECK(kernel_eval(KernelKind::Epanechnikov, 1.5) == 0.0);
    CHECK(kernel_eval(KernelKind::Epanechnikov, -1.5) == 0.0);
}

TEST_CASE("kernels integrate to one (quadrature oracle)") {
    CHECK(std::abs(trapezoid(KernelKind::Gaussian, -8.0, 8.0, 1e-4, false) - 1.0) < 1e-6);
    CHECK(std::abs(trapezoid(KernelKind::Epanechnikov, -1.0, 1.0, 1e-4, false) - 1.0) < 1e-6);
}

TEST_CASE("kernel roughness matches quadrature oracle") {
    CHECK(std::abs(kernel_roughness(KernelKind::Gaussian) - 0.282094791773878) < 1e-12);
    CHECK(std::abs(kernel_roughness(KernelKind::Epanechnikov) - 0.6) < 1e-12);
    CHECK(std::abs(trapezoid(KernelKind::Gaussian, -8.0, 8.0, 1e-4, true) -
                   kernel_roughness(KernelKind::Gaussian)) < 1e-6);
    CHECK(std::abs(trapezoid(KernelKind::Epanechnikov, -1.0, 1.0, 1e-4, true) -
                   kernel_roughness(KernelKind::Epanechnikov)) < 1e-6);
}

TEST_CASE("kernel symmetry is exact") {
    for (double u = 0.0; u <= 4.0; u += 0.17) {
        CHECK(kernel_eval(KernelKind::Gaussian, u) == kernel_eval(KernelKind::Gaussian, -u));
        CHECK(kernel_eval(KernelKind::Epanechnikov, u) == kernel_eval(KernelKind::Epanechnikov, -u));
    }
}

TEST_CASE("rejection term: discrete indicator") {
    const auto spec = RejectionSpec::discrete_indicator();
    CHECK(rejection_term(spec, Action::discrete(2), Action::discrete(2)) == 1.0);
    CHECK(rejection_term(spec, Action::discrete(2), Action::discrete(0)) == 0.0);
}

TEST_CASE("rejection term: continuous kernel carries 1/h") {
    const auto spec1 = RejectionSpec::continuous_kernel(KernelKind::Gaussian, 1.0);
    CHECK(rejection_term(spec1, Action::continuous(0.3), Action::continuous(0.3)) ==
          doctest::Approx(0.3989422804).epsilon(1e-9));
    const auto spec_half = RejectionSpec::continuous_kernel(KernelKind::Gaussian, 0.5);
    CHECK(rejection_term(spec_half, Action::continuous(0.0), Action::continuous(0.5)) ==
          doctest::Approx(2.0 * 0.2419707245).epsilon(1e-9));
}

TEST_CASE("rejection term: continuity and nonnegativity in a_prime") {
    const auto spec = RejectionSpec::continuous_kernel(KernelKind::Epanechnikov, 0.7);
    double prev = rejection_term(spec, Action::continuous(0.0), Action::continuous(-2.0));
    for (double ap = -2.0; ap <= 2.0; ap += 1e-3) {
        const double v = rejection_term(spec, Action::continuous(0.0), Action::continuous(ap));
        CHECK(v >= 0.0);
        CHECK(std::abs(v - prev) < 0.01);
        prev = v;
    }
}

TEST_CASE("rejection term rejects variant mismatch") {
    const auto spec = RejectionSpec::discrete_indicator();
    CHECK_THROWS_AS(rejection_term(spec, Action::continuous(0.1), Action::continuous(0.1)),
                    VariantMismatch);
}

TEST_CASE("bandwidth rule") {
    CHECK(bandwidth_rule(100000, 1.0, 1.0) == 0.1);
    CHECK(bandwidth_rule(32, 2.0, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(bandwidth_rule(100, 0.0, 1.0), ZeroScale);
    CHECK_THROWS_AS(bandwidth_rule(1, 1.0, 1.0), OutOfRange);
}

TEST_CASE("action scale is the sample standard deviation") {
    std::vector<Action> acts = {Action::continuous(1.0), Action::continuous(3.0),
                                Action::continuous(5.0)};
    CHECK(action_scale(acts) == doctest::Approx(2.0).epsilon(1e-12));
    std::vector<Action> same = {Action::continuous(2.0), Action::continuous(2.0)};
    CHECK(action_scale(same) == 0.0);
}
