#pragma once

#include <cmath>
#include <cstddef>

#include "bope/core.hpp"

namespace bope {

enum class KernelKind { Gaussian, Epanechnikov };

// Smoothing kernel value at u. Both kernels integrate to one and are
// symmetric; Gaussian is strictly positive, Epanechnikov has support [-1, 1].
template <typename Scalar>
Scalar kernel_eval(KernelKind kind, Scalar u) {
    if (kind == KernelKind::Gaussian) {
        return std::exp(Scalar(-0.5) * u * u) * Scalar(0.3989422804014326779399460599343819);
    }
    const Scalar au = std::abs(u);
    if (au > Scalar(1)) return Scalar(0);
    return Scalar(0.75) * (Scalar(1) - u * u);
}

// R(K) = integral of K(u)^2 du.
double kernel_roughness(KernelKind kind);

// Matches the observed action against the proposed one: an indicator for
// discrete actions, a scaled kernel (1/h) K((a' - a)/h) for continuous ones.
struct RejectionSpec {
    ActionKind kind = ActionKind::Discrete;
    KernelKind kernel = KernelKind::Gaussian;
    double bandwidth = 1.0;

    static RejectionSpec discrete_indicator() { return RejectionSpec{ActionKind::Discrete, KernelKind::Gaussian, 1.0}; }
    static RejectionSpec continuous_kernel(KernelKind k, double h);
};

double rejection_term(const RejectionSpec& spec, const Action& a, const Action& a_prime);

// h = c * action_scale * n^(-1/5), the rate-matched bandwidth rule.
// action_scale is the sample standard deviation of the logged actions.
double bandwidth_rule(std::size_t n, double action_scale, double c);

// Sample standard deviation of a continuous action list (for bandwidth_rule).
double action_scale(const std::vector<Action>& actions);

}  // namespace bope
