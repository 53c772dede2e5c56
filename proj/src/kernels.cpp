#include "bope/kernels.hpp"

namespace bope {

double kernel_roughness(KernelKind kind) {
    if (kind == KernelKind::Gaussian) {
        // 1 / (2 sqrt(pi))
        return 0.28209479177387814347403972578039;
    }
    // integral of (0.75 (1 - u^2))^2 over [-1, 1] = 3/5
    return 0.6;
}

RejectionSpec RejectionSpec::continuous_kernel(KernelKind k, double h) {
    if (!(h > 0.0)) throw OutOfRange("kernel bandwidth must be positive");
    return RejectionSpec{ActionKind::Continuous, k, h};
}

double rejection_term(const RejectionSpec& spec, const Action& a, const Action& a_prime) {
    if (a.kind != a_prime.kind || a.kind != spec.kind)
        throw VariantMismatch("rejection spec and action variants disagree");
    if (spec.kind == ActionKind::Discrete) {
        return a.index == a_prime.index ? 1.0 : 0.0;
    }
    const double u = (a_prime.value - a.value) / spec.bandwidth;
    return kernel_eval(spec.kernel, u) / spec.bandwidth;
}

double bandwidth_rule(std::size_t n, double scale, double c) {
    if (n < 2) throw OutOfRange("bandwidth_rule requires n >= 2");
    if (!(scale > 0.0)) throw ZeroScale("action scale is zero; all logged actions identical");
    if (!(c > 0.0)) throw OutOfRange("bandwidth constant must be positive");
    double inv_root = std::pow(static_cast<double>(n), -0.2);
    // Exact integral fifth roots (32 -> 1/2, 100000 -> 1/10): libm pow can be
    // an ulp off, and the rule is specified exactly there.
    const double r = std::round(std::pow(static_cast<double>(n), 0.2));
    if (r >= 1.0 && r <= 7131.0) {
        const auto ri = static_cast<std::uint64_t>(r);
        if (ri * ri * ri * ri * ri == static_cast<std::uint64_t>(n)) inv_root = 1.0 / r;
    }
    return c * scale * inv_root;
}

double action_scale(const std::vector<Action>& actions) {
    if (actions.size() < 2) throw OutOfRange("action_scale requires at least 2 actions");
    double mean = 0.0;
    for (const Action& a : actions) {
        if (a.kind != ActionKind::Continuous) throw VariantMismatch("action_scale expects continuous actions");
        mean += a.value;
    }
    mean /= static_cast<double>(actions.size());
    double ss = 0.0;
    for (const Action& a : actions) ss += (a.value - mean) * (a.value - mean);
    return std::sqrt(ss / static_cast<double>(actions.size() - 1));
}

}  // namespace bope
