#pragma once

#include <functional>

#include "bope/core.hpp"
#include "bope/weights.hpp"

namespace bope {

// Feature maps for the balance check. phi acts on actions, psi on state rows;
// the balance moments are outer products phi(a) (x) psi(s). Defaults are the
// lowest-order moments: one-hot over k (discrete) or [a, a^2] (continuous)
// for phi, and [1, s...] for psi. Any fixed-dimension maps are accepted.
struct FeatureMap {
    std::function<Vector(const Action&)> phi;
    std::function<Vector(const Eigen::RowVectorXd&)> psi;
    int dim_phi = 0;
    int dim_psi = 0;

    static FeatureMap defaults(ActionKind kind, int k, Eigen::Index state_dim);
};

struct BalanceReport {
    double discrepancy = 0.0;  // L1 norm of the per-coordinate gaps
    Vector gaps;               // flattened row-major: index = phi_j * dim_psi + psi_l
    int dim_phi = 0;
    int dim_psi = 0;
};

// L1 functional discrepancy between the weighted observed moments and the
// proposed-policy moments:
//   || (1/n) sum_i rho_i phi(a_i)(x)psi(s_i) - (1/n) sum_i phi(a'_i)(x)psi(s_i) ||_1
BalanceReport l1_discrepancy(const LoggedDataset& logged, const ProposedActions& proposed,
                             const WeightVector& weights, const FeatureMap& fmap);

enum class Divergence { SquaredError, KlStyle };

// Divergence between estimated and true ratios; an oracle-only diagnostic.
// SquaredError: mean (est - truth)^2. KlStyle: mean (truth ln(truth/est)
// - truth + est), nonnegative with zero iff est == truth.
double ratio_divergence(const Eigen::Ref<const Vector>& estimated, const Eigen::Ref<const Vector>& truth,
                        Divergence kind);

struct WeightSummary {
    double mean = 0.0;
    double max = 0.0;
    double effective_sample_size = 0.0;  // (sum w)^2 / sum w^2
};

WeightSummary weight_summary(const WeightVector& weights);

}  // namespace bope
