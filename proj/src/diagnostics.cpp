#include "bope/diagnostics.hpp"

#include <cmath>

namespace bope {

FeatureMap FeatureMap::defaults(ActionKind kind, int k, Eigen::Index state_dim) {
    FeatureMap fm;
    if (kind == ActionKind::Discrete) {
        if (k < 1) throw MissingK("discrete default feature map needs k >= 1");
        fm.dim_phi = k;
        fm.phi = [k](const Action& a) {
            Vector v = Vector::Zero(k);
            if (a.index < 0 || a.index >= k) throw DimensionMismatch("action index outside 0..k-1");
            v[a.index] = 1.0;
            return v;
        };
    } else {
        fm.dim_phi = 2;
        fm.phi = [](const Action& a) {
            Vector v(2);
            v[0] = a.value;
            v[1] = a.value * a.value;
            return v;
        };
    }
    fm.dim_psi = static_cast<int>(state_dim) + 1;
    fm.psi = [](const Eigen::RowVectorXd& s) {
        Vector v(s.size() + 1);
        v[0] = 1.0;
        v.tail(s.size()) = s.transpose();
        return v;
    };
    return fm;
}

BalanceReport l1_discrepancy(const LoggedDataset& logged, const ProposedActions& proposed,
                             const WeightVector& weights, const FeatureMap& fmap) {
    if (proposed.n() != logged.n()) throw LengthMismatch("proposed actions length != logged n");
    if (weights.n() != logged.n()) throw LengthMismatch("weight vector length != logged n");

    const Eigen::Index n = logged.n();
    const int d = fmap.dim_phi * fmap.dim_psi;
    Vector observed = Vector::Zero(d);
    Vector target = Vector::Zero(d);

    for (Eigen::Index i = 0; i < n; ++i) {
        const Vector psi = fmap.psi(logged.states.row(i));
        const Vector phi_obs = fmap.phi(logged.actions[static_cast<std::size_t>(i)]);
        const Vector phi_prop = fmap.phi(proposed.actions[static_cast<std::size_t>(i)]);
        if (psi.size() != fmap.dim_psi || phi_obs.size() != fmap.dim_phi)
            throw DimensionMismatch("feature map output dimension mismatch");
        for (int j = 0; j < fmap.dim_phi; ++j) {
            for (int l = 0; l < fmap.dim_psi; ++l) {
                observed[j * fmap.dim_psi + l] += weights.weights[i] * phi_obs[j] * psi[l];
                target[j * fmap.dim_psi + l] += phi_prop[j] * psi[l];
            }
        }
    }
    observed /= static_cast<double>(n);
    target /= static_cast<double>(n);

    BalanceReport report;
    report.gaps = observed - target;
    report.discrepancy = report.gaps.lpNorm<1>();
    report.dim_phi = fmap.dim_phi;
    report.dim_psi = fmap.dim_psi;
    return report;
}

double ratio_divergence(const Eigen::Ref<const Vector>& estimated, const Eigen::Ref<const Vector>& truth,
                        Divergence kind) {
    if (estimated.size() != truth.size()) throw LengthMismatch("ratio vectors differ in length");
    if (estimated.size() == 0) throw EmptyInput("empty ratio vectors");

    double total = 0.0;
    for (Eigen::Index i = 0; i < truth.size(); ++i) {
        if (!(truth[i] > 0.0)) throw NonPositiveTruth("true ratios must be positive");
        if (kind == Divergence::SquaredError) {
            const double d = estimated[i] - truth[i];
            total += d * d;
        } else {
            if (!(estimated[i] > 0.0)) throw OutOfRange("estimated ratios must be positive for KL");
            total += truth[i] * std::log(truth[i] / estimated[i]) - truth[i] + estimated[i];
        }
    }
    return total / static_cast<double>(truth.size());
}

WeightSummary weight_summary(const WeightVector& weights) {
    if (weights.n() == 0) throw EmptyInput("empty weight vector");
    WeightSummary s;
    s.mean = weights.weights.mean();
    s.max = weights.weights.maxCoeff();
    const double sum = weights.weights.sum();
    const double sumsq = weights.weights.squaredNorm();
    s.effective_sample_size = sum * sum / sumsq;
    return s;
}

}  // namespace bope
