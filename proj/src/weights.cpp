#include "bope/weights.hpp"

#include <cmath>

namespace bope {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267793994605993438;

void check_paired(const LoggedDataset& logged, const ProposedActions& proposed) {
    if (logged.n() < 1) throw LengthMismatch("empty logged dataset");
    if (proposed.n() != logged.n())
        throw LengthMismatch("proposed actions length " + std::to_string(proposed.n()) +
                             " != logged n " + std::to_string(logged.n()));
    if (action_kind_of(proposed.actions) != logged.kind)
        throw VariantMismatch("proposed actions variant differs from logged actions");
}

}  // namespace

Matrix encode_state_action(const Eigen::Ref<const StateMatrix>& states,
                           const std::vector<Action>& actions, std::optional<int> k) {
    const Eigen::Index n = states.rows();
    if (static_cast<Eigen::Index>(actions.size()) != n)
        throw LengthMismatch("actions length != state rows");
    const ActionKind kind = action_kind_of(actions);

    if (kind == ActionKind::Discrete) {
        if (!k.has_value()) throw MissingK("discrete encoding requires the number of actions k");
        const int kk = *k;
        Matrix out(n, states.cols() + kk);
        out.leftCols(states.cols()) = states;
        out.rightCols(kk).setZero();
        for (Eigen::Index i = 0; i < n; ++i) {
            const int a = actions[static_cast<std::size_t>(i)].index;
            if (a < 0 || a >= kk)
                throw DimensionMismatch("action index " + std::to_string(a) + " outside 0.." +
                                        std::to_string(kk - 1));
            out(i, states.cols() + a) = 1.0;
        }
        return out;
    }

    Matrix out(n, states.cols() + 1);
    out.leftCols(states.cols()) = states;
    for (Eigen::Index i = 0; i < n; ++i) out(i, states.cols()) = actions[static_cast<std::size_t>(i)].value;
    return out;
}

int infer_num_actions(const LoggedDataset& logged, const ProposedActions& proposed) {
    int kmax = 0;
    for (const Action& a : logged.actions) kmax = std::max(kmax, a.index);
    for (const Action& a : proposed.actions) kmax = std::max(kmax, a.index);
    return kmax + 1;
}

DiscriminationSet build_discrimination_set(const LoggedDataset& logged, const ProposedActions& proposed,
                                           std::optional<int> k) {
    check_paired(logged, proposed);
    if (logged.kind == ActionKind::Discrete && !k.has_value()) k = infer_num_actions(logged, proposed);

    const Matrix observed = encode_state_action(logged.states, logged.actions, k);
    const Matrix prop = encode_state_action(logged.states, proposed.actions, k);

    const Eigen::Index n = logged.n();
    DiscriminationSet set;
    set.features.resize(2 * n, observed.cols());
    set.features.topRows(n) = observed;
    set.features.bottomRows(n) = prop;
    set.labels.resize(2 * n);
    set.labels.head(n).setZero();
    set.labels.tail(n).setOnes();
    return set;
}

double ratio_from_probability(double p_hat, double clip_epsilon) {
    if (!(p_hat > 0.0) || !(p_hat < 1.0)) throw OutOfRange("p_hat must lie in (0, 1)");
    if (!(clip_epsilon > 0.0) || !(clip_epsilon < 0.5)) throw OutOfRange("clip_epsilon must lie in (0, 0.5)");
    const double p = std::min(1.0 - clip_epsilon, std::max(clip_epsilon, p_hat));
    return p / (1.0 - p);
}

WeightVector estimate_bope_weights(const LoggedDataset& logged, const ProposedActions& proposed,
                                   const ClassifierConfig& config, int folds, double clip_epsilon,
                                   RngSpec rng) {
    check_paired(logged, proposed);
    const Eigen::Index n = logged.n();
    if (folds < 2) throw FoldTooSmall("cross-fitting needs at least 2 folds");
    if (folds > n) throw FoldTooSmall("more folds than logged units");
    if (!(clip_epsilon > 0.0) || !(clip_epsilon < 0.5)) throw OutOfRange("clip_epsilon must lie in (0, 0.5)");

    const std::optional<int> k = logged.kind == ActionKind::Discrete
                                     ? std::optional<int>(infer_num_actions(logged, proposed))
                                     : std::nullopt;
    const DiscriminationSet set = build_discrimination_set(logged, proposed, k);

    // Balanced fold assignment over paired unit indices.
    Rng gen(substream(rng, 0));
    const auto perm = gen.permutation(static_cast<std::size_t>(n));
    std::vector<int> fold_of(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) fold_of[perm[static_cast<std::size_t>(i)]] = static_cast<int>(i % folds);

    WeightVector wv;
    wv.weights.resize(n);
    wv.clip_epsilon = clip_epsilon;
    wv.folds = folds;

    for (int t = 0; t < folds; ++t) {
        std::vector<Eigen::Index> train_units, held_units;
        for (Eigen::Index i = 0; i < n; ++i)
            (fold_of[static_cast<std::size_t>(i)] == t ? held_units : train_units).push_back(i);

        // Train on both discrimination rows (i and n+i) of the other folds.
        Matrix Xtr(2 * train_units.size(), set.features.cols());
        IntVector ytr(2 * train_units.size());
        for (std::size_t j = 0; j < train_units.size(); ++j) {
            const Eigen::Index u = train_units[j];
            Xtr.row(static_cast<Eigen::Index>(j)) = set.features.row(u);
            ytr[static_cast<Eigen::Index>(j)] = 0;
            Xtr.row(static_cast<Eigen::Index>(train_units.size() + j)) = set.features.row(n + u);
            ytr[static_cast<Eigen::Index>(train_units.size() + j)] = 1;
        }
        const auto clf =
            train_classifier(Xtr, ytr, config, substream(rng, 1 + static_cast<std::uint64_t>(t)));

        // Score the held-out fold's observed rows only.
        Matrix Xte(held_units.size(), set.features.cols());
        for (std::size_t j = 0; j < held_units.size(); ++j)
            Xte.row(static_cast<Eigen::Index>(j)) = set.features.row(held_units[j]);
        const Vector p_hat = clf.predict_proba(Xte);

        for (std::size_t j = 0; j < held_units.size(); ++j) {
            const double p = p_hat[static_cast<Eigen::Index>(j)];
            if (p < clip_epsilon || p > 1.0 - clip_epsilon) ++wv.clipped_count;
            wv.weights[held_units[j]] = ratio_from_probability(p, clip_epsilon);
        }
    }
    return wv;
}

WeightVector bope_weights_from_classifier(const ProbabilisticClassifier& clf, const LoggedDataset& logged,
                                          std::optional<int> k, double clip_epsilon) {
    if (!(clip_epsilon > 0.0) || !(clip_epsilon < 0.5)) throw OutOfRange("clip_epsilon must lie in (0, 0.5)");
    const Matrix observed = encode_state_action(logged.states, logged.actions, k);
    const Vector p_hat = clf.predict_proba(observed);

    WeightVector wv;
    wv.weights.resize(logged.n());
    wv.clip_epsilon = clip_epsilon;
    wv.folds = 0;
    for (Eigen::Index i = 0; i < logged.n(); ++i) {
        if (p_hat[i] < clip_epsilon || p_hat[i] > 1.0 - clip_epsilon) ++wv.clipped_count;
        wv.weights[i] = ratio_from_probability(p_hat[i], clip_epsilon);
    }
    return wv;
}

double PropensityModel::density_at(const Eigen::Ref<const Eigen::RowVectorXd>& state,
                                   const Action& a) const {
    if (a.kind != kind) throw VariantMismatch("action variant differs from propensity model");
    if (kind == ActionKind::Discrete) {
        Matrix one_row(1, state.size());
        one_row.row(0) = state;
        const Matrix probs = multiclass->predict_proba(one_row);
        if (a.index < 0 || a.index >= probs.cols()) throw DimensionMismatch("action index outside model range");
        return probs(0, a.index);
    }
    const double mean = mean_model->predict_row(state);
    const double sd = std::sqrt(variance);
    const double z = (a.value - mean) / sd;
    return kInvSqrt2Pi / sd * std::exp(-0.5 * z * z);
}

Vector PropensityModel::density(const StateMatrix& states, const std::vector<Action>& actions) const {
    if (static_cast<Eigen::Index>(actions.size()) != states.rows())
        throw LengthMismatch("actions length != state rows");
    Vector out(states.rows());
    if (kind == ActionKind::Discrete) {
        const Matrix probs = multiclass->predict_proba(states);
        for (Eigen::Index i = 0; i < states.rows(); ++i) {
            const Action& a = actions[static_cast<std::size_t>(i)];
            if (a.kind != ActionKind::Discrete) throw VariantMismatch("expected discrete actions");
            if (a.index < 0 || a.index >= probs.cols())
                throw DimensionMismatch("action index outside model range");
            out[i] = probs(i, a.index);
        }
        return out;
    }
    const Vector means = mean_model->predict(states);
    const double sd = std::sqrt(variance);
    for (Eigen::Index i = 0; i < states.rows(); ++i) {
        const Action& a = actions[static_cast<std::size_t>(i)];
        if (a.kind != ActionKind::Continuous) throw VariantMismatch("expected continuous actions");
        const double z = (a.value - means[i]) / sd;
        out[i] = kInvSqrt2Pi / sd * std::exp(-0.5 * z * z);
    }
    return out;
}

PropensityModel fit_propensity_discrete(const Eigen::Ref<const StateMatrix>& states,
                                        const std::vector<Action>& actions, int k,
                                        const ClassifierConfig& cfg, RngSpec rng) {
    if (k < 2) throw SingleClass("discrete propensity needs k >= 2");
    IntVector labels(states.rows());
    for (Eigen::Index i = 0; i < states.rows(); ++i) {
        const Action& a = actions[static_cast<std::size_t>(i)];
        if (a.kind != ActionKind::Discrete) throw VariantMismatch("expected discrete actions");
        labels[i] = a.index;
    }
    PropensityModel model;
    model.kind = ActionKind::Discrete;
    model.multiclass = train_multiclass(states, labels, k, cfg, rng);
    return model;
}

PropensityModel fit_propensity_continuous(const Eigen::Ref<const StateMatrix>& states,
                                          const std::vector<Action>& actions,
                                          const ClassifierConfig& cfg, RngSpec rng) {
    Vector targets(states.rows());
    for (Eigen::Index i = 0; i < states.rows(); ++i) {
        const Action& a = actions[static_cast<std::size_t>(i)];
        if (a.kind != ActionKind::Continuous) throw VariantMismatch("expected continuous actions");
        targets[i] = a.value;
    }
    PropensityModel model;
    model.kind = ActionKind::Continuous;
    model.mean_model = train_regressor(states, targets, cfg, rng);
    const Vector resid = targets - model.mean_model->predict(states);
    const double mse = resid.squaredNorm() / static_cast<double>(states.rows());
    if (mse < kVarianceFloor) {
        model.variance = kVarianceFloor;
        model.variance_floored = true;
    } else {
        model.variance = mse;
    }
    return model;
}

WeightVector propensity_weights(const PropensityModel& model, const LoggedDataset& logged,
                                double clip_epsilon_density) {
    if (model.kind != logged.kind) throw VariantMismatch("propensity model variant differs from dataset");
    if (!(clip_epsilon_density > 0.0) || !(clip_epsilon_density < 0.5))
        throw OutOfRange("density floor must lie in (0, 0.5)");

    const Vector dens = model.density(logged.states, logged.actions);
    WeightVector wv;
    wv.weights.resize(logged.n());
    wv.clip_epsilon = clip_epsilon_density;
    wv.folds = 0;
    for (Eigen::Index i = 0; i < logged.n(); ++i) {
        if (dens[i] < clip_epsilon_density) ++wv.clipped_count;
        wv.weights[i] = 1.0 / std::max(dens[i], clip_epsilon_density);
    }
    return wv;
}

}  // namespace bope
