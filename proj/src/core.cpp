#include "bope/core.hpp"

namespace bope {

ActionKind action_kind_of(const std::vector<Action>& actions) {
    if (actions.empty()) throw LengthMismatch("empty action list");
    const ActionKind kind = actions.front().kind;
    for (const Action& a : actions) {
        if (a.kind != kind) throw MixedActionVariant("action list mixes discrete and continuous actions");
    }
    return kind;
}

LoggedDataset make_logged_dataset(StateMatrix states, std::vector<Action> actions, Vector rewards) {
    const Eigen::Index n = states.rows();
    if (n < 1 || states.cols() < 1) throw LengthMismatch("state matrix must be at least 1x1");
    if (static_cast<Eigen::Index>(actions.size()) != n)
        throw LengthMismatch("actions length " + std::to_string(actions.size()) + " != state rows " +
                             std::to_string(n));
    if (rewards.size() != n)
        throw LengthMismatch("rewards length " + std::to_string(rewards.size()) + " != state rows " +
                             std::to_string(n));
    if (!states.allFinite()) throw NonFiniteValue("state matrix contains NaN or infinity");
    if (!rewards.allFinite()) throw NonFiniteValue("rewards contain NaN or infinity");

    const ActionKind kind = action_kind_of(actions);
    for (const Action& a : actions) {
        if (a.kind == ActionKind::Continuous && !std::isfinite(a.value))
            throw NonFiniteValue("continuous action value is not finite");
        if (a.kind == ActionKind::Discrete && a.index < 0)
            throw OutOfRange("discrete action index must be nonnegative");
    }

    LoggedDataset ds;
    ds.states = std::move(states);
    ds.actions = std::move(actions);
    ds.rewards = std::move(rewards);
    ds.kind = kind;
    return ds;
}

ProposedActions make_proposed_actions(std::vector<Action> actions, const LoggedDataset& paired) {
    if (static_cast<Eigen::Index>(actions.size()) != paired.n())
        throw LengthMismatch("proposed actions length " + std::to_string(actions.size()) +
                             " != logged n " + std::to_string(paired.n()));
    if (action_kind_of(actions) != paired.kind)
        throw MixedActionVariant("proposed actions variant differs from logged actions");
    return ProposedActions{std::move(actions)};
}

std::vector<Action> sample_policy_actions(const Policy& policy, const StateMatrix& states, RngSpec rng) {
    std::vector<Action> out;
    out.reserve(static_cast<std::size_t>(states.rows()));
    if (policy.kind == Policy::Kind::Deterministic) {
        for (Eigen::Index i = 0; i < states.rows(); ++i) out.push_back(policy.predictor(states.row(i)));
    } else {
        Rng gen(rng);
        for (Eigen::Index i = 0; i < states.rows(); ++i) out.push_back(policy.sampler(states.row(i), gen));
    }
    if (!out.empty()) action_kind_of(out);
    return out;
}

}  // namespace bope
