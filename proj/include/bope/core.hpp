#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

#include "bope/errors.hpp"
#include "bope/rng.hpp"

namespace bope {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;

// n x p feature matrix of observed states; rows are units.
using StateMatrix = Matrix;

enum class ActionKind { Discrete, Continuous };

// One action: a class index in 0..k-1 or a real-valued scalar.
struct Action {
    ActionKind kind = ActionKind::Discrete;
    int index = 0;
    double value = 0.0;

    static Action discrete(int i) { return Action{ActionKind::Discrete, i, 0.0}; }
    static Action continuous(double v) { return Action{ActionKind::Continuous, 0, v}; }
};

inline bool operator==(const Action& a, const Action& b) {
    if (a.kind != b.kind) return false;
    return a.kind == ActionKind::Discrete ? a.index == b.index : a.value == b.value;
}

// Returns the shared kind of a nonempty action list; throws on mixed variants.
ActionKind action_kind_of(const std::vector<Action>& actions);

// (s, a, r) triples collected under the logging policy. Immutable after
// construction; build through make_logged_dataset so the invariants hold.
struct LoggedDataset {
    StateMatrix states;
    std::vector<Action> actions;
    Vector rewards;
    ActionKind kind = ActionKind::Discrete;

    Eigen::Index n() const { return states.rows(); }
    Eigen::Index dim() const { return states.cols(); }
};

// Actions the proposed policy would take at the same states.
struct ProposedActions {
    std::vector<Action> actions;

    Eigen::Index n() const { return static_cast<Eigen::Index>(actions.size()); }
};

// A policy is either a pure function of the state or a sampler that is
// deterministic given (state, rng stream).
struct Policy {
    enum class Kind { Deterministic, Stochastic };

    Kind kind = Kind::Deterministic;
    std::function<Action(const Eigen::RowVectorXd&)> predictor;
    std::function<Action(const Eigen::RowVectorXd&, Rng&)> sampler;

    static Policy deterministic(std::function<Action(const Eigen::RowVectorXd&)> fn) {
        Policy p;
        p.kind = Kind::Deterministic;
        p.predictor = std::move(fn);
        return p;
    }
    static Policy stochastic(std::function<Action(const Eigen::RowVectorXd&, Rng&)> fn) {
        Policy p;
        p.kind = Kind::Stochastic;
        p.sampler = std::move(fn);
        return p;
    }
};

// Validates lengths, finiteness, and variant consistency.
// Throws LengthMismatch, NonFiniteValue, or MixedActionVariant.
LoggedDataset make_logged_dataset(StateMatrix states, std::vector<Action> actions, Vector rewards);

// Length-checked companion container for a logged dataset.
ProposedActions make_proposed_actions(std::vector<Action> actions, const LoggedDataset& paired);

// Applies the policy to each state row. Deterministic policies ignore the rng;
// stochastic policies are reproducible given the spec.
std::vector<Action> sample_policy_actions(const Policy& policy, const StateMatrix& states, RngSpec rng);

}  // namespace bope
