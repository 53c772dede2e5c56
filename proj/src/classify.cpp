#include "bope/classify.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <json.hpp>

namespace bope {

namespace {

constexpr double kLeafLambda = 1e-6;  // denominator guard for Newton leaf weights

double sigmoid(double s) {
    if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
    const double e = std::exp(s);
    return e / (1.0 + e);
}

double clamp_prob(double p) { return std::min(1.0 - kProbClamp, std::max(kProbClamp, p)); }

// log(1 + exp(s)) - y*s, numerically stable in both tails.
double logloss_from_score(double s, int y) {
    const double soft = s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
    return soft - static_cast<double>(y) * s;
}

// ---------------------------------------------------------------------------
// Gradient boosted trees: exact greedy split search on raw feature values,
// second-order leaf weights, deterministic tie-breaking (lowest feature index,
// then lowest threshold). No row or column subsampling.
// ---------------------------------------------------------------------------

class TreeBuilder {
  public:
    TreeBuilder(const Eigen::Ref<const Matrix>& X, const Vector& g, const Vector& h, int max_depth,
                int min_leaf)
        : X_(X), g_(g), h_(h), max_depth_(max_depth), min_leaf_(min_leaf) {}

    detail::Tree build(const std::vector<std::vector<int>>& presorted) {
        detail::Tree tree;
        nodes_ = &tree.nodes;
        build_node(presorted, 0);
        return tree;
    }

  private:
    int build_node(const std::vector<std::vector<int>>& sorted, int depth) {
        const std::vector<int>& rows = sorted[0];
        const int n_node = static_cast<int>(rows.size());
        double G = 0.0, H = 0.0;
        for (int r : rows) {
            G += g_[r];
            H += h_[r];
        }

        const int id = static_cast<int>(nodes_->size());
        nodes_->push_back(detail::TreeNode{});
        (*nodes_)[id].value = -G / (H + kLeafLambda);

        if (depth >= max_depth_ || n_node < 2 * min_leaf_) return id;

        const int p = static_cast<int>(X_.cols());
        const double parent_score = G * G / (H + kLeafLambda);
        int best_feature = -1;
        double best_threshold = 0.0;
        double best_gain = -std::numeric_limits<double>::infinity();

        // Any feasible split is taken; ties in gain (including zero-gain
        // symmetric nodes) go to the lowest feature index, then the lowest
        // threshold, so depth-limited trees can still reach interactions.
        for (int f = 0; f < p; ++f) {
            const std::vector<int>& ord = sorted[f];
            double GL = 0.0, HL = 0.0;
            for (int i = 0; i + 1 < n_node; ++i) {
                GL += g_[ord[i]];
                HL += h_[ord[i]];
                const double lo = X_(ord[i], f);
                const double hi = X_(ord[i + 1], f);
                if (lo == hi) continue;
                const int nl = i + 1;
                if (nl < min_leaf_ || n_node - nl < min_leaf_) continue;
                const double GR = G - GL, HR = H - HL;
                const double gain =
                    GL * GL / (HL + kLeafLambda) + GR * GR / (HR + kLeafLambda) - parent_score;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = f;
                    best_threshold = lo + 0.5 * (hi - lo);
                }
            }
        }
        if (best_feature < 0) return id;

        // Partition every feature's sorted list, preserving order.
        std::vector<std::vector<int>> left(p), right(p);
        for (int f = 0; f < p; ++f) {
            left[f].reserve(rows.size());
            right[f].reserve(rows.size());
            for (int r : sorted[f]) {
                if (X_(r, best_feature) <= best_threshold)
                    left[f].push_back(r);
                else
                    right[f].push_back(r);
            }
        }

        const int left_id = build_node(left, depth + 1);
        const int right_id = build_node(right, depth + 1);
        (*nodes_)[id].feature = best_feature;
        (*nodes_)[id].threshold = best_threshold;
        (*nodes_)[id].left = left_id;
        (*nodes_)[id].right = right_id;
        return id;
    }

    const Eigen::Ref<const Matrix>& X_;
    const Vector& g_;
    const Vector& h_;
    int max_depth_;
    int min_leaf_;
    std::vector<detail::TreeNode>* nodes_ = nullptr;
};

std::vector<std::vector<int>> presort_features(const Eigen::Ref<const Matrix>& X) {
    const int n = static_cast<int>(X.rows());
    const int p = static_cast<int>(X.cols());
    std::vector<std::vector<int>> sorted(p);
    for (int f = 0; f < p; ++f) {
        auto& ord = sorted[f];
        ord.resize(n);
        for (int i = 0; i < n; ++i) ord[i] = i;
        std::sort(ord.begin(), ord.end(), [&](int a, int b) {
            const double va = X(a, f), vb = X(b, f);
            if (va != vb) return va < vb;
            return a < b;
        });
    }
    return sorted;
}

// Fits a boosted ensemble against an arbitrary twice-differentiable loss,
// with a step-halving safeguard that keeps the recorded training loss
// non-increasing round over round.
template <typename GradFn, typename LossFn>
detail::GbtModel fit_gbt(const Eigen::Ref<const Matrix>& X, double base, int rounds, int depth,
                         double learning_rate, int min_leaf, GradFn&& grad_hess, LossFn&& loss_of) {
    const Eigen::Index n = X.rows();
    detail::GbtModel model;
    model.base = base;

    const auto presorted = presort_features(X);
    Vector scores = Vector::Constant(n, base);
    Vector g(n), h(n), tree_pred(n);

    double prev_loss = loss_of(scores);
    model.round_losses.push_back(prev_loss);

    for (int round = 0; round < rounds; ++round) {
        grad_hess(scores, g, h);
        TreeBuilder builder(X, g, h, depth, min_leaf);
        detail::Tree tree = builder.build(presorted);

        for (Eigen::Index i = 0; i < n; ++i) tree_pred[i] = tree.predict_row(X.row(i));

        double scale = learning_rate;
        bool accepted = false;
        for (int attempt = 0; attempt < 40; ++attempt) {
            const double cand = loss_of(scores + scale * tree_pred);
            if (cand <= prev_loss) {
                prev_loss = cand;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if (accepted) {
            scores += scale * tree_pred;
            for (auto& node : tree.nodes) node.value *= scale;
            model.trees.push_back(std::move(tree));
        }
        model.round_losses.push_back(prev_loss);
    }
    return model;
}

// ---------------------------------------------------------------------------
// Ridge logistic regression: damped Newton with a gradient-descent fallback
// when the Hessian solve is unusable.
// ---------------------------------------------------------------------------

detail::LinearModel fit_logistic(const Eigen::Ref<const Matrix>& X,
                                 const Eigen::Ref<const IntVector>& y, const ClassifierConfig& cfg,
                                 std::vector<double>* losses) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    Vector theta = Vector::Zero(p + 1);
    Vector grad(p + 1);

    double obj = logistic_objective(X, y, theta, cfg.l2, &grad);
    if (losses) losses->push_back(obj);

    detail::LinearModel model;
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        const double gnorm = grad.lpNorm<Eigen::Infinity>();
        if (gnorm <= cfg.tol) {
            model.theta = theta;
            model.final_grad_norm = gnorm;
            model.iters = iter;
            return model;
        }

        // Newton direction from the penalized Hessian.
        Vector s = X * theta.tail(p) + Vector::Constant(n, theta[0]);
        Vector w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double pi = sigmoid(s[i]);
            w[i] = pi * (1.0 - pi);
        }
        Matrix hess(p + 1, p + 1);
        hess(0, 0) = w.sum() / static_cast<double>(n);
        hess.block(0, 1, 1, p) = (w.transpose() * X) / static_cast<double>(n);
        hess.block(1, 0, p, 1) = hess.block(0, 1, 1, p).transpose();
        hess.block(1, 1, p, p) = (X.transpose() * w.asDiagonal() * X) / static_cast<double>(n);
        hess.block(1, 1, p, p).diagonal().array() += cfg.l2;

        Vector dir = hess.ldlt().solve(-grad);
        if (!dir.allFinite() || grad.dot(dir) >= 0.0) dir = -grad;

        // Backtracking line search (Armijo) keeps the objective monotone.
        const double slope = grad.dot(dir);
        double step = 1.0;
        double cand_obj = obj;
        Vector cand = theta;
        for (int bt = 0; bt < 60; ++bt) {
            cand = theta + step * dir;
            cand_obj = logistic_objective(X, y, cand, cfg.l2, nullptr);
            if (cand_obj <= obj + 1e-4 * step * slope) break;
            step *= 0.5;
        }
        theta = cand;
        obj = logistic_objective(X, y, theta, cfg.l2, &grad);
        if (losses) losses->push_back(obj);
    }

    const double gnorm = grad.lpNorm<Eigen::Infinity>();
    if (gnorm > cfg.tol)
        throw NonConvergence("logistic regression did not converge in " +
                                 std::to_string(cfg.max_iters) + " iterations",
                             gnorm);
    model.theta = theta;
    model.final_grad_norm = gnorm;
    model.iters = cfg.max_iters;
    return model;
}

// Ridge least squares via a stacked QR solve; exact in one step.
detail::LinearModel fit_ridge_regression(const Eigen::Ref<const Matrix>& X,
                                         const Eigen::Ref<const Vector>& y, double l2) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    const double rs = std::sqrt(l2);

    Matrix A(n + p, p + 1);
    A.setZero();
    A.block(0, 0, n, 1).setConstant(1.0 / std::sqrt(static_cast<double>(n)));
    A.block(0, 1, n, p) = X / std::sqrt(static_cast<double>(n));
    for (Eigen::Index j = 0; j < p; ++j) A(n + j, 1 + j) = rs;

    Vector b = Vector::Zero(n + p);
    b.head(n) = y / std::sqrt(static_cast<double>(n));

    detail::LinearModel model;
    model.theta = A.colPivHouseholderQr().solve(b);
    model.final_grad_norm = 0.0;
    model.iters = 1;
    return model;
}

// ---------------------------------------------------------------------------
// Shared validation
// ---------------------------------------------------------------------------

void check_features(const Eigen::Ref<const Matrix>& X) {
    if (X.rows() < 1 || X.cols() < 1) throw LengthMismatch("feature matrix must be at least 1x1");
    if (!X.allFinite()) throw NonFiniteValue("feature matrix contains NaN or infinity");
}

void check_binary_labels(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const IntVector>& y) {
    if (y.size() != X.rows())
        throw LengthMismatch("labels length " + std::to_string(y.size()) + " != rows " +
                             std::to_string(X.rows()));
    bool has0 = false, has1 = false;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (y[i] == 0)
            has0 = true;
        else if (y[i] == 1)
            has1 = true;
        else
            throw OutOfRange("labels must be 0 or 1");
    }
    if (!has0 || !has1) throw SingleClass("training labels contain a single class");
}

nlohmann::json tree_to_json(const detail::Tree& tree) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& nd : tree.nodes)
        nodes.push_back({nd.feature, nd.threshold, nd.left, nd.right, nd.value});
    return nodes;
}

detail::Tree tree_from_json(const nlohmann::json& j) {
    detail::Tree tree;
    for (const auto& nd : j) {
        detail::TreeNode node;
        node.feature = nd.at(0).get<int>();
        node.threshold = nd.at(1).get<double>();
        node.left = nd.at(2).get<int>();
        node.right = nd.at(3).get<int>();
        node.value = nd.at(4).get<double>();
        tree.nodes.push_back(node);
    }
    return tree;
}

nlohmann::json model_to_json(ModelFamily family, const detail::LinearModel& lin,
                             const detail::GbtModel& gbt, Eigen::Index dim, const char* task) {
    nlohmann::json j;
    j["format"] = "bope-model";
    j["version"] = 1;
    j["task"] = task;
    j["dim"] = dim;
    if (family == ModelFamily::Linear) {
        j["family"] = "linear";
        j["theta"] = std::vector<double>(lin.theta.data(), lin.theta.data() + lin.theta.size());
    } else {
        j["family"] = "gbt";
        j["base"] = gbt.base;
        nlohmann::json trees = nlohmann::json::array();
        for (const auto& t : gbt.trees) trees.push_back(tree_to_json(t));
        j["trees"] = std::move(trees);
    }
    return j;
}

void model_from_json(const nlohmann::json& j, const char* task, ModelFamily* family,
                     detail::LinearModel* lin, detail::GbtModel* gbt, Eigen::Index* dim) {
    if (j.value("format", "") != "bope-model" || j.value("version", 0) != 1)
        throw ConfigError("unsupported model dump format");
    if (j.value("task", "") != task) throw ConfigError("model dump task mismatch");
    *dim = j.at("dim").get<Eigen::Index>();
    const std::string fam = j.at("family").get<std::string>();
    if (fam == "linear") {
        *family = ModelFamily::Linear;
        const auto v = j.at("theta").get<std::vector<double>>();
        lin->theta = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    } else if (fam == "gbt") {
        *family = ModelFamily::Gbt;
        gbt->base = j.at("base").get<double>();
        for (const auto& t : j.at("trees")) gbt->trees.push_back(tree_from_json(t));
    } else {
        throw ConfigError("unknown model family '" + fam + "'");
    }
}

}  // namespace

// ---------------------------------------------------------------------------

ClassifierConfig ClassifierConfig::linear(double l2, int max_iters, double tol) {
    ClassifierConfig cfg;
    cfg.family = ModelFamily::Linear;
    cfg.l2 = l2;
    cfg.max_iters = max_iters;
    cfg.tol = tol;
    return cfg;
}

ClassifierConfig ClassifierConfig::gbt(int rounds, int depth, double learning_rate, int min_leaf) {
    ClassifierConfig cfg;
    cfg.family = ModelFamily::Gbt;
    cfg.rounds = rounds;
    cfg.depth = depth;
    cfg.learning_rate = learning_rate;
    cfg.min_leaf = min_leaf;
    return cfg;
}

void validate_config(const ClassifierConfig& cfg) {
    if (cfg.family == ModelFamily::Linear) {
        if (cfg.l2 < 0.0) throw OutOfRange("l2 must be nonnegative");
        if (cfg.max_iters < 1) throw OutOfRange("max_iters must be at least 1");
        if (!(cfg.tol > 0.0)) throw OutOfRange("tol must be positive");
    } else {
        if (cfg.rounds < 0) throw OutOfRange("rounds must be at least 1 (or 0 for the size rule)");
        if (cfg.depth < 1) throw OutOfRange("depth must be at least 1");
        if (!(cfg.learning_rate > 0.0) || cfg.learning_rate > 1.0)
            throw OutOfRange("learning_rate must lie in (0, 1]");
        if (cfg.min_leaf < 1) throw OutOfRange("min_leaf must be at least 1");
    }
}

double detail::Tree::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    int id = 0;
    while (nodes[id].feature >= 0)
        id = row[nodes[id].feature] <= nodes[id].threshold ? nodes[id].left : nodes[id].right;
    return nodes[id].value;
}

Vector detail::GbtModel::predict_raw(const Eigen::Ref<const Matrix>& X) const {
    Vector out = Vector::Constant(X.rows(), base);
    for (const auto& tree : trees)
        for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] += tree.predict_row(X.row(i));
    return out;
}

double logistic_objective(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const IntVector>& y,
                          const Eigen::Ref<const Vector>& theta, double l2, Vector* grad) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    if (theta.size() != p + 1) throw DimensionMismatch("theta must have dim p+1");

    const Vector s = X * theta.tail(p) + Vector::Constant(n, theta[0]);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) loss += logloss_from_score(s[i], y[i]);
    loss /= static_cast<double>(n);
    loss += 0.5 * l2 * theta.tail(p).squaredNorm();

    if (grad) {
        Vector resid(n);
        for (Eigen::Index i = 0; i < n; ++i) resid[i] = sigmoid(s[i]) - static_cast<double>(y[i]);
        grad->resize(p + 1);
        (*grad)[0] = resid.mean();
        grad->tail(p) = X.transpose() * resid / static_cast<double>(n) + l2 * theta.tail(p);
    }
    return loss;
}

double mean_log_loss(const Eigen::Ref<const Vector>& p, const Eigen::Ref<const IntVector>& labels) {
    if (p.size() != labels.size()) throw LengthMismatch("probabilities and labels differ in length");
    double loss = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double pi = clamp_prob(p[i]);
        loss += labels[i] == 1 ? -std::log(pi) : -std::log(1.0 - pi);
    }
    return loss / static_cast<double>(p.size());
}

ProbabilisticClassifier train_classifier(const Eigen::Ref<const Matrix>& X,
                                         const Eigen::Ref<const IntVector>& labels,
                                         const ClassifierConfig& cfg, RngSpec rng) {
    (void)rng;  // training is exact-greedy / Newton: no randomness consumed
    validate_config(cfg);
    check_features(X);
    check_binary_labels(X, labels);

    ProbabilisticClassifier clf;
    clf.family_ = cfg.family;
    clf.dim_ = X.cols();

    if (cfg.family == ModelFamily::Linear) {
        clf.linear_ = fit_logistic(X, labels, cfg, &clf.losses_);
        return clf;
    }

    const int rounds = cfg.rounds > 0 ? cfg.rounds : gbt_rounds_rule(static_cast<std::size_t>(X.rows()));
    const Eigen::Index n = X.rows();
    Vector yd(n);
    for (Eigen::Index i = 0; i < n; ++i) yd[i] = static_cast<double>(labels[i]);
    const double mean_y = yd.mean();
    const double base = std::log(mean_y / (1.0 - mean_y));

    clf.gbt_ = fit_gbt(
        X, base, rounds, cfg.depth, cfg.learning_rate, cfg.min_leaf,
        [&](const Vector& scores, Vector& g, Vector& h) {
            for (Eigen::Index i = 0; i < n; ++i) {
                const double pi = sigmoid(scores[i]);
                g[i] = pi - yd[i];
                h[i] = pi * (1.0 - pi);
            }
        },
        [&](const Vector& scores) {
            double loss = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) loss += logloss_from_score(scores[i], labels[i]);
            return loss / static_cast<double>(n);
        });
    clf.losses_ = clf.gbt_.round_losses;
    return clf;
}

Regressor train_regressor(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& targets,
                          const ClassifierConfig& cfg, RngSpec rng) {
    (void)rng;
    validate_config(cfg);
    check_features(X);
    if (targets.size() != X.rows())
        throw LengthMismatch("targets length " + std::to_string(targets.size()) + " != rows " +
                             std::to_string(X.rows()));
    if (!targets.allFinite()) throw NonFiniteValue("targets contain NaN or infinity");

    Regressor reg;
    reg.family_ = cfg.family;
    reg.dim_ = X.cols();

    if (cfg.family == ModelFamily::Linear) {
        reg.linear_ = fit_ridge_regression(X, targets, cfg.l2);
        return reg;
    }

    const int rounds = cfg.rounds > 0 ? cfg.rounds : gbt_rounds_rule(static_cast<std::size_t>(X.rows()));
    const Eigen::Index n = X.rows();
    const double base = targets.mean();

    reg.gbt_ = fit_gbt(
        X, base, rounds, cfg.depth, cfg.learning_rate, cfg.min_leaf,
        [&](const Vector& scores, Vector& g, Vector& h) {
            g = scores - targets;
            h.setOnes();
        },
        [&](const Vector& scores) { return 0.5 * (scores - targets).squaredNorm() / static_cast<double>(n); });
    reg.losses_ = reg.gbt_.round_losses;
    return reg;
}

Vector ProbabilisticClassifier::predict_proba(const Eigen::Ref<const Matrix>& X) const {
    if (X.cols() != dim_)
        throw DimensionMismatch("expected " + std::to_string(dim_) + " features, got " +
                                std::to_string(X.cols()));
    Vector raw;
    if (family_ == ModelFamily::Linear) {
        const Eigen::Index p = dim_;
        raw = X * linear_.theta.tail(p) + Vector::Constant(X.rows(), linear_.theta[0]);
    } else {
        raw = gbt_.predict_raw(X);
    }
    Vector out(raw.size());
    for (Eigen::Index i = 0; i < raw.size(); ++i) out[i] = clamp_prob(sigmoid(raw[i]));
    return out;
}

double ProbabilisticClassifier::predict_proba_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    if (row.size() != dim_) throw DimensionMismatch("feature row has wrong length");
    double raw;
    if (family_ == ModelFamily::Linear) {
        raw = linear_.theta[0] + row.dot(linear_.theta.tail(dim_).transpose());
    } else {
        raw = gbt_.base;
        for (const auto& tree : gbt_.trees) raw += tree.predict_row(row);
    }
    return clamp_prob(sigmoid(raw));
}

Vector Regressor::predict(const Eigen::Ref<const Matrix>& X) const {
    if (X.cols() != dim_)
        throw DimensionMismatch("expected " + std::to_string(dim_) + " features, got " +
                                std::to_string(X.cols()));
    if (family_ == ModelFamily::Linear)
        return X * linear_.theta.tail(dim_) + Vector::Constant(X.rows(), linear_.theta[0]);
    return gbt_.predict_raw(X);
}

double Regressor::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    if (row.size() != dim_) throw DimensionMismatch("feature row has wrong length");
    if (family_ == ModelFamily::Linear) return linear_.theta[0] + row.dot(linear_.theta.tail(dim_).transpose());
    double raw = gbt_.base;
    for (const auto& tree : gbt_.trees) raw += tree.predict_row(row);
    return raw;
}

double cross_validated_loss(const ClassifierConfig& cfg, const Eigen::Ref<const Matrix>& X,
                            const Eigen::Ref<const IntVector>& labels, int folds, RngSpec rng) {
    const Eigen::Index n = X.rows();
    if (folds < 2) throw FoldTooSmall("cross-validation needs at least 2 folds");
    if (folds > n) throw FoldTooSmall("more folds than samples");
    check_binary_labels(X, labels);

    Rng gen(substream(rng, 0));
    const auto perm = gen.permutation(static_cast<std::size_t>(n));
    std::vector<int> fold_of(n);
    for (Eigen::Index i = 0; i < n; ++i) fold_of[perm[i]] = static_cast<int>(i % folds);

    // Every fold must contain both classes.
    for (int t = 0; t < folds; ++t) {
        bool has0 = false, has1 = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (fold_of[i] != t) continue;
            (labels[i] == 1 ? has1 : has0) = true;
        }
        if (!has0 || !has1) throw SingleClass("fold " + std::to_string(t) + " lacks a class");
    }

    double total = 0.0;
    for (int t = 0; t < folds; ++t) {
        std::vector<Eigen::Index> tr, te;
        for (Eigen::Index i = 0; i < n; ++i) (fold_of[i] == t ? te : tr).push_back(i);

        Matrix Xtr(tr.size(), X.cols());
        IntVector ytr(tr.size());
        for (std::size_t i = 0; i < tr.size(); ++i) {
            Xtr.row(static_cast<Eigen::Index>(i)) = X.row(tr[i]);
            ytr[static_cast<Eigen::Index>(i)] = labels[tr[i]];
        }
        Matrix Xte(te.size(), X.cols());
        IntVector yte(te.size());
        for (std::size_t i = 0; i < te.size(); ++i) {
            Xte.row(static_cast<Eigen::Index>(i)) = X.row(te[i]);
            yte[static_cast<Eigen::Index>(i)] = labels[te[i]];
        }

        const auto model = train_classifier(Xtr, ytr, cfg, substream(rng, 1 + static_cast<std::uint64_t>(t)));
        total += mean_log_loss(model.predict_proba(Xte), yte);
    }
    return total / static_cast<double>(folds);
}

Matrix MulticlassClassifier::predict_proba(const Eigen::Ref<const Matrix>& X) const {
    Matrix probs(X.rows(), k_);
    for (int c = 0; c < k_; ++c) probs.col(c) = models_[static_cast<std::size_t>(c)].predict_proba(X);
    for (Eigen::Index i = 0; i < probs.rows(); ++i) probs.row(i) /= probs.row(i).sum();
    return probs;
}

IntVector MulticlassClassifier::predict(const Eigen::Ref<const Matrix>& X) const {
    const Matrix probs = predict_proba(X);
    IntVector out(probs.rows());
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        int best = 0;
        for (int c = 1; c < k_; ++c)
            if (probs(i, c) > probs(i, best)) best = c;
        out[i] = best;
    }
    return out;
}

MulticlassClassifier train_multiclass(const Eigen::Ref<const Matrix>& X,
                                      const Eigen::Ref<const IntVector>& labels, int k,
                                      const ClassifierConfig& cfg, RngSpec rng) {
    if (k < 2) throw SingleClass("multiclass training needs k >= 2");
    if (labels.size() != X.rows()) throw LengthMismatch("labels length != rows");
    for (Eigen::Index i = 0; i < labels.size(); ++i)
        if (labels[i] < 0 || labels[i] >= k) throw OutOfRange("label outside 0..k-1");

    MulticlassClassifier mc;
    mc.k_ = k;
    for (int c = 0; c < k; ++c) {
        IntVector binary(labels.size());
        for (Eigen::Index i = 0; i < labels.size(); ++i) binary[i] = labels[i] == c ? 1 : 0;
        mc.models_.push_back(
            train_classifier(X, binary, cfg, substream(rng, static_cast<std::uint64_t>(c))));
    }
    return mc;
}

std::string ProbabilisticClassifier::dump() const {
    return model_to_json(family_, linear_, gbt_, dim_, "classifier").dump();
}

ProbabilisticClassifier ProbabilisticClassifier::load(const std::string& text) {
    ProbabilisticClassifier clf;
    model_from_json(nlohmann::json::parse(text), "classifier", &clf.family_, &clf.linear_, &clf.gbt_,
                    &clf.dim_);
    return clf;
}

std::string Regressor::dump() const { return model_to_json(family_, linear_, gbt_, dim_, "regressor").dump(); }

Regressor Regressor::load(const std::string& text) {
    Regressor reg;
    model_from_json(nlohmann::json::parse(text), "regressor", &reg.family_, &reg.linear_, &reg.gbt_,
                    &reg.dim_);
    return reg;
}

int gbt_rounds_rule(std::size_t n) {
    return static_cast<int>(std::ceil(20.0 * std::sqrt(static_cast<double>(n))));
}

int ensemble_size_rule(std::size_t n) {
    return std::max(1, static_cast<int>(std::floor(10.0 * std::pow(static_cast<double>(n), 0.25))));
}

}  // namespace bope
