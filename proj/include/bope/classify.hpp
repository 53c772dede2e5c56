#pragma once

#include <string>
#include <vector>

#include "bope/core.hpp"

namespace bope {

enum class ModelFamily { Linear, Gbt };

// Hyperparameters for both model families. The Linear branch is ridge
// logistic regression for classification and ridge least squares for
// regression; the Gbt branch is exact-greedy gradient boosted trees with
// second-order (Newton) leaf weights. Both are trained on log-loss
// (classification) or squared error (regression); log-loss is the strictly
// proper loss this library commits to.
struct ClassifierConfig {
    ModelFamily family = ModelFamily::Gbt;

    // Linear: ridge strength (intercept unpenalized), Newton iteration cap,
    // tolerance on the gradient inf-norm.
    double l2 = 1e-3;
    int max_iters = 200;
    double tol = 1e-8;

    // Gbt: boosting rounds, split depth per tree, shrinkage, minimum rows per
    // leaf. rounds == 0 means "resolve by the sample-size rule at fit time"
    // (gbt_rounds_rule), which harness defaults rely on.
    int rounds = 100;
    int depth = 3;
    double learning_rate = 0.1;
    int min_leaf = 5;

    static ClassifierConfig linear(double l2 = 1e-3, int max_iters = 200, double tol = 1e-8);
    static ClassifierConfig gbt(int rounds = 100, int depth = 3, double learning_rate = 0.1,
                                int min_leaf = 5);
};

void validate_config(const ClassifierConfig& cfg);

// Probabilities from classifiers are clamped into
// [kProbClamp, 1 - kProbClamp]; chosen well below the ratio clip used by the
// weights module so that clipping behaviour is governed there.
inline constexpr double kProbClamp = 1e-12;

namespace detail {

struct TreeNode {
    int feature = -1;  // < 0 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

struct Tree {
    std::vector<TreeNode> nodes;
    double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
};

struct GbtModel {
    double base = 0.0;
    std::vector<Tree> trees;
    std::vector<double> round_losses;  // training loss before round 1, then after each round
    Vector predict_raw(const Eigen::Ref<const Matrix>& X) const;
};

struct LinearModel {
    Vector theta;  // [bias, w...]
    double final_grad_norm = 0.0;
    int iters = 0;
};

}  // namespace detail

// A fitted binary probability model. predict_proba outputs lie strictly
// inside (0, 1) after clamping.
class ProbabilisticClassifier {
  public:
    Vector predict_proba(const Eigen::Ref<const Matrix>& X) const;
    double predict_proba_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
    Eigen::Index dim() const { return dim_; }
    ModelFamily family() const { return family_; }

    // Training loss trace: GBT per boosting round, linear per Newton step.
    const std::vector<double>& training_losses() const { return losses_; }

    // Versioned JSON text dump for debugging; load() round-trips it.
    std::string dump() const;
    static ProbabilisticClassifier load(const std::string& text);

  private:
    friend ProbabilisticClassifier train_classifier(const Eigen::Ref<const Matrix>&,
                                                    const Eigen::Ref<const IntVector>&,
                                                    const ClassifierConfig&, RngSpec);
    ModelFamily family_ = ModelFamily::Gbt;
    detail::LinearModel linear_;
    detail::GbtModel gbt_;
    Eigen::Index dim_ = 0;
    std::vector<double> losses_;
};

// A fitted squared-error regression model of the same families.
class Regressor {
  public:
    Vector predict(const Eigen::Ref<const Matrix>& X) const;
    double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
    Eigen::Index dim() const { return dim_; }
    const std::vector<double>& training_losses() const { return losses_; }

    std::string dump() const;
    static Regressor load(const std::string& text);

  private:
    friend Regressor train_regressor(const Eigen::Ref<const Matrix>&, const Eigen::Ref<const Vector>&,
                                     const ClassifierConfig&, RngSpec);
    ModelFamily family_ = ModelFamily::Gbt;
    detail::LinearModel linear_;
    detail::GbtModel gbt_;
    Eigen::Index dim_ = 0;
    std::vector<double> losses_;
};

// Fits a binary classifier minimizing log-loss. Labels must be 0/1 with both
// classes present. Deterministic given (inputs, rng).
ProbabilisticClassifier train_classifier(const Eigen::Ref<const Matrix>& X,
                                         const Eigen::Ref<const IntVector>& labels,
                                         const ClassifierConfig& cfg, RngSpec rng);

// Fits a squared-error regressor.
Regressor train_regressor(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& targets,
                          const ClassifierConfig& cfg, RngSpec rng);

// Mean held-out log-loss over a deterministic K-fold split; the model
// selection criterion for everything classifier-based in this library.
double cross_validated_loss(const ClassifierConfig& cfg, const Eigen::Ref<const Matrix>& X,
                            const Eigen::Ref<const IntVector>& labels, int folds, RngSpec rng);

// One-vs-rest multiclass wrapper; per-row probabilities normalized to sum 1.
class MulticlassClassifier {
  public:
    Matrix predict_proba(const Eigen::Ref<const Matrix>& X) const;
    IntVector predict(const Eigen::Ref<const Matrix>& X) const;  // argmax, lowest index on ties
    int num_classes() const { return k_; }

  private:
    friend MulticlassClassifier train_multiclass(const Eigen::Ref<const Matrix>&,
                                                 const Eigen::Ref<const IntVector>&, int,
                                                 const ClassifierConfig&, RngSpec);
    std::vector<ProbabilisticClassifier> models_;
    int k_ = 0;
};

MulticlassClassifier train_multiclass(const Eigen::Ref<const Matrix>& X,
                                      const Eigen::Ref<const IntVector>& labels, int k,
                                      const ClassifierConfig& cfg, RngSpec rng);

// Penalized log-loss objective for parameter vector theta = [bias, w...];
// ridge applies to w only. Gradient is written to *grad when non-null.
// Exposed so the gradient can be verified against finite differences.
double logistic_objective(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const IntVector>& labels,
                          const Eigen::Ref<const Vector>& theta, double l2, Vector* grad = nullptr);

// Mean log-loss of probabilities p against 0/1 labels.
double mean_log_loss(const Eigen::Ref<const Vector>& p, const Eigen::Ref<const IntVector>& labels);

// Sample-size rules used by harness defaults: boosting rounds ceil(20 sqrt n)
// and policy-model ensemble size floor(10 n^(1/4)).
int gbt_rounds_rule(std::size_t n);
int ensemble_size_rule(std::size_t n);

}  // namespace bope
