#pragma once

/**
 * @file learn.hpp
 * @brief Causal models over control-point features: M5 model trees and random forests.
 */

#include "decaf/stl.hpp"
#include "decaf/testgen.hpp"
#include "decaf/util.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace decaf {

/// Row-major feature matrix with robustness and label targets.
struct Dataset {
    std::vector<std::string> feature_names;
    std::vector<std::vector<double>> X;
    std::vector<double> y_rb;
    std::vector<Verdict> y_label;

    [[nodiscard]] std::size_t size() const { return X.size(); }
    [[nodiscard]] std::size_t dimension() const { return feature_names.size(); }
    /// Rows restricted to `indices`, in that order.
    [[nodiscard]] Dataset subset(std::span<const std::size_t> indices) const;
    /// Throws DomainError when row counts or widths disagree.
    void validate() const;
};

[[nodiscard]] Dataset transform(const TrainingSet &ts);

/// Rebuilds row i as a TestInput of `spec`.
[[nodiscard]] TestInput row_input(const Dataset &d, const InputSpec &spec, std::size_t i);

/// Affine function over a subset of features.
struct LinearModel {
    double intercept = 0.0;
    std::vector<std::size_t> features;
    std::vector<double> coefficients;

    [[nodiscard]] double predict(std::span<const double> x) const;
};

enum class LeafModel { Linear, Constant };

struct M5Params {
    std::size_t min_leaf = 2;
    /// Nodes with fewer rows are not split.
    std::size_t min_split = 4;
    /// Nodes whose target deviation is below this fraction of the root's are not split.
    double min_sd_fraction = 0.05;
    std::size_t max_depth = 32;
    bool prune = true;
    LeafModel leaf_model = LeafModel::Linear;
};

/// One edge condition on a root-to-leaf path: x[feature] <= threshold (left)
/// or x[feature] > threshold (right).
struct PathCondition {
    std::size_t feature = 0;
    bool le = true;
    double threshold = 0.0;
};

class ModelTree {
  public:
    struct Node {
        /// -1 for leaves.
        int left = -1;
        int right = -1;
        std::size_t feature = 0;
        double threshold = 0.0;
        LinearModel model;
        std::size_t n_samples = 0;
        /// Penalized training error of this node's subtree (or model, at leaves).
        double estimated_error = 0.0;

        [[nodiscard]] bool is_leaf() const { return left < 0; }
    };

    ModelTree() = default;
    ModelTree(std::size_t dimension, std::vector<Node> nodes);

    [[nodiscard]] double predict(std::span<const double> x) const;
    /// Node index of the leaf that x reaches.
    [[nodiscard]] std::size_t leaf_of(std::span<const double> x) const;
    [[nodiscard]] const std::vector<Node> &nodes() const { return nodes_; }
    [[nodiscard]] std::size_t dimension() const { return dimension_; }
    [[nodiscard]] std::size_t leaf_count() const;
    [[nodiscard]] std::size_t depth() const;
    /// Conditions from the root to `leaf`.
    [[nodiscard]] std::vector<PathCondition> path_to(std::size_t leaf) const;
    /// Root estimated error (training error with the model-size penalty).
    [[nodiscard]] double estimated_error() const { return nodes_.empty() ? 0.0 : nodes_[0].estimated_error; }

    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] static ModelTree from_json(const nlohmann::json &j);

  private:
    std::size_t dimension_ = 0;
    std::vector<Node> nodes_;
};

[[nodiscard]] ModelTree train_m5(const std::vector<std::vector<double>> &X,
                                 const std::vector<double> &y, const M5Params &params);
[[nodiscard]] ModelTree train_m5(const Dataset &d, const M5Params &params);

/// Least-squares fit of y on the chosen feature columns (intercept included).
[[nodiscard]] LinearModel fit_linear(const std::vector<std::vector<double>> &X,
                                     const std::vector<double> &y,
                                     std::span<const std::size_t> rows,
                                     std::span<const std::size_t> features);

struct ForestParams {
    std::size_t n_trees = 100;
    /// 0 selects max(1, floor(sqrt(d))).
    std::size_t max_features = 0;
    /// Nodes with fewer rows become leaves; 2 grows fully.
    std::size_t min_split = 2;
    bool bootstrap = true;
    std::uint64_t seed = 17;
};

/// Unpruned CART regression tree with mean leaves.
class RegressionTree {
  public:
    struct Node {
        int left = -1;
        int right = -1;
        std::size_t feature = 0;
        double threshold = 0.0;
        double value = 0.0;

        [[nodiscard]] bool is_leaf() const { return left < 0; }
    };

    RegressionTree() = default;
    explicit RegressionTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}

    [[nodiscard]] double predict(std::span<const double> x) const;
    [[nodiscard]] const std::vector<Node> &nodes() const { return nodes_; }

  private:
    std::vector<Node> nodes_;
};

class Forest {
  public:
    Forest() = default;
    Forest(std::size_t dimension, std::size_t max_features, std::vector<RegressionTree> trees,
           std::vector<std::vector<std::size_t>> samples);

    [[nodiscard]] double predict(std::span<const double> x) const;
    [[nodiscard]] std::size_t size() const { return trees_.size(); }
    [[nodiscard]] std::size_t dimension() const { return dimension_; }
    [[nodiscard]] std::size_t max_features() const { return max_features_; }
    [[nodiscard]] const std::vector<RegressionTree> &trees() const { return trees_; }
    /// Bootstrap row indices of each tree (kept only for trained forests).
    [[nodiscard]] const std::vector<std::vector<std::size_t>> &samples() const { return samples_; }

    /// Out-of-bag mean squared error over rows left out by at least one tree;
    /// nullopt when every row is in every bag.
    [[nodiscard]] std::optional<double> oob_mse(const std::vector<std::vector<double>> &X,
                                                const std::vector<double> &y) const;

    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] static Forest from_json(const nlohmann::json &j);

  private:
    std::size_t dimension_ = 0;
    std::size_t max_features_ = 0;
    std::vector<RegressionTree> trees_;
    std::vector<std::vector<std::size_t>> samples_;
};

[[nodiscard]] Forest train_forest(const std::vector<std::vector<double>> &X,
                                  const std::vector<double> &y, const ForestParams &params);
[[nodiscard]] Forest train_forest(const Dataset &d, const ForestParams &params);

enum class ModelKind { M5, RandomForest };
[[nodiscard]] std::string_view to_string(ModelKind k);
/// Accepts "m5" and "rf".
[[nodiscard]] ModelKind parse_model_kind(std::string_view text);

/// Regression target: robustness, or labels encoded fail = -1, pass = +1.
enum class TargetMode { Robustness, Label };
[[nodiscard]] std::string_view to_string(TargetMode m);
[[nodiscard]] TargetMode parse_target_mode(std::string_view text);

struct Prediction {
    double estimate = 0.0;
    Verdict verdict = Verdict::Pass;
};

struct CausalModelParams {
    ModelKind kind = ModelKind::M5;
    TargetMode target = TargetMode::Robustness;
    M5Params m5;
    ForestParams forest;
};

class CausalModel {
  public:
    CausalModel() = default;
    CausalModel(std::vector<std::string> feature_names, TargetMode target, ModelTree tree);
    CausalModel(std::vector<std::string> feature_names, TargetMode target, Forest forest);

    [[nodiscard]] ModelKind kind() const { return kind_; }
    [[nodiscard]] TargetMode target() const { return target_; }
    [[nodiscard]] const std::vector<std::string> &feature_names() const { return feature_names_; }
    [[nodiscard]] std::size_t dimension() const { return feature_names_.size(); }
    [[nodiscard]] const ModelTree &tree() const { return tree_; }
    [[nodiscard]] const Forest &forest() const { return forest_; }

    /// Verdict is pass iff the estimate is >= 0. Throws DomainError on a dimension mismatch.
    [[nodiscard]] Prediction predict(std::span<const double> x) const;
    [[nodiscard]] std::vector<Prediction>
    predict_batch(const std::vector<std::vector<double>> &X) const;

    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] static CausalModel from_json(const nlohmann::json &j);

  private:
    ModelKind kind_ = ModelKind::M5;
    TargetMode target_ = TargetMode::Robustness;
    std::vector<std::string> feature_names_;
    ModelTree tree_;
    Forest forest_;
};

[[nodiscard]] std::vector<double> regression_target(const Dataset &d, TargetMode mode);
[[nodiscard]] CausalModel train_causal_model(const Dataset &d, const CausalModelParams &params);

/// Failure is the positive class. Recall and F1 are nullopt when the set has no failures.
struct ClassifierMetrics {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;
    double accuracy = 0.0;
    std::optional<double> recall;
    std::optional<double> f1;
};

[[nodiscard]] ClassifierMetrics confusion_metrics(std::span<const Verdict> truth,
                                                  std::span<const Verdict> predicted);
[[nodiscard]] ClassifierMetrics classifier_metrics(const CausalModel &cm, const Dataset &holdout);

/// Row indices whose label is fail, ascending.
[[nodiscard]] std::vector<std::size_t> identify_failures(const Dataset &d);

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> holdout;
};

/// Per-label shuffled split; each label contributes round(fraction * count) rows
/// to the holdout, at least one when it has two or more rows.
[[nodiscard]] Split stratified_split(const Dataset &d, double holdout_fraction, std::uint64_t seed);

} // namespace decaf
