#include "decaf/learn.hpp"

#include "decaf/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace decaf {

using json = nlohmann::json;

void Dataset::validate() const {
    if (X.size() != y_rb.size() || X.size() != y_label.size()) {
        throw DomainError("dataset columns have different row counts");
    }
    for (const auto &row : X) {
        if (row.size() != feature_names.size()) {
            throw DomainError("dataset row width " + std::to_string(row.size()) +
                              " does not match " + std::to_string(feature_names.size()) +
                              " features");
        }
    }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.feature_names = feature_names;
    out.X.reserve(indices.size());
    for (std::size_t i : indices) {
        if (i >= size()) {
            throw DomainError("dataset row index out of range");
        }
        out.X.push_back(X[i]);
        out.y_rb.push_back(y_rb[i]);
        out.y_label.push_back(y_label[i]);
    }
    return out;
}

Dataset transform(const TrainingSet &ts) {
    if (ts.size() == 0) {
        throw DomainError("cannot transform an empty training set");
    }
    Dataset d;
    d.feature_names = ts.spec().feature_names();
    for (const auto &row : ts.rows()) {
        if (row.input.size() != d.feature_names.size()) {
            throw DomainError("training row dimension does not match the input spec");
        }
        d.X.push_back(row.input.features());
        d.y_rb.push_back(row.robustness);
        d.y_label.push_back(row.verdict);
    }
    return d;
}

TestInput row_input(const Dataset &d, const InputSpec &spec, std::size_t i) {
    if (i >= d.size()) {
        throw DomainError("dataset row index out of range");
    }
    return TestInput(spec, d.X[i]);
}

double LinearModel::predict(std::span<const double> x) const {
    double v = intercept;
    for (std::size_t k = 0; k < features.size(); ++k) {
        v += coefficients[k] * x[features[k]];
    }
    return v;
}

LinearModel fit_linear(const std::vector<std::vector<double>> &X, const std::vector<double> &y,
                       std::span<const std::size_t> rows, std::span<const std::size_t> features) {
    LinearModel m;
    if (rows.empty()) {
        return m;
    }
    const auto n = static_cast<Eigen::Index>(rows.size());
    double y_mean = 0.0;
    for (std::size_t r : rows) {
        y_mean += y[r];
    }
    y_mean /= static_cast<double>(rows.size());
    m.intercept = y_mean;

    std::vector<std::size_t> used;
    std::vector<double> means;
    for (std::size_t f : features) {
        double mean = 0.0;
        for (std::size_t r : rows) {
            mean += X[r][f];
        }
        mean /= static_cast<double>(rows.size());
        bool varies = false;
        for (std::size_t r : rows) {
            if (X[r][f] != X[rows[0]][f]) {
                varies = true;
                break;
            }
        }
        if (varies) {
            used.push_back(f);
            means.push_back(mean);
        }
    }
    if (used.empty()) {
        return m;
    }
    Eigen::MatrixXd A(n, static_cast<Eigen::Index>(used.size()));
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::size_t r = rows[static_cast<std::size_t>(i)];
        for (std::size_t k = 0; k < used.size(); ++k) {
            A(i, static_cast<Eigen::Index>(k)) = X[r][used[k]] - means[k];
        }
        b(i) = y[r] - y_mean;
    }
    const Eigen::VectorXd beta = A.colPivHouseholderQr().solve(b);
    for (std::size_t k = 0; k < used.size(); ++k) {
        const double c = beta(static_cast<Eigen::Index>(k));
        if (!std::isfinite(c) || c == 0.0) {
            continue;
        }
        m.features.push_back(used[k]);
        m.coefficients.push_back(c);
        m.intercept -= c * means[k];
    }
    return m;
}

// ---------------------------------------------------------------- M5

ModelTree::ModelTree(std::size_t dimension, std::vector<Node> nodes)
    : dimension_(dimension), nodes_(std::move(nodes)) {
    if (nodes_.empty()) {
        throw DomainError("a model tree needs at least one node");
    }
    for (const auto &node : nodes_) {
        if (node.is_leaf() != (node.right < 0)) {
            throw DomainError("model tree node has exactly one child");
        }
        if (!node.is_leaf() &&
            (node.left >= static_cast<int>(nodes_.size()) ||
             node.right >= static_cast<int>(nodes_.size()) || node.feature >= dimension_)) {
            throw DomainError("model tree node references out of range");
        }
        for (std::size_t f : node.model.features) {
            if (f >= dimension_) {
                throw DomainError("model tree leaf references feature out of range");
            }
        }
    }
}

std::size_t ModelTree::leaf_of(std::span<const double> x) const {
    if (x.size() != dimension_) {
        throw DomainError("model tree input has dimension " + std::to_string(x.size()) +
                          ", expected " + std::to_string(dimension_));
    }
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
        const Node &n = nodes_[i];
        i = static_cast<std::size_t>(x[n.feature] <= n.threshold ? n.left : n.right);
    }
    return i;
}

double ModelTree::predict(std::span<const double> x) const { return nodes_[leaf_of(x)].model.predict(x); }

std::size_t ModelTree::leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const Node &n) { return n.is_leaf(); }));
}

std::size_t ModelTree::depth() const {
    std::size_t best = 0;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
        auto [i, dep] = stack.back();
        stack.pop_back();
        best = std::max(best, dep);
        if (!nodes_[i].is_leaf()) {
            stack.emplace_back(static_cast<std::size_t>(nodes_[i].left), dep + 1);
            stack.emplace_back(static_cast<std::size_t>(nodes_[i].right), dep + 1);
        }
    }
    return best;
}

std::vector<PathCondition> ModelTree::path_to(std::size_t leaf) const {
    if (leaf >= nodes_.size()) {
        throw DomainError("leaf index out of range");
    }
    std::vector<int> parent(nodes_.size(), -1);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (!nodes_[i].is_leaf()) {
            parent[static_cast<std::size_t>(nodes_[i].left)] = static_cast<int>(i);
            parent[static_cast<std::size_t>(nodes_[i].right)] = static_cast<int>(i);
        }
    }
    std::vector<PathCondition> path;
    std::size_t cur = leaf;
    while (parent[cur] >= 0) {
        const Node &p = nodes_[static_cast<std::size_t>(parent[cur])];
        path.push_back({p.feature, static_cast<std::size_t>(p.left) == cur, p.threshold});
        cur = static_cast<std::size_t>(parent[cur]);
    }
    std::reverse(path.begin(), path.end());
    return path;
}

json ModelTree::to_json() const {
    json nodes = json::array();
    for (const auto &n : nodes_) {
        json jn;
        jn["left"] = n.left;
        jn["right"] = n.right;
        jn["feature"] = n.feature;
        jn["threshold"] = n.threshold;
        jn["intercept"] = n.model.intercept;
        jn["features"] = n.model.features;
        jn["coefficients"] = n.model.coefficients;
        jn["n_samples"] = n.n_samples;
        jn["estimated_error"] = n.estimated_error;
        nodes.push_back(std::move(jn));
    }
    return json{{"dimension", dimension_}, {"nodes", std::move(nodes)}};
}

ModelTree ModelTree::from_json(const json &j) {
    try {
        std::vector<Node> nodes;
        for (const auto &jn : j.at("nodes")) {
            Node n;
            n.left = jn.at("left").get<int>();
            n.right = jn.at("right").get<int>();
            n.feature = jn.at("feature").get<std::size_t>();
            n.threshold = jn.at("threshold").get<double>();
            n.model.intercept = jn.at("intercept").get<double>();
            n.model.features = jn.at("features").get<std::vector<std::size_t>>();
            n.model.coefficients = jn.at("coefficients").get<std::vector<double>>();
            if (n.model.features.size() != n.model.coefficients.size()) {
                throw ConfigError("leaf model feature and coefficient counts differ");
            }
            n.n_samples = jn.at("n_samples").get<std::size_t>();
            n.estimated_error = jn.at("estimated_error").get<double>();
            nodes.push_back(std::move(n));
        }
        return ModelTree(j.at("dimension").get<std::size_t>(), std::move(nodes));
    } catch (const json::exception &e) {
        throw ConfigError(std::string("malformed model tree: ") + e.what());
    } catch (const DomainError &e) {
        throw ConfigError(std::string("malformed model tree: ") + e.what());
    }
}

namespace {

struct SplitChoice {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double sse = 0.0;
};

double midpoint(double a, double b) {
    const double m = a + (b - a) / 2.0;
    return m < b ? m : a;
}

/// Best SSE split over `features` of rows `idx`, each side at least min_leaf rows.
SplitChoice best_split(const std::vector<std::vector<double>> &X, const std::vector<double> &y,
                       const std::vector<std::size_t> &idx, std::span<const std::size_t> features,
                       std::size_t min_leaf) {
    SplitChoice best;
    const std::size_t n = idx.size();
    if (n < 2 * min_leaf) {
        return best;
    }
    double total = 0.0;
    double total_sq = 0.0;
    for (std::size_t r : idx) {
        total += y[r];
        total_sq += y[r] * y[r];
    }
    std::vector<std::pair<double, double>> col(n);
    for (std::size_t f : features) {
        for (std::size_t i = 0; i < n; ++i) {
            col[i] = {X[idx[i]][f], y[idx[i]]};
        }
        std::sort(col.begin(), col.end());
        double left = 0.0;
        double left_sq = 0.0;
        for (std::size_t i = 1; i < n; ++i) {
            left += col[i - 1].second;
            left_sq += col[i - 1].second * col[i - 1].second;
            if (i < min_leaf || n - i < min_leaf || !(col[i - 1].first < col[i].first)) {
                continue;
            }
            const double nl = static_cast<double>(i);
            const double nr = static_cast<double>(n - i);
            const double right = total - left;
            const double right_sq = total_sq - left_sq;
            const double sse = std::max(0.0, left_sq - left * left / nl) +
                               std::max(0.0, right_sq - right * right / nr);
            if (!best.found || sse < best.sse) {
                best = {true, f, midpoint(col[i - 1].first, col[i].first), sse};
            }
        }
    }
    return best;
}

double node_sse(const std::vector<double> &y, const std::vector<std::size_t> &idx) {
    double s = 0.0;
    double sq = 0.0;
    for (std::size_t r : idx) {
        s += y[r];
        sq += y[r] * y[r];
    }
    return std::max(0.0, sq - s * s / static_cast<double>(idx.size()));
}

class M5Builder {
  public:
    M5Builder(const std::vector<std::vector<double>> &X, const std::vector<double> &y,
              const M5Params &p)
        : X_(X), y_(y), p_(p), dim_(X.front().size()) {
        all_features_.resize(dim_);
        std::iota(all_features_.begin(), all_features_.end(), std::size_t{0});
    }

    ModelTree build() {
        std::vector<std::size_t> idx(X_.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        root_sd_ = std::sqrt(node_sse(y_, idx) / static_cast<double>(idx.size()));
        grow(idx, 0);
        finish(0, idx);
        return compact();
    }

  private:
    struct Work {
        ModelTree::Node node;
        std::vector<std::size_t> rows;
        std::vector<bool> used;
    };

    int grow(const std::vector<std::size_t> &idx, std::size_t depth) {
        const int id = static_cast<int>(work_.size());
        work_.push_back({});
        work_[static_cast<std::size_t>(id)].rows = idx;
        work_[static_cast<std::size_t>(id)].node.n_samples = idx.size();
        const double sd = std::sqrt(node_sse(y_, idx) / static_cast<double>(idx.size()));
        if (idx.size() < std::max<std::size_t>(p_.min_split, 2) ||
            sd <= p_.min_sd_fraction * root_sd_ || depth >= p_.max_depth) {
            return id;
        }
        const SplitChoice s = best_split(X_, y_, idx, all_features_, std::max<std::size_t>(p_.min_leaf, 1));
        if (!s.found) {
            return id;
        }
        std::vector<std::size_t> l;
        std::vector<std::size_t> r;
        for (std::size_t i : idx) {
            (X_[i][s.feature] <= s.threshold ? l : r).push_back(i);
        }
        const int left = grow(l, depth + 1);
        const int right = grow(r, depth + 1);
        auto &node = work_[static_cast<std::size_t>(id)].node;
        node.feature = s.feature;
        node.threshold = s.threshold;
        node.left = left;
        node.right = right;
        return id;
    }

    /// Mean absolute residual inflated by (n + v) / (n - v), v = parameter count.
    double adjusted_error(const LinearModel &m, const std::vector<std::size_t> &rows) const {
        double abs_sum = 0.0;
        for (std::size_t r : rows) {
            abs_sum += std::abs(y_[r] - m.predict(X_[r]));
        }
        const double n = static_cast<double>(rows.size());
        const double v = static_cast<double>(m.features.size() + 1);
        const double factor = n > v ? (n + v) / (n - v) : 10.0;
        return abs_sum / n * factor;
    }

    /// Least squares over `features`, then greedy removal while the adjusted error does not grow.
    std::pair<LinearModel, double> node_model(const std::vector<std::size_t> &rows,
                                              std::vector<std::size_t> features) const {
        LinearModel m = fit_linear(X_, y_, rows, features);
        double err = adjusted_error(m, rows);
        features = m.features;
        while (!features.empty()) {
            LinearModel best_m;
            double best_err = 0.0;
            std::size_t best_k = features.size();
            for (std::size_t k = 0; k < features.size(); ++k) {
                std::vector<std::size_t> trial = features;
                trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(k));
                LinearModel tm = fit_linear(X_, y_, rows, trial);
                const double te = adjusted_error(tm, rows);
                if (best_k == features.size() || te < best_err) {
                    best_m = std::move(tm);
                    best_err = te;
                    best_k = k;
                }
            }
            if (best_err > err) {
                break;
            }
            m = std::move(best_m);
            err = best_err;
            features = m.features;
        }
        return {std::move(m), err};
    }

    /// Fits node models bottom-up, records the features tested in each subtree, and prunes.
    void finish(std::size_t id, const std::vector<std::size_t> &rows) {
        Work &w = work_[id];
        w.used.assign(dim_, false);
        if (!w.node.is_leaf()) {
            const auto l = static_cast<std::size_t>(w.node.left);
            const auto r = static_cast<std::size_t>(w.node.right);
            finish(l, work_[l].rows);
            finish(r, work_[r].rows);
            Work &self = work_[id];
            for (std::size_t f = 0; f < dim_; ++f) {
                self.used[f] = work_[l].used[f] || work_[r].used[f];
            }
            self.used[self.node.feature] = true;
        }
        Work &self = work_[id];
        std::vector<std::size_t> candidates;
        if (p_.leaf_model == LeafModel::Linear) {
            for (std::size_t f = 0; f < dim_; ++f) {
                if (self.used[f]) {
                    candidates.push_back(f);
                }
            }
        }
        auto [model, err] = node_model(rows, candidates);
        self.node.model = std::move(model);
        if (self.node.is_leaf()) {
            self.node.estimated_error = err;
            return;
        }
        const auto &l = work_[static_cast<std::size_t>(self.node.left)];
        const auto &r = work_[static_cast<std::size_t>(self.node.right)];
        const double n = static_cast<double>(rows.size());
        const double subtree_err = (static_cast<double>(l.rows.size()) * l.node.estimated_error +
                                    static_cast<double>(r.rows.size()) * r.node.estimated_error) /
                                   n;
        if (p_.prune && err <= subtree_err * (1.0 + 1e-9) + 1e-12 * root_sd_) {
            self.node.left = -1;
            self.node.right = -1;
            self.node.estimated_error = err;
        } else {
            self.node.estimated_error = subtree_err;
        }
        self.rows.clear();
        self.rows.shrink_to_fit();
    }

    ModelTree compact() const {
        std::vector<ModelTree::Node> out;
        struct Item {
            std::size_t src;
            int parent;
            bool left;
        };
        std::vector<Item> queue{{0, -1, false}};
        for (std::size_t q = 0; q < queue.size(); ++q) {
            const Item it = queue[q];
            const int id = static_cast<int>(out.size());
            out.push_back(work_[it.src].node);
            if (it.parent >= 0) {
                (it.left ? out[static_cast<std::size_t>(it.parent)].left
                         : out[static_cast<std::size_t>(it.parent)].right) = id;
            }
            const auto &n = work_[it.src].node;
            if (!n.is_leaf()) {
                queue.push_back({static_cast<std::size_t>(n.left), id, true});
                queue.push_back({static_cast<std::size_t>(n.right), id, false});
            }
        }
        for (auto &n : out) {
            if (n.is_leaf()) {
                n.feature = 0;
                n.threshold = 0.0;
            }
        }
        return ModelTree(dim_, std::move(out));
    }

    const std::vector<std::vector<double>> &X_;
    const std::vector<double> &y_;
    M5Params p_;
    std::size_t dim_;
    std::vector<std::size_t> all_features_;
    double root_sd_ = 0.0;
    std::vector<Work> work_;
};

void check_training_data(const std::vector<std::vector<double>> &X, const std::vector<double> &y) {
    if (X.size() < 2) {
        throw DomainError("training needs at least two rows");
    }
    if (X.size() != y.size()) {
        throw DomainError("feature and target row counts differ");
    }
    const std::size_t d = X.front().size();
    if (d == 0) {
        throw DomainError("training needs at least one feature");
    }
    for (const auto &row : X) {
        if (row.size() != d) {
            throw DomainError("ragged feature matrix");
        }
    }
    for (double v : y) {
        if (!std::isfinite(v)) {
            throw DomainError("non-finite training target");
        }
    }
}

} // namespace

ModelTree train_m5(const std::vector<std::vector<double>> &X, const std::vector<double> &y,
                   const M5Params &params) {
    check_training_data(X, y);
    return M5Builder(X, y, params).build();
}

ModelTree train_m5(const Dataset &d, const M5Params &params) { return train_m5(d.X, d.y_rb, params); }

// ---------------------------------------------------------------- forest

double RegressionTree::predict(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
        const Node &n = nodes_[i];
        i = static_cast<std::size_t>(x[n.feature] <= n.threshold ? n.left : n.right);
    }
    return nodes_[i].value;
}

Forest::Forest(std::size_t dimension, std::size_t max_features, std::vector<RegressionTree> trees,
               std::vector<std::vector<std::size_t>> samples)
    : dimension_(dimension), max_features_(max_features), trees_(std::move(trees)),
      samples_(std::move(samples)) {
    if (trees_.empty()) {
        throw DomainError("a forest needs at least one tree");
    }
    for (const auto &t : trees_) {
        if (t.nodes().empty()) {
            throw DomainError("forest contains an empty tree");
        }
        for (const auto &n : t.nodes()) {
            if (n.is_leaf() != (n.right < 0) ||
                (!n.is_leaf() && (n.feature >= dimension_ ||
                                  n.left >= static_cast<int>(t.nodes().size()) ||
                                  n.right >= static_cast<int>(t.nodes().size())))) {
                throw DomainError("forest tree node references out of range");
            }
        }
    }
}

double Forest::predict(std::span<const double> x) const {
    if (x.size() != dimension_) {
        throw DomainError("forest input has dimension " + std::to_string(x.size()) +
                          ", expected " + std::to_string(dimension_));
    }
    double sum = 0.0;
    for (const auto &t : trees_) {
        sum += t.predict(x);
    }
    return sum / static_cast<double>(trees_.size());
}

std::optional<double> Forest::oob_mse(const std::vector<std::vector<double>> &X,
                                      const std::vector<double> &y) const {
    if (samples_.size() != trees_.size()) {
        return std::nullopt;
    }
    std::vector<double> sum(X.size(), 0.0);
    std::vector<std::size_t> count(X.size(), 0);
    std::vector<char> in_bag(X.size());
    for (std::size_t t = 0; t < trees_.size(); ++t) {
        std::fill(in_bag.begin(), in_bag.end(), 0);
        for (std::size_t r : samples_[t]) {
            in_bag[r] = 1;
        }
        for (std::size_t i = 0; i < X.size(); ++i) {
            if (!in_bag[i]) {
                sum[i] += trees_[t].predict(X[i]);
                ++count[i];
            }
        }
    }
    double se = 0.0;
    std::size_t m = 0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        if (count[i] > 0) {
            const double e = sum[i] / static_cast<double>(count[i]) - y[i];
            se += e * e;
            ++m;
        }
    }
    if (m == 0) {
        return std::nullopt;
    }
    return se / static_cast<double>(m);
}

json Forest::to_json() const {
    json trees = json::array();
    for (const auto &t : trees_) {
        json nodes = json::array();
        for (const auto &n : t.nodes()) {
            nodes.push_back(json::array({n.left, n.right, n.feature, n.threshold, n.value}));
        }
        trees.push_back(std::move(nodes));
    }
    return json{{"dimension", dimension_}, {"max_features", max_features_}, {"trees", std::move(trees)}};
}

Forest Forest::from_json(const json &j) {
    try {
        std::vector<RegressionTree> trees;
        for (const auto &jt : j.at("trees")) {
            std::vector<RegressionTree::Node> nodes;
            for (const auto &jn : jt) {
                if (jn.size() != 5) {
                    throw ConfigError("forest node must have 5 fields");
                }
                RegressionTree::Node n;
                n.left = jn[0].get<int>();
                n.right = jn[1].get<int>();
                n.feature = jn[2].get<std::size_t>();
                n.threshold = jn[3].get<double>();
                n.value = jn[4].get<double>();
                nodes.push_back(n);
            }
            trees.emplace_back(std::move(nodes));
        }
        return Forest(j.at("dimension").get<std::size_t>(), j.at("max_features").get<std::size_t>(),
                      std::move(trees), {});
    } catch (const json::exception &e) {
        throw ConfigError(std::string("malformed forest: ") + e.what());
    } catch (const DomainError &e) {
        throw ConfigError(std::string("malformed forest: ") + e.what());
    }
}

namespace {

class CartBuilder {
  public:
    CartBuilder(const std::vector<std::vector<double>> &X, const std::vector<double> &y,
                std::size_t max_features, std::size_t min_split, Rng &rng)
        : X_(X), y_(y), max_features_(max_features), min_split_(std::max<std::size_t>(min_split, 2)),
          rng_(rng), features_(X.front().size()) {
        std::iota(features_.begin(), features_.end(), std::size_t{0});
    }

    RegressionTree build(const std::vector<std::size_t> &rows) {
        grow(rows);
        return RegressionTree(std::move(nodes_));
    }

  private:
    int grow(const std::vector<std::size_t> &idx) {
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back({});
        double mean = 0.0;
        for (std::size_t r : idx) {
            mean += y_[r];
        }
        mean /= static_cast<double>(idx.size());
        nodes_[static_cast<std::size_t>(id)].value = mean;
        if (idx.size() < min_split_ || node_sse(y_, idx) <= 0.0) {
            return id;
        }
        // Partial Fisher-Yates: the first max_features_ entries are a uniform draw.
        for (std::size_t k = 0; k < max_features_; ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, features_.size() - 1);
            std::swap(features_[k], features_[pick(rng_)]);
        }
        std::vector<std::size_t> chosen(features_.begin(),
                                        features_.begin() + static_cast<std::ptrdiff_t>(max_features_));
        std::sort(chosen.begin(), chosen.end());
        const SplitChoice s = best_split(X_, y_, idx, chosen, 1);
        if (!s.found) {
            return id;
        }
        std::vector<std::size_t> l;
        std::vector<std::size_t> r;
        for (std::size_t i : idx) {
            (X_[i][s.feature] <= s.threshold ? l : r).push_back(i);
        }
        const int left = grow(l);
        const int right = grow(r);
        auto &node = nodes_[static_cast<std::size_t>(id)];
        node.feature = s.feature;
        node.threshold = s.threshold;
        node.left = left;
        node.right = right;
        return id;
    }

    const std::vector<std::vector<double>> &X_;
    const std::vector<double> &y_;
    std::size_t max_features_;
    std::size_t min_split_;
    Rng &rng_;
    std::vector<std::size_t> features_;
    std::vector<RegressionTree::Node> nodes_;
};

} // namespace

Forest train_forest(const std::vector<std::vector<double>> &X, const std::vector<double> &y,
                    const ForestParams &params) {
    check_training_data(X, y);
    if (params.n_trees < 1) {
        throw ConfigError("a forest needs at least one tree");
    }
    const std::size_t d = X.front().size();
    std::size_t mtry = params.max_features;
    if (mtry == 0) {
        mtry = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(d)))));
    }
    mtry = std::min(mtry, d);
    std::vector<RegressionTree> trees(params.n_trees);
    std::vector<std::vector<std::size_t>> samples(params.n_trees);
    parallel_for(params.n_trees, [&](std::size_t t) {
        Rng rng(derive_seed(params.seed, "forest", t));
        std::vector<std::size_t> rows(X.size());
        if (params.bootstrap) {
            std::uniform_int_distribution<std::size_t> pick(0, X.size() - 1);
            for (auto &r : rows) {
                r = pick(rng);
            }
            std::sort(rows.begin(), rows.end());
        } else {
            std::iota(rows.begin(), rows.end(), std::size_t{0});
        }
        trees[t] = CartBuilder(X, y, mtry, params.min_split, rng).build(rows);
        samples[t] = std::move(rows);
    });
    return Forest(d, mtry, std::move(trees), std::move(samples));
}

Forest train_forest(const Dataset &d, const ForestParams &params) {
    return train_forest(d.X, d.y_rb, params);
}

// ---------------------------------------------------------------- causal model

std::string_view to_string(ModelKind k) { return k == ModelKind::M5 ? "m5" : "rf"; }

ModelKind parse_model_kind(std::string_view text) {
    if (text == "m5" || text == "M5") {
        return ModelKind::M5;
    }
    if (text == "rf" || text == "RF") {
        return ModelKind::RandomForest;
    }
    throw ConfigError("model must be 'm5' or 'rf', got '" + std::string(text) + "'");
}

std::string_view to_string(TargetMode m) { return m == TargetMode::Robustness ? "robustness" : "label"; }

TargetMode parse_target_mode(std::string_view text) {
    if (text == "robustness") {
        return TargetMode::Robustness;
    }
    if (text == "label") {
        return TargetMode::Label;
    }
    throw ConfigError("target must be 'robustness' or 'label', got '" + std::string(text) + "'");
}

CausalModel::CausalModel(std::vector<std::string> feature_names, TargetMode target, ModelTree tree)
    : kind_(ModelKind::M5), target_(target), feature_names_(std::move(feature_names)),
      tree_(std::move(tree)) {
    if (tree_.dimension() != feature_names_.size()) {
        throw DomainError("model tree dimension does not match the feature names");
    }
}

CausalModel::CausalModel(std::vector<std::string> feature_names, TargetMode target, Forest forest)
    : kind_(ModelKind::RandomForest), target_(target), feature_names_(std::move(feature_names)),
      forest_(std::move(forest)) {
    if (forest_.dimension() != feature_names_.size()) {
        throw DomainError("forest dimension does not match the feature names");
    }
}

Prediction CausalModel::predict(std::span<const double> x) const {
    if (x.size() != dimension()) {
        throw DomainError("prediction input has dimension " + std::to_string(x.size()) +
                          ", expected " + std::to_string(dimension()));
    }
    const double est = kind_ == ModelKind::M5 ? tree_.predict(x) : forest_.predict(x);
    return {est, est >= 0.0 ? Verdict::Pass : Verdict::Fail};
}

std::vector<Prediction> CausalModel::predict_batch(const std::vector<std::vector<double>> &X) const {
    std::vector<Prediction> out;
    out.reserve(X.size());
    for (const auto &x : X) {
        out.push_back(predict(x));
    }
    return out;
}

json CausalModel::to_json() const {
    json j;
    j["format"] = "decaf-causal-model";
    j["version"] = 1;
    j["kind"] = std::string(to_string(kind_));
    j["target"] = std::string(to_string(target_));
    j["feature_names"] = feature_names_;
    if (kind_ == ModelKind::M5) {
        j["tree"] = tree_.to_json();
    } else {
        j["forest"] = forest_.to_json();
    }
    return j;
}

CausalModel CausalModel::from_json(const json &j) {
    try {
        if (j.at("format").get<std::string>() != "decaf-causal-model") {
            throw ConfigError("not a causal model document");
        }
        if (j.at("version").get<int>() != 1) {
            throw ConfigError("unsupported causal model version " + j.at("version").dump());
        }
        const ModelKind kind = parse_model_kind(j.at("kind").get<std::string>());
        const TargetMode target = parse_target_mode(j.at("target").get<std::string>());
        auto names = j.at("feature_names").get<std::vector<std::string>>();
        if (kind == ModelKind::M5) {
            return CausalModel(std::move(names), target, ModelTree::from_json(j.at("tree")));
        }
        return CausalModel(std::move(names), target, Forest::from_json(j.at("forest")));
    } catch (const json::exception &e) {
        throw ConfigError(std::string("malformed causal model: ") + e.what());
    } catch (const DomainError &e) {
        throw ConfigError(std::string("malformed causal model: ") + e.what());
    }
}

std::vector<double> regression_target(const Dataset &d, TargetMode mode) {
    if (mode == TargetMode::Robustness) {
        return d.y_rb;
    }
    std::vector<double> y;
    y.reserve(d.size());
    for (Verdict v : d.y_label) {
        y.push_back(v == Verdict::Pass ? 1.0 : -1.0);
    }
    return y;
}

CausalModel train_causal_model(const Dataset &d, const CausalModelParams &params) {
    d.validate();
    const std::vector<double> y = regression_target(d, params.target);
    if (params.kind == ModelKind::M5) {
        return CausalModel(d.feature_names, params.target, train_m5(d.X, y, params.m5));
    }
    return CausalModel(d.feature_names, params.target, train_forest(d.X, y, params.forest));
}

ClassifierMetrics confusion_metrics(std::span<const Verdict> truth, std::span<const Verdict> predicted) {
    if (truth.size() != predicted.size()) {
        throw DomainError("truth and prediction lengths differ");
    }
    if (truth.empty()) {
        throw DomainError("metrics need at least one row");
    }
    ClassifierMetrics m;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool actual_fail = truth[i] == Verdict::Fail;
        const bool predicted_fail = predicted[i] == Verdict::Fail;
        if (actual_fail && predicted_fail) {
            ++m.tp;
        } else if (actual_fail) {
            ++m.fn;
        } else if (predicted_fail) {
            ++m.fp;
        } else {
            ++m.tn;
        }
    }
    m.accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(truth.size());
    if (m.tp + m.fn > 0) {
        m.recall = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
        m.f1 = 2.0 * static_cast<double>(m.tp) / static_cast<double>(2 * m.tp + m.fp + m.fn);
    }
    return m;
}

ClassifierMetrics classifier_metrics(const CausalModel &cm, const Dataset &holdout) {
    std::vector<Verdict> predicted;
    predicted.reserve(holdout.size());
    for (const auto &p : cm.predict_batch(holdout.X)) {
        predicted.push_back(p.verdict);
    }
    return confusion_metrics(holdout.y_label, predicted);
}

std::vector<std::size_t> identify_failures(const Dataset &d) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < d.y_label.size(); ++i) {
        if (d.y_label[i] == Verdict::Fail) {
            out.push_back(i);
        }
    }
    return out;
}

Split stratified_split(const Dataset &d, double holdout_fraction, std::uint64_t seed) {
    if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
        throw ConfigError("holdout fraction must lie in [0,1)");
    }
    Split s;
    Rng rng(derive_seed(seed, "split", 0));
    for (Verdict label : {Verdict::Fail, Verdict::Pass}) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (d.y_label[i] == label) {
                rows.push_back(i);
            }
        }
        std::shuffle(rows.begin(), rows.end(), rng);
        auto take = static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(rows.size())));
        if (take == 0 && rows.size() >= 2 && holdout_fraction > 0.0) {
            take = 1;
        }
        s.holdout.insert(s.holdout.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(take));
        s.train.insert(s.train.end(), rows.begin() + static_cast<std::ptrdiff_t>(take), rows.end());
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.holdout.begin(), s.holdout.end());
    return s;
}

} // namespace decaf
