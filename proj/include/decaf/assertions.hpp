#pragma once

/**
 * @file assertions.hpp
 * @brief Success assertions over control points and their time-quantified form.
 */

#include "decaf/cfgen.hpp"
#include "decaf/learn.hpp"
#include "decaf/signals.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace decaf {

enum class Op { Lt, Le, Gt, Ge, Eq, Ne };

/// "<", "<=", ">", ">=", "=", "!="
[[nodiscard]] std::string_view ascii_symbol(Op op);
/// "<", "≤", ">", "≥", "=", "≠"
[[nodiscard]] std::string_view unicode_symbol(Op op);
[[nodiscard]] Op parse_op(std::string_view text);
[[nodiscard]] bool compare(double value, Op op, double bound);

struct Predicate {
    ControlPoint target;
    Op op = Op::Le;
    double bound = 0.0;

    [[nodiscard]] bool holds(const TestInput &x, const InputSpec &spec) const;
    friend bool operator==(const Predicate &, const Predicate &) = default;
};

using Conjunction = std::vector<Predicate>;

/// Disjunction of conjunctions implying `verdict`. An empty conjunction is `true`;
/// an empty disjunction is `false`.
struct Assertion {
    std::vector<Conjunction> dnf;
    Verdict verdict = Verdict::Pass;

    [[nodiscard]] bool is_trivial() const;
    [[nodiscard]] std::size_t predicate_count() const;
    friend bool operator==(const Assertion &, const Assertion &) = default;
};

[[nodiscard]] bool satisfies(const Conjunction &c, const TestInput &x, const InputSpec &spec);
/// True iff some conjunction holds for x.
[[nodiscard]] bool covers(const Assertion &a, const TestInput &x, const InputSpec &spec);

/// "(c_{Throttle,1} ≤ 54.50) ∧ (c_{Brake,2} ≥ 212.30)"; disjuncts joined by " ∨ ".
[[nodiscard]] std::string render_control_points(const Assertion &a, const InputSpec &spec);

struct InferParams {
    M5Params m5{.min_leaf = 2,
                .min_split = 4,
                .min_sd_fraction = 0.05,
                .max_depth = 32,
                .prune = true,
                .leaf_model = LeafModel::Constant};
    /// Failing training rows nearest the failing input added as negatives.
    std::size_t contrast_size = 50;
};

struct InferenceResult {
    Assertion assertion;
    /// The tree did not separate counterfactuals from failures.
    bool uninformative = false;
    std::size_t tree_leaves = 0;
};

/// Failing rows of `d` nearest to x by proximity (ties by row index), at most `count`.
[[nodiscard]] std::vector<std::size_t> nearest_failing_rows(const Dataset &d, const InputSpec &spec,
                                                            std::span<const double> x,
                                                            std::size_t count);

/// Trains an M5 tree on the counterfactuals (+1) against the failing input and
/// contrast rows (-1); each class is replicated to equal mass (at least the
/// minimum leaf size). Every leaf reached by a counterfactual contributes its
/// root-to-leaf path as one conjunction. The result is pruned.
/// Throws DomainError when cfs is empty.
[[nodiscard]] InferenceResult infer(const std::vector<Counterfactual> &cfs, const TestInput &failing,
                                    const std::vector<TestInput> &contrast, const InputSpec &spec,
                                    const InferParams &params = {});

/// Per conjunction: tightest bounds per target, range-implied predicates
/// dropped, unsatisfiable conjunctions dropped. Across conjunctions: duplicates
/// and conjunctions implied by another removed, and conjunctions differing in
/// one target's overlapping or abutting interval merged. The satisfying set
/// over admissible inputs is unchanged.
[[nodiscard]] Assertion prune(const Assertion &a, const InputSpec &spec);

struct TemporalClause {
    std::size_t signal = 0;
    Interval interval;
    Op op = Op::Le;
    double bound = 0.0;
};

struct TemporalAssertion {
    std::vector<std::vector<TemporalClause>> disjuncts;
    Verdict verdict = Verdict::Pass;

    /// `(forall t in [0,7.14]: Throttle(t) <= 54.50) and (...)`; "true" when trivial.
    [[nodiscard]] std::string render_ascii(const InputSpec &spec) const;
    /// `(∀t ∈ [0,7.14]: Throttle(t) ≤ 54.50) ∧ (...)`.
    [[nodiscard]] std::string render_unicode(const InputSpec &spec) const;
};

/// Each predicate becomes a clause over its control point's segment; adjacent
/// clauses with the same signal, operator and bound are merged.
[[nodiscard]] TemporalAssertion translate(const Assertion &a, const InputSpec &spec);

/// Evaluates the clauses on the concretized signals: a clause constrains every
/// segment whose interval lies inside the clause interval.
[[nodiscard]] bool holds(const TemporalAssertion &t, const TestInput &x, const InputSpec &spec);

/// "Input Throttle at time [0.0–7.1s] changed from 80.00 to 54.50", one line per
/// changed point ordered by (signal, index).
[[nodiscard]] std::vector<std::string> explain_nl(const Counterfactual &cf, const InputSpec &spec);

[[nodiscard]] nlohmann::json to_json(const Assertion &a, const InputSpec &spec);
[[nodiscard]] Assertion assertion_from_json(const nlohmann::json &j, const InputSpec &spec);

} // namespace decaf
