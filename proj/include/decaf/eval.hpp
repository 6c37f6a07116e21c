#pragma once

/**
 * @file eval.hpp
 * @brief Quality metrics for counterfactuals and assertions, rank statistics,
 * and per-configuration result tables.
 */

#include "decaf/assertions.hpp"
#include "decaf/cfgen.hpp"
#include "decaf/learn.hpp"
#include "decaf/plants.hpp"

#include "json.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace decaf {

/// True iff, for every input signal with changes, reverting that signal's
/// changed points to their original values makes the requirement fail again.
/// Throws DomainError when nothing changed.
[[nodiscard]] bool necessity(const Plant &plant, const Formula &phi, const Counterfactual &cf);

/// Fraction of n variants that pass, where the changed points keep their new
/// values and every other point is drawn uniformly from its range.
/// nullopt when every point changed.
[[nodiscard]] std::optional<double> sufficiency(const Plant &plant, const Formula &phi,
                                                const Counterfactual &cf, std::size_t n, Rng &rng);

[[nodiscard]] std::size_t predicate_count(const Assertion &a);

/// Fraction of `cfs` whose modified input the assertion covers; nullopt when cfs is empty.
[[nodiscard]] std::optional<double> g_score(const Assertion &a, const std::vector<Counterfactual> &cfs,
                                            const InputSpec &spec);

/// Fraction of n inputs that pass, where each changed point is drawn uniformly
/// from its range intersected with the bounds of the first conjunction covering
/// cf.modified, and the other points keep cf.modified's values. nullopt when no
/// conjunction covers the counterfactual or the covering one constrains none of
/// its changed points. Throws DomainError when a sampled region is empty.
[[nodiscard]] std::optional<double> safety(const Plant &plant, const Formula &phi, const Assertion &a,
                                           const Counterfactual &cf, std::size_t n, Rng &rng);

struct MannWhitney {
    /// U of the first sample: #(a > b) + 0.5 #(a = b).
    double u = 0.0;
    double p_value = 1.0;
    bool exact = false;
};

/// Two-sided test. Exact (enumerated over all rank assignments, ties by
/// midranks) when the samples total at most `exact_limit` values; otherwise the
/// normal approximation with tie and continuity corrections.
[[nodiscard]] MannWhitney mann_whitney_u(std::span<const double> a, std::span<const double> b,
                                         std::size_t exact_limit = 20);

struct EffectThresholds {
    double small = 0.06;
    double medium = 0.14;
    double large = 0.21;
};

struct EffectSize {
    double value = 0.5;
    /// "None", "Small", "Medium" or "Large".
    std::string category;
};

[[nodiscard]] std::string effect_category(double a12, const EffectThresholds &t = {});
[[nodiscard]] EffectSize vargha_delaney_a12(std::span<const double> a, std::span<const double> b,
                                            const EffectThresholds &t = {});

struct CounterfactualRecord {
    Counterfactual cf;
    bool necessary = false;
    std::optional<double> sufficiency;
    std::vector<std::string> explanation;
};

struct AssertionRecord {
    Assertion assertion;
    bool uninformative = false;
    std::size_t predicate_count = 0;
    double g_score = 0.0;
    std::optional<double> safety;
};

/// Outcome for one failing input under one configuration.
struct InputRecord {
    std::size_t row = 0;
    TestInput failing;
    double failing_robustness = 0.0;
    /// Candidates returned by the generator.
    std::size_t generated = 0;
    /// Candidates confirmed passing by simulation.
    std::size_t valid = 0;
    /// Selected valid counterfactuals with their goodness metrics.
    std::vector<CounterfactualRecord> selected;
    std::optional<AssertionRecord> assertion;
};

struct ConfigResult {
    std::string system;
    std::string requirement;
    Generator generator = Generator::KD;
    ModelKind model = ModelKind::M5;
    std::size_t ts_size = 0;
    std::size_t n_fail = 0;
    std::vector<InputRecord> records;

    /// "KD-M5" style label.
    [[nodiscard]] std::string label() const;
    /// Total generated candidates.
    [[nodiscard]] std::size_t cf_count() const;
    [[nodiscard]] std::size_t valid_count() const;
};

/// Inputs with at least one valid counterfactual over inputs explained; nullopt without inputs.
[[nodiscard]] std::optional<double> success_rate(const std::vector<InputRecord> &records);
/// Valid over generated counterfactuals; nullopt when nothing was generated.
[[nodiscard]] std::optional<double> relative_success_rate(const std::vector<InputRecord> &records);

struct GoodnessSummary {
    std::optional<double> necessity;
    std::optional<double> sufficiency;
    std::optional<double> safety;
    std::optional<double> predicates;
    std::optional<double> g_score;
};

/// Means over selected counterfactuals (necessity, sufficiency) and over
/// produced assertions (safety, predicates, G-score); nullopt when empty.
[[nodiscard]] GoodnessSummary summarize(const std::vector<InputRecord> &records);

/// Per-generated-candidate validity as 0/1 samples, the comparison unit for rank tests.
[[nodiscard]] std::vector<double> validity_sample(const ConfigResult &r);

struct ResultTables {
    nlohmann::json json;
    std::string counts_csv;
    std::string success_csv;
    std::string comparison_csv;
    std::string goodness_csv;
};

/// Tables keyed by system-requirement rows and generator-model columns, with
/// an Average row; absent or undefined cells render "--".
[[nodiscard]] ResultTables build_tables(const std::vector<ConfigResult> &results,
                                        const EffectThresholds &thresholds = {});

} // namespace decaf
