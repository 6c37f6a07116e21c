#pragma once

/**
 * @file stl.hpp
 * @brief Signal temporal logic: formulas, traces and quantitative robustness.
 *
 * Grammar (ASCII, whitespace-insensitive), loosest binding first:
 *
 *     formula  := or_expr ( '->' formula )?
 *     or_expr  := and_expr ( 'or' and_expr )*
 *     and_expr := until_expr ( 'and' until_expr )*
 *     until_expr := unary ( 'until' '[' a ',' b ']' unary )?
 *     unary    := 'not' unary | 'always' '[' a ',' b ']' unary
 *               | 'eventually' '[' a ',' b ']' unary | primary
 *     primary  := '(' formula ')' | NAME ('<'|'<='|'>'|'>=') NUMBER
 *
 * Robustness uses discrete semantics over the trace's sample instants.
 */

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace decaf {

enum class Comparison { Less, LessEqual, Greater, GreaterEqual };

[[nodiscard]] std::string_view to_string(Comparison c);

class Formula {
  public:
    enum class Kind { Atom, Not, And, Or, Implies, Always, Eventually, Until };

    [[nodiscard]] static Formula atom(std::string signal, Comparison op, double threshold);
    [[nodiscard]] static Formula negation(Formula operand);
    [[nodiscard]] static Formula conjunction(Formula lhs, Formula rhs);
    [[nodiscard]] static Formula disjunction(Formula lhs, Formula rhs);
    [[nodiscard]] static Formula implication(Formula lhs, Formula rhs);
    [[nodiscard]] static Formula always(double a, double b, Formula operand);
    [[nodiscard]] static Formula eventually(double a, double b, Formula operand);
    [[nodiscard]] static Formula until(double a, double b, Formula lhs, Formula rhs);

    [[nodiscard]] Kind kind() const;
    [[nodiscard]] const std::string &signal() const;
    [[nodiscard]] Comparison comparison() const;
    [[nodiscard]] double threshold() const;
    [[nodiscard]] double lower() const;
    [[nodiscard]] double upper() const;
    [[nodiscard]] const std::vector<Formula> &children() const;

    /// Time span beyond t0 that the formula inspects.
    [[nodiscard]] double horizon() const;

    /// Channel names referenced by atoms (sorted, unique).
    [[nodiscard]] std::vector<std::string> channels() const;

    /// Canonical, fully parenthesized rendering; parse(to_string()) == *this.
    [[nodiscard]] std::string to_string() const;

    friend bool operator==(const Formula &lhs, const Formula &rhs);

  private:
    struct Node;
    explicit Formula(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
    std::shared_ptr<const Node> node_;
};

/// Parses the ASCII grammar above; throws ParseError with the offending position.
[[nodiscard]] Formula parse_formula(std::string_view text);

/// Uniformly sampled multivariate record: times[i] = i * dt.
class Trace {
  public:
    Trace() = default;
    Trace(double dt, std::vector<std::string> names, std::vector<std::vector<double>> channels);

    [[nodiscard]] double dt() const { return dt_; }
    [[nodiscard]] std::size_t size() const { return times_.size(); }
    [[nodiscard]] const std::vector<double> &times() const { return times_; }
    [[nodiscard]] const std::vector<std::string> &names() const { return names_; }
    [[nodiscard]] bool has_channel(std::string_view name) const;
    /// Throws TraceError for an unknown channel.
    [[nodiscard]] const std::vector<double> &channel(std::string_view name) const;

    /// `time,<channel>...` with one row per sample.
    [[nodiscard]] std::string to_csv() const;

  private:
    double dt_ = 0.0;
    std::vector<double> times_;
    std::vector<std::string> names_;
    std::vector<std::vector<double>> channels_;
};

struct Robustness {
    double value = 0.0;
};

enum class Verdict { Pass, Fail };

[[nodiscard]] std::string_view to_string(Verdict v);
/// Throws ConfigError on anything other than "pass"/"fail".
[[nodiscard]] Verdict parse_verdict(std::string_view text);

/// Robustness of phi at time t0 (which must be a sample instant).
[[nodiscard]] Robustness robustness(const Formula &phi, const Trace &trace, double t0 = 0.0);

/// fail iff rb < 0; zero counts as pass.
[[nodiscard]] Verdict verdict(Robustness rb);
[[nodiscard]] inline Verdict verdict(double rb) { return verdict(Robustness{rb}); }

} // namespace decaf
