#pragma once

/**
 * @file signals.hpp
 * @brief Control-point encoding of input signals.
 *
 * A signal over [0, horizon] is encoded by n control points. Each control
 * point owns one of n equal-width segments and the concretized signal is
 * piecewise constant: segment j covers [j*w, (j+1)*w) with w = horizon / n,
 * and the final segment also owns the right endpoint.
 */

#include "decaf/util.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace decaf {

enum class Interpolation { PiecewiseConstant };

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct SignalSpec {
    std::string name;
    std::size_t n_points = 1;
    double range_lo = 0.0;
    double range_hi = 1.0;
    double horizon = 1.0;
    Interpolation interpolation = Interpolation::PiecewiseConstant;

    [[nodiscard]] double width() const { return range_hi - range_lo; }
    [[nodiscard]] double segment_width() const { return horizon / static_cast<double>(n_points); }

    /// Throws DomainError when an invariant does not hold.
    void validate() const;
};

/// Address of one control point: signal position in the InputSpec plus the
/// 0-based control-point index.
struct ControlPoint {
    std::size_t signal = 0;
    std::size_t index = 0;

    friend bool operator==(const ControlPoint &, const ControlPoint &) = default;
    friend auto operator<=>(const ControlPoint &, const ControlPoint &) = default;
};

/// Ordered tuple of signals sharing one horizon; defines the flat feature layout
/// (signal by signal, control point by control point).
class InputSpec {
  public:
    InputSpec() = default;
    explicit InputSpec(std::vector<SignalSpec> signals);

    [[nodiscard]] const std::vector<SignalSpec> &signals() const { return signals_; }
    [[nodiscard]] std::size_t signal_count() const { return signals_.size(); }
    [[nodiscard]] const SignalSpec &signal(std::size_t k) const { return signals_.at(k); }
    [[nodiscard]] double horizon() const { return signals_.empty() ? 0.0 : signals_.front().horizon; }

    /// Total feature dimension (sum of control-point counts).
    [[nodiscard]] std::size_t dimension() const { return dimension_; }

    /// Position of a signal by name; throws DomainError if unknown.
    [[nodiscard]] std::size_t signal_index(std::string_view name) const;
    [[nodiscard]] bool has_signal(std::string_view name) const;

    /// Flat feature offset of the first control point of signal k.
    [[nodiscard]] std::size_t offset(std::size_t k) const { return offsets_.at(k); }
    [[nodiscard]] std::size_t feature_index(ControlPoint cp) const;
    [[nodiscard]] ControlPoint control_point(std::size_t feature) const;

    [[nodiscard]] double feature_lo(std::size_t feature) const;
    [[nodiscard]] double feature_hi(std::size_t feature) const;
    [[nodiscard]] double feature_width(std::size_t feature) const;

    /// Column names `<signal>_cp<j>` in feature order.
    [[nodiscard]] std::vector<std::string> feature_names() const;

  private:
    std::vector<SignalSpec> signals_;
    std::vector<std::size_t> offsets_;
    std::vector<std::size_t> feature_signal_;
    std::size_t dimension_ = 0;
};

/// A concrete assignment of every control point, stored flat in feature order.
class TestInput {
  public:
    TestInput() = default;

    /// Checks dimension and per-signal range containment.
    TestInput(const InputSpec &spec, std::vector<double> features);

    [[nodiscard]] const std::vector<double> &features() const { return features_; }
    [[nodiscard]] std::size_t size() const { return features_.size(); }
    [[nodiscard]] double operator[](std::size_t i) const { return features_[i]; }

    /// Control points of signal k.
    [[nodiscard]] std::span<const double> signal_values(const InputSpec &spec, std::size_t k) const;

    friend bool operator==(const TestInput &, const TestInput &) = default;

  private:
    std::vector<double> features_;
};

/// Time interval owned by control point j of `spec`.
[[nodiscard]] Interval segment_interval(const SignalSpec &spec, std::size_t j);

/// Segment index that owns time t (clamped to the final segment at t = horizon).
[[nodiscard]] std::size_t segment_of(const SignalSpec &spec, double t);

/// Value of the concretized signal at time t.
[[nodiscard]] double value_at(const TestInput &input, const InputSpec &spec, std::string_view signal,
                              double t);
[[nodiscard]] double value_at(const TestInput &input, const InputSpec &spec, std::size_t signal,
                              double t);

/// Every control point uniform in its range.
[[nodiscard]] TestInput random_input(const InputSpec &spec, Rng &rng);

/// Clamp every feature to its admissible range.
[[nodiscard]] std::vector<double> clamp_to_range(const InputSpec &spec, std::vector<double> features);

/// 1-based paper-style name, e.g. "c_{Throttle,1}".
[[nodiscard]] std::string control_point_name(const InputSpec &spec, ControlPoint cp);

/// CSV header and row for a TestInput (`<signal>_cp<j>` columns).
[[nodiscard]] std::string test_input_csv_header(const InputSpec &spec);
[[nodiscard]] std::string test_input_csv_row(const TestInput &input);

} // namespace decaf
