#include "decaf/signals.hpp"

#include "decaf/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace decaf {

void SignalSpec::validate() const {
    if (name.empty()) {
        throw DomainError("signal name must not be empty");
    }
    if (n_points < 1) {
        throw DomainError("signal '" + name + "' needs at least one control point");
    }
    if (!(range_lo < range_hi) || !std::isfinite(range_lo) || !std::isfinite(range_hi)) {
        throw DomainError("signal '" + name + "' has an empty or non-finite range");
    }
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
        throw DomainError("signal '" + name + "' needs a positive horizon");
    }
}

InputSpec::InputSpec(std::vector<SignalSpec> signals) : signals_(std::move(signals)) {
    if (signals_.empty()) {
        throw DomainError("input spec needs at least one signal");
    }
    std::set<std::string> names;
    for (const auto &s : signals_) {
        s.validate();
        if (!names.insert(s.name).second) {
            throw DomainError("duplicate signal name '" + s.name + "'");
        }
        if (s.horizon != signals_.front().horizon) {
            throw DomainError("signal '" + s.name + "' does not share the common horizon");
        }
        offsets_.push_back(dimension_);
        for (std::size_t j = 0; j < s.n_points; ++j) {
            feature_signal_.push_back(offsets_.size() - 1);
        }
        dimension_ += s.n_points;
    }
}

std::size_t InputSpec::signal_index(std::string_view name) const {
    for (std::size_t k = 0; k < signals_.size(); ++k) {
        if (signals_[k].name == name) {
            return k;
        }
    }
    throw DomainError("unknown signal '" + std::string(name) + "'");
}

bool InputSpec::has_signal(std::string_view name) const {
    return std::any_of(signals_.begin(), signals_.end(),
                       [&](const SignalSpec &s) { return s.name == name; });
}

std::size_t InputSpec::feature_index(ControlPoint cp) const {
    if (cp.signal >= signals_.size() || cp.index >= signals_[cp.signal].n_points) {
        throw DomainError("control point out of range");
    }
    return offsets_[cp.signal] + cp.index;
}

ControlPoint InputSpec::control_point(std::size_t feature) const {
    if (feature >= dimension_) {
        throw DomainError("feature index out of range");
    }
    const std::size_t k = feature_signal_[feature];
    return {k, feature - offsets_[k]};
}

double InputSpec::feature_lo(std::size_t feature) const {
    return signals_[control_point(feature).signal].range_lo;
}

double InputSpec::feature_hi(std::size_t feature) const {
    return signals_[control_point(feature).signal].range_hi;
}

double InputSpec::feature_width(std::size_t feature) const {
    return signals_[control_point(feature).signal].width();
}

std::vector<std::string> InputSpec::feature_names() const {
    std::vector<std::string> names;
    names.reserve(dimension_);
    for (const auto &s : signals_) {
        for (std::size_t j = 0; j < s.n_points; ++j) {
            names.push_back(s.name + "_cp" + std::to_string(j));
        }
    }
    return names;
}

TestInput::TestInput(const InputSpec &spec, std::vector<double> features)
    : features_(std::move(features)) {
    if (features_.size() != spec.dimension()) {
        throw DomainError("test input has " + std::to_string(features_.size()) +
                          " values, spec expects " + std::to_string(spec.dimension()));
    }
    for (std::size_t i = 0; i < features_.size(); ++i) {
        const double v = features_[i];
        if (!std::isfinite(v) || v < spec.feature_lo(i) || v > spec.feature_hi(i)) {
            throw DomainError("control point " + spec.feature_names()[i] + " = " +
                              format_double(v) + " is outside its admissible range");
        }
    }
}

std::span<const double> TestInput::signal_values(const InputSpec &spec, std::size_t k) const {
    return std::span<const double>(features_).subspan(spec.offset(k), spec.signal(k).n_points);
}

Interval segment_interval(const SignalSpec &spec, std::size_t j) {
    if (j >= spec.n_points) {
        throw DomainError("control point index " + std::to_string(j) + " out of range for '" +
                          spec.name + "'");
    }
    const double n = static_cast<double>(spec.n_points);
    // Shared boundaries are computed the same way on both sides; the last one is h itself.
    const double hi = j + 1 == spec.n_points ? spec.horizon : static_cast<double>(j + 1) * spec.horizon / n;
    return {static_cast<double>(j) * spec.horizon / n, hi};
}

std::size_t segment_of(const SignalSpec &spec, double t) {
    const double n = static_cast<double>(spec.n_points);
    auto j = static_cast<std::size_t>(std::floor(t * n / spec.horizon));
    return std::min(j, spec.n_points - 1);
}

double value_at(const TestInput &input, const InputSpec &spec, std::size_t signal, double t) {
    const SignalSpec &s = spec.signal(signal);
    if (!(t >= 0.0 && t <= s.horizon)) {
        throw DomainError("time " + format_double(t) + " outside [0, " + format_double(s.horizon) +
                          "]");
    }
    return input[spec.offset(signal) + segment_of(s, t)];
}

double value_at(const TestInput &input, const InputSpec &spec, std::string_view signal, double t) {
    return value_at(input, spec, spec.signal_index(signal), t);
}

TestInput random_input(const InputSpec &spec, Rng &rng) {
    std::vector<double> values(spec.dimension());
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uniform_real_distribution<double> dist(spec.feature_lo(i), spec.feature_hi(i));
        values[i] = std::clamp(dist(rng), spec.feature_lo(i), spec.feature_hi(i));
    }
    return TestInput(spec, std::move(values));
}

std::vector<double> clamp_to_range(const InputSpec &spec, std::vector<double> features) {
    for (std::size_t i = 0; i < features.size(); ++i) {
        features[i] = std::clamp(features[i], spec.feature_lo(i), spec.feature_hi(i));
    }
    return features;
}

std::string control_point_name(const InputSpec &spec, ControlPoint cp) {
    return "c_{" + spec.signal(cp.signal).name + "," + std::to_string(cp.index + 1) + "}";
}

std::string test_input_csv_header(const InputSpec &spec) {
    std::string out;
    for (const auto &name : spec.feature_names()) {
        if (!out.empty()) {
            out += ',';
        }
        out += name;
    }
    return out;
}

std::string test_input_csv_row(const TestInput &input) {
    std::string out;
    for (std::size_t i = 0; i < input.size(); ++i) {
        if (i > 0) {
            out += ',';
        }
        out += format_double(input[i]);
    }
    return out;
}

} // namespace decaf
