#pragma once

/**
 * @file plants.hpp
 * @brief Built-in surrogate systems under test and fixed-step simulation.
 *
 * Every plant is an explicit-Euler discretization with a fixed step. The
 * surrogate dynamics are documented next to each factory in plants.cpp; their
 * coefficients are configuration, chosen so that the quoted requirements are
 * falsifiable by search.
 */

#include "decaf/signals.hpp"
#include "decaf/stl.hpp"

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace decaf {

struct Plant {
    using StepFn =
        std::function<void(std::span<double> state, std::span<const double> inputs, double dt)>;
    using OutputFn = std::function<void(std::span<const double> state,
                                        std::span<const double> inputs, std::span<double> out)>;

    std::string name;
    std::string description;
    InputSpec input_spec;
    std::vector<double> initial_state;
    double dt = 0.01;
    /// Advances the state in place by one step given the input values at t.
    StepFn step;
    std::vector<std::string> output_names;
    /// Writes one value per output name.
    OutputFn outputs;

    [[nodiscard]] std::size_t state_dim() const { return initial_state.size(); }
    /// Input signal names followed by output names.
    [[nodiscard]] std::vector<std::string> channel_names() const;
};

struct Requirement {
    std::string id;
    Formula formula;
    std::string description;
};

struct SystemUnderTest {
    Plant plant;
    std::vector<Requirement> requirements;
    /// Falsification executions used when the configuration does not override them.
    std::size_t default_runs = 50;

    /// Throws ConfigError for an unknown id.
    [[nodiscard]] const Requirement &requirement(std::string_view id) const;
};

/// Samples [0, horizon] at plant.dt; records every input and output channel.
/// Throws SimulationDivergence when the state stops being finite.
[[nodiscard]] Trace simulate(const Plant &plant, const TestInput &input, double horizon);
[[nodiscard]] Trace simulate(const Plant &plant, const TestInput &input);

/// Simulates and evaluates phi at t = 0.
[[nodiscard]] Robustness evaluate(const Plant &plant, const Formula &phi, const TestInput &input);

/// Throws ConfigError if a requirement references a channel the plant lacks,
/// or its horizon exceeds the plant's.
void check_requirement(const Plant &plant, const Requirement &req);

/// Registry: AT, ACC, CC.
[[nodiscard]] const std::vector<SystemUnderTest> &builtin_plants();
/// Looks up a built-in plant by name; throws ConfigError when unknown.
[[nodiscard]] const SystemUnderTest &find_plant(std::string_view name);

/// Ground-truth plant for metric tests.
///
/// Signals s_0..s_{m-1}, each with `points` control points in [lo, hi] over a
/// horizon equal to `points` seconds, sampled every 0.25 s. The single output
/// `y` integrates the mean input so that y(horizon) equals the mean of all
/// control points exactly (segments align with the sample grid).
struct ToyPlantOptions {
    std::size_t signals = 1;
    std::size_t points = 4;
    double lo = 0.0;
    double hi = 10.0;
};
[[nodiscard]] Plant monotone_toy_plant(const ToyPlantOptions &options = {});

/// `always[0,h] (y < threshold)` on the toy plant: passes iff mean <= threshold.
[[nodiscard]] Requirement toy_requirement(const Plant &toy, double threshold);

} // namespace decaf
