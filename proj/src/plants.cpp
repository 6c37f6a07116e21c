#include "decaf/plants.hpp"

#include "decaf/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace decaf {

std::vector<std::string> Plant::channel_names() const {
    std::vector<std::string> names;
    for (const auto &s : input_spec.signals()) {
        names.push_back(s.name);
    }
    names.insert(names.end(), output_names.begin(), output_names.end());
    return names;
}

const Requirement &SystemUnderTest::requirement(std::string_view id) const {
    for (const auto &r : requirements) {
        if (r.id == id) {
            return r;
        }
    }
    throw ConfigError("plant '" + plant.name + "' has no requirement '" + std::string(id) + "'");
}

Trace simulate(const Plant &plant, const TestInput &input, double horizon) {
    const InputSpec &spec = plant.input_spec;
    if (input.size() != spec.dimension()) {
        throw DomainError("input dimension does not match plant '" + plant.name + "'");
    }
    if (!(horizon > 0.0) || horizon > spec.horizon() + 1e-9) {
        throw DomainError("simulation horizon must lie in (0, " + format_double(spec.horizon()) +
                          "]");
    }
    const auto steps = static_cast<std::size_t>(std::llround(horizon / plant.dt));
    const std::size_t n_in = spec.signal_count();
    const std::size_t n_out = plant.output_names.size();

    std::vector<std::vector<double>> channels(n_in + n_out, std::vector<double>(steps + 1));
    std::vector<double> state = plant.initial_state;
    std::vector<double> u(n_in);
    std::vector<double> y(n_out);

    for (std::size_t k = 0; k <= steps; ++k) {
        const double t = static_cast<double>(k) * plant.dt;
        const double tc = std::min(t, spec.horizon());
        for (std::size_t s = 0; s < n_in; ++s) {
            u[s] = input[spec.offset(s) + segment_of(spec.signal(s), tc)];
            channels[s][k] = u[s];
        }
        plant.outputs(state, u, y);
        for (std::size_t o = 0; o < n_out; ++o) {
            if (!std::isfinite(y[o])) {
                throw SimulationDivergence(plant.name, t);
            }
            channels[n_in + o][k] = y[o];
        }
        if (k < steps) {
            plant.step(state, u, plant.dt);
            for (double v : state) {
                if (!std::isfinite(v)) {
                    throw SimulationDivergence(plant.name, t + plant.dt);
                }
            }
        }
    }
    return Trace(plant.dt, plant.channel_names(), std::move(channels));
}

Trace simulate(const Plant &plant, const TestInput &input) {
    return simulate(plant, input, plant.input_spec.horizon());
}

Robustness evaluate(const Plant &plant, const Formula &phi, const TestInput &input) {
    return robustness(phi, simulate(plant, input));
}

void check_requirement(const Plant &plant, const Requirement &req) {
    const auto names = plant.channel_names();
    for (const auto &ch : req.formula.channels()) {
        if (std::find(names.begin(), names.end(), ch) == names.end()) {
            throw ConfigError("requirement '" + req.id + "' references channel '" + ch +
                              "' unknown to plant '" + plant.name + "'");
        }
    }
    if (req.formula.horizon() > plant.input_spec.horizon() + 1e-9) {
        throw ConfigError("requirement '" + req.id + "' needs a longer horizon than plant '" +
                          plant.name + "' simulates");
    }
}

namespace {

Requirement make_requirement(std::string id, std::string_view text, std::string description) {
    return {std::move(id), parse_formula(text), std::move(description)};
}

// Automatic transmission.
//   state: engine speed w [rpm], vehicle speed v [m/s]
//   gear g(v): 1 below 8 m/s, 2 below 16, 3 below 24, else 4; ratio r = {1, .72, .52, .38}
//   v' = 3.2 * thr * r(g) - 7 * brk - 0.0009 v^2          (v >= 0)
//   w' = (w* - w) / 1.5,  w* = clamp(800 + 3700 thr + 50 v - 1200 brk, 800, 6500)
// with thr = Throttle/100 and brk = Brake/325.
SystemUnderTest make_at() {
    Plant p;
    p.name = "AT";
    p.description = "automatic transmission surrogate: engine-speed lag with a 4-gear schedule";
    p.input_spec = InputSpec({{"Throttle", 7, 0.0, 100.0, 50.0, Interpolation::PiecewiseConstant},
                              {"Brake", 3, 0.0, 325.0, 50.0, Interpolation::PiecewiseConstant}});
    p.initial_state = {800.0, 0.0};
    p.dt = 0.01;
    static constexpr std::array<double, 4> ratio{1.0, 0.72, 0.52, 0.38};
    static constexpr auto gear_of = [](double v) -> std::size_t {
        return v < 8.0 ? 0 : v < 16.0 ? 1 : v < 24.0 ? 2 : 3;
    };
    p.step = [](std::span<double> x, std::span<const double> u, double dt) {
        const double thr = u[0] / 100.0;
        const double brk = u[1] / 325.0;
        const double w = x[0];
        const double v = x[1];
        const double accel = 3.2 * thr * ratio[gear_of(v)] - 7.0 * brk - 0.0009 * v * v;
        const double target = std::clamp(800.0 + 3700.0 * thr + 50.0 * v - 1200.0 * brk, 800.0,
                                         6500.0);
        x[0] = w + dt * (target - w) / 1.5;
        x[1] = std::max(0.0, v + dt * accel);
    };
    p.output_names = {"RPM", "Speed", "Gear"};
    p.outputs = [](std::span<const double> x, std::span<const double>, std::span<double> y) {
        y[0] = x[0];
        y[1] = x[1];
        y[2] = static_cast<double>(gear_of(x[1]) + 1);
    };
    SystemUnderTest sut{std::move(p), {}};
    sut.requirements.push_back(make_requirement(
        "AT1", "always[0,10] (RPM < 4750)", "engine speed stays below 4750 rpm for 10 s"));
    sut.requirements.push_back(make_requirement("AT2", "always[0,50] (Speed < 30)",
                                                "surrogate addition: vehicle speed below 30 m/s"));
    return sut;
}

// Adaptive cruise control.
//   state: lead position/speed, ego position/speed; d_rel = x_lead - x_ego
//   lead: v_lead' = a_lead, clamped to [0, 35]
//   ego:  a = clamp(min(0.25 (d_rel - d_des) + 0.8 (v_lead - v_ego), 0.5 (25 - v_ego)), -2.2, 1.5)
//         d_des = 55 + 0.6 v_ego
// Initial gap 70 m, both cars at 20 m/s.
SystemUnderTest make_acc() {
    Plant p;
    p.name = "ACC";
    p.description = "adaptive cruise control surrogate: proportional gap controller behind a lead car";
    p.input_spec = InputSpec({{"a_lead", 10, -3.0, 2.0, 50.0, Interpolation::PiecewiseConstant}});
    p.initial_state = {70.0, 20.0, 0.0, 20.0};
    p.dt = 0.01;
    p.step = [](std::span<double> x, std::span<const double> u, double dt) {
        const double d_rel = x[0] - x[2];
        const double d_des = 55.0 + 0.6 * x[3];
        const double cmd = std::min(0.25 * (d_rel - d_des) + 0.8 * (x[1] - x[3]),
                                    0.5 * (25.0 - x[3]));
        const double a_ego = std::clamp(cmd, -2.2, 1.5);
        x[0] += dt * x[1];
        x[1] = std::clamp(x[1] + dt * u[0], 0.0, 35.0);
        x[2] += dt * x[3];
        x[3] = std::max(0.0, x[3] + dt * a_ego);
    };
    p.output_names = {"d_rel", "v_ego", "v_lead"};
    p.outputs = [](std::span<const double> x, std::span<const double>, std::span<double> y) {
        y[0] = x[0] - x[2];
        y[1] = x[3];
        y[2] = x[1];
    };
    SystemUnderTest sut{std::move(p), {}, 30};
    sut.requirements.push_back(make_requirement("ACC1", "always[0,50] (d_rel >= 50)",
                                                "relative distance stays above d_safe = 50 m"));
    sut.requirements.push_back(make_requirement(
        "ACC2", "always[0,50] (d_rel <= 120)",
        "surrogate addition: ego keeps up, relative distance below 120 m"));
    return sut;
}

// Chasing cars: a lead car driven by throttle/brake and four followers.
//   lead:     v1' = 4 thr - 7 brk - 0.002 v1^2      (v1 >= 0)
//   follower: vi' = clamp(0.6 (y_{i-1} - y_i - 10) + 1.2 (v_{i-1} - v_i), -7, 3)   (vi >= 0)
// Initial positions 40, 30, 20, 10, 0 m, all at 10 m/s. Gap channels are
// gap_{i-1,i} = y_{i-1} - y_i.
SystemUnderTest make_cc() {
    Plant p;
    p.name = "CC";
    p.description = "chasing cars surrogate: lead car and four followers with fixed spacing";
    p.input_spec = InputSpec({{"Throttle", 5, 0.0, 1.0, 50.0, Interpolation::PiecewiseConstant},
                              {"Brake", 5, 0.0, 1.0, 50.0, Interpolation::PiecewiseConstant}});
    p.initial_state = {40.0, 30.0, 20.0, 10.0, 0.0, 10.0, 10.0, 10.0, 10.0, 10.0};
    p.dt = 0.01;
    p.step = [](std::span<double> x, std::span<const double> u, double dt) {
        std::array<double, 5> acc{};
        acc[0] = 4.0 * u[0] - 7.0 * u[1] - 0.002 * x[5] * x[5];
        for (std::size_t i = 1; i < 5; ++i) {
            const double gap = x[i - 1] - x[i];
            acc[i] = std::clamp(0.6 * (gap - 10.0) + 1.2 * (x[5 + i - 1] - x[5 + i]), -7.0, 3.0);
        }
        for (std::size_t i = 0; i < 5; ++i) {
            x[i] += dt * x[5 + i];
        }
        for (std::size_t i = 0; i < 5; ++i) {
            x[5 + i] = std::max(0.0, x[5 + i] + dt * acc[i]);
        }
    };
    p.output_names = {"y1", "y2", "y3", "y4", "y5", "gap12", "gap23", "gap34", "gap45"};
    p.outputs = [](std::span<const double> x, std::span<const double>, std::span<double> y) {
        for (std::size_t i = 0; i < 5; ++i) {
            y[i] = x[i];
        }
        for (std::size_t i = 0; i < 4; ++i) {
            y[5 + i] = x[i] - x[i + 1];
        }
    };
    SystemUnderTest sut{std::move(p), {}};
    sut.requirements.push_back(make_requirement(
        "CC1", "always[0,50] (gap45 <= 20)",
        "toolkit configuration: the last follower never trails by more than 20 m"));
    sut.requirements.push_back(make_requirement(
        "CC2", "always[0,50] (gap12 >= 6)",
        "toolkit configuration: the first follower keeps at least 6 m to the lead"));
    return sut;
}

} // namespace

const std::vector<SystemUnderTest> &builtin_plants() {
    static const std::vector<SystemUnderTest> plants = [] {
        std::vector<SystemUnderTest> out;
        out.push_back(make_at());
        out.push_back(make_acc());
        out.push_back(make_cc());
        return out;
    }();
    return plants;
}

const SystemUnderTest &find_plant(std::string_view name) {
    for (const auto &sut : builtin_plants()) {
        if (sut.plant.name == name) {
            return sut;
        }
    }
    throw ConfigError("unknown plant '" + std::string(name) + "'");
}

Plant monotone_toy_plant(const ToyPlantOptions &options) {
    if (options.signals < 1 || options.points < 1) {
        throw DomainError("toy plant needs at least one signal and one control point");
    }
    // y must be nondecreasing in t for the closed form to hold.
    if (options.lo < 0.0 || !(options.lo < options.hi)) {
        throw DomainError("toy plant range must be non-negative and non-empty");
    }
    Plant p;
    p.name = "TOY";
    p.description = "monotone toy plant: y(horizon) equals the mean of all control points";
    const double horizon = static_cast<double>(options.points);
    std::vector<SignalSpec> signals;
    for (std::size_t s = 0; s < options.signals; ++s) {
        signals.push_back({"s" + std::to_string(s), options.points, options.lo, options.hi, horizon,
                           Interpolation::PiecewiseConstant});
    }
    p.input_spec = InputSpec(std::move(signals));
    p.initial_state = {0.0};
    p.dt = 0.25;
    const double m = static_cast<double>(options.signals);
    p.step = [m, horizon](std::span<double> x, std::span<const double> u, double dt) {
        double sum = 0.0;
        for (double v : u) {
            sum += v;
        }
        x[0] += (sum / m) * (dt / horizon);
    };
    p.output_names = {"y"};
    p.outputs = [](std::span<const double> x, std::span<const double>, std::span<double> y) {
        y[0] = x[0];
    };
    return p;
}

Requirement toy_requirement(const Plant &toy, double threshold) {
    const double h = toy.input_spec.horizon();
    return {"TOY1",
            Formula::always(0.0, h, Formula::atom("y", Comparison::Less, threshold)),
            "mean of the control points stays below " + format_double(threshold)};
}

} // namespace decaf
