#include "decaf/testgen.hpp"

#include "decaf/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace decaf {

void SAParams::validate() const {
    if (!(initial_temp > 0.0)) {
        throw ConfigError("initial temperature must be positive");
    }
    if (!(cooling_rate > 0.0 && cooling_rate < 1.0)) {
        throw ConfigError("cooling rate must lie in (0,1)");
    }
    if (!(tweak_strength > 0.0 && tweak_strength <= 1.0)) {
        throw ConfigError("tweak strength must lie in (0,1]");
    }
}

std::string_view to_string(Retention r) { return r == Retention::Best ? "best" : "all-evaluated"; }

Retention parse_retention(std::string_view text) {
    if (text == "best") {
        return Retention::Best;
    }
    if (text == "all-evaluated") {
        return Retention::AllEvaluated;
    }
    throw ConfigError("retention must be 'best' or 'all-evaluated', got '" + std::string(text) + "'");
}

TrainingSet::TrainingSet(InputSpec spec, std::vector<LabeledInput> rows)
    : spec_(std::move(spec)), rows_(std::move(rows)) {
    for (const auto &r : rows_) {
        if (r.input.size() != spec_.dimension()) {
            throw DomainError("training row does not match the input spec");
        }
        if (r.verdict != verdict(r.robustness)) {
            throw DomainError("training row verdict disagrees with its robustness");
        }
    }
}

std::size_t TrainingSet::fail_count() const {
    return static_cast<std::size_t>(std::count_if(
        rows_.begin(), rows_.end(), [](const LabeledInput &r) { return r.verdict == Verdict::Fail; }));
}

std::string TrainingSet::to_csv() const {
    std::string out = test_input_csv_header(spec_) + ",robustness,verdict\n";
    for (const auto &r : rows_) {
        out += test_input_csv_row(r.input);
        out += ',' + format_double(r.robustness) + ',' + std::string(to_string(r.verdict)) + '\n';
    }
    return out;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

} // namespace

TrainingSet TrainingSet::from_csv(const InputSpec &spec, std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            nl = text.size();
        }
        std::string_view line = text.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (!line.empty()) {
            lines.push_back(line);
        }
        start = nl + 1;
    }
    if (lines.empty()) {
        throw ConfigError("training-set CSV is empty");
    }
    const std::string expected = test_input_csv_header(spec) + ",robustness,verdict";
    if (lines.front() != expected) {
        throw ConfigError("training-set CSV header does not match the input spec: expected '" +
                          expected + "'");
    }
    std::vector<LabeledInput> rows;
    const std::size_t d = spec.dimension();
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto fields = split_fields(lines[i]);
        if (fields.size() != d + 2) {
            throw ConfigError("training-set CSV row " + std::to_string(i) + " has " +
                              std::to_string(fields.size()) + " fields, expected " +
                              std::to_string(d + 2));
        }
        std::vector<double> values(d);
        for (std::size_t j = 0; j < d; ++j) {
            values[j] = parse_double(fields[j]);
        }
        LabeledInput row;
        row.input = TestInput(spec, std::move(values));
        row.robustness = parse_double(fields[d]);
        row.verdict = parse_verdict(fields[d + 1]);
        rows.push_back(std::move(row));
    }
    return TrainingSet(spec, std::move(rows));
}

TestInput tweak(const TestInput &input, const InputSpec &spec, double strength, Rng &rng) {
    std::vector<double> values = input.features();
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] += noise(rng) * strength * spec.feature_width(i);
    }
    return TestInput(spec, clamp_to_range(spec, std::move(values)));
}

AnnealingRun simulated_annealing(const Plant &plant, const Formula &phi, const SAParams &params,
                                 Rng &rng) {
    params.validate();
    const InputSpec &spec = plant.input_spec;
    AnnealingRun run;
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    TestInput u = random_input(spec, rng);
    double rb = evaluate(plant, phi, u).value;
    run.evaluated.push_back({u, rb, verdict(rb)});
    const double scale = rb != 0.0 ? std::abs(rb) : 1.0;

    TestInput best = u;
    double rb_best = rb;
    run.best_history.push_back(rb_best);
    double temp = params.initial_temp;

    for (std::size_t i = 0; i < params.max_iters; ++i) {
        TestInput candidate = tweak(u, spec, params.tweak_strength, rng);
        const double rb_candidate = evaluate(plant, phi, candidate).value;
        run.evaluated.push_back({candidate, rb_candidate, verdict(rb_candidate)});

        const double delta = (rb_candidate - rb) / scale;
        if (rb_candidate < rb || unit(rng) < std::exp(-delta / temp)) {
            u = std::move(candidate);
            rb = rb_candidate;
        }
        if (rb < rb_best) {
            best = u;
            rb_best = rb;
        }
        run.best_history.push_back(rb_best);
        temp *= params.cooling_rate;
    }
    run.best = {std::move(best), rb_best, verdict(rb_best)};
    return run;
}

TrainingSet build_training_set(const Plant &plant, const Formula &phi,
                               const TrainingSetOptions &options) {
    if (options.runs < 1) {
        throw ConfigError("at least one SA run is required");
    }
    options.sa.validate();
    std::vector<AnnealingRun> runs(options.runs);
    parallel_for(options.runs, [&](std::size_t r) {
        Rng rng(derive_seed(options.seed, "testgen", r));
        runs[r] = simulated_annealing(plant, phi, options.sa, rng);
    });

    std::vector<LabeledInput> rows;
    for (auto &run : runs) {
        if (options.retain == Retention::Best) {
            rows.push_back(std::move(run.best));
        } else {
            for (auto &row : run.evaluated) {
                rows.push_back(std::move(row));
            }
        }
    }
    TrainingSet ts(plant.input_spec, std::move(rows));
    if (ts.fail_count() == 0) {
        throw NothingToExplain("no failing input found for '" + phi.to_string() + "' on plant '" +
                               plant.name + "' after " + std::to_string(options.runs) + " runs");
    }
    return ts;
}

} // namespace decaf
