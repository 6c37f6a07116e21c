#pragma once

/**
 * @file testgen.hpp
 * @brief Simulated-annealing falsification that produces labeled training inputs.
 */

#include "decaf/plants.hpp"
#include "decaf/signals.hpp"
#include "decaf/stl.hpp"
#include "decaf/util.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace decaf {

struct SAParams {
    double initial_temp = 1.0;
    double cooling_rate = 0.97;
    std::size_t max_iters = 300;
    /// Gaussian tweak sigma as a fraction of each signal's range width.
    double tweak_strength = 0.1;

    void validate() const;
};

struct LabeledInput {
    TestInput input;
    double robustness = 0.0;
    Verdict verdict = Verdict::Pass;
};

/// One SA execution: the best input plus every simulated candidate in order.
struct AnnealingRun {
    LabeledInput best;
    std::vector<LabeledInput> evaluated;
    /// Best-so-far robustness after initialization and after each iteration.
    std::vector<double> best_history;
};

enum class Retention { Best, AllEvaluated };

[[nodiscard]] std::string_view to_string(Retention r);
[[nodiscard]] Retention parse_retention(std::string_view text);

class TrainingSet {
  public:
    TrainingSet() = default;
    TrainingSet(InputSpec spec, std::vector<LabeledInput> rows);

    [[nodiscard]] const InputSpec &spec() const { return spec_; }
    [[nodiscard]] const std::vector<LabeledInput> &rows() const { return rows_; }
    [[nodiscard]] std::size_t size() const { return rows_.size(); }
    [[nodiscard]] std::size_t fail_count() const;
    [[nodiscard]] std::size_t pass_count() const { return size() - fail_count(); }

    /// Header `<signal>_cp<j>...,robustness,verdict`.
    [[nodiscard]] std::string to_csv() const;
    /// Parses a CSV written by to_csv; the header must match `spec` exactly.
    [[nodiscard]] static TrainingSet from_csv(const InputSpec &spec, std::string_view text);

  private:
    InputSpec spec_;
    std::vector<LabeledInput> rows_;
};

/// Zero-mean Gaussian noise with sigma = strength * range width per control point,
/// then clamped to the range.
[[nodiscard]] TestInput tweak(const TestInput &input, const InputSpec &spec, double strength,
                              Rng &rng);

/// Robustness-minimizing simulated annealing.
///
/// Uphill moves are accepted with probability exp(-(rb' - rb) / t) where the
/// robustness difference is divided by |rb| of the initial sample (1 if zero),
/// so that one temperature schedule fits every requirement scale.
[[nodiscard]] AnnealingRun simulated_annealing(const Plant &plant, const Formula &phi,
                                               const SAParams &params, Rng &rng);

struct TrainingSetOptions {
    std::size_t runs = 50;
    SAParams sa;
    Retention retain = Retention::AllEvaluated;
    std::uint64_t seed = 17;
};

/// Independent SA executions with derived per-run seeds, aggregated in run order.
/// Throws NothingToExplain when no row fails.
[[nodiscard]] TrainingSet build_training_set(const Plant &plant, const Formula &phi,
                                             const TrainingSetOptions &options);

} // namespace decaf
