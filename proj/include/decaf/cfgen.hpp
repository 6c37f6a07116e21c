#pragma once

/**
 * @file cfgen.hpp
 * @brief Counterfactual search around failing inputs: random search, a genetic
 * algorithm, and nearest passing training rows, followed by simulator replay.
 */

#include "decaf/learn.hpp"
#include "decaf/plants.hpp"
#include "decaf/signals.hpp"
#include "decaf/util.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace decaf {

/// Mean over features of |a_i - b_i| / width_i.
[[nodiscard]] double proximity(std::span<const double> a, std::span<const double> b,
                               const InputSpec &spec);

/// Mean pairwise proximity; 0 for fewer than two members.
[[nodiscard]] double diversity(const std::vector<std::vector<double>> &members, const InputSpec &spec);

enum class Generator { RS, GA, KD };
[[nodiscard]] std::string_view to_string(Generator g);
/// Accepts "rs", "ga", "kd" (either case).
[[nodiscard]] Generator parse_generator(std::string_view text);

struct CFParams {
    std::size_t k_max = 7;
    double mutation_p = 0.1;
    double crossover_p = 0.5;
    std::size_t population = 50;
    std::size_t generations = 50;
    double diversity_weight = 0.1;
    std::uint64_t seed = 17;
    /// One flag per feature; empty means every feature is mutable.
    std::vector<bool> mutable_mask;

    std::size_t rs_rounds = 10;
    std::size_t rs_samples_per_round = 50;
    /// GA mutation sigma as a fraction of range width.
    double mutation_sigma = 0.1;
    std::size_t tournament_size = 2;
    /// Passing training rows nearest to the failing input placed in the initial GA population.
    std::size_t ga_seed_rows = 7;

    /// Throws ConfigError on an invalid setting.
    void validate(std::size_t dimension) const;
    [[nodiscard]] bool is_mutable(std::size_t feature) const;
};

/// A generator output before simulator replay.
struct Candidate {
    std::vector<double> features;
    Prediction predicted;
};

[[nodiscard]] std::vector<Candidate> generate_rs(std::span<const double> x_f, const CausalModel &cm,
                                                 const InputSpec &spec, const CFParams &p, Rng &rng);

struct GAResult {
    std::vector<Candidate> candidates;
    /// Smallest proximity among feasible members seen after each generation
    /// (index 0 is the initial population); nullopt until one is found.
    std::vector<std::optional<double>> best_proximity;
};

/// `seeds` are placed in the initial population (frozen features reset to x_f).
[[nodiscard]] GAResult generate_ga(std::span<const double> x_f, const CausalModel &cm,
                                   const InputSpec &spec, const CFParams &p, Rng &rng,
                                   const std::vector<std::vector<double>> &seeds = {});

struct Neighbor {
    std::size_t row = 0;
    double distance = 0.0;

    friend bool operator==(const Neighbor &, const Neighbor &) = default;
};

/// KD-tree over the passing rows of a dataset, queried with the proximity metric.
class PassingIndex {
  public:
    PassingIndex(const Dataset &d, const InputSpec &spec, std::size_t leaf_size = 8);

    [[nodiscard]] std::size_t size() const { return rows_.size(); }
    /// The k nearest passing rows ordered by (distance, row index); all of them when fewer exist.
    [[nodiscard]] std::vector<Neighbor> nearest(std::span<const double> x, std::size_t k) const;

  private:
    struct Node {
        std::size_t begin = 0;
        std::size_t end = 0;
        int left = -1;
        int right = -1;
        std::vector<double> box_lo;
        std::vector<double> box_hi;
    };

    int build(std::size_t begin, std::size_t end, std::size_t leaf_size);
    [[nodiscard]] double lower_bound(const Node &n, std::span<const double> x) const;

    const Dataset *data_;
    const InputSpec *spec_;
    std::vector<std::size_t> rows_;
    std::vector<Node> nodes_;
};

/// Nearest passing rows as candidates, each with the model's prediction attached.
[[nodiscard]] std::vector<Candidate> generate_kd(std::span<const double> x_f, const Dataset &d,
                                                 const PassingIndex &index, const CausalModel &cm,
                                                 std::size_t k);

struct Validation {
    double robustness = 0.0;
    Verdict verdict = Verdict::Fail;
    /// Set when the replay could not be completed.
    std::optional<std::string> diagnostic;
};

struct Counterfactual {
    TestInput original;
    TestInput modified;
    std::vector<ControlPoint> changed_points;
    Prediction predicted;
    std::optional<Validation> validated;
    double proximity = 0.0;

    [[nodiscard]] bool valid() const {
        return validated && !validated->diagnostic && validated->verdict == Verdict::Pass;
    }
};

/// Control points whose values differ by more than `tolerance`, ordered by (signal, index).
[[nodiscard]] std::vector<ControlPoint> changed_points(const TestInput &original,
                                                       const TestInput &modified,
                                                       const InputSpec &spec,
                                                       double tolerance = 1e-9);

[[nodiscard]] Counterfactual make_counterfactual(const InputSpec &spec, const TestInput &original,
                                                 const Candidate &candidate);

/// Replays every counterfactual; a diverging simulation leaves it invalid with a diagnostic.
void validate(const Plant &plant, const Formula &phi, std::vector<Counterfactual> &cfs);

/// Valid counterfactuals only, greedily ordered by proximity, then by marginal
/// diversity with the already-selected ones (larger first), then by feature vector;
/// at most k_max.
[[nodiscard]] std::vector<Counterfactual> select(std::vector<Counterfactual> cfs, std::size_t k_max,
                                                 const InputSpec &spec);

[[nodiscard]] nlohmann::json to_json(const Counterfactual &cf, const InputSpec &spec);
[[nodiscard]] Counterfactual counterfactual_from_json(const nlohmann::json &j, const InputSpec &spec);

} // namespace decaf
