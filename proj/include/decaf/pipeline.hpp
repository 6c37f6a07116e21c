#pragma once

/**
 * @file pipeline.hpp
 * @brief Configuration, end-to-end stages and on-disk artifacts behind the CLI.
 *
 * Layout under the output directory:
 *
 *     training_set.csv, gen_manifest.json            gen
 *     model-<m5|rf>.json, train_metrics-<m5|rf>.json train
 *     explain/<gen>-<model>/{counterfactuals.json,
 *                            assertions.json, report.md}  explain
 *     eval/{counts,success,comparison,goodness}.csv,
 *          tables.json                               eval
 *     report.md                                      report
 */

#include "decaf/assertions.hpp"
#include "decaf/cfgen.hpp"
#include "decaf/eval.hpp"
#include "decaf/learn.hpp"
#include "decaf/plants.hpp"
#include "decaf/testgen.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace decaf {

struct RunConfig {
    std::string plant = "AT";
    std::string requirement = "AT1";
    std::uint64_t seed = 17;

    /// nullopt uses the plant's default execution count.
    std::optional<std::size_t> runs;
    SAParams sa;
    Retention retain = Retention::AllEvaluated;

    CausalModelParams model;
    double holdout_fraction = 0.2;

    Generator generator = Generator::KD;
    CFParams cf;

    InferParams infer;

    std::size_t sufficiency_samples = 50;
    std::size_t safety_samples = 50;
    /// Failing inputs explained per configuration; 0 explains all of them.
    std::size_t max_failing_inputs = 60;
    EffectThresholds thresholds;
    std::vector<Generator> eval_generators{Generator::GA, Generator::KD, Generator::RS};
    std::vector<ModelKind> eval_models{ModelKind::M5, ModelKind::RandomForest};

    std::filesystem::path out_dir = "out";

    /// Throws ConfigError for an unknown plant/requirement or an invalid parameter.
    void validate() const;
};

/// Sectioned JSON with every default filled in.
[[nodiscard]] nlohmann::json config_to_json(const RunConfig &c);
/// Overlays `j` on `base`; unknown keys are rejected.
[[nodiscard]] RunConfig config_from_json(const nlohmann::json &j, RunConfig base = {});
[[nodiscard]] RunConfig load_config(const std::filesystem::path &path);

struct GenResult {
    TrainingSet training_set;
    nlohmann::json manifest;
};

[[nodiscard]] GenResult run_gen(const RunConfig &c);

struct TrainResult {
    CausalModel model;
    ClassifierMetrics holdout_metrics;
    nlohmann::json metrics;
};

/// Trains on the stratified training split and scores the holdout split.
[[nodiscard]] TrainResult run_train(const RunConfig &c, const TrainingSet &ts);

struct ExplainResult {
    ConfigResult result;
    nlohmann::json counterfactuals;
    nlohmann::json assertions;
    std::string report;
};

/// Identify failures, generate, validate, select, infer and translate, plus the
/// goodness metrics of every selected counterfactual and assertion.
/// Throws NothingToExplain when the training set has no failing row.
[[nodiscard]] ExplainResult run_explain(const RunConfig &c, const TrainingSet &ts, const CausalModel &cm);

/// Rebuilds the configuration result from the two explain documents.
[[nodiscard]] ConfigResult load_config_result(const nlohmann::json &counterfactuals,
                                              const nlohmann::json &assertions, const InputSpec &spec);

/// Markdown for one configuration.
[[nodiscard]] std::string render_report(const ConfigResult &r, const SystemUnderTest &sut,
                                        const Requirement &req, const nlohmann::json &config);
/// Markdown over every configuration found, with the merged per-requirement assertion.
[[nodiscard]] std::string render_summary_report(const std::vector<ConfigResult> &results,
                                                const SystemUnderTest &sut, const Requirement &req);

// File-level stages used by the CLI.

[[nodiscard]] std::filesystem::path explain_dir(const RunConfig &c, Generator g, ModelKind m);

void write_text(const std::filesystem::path &path, const std::string &text);
[[nodiscard]] std::string read_text(const std::filesystem::path &path);
void write_json(const std::filesystem::path &path, const nlohmann::json &j);
[[nodiscard]] nlohmann::json read_json(const std::filesystem::path &path);

/// Each returns the paths it wrote.
std::vector<std::filesystem::path> stage_gen(const RunConfig &c);
std::vector<std::filesystem::path> stage_train(const RunConfig &c);
std::vector<std::filesystem::path> stage_explain(const RunConfig &c);
std::vector<std::filesystem::path> stage_eval(const RunConfig &c);
std::vector<std::filesystem::path> stage_report(const RunConfig &c);

} // namespace decaf
