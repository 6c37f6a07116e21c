// decaf: falsify, learn, explain and evaluate requirement failures of the
// built-in plants. See README.md for the workflow.

#include "decaf/error.hpp"
#include "decaf/pipeline.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace {

using decaf::RunConfig;

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> plant;
    std::optional<std::string> requirement;
    std::optional<std::string> generator;
    std::optional<std::string> model;
    std::optional<std::string> out;
    std::optional<std::string> retain;
};

void add_common(CLI::App *cmd, Overrides &o) {
    cmd->add_option("--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--plant", o.plant, "built-in plant (AT, ACC, CC)");
    cmd->add_option("--requirement", o.requirement, "requirement id, e.g. AT1");
    cmd->add_option("--generator", o.generator, "counterfactual generator")
        ->check(CLI::IsMember({"rs", "ga", "kd"}, CLI::ignore_case));
    cmd->add_option("--model", o.model, "causal model")->check(CLI::IsMember({"m5", "rf"}, CLI::ignore_case));
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--retain", o.retain, "training-set retention")
        ->check(CLI::IsMember({"best", "all-evaluated"}));
}

RunConfig resolve(const Overrides &o) {
    RunConfig c = o.config.empty() ? RunConfig{} : decaf::load_config(o.config);
    if (o.seed) {
        c.seed = *o.seed;
    }
    if (o.plant) {
        c.plant = *o.plant;
        // A plant switch without a requirement picks that plant's first one.
        if (!o.requirement) {
            c.requirement = decaf::find_plant(c.plant).requirements.front().id;
        }
    }
    if (o.requirement) {
        c.requirement = *o.requirement;
    }
    if (o.generator) {
        c.generator = decaf::parse_generator(*o.generator);
    }
    if (o.model) {
        c.model.kind = decaf::parse_model_kind(*o.model);
    }
    if (o.out) {
        c.out_dir = *o.out;
    }
    if (o.retain) {
        c.retain = decaf::parse_retention(*o.retain);
    }
    c.validate();
    return c;
}

int run_stage(const char *name, const Overrides &o,
              std::vector<std::filesystem::path> (*stage)(const RunConfig &)) {
    const auto start = std::chrono::steady_clock::now();
    const RunConfig c = resolve(o);
    for (const auto &p : stage(c)) {
        std::cout << "wrote " << p.string() << "\n";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << name << " finished in " << decaf::format_fixed(secs, 2) << " s" << std::endl;
    return 0;
}

void list_plants() {
    for (const auto &sut : decaf::builtin_plants()) {
        const auto &spec = sut.plant.input_spec;
        std::cout << sut.plant.name << ": " << sut.plant.description << "\n";
        for (std::size_t k = 0; k < spec.signal_count(); ++k) {
            const auto &s = spec.signal(k);
            std::cout << "  input " << s.name << " in [" << decaf::format_trimmed(s.range_lo, 3) << ", "
                      << decaf::format_trimmed(s.range_hi, 3) << "], " << s.n_points << " control points\n";
        }
        for (const auto &r : sut.requirements) {
            std::cout << "  " << r.id << ": " << r.formula.to_string() << "\n";
        }
    }
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Counterfactual explanations and success assertions for CPS requirement failures"};
    app.require_subcommand(1);

    Overrides o;
    auto *gen = app.add_subcommand("gen", "falsify a requirement and write the labelled training set");
    auto *train = app.add_subcommand("train", "fit the causal model on the training set");
    auto *explain = app.add_subcommand("explain", "explain every sampled failing input");
    auto *eval = app.add_subcommand("eval", "build metric tables over all explained configurations");
    auto *report = app.add_subcommand("report", "write the summary report");
    for (auto *cmd : {gen, train, explain, eval, report}) {
        add_common(cmd, o);
    }
    auto *plants = app.add_subcommand("plants", "built-in plants");
    plants->require_subcommand(1);
    auto *plants_list = plants->add_subcommand("list", "list plants, inputs and requirements");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*gen) {
            return run_stage("gen", o, decaf::stage_gen);
        }
        if (*train) {
            return run_stage("train", o, decaf::stage_train);
        }
        if (*explain) {
            return run_stage("explain", o, decaf::stage_explain);
        }
        if (*eval) {
            return run_stage("eval", o, decaf::stage_eval);
        }
        if (*report) {
            return run_stage("report", o, decaf::stage_report);
        }
        if (*plants_list) {
            list_plants();
            return 0;
        }
    } catch (const decaf::ConfigError &e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const decaf::NothingToExplain &e) {
        std::cerr << "nothing to explain: " << e.what() << "\n";
        return 3;
    } catch (const decaf::SimulationDivergence &e) {
        std::cerr << "simulation diverged: " << e.what() << "\n";
        return 4;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
