#include "decaf/pipeline.hpp"

#include "decaf/error.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace decaf {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------- configuration

void RunConfig::validate() const {
    const SystemUnderTest &sut = find_plant(plant);
    check_requirement(sut.plant, sut.requirement(requirement));
    if (runs && *runs < 1) {
        throw ConfigError("testgen.runs must be at least 1");
    }
    sa.validate();
    if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
        throw ConfigError("learn.holdout_fraction must lie in [0,1)");
    }
    cf.validate(sut.plant.input_spec.dimension());
    if (model.forest.n_trees < 1) {
        throw ConfigError("learn.forest.n_trees must be at least 1");
    }
    if (!(thresholds.small <= thresholds.medium && thresholds.medium <= thresholds.large)) {
        throw ConfigError("eval.effect_thresholds must be ascending");
    }
}

namespace {

json m5_to_json(const M5Params &p) {
    return {{"min_leaf", p.min_leaf},
            {"min_split", p.min_split},
            {"min_sd_fraction", p.min_sd_fraction},
            {"max_depth", p.max_depth},
            {"prune", p.prune},
            {"leaf_model", p.leaf_model == LeafModel::Linear ? "linear" : "constant"}};
}

/// Reads known keys of one section, rejecting anything else.
class Section {
  public:
    Section(const json &j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) {
            throw ConfigError("config section '" + name_ + "' must be an object");
        }
    }

    template <typename T> void get(const char *key, T &out) {
        seen_.insert(key);
        if (!j_.contains(key)) {
            return;
        }
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception &e) {
            throw ConfigError("config key '" + name_ + "." + key + "': " + e.what());
        }
    }

    [[nodiscard]] const json *child(const char *key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    void finish() const {
        for (const auto &[k, v] : j_.items()) {
            if (seen_.count(k) == 0) {
                throw ConfigError("unknown config key '" + (name_.empty() ? k : name_ + "." + k) + "'");
            }
        }
    }

  private:
    const json &j_;
    std::string name_;
    std::set<std::string> seen_;
};

void m5_from_json(const json &j, const std::string &name, M5Params &p) {
    Section s(j, name);
    s.get("min_leaf", p.min_leaf);
    s.get("min_split", p.min_split);
    s.get("min_sd_fraction", p.min_sd_fraction);
    s.get("max_depth", p.max_depth);
    s.get("prune", p.prune);
    std::string leaf = p.leaf_model == LeafModel::Linear ? "linear" : "constant";
    s.get("leaf_model", leaf);
    if (leaf == "linear") {
        p.leaf_model = LeafModel::Linear;
    } else if (leaf == "constant") {
        p.leaf_model = LeafModel::Constant;
    } else {
        throw ConfigError(name + ".leaf_model must be 'linear' or 'constant'");
    }
    s.finish();
}

} // namespace

json config_to_json(const RunConfig &c) {
    json gens = json::array();
    for (Generator g : c.eval_generators) {
        gens.push_back(std::string(to_string(g)));
    }
    json models = json::array();
    for (ModelKind m : c.eval_models) {
        models.push_back(std::string(to_string(m)));
    }
    json mask = nullptr;
    if (!c.cf.mutable_mask.empty()) {
        mask = json::array();
        for (bool b : c.cf.mutable_mask) {
            mask.push_back(b);
        }
    }
    return {
        {"seed", c.seed},
        {"plant", c.plant},
        {"requirement", c.requirement},
        {"out", c.out_dir.string()},
        {"testgen",
         {{"runs", c.runs ? json(*c.runs) : json(nullptr)},
          {"initial_temp", c.sa.initial_temp},
          {"cooling_rate", c.sa.cooling_rate},
          {"max_iters", c.sa.max_iters},
          {"tweak_strength", c.sa.tweak_strength},
          {"retain", std::string(to_string(c.retain))}}},
        {"learn",
         {{"model", std::string(to_string(c.model.kind))},
          {"target", std::string(to_string(c.model.target))},
          {"holdout_fraction", c.holdout_fraction},
          {"m5", m5_to_json(c.model.m5)},
          {"forest",
           {{"n_trees", c.model.forest.n_trees},
            {"max_features", c.model.forest.max_features},
            {"min_split", c.model.forest.min_split},
            {"bootstrap", c.model.forest.bootstrap}}}}},
        {"cfgen",
         {{"generator", std::string(to_string(c.generator))},
          {"k_max", c.cf.k_max},
          {"mutation_p", c.cf.mutation_p},
          {"crossover_p", c.cf.crossover_p},
          {"population", c.cf.population},
          {"generations", c.cf.generations},
          {"diversity_weight", c.cf.diversity_weight},
          {"mutation_sigma", c.cf.mutation_sigma},
          {"tournament_size", c.cf.tournament_size},
          {"ga_seed_rows", c.cf.ga_seed_rows},
          {"rs_rounds", c.cf.rs_rounds},
          {"rs_samples_per_round", c.cf.rs_samples_per_round},
          {"mutable_mask", mask}}},
        {"assertions", {{"contrast_size", c.infer.contrast_size}, {"m5", m5_to_json(c.infer.m5)}}},
        {"eval",
         {{"sufficiency_samples", c.sufficiency_samples},
          {"safety_samples", c.safety_samples},
          {"max_failing_inputs", c.max_failing_inputs},
          {"effect_thresholds",
           {{"small", c.thresholds.small}, {"medium", c.thresholds.medium}, {"large", c.thresholds.large}}},
          {"generators", gens},
          {"models", models}}},
    };
}

RunConfig config_from_json(const json &j, RunConfig c) {
    Section top(j, "");
    top.get("seed", c.seed);
    top.get("plant", c.plant);
    top.get("requirement", c.requirement);
    std::string out = c.out_dir.string();
    top.get("out", out);
    c.out_dir = out;

    if (const json *t = top.child("testgen")) {
        Section s(*t, "testgen");
        if (const json *r = s.child("runs")) {
            if (r->is_null()) {
                c.runs.reset();
            } else if (r->is_number_unsigned()) {
                c.runs = r->get<std::size_t>();
            } else {
                throw ConfigError("testgen.runs must be a non-negative integer or null");
            }
        }
        s.get("initial_temp", c.sa.initial_temp);
        s.get("cooling_rate", c.sa.cooling_rate);
        s.get("max_iters", c.sa.max_iters);
        s.get("tweak_strength", c.sa.tweak_strength);
        std::string retain(to_string(c.retain));
        s.get("retain", retain);
        c.retain = parse_retention(retain);
        s.finish();
    }
    if (const json *l = top.child("learn")) {
        Section s(*l, "learn");
        std::string kind(to_string(c.model.kind));
        s.get("model", kind);
        c.model.kind = parse_model_kind(kind);
        std::string target(to_string(c.model.target));
        s.get("target", target);
        c.model.target = parse_target_mode(target);
        s.get("holdout_fraction", c.holdout_fraction);
        if (const json *m = s.child("m5")) {
            m5_from_json(*m, "learn.m5", c.model.m5);
        }
        if (const json *f = s.child("forest")) {
            Section fs_(*f, "learn.forest");
            fs_.get("n_trees", c.model.forest.n_trees);
            fs_.get("max_features", c.model.forest.max_features);
            fs_.get("min_split", c.model.forest.min_split);
            fs_.get("bootstrap", c.model.forest.bootstrap);
            fs_.finish();
        }
        s.finish();
    }
    if (const json *g = top.child("cfgen")) {
        Section s(*g, "cfgen");
        std::string gen(to_string(c.generator));
        s.get("generator", gen);
        c.generator = parse_generator(gen);
        s.get("k_max", c.cf.k_max);
        s.get("mutation_p", c.cf.mutation_p);
        s.get("crossover_p", c.cf.crossover_p);
        s.get("population", c.cf.population);
        s.get("generations", c.cf.generations);
        s.get("diversity_weight", c.cf.diversity_weight);
        s.get("mutation_sigma", c.cf.mutation_sigma);
        s.get("tournament_size", c.cf.tournament_size);
        s.get("ga_seed_rows", c.cf.ga_seed_rows);
        s.get("rs_rounds", c.cf.rs_rounds);
        s.get("rs_samples_per_round", c.cf.rs_samples_per_round);
        if (const json *m = s.child("mutable_mask")) {
            c.cf.mutable_mask.clear();
            if (!m->is_null()) {
                try {
                    for (bool b : m->get<std::vector<bool>>()) {
                        c.cf.mutable_mask.push_back(b);
                    }
                } catch (const json::exception &e) {
                    throw ConfigError(std::string("cfgen.mutable_mask: ") + e.what());
                }
            }
        }
        s.finish();
    }
    if (const json *a = top.child("assertions")) {
        Section s(*a, "assertions");
        s.get("contrast_size", c.infer.contrast_size);
        if (const json *m = s.child("m5")) {
            m5_from_json(*m, "assertions.m5", c.infer.m5);
        }
        s.finish();
    }
    if (const json *e = top.child("eval")) {
        Section s(*e, "eval");
        s.get("sufficiency_samples", c.sufficiency_samples);
        s.get("safety_samples", c.safety_samples);
        s.get("max_failing_inputs", c.max_failing_inputs);
        if (const json *t = s.child("effect_thresholds")) {
            Section ts(*t, "eval.effect_thresholds");
            ts.get("small", c.thresholds.small);
            ts.get("medium", c.thresholds.medium);
            ts.get("large", c.thresholds.large);
            ts.finish();
        }
        std::vector<std::string> gens;
        s.get("generators", gens);
        if (!gens.empty()) {
            c.eval_generators.clear();
            for (const auto &g : gens) {
                c.eval_generators.push_back(parse_generator(g));
            }
        }
        std::vector<std::string> models;
        s.get("models", models);
        if (!models.empty()) {
            c.eval_models.clear();
            for (const auto &m : models) {
                c.eval_models.push_back(parse_model_kind(m));
            }
        }
        s.finish();
    }
    top.finish();
    return c;
}

RunConfig load_config(const fs::path &path) {
    json j;
    try {
        j = json::parse(read_text(path));
    } catch (const json::parse_error &e) {
        throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------- files

void write_text(const fs::path &path, const std::string &text) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write '" + path.string() + "'");
    }
    out << text;
    if (!out) {
        throw Error("failed writing '" + path.string() + "'");
    }
}

std::string read_text(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot read '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_json(const fs::path &path, const json &j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path &path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error &e) {
        throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

// ---------------------------------------------------------------- stages

namespace {

json config_echo(const RunConfig &c) {
    json j = config_to_json(c);
    j.erase("out");
    return j;
}

json sa_json(const SAParams &p) {
    return {{"initial_temp", p.initial_temp},
            {"cooling_rate", p.cooling_rate},
            {"max_iters", p.max_iters},
            {"tweak_strength", p.tweak_strength}};
}

json opt(const std::optional<double> &v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json &j) {
    return j.is_null() ? std::nullopt : std::optional<double>(j.get<double>());
}

/// Evenly spaced subset of the failing rows, at most `cap` (0 keeps all).
std::vector<std::size_t> sample_rows(const std::vector<std::size_t> &rows, std::size_t cap) {
    if (cap == 0 || rows.size() <= cap) {
        return rows;
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < cap; ++i) {
        out.push_back(rows[i * rows.size() / cap]);
    }
    return out;
}

} // namespace

GenResult run_gen(const RunConfig &c) {
    c.validate();
    const SystemUnderTest &sut = find_plant(c.plant);
    const Requirement &req = sut.requirement(c.requirement);
    TrainingSetOptions o;
    o.runs = c.runs.value_or(sut.default_runs);
    o.sa = c.sa;
    o.retain = c.retain;
    o.seed = c.seed;
    GenResult g;
    g.training_set = build_training_set(sut.plant, req.formula, o);
    json seeds = json::array();
    for (std::size_t r = 0; r < o.runs; ++r) {
        seeds.push_back(derive_seed(o.seed, "testgen", r));
    }
    g.manifest = {{"format", "decaf-gen-manifest"},
                  {"version", 1},
                  {"plant", sut.plant.name},
                  {"requirement", req.id},
                  {"formula", req.formula.to_string()},
                  {"seed", c.seed},
                  {"runs", o.runs},
                  {"run_seeds", seeds},
                  {"sa", sa_json(o.sa)},
                  {"retain", std::string(to_string(o.retain))},
                  {"rows", g.training_set.size()},
                  {"fail", g.training_set.fail_count()},
                  {"pass", g.training_set.pass_count()},
                  {"columns", g.training_set.spec().feature_names()}};
    return g;
}

TrainResult run_train(const RunConfig &c, const TrainingSet &ts) {
    const Dataset d = transform(ts);
    const Split split = stratified_split(d, c.holdout_fraction, c.seed);
    const Dataset train = d.subset(split.train);
    const Dataset holdout = d.subset(split.holdout);
    CausalModelParams p = c.model;
    p.forest.seed = derive_seed(c.seed, "forest", 0);
    TrainResult r{train_causal_model(train, p), {}, {}};
    json metrics{{"format", "decaf-train-metrics"},
                 {"version", 1},
                 {"model", std::string(to_string(p.kind))},
                 {"target", std::string(to_string(p.target))},
                 {"train_rows", train.size()},
                 {"holdout_rows", holdout.size()}};
    if (holdout.size() > 0) {
        r.holdout_metrics = classifier_metrics(r.model, holdout);
        metrics["accuracy"] = r.holdout_metrics.accuracy;
        metrics["recall"] = opt(r.holdout_metrics.recall);
        metrics["f1"] = opt(r.holdout_metrics.f1);
        metrics["confusion"] = {{"tp", r.holdout_metrics.tp},
                                {"fp", r.holdout_metrics.fp},
                                {"tn", r.holdout_metrics.tn},
                                {"fn", r.holdout_metrics.fn}};
    } else {
        metrics["accuracy"] = nullptr;
        metrics["recall"] = nullptr;
        metrics["f1"] = nullptr;
        metrics["confusion"] = nullptr;
    }
    if (p.kind == ModelKind::RandomForest) {
        metrics["oob_mse"] = opt(r.model.forest().oob_mse(train.X, regression_target(train, p.target)));
    } else {
        metrics["leaves"] = r.model.tree().leaf_count();
        metrics["depth"] = r.model.tree().depth();
    }
    r.metrics = std::move(metrics);
    return r;
}

ExplainResult run_explain(const RunConfig &c, const TrainingSet &ts, const CausalModel &cm) {
    c.validate();
    const SystemUnderTest &sut = find_plant(c.plant);
    const Requirement &req = sut.requirement(c.requirement);
    const Plant &plant = sut.plant;
    const InputSpec &spec = plant.input_spec;
    if (cm.dimension() != spec.dimension()) {
        throw ConfigError("model has " + std::to_string(cm.dimension()) + " features, plant '" + plant.name +
                          "' has " + std::to_string(spec.dimension()));
    }
    const Dataset d = transform(ts);
    const std::vector<std::size_t> fails = identify_failures(d);
    if (fails.empty()) {
        throw NothingToExplain("the training set has no failing rows");
    }
    const std::vector<std::size_t> rows = sample_rows(fails, c.max_failing_inputs);
    const PassingIndex index(d, spec);

    ConfigResult result;
    result.system = plant.name;
    result.requirement = req.id;
    result.generator = c.generator;
    result.model = cm.kind();
    result.ts_size = ts.size();
    result.n_fail = fails.size();
    result.records.resize(rows.size());
    std::vector<std::vector<Counterfactual>> all_candidates(rows.size());

    parallel_for(rows.size(), [&](std::size_t k) {
        const std::size_t row = rows[k];
        const std::vector<double> &x_f = d.X[row];
        InputRecord &rec = result.records[k];
        rec.row = row;
        rec.failing = TestInput(spec, x_f);
        rec.failing_robustness = d.y_rb[row];

        Rng rng(derive_seed(c.seed, "cfgen", row));
        std::vector<Candidate> cands;
        switch (c.generator) {
        case Generator::RS:
            cands = generate_rs(x_f, cm, spec, c.cf, rng);
            break;
        case Generator::GA: {
            std::vector<std::vector<double>> seeds;
            for (const Neighbor &nb : index.nearest(x_f, c.cf.ga_seed_rows)) {
                seeds.push_back(d.X[nb.row]);
            }
            cands = generate_ga(x_f, cm, spec, c.cf, rng, seeds).candidates;
            break;
        }
        case Generator::KD:
            cands = generate_kd(x_f, d, index, cm, c.cf.k_max);
            break;
        }
        std::vector<Counterfactual> cfs;
        for (const Candidate &cand : cands) {
            cfs.push_back(make_counterfactual(spec, rec.failing, cand));
        }
        validate(plant, req.formula, cfs);
        rec.generated = cfs.size();
        rec.valid = static_cast<std::size_t>(
            std::count_if(cfs.begin(), cfs.end(), [](const Counterfactual &cf) { return cf.valid(); }));
        const std::vector<Counterfactual> chosen = select(cfs, c.cf.k_max, spec);
        all_candidates[k] = std::move(cfs);

        Rng metric_rng(derive_seed(c.seed, "metrics", row));
        for (const Counterfactual &cf : chosen) {
            CounterfactualRecord cr;
            cr.cf = cf;
            cr.necessary = necessity(plant, req.formula, cf);
            cr.sufficiency = sufficiency(plant, req.formula, cf, c.sufficiency_samples, metric_rng);
            cr.explanation = explain_nl(cf, spec);
            rec.selected.push_back(std::move(cr));
        }
        if (chosen.empty()) {
            return;
        }
        std::vector<TestInput> contrast;
        for (std::size_t r : nearest_failing_rows(d, spec, x_f, c.infer.contrast_size + 1)) {
            if (r != row && contrast.size() < c.infer.contrast_size) {
                contrast.push_back(TestInput(spec, d.X[r]));
            }
        }
        const InferenceResult inf = infer(chosen, rec.failing, contrast, spec, c.infer);
        AssertionRecord ar;
        ar.assertion = inf.assertion;
        ar.uninformative = inf.uninformative;
        ar.predicate_count = inf.assertion.predicate_count();
        ar.g_score = g_score(inf.assertion, chosen, spec).value_or(0.0);
        double safety_sum = 0.0;
        std::size_t safety_n = 0;
        for (const Counterfactual &cf : chosen) {
            if (auto s = safety(plant, req.formula, inf.assertion, cf, c.safety_samples, metric_rng)) {
                safety_sum += *s;
                ++safety_n;
            }
        }
        if (safety_n > 0) {
            ar.safety = safety_sum / static_cast<double>(safety_n);
        }
        rec.assertion = std::move(ar);
    });

    ExplainResult out;
    const json header{{"system", result.system},
                      {"requirement", result.requirement},
                      {"formula", req.formula.to_string()},
                      {"generator", std::string(to_string(result.generator))},
                      {"model", std::string(to_string(result.model))},
                      {"ts_size", result.ts_size},
                      {"n_fail", result.n_fail}};

    json inputs = json::array();
    json assertion_inputs = json::array();
    Assertion merged;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const InputRecord &rec = result.records[k];
        json cands = json::array();
        for (const Counterfactual &cf : all_candidates[k]) {
            cands.push_back(to_json(cf, spec));
        }
        json selected = json::array();
        for (const CounterfactualRecord &cr : rec.selected) {
            json jc = to_json(cr.cf, spec);
            jc["necessary"] = cr.necessary;
            jc["sufficiency"] = opt(cr.sufficiency);
            jc["explanation"] = cr.explanation;
            selected.push_back(std::move(jc));
        }
        inputs.push_back({{"row", rec.row},
                          {"failing", rec.failing.features()},
                          {"failing_robustness", rec.failing_robustness},
                          {"generated", rec.generated},
                          {"valid", rec.valid},
                          {"candidates", std::move(cands)},
                          {"selected", std::move(selected)}});
        json ja{{"row", rec.row}};
        if (rec.assertion) {
            ja["assertion"] = to_json(rec.assertion->assertion, spec);
            ja["uninformative"] = rec.assertion->uninformative;
            ja["predicate_count"] = rec.assertion->predicate_count;
            ja["g_score"] = rec.assertion->g_score;
            ja["safety"] = opt(rec.assertion->safety);
            for (const auto &conj : rec.assertion->assertion.dnf) {
                merged.dnf.push_back(conj);
            }
        } else {
            ja["assertion"] = nullptr;
        }
        assertion_inputs.push_back(std::move(ja));
    }
    out.counterfactuals = header;
    out.counterfactuals["format"] = "decaf-counterfactuals";
    out.counterfactuals["version"] = 1;
    out.counterfactuals["inputs"] = std::move(inputs);
    out.assertions = header;
    out.assertions["format"] = "decaf-assertions";
    out.assertions["version"] = 1;
    out.assertions["inputs"] = std::move(assertion_inputs);
    out.assertions["merged"] = merged.dnf.empty() ? json(nullptr) : to_json(prune(merged, spec), spec);
    out.report = render_report(result, sut, req, config_echo(c));
    out.result = std::move(result);
    return out;
}

ConfigResult load_config_result(const json &cfj, const json &asj, const InputSpec &spec) {
    try {
        if (cfj.at("format").get<std::string>() != "decaf-counterfactuals" ||
            asj.at("format").get<std::string>() != "decaf-assertions") {
            throw ConfigError("not an explain artifact pair");
        }
        ConfigResult r;
        r.system = cfj.at("system").get<std::string>();
        r.requirement = cfj.at("requirement").get<std::string>();
        r.generator = parse_generator(cfj.at("generator").get<std::string>());
        r.model = parse_model_kind(cfj.at("model").get<std::string>());
        r.ts_size = cfj.at("ts_size").get<std::size_t>();
        r.n_fail = cfj.at("n_fail").get<std::size_t>();
        const json &ins = cfj.at("inputs");
        const json &ais = asj.at("inputs");
        if (ins.size() != ais.size()) {
            throw ConfigError("counterfactual and assertion files list different inputs");
        }
        for (std::size_t k = 0; k < ins.size(); ++k) {
            const json &ji = ins[k];
            InputRecord rec;
            rec.row = ji.at("row").get<std::size_t>();
            rec.failing = TestInput(spec, ji.at("failing").get<std::vector<double>>());
            rec.failing_robustness = ji.at("failing_robustness").get<double>();
            rec.generated = ji.at("generated").get<std::size_t>();
            rec.valid = ji.at("valid").get<std::size_t>();
            for (const json &jc : ji.at("selected")) {
                CounterfactualRecord cr;
                cr.cf = counterfactual_from_json(jc, spec);
                cr.necessary = jc.at("necessary").get<bool>();
                cr.sufficiency = opt_from(jc.at("sufficiency"));
                cr.explanation = jc.at("explanation").get<std::vector<std::string>>();
                rec.selected.push_back(std::move(cr));
            }
            const json &ja = ais[k];
            if (ja.at("row").get<std::size_t>() != rec.row) {
                throw ConfigError("counterfactual and assertion files are out of step");
            }
            if (!ja.at("assertion").is_null()) {
                AssertionRecord ar;
                ar.assertion = assertion_from_json(ja.at("assertion"), spec);
                ar.uninformative = ja.at("uninformative").get<bool>();
                ar.predicate_count = ja.at("predicate_count").get<std::size_t>();
                ar.g_score = ja.at("g_score").get<double>();
                ar.safety = opt_from(ja.at("safety"));
                rec.assertion = std::move(ar);
            }
            r.records.push_back(std::move(rec));
        }
        return r;
    } catch (const json::exception &e) {
        throw ConfigError(std::string("malformed explain artifacts: ") + e.what());
    }
}

// ---------------------------------------------------------------- reports

namespace {

std::string cell(const std::optional<double> &v, int decimals = 3) {
    return v ? format_fixed(*v, decimals) : "--";
}

std::string summary_table(const std::vector<ConfigResult> &results) {
    std::string md = "| Configuration | Explained | #CF | #Valid | Success | Relative | Necessity | Sufficiency | "
                     "Safety | Predicates | G-score |\n"
                     "|---|---|---|---|---|---|---|---|---|---|---|\n";
    for (const auto &r : results) {
        const GoodnessSummary g = summarize(r.records);
        md += "| " + r.label() + " | " + std::to_string(r.records.size()) + " | " + std::to_string(r.cf_count()) +
              " | " + std::to_string(r.valid_count()) + " | " + cell(success_rate(r.records)) + " | " +
              cell(relative_success_rate(r.records)) + " | " + cell(g.necessity) + " | " + cell(g.sufficiency) +
              " | " + cell(g.safety) + " | " + cell(g.predicates, 2) + " | " + cell(g.g_score) + " |\n";
    }
    return md;
}

std::string input_values(const TestInput &x, const InputSpec &spec) {
    std::string s;
    for (std::size_t k = 0; k < spec.signal_count(); ++k) {
        if (k > 0) {
            s += "; ";
        }
        s += spec.signal(k).name + " = [";
        const auto values = x.signal_values(spec, k);
        for (std::size_t j = 0; j < values.size(); ++j) {
            s += (j > 0 ? ", " : "") + format_fixed(values[j], 2);
        }
        s += "]";
    }
    return s;
}

} // namespace

std::string render_report(const ConfigResult &r, const SystemUnderTest &sut, const Requirement &req,
                          const json &config) {
    const InputSpec &spec = sut.plant.input_spec;
    std::string md = "# " + r.system + " / " + r.requirement + " with " + r.label() + "\n\n";
    md += "Requirement `" + req.formula.to_string() + "`";
    if (!req.description.empty()) {
        md += ": " + req.description;
    }
    md += ".\n\nTraining set: " + std::to_string(r.ts_size) + " rows, " + std::to_string(r.n_fail) +
          " failing; " + std::to_string(r.records.size()) + " failing inputs explained.\n\n";
    md += "## Summary\n\n" + summary_table({r}) + "\n";
    for (std::size_t k = 0; k < r.records.size(); ++k) {
        const InputRecord &rec = r.records[k];
        md += "## Failing input " + std::to_string(k + 1) + " (row " + std::to_string(rec.row) +
              ", robustness " + format_fixed(rec.failing_robustness, 3) + ")\n\n";
        md += input_values(rec.failing, spec) + "\n\n";
        md += std::to_string(rec.generated) + " candidates generated, " + std::to_string(rec.valid) +
              " confirmed passing by simulation.\n\n";
        for (std::size_t i = 0; i < rec.selected.size(); ++i) {
            const CounterfactualRecord &cr = rec.selected[i];
            md += "### Counterfactual " + std::to_string(i + 1) + "\n\n";
            md += "Robustness " + format_fixed(cr.cf.validated->robustness, 3) + ", proximity " +
                  format_fixed(cr.cf.proximity, 4) + ", necessary: " + (cr.necessary ? "yes" : "no") +
                  ", sufficiency: " + cell(cr.sufficiency) + ".\n\n";
            for (const std::string &line : cr.explanation) {
                md += "- " + line + "\n";
            }
            md += "\n";
        }
        if (rec.assertion) {
            const Assertion &a = rec.assertion->assertion;
            md += "### Success assertion\n\n";
            md += "Control points: " + render_control_points(a, spec) + " ⇒ pass\n\n";
            md += "Signals: " + translate(a, spec).render_unicode(spec) + "\n\n";
            md += "Predicates " + std::to_string(rec.assertion->predicate_count) + ", G-score " +
                  format_fixed(rec.assertion->g_score, 3) + ", safety " + cell(rec.assertion->safety) +
                  (rec.assertion->uninformative ? ", uninformative (tree did not separate)" : "") + ".\n\n";
        } else {
            md += "No valid counterfactual, so no assertion.\n\n";
        }
    }
    md += "## Configuration\n\n```json\n" + config.dump(2) + "\n```\n";
    return md;
}

std::string render_summary_report(const std::vector<ConfigResult> &results, const SystemUnderTest &sut,
                                  const Requirement &req) {
    const InputSpec &spec = sut.plant.input_spec;
    std::string md = "# " + sut.plant.name + " / " + req.id + "\n\n";
    md += "Requirement `" + req.formula.to_string() + "`.\n\n";
    if (results.empty()) {
        return md + "No explain results found.\n";
    }
    md += "## Configurations\n\n" + summary_table(results) + "\n";
    md += "## Merged success assertions\n\n";
    for (const auto &r : results) {
        Assertion merged;
        for (const auto &rec : r.records) {
            if (rec.assertion) {
                for (const auto &c : rec.assertion->assertion.dnf) {
                    merged.dnf.push_back(c);
                }
            }
        }
        md += "### " + r.label() + "\n\n";
        if (merged.dnf.empty()) {
            md += "No assertion inferred.\n\n";
            continue;
        }
        const Assertion pruned = prune(merged, spec);
        md += translate(pruned, spec).render_unicode(spec) + "\n\n";
    }
    return md;
}

fs::path explain_dir(const RunConfig &c, Generator g, ModelKind m) {
    return c.out_dir / "explain" / (std::string(to_string(g)) + "-" + std::string(to_string(m)));
}

std::vector<fs::path> stage_gen(const RunConfig &c) {
    const GenResult g = run_gen(c);
    const fs::path csv = c.out_dir / "training_set.csv";
    const fs::path manifest = c.out_dir / "gen_manifest.json";
    write_text(csv, g.training_set.to_csv());
    write_json(manifest, g.manifest);
    return {csv, manifest};
}

namespace {

TrainingSet load_training_set(const RunConfig &c) {
    const SystemUnderTest &sut = find_plant(c.plant);
    return TrainingSet::from_csv(sut.plant.input_spec, read_text(c.out_dir / "training_set.csv"));
}

fs::path model_path(const RunConfig &c, ModelKind m) {
    return c.out_dir / ("model-" + std::string(to_string(m)) + ".json");
}

} // namespace

std::vector<fs::path> stage_train(const RunConfig &c) {
    c.validate();
    const TrainResult r = run_train(c, load_training_set(c));
    const fs::path model = model_path(c, c.model.kind);
    const fs::path metrics = c.out_dir / ("train_metrics-" + std::string(to_string(c.model.kind)) + ".json");
    write_json(model, r.model.to_json());
    write_json(metrics, r.metrics);
    return {model, metrics};
}

std::vector<fs::path> stage_explain(const RunConfig &c) {
    c.validate();
    const fs::path mp = model_path(c, c.model.kind);
    if (!fs::exists(mp)) {
        throw ConfigError("no trained model at '" + mp.string() + "'; run train first");
    }
    const CausalModel cm = CausalModel::from_json(read_json(mp));
    const ExplainResult r = run_explain(c, load_training_set(c), cm);
    const fs::path dir = explain_dir(c, c.generator, c.model.kind);
    write_json(dir / "counterfactuals.json", r.counterfactuals);
    write_json(dir / "assertions.json", r.assertions);
    write_text(dir / "report.md", r.report);
    return {dir / "counterfactuals.json", dir / "assertions.json", dir / "report.md"};
}

namespace {

std::vector<ConfigResult> load_results(const RunConfig &c, const fs::path &root) {
    const SystemUnderTest &sut = find_plant(c.plant);
    std::vector<ConfigResult> out;
    for (Generator g : c.eval_generators) {
        for (ModelKind m : c.eval_models) {
            const fs::path dir = root / "explain" / (std::string(to_string(g)) + "-" + std::string(to_string(m)));
            if (!fs::exists(dir / "counterfactuals.json") || !fs::exists(dir / "assertions.json")) {
                continue;
            }
            const json cfj = read_json(dir / "counterfactuals.json");
            const SystemUnderTest &owner = find_plant(cfj.at("system").get<std::string>());
            (void)sut;
            out.push_back(load_config_result(cfj, read_json(dir / "assertions.json"), owner.plant.input_spec));
        }
    }
    return out;
}

/// The output directory itself and its immediate subdirectories that hold explain results.
std::vector<fs::path> result_roots(const fs::path &out) {
    std::vector<fs::path> roots;
    if (fs::exists(out / "explain")) {
        roots.push_back(out);
    }
    if (fs::exists(out)) {
        std::vector<fs::path> subs;
        for (const auto &e : fs::directory_iterator(out)) {
            if (e.is_directory() && fs::exists(e.path() / "explain")) {
                subs.push_back(e.path());
            }
        }
        std::sort(subs.begin(), subs.end());
        roots.insert(roots.end(), subs.begin(), subs.end());
    }
    return roots;
}

} // namespace

std::vector<fs::path> stage_eval(const RunConfig &c) {
    std::vector<ConfigResult> all;
    for (const fs::path &root : result_roots(c.out_dir)) {
        for (auto &r : load_results(c, root)) {
            all.push_back(std::move(r));
        }
    }
    if (all.empty()) {
        throw ConfigError("no explain results under '" + c.out_dir.string() + "'; run explain first");
    }
    const ResultTables t = build_tables(all, c.thresholds);
    const fs::path dir = c.out_dir / "eval";
    write_text(dir / "counts.csv", t.counts_csv);
    write_text(dir / "success.csv", t.success_csv);
    write_text(dir / "comparison.csv", t.comparison_csv);
    write_text(dir / "goodness.csv", t.goodness_csv);
    write_json(dir / "tables.json", t.json);
    return {dir / "counts.csv", dir / "success.csv", dir / "comparison.csv", dir / "goodness.csv",
            dir / "tables.json"};
}

std::vector<fs::path> stage_report(const RunConfig &c) {
    c.validate();
    const SystemUnderTest &sut = find_plant(c.plant);
    const Requirement &req = sut.requirement(c.requirement);
    const fs::path path = c.out_dir / "report.md";
    write_text(path, render_summary_report(load_results(c, c.out_dir), sut, req));
    return {path};
}

} // namespace decaf
