#include "decaf/error.hpp"
#include "decaf/plants.hpp"
#include "decaf/testgen.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace decaf;

TEST(Tweak, HalfNormalDisplacement) {
    // Mid-range values with a small sigma are practically never clamped, so the
    // absolute displacement is half-normal with mean sigma * sqrt(2 / pi).
    const Plant toy = monotone_toy_plant({.signals = 1, .points = 4, .lo = 0.0, .hi = 10.0});
    const TestInput mid(toy.input_spec, std::vector<double>(4, 5.0));
    Rng rng(1);
    const double strength = 0.02;
    const double sigma = strength * 10.0;
    double sum = 0.0;
    double sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const TestInput t = tweak(mid, toy.input_spec, strength, rng);
        const double d = t[i % 4] - 5.0;
        sum += std::abs(d);
        sq += d * d;
    }
    const double mean_abs = sum / n;
    const double expected = sigma * std::sqrt(2.0 / M_PI);
    const double sd = sigma * std::sqrt(1.0 - 2.0 / M_PI) / std::sqrt(static_cast<double>(n));
    EXPECT_NEAR(mean_abs, expected, 4.0 * sd);
    EXPECT_NEAR(std::sqrt(sq / n), sigma, 0.02 * sigma);
}

TEST(Tweak, StaysInRange) {
    const Plant toy = monotone_toy_plant();
    const TestInput edge(toy.input_spec, {0.0, 10.0, 0.0, 10.0});
    Rng rng(2);
    for (int i = 0; i < 1000; ++i) {
        const TestInput t = tweak(edge, toy.input_spec, 0.5, rng);
        for (double v : t.features()) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 10.0);
        }
    }
}

TEST(Annealing, RunLogOracle) {
    const auto &at = find_plant("AT");
    const auto &phi = at.requirement("AT1").formula;
    SAParams p;
    p.max_iters = 60;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed);
        const AnnealingRun run = simulated_annealing(at.plant, phi, p, rng);
        ASSERT_EQ(run.evaluated.size(), p.max_iters + 1);
        ASSERT_EQ(run.best_history.size(), p.max_iters + 1);
        double prefix_min = run.evaluated[0].robustness;
        std::size_t argmin = 0;
        for (std::size_t k = 0; k < run.evaluated.size(); ++k) {
            const auto &row = run.evaluated[k];
            EXPECT_EQ(row.verdict, verdict(row.robustness));
            EXPECT_EQ(row.robustness, evaluate(at.plant, phi, row.input).value);
            if (row.robustness < prefix_min) {
                prefix_min = row.robustness;
                argmin = k;
            }
            // Any candidate below the best so far is necessarily accepted.
            EXPECT_EQ(run.best_history[k], prefix_min);
        }
        EXPECT_EQ(run.best.robustness, prefix_min);
        EXPECT_EQ(run.best.input, run.evaluated[argmin].input);
    }
}

TEST(Annealing, ParameterValidation) {
    SAParams p;
    p.cooling_rate = 1.5;
    EXPECT_THROW(p.validate(), ConfigError);
    p = {};
    p.initial_temp = 0.0;
    EXPECT_THROW(p.validate(), ConfigError);
    p = {};
    p.tweak_strength = -1.0;
    EXPECT_THROW(p.validate(), ConfigError);
}

TEST(TrainingSet, RetentionAndDeterminism) {
    const auto &at = find_plant("AT");
    const auto &phi = at.requirement("AT1").formula;
    TrainingSetOptions o;
    o.runs = 4;
    o.sa.max_iters = 150;
    const TrainingSet all = build_training_set(at.plant, phi, o);
    EXPECT_EQ(all.size(), 4u * 151u);
    EXPECT_EQ(all.to_csv(), build_training_set(at.plant, phi, o).to_csv());
    EXPECT_EQ(all.fail_count() + all.pass_count(), all.size());

    o.retain = Retention::Best;
    const TrainingSet best = build_training_set(at.plant, phi, o);
    ASSERT_EQ(best.size(), 4u);
    // The best row of each run is the minimum of that run's block of evaluated rows.
    for (std::size_t r = 0; r < 4; ++r) {
        double m = 1e300;
        for (std::size_t k = 0; k < 151; ++k) {
            m = std::min(m, all.rows()[r * 151 + k].robustness);
        }
        EXPECT_EQ(best.rows()[r].robustness, m);
    }
}

TEST(TrainingSet, CsvRoundTrip) {
    const auto &acc = find_plant("ACC");
    TrainingSetOptions o;
    o.runs = 2;
    o.sa.max_iters = 20;
    const TrainingSet ts = build_training_set(acc.plant, acc.requirement("ACC1").formula, o);
    const std::string csv = ts.to_csv();
    const TrainingSet back = TrainingSet::from_csv(acc.plant.input_spec, csv);
    ASSERT_EQ(back.size(), ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
        EXPECT_EQ(back.rows()[i].input, ts.rows()[i].input);
        EXPECT_EQ(back.rows()[i].robustness, ts.rows()[i].robustness);
        EXPECT_EQ(back.rows()[i].verdict, ts.rows()[i].verdict);
    }
    EXPECT_EQ(back.to_csv(), csv);
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "a_lead_cp0,a_lead_cp1,a_lead_cp2,a_lead_cp3,a_lead_cp4,a_lead_cp5,a_lead_cp6,a_lead_cp7,"
              "a_lead_cp8,a_lead_cp9,robustness,verdict");
}

TEST(TrainingSet, CsvRejectsSchemaMismatch) {
    const auto &at = find_plant("AT");
    const auto &acc = find_plant("ACC");
    TrainingSetOptions o;
    o.runs = 2;
    o.sa.max_iters = 20;
    const TrainingSet ts = build_training_set(acc.plant, acc.requirement("ACC1").formula, o);
    EXPECT_THROW((void)TrainingSet::from_csv(at.plant.input_spec, ts.to_csv()), ConfigError);
    std::string broken = ts.to_csv();
    broken += "1,2,3\n";
    EXPECT_THROW((void)TrainingSet::from_csv(acc.plant.input_spec, broken), ConfigError);
}

TEST(TrainingSet, VerdictMustMatchRobustness) {
    const Plant toy = monotone_toy_plant();
    const TestInput x(toy.input_spec, std::vector<double>(4, 1.0));
    EXPECT_THROW(TrainingSet(toy.input_spec, {{x, -1.0, Verdict::Pass}}), DomainError);
    EXPECT_NO_THROW(TrainingSet(toy.input_spec, {{x, 0.0, Verdict::Pass}}));
}

TEST(TrainingSet, UnfalsifiableRequirementHasNothingToExplain) {
    const Plant toy = monotone_toy_plant({.signals = 1, .points = 4, .lo = 0.0, .hi = 10.0});
    TrainingSetOptions o;
    o.runs = 2;
    o.sa.max_iters = 10;
    EXPECT_THROW((void)build_training_set(toy, toy_requirement(toy, 11.0).formula, o), NothingToExplain);
}

TEST(TrainingSet, RetentionNames) {
    EXPECT_EQ(parse_retention("best"), Retention::Best);
    EXPECT_EQ(parse_retention("all-evaluated"), Retention::AllEvaluated);
    EXPECT_EQ(to_string(Retention::AllEvaluated), "all-evaluated");
    EXPECT_THROW((void)parse_retention("some"), ConfigError);
}
