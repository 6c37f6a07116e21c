#include "decaf/assertions.hpp"
#include "decaf/error.hpp"
#include "decaf/eval.hpp"
#include "decaf/plants.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace decaf;

namespace {

InputSpec at_spec() {
    return InputSpec({{"Throttle", 7, 0.0, 100.0, 50.0, Interpolation::PiecewiseConstant},
                      {"Brake", 3, 0.0, 325.0, 50.0, Interpolation::PiecewiseConstant}});
}

Assertion worked_example() {
    Assertion a;
    a.dnf = {{{{0, 0}, Op::Le, 54.5}, {{0, 5}, Op::Le, 59.3}, {{1, 1}, Op::Ge, 212.3}}};
    return a;
}

/// Small spec whose ranges are multiples of the probe grid.
InputSpec grid_spec() {
    return InputSpec({{"u", 3, 0.0, 4.0, 6.0, Interpolation::PiecewiseConstant},
                      {"v", 2, 0.0, 4.0, 6.0, Interpolation::PiecewiseConstant}});
}

double grid_value(Rng &rng) { return 0.5 * std::uniform_int_distribution<int>(0, 8)(rng); }

Predicate random_predicate(const InputSpec &spec, Rng &rng) {
    const std::size_t f = std::uniform_int_distribution<std::size_t>(0, spec.dimension() - 1)(rng);
    const auto op = static_cast<Op>(std::uniform_int_distribution<int>(0, 5)(rng));
    // Bounds may fall outside the range to exercise range-implied predicates.
    const double bound = 0.5 * std::uniform_int_distribution<int>(-1, 9)(rng);
    return {spec.control_point(f), op, bound};
}

Assertion random_assertion(const InputSpec &spec, Rng &rng) {
    Assertion a;
    const int n = std::uniform_int_distribution<int>(0, 4)(rng);
    for (int i = 0; i < n; ++i) {
        Conjunction c;
        const int m = std::uniform_int_distribution<int>(0, 4)(rng);
        for (int j = 0; j < m; ++j) {
            c.push_back(random_predicate(spec, rng));
        }
        a.dnf.push_back(std::move(c));
    }
    return a;
}

TestInput grid_input(const InputSpec &spec, Rng &rng) {
    std::vector<double> v(spec.dimension());
    for (double &x : v) {
        x = grid_value(rng);
    }
    return TestInput(spec, v);
}

} // namespace

TEST(Operators, SymbolsAndComparison) {
    EXPECT_EQ(ascii_symbol(Op::Le), "<=");
    EXPECT_EQ(unicode_symbol(Op::Ge), "≥");
    EXPECT_EQ(unicode_symbol(Op::Ne), "≠");
    EXPECT_EQ(parse_op(">="), Op::Ge);
    EXPECT_EQ(parse_op("≤"), Op::Le);
    EXPECT_THROW((void)parse_op("=>"), ConfigError);
    EXPECT_TRUE(compare(1.0, Op::Le, 1.0));
    EXPECT_FALSE(compare(1.0, Op::Lt, 1.0));
    EXPECT_TRUE(compare(1.0, Op::Ne, 2.0));
}

TEST(Translation, WorkedExample) {
    const InputSpec spec = at_spec();
    const TemporalAssertion t = translate(worked_example(), spec);
    EXPECT_EQ(t.render_ascii(spec),
              "(forall t in [0,7.14]: Throttle(t) <= 54.50) and (forall t in [35.71,42.86]: Throttle(t) <= "
              "59.30) and (forall t in [16.67,33.33]: Brake(t) >= 212.30)");
    EXPECT_EQ(t.render_unicode(spec),
              "(∀t ∈ [0,7.14]: Throttle(t) ≤ 54.50) ∧ (∀t ∈ [35.71,42.86]: Throttle(t) ≤ 59.30) ∧ "
              "(∀t ∈ [16.67,33.33]: Brake(t) ≥ 212.30)");
    EXPECT_EQ(render_control_points(worked_example(), spec),
              "(c_{Throttle,1} ≤ 54.50) ∧ (c_{Throttle,6} ≤ 59.30) ∧ (c_{Brake,2} ≥ 212.30)");
}

TEST(Translation, AdjacentClausesMerge) {
    const InputSpec spec = at_spec();
    Assertion a;
    a.dnf = {{{{0, 1}, Op::Le, 40.0}, {{0, 2}, Op::Le, 40.0}, {{0, 4}, Op::Le, 40.0}}};
    const TemporalAssertion t = translate(a, spec);
    ASSERT_EQ(t.disjuncts.size(), 1u);
    ASSERT_EQ(t.disjuncts[0].size(), 2u);
    EXPECT_NEAR(t.disjuncts[0][0].interval.lo, 50.0 / 7.0, 1e-12);
    EXPECT_NEAR(t.disjuncts[0][0].interval.hi, 150.0 / 7.0, 1e-12);
}

TEST(Translation, TrivialAssertions) {
    const InputSpec spec = at_spec();
    Assertion t;
    t.dnf = {{}};
    EXPECT_TRUE(t.is_trivial());
    EXPECT_EQ(translate(t, spec).render_ascii(spec), "true");
    EXPECT_TRUE(covers(t, TestInput(spec, std::vector<double>(10, 1.0)), spec));
    const Assertion none;
    EXPECT_FALSE(covers(none, TestInput(spec, std::vector<double>(10, 1.0)), spec));
}

TEST(Translation, HoldsAgreesWithCovers) {
    const InputSpec spec = grid_spec();
    Rng rng(21);
    for (int i = 0; i < 500; ++i) {
        const Assertion a = random_assertion(spec, rng);
        const TemporalAssertion t = translate(a, spec);
        for (int j = 0; j < 20; ++j) {
            const TestInput x = grid_input(spec, rng);
            ASSERT_EQ(holds(t, x, spec), covers(a, x, spec));
        }
    }
}

TEST(Prune, PreservesMembership) {
    const InputSpec spec = grid_spec();
    Rng rng(22);
    for (int i = 0; i < 1000; ++i) {
        const Assertion a = random_assertion(spec, rng);
        const Assertion p = prune(a, spec);
        EXPECT_LE(p.dnf.size(), a.dnf.size());
        for (int j = 0; j < 40; ++j) {
            const TestInput x = grid_input(spec, rng);
            ASSERT_EQ(covers(a, x, spec), covers(p, x, spec));
        }
        // Pruning twice changes nothing further.
        EXPECT_EQ(prune(p, spec), p);
    }
}

TEST(Prune, ConjunctionSimplifications) {
    const InputSpec spec = grid_spec();
    Assertion a;
    a.dnf = {{{{0, 0}, Op::Le, 3.0}, {{0, 0}, Op::Le, 2.0}, {{1, 0}, Op::Le, 4.0}}};
    Assertion want;
    want.dnf = {{{{0, 0}, Op::Le, 2.0}}};
    EXPECT_EQ(prune(a, spec), want);

    Assertion unsat;
    unsat.dnf = {{{{0, 0}, Op::Le, 1.0}, {{0, 0}, Op::Gt, 2.0}}};
    EXPECT_TRUE(prune(unsat, spec).dnf.empty());

    Assertion implied;
    implied.dnf = {{{{0, 0}, Op::Le, 1.0}, {{0, 1}, Op::Ge, 2.0}}, {{{0, 0}, Op::Le, 2.0}}};
    EXPECT_EQ(prune(implied, spec), (Assertion{{{{{0, 0}, Op::Le, 2.0}}}, Verdict::Pass}));

    Assertion abutting;
    abutting.dnf = {{{{0, 0}, Op::Le, 1.0}}, {{{0, 0}, Op::Gt, 1.0}, {{0, 0}, Op::Le, 3.0}}};
    EXPECT_EQ(prune(abutting, spec), (Assertion{{{{{0, 0}, Op::Le, 3.0}}}, Verdict::Pass}));
}

TEST(Explanation, NaturalLanguageLines) {
    const InputSpec spec = at_spec();
    std::vector<double> before(10, 80.0);
    std::vector<double> after = before;
    after[0] = 54.5;
    after[8] = 212.3;
    Counterfactual cf = make_counterfactual(spec, TestInput(spec, before), {after, {}});
    const auto lines = explain_nl(cf, spec);
    ASSERT_EQ(lines.size(), 2u);
    EXPECT_EQ(lines[0], "Input Throttle at time [0.0–7.1s] changed from 80.00 to 54.50");
    EXPECT_EQ(lines[1], "Input Brake at time [16.7–33.3s] changed from 80.00 to 212.30");
}

TEST(Inference, CoversEveryCounterfactual) {
    const Plant toy = monotone_toy_plant({.signals = 2, .points = 3, .lo = 0.0, .hi = 10.0});
    const InputSpec &spec = toy.input_spec;
    Rng rng(23);
    for (int trial = 0; trial < 50; ++trial) {
        const TestInput failing = random_input(spec, rng);
        std::vector<Counterfactual> cfs;
        const int n = std::uniform_int_distribution<int>(1, 7)(rng);
        for (int i = 0; i < n; ++i) {
            cfs.push_back(make_counterfactual(spec, failing, {random_input(spec, rng).features(), {}}));
        }
        std::vector<TestInput> contrast;
        for (int i = 0; i < 30; ++i) {
            contrast.push_back(random_input(spec, rng));
        }
        const InferenceResult r = infer(cfs, failing, contrast, spec);
        EXPECT_EQ(g_score(r.assertion, cfs, spec), 1.0);
        EXPECT_EQ(r.assertion, prune(r.assertion, spec));
        if (!r.uninformative) {
            EXPECT_FALSE(covers(r.assertion, failing, spec));
        }
    }
}

TEST(Inference, RequiresCounterfactuals) {
    const InputSpec spec = at_spec();
    const TestInput x(spec, std::vector<double>(10, 1.0));
    EXPECT_THROW((void)infer({}, x, {}, spec), DomainError);
}

TEST(Inference, NearestFailingRows) {
    const InputSpec spec = grid_spec();
    Dataset d;
    d.feature_names = spec.feature_names();
    d.X = {std::vector<double>(5, 1.0), std::vector<double>(5, 2.0), std::vector<double>(5, 0.0),
           std::vector<double>(5, 1.0)};
    d.y_rb = {-1.0, -1.0, 1.0, -2.0};
    d.y_label = {Verdict::Fail, Verdict::Fail, Verdict::Pass, Verdict::Fail};
    const auto rows = nearest_failing_rows(d, spec, std::vector<double>(5, 0.0), 2);
    EXPECT_EQ(rows, (std::vector<std::size_t>{0, 3}));
}

TEST(AssertionJson, RoundTrip) {
    const InputSpec spec = at_spec();
    const Assertion a = worked_example();
    EXPECT_EQ(assertion_from_json(nlohmann::json::parse(to_json(a, spec).dump()), spec), a);
    EXPECT_EQ(a.predicate_count(), 3u);
}
