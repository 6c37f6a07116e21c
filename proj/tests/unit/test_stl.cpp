#include "decaf/error.hpp"
#include "decaf/stl.hpp"
#include "decaf/util.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace decaf;

namespace {

Trace constant_rpm(double v, double seconds = 12.0, double dt = 0.5) {
    const auto n = static_cast<std::size_t>(seconds / dt) + 1;
    return Trace(dt, {"RPM"}, {std::vector<double>(n, v)});
}

} // namespace

TEST(StlParse, RequirementsOfThePlants) {
    const Formula at1 = parse_formula("always[0,10] (RPM < 4750)");
    EXPECT_EQ(at1.kind(), Formula::Kind::Always);
    EXPECT_EQ(at1.lower(), 0.0);
    EXPECT_EQ(at1.upper(), 10.0);
    EXPECT_EQ(at1.children()[0], Formula::atom("RPM", Comparison::Less, 4750));

    const Formula acc = parse_formula("always[0,50] (d_rel >= 50)");
    EXPECT_EQ(acc, Formula::always(0, 50, Formula::atom("d_rel", Comparison::GreaterEqual, 50)));
}

TEST(StlParse, RedundantParentheses) {
    EXPECT_EQ(parse_formula("((x > 0))"), parse_formula("x > 0"));
}

TEST(StlParse, PrecedenceAndAssociativity) {
    const Formula f = parse_formula("a > 0 or b > 0 and c > 0 -> d > 0");
    ASSERT_EQ(f.kind(), Formula::Kind::Implies);
    EXPECT_EQ(f.children()[0].kind(), Formula::Kind::Or);
    EXPECT_EQ(f.children()[0].children()[1].kind(), Formula::Kind::And);
    const Formula u = parse_formula("not a < 1 until[0,2] b >= 2");
    ASSERT_EQ(u.kind(), Formula::Kind::Until);
    EXPECT_EQ(u.children()[0].kind(), Formula::Kind::Not);
}

TEST(StlParse, PrintParseFixedPoint) {
    Rng rng(11);
    for (int i = 0; i < 300; ++i) {
        const Formula f = oracle::random_formula(rng, 3);
        const Formula g = parse_formula(f.to_string());
        EXPECT_EQ(f, g) << f.to_string();
        EXPECT_EQ(g.to_string(), f.to_string());
    }
}

TEST(StlParse, Errors) {
    EXPECT_THROW((void)parse_formula(""), ParseError);
    EXPECT_THROW((void)parse_formula("x >"), ParseError);
    EXPECT_THROW((void)parse_formula("always x > 1"), ParseError);
    EXPECT_THROW((void)parse_formula("always[3,1] x > 1"), ParseError);
    EXPECT_THROW((void)parse_formula("always[-1,1] x > 1"), ParseError);
    EXPECT_THROW((void)parse_formula("x == 1"), ParseError);
    EXPECT_THROW((void)parse_formula("(x > 1"), ParseError);
    EXPECT_THROW((void)parse_formula("x > 1 y < 2"), ParseError);
    try {
        (void)parse_formula("x > 1 @");
        FAIL();
    } catch (const ParseError &e) {
        EXPECT_NE(std::string(e.what()).find('6'), std::string::npos) << e.what();
    }
}

TEST(StlRobustness, ConstantMargin) {
    const Formula f = parse_formula("always[0,10] (RPM < 4750)");
    EXPECT_DOUBLE_EQ(robustness(f, constant_rpm(4700)).value, 50.0);
}

TEST(StlRobustness, WorstCaseMargin) {
    const Formula f = parse_formula("always[0,10] (RPM < 4750)");
    Trace base = constant_rpm(4700);
    std::vector<double> rpm = base.channel("RPM");
    rpm[7] = 4800.0;
    // A larger peak outside [0,10] is ignored.
    rpm[22] = 9000.0;
    EXPECT_DOUBLE_EQ(robustness(f, Trace(0.5, {"RPM"}, {rpm})).value, -50.0);
}

TEST(StlRobustness, Verdict) {
    EXPECT_EQ(verdict(-0.1), Verdict::Fail);
    EXPECT_EQ(verdict(0.0), Verdict::Pass);
    EXPECT_EQ(verdict(50.0), Verdict::Pass);
}

TEST(StlRobustness, Errors) {
    const Formula f = parse_formula("always[0,10] (RPM < 4750)");
    EXPECT_THROW((void)robustness(f, constant_rpm(1.0, 5.0)), TraceError);
    EXPECT_THROW((void)robustness(parse_formula("speed > 1"), constant_rpm(1.0)), TraceError);
    EXPECT_THROW((void)robustness(parse_formula("RPM > 1"), constant_rpm(1.0), 0.3), TraceError);
    EXPECT_THROW((void)robustness(parse_formula("always[0.2,0.3] (RPM > 1)"), constant_rpm(1.0)), TraceError);
}

TEST(StlRobustness, MatchesRecursiveOracle) {
    Rng rng(2024);
    int checked = 0;
    for (int i = 0; i < 400; ++i) {
        const Formula f = oracle::random_formula(rng, 3);
        // Every temporal bound is a multiple of 0.25, so each window holds a sample.
        const double dt = (i % 2 == 0) ? 0.25 : 0.125;
        const auto need = static_cast<std::size_t>(std::floor(f.horizon() / dt + 1e-9));
        const std::size_t len = std::min<std::size_t>(50, need + 1 + static_cast<std::size_t>(i % 7));
        if (need + 1 > len) {
            continue;
        }
        const Trace tr = oracle::random_trace(rng, len, dt);
        const std::size_t slack = len - 1 - need;
        for (std::size_t i0 = 0; i0 <= std::min<std::size_t>(slack, 2); ++i0) {
            const double got = robustness(f, tr, static_cast<double>(i0) * dt).value;
            const double want = oracle::rho(f, tr, i0);
            ASSERT_NEAR(got, want, 1e-9) << f.to_string();
            if (got > 0) {
                EXPECT_TRUE(oracle::sat(f, tr, i0)) << f.to_string();
            } else if (got < 0) {
                EXPECT_FALSE(oracle::sat(f, tr, i0)) << f.to_string();
            }
            ++checked;
        }
    }
    EXPECT_GT(checked, 300);
}

TEST(StlRobustness, NegationAntisymmetryAndMinMaxLaws) {
    Rng rng(99);
    for (int i = 0; i < 200; ++i) {
        const Formula f = oracle::random_formula(rng, 2);
        const Formula g = oracle::random_formula(rng, 2);
        const double dt = 0.25;
        const auto need = static_cast<std::size_t>(std::floor(std::max(f.horizon(), g.horizon()) / dt + 1e-9));
        const Trace tr = oracle::random_trace(rng, need + 1, dt);
        const double rf = robustness(f, tr).value;
        const double rg = robustness(g, tr).value;
        EXPECT_EQ(robustness(Formula::negation(f), tr).value, -rf);
        EXPECT_EQ(robustness(Formula::conjunction(f, g), tr).value, std::min(rf, rg));
        EXPECT_EQ(robustness(Formula::disjunction(f, g), tr).value, std::max(rf, rg));
    }
}

TEST(StlRobustness, AtomMonotonicity) {
    Rng rng(7);
    const Formula f = parse_formula("eventually[0,2] (always[0,1] (x >= 0.5))");
    for (int i = 0; i < 200; ++i) {
        const Trace tr = oracle::random_trace(rng, 13, 0.25);
        std::vector<double> x = tr.channel("x");
        for (double &v : x) {
            v += std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        }
        const Trace up(0.25, {"x", "y"}, {x, tr.channel("y")});
        EXPECT_GE(robustness(f, up).value, robustness(f, tr).value);
    }
}

TEST(StlTrace, Validation) {
    EXPECT_THROW(Trace(0.0, {"a"}, {{1.0}}), DomainError);
    EXPECT_THROW(Trace(0.1, {"a", "b"}, {{1.0}, {1.0, 2.0}}), DomainError);
    EXPECT_THROW(Trace(0.1, {"a"}, {{1.0, std::nan("")}}), DomainError);
    const Trace t(0.5, {"a"}, {{1.0, 2.0, 3.0}});
    EXPECT_EQ(t.times()[2], 1.0);
    EXPECT_THROW((void)t.channel("b"), TraceError);
}
