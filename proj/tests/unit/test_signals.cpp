#include "decaf/error.hpp"
#include "decaf/signals.hpp"
#include "decaf/util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace decaf;

namespace {

InputSpec at_spec() {
    return InputSpec({{"Throttle", 7, 0.0, 100.0, 50.0, Interpolation::PiecewiseConstant},
                      {"Brake", 3, 0.0, 325.0, 50.0, Interpolation::PiecewiseConstant}});
}

} // namespace

TEST(Signals, SegmentIntervalsOfTheTransmissionInputs) {
    const InputSpec spec = at_spec();
    const Interval th1 = segment_interval(spec.signal(0), 0);
    EXPECT_EQ(format_fixed(th1.lo, 2), "0.00");
    EXPECT_EQ(format_fixed(th1.hi, 2), "7.14");
    const Interval b2 = segment_interval(spec.signal(1), 1);
    EXPECT_EQ(format_fixed(b2.lo, 2), "16.67");
    EXPECT_EQ(format_fixed(b2.hi, 2), "33.33");
    // Uniform width: the sixth throttle segment ends at 6 * 50 / 7.
    EXPECT_EQ(format_fixed(segment_interval(spec.signal(0), 5).hi, 2), "42.86");
}

TEST(Signals, SingleSegmentCoversHorizon) {
    const SignalSpec s{"u", 1, -1.0, 1.0, 12.5, Interpolation::PiecewiseConstant};
    const Interval i = segment_interval(s, 0);
    EXPECT_EQ(i.lo, 0.0);
    EXPECT_EQ(i.hi, 12.5);
    EXPECT_THROW((void)segment_interval(s, 1), DomainError);
}

TEST(Signals, SegmentsPartitionTheHorizon) {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = std::uniform_int_distribution<std::size_t>(1, 40)(rng);
        const double h = std::uniform_real_distribution<double>(0.1, 500.0)(rng);
        const SignalSpec s{"u", n, 0.0, 1.0, h, Interpolation::PiecewiseConstant};
        EXPECT_EQ(segment_interval(s, 0).lo, 0.0);
        EXPECT_EQ(segment_interval(s, n - 1).hi, h);
        for (std::size_t j = 1; j < n; ++j) {
            EXPECT_EQ(segment_interval(s, j - 1).hi, segment_interval(s, j).lo);
            EXPECT_LT(segment_interval(s, j).lo, segment_interval(s, j).hi);
        }
    }
}

TEST(Signals, ValueAtMatchesIndexLookup) {
    const InputSpec spec = at_spec();
    Rng rng(17);
    const TestInput x = random_input(spec, rng);
    std::uniform_real_distribution<double> t(0.0, 50.0);
    for (int i = 0; i < 1000; ++i) {
        const double ti = t(rng);
        const auto j = std::min<std::size_t>(static_cast<std::size_t>(std::floor(ti * 7.0 / 50.0)), 6);
        EXPECT_EQ(value_at(x, spec, "Throttle", ti), x[j]);
    }
    EXPECT_EQ(value_at(x, spec, "Throttle", 50.0), x[6]);
    EXPECT_EQ(value_at(x, spec, "Brake", 0.0), x[7]);
    EXPECT_THROW((void)value_at(x, spec, "Brake", 50.1), DomainError);
    EXPECT_THROW((void)value_at(x, spec, "Gear", 1.0), DomainError);
}

TEST(Signals, ValueAtFirstSegment) {
    const InputSpec spec = at_spec();
    std::vector<double> v(10, 10.0);
    v[0] = 54.5;
    EXPECT_EQ(value_at(TestInput(spec, v), spec, "Throttle", 3.0), 54.5);
}

TEST(Signals, ConstantSignalIsConstant) {
    const InputSpec spec = at_spec();
    const TestInput x(spec, std::vector<double>(10, 42.0));
    for (double t = 0.0; t <= 50.0; t += 0.37) {
        EXPECT_EQ(value_at(x, spec, 0, t), 42.0);
        EXPECT_EQ(value_at(x, spec, 1, t), 42.0);
    }
}

TEST(Signals, RandomInputIsDeterministicAndInRange) {
    const InputSpec spec = at_spec();
    Rng a(17);
    Rng b(17);
    EXPECT_EQ(random_input(spec, a), random_input(spec, b));

    Rng rng(5);
    double lo = 1e9;
    double hi = -1e9;
    double sum = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const double v = random_input(spec, rng)[0];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        sum += v;
    }
    EXPECT_GE(lo, 0.0);
    EXPECT_LE(hi, 100.0);
    // Uniform[0,100]: sd of the mean is 100 / sqrt(12 n).
    EXPECT_NEAR(sum / n, 50.0, 3.0 * 100.0 / std::sqrt(12.0 * n));
}

TEST(Signals, SpecValidation) {
    EXPECT_THROW(InputSpec(std::vector<SignalSpec>{}), DomainError);
    EXPECT_THROW(InputSpec({{"a", 0, 0, 1, 1, Interpolation::PiecewiseConstant}}), DomainError);
    EXPECT_THROW(InputSpec({{"a", 1, 1, 1, 1, Interpolation::PiecewiseConstant}}), DomainError);
    EXPECT_THROW(InputSpec({{"a", 1, 0, 1, 0, Interpolation::PiecewiseConstant}}), DomainError);
    EXPECT_THROW(InputSpec({{"a", 1, 0, 1, 1, Interpolation::PiecewiseConstant},
                            {"a", 1, 0, 1, 1, Interpolation::PiecewiseConstant}}),
                 DomainError);
    EXPECT_THROW(InputSpec({{"a", 1, 0, 1, 1, Interpolation::PiecewiseConstant},
                            {"b", 1, 0, 1, 2, Interpolation::PiecewiseConstant}}),
                 DomainError);
}

TEST(Signals, TestInputRejectsOutOfRangeAndWrongLength) {
    const InputSpec spec = at_spec();
    EXPECT_THROW(TestInput(spec, std::vector<double>(9, 1.0)), DomainError);
    std::vector<double> v(10, 1.0);
    v[7] = 400.0;
    EXPECT_THROW(TestInput(spec, v), DomainError);
}

TEST(Signals, FeatureLayoutAndNames) {
    const InputSpec spec = at_spec();
    EXPECT_EQ(spec.dimension(), 10u);
    EXPECT_EQ(spec.feature_index({1, 2}), 9u);
    EXPECT_EQ(spec.control_point(8), (ControlPoint{1, 1}));
    EXPECT_EQ(control_point_name(spec, {0, 0}), "c_{Throttle,1}");
    EXPECT_EQ(control_point_name(spec, {1, 1}), "c_{Brake,2}");
    EXPECT_EQ(test_input_csv_header(spec),
              "Throttle_cp0,Throttle_cp1,Throttle_cp2,Throttle_cp3,Throttle_cp4,Throttle_cp5,Throttle_cp6,"
              "Brake_cp0,Brake_cp1,Brake_cp2");
    for (std::size_t f = 0; f < spec.dimension(); ++f) {
        EXPECT_EQ(spec.feature_index(spec.control_point(f)), f);
    }
}

TEST(Signals, ClampToRange) {
    const InputSpec spec = at_spec();
    std::vector<double> v(10, -5.0);
    v[8] = 1000.0;
    const auto c = clamp_to_range(spec, v);
    EXPECT_EQ(c[0], 0.0);
    EXPECT_EQ(c[8], 325.0);
}

TEST(Util, DerivedSeedsAreDistinctAndStable) {
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        seen.insert(derive_seed(17, "testgen", i));
    }
    EXPECT_EQ(seen.size(), 1000u);
    EXPECT_EQ(derive_seed(17, "a", 3), derive_seed(17, "a", 3));
    EXPECT_NE(derive_seed(17, "a", 3), derive_seed(17, "b", 3));
    EXPECT_NE(derive_seed(17, "a", 3), derive_seed(18, "a", 3));
}

TEST(Util, ParallelForVisitsEveryIndexOnce) {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), [&](std::size_t i) {
        // Nested calls must not deadlock or oversubscribe.
        parallel_for(1, [&](std::size_t) { ++hits[i]; });
    });
    for (int h : hits) {
        EXPECT_EQ(h, 1);
    }
}

TEST(Util, Formatting) {
    EXPECT_EQ(format_fixed(-0.001, 2), "0.00");
    EXPECT_EQ(format_fixed(54.5, 2), "54.50");
    EXPECT_EQ(format_trimmed(7.1400, 2), "7.14");
    EXPECT_EQ(format_trimmed(0.0, 2), "0");
    EXPECT_EQ(parse_double(" 1.5 "), 1.5);
    EXPECT_THROW((void)parse_double("1.5x"), ConfigError);
    EXPECT_EQ(parse_double(format_double(0.1 + 0.2)), 0.1 + 0.2);
}
