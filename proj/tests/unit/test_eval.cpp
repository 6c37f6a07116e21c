#include "decaf/error.hpp"
#include "decaf/eval.hpp"
#include "decaf/plants.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace decaf;

namespace {

const Plant &toy() {
    static const Plant p = monotone_toy_plant({.signals = 2, .points = 3, .lo = 0.0, .hi = 10.0});
    return p;
}

const Formula &phi() {
    static const Formula f = toy_requirement(toy(), 5.0).formula;
    return f;
}

Counterfactual cf_of(std::vector<double> modified) {
    const TestInput orig(toy().input_spec, std::vector<double>(6, 8.0));
    return make_counterfactual(toy().input_spec, orig, {std::move(modified), {}});
}

/// Exact two-sided permutation p-value of U by enumerating group assignments.
double enumerated_p(const std::vector<double> &a, const std::vector<double> &b) {
    std::vector<double> pooled = a;
    pooled.insert(pooled.end(), b.begin(), b.end());
    const std::size_t n = pooled.size();
    const std::size_t na = a.size();
    auto u_of = [&](const std::vector<bool> &in_a) {
        double u = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (in_a[i] && !in_a[j]) {
                    u += pooled[i] > pooled[j] ? 1.0 : pooled[i] == pooled[j] ? 0.5 : 0.0;
                }
            }
        }
        return u;
    };
    std::vector<bool> mask(n, false);
    std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(na), true);
    const double centre = static_cast<double>(na * (n - na)) / 2.0;
    const double observed = std::abs(u_of(mask) - centre);
    std::size_t total = 0;
    std::size_t extreme = 0;
    std::vector<bool> sel(n, false);
    std::fill(sel.end() - static_cast<std::ptrdiff_t>(na), sel.end(), true);
    do {
        ++total;
        if (std::abs(u_of(sel) - centre) >= observed - 1e-9) {
            ++extreme;
        }
    } while (std::next_permutation(sel.begin(), sel.end()));
    return static_cast<double>(extreme) / static_cast<double>(total);
}

} // namespace

TEST(Necessity, ToyPlantCases) {
    // Only the first signal changed: reverting it restores the failure.
    EXPECT_TRUE(necessity(toy(), phi(), cf_of({2, 2, 2, 8, 8, 8})));
    // Reverting either signal gives mean 6: both reversions fail again.
    EXPECT_TRUE(necessity(toy(), phi(), cf_of({4, 4, 4, 4, 4, 4})));
    // Reverting the second signal gives mean 7, but reverting the first gives 5, which passes.
    EXPECT_FALSE(necessity(toy(), phi(), cf_of({6, 6, 6, 2, 2, 2})));
    // Either revert alone still passes with mean 4.
    EXPECT_FALSE(necessity(toy(), phi(), cf_of({0, 0, 0, 0, 0, 0})));
    EXPECT_THROW((void)necessity(toy(), phi(), cf_of(std::vector<double>(6, 8.0))), DomainError);
}

TEST(Sufficiency, MatchesIrwinHallProbability) {
    struct Case {
        std::vector<double> modified;
        std::size_t changed;
        double changed_sum;
    };
    // Unchanged points (value 8) are resampled uniformly on [0, 10]; the input
    // passes iff the six values sum to at most 30.
    const std::vector<Case> cases{{{1, 8, 8, 8, 8, 8}, 1, 1.0},
                                  {{1, 2, 8, 8, 8, 8}, 2, 3.0},
                                  {{0, 0, 0, 8, 8, 8}, 3, 0.0},
                                  {{9, 8, 8, 8, 8, 8}, 1, 9.0},
                                  {{5, 5, 3, 2, 8, 8}, 4, 15.0}};
    Rng rng(31);
    const std::size_t n = 4000;
    for (const auto &c : cases) {
        const std::size_t free = 6 - c.changed;
        const double p = oracle::irwin_hall_cdf(free, (30.0 - c.changed_sum) / 10.0);
        const auto got = sufficiency(toy(), phi(), cf_of(c.modified), n, rng);
        ASSERT_TRUE(got.has_value());
        const double sd = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
        EXPECT_NEAR(*got, p, 4.0 * sd + 1e-12) << c.changed_sum;
    }
    EXPECT_FALSE(sufficiency(toy(), phi(), cf_of(std::vector<double>(6, 1.0)), n, rng).has_value());
}

TEST(Safety, UniformOverTheCoveringBox) {
    Assertion a;
    a.dnf = {{{{1, 0}, Op::Le, 1.0}}, {{{0, 0}, Op::Le, 3.0}, {{0, 1}, Op::Le, 3.0}, {{0, 2}, Op::Lt, 3.0}}};
    const Counterfactual cf = cf_of({2, 2, 2, 8, 8, 8});
    Rng rng(32);
    const std::size_t n = 4000;
    // Three values uniform on [0, 3] plus 24 must not exceed 30: P(IH(3) <= 2) = 5/6.
    const auto got = safety(toy(), phi(), a, cf, n, rng);
    ASSERT_TRUE(got.has_value());
    const double p = 5.0 / 6.0;
    EXPECT_NEAR(*got, p, 4.0 * std::sqrt(p * (1 - p) / n));

    Assertion unrelated;
    unrelated.dnf = {{{{1, 2}, Op::Ge, 5.0}}};
    EXPECT_FALSE(safety(toy(), phi(), unrelated, cf, n, rng).has_value());
    Assertion uncovered;
    uncovered.dnf = {{{{0, 0}, Op::Ge, 5.0}}};
    EXPECT_FALSE(safety(toy(), phi(), uncovered, cf, n, rng).has_value());
}

TEST(GScore, FractionCovered) {
    Assertion a;
    a.dnf = {{{{0, 0}, Op::Le, 3.0}}};
    const std::vector<Counterfactual> cfs{cf_of({2, 8, 8, 8, 8, 8}), cf_of({4, 8, 8, 8, 8, 1}),
                                          cf_of({3, 1, 8, 8, 8, 8}), cf_of({9, 1, 8, 8, 8, 8})};
    EXPECT_DOUBLE_EQ(*g_score(a, cfs, toy().input_spec), 0.5);
    EXPECT_FALSE(g_score(a, {}, toy().input_spec).has_value());
    EXPECT_EQ(predicate_count(a), 1u);
}

TEST(MannWhitney, SeparatedSamples) {
    const std::vector<double> a{4, 5, 6};
    const std::vector<double> b{1, 2, 3};
    const MannWhitney r = mann_whitney_u(a, b);
    EXPECT_TRUE(r.exact);
    EXPECT_EQ(r.u, 9.0);
    EXPECT_NEAR(r.p_value, 0.1, 1e-12);
}

TEST(MannWhitney, ExactMatchesEnumerationWithTies) {
    Rng rng(33);
    for (int trial = 0; trial < 200; ++trial) {
        const int na = std::uniform_int_distribution<int>(1, 6)(rng);
        const int nb = std::uniform_int_distribution<int>(1, 6)(rng);
        std::vector<double> a(static_cast<std::size_t>(na)), b(static_cast<std::size_t>(nb));
        for (double &v : a) {
            v = std::uniform_int_distribution<int>(0, 3)(rng);
        }
        for (double &v : b) {
            v = std::uniform_int_distribution<int>(0, 3)(rng);
        }
        const MannWhitney r = mann_whitney_u(a, b);
        ASSERT_TRUE(r.exact);
        EXPECT_NEAR(r.p_value, enumerated_p(a, b), 1e-9);
    }
}

TEST(MannWhitney, NormalApproximationForLargeSamples) {
    Rng rng(34);
    std::vector<double> a(40), b(40);
    for (double &v : a) {
        v = std::normal_distribution<double>(0.0, 1.0)(rng);
    }
    for (double &v : b) {
        v = std::normal_distribution<double>(0.0, 1.0)(rng);
    }
    const MannWhitney same = mann_whitney_u(a, b);
    EXPECT_FALSE(same.exact);
    EXPECT_GT(same.p_value, 0.01);
    for (double &v : b) {
        v += 3.0;
    }
    EXPECT_LT(mann_whitney_u(a, b).p_value, 1e-6);
    EXPECT_EQ(mann_whitney_u(a, a).p_value, 1.0);
}

TEST(EffectSize, VarghaDelaney) {
    const std::vector<double> a{1, 2, 3};
    EXPECT_EQ(vargha_delaney_a12(a, a).value, 0.5);
    EXPECT_EQ(vargha_delaney_a12(a, a).category, "None");
    EXPECT_EQ(vargha_delaney_a12(std::vector<double>{5, 6}, a).value, 1.0);
    EXPECT_EQ(effect_category(0.538), "None");
    EXPECT_EQ(effect_category(0.282), "Large");
    EXPECT_EQ(effect_category(0.57), "Small");
    EXPECT_EQ(effect_category(0.35), "Medium");
    // Symmetric around one half.
    EXPECT_EQ(effect_category(0.43), "Small");
}

TEST(Rates, SuccessAndRelative) {
    std::vector<InputRecord> recs(4);
    recs[0].generated = 3;
    recs[0].valid = 2;
    recs[1].generated = 5;
    recs[1].valid = 0;
    recs[2].generated = 0;
    recs[3].generated = 2;
    recs[3].valid = 2;
    EXPECT_DOUBLE_EQ(*success_rate(recs), 0.5);
    EXPECT_DOUBLE_EQ(*relative_success_rate(recs), 0.4);
    EXPECT_FALSE(success_rate({}).has_value());
    EXPECT_FALSE(relative_success_rate(std::vector<InputRecord>(2)).has_value());
}

TEST(Tables, MissingCellsRenderDashes) {
    ConfigResult kd;
    kd.system = "AT";
    kd.requirement = "AT1";
    kd.generator = Generator::KD;
    kd.model = ModelKind::M5;
    kd.ts_size = 100;
    kd.n_fail = 40;
    InputRecord rec;
    rec.generated = 2;
    rec.valid = 1;
    kd.records.push_back(rec);
    const ResultTables t = build_tables({kd});
    EXPECT_NE(t.success_csv.find("--"), std::string::npos);
    EXPECT_NE(t.counts_csv.find("AT,AT1,100,40,1"), std::string::npos);
    EXPECT_NE(t.success_csv.find("1.000,0.500"), std::string::npos) << t.success_csv;
    ASSERT_EQ(t.json["configurations"].size(), 1u);
    EXPECT_EQ(t.json["configurations"][0]["label"], "KD-M5");
    EXPECT_TRUE(t.json["configurations"][0]["necessity"].is_null());
    EXPECT_EQ(kd.label(), "KD-M5");
}
