#pragma once

// Independent reference implementations and random generators shared by the
// unit and acceptance tests. Everything here is deliberately naive: direct
// recursive definitions and exhaustive scans, no windows, trees or caching.

#include "decaf/cfgen.hpp"
#include "decaf/learn.hpp"
#include "decaf/signals.hpp"
#include "decaf/stl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace oracle {

using decaf::Comparison;
using decaf::Formula;
using decaf::Rng;
using decaf::Trace;

// ---------------------------------------------------------------- STL

/// Sample offsets j - i whose time distance lies in [a, b].
inline std::vector<std::size_t> offsets_in(double a, double b, double dt, std::size_t max_offset) {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k <= max_offset; ++k) {
        const double t = static_cast<double>(k) * dt;
        if (t >= a - 1e-9 && t <= b + 1e-9) {
            out.push_back(k);
        }
    }
    return out;
}

/// Robustness at sample i straight from the recursive definition.
inline double rho(const Formula &f, const Trace &tr, std::size_t i) {
    const std::size_t n = tr.size();
    const double dt = tr.dt();
    switch (f.kind()) {
    case Formula::Kind::Atom: {
        const double s = tr.channel(f.signal())[i];
        const bool upper = f.comparison() == Comparison::Less || f.comparison() == Comparison::LessEqual;
        return upper ? f.threshold() - s : s - f.threshold();
    }
    case Formula::Kind::Not:
        return -rho(f.children()[0], tr, i);
    case Formula::Kind::And:
        return std::min(rho(f.children()[0], tr, i), rho(f.children()[1], tr, i));
    case Formula::Kind::Or:
        return std::max(rho(f.children()[0], tr, i), rho(f.children()[1], tr, i));
    case Formula::Kind::Implies:
        return std::max(-rho(f.children()[0], tr, i), rho(f.children()[1], tr, i));
    case Formula::Kind::Always: {
        double v = std::numeric_limits<double>::infinity();
        for (std::size_t k : offsets_in(f.lower(), f.upper(), dt, n - 1 - i)) {
            v = std::min(v, rho(f.children()[0], tr, i + k));
        }
        return v;
    }
    case Formula::Kind::Eventually: {
        double v = -std::numeric_limits<double>::infinity();
        for (std::size_t k : offsets_in(f.lower(), f.upper(), dt, n - 1 - i)) {
            v = std::max(v, rho(f.children()[0], tr, i + k));
        }
        return v;
    }
    case Formula::Kind::Until: {
        double v = -std::numeric_limits<double>::infinity();
        for (std::size_t k : offsets_in(f.lower(), f.upper(), dt, n - 1 - i)) {
            double guard = std::numeric_limits<double>::infinity();
            for (std::size_t m = 0; m < k; ++m) {
                guard = std::min(guard, rho(f.children()[0], tr, i + m));
            }
            v = std::max(v, std::min(rho(f.children()[1], tr, i + k), guard));
        }
        return v;
    }
    }
    return 0.0;
}

/// Boolean semantics at sample i.
inline bool sat(const Formula &f, const Trace &tr, std::size_t i) {
    const std::size_t n = tr.size();
    const double dt = tr.dt();
    switch (f.kind()) {
    case Formula::Kind::Atom: {
        const double s = tr.channel(f.signal())[i];
        switch (f.comparison()) {
        case Comparison::Less:
            return s < f.threshold();
        case Comparison::LessEqual:
            return s <= f.threshold();
        case Comparison::Greater:
            return s > f.threshold();
        case Comparison::GreaterEqual:
            return s >= f.threshold();
        }
        return false;
    }
    case Formula::Kind::Not:
        return !sat(f.children()[0], tr, i);
    case Formula::Kind::And:
        return sat(f.children()[0], tr, i) && sat(f.children()[1], tr, i);
    case Formula::Kind::Or:
        return sat(f.children()[0], tr, i) || sat(f.children()[1], tr, i);
    case Formula::Kind::Implies:
        return !sat(f.children()[0], tr, i) || sat(f.children()[1], tr, i);
    case Formula::Kind::Always:
        for (std::size_t k : offsets_in(f.lower(), f.upper(), dt, n - 1 - i)) {
            if (!sat(f.children()[0], tr, i + k)) {
                return false;
            }
        }
        return true;
    case Formula::Kind::Eventually:
        for (std::size_t k : offsets_in(f.lower(), f.upper(), dt, n - 1 - i)) {
            if (sat(f.children()[0], tr, i + k)) {
                return true;
            }
        }
        return false;
    case Formula::Kind::Until:
        for (std::size_t k : offsets_in(f.lower(), f.upper(), dt, n - 1 - i)) {
            bool guard = true;
            for (std::size_t m = 0; m < k; ++m) {
                guard = guard && sat(f.children()[0], tr, i + m);
            }
            if (guard && sat(f.children()[1], tr, i + k)) {
                return true;
            }
        }
        return false;
    }
    return false;
}

/// Random formula over channels x and y, nesting depth at most `depth`, with
/// temporal bounds that are multiples of 0.25 s up to 2 s.
inline Formula random_formula(Rng &rng, int depth) {
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 0 : 7);
    std::uniform_int_distribution<int> bound_steps(0, 8);
    std::uniform_int_distribution<int> cmp(0, 3);
    std::uniform_int_distribution<int> chan(0, 1);
    // Thresholds on a coarse grid so that exact ties (rho = 0) actually occur.
    std::uniform_int_distribution<int> thr(-4, 4);
    auto interval = [&](double &a, double &b) {
        int x = bound_steps(rng);
        int y = bound_steps(rng);
        if (x > y) {
            std::swap(x, y);
        }
        a = 0.25 * x;
        b = 0.25 * y;
    };
    double a = 0.0;
    double b = 0.0;
    switch (pick(rng)) {
    case 0:
        return Formula::atom(chan(rng) == 0 ? "x" : "y", static_cast<Comparison>(cmp(rng)), 0.5 * thr(rng));
    case 1:
        return Formula::negation(random_formula(rng, depth - 1));
    case 2:
        return Formula::conjunction(random_formula(rng, depth - 1), random_formula(rng, depth - 1));
    case 3:
        return Formula::disjunction(random_formula(rng, depth - 1), random_formula(rng, depth - 1));
    case 4:
        return Formula::implication(random_formula(rng, depth - 1), random_formula(rng, depth - 1));
    case 5:
        interval(a, b);
        return Formula::always(a, b, random_formula(rng, depth - 1));
    case 6:
        interval(a, b);
        return Formula::eventually(a, b, random_formula(rng, depth - 1));
    default:
        interval(a, b);
        return Formula::until(a, b, random_formula(rng, depth - 1), random_formula(rng, depth - 1));
    }
}

/// Trace with channels x, y on a 0.5 grid in [-2, 2], sampled every `dt`.
inline Trace random_trace(Rng &rng, std::size_t length, double dt) {
    std::uniform_int_distribution<int> v(-4, 4);
    std::vector<std::vector<double>> ch(2, std::vector<double>(length));
    for (auto &c : ch) {
        for (double &s : c) {
            s = 0.5 * v(rng);
        }
    }
    return Trace(dt, {"x", "y"}, std::move(ch));
}

// ---------------------------------------------------------------- nearest neighbours

/// Every passing row sorted by (proximity, row index), truncated to k.
inline std::vector<decaf::Neighbor> brute_knn(const decaf::Dataset &d, const decaf::InputSpec &spec,
                                              const std::vector<double> &x, std::size_t k) {
    std::vector<decaf::Neighbor> all;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d.y_label[i] == decaf::Verdict::Pass) {
            all.push_back({i, decaf::proximity(x, d.X[i], spec)});
        }
    }
    std::sort(all.begin(), all.end(), [](const auto &a, const auto &b) {
        return a.distance != b.distance ? a.distance < b.distance : a.row < b.row;
    });
    if (all.size() > k) {
        all.resize(k);
    }
    return all;
}

/// Random dataset over `spec`: features uniform in range (optionally snapped to a
/// coarse grid to force ties), labels from the sign of a random linear score.
inline decaf::Dataset random_dataset(const decaf::InputSpec &spec, std::size_t rows, Rng &rng, bool grid) {
    decaf::Dataset d;
    d.feature_names = spec.feature_names();
    std::normal_distribution<double> w(0.0, 1.0);
    std::vector<double> weights(spec.dimension());
    for (double &v : weights) {
        v = w(rng);
    }
    for (std::size_t r = 0; r < rows; ++r) {
        std::vector<double> x(spec.dimension());
        double score = 0.0;
        for (std::size_t f = 0; f < x.size(); ++f) {
            const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            const double snapped = grid ? std::round(u * 4.0) / 4.0 : u;
            x[f] = spec.feature_lo(f) + snapped * spec.feature_width(f);
            score += weights[f] * (snapped - 0.5);
        }
        d.X.push_back(std::move(x));
        d.y_rb.push_back(score);
        d.y_label.push_back(decaf::verdict(score));
    }
    return d;
}

// ---------------------------------------------------------------- probability

/// P(sum of m iid Uniform[0,1] <= s), the Irwin-Hall CDF.
inline double irwin_hall_cdf(std::size_t m, double s) {
    if (m == 0) {
        return s >= 0.0 ? 1.0 : 0.0;
    }
    if (s <= 0.0) {
        return 0.0;
    }
    if (s >= static_cast<double>(m)) {
        return 1.0;
    }
    double sum = 0.0;
    double binom = 1.0;
    double fact = 1.0;
    for (std::size_t k = 1; k <= m; ++k) {
        fact *= static_cast<double>(k);
    }
    for (std::size_t k = 0; k <= m && static_cast<double>(k) <= s; ++k) {
        if (k > 0) {
            binom = binom * static_cast<double>(m - k + 1) / static_cast<double>(k);
        }
        const double term = binom * std::pow(s - static_cast<double>(k), static_cast<double>(m));
        sum += (k % 2 == 0) ? term : -term;
    }
    return sum / fact;
}

} // namespace oracle
