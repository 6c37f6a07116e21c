#include "decaf/eval.hpp"

#include "decaf/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace decaf {

using json = nlohmann::json;

namespace {

bool passes(const Plant &plant, const Formula &phi, const std::vector<double> &x) {
    return verdict(evaluate(plant, phi, TestInput(plant.input_spec, x))) == Verdict::Pass;
}

double uniform_between(double lo, double hi, Rng &rng) {
    if (lo == hi) {
        return lo;
    }
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

} // namespace

bool necessity(const Plant &plant, const Formula &phi, const Counterfactual &cf) {
    const InputSpec &spec = plant.input_spec;
    if (cf.changed_points.empty()) {
        throw DomainError("necessity needs at least one changed control point");
    }
    std::set<std::size_t> signals;
    for (const ControlPoint &cp : cf.changed_points) {
        signals.insert(cp.signal);
    }
    for (std::size_t s : signals) {
        std::vector<double> x = cf.modified.features();
        for (const ControlPoint &cp : cf.changed_points) {
            if (cp.signal == s) {
                const std::size_t f = spec.feature_index(cp);
                x[f] = cf.original[f];
            }
        }
        try {
            if (passes(plant, phi, x)) {
                return false;
            }
        } catch (const Error &e) {
            throw Error("necessity check reverting " + spec.signal(s).name + ": " + e.what());
        }
    }
    return true;
}

std::optional<double> sufficiency(const Plant &plant, const Formula &phi, const Counterfactual &cf,
                                  std::size_t n, Rng &rng) {
    const InputSpec &spec = plant.input_spec;
    std::vector<bool> changed(spec.dimension(), false);
    for (const ControlPoint &cp : cf.changed_points) {
        changed[spec.feature_index(cp)] = true;
    }
    if (std::all_of(changed.begin(), changed.end(), [](bool b) { return b; }) || n == 0) {
        return std::nullopt;
    }
    std::size_t pass = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> x = cf.modified.features();
        for (std::size_t f = 0; f < x.size(); ++f) {
            if (!changed[f]) {
                x[f] = uniform_between(spec.feature_lo(f), spec.feature_hi(f), rng);
            }
        }
        pass += passes(plant, phi, x) ? 1 : 0;
    }
    return static_cast<double>(pass) / static_cast<double>(n);
}

std::size_t predicate_count(const Assertion &a) { return a.predicate_count(); }

std::optional<double> g_score(const Assertion &a, const std::vector<Counterfactual> &cfs,
                              const InputSpec &spec) {
    if (cfs.empty()) {
        return std::nullopt;
    }
    const auto covered = std::count_if(cfs.begin(), cfs.end(),
                                       [&](const Counterfactual &cf) { return covers(a, cf.modified, spec); });
    return static_cast<double>(covered) / static_cast<double>(cfs.size());
}

std::optional<double> safety(const Plant &plant, const Formula &phi, const Assertion &a,
                             const Counterfactual &cf, std::size_t n, Rng &rng) {
    const InputSpec &spec = plant.input_spec;
    const auto conj = std::find_if(a.dnf.begin(), a.dnf.end(),
                                   [&](const Conjunction &c) { return satisfies(c, cf.modified, spec); });
    if (conj == a.dnf.end() || n == 0) {
        return std::nullopt;
    }
    std::vector<std::size_t> features;
    std::vector<std::pair<double, double>> regions;
    bool constrained = false;
    for (const ControlPoint &cp : cf.changed_points) {
        const std::size_t f = spec.feature_index(cp);
        double lo = spec.feature_lo(f);
        double hi = spec.feature_hi(f);
        for (const Predicate &p : *conj) {
            if (p.target != cp) {
                continue;
            }
            constrained = true;
            switch (p.op) {
            case Op::Lt:
            case Op::Le:
                hi = std::min(hi, p.bound);
                break;
            case Op::Gt:
            case Op::Ge:
                lo = std::max(lo, p.bound);
                break;
            case Op::Eq:
                lo = std::max(lo, p.bound);
                hi = std::min(hi, p.bound);
                break;
            case Op::Ne:
                break;
            }
        }
        if (lo > hi) {
            throw DomainError("assertion leaves no admissible value for " + control_point_name(spec, cp));
        }
        features.push_back(f);
        regions.emplace_back(lo, hi);
    }
    if (!constrained) {
        return std::nullopt;
    }
    std::size_t pass = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> x = cf.modified.features();
        for (std::size_t k = 0; k < features.size(); ++k) {
            x[features[k]] = uniform_between(regions[k].first, regions[k].second, rng);
        }
        pass += passes(plant, phi, x) ? 1 : 0;
    }
    return static_cast<double>(pass) / static_cast<double>(n);
}

// ---------------------------------------------------------------- rank statistics

namespace {

/// Midranks of the pooled sample, doubled so that every rank is an integer.
std::vector<long> doubled_midranks(const std::vector<double> &pooled, std::vector<std::size_t> &tie_sizes) {
    std::vector<std::size_t> order(pooled.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
    std::vector<long> rank(pooled.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && pooled[order[j + 1]] == pooled[order[i]]) {
            ++j;
        }
        // Ranks i+1 .. j+1 share their mean; doubled that is i + j + 2.
        for (std::size_t k = i; k <= j; ++k) {
            rank[order[k]] = static_cast<long>(i + j + 2);
        }
        tie_sizes.push_back(j - i + 1);
        i = j + 1;
    }
    return rank;
}

} // namespace

MannWhitney mann_whitney_u(std::span<const double> a, std::span<const double> b, std::size_t exact_limit) {
    if (a.empty() || b.empty()) {
        throw DomainError("Mann-Whitney U needs two non-empty samples");
    }
    const std::size_t n1 = a.size();
    const std::size_t n2 = b.size();
    const std::size_t N = n1 + n2;
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    std::vector<std::size_t> ties;
    const std::vector<long> rank2 = doubled_midranks(pooled, ties);
    long r1 = 0;
    for (std::size_t i = 0; i < n1; ++i) {
        r1 += rank2[i];
    }
    // Doubled U and doubled mean keep the exact comparison in integers.
    const long n1l = static_cast<long>(n1);
    const long u2 = r1 - n1l * (n1l + 1);
    const long mu2 = n1l * static_cast<long>(n2);
    MannWhitney out;
    out.u = static_cast<double>(u2) / 2.0;
    const long dev_obs = std::labs(u2 - mu2);

    if (N <= exact_limit) {
        long max_sum = 0;
        for (long r : rank2) {
            max_sum += r;
        }
        // ways[k][s]: subsets of size k whose doubled rank sum is s.
        std::vector<std::vector<double>> ways(n1 + 1, std::vector<double>(static_cast<std::size_t>(max_sum) + 1, 0.0));
        ways[0][0] = 1.0;
        for (std::size_t item = 0; item < N; ++item) {
            const auto r = static_cast<std::size_t>(rank2[item]);
            for (std::size_t k = std::min(n1, item + 1); k >= 1; --k) {
                for (std::size_t s = static_cast<std::size_t>(max_sum); s >= r; --s) {
                    ways[k][s] += ways[k - 1][s - r];
                }
            }
        }
        double total = 0.0;
        double extreme = 0.0;
        for (std::size_t s = 0; s <= static_cast<std::size_t>(max_sum); ++s) {
            const double w = ways[n1][s];
            if (w == 0.0) {
                continue;
            }
            total += w;
            const long u = static_cast<long>(s) - n1l * (n1l + 1);
            if (std::labs(u - mu2) >= dev_obs) {
                extreme += w;
            }
        }
        out.p_value = std::min(1.0, extreme / total);
        out.exact = true;
        return out;
    }

    const double dn = static_cast<double>(N);
    double tie_term = 0.0;
    for (std::size_t t : ties) {
        const double dt = static_cast<double>(t);
        tie_term += dt * dt * dt - dt;
    }
    const double var = static_cast<double>(n1) * static_cast<double>(n2) / 12.0 *
                       ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
    if (!(var > 0.0)) {
        out.p_value = 1.0;
        return out;
    }
    const double z = std::max(0.0, static_cast<double>(dev_obs) / 2.0 - 0.5) / std::sqrt(var);
    out.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
    return out;
}

std::string effect_category(double a12, const EffectThresholds &t) {
    const double d = std::abs(a12 - 0.5);
    if (d < t.small) {
        return "None";
    }
    if (d < t.medium) {
        return "Small";
    }
    if (d < t.large) {
        return "Medium";
    }
    return "Large";
}

EffectSize vargha_delaney_a12(std::span<const double> a, std::span<const double> b, const EffectThresholds &t) {
    if (a.empty() || b.empty()) {
        throw DomainError("effect size needs two non-empty samples");
    }
    double wins = 0.0;
    for (double x : a) {
        for (double y : b) {
            wins += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
        }
    }
    EffectSize e;
    e.value = wins / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
    e.category = effect_category(e.value, t);
    return e;
}

// ---------------------------------------------------------------- aggregation

std::string ConfigResult::label() const {
    std::string g(to_string(generator));
    std::string m(to_string(model));
    std::transform(g.begin(), g.end(), g.begin(), [](unsigned char c) { return std::toupper(c); });
    std::transform(m.begin(), m.end(), m.begin(), [](unsigned char c) { return std::toupper(c); });
    return g + "-" + m;
}

std::size_t ConfigResult::cf_count() const {
    std::size_t n = 0;
    for (const auto &r : records) {
        n += r.generated;
    }
    return n;
}

std::size_t ConfigResult::valid_count() const {
    std::size_t n = 0;
    for (const auto &r : records) {
        n += r.valid;
    }
    return n;
}

std::optional<double> success_rate(const std::vector<InputRecord> &records) {
    if (records.empty()) {
        return std::nullopt;
    }
    const auto ok = std::count_if(records.begin(), records.end(), [](const InputRecord &r) { return r.valid > 0; });
    return static_cast<double>(ok) / static_cast<double>(records.size());
}

std::optional<double> relative_success_rate(const std::vector<InputRecord> &records) {
    std::size_t gen = 0;
    std::size_t valid = 0;
    for (const auto &r : records) {
        gen += r.generated;
        valid += r.valid;
    }
    if (gen == 0) {
        return std::nullopt;
    }
    return static_cast<double>(valid) / static_cast<double>(gen);
}

namespace {

struct Mean {
    double sum = 0.0;
    std::size_t n = 0;

    void add(double v) {
        sum += v;
        ++n;
    }
    void add(const std::optional<double> &v) {
        if (v) {
            add(*v);
        }
    }
    [[nodiscard]] std::optional<double> value() const {
        return n == 0 ? std::nullopt : std::optional<double>(sum / static_cast<double>(n));
    }
};

} // namespace

GoodnessSummary summarize(const std::vector<InputRecord> &records) {
    Mean nec, suf, saf, pred, g;
    for (const auto &r : records) {
        for (const auto &c : r.selected) {
            nec.add(c.necessary ? 1.0 : 0.0);
            suf.add(c.sufficiency);
        }
        if (r.assertion) {
            saf.add(r.assertion->safety);
            pred.add(static_cast<double>(r.assertion->predicate_count));
            g.add(r.assertion->g_score);
        }
    }
    return {nec.value(), suf.value(), saf.value(), pred.value(), g.value()};
}

std::vector<double> validity_sample(const ConfigResult &r) {
    std::vector<double> out;
    for (const auto &rec : r.records) {
        for (std::size_t i = 0; i < rec.generated; ++i) {
            out.push_back(i < rec.valid ? 1.0 : 0.0);
        }
    }
    return out;
}

namespace {

const std::vector<std::string> &column_order() {
    static const std::vector<std::string> cols{"GA-M5", "GA-RF", "KD-M5", "KD-RF", "RS-M5", "RS-RF"};
    return cols;
}

std::string cell(const std::optional<double> &v, int decimals = 3) {
    return v ? format_fixed(*v, decimals) : "--";
}

json jnum(const std::optional<double> &v) { return v ? json(*v) : json(nullptr); }

} // namespace

ResultTables build_tables(const std::vector<ConfigResult> &results, const EffectThresholds &thresholds) {
    using RowKey = std::pair<std::string, std::string>;
    std::vector<RowKey> rows;
    std::map<RowKey, std::map<std::string, const ConfigResult *>> grid;
    for (const auto &r : results) {
        const RowKey key{r.system, r.requirement};
        if (grid.find(key) == grid.end()) {
            rows.push_back(key);
        }
        grid[key][r.label()] = &r;
    }
    const auto &cols = column_order();

    ResultTables t;
    json configs = json::array();
    json comparisons = json::array();

    std::string counts = "system,requirement,ts_size,n_fail,n_explained";
    std::string success = "system,requirement";
    std::string goodness = "system,requirement";
    for (const auto &c : cols) {
        counts += "," + c;
        success += "," + c + " success," + c + " relative";
        goodness += "," + c + " necessity," + c + " sufficiency," + c + " safety," + c + " predicates," + c +
                    " g_score";
    }
    counts += "\n";
    success += "\n";
    goodness += "\n";
    std::string comparison = "system,requirement,config_a,config_b,u,p_value,a12,effect\n";

    std::map<std::string, std::array<Mean, 8>> averages;
    Mean avg_ts, avg_fail, avg_explained;
    for (const auto &key : rows) {
        const auto &cells = grid[key];
        const ConfigResult *any = cells.begin()->second;
        const std::size_t explained = any->records.size();
        avg_ts.add(static_cast<double>(any->ts_size));
        avg_fail.add(static_cast<double>(any->n_fail));
        avg_explained.add(static_cast<double>(explained));
        counts += key.first + "," + key.second + "," + std::to_string(any->ts_size) + "," +
                  std::to_string(any->n_fail) + "," + std::to_string(explained);
        success += key.first + "," + key.second;
        goodness += key.first + "," + key.second;
        for (const auto &c : cols) {
            const auto it = cells.find(c);
            if (it == cells.end()) {
                counts += ",--";
                success += ",--,--";
                goodness += ",--,--,--,--,--";
                continue;
            }
            const ConfigResult &r = *it->second;
            const auto sr = success_rate(r.records);
            const auto rr = relative_success_rate(r.records);
            const GoodnessSummary g = summarize(r.records);
            counts += "," + std::to_string(r.cf_count());
            success += "," + cell(sr) + "," + cell(rr);
            goodness += "," + cell(g.necessity) + "," + cell(g.sufficiency) + "," + cell(g.safety) + "," +
                        cell(g.predicates, 2) + "," + cell(g.g_score);
            auto &avg = averages[c];
            avg[0].add(static_cast<double>(r.cf_count()));
            avg[1].add(sr);
            avg[2].add(rr);
            avg[3].add(g.necessity);
            avg[4].add(g.sufficiency);
            avg[5].add(g.safety);
            avg[6].add(g.predicates);
            avg[7].add(g.g_score);
            configs.push_back({{"system", r.system},
                               {"requirement", r.requirement},
                               {"generator", std::string(to_string(r.generator))},
                               {"model", std::string(to_string(r.model))},
                               {"label", r.label()},
                               {"ts_size", r.ts_size},
                               {"n_fail", r.n_fail},
                               {"n_explained", r.records.size()},
                               {"cf_count", r.cf_count()},
                               {"valid_count", r.valid_count()},
                               {"success_rate", jnum(sr)},
                               {"relative_success_rate", jnum(rr)},
                               {"necessity", jnum(g.necessity)},
                               {"sufficiency", jnum(g.sufficiency)},
                               {"safety", jnum(g.safety)},
                               {"predicates", jnum(g.predicates)},
                               {"g_score", jnum(g.g_score)}});
        }
        counts += "\n";
        success += "\n";
        goodness += "\n";

        for (std::size_t i = 0; i < cols.size(); ++i) {
            for (std::size_t j = i + 1; j < cols.size(); ++j) {
                const auto ia = cells.find(cols[i]);
                const auto ib = cells.find(cols[j]);
                if (ia == cells.end() || ib == cells.end()) {
                    continue;
                }
                const auto sa = validity_sample(*ia->second);
                const auto sb = validity_sample(*ib->second);
                std::string line = key.first + "," + key.second + "," + cols[i] + "," + cols[j];
                json jc{{"system", key.first}, {"requirement", key.second}, {"config_a", cols[i]}, {"config_b", cols[j]}};
                if (sa.empty() || sb.empty()) {
                    line += ",--,--,--,--";
                    jc["u"] = nullptr;
                    jc["p_value"] = nullptr;
                    jc["a12"] = nullptr;
                    jc["effect"] = nullptr;
                } else {
                    const MannWhitney mw = mann_whitney_u(sa, sb);
                    const EffectSize es = vargha_delaney_a12(sa, sb, thresholds);
                    line += "," + format_double(mw.u) + "," + format_double(mw.p_value) + "," +
                            format_fixed(es.value, 3) + "," + es.category;
                    jc["u"] = mw.u;
                    jc["p_value"] = mw.p_value;
                    jc["a12"] = es.value;
                    jc["effect"] = es.category;
                }
                comparison += line + "\n";
                comparisons.push_back(std::move(jc));
            }
        }
    }

    counts += "Average,," + cell(avg_ts.value(), 1) + "," + cell(avg_fail.value(), 1) + "," +
              cell(avg_explained.value(), 1);
    success += "Average,";
    goodness += "Average,";
    for (const auto &c : cols) {
        const auto it = averages.find(c);
        if (it == averages.end()) {
            counts += ",--";
            success += ",--,--";
            goodness += ",--,--,--,--,--";
            continue;
        }
        const auto &avg = it->second;
        counts += "," + cell(avg[0].value(), 1);
        success += "," + cell(avg[1].value()) + "," + cell(avg[2].value());
        goodness += "," + cell(avg[3].value()) + "," + cell(avg[4].value()) + "," + cell(avg[5].value()) + "," +
                    cell(avg[6].value(), 2) + "," + cell(avg[7].value());
    }
    counts += "\n";
    success += "\n";
    goodness += "\n";

    t.counts_csv = std::move(counts);
    t.success_csv = std::move(success);
    t.goodness_csv = std::move(goodness);
    t.comparison_csv = std::move(comparison);
    t.json = json{{"columns", cols}, {"configurations", std::move(configs)}, {"comparisons", std::move(comparisons)}};
    return t;
}

} // namespace decaf
