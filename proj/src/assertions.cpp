#include "decaf/assertions.hpp"

#include "decaf/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace decaf {

using json = nlohmann::json;

std::string_view ascii_symbol(Op op) {
    switch (op) {
    case Op::Lt:
        return "<";
    case Op::Le:
        return "<=";
    case Op::Gt:
        return ">";
    case Op::Ge:
        return ">=";
    case Op::Eq:
        return "=";
    case Op::Ne:
        return "!=";
    }
    return "?";
}

std::string_view unicode_symbol(Op op) {
    switch (op) {
    case Op::Lt:
        return "<";
    case Op::Le:
        return "≤";
    case Op::Gt:
        return ">";
    case Op::Ge:
        return "≥";
    case Op::Eq:
        return "=";
    case Op::Ne:
        return "≠";
    }
    return "?";
}

Op parse_op(std::string_view text) {
    for (Op op : {Op::Lt, Op::Le, Op::Gt, Op::Ge, Op::Eq, Op::Ne}) {
        if (text == ascii_symbol(op) || text == unicode_symbol(op)) {
            return op;
        }
    }
    if (text == "==") {
        return Op::Eq;
    }
    throw ConfigError("unknown comparison operator '" + std::string(text) + "'");
}

bool compare(double value, Op op, double bound) {
    switch (op) {
    case Op::Lt:
        return value < bound;
    case Op::Le:
        return value <= bound;
    case Op::Gt:
        return value > bound;
    case Op::Ge:
        return value >= bound;
    case Op::Eq:
        return value == bound;
    case Op::Ne:
        return value != bound;
    }
    return false;
}

bool Predicate::holds(const TestInput &x, const InputSpec &spec) const {
    return compare(x[spec.feature_index(target)], op, bound);
}

bool Assertion::is_trivial() const {
    return std::any_of(dnf.begin(), dnf.end(), [](const Conjunction &c) { return c.empty(); });
}

std::size_t Assertion::predicate_count() const {
    std::size_t n = 0;
    for (const auto &c : dnf) {
        n += c.size();
    }
    return n;
}

bool satisfies(const Conjunction &c, const TestInput &x, const InputSpec &spec) {
    return std::all_of(c.begin(), c.end(), [&](const Predicate &p) { return p.holds(x, spec); });
}

bool covers(const Assertion &a, const TestInput &x, const InputSpec &spec) {
    if (x.size() != spec.dimension()) {
        throw DomainError("input does not match the spec dimension");
    }
    return std::any_of(a.dnf.begin(), a.dnf.end(),
                       [&](const Conjunction &c) { return satisfies(c, x, spec); });
}

namespace {

std::string join_disjuncts(const std::vector<std::string> &parts, std::string_view sep) {
    if (parts.empty()) {
        return "false";
    }
    if (parts.size() == 1) {
        return parts.front();
    }
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) {
            out += sep;
        }
        out += "[" + parts[i] + "]";
    }
    return out;
}

} // namespace

std::string render_control_points(const Assertion &a, const InputSpec &spec) {
    std::vector<std::string> parts;
    for (const auto &c : a.dnf) {
        if (c.empty()) {
            parts.emplace_back("true");
            continue;
        }
        std::string s;
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (i > 0) {
                s += " ∧ ";
            }
            s += "(" + control_point_name(spec, c[i].target) + " " +
                 std::string(unicode_symbol(c[i].op)) + " " + format_fixed(c[i].bound, 2) + ")";
        }
        parts.push_back(std::move(s));
    }
    return join_disjuncts(parts, " ∨ ");
}

std::vector<std::size_t> nearest_failing_rows(const Dataset &d, const InputSpec &spec,
                                              std::span<const double> x, std::size_t count) {
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d.y_label[i] == Verdict::Fail) {
            scored.emplace_back(proximity(x, d.X[i], spec), i);
        }
    }
    const std::size_t k = std::min(count, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < k; ++i) {
        out.push_back(scored[i].second);
    }
    return out;
}

InferenceResult infer(const std::vector<Counterfactual> &cfs, const TestInput &failing,
                      const std::vector<TestInput> &contrast, const InputSpec &spec,
                      const InferParams &params) {
    if (cfs.empty()) {
        throw DomainError("assertion inference needs at least one counterfactual");
    }
    std::vector<const TestInput *> negatives{&failing};
    for (const auto &c : contrast) {
        negatives.push_back(&c);
    }
    const std::size_t mass =
        std::max({cfs.size(), negatives.size(), std::max<std::size_t>(params.m5.min_leaf, 1)});
    const std::size_t rep_pos = (mass + cfs.size() - 1) / cfs.size();
    const std::size_t rep_neg = (mass + negatives.size() - 1) / negatives.size();

    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (const auto &cf : cfs) {
        if (cf.modified.size() != spec.dimension()) {
            throw DomainError("counterfactual does not match the spec dimension");
        }
        for (std::size_t r = 0; r < rep_pos; ++r) {
            X.push_back(cf.modified.features());
            y.push_back(1.0);
        }
    }
    for (const TestInput *n : negatives) {
        if (n->size() != spec.dimension()) {
            throw DomainError("contrast input does not match the spec dimension");
        }
        for (std::size_t r = 0; r < rep_neg; ++r) {
            X.push_back(n->features());
            y.push_back(-1.0);
        }
    }
    const ModelTree tree = train_m5(X, y, params.m5);

    std::set<std::size_t> leaves;
    for (const auto &cf : cfs) {
        leaves.insert(tree.leaf_of(cf.modified.features()));
    }
    Assertion raw;
    for (std::size_t leaf : leaves) {
        Conjunction c;
        for (const PathCondition &pc : tree.path_to(leaf)) {
            c.push_back({spec.control_point(pc.feature), pc.le ? Op::Le : Op::Gt, pc.threshold});
        }
        raw.dnf.push_back(std::move(c));
    }
    InferenceResult result;
    result.assertion = prune(raw, spec);
    result.tree_leaves = tree.leaf_count();
    result.uninformative = result.assertion.is_trivial();
    return result;
}

// ---------------------------------------------------------------- pruning

namespace {

struct Bound {
    double v = 0.0;
    bool strict = false;

    friend bool operator==(const Bound &, const Bound &) = default;
};

/// Admissible values of one control point: an interval minus excluded points, or a single value.
struct Constraint {
    std::optional<Bound> lower;
    std::optional<Bound> upper;
    std::optional<double> eq;
    std::set<double> ne;

    friend bool operator==(const Constraint &, const Constraint &) = default;
};

using Canonical = std::map<ControlPoint, Constraint>;

bool above(double x, const Bound &lo) { return lo.strict ? x > lo.v : x >= lo.v; }
bool below(double x, const Bound &hi) { return hi.strict ? x < hi.v : x <= hi.v; }

Bound tighter_lower(const Bound &a, const Bound &b) {
    if (a.v != b.v) {
        return a.v > b.v ? a : b;
    }
    return {a.v, a.strict || b.strict};
}

Bound tighter_upper(const Bound &a, const Bound &b) {
    if (a.v != b.v) {
        return a.v < b.v ? a : b;
    }
    return {a.v, a.strict || b.strict};
}

/// Intersects with the signal range and reduces to a minimal form; false if empty.
bool normalize(Constraint &c, double rlo, double rhi) {
    Bound lo = c.lower ? tighter_lower(*c.lower, {rlo, false}) : Bound{rlo, false};
    Bound hi = c.upper ? tighter_upper(*c.upper, {rhi, false}) : Bound{rhi, false};
    if (c.eq) {
        const double v = *c.eq;
        if (!above(v, lo) || !below(v, hi) || c.ne.count(v) > 0) {
            return false;
        }
        c.lower.reset();
        c.upper.reset();
        c.ne.clear();
        return true;
    }
    if (lo.v > hi.v || (lo.v == hi.v && (lo.strict || hi.strict))) {
        return false;
    }
    if (lo.v == hi.v) {
        if (c.ne.count(lo.v) > 0) {
            return false;
        }
        c.eq = lo.v;
        c.lower.reset();
        c.upper.reset();
        c.ne.clear();
        return true;
    }
    std::set<double> ne;
    for (double v : c.ne) {
        if (above(v, lo) && below(v, hi)) {
            ne.insert(v);
        }
    }
    c.ne = std::move(ne);
    c.lower = lo;
    c.upper = hi;
    if (lo == Bound{rlo, false}) {
        c.lower.reset();
    }
    if (hi == Bound{rhi, false}) {
        c.upper.reset();
    }
    return true;
}

bool is_unconstrained(const Constraint &c) { return !c.lower && !c.upper && !c.eq && c.ne.empty(); }

std::optional<Canonical> canonicalize(const Conjunction &conj, const InputSpec &spec) {
    Canonical out;
    for (const Predicate &p : conj) {
        (void)spec.feature_index(p.target);
        Constraint &c = out[p.target];
        switch (p.op) {
        case Op::Lt:
        case Op::Le: {
            const Bound b{p.bound, p.op == Op::Lt};
            c.upper = c.upper ? tighter_upper(*c.upper, b) : b;
            break;
        }
        case Op::Gt:
        case Op::Ge: {
            const Bound b{p.bound, p.op == Op::Gt};
            c.lower = c.lower ? tighter_lower(*c.lower, b) : b;
            break;
        }
        case Op::Eq:
            if (c.eq && *c.eq != p.bound) {
                return std::nullopt;
            }
            c.eq = p.bound;
            break;
        case Op::Ne:
            c.ne.insert(p.bound);
            break;
        }
    }
    for (auto it = out.begin(); it != out.end();) {
        const std::size_t f = spec.feature_index(it->first);
        if (!normalize(it->second, spec.feature_lo(f), spec.feature_hi(f))) {
            return std::nullopt;
        }
        it = is_unconstrained(it->second) ? out.erase(it) : std::next(it);
    }
    return out;
}

Constraint full_range(double rlo, double rhi) { return {Bound{rlo, false}, Bound{rhi, false}, {}, {}}; }

bool admits(const Constraint &c, double v, double rlo, double rhi) {
    if (c.eq) {
        return v == *c.eq;
    }
    const Bound lo = c.lower.value_or(Bound{rlo, false});
    const Bound hi = c.upper.value_or(Bound{rhi, false});
    return above(v, lo) && below(v, hi) && c.ne.count(v) == 0;
}

/// Every value admitted by `inner` is admitted by `outer`.
bool contained(const Constraint &inner, const Constraint &outer, double rlo, double rhi) {
    if (inner.eq) {
        return admits(outer, *inner.eq, rlo, rhi);
    }
    if (outer.eq) {
        return false;
    }
    const Bound ilo = inner.lower.value_or(Bound{rlo, false});
    const Bound ihi = inner.upper.value_or(Bound{rhi, false});
    const Bound olo = outer.lower.value_or(Bound{rlo, false});
    const Bound ohi = outer.upper.value_or(Bound{rhi, false});
    const bool lo_ok = ilo.v > olo.v || (ilo.v == olo.v && (ilo.strict || !olo.strict));
    const bool hi_ok = ihi.v < ohi.v || (ihi.v == ohi.v && (ihi.strict || !ohi.strict));
    if (!lo_ok || !hi_ok) {
        return false;
    }
    for (double v : outer.ne) {
        if (above(v, ilo) && below(v, ihi) && inner.ne.count(v) == 0) {
            return false;
        }
    }
    return true;
}

bool implies(const Canonical &a, const Canonical &b, const InputSpec &spec) {
    for (const auto &[target, cb] : b) {
        const std::size_t f = spec.feature_index(target);
        const double rlo = spec.feature_lo(f);
        const double rhi = spec.feature_hi(f);
        const auto it = a.find(target);
        const Constraint ca = it == a.end() ? full_range(rlo, rhi) : it->second;
        if (!contained(ca, cb, rlo, rhi)) {
            return false;
        }
    }
    return true;
}

/// Union of two interval-only constraints when it is itself an interval.
std::optional<Constraint> interval_union(const Constraint &a, const Constraint &b, double rlo, double rhi) {
    if (a.eq || b.eq || !a.ne.empty() || !b.ne.empty()) {
        return std::nullopt;
    }
    Bound alo = a.lower.value_or(Bound{rlo, false});
    Bound ahi = a.upper.value_or(Bound{rhi, false});
    Bound blo = b.lower.value_or(Bound{rlo, false});
    Bound bhi = b.upper.value_or(Bound{rhi, false});
    if (blo.v < alo.v || (blo.v == alo.v && !blo.strict && alo.strict)) {
        std::swap(alo, blo);
        std::swap(ahi, bhi);
    }
    const bool joined = blo.v < ahi.v || (blo.v == ahi.v && !(blo.strict && ahi.strict));
    if (!joined) {
        return std::nullopt;
    }
    Constraint u;
    u.lower = Bound{alo.v, alo.v == blo.v ? (alo.strict && blo.strict) : alo.strict};
    Bound hi = ahi;
    if (bhi.v > ahi.v || (bhi.v == ahi.v && !bhi.strict)) {
        hi = bhi;
    }
    u.upper = hi;
    return u;
}

std::optional<Canonical> try_merge(const Canonical &a, const Canonical &b, const InputSpec &spec) {
    std::set<ControlPoint> targets;
    for (const auto &[t, c] : a) {
        targets.insert(t);
    }
    for (const auto &[t, c] : b) {
        targets.insert(t);
    }
    std::optional<ControlPoint> differing;
    for (const ControlPoint &t : targets) {
        const auto ia = a.find(t);
        const auto ib = b.find(t);
        if (ia != a.end() && ib != b.end() && ia->second == ib->second) {
            continue;
        }
        if (differing) {
            return std::nullopt;
        }
        differing = t;
    }
    if (!differing) {
        return a;
    }
    const std::size_t f = spec.feature_index(*differing);
    const double rlo = spec.feature_lo(f);
    const double rhi = spec.feature_hi(f);
    const auto ia = a.find(*differing);
    const auto ib = b.find(*differing);
    const Constraint ca = ia == a.end() ? full_range(rlo, rhi) : ia->second;
    const Constraint cb = ib == b.end() ? full_range(rlo, rhi) : ib->second;
    auto u = interval_union(ca, cb, rlo, rhi);
    if (!u) {
        return std::nullopt;
    }
    Canonical merged = a;
    if (!normalize(*u, rlo, rhi)) {
        return std::nullopt;
    }
    if (is_unconstrained(*u)) {
        merged.erase(*differing);
    } else {
        merged[*differing] = *u;
    }
    return merged;
}

Conjunction to_predicates(const Canonical &c) {
    Conjunction out;
    for (const auto &[target, k] : c) {
        if (k.eq) {
            out.push_back({target, Op::Eq, *k.eq});
            continue;
        }
        if (k.lower) {
            out.push_back({target, k.lower->strict ? Op::Gt : Op::Ge, k.lower->v});
        }
        if (k.upper) {
            out.push_back({target, k.upper->strict ? Op::Lt : Op::Le, k.upper->v});
        }
        for (double v : k.ne) {
            out.push_back({target, Op::Ne, v});
        }
    }
    return out;
}

} // namespace

Assertion prune(const Assertion &a, const InputSpec &spec) {
    std::vector<Canonical> conj;
    for (const auto &c : a.dnf) {
        if (auto k = canonicalize(c, spec)) {
            conj.push_back(std::move(*k));
        }
    }
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < conj.size() && !changed; ++i) {
            for (std::size_t j = 0; j < conj.size() && !changed; ++j) {
                if (i != j && implies(conj[j], conj[i], spec)) {
                    conj.erase(conj.begin() + static_cast<std::ptrdiff_t>(j));
                    changed = true;
                }
            }
        }
        for (std::size_t i = 0; i < conj.size() && !changed; ++i) {
            for (std::size_t j = i + 1; j < conj.size() && !changed; ++j) {
                if (auto m = try_merge(conj[i], conj[j], spec)) {
                    conj[i] = std::move(*m);
                    conj.erase(conj.begin() + static_cast<std::ptrdiff_t>(j));
                    changed = true;
                }
            }
        }
    }
    Assertion out;
    out.verdict = a.verdict;
    for (const auto &k : conj) {
        out.dnf.push_back(to_predicates(k));
    }
    return out;
}

// ---------------------------------------------------------------- temporal form

TemporalAssertion translate(const Assertion &a, const InputSpec &spec) {
    TemporalAssertion t;
    t.verdict = a.verdict;
    for (const auto &conj : a.dnf) {
        Conjunction sorted = conj;
        std::stable_sort(sorted.begin(), sorted.end(), [](const Predicate &x, const Predicate &y) {
            if (x.target.signal != y.target.signal) {
                return x.target.signal < y.target.signal;
            }
            if (x.op != y.op) {
                return x.op < y.op;
            }
            if (x.bound != y.bound) {
                return x.bound < y.bound;
            }
            return x.target.index < y.target.index;
        });
        std::vector<TemporalClause> clauses;
        std::optional<std::size_t> last_index;
        for (const Predicate &p : sorted) {
            if (p.target.signal >= spec.signal_count() ||
                p.target.index >= spec.signal(p.target.signal).n_points) {
                throw DomainError("predicate targets an unknown control point");
            }
            const Interval iv = segment_interval(spec.signal(p.target.signal), p.target.index);
            if (!clauses.empty() && last_index && clauses.back().signal == p.target.signal &&
                clauses.back().op == p.op && clauses.back().bound == p.bound &&
                *last_index + 1 == p.target.index) {
                clauses.back().interval.hi = iv.hi;
            } else {
                clauses.push_back({p.target.signal, iv, p.op, p.bound});
            }
            last_index = p.target.index;
        }
        std::stable_sort(clauses.begin(), clauses.end(), [](const TemporalClause &x, const TemporalClause &y) {
            if (x.signal != y.signal) {
                return x.signal < y.signal;
            }
            return x.interval.lo < y.interval.lo;
        });
        t.disjuncts.push_back(std::move(clauses));
    }
    return t;
}

namespace {

std::string render(const TemporalAssertion &t, const InputSpec &spec, bool unicode) {
    std::vector<std::string> parts;
    for (const auto &clauses : t.disjuncts) {
        if (clauses.empty()) {
            parts.emplace_back("true");
            continue;
        }
        std::string s;
        for (std::size_t i = 0; i < clauses.size(); ++i) {
            const TemporalClause &c = clauses[i];
            if (i > 0) {
                s += unicode ? " ∧ " : " and ";
            }
            const std::string interval =
                "[" + format_trimmed(c.interval.lo, 2) + "," + format_trimmed(c.interval.hi, 2) + "]";
            const std::string &name = spec.signal(c.signal).name;
            s += unicode ? "(∀t ∈ " : "(forall t in ";
            s += interval + ": " + name + "(t) ";
            s += unicode ? unicode_symbol(c.op) : ascii_symbol(c.op);
            s += " " + format_fixed(c.bound, 2) + ")";
        }
        parts.push_back(std::move(s));
    }
    return join_disjuncts(parts, unicode ? " ∨ " : " or ");
}

} // namespace

std::string TemporalAssertion::render_ascii(const InputSpec &spec) const { return render(*this, spec, false); }

std::string TemporalAssertion::render_unicode(const InputSpec &spec) const { return render(*this, spec, true); }

bool holds(const TemporalAssertion &t, const TestInput &x, const InputSpec &spec) {
    for (const auto &clauses : t.disjuncts) {
        bool all = true;
        for (const TemporalClause &c : clauses) {
            const SignalSpec &s = spec.signal(c.signal);
            for (std::size_t j = 0; j < s.n_points && all; ++j) {
                const Interval seg = segment_interval(s, j);
                const double tol = 1e-9 * s.horizon;
                if (seg.lo >= c.interval.lo - tol && seg.hi <= c.interval.hi + tol) {
                    const double mid = (seg.lo + seg.hi) / 2.0;
                    all = compare(value_at(x, spec, c.signal, mid), c.op, c.bound);
                }
            }
            if (!all) {
                break;
            }
        }
        if (all) {
            return true;
        }
    }
    return false;
}

std::vector<std::string> explain_nl(const Counterfactual &cf, const InputSpec &spec) {
    std::vector<ControlPoint> points = cf.changed_points;
    std::sort(points.begin(), points.end());
    std::vector<std::string> lines;
    for (const ControlPoint &cp : points) {
        const std::size_t f = spec.feature_index(cp);
        const Interval iv = segment_interval(spec.signal(cp.signal), cp.index);
        lines.push_back("Input " + spec.signal(cp.signal).name + " at time [" + format_fixed(iv.lo, 1) +
                        "–" + format_fixed(iv.hi, 1) + "s] changed from " +
                        format_fixed(cf.original[f], 2) + " to " + format_fixed(cf.modified[f], 2));
    }
    return lines;
}

json to_json(const Assertion &a, const InputSpec &spec) {
    json conj = json::array();
    for (const auto &c : a.dnf) {
        json preds = json::array();
        for (const Predicate &p : c) {
            const Interval iv = segment_interval(spec.signal(p.target.signal), p.target.index);
            preds.push_back({{"signal", spec.signal(p.target.signal).name},
                             {"index", p.target.index},
                             {"name", control_point_name(spec, p.target)},
                             {"op", std::string(ascii_symbol(p.op))},
                             {"bound", p.bound},
                             {"interval", {iv.lo, iv.hi}}});
        }
        conj.push_back(std::move(preds));
    }
    const TemporalAssertion t = translate(a, spec);
    json temporal = json::array();
    for (const auto &clauses : t.disjuncts) {
        json jc = json::array();
        for (const TemporalClause &c : clauses) {
            jc.push_back({{"signal", spec.signal(c.signal).name},
                          {"interval", {c.interval.lo, c.interval.hi}},
                          {"op", std::string(ascii_symbol(c.op))},
                          {"bound", c.bound}});
        }
        temporal.push_back(std::move(jc));
    }
    return json{{"verdict", std::string(to_string(a.verdict))},
                {"conjunctions", std::move(conj)},
                {"predicate_count", a.predicate_count()},
                {"trivial", a.is_trivial()},
                {"temporal", std::move(temporal)},
                {"text", t.render_ascii(spec)},
                {"text_unicode", t.render_unicode(spec)},
                {"control_point_text", render_control_points(a, spec)}};
}

Assertion assertion_from_json(const json &j, const InputSpec &spec) {
    try {
        Assertion a;
        a.verdict = parse_verdict(j.at("verdict").get<std::string>());
        for (const auto &jc : j.at("conjunctions")) {
            Conjunction c;
            for (const auto &jp : jc) {
                const std::size_t s = spec.signal_index(jp.at("signal").get<std::string>());
                const std::size_t idx = jp.at("index").get<std::size_t>();
                if (idx >= spec.signal(s).n_points) {
                    throw ConfigError("predicate index out of range");
                }
                c.push_back({{s, idx}, parse_op(jp.at("op").get<std::string>()), jp.at("bound").get<double>()});
            }
            a.dnf.push_back(std::move(c));
        }
        return a;
    } catch (const json::exception &e) {
        throw ConfigError(std::string("malformed assertion: ") + e.what());
    } catch (const DomainError &e) {
        throw ConfigError(std::string("malformed assertion: ") + e.what());
    }
}

} // namespace decaf
