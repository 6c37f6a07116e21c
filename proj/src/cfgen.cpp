#include "decaf/cfgen.hpp"

#include "decaf/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace decaf {

using json = nlohmann::json;

double proximity(std::span<const double> a, std::span<const double> b, const InputSpec &spec) {
    if (a.size() != b.size() || a.size() != spec.dimension()) {
        throw DomainError("proximity needs two vectors of the spec dimension");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sum += std::abs(a[i] - b[i]) / spec.feature_width(i);
    }
    return sum / static_cast<double>(a.size());
}

double diversity(const std::vector<std::vector<double>> &members, const InputSpec &spec) {
    if (members.size() < 2) {
        return 0.0;
    }
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < members.size(); ++i) {
        for (std::size_t j = i + 1; j < members.size(); ++j) {
            sum += proximity(members[i], members[j], spec);
            ++pairs;
        }
    }
    return sum / static_cast<double>(pairs);
}

std::string_view to_string(Generator g) {
    switch (g) {
    case Generator::RS:
        return "rs";
    case Generator::GA:
        return "ga";
    case Generator::KD:
        return "kd";
    }
    return "?";
}

Generator parse_generator(std::string_view text) {
    std::string t(text);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
    if (t == "rs") {
        return Generator::RS;
    }
    if (t == "ga") {
        return Generator::GA;
    }
    if (t == "kd") {
        return Generator::KD;
    }
    throw ConfigError("generator must be 'rs', 'ga' or 'kd', got '" + std::string(text) + "'");
}

void CFParams::validate(std::size_t dimension) const {
    auto prob = [](double v, const char *name) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw ConfigError(std::string(name) + " must lie in [0,1]");
        }
    };
    prob(mutation_p, "mutation probability");
    prob(crossover_p, "crossover probability");
    if (k_max < 1) {
        throw ConfigError("k_max must be at least 1");
    }
    if (population < 2) {
        throw ConfigError("GA population must be at least 2");
    }
    if (tournament_size < 1) {
        throw ConfigError("tournament size must be at least 1");
    }
    if (!(diversity_weight >= 0.0)) {
        throw ConfigError("diversity weight must be non-negative");
    }
    if (!(mutation_sigma > 0.0)) {
        throw ConfigError("mutation sigma must be positive");
    }
    if (rs_rounds < 1 || rs_samples_per_round < 1) {
        throw ConfigError("random search needs at least one round and one sample");
    }
    if (!mutable_mask.empty() && mutable_mask.size() != dimension) {
        throw ConfigError("mutable mask has " + std::to_string(mutable_mask.size()) +
                          " entries, expected " + std::to_string(dimension));
    }
}

bool CFParams::is_mutable(std::size_t feature) const {
    return mutable_mask.empty() || mutable_mask.at(feature);
}

namespace {

std::vector<std::size_t> mutable_features(const CFParams &p, std::size_t d) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < d; ++i) {
        if (p.is_mutable(i)) {
            out.push_back(i);
        }
    }
    return out;
}

void check_query(std::span<const double> x_f, const CausalModel &cm, const InputSpec &spec) {
    if (x_f.size() != spec.dimension() || cm.dimension() != spec.dimension()) {
        throw DomainError("failing input, model and spec dimensions disagree");
    }
}

/// Sorted by (proximity, features), duplicates removed, truncated to k.
std::vector<Candidate> rank_by_proximity(std::vector<Candidate> cands, std::span<const double> x_f,
                                         const InputSpec &spec, std::size_t k) {
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t i = 0; i < cands.size(); ++i) {
        order.emplace_back(proximity(x_f, cands[i].features, spec), i);
    }
    std::sort(order.begin(), order.end(), [&](const auto &a, const auto &b) {
        if (a.first != b.first) {
            return a.first < b.first;
        }
        return cands[a.second].features < cands[b.second].features;
    });
    std::vector<Candidate> out;
    for (const auto &[prox, i] : order) {
        if (out.size() >= k) {
            break;
        }
        if (!out.empty() && out.back().features == cands[i].features) {
            continue;
        }
        out.push_back(std::move(cands[i]));
    }
    return out;
}

/// Determinant of K_ij = 1 / (1 + d_ij), d the summed range-normalized L1
/// distance: 0 for coincident members, 1 for infinitely spread ones.
double dpp_diversity(const std::vector<const std::vector<double> *> &set, const InputSpec &spec) {
    const auto n = static_cast<Eigen::Index>(set.size());
    Eigen::MatrixXd k(n, n);
    const double d = static_cast<double>(spec.dimension());
    for (Eigen::Index i = 0; i < n; ++i) {
        k(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            k(i, j) = k(j, i) = 1.0 / (1.0 + d * proximity(*set[i], *set[j], spec));
        }
    }
    return k.determinant();
}

/// Greedy pick from proximity-ranked candidates minimizing the set loss
/// mean proximity - weight * dpp_diversity; the closest candidate comes first.
std::vector<Candidate> pick_diverse(std::vector<Candidate> ranked, std::span<const double> x_f,
                                    const InputSpec &spec, std::size_t k, double weight) {
    std::vector<Candidate> out;
    std::vector<bool> taken(ranked.size(), false);
    std::vector<const std::vector<double> *> set;
    double prox_sum = 0.0;
    while (out.size() < k && out.size() < ranked.size()) {
        std::size_t best = ranked.size();
        double best_loss = 0.0;
        for (std::size_t i = 0; i < ranked.size(); ++i) {
            if (taken[i]) {
                continue;
            }
            set.push_back(&ranked[i].features);
            const double prox = proximity(x_f, ranked[i].features, spec);
            const double loss = (prox_sum + prox) / static_cast<double>(set.size()) -
                                (set.size() > 1 ? weight * dpp_diversity(set, spec) : 0.0);
            set.pop_back();
            // Ties keep the ranked order.
            if (best == ranked.size() || loss < best_loss) {
                best = i;
                best_loss = loss;
            }
        }
        taken[best] = true;
        prox_sum += proximity(x_f, ranked[best].features, spec);
        set.push_back(&ranked[best].features);
        out.push_back(ranked[best]);
    }
    return out;
}

} // namespace

std::vector<Candidate> generate_rs(std::span<const double> x_f, const CausalModel &cm,
                                   const InputSpec &spec, const CFParams &p, Rng &rng) {
    check_query(x_f, cm, spec);
    p.validate(spec.dimension());
    const auto free = mutable_features(p, spec.dimension());
    if (free.empty()) {
        return {};
    }
    std::bernoulli_distribution coin(0.5);
    std::vector<Candidate> found;
    for (std::size_t round = 1; round <= p.rs_rounds; ++round) {
        const double radius = static_cast<double>(round) / static_cast<double>(p.rs_rounds);
        for (std::size_t s = 0; s < p.rs_samples_per_round; ++s) {
            std::vector<double> x(x_f.begin(), x_f.end());
            std::vector<std::size_t> chosen;
            while (chosen.empty()) {
                for (std::size_t f : free) {
                    if (coin(rng)) {
                        chosen.push_back(f);
                    }
                }
            }
            for (std::size_t f : chosen) {
                const double w = spec.feature_width(f);
                const double lo = std::max(spec.feature_lo(f), x_f[f] - radius * w);
                const double hi = std::min(spec.feature_hi(f), x_f[f] + radius * w);
                x[f] = std::uniform_real_distribution<double>(lo, hi)(rng);
            }
            const Prediction pred = cm.predict(x);
            if (pred.verdict == Verdict::Pass) {
                found.push_back({std::move(x), pred});
            }
        }
        if (found.size() >= p.k_max) {
            break;
        }
    }
    return rank_by_proximity(std::move(found), x_f, spec, p.k_max);
}

GAResult generate_ga(std::span<const double> x_f, const CausalModel &cm, const InputSpec &spec,
                     const CFParams &p, Rng &rng, const std::vector<std::vector<double>> &seeds) {
    check_query(x_f, cm, spec);
    p.validate(spec.dimension());
    const std::size_t d = spec.dimension();
    const auto free = mutable_features(p, d);
    GAResult result;
    if (free.empty()) {
        return result;
    }

    struct Member {
        std::vector<double> x;
        Prediction pred;
        double prox = 0.0;
        double score = 0.0;
        bool feasible = false;
    };
    auto evaluate_member = [&](std::vector<double> x) {
        Member m;
        m.pred = cm.predict(x);
        m.prox = proximity(x_f, x, spec);
        m.feasible = m.pred.verdict == Verdict::Pass;
        m.x = std::move(x);
        return m;
    };

    std::set<std::vector<double>> archive_keys;
    std::vector<Candidate> archive;
    std::optional<double> best;
    auto record = [&](const Member &m) {
        if (m.feasible && archive_keys.insert(m.x).second) {
            archive.push_back({m.x, m.pred});
            if (!best || m.prox < *best) {
                best = m.prox;
            }
        }
    };

    std::vector<Member> pop;
    for (const auto &s : seeds) {
        if (pop.size() >= p.population) {
            break;
        }
        if (s.size() != d) {
            throw DomainError("GA seed has the wrong dimension");
        }
        std::vector<double> x = s;
        for (std::size_t i = 0; i < d; ++i) {
            if (!p.is_mutable(i)) {
                x[i] = x_f[i];
            }
        }
        pop.push_back(evaluate_member(std::move(x)));
    }
    std::bernoulli_distribution coin(0.5);
    while (pop.size() < p.population) {
        std::vector<double> x(x_f.begin(), x_f.end());
        bool changed = false;
        while (!changed) {
            for (std::size_t f : free) {
                if (coin(rng)) {
                    x[f] = std::uniform_real_distribution<double>(spec.feature_lo(f), spec.feature_hi(f))(rng);
                    changed = true;
                }
            }
        }
        pop.push_back(evaluate_member(std::move(x)));
    }
    for (const auto &m : pop) {
        record(m);
    }
    result.best_proximity.push_back(best);

    // Feasible members first, by proximity minus a diversity bonus; infeasible ones
    // by how far the prediction sits below the pass threshold.
    auto rank = [&](std::vector<Member> &members) {
        std::vector<const Member *> feasible;
        for (const auto &m : members) {
            if (m.feasible) {
                feasible.push_back(&m);
            }
        }
        for (auto &m : members) {
            if (m.feasible) {
                double spread = 0.0;
                if (feasible.size() > 1) {
                    for (const Member *o : feasible) {
                        if (o != &m) {
                            spread += proximity(m.x, o->x, spec);
                        }
                    }
                    spread /= static_cast<double>(feasible.size() - 1);
                }
                m.score = m.prox - p.diversity_weight * spread;
            } else {
                m.score = std::max(0.0, -m.pred.estimate);
            }
        }
        std::sort(members.begin(), members.end(), [](const Member &a, const Member &b) {
            if (a.feasible != b.feasible) {
                return a.feasible;
            }
            if (a.score != b.score) {
                return a.score < b.score;
            }
            if (a.prox != b.prox) {
                return a.prox < b.prox;
            }
            return a.x < b.x;
        });
    };

    std::uniform_int_distribution<std::size_t> pick(0, p.population - 1);
    std::bernoulli_distribution do_cross(p.crossover_p);
    std::bernoulli_distribution do_mutate(p.mutation_p);
    std::normal_distribution<double> noise(0.0, 1.0);
    auto tournament = [&](const std::vector<Member> &ranked) -> const Member & {
        std::size_t winner = pick(rng);
        for (std::size_t t = 1; t < p.tournament_size; ++t) {
            winner = std::min(winner, pick(rng));
        }
        return ranked[winner];
    };

    for (std::size_t g = 0; g < p.generations; ++g) {
        rank(pop);
        std::vector<Member> next;
        std::vector<const Member *> elite;
        for (const auto &m : pop) {
            if (m.feasible) {
                elite.push_back(&m);
            }
        }
        std::sort(elite.begin(), elite.end(), [](const Member *a, const Member *b) {
            return a->prox != b->prox ? a->prox < b->prox : a->x < b->x;
        });
        for (std::size_t e = 0; e < elite.size() && e < p.k_max && next.size() < p.population; ++e) {
            next.push_back(*elite[e]);
        }
        while (next.size() < p.population) {
            const Member &a = tournament(pop);
            const Member &b = tournament(pop);
            std::vector<double> child = a.x;
            if (do_cross(rng)) {
                for (std::size_t f : free) {
                    if (coin(rng)) {
                        child[f] = b.x[f];
                    }
                }
            }
            for (std::size_t f : free) {
                if (do_mutate(rng)) {
                    child[f] = std::clamp(child[f] + noise(rng) * p.mutation_sigma * spec.feature_width(f),
                                          spec.feature_lo(f), spec.feature_hi(f));
                }
            }
            Member m = evaluate_member(std::move(child));
            record(m);
            next.push_back(std::move(m));
        }
        pop = std::move(next);
        result.best_proximity.push_back(best);
    }
    const std::size_t archived = archive.size();
    result.candidates = pick_diverse(rank_by_proximity(std::move(archive), x_f, spec, archived), x_f, spec,
                                     p.k_max, p.diversity_weight);
    return result;
}

// ---------------------------------------------------------------- KD-tree

PassingIndex::PassingIndex(const Dataset &d, const InputSpec &spec, std::size_t leaf_size)
    : data_(&d), spec_(&spec) {
    d.validate();
    if (d.dimension() != spec.dimension()) {
        throw DomainError("dataset and spec dimensions disagree");
    }
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d.y_label[i] == Verdict::Pass) {
            rows_.push_back(i);
        }
    }
    if (!rows_.empty()) {
        build(0, rows_.size(), std::max<std::size_t>(leaf_size, 1));
    }
}

int PassingIndex::build(std::size_t begin, std::size_t end, std::size_t leaf_size) {
    const std::size_t dim = spec_->dimension();
    const int id = static_cast<int>(nodes_.size());
    Node node;
    node.begin = begin;
    node.end = end;
    node.box_lo.assign(dim, 0.0);
    node.box_hi.assign(dim, 0.0);
    for (std::size_t f = 0; f < dim; ++f) {
        double lo = data_->X[rows_[begin]][f];
        double hi = lo;
        for (std::size_t i = begin; i < end; ++i) {
            lo = std::min(lo, data_->X[rows_[i]][f]);
            hi = std::max(hi, data_->X[rows_[i]][f]);
        }
        node.box_lo[f] = lo;
        node.box_hi[f] = hi;
    }
    nodes_.push_back(std::move(node));
    if (end - begin <= leaf_size) {
        return id;
    }
    std::size_t axis = 0;
    double spread = -1.0;
    for (std::size_t f = 0; f < dim; ++f) {
        const auto &n = nodes_[static_cast<std::size_t>(id)];
        const double s = (n.box_hi[f] - n.box_lo[f]) / spec_->feature_width(f);
        if (s > spread) {
            spread = s;
            axis = f;
        }
    }
    if (spread <= 0.0) {
        return id;
    }
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(rows_.begin() + static_cast<std::ptrdiff_t>(begin),
                     rows_.begin() + static_cast<std::ptrdiff_t>(mid),
                     rows_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t a, std::size_t b) {
                         const double va = data_->X[a][axis];
                         const double vb = data_->X[b][axis];
                         return va != vb ? va < vb : a < b;
                     });
    const int left = build(begin, mid, leaf_size);
    const int right = build(mid, end, leaf_size);
    nodes_[static_cast<std::size_t>(id)].left = left;
    nodes_[static_cast<std::size_t>(id)].right = right;
    return id;
}

double PassingIndex::lower_bound(const Node &n, std::span<const double> x) const {
    double sum = 0.0;
    for (std::size_t f = 0; f < x.size(); ++f) {
        double gap = 0.0;
        if (x[f] < n.box_lo[f]) {
            gap = n.box_lo[f] - x[f];
        } else if (x[f] > n.box_hi[f]) {
            gap = x[f] - n.box_hi[f];
        }
        sum += gap / spec_->feature_width(f);
    }
    return sum / static_cast<double>(x.size());
}

std::vector<Neighbor> PassingIndex::nearest(std::span<const double> x, std::size_t k) const {
    if (x.size() != spec_->dimension()) {
        throw DomainError("query dimension does not match the index");
    }
    std::vector<Neighbor> heap;
    if (k == 0 || rows_.empty()) {
        return heap;
    }
    auto worse = [](const Neighbor &a, const Neighbor &b) {
        return a.distance != b.distance ? a.distance < b.distance : a.row < b.row;
    };
    auto visit = [&](auto &&self, int id) -> void {
        const Node &n = nodes_[static_cast<std::size_t>(id)];
        if (heap.size() == k) {
            const double worst = heap.front().distance;
            if (lower_bound(n, x) > worst * (1.0 + 1e-9) + 1e-15) {
                return;
            }
        }
        if (n.left < 0) {
            for (std::size_t i = n.begin; i < n.end; ++i) {
                const Neighbor cand{rows_[i], proximity(x, data_->X[rows_[i]], *spec_)};
                if (heap.size() < k) {
                    heap.push_back(cand);
                    std::push_heap(heap.begin(), heap.end(), worse);
                } else if (worse(cand, heap.front())) {
                    std::pop_heap(heap.begin(), heap.end(), worse);
                    heap.back() = cand;
                    std::push_heap(heap.begin(), heap.end(), worse);
                }
            }
            return;
        }
        const Node &l = nodes_[static_cast<std::size_t>(n.left)];
        const Node &r = nodes_[static_cast<std::size_t>(n.right)];
        if (lower_bound(l, x) <= lower_bound(r, x)) {
            self(self, n.left);
            self(self, n.right);
        } else {
            self(self, n.right);
            self(self, n.left);
        }
    };
    visit(visit, 0);
    std::sort_heap(heap.begin(), heap.end(), worse);
    return heap;
}

std::vector<Candidate> generate_kd(std::span<const double> x_f, const Dataset &d,
                                   const PassingIndex &index, const CausalModel &cm, std::size_t k) {
    std::vector<Candidate> out;
    for (const Neighbor &nb : index.nearest(x_f, k)) {
        out.push_back({d.X[nb.row], cm.predict(d.X[nb.row])});
    }
    return out;
}

// ---------------------------------------------------------------- validation and selection

std::vector<ControlPoint> changed_points(const TestInput &original, const TestInput &modified,
                                         const InputSpec &spec, double tolerance) {
    if (original.size() != spec.dimension() || modified.size() != spec.dimension()) {
        throw DomainError("inputs do not match the spec dimension");
    }
    std::vector<ControlPoint> out;
    for (std::size_t i = 0; i < spec.dimension(); ++i) {
        if (std::abs(original[i] - modified[i]) > tolerance) {
            out.push_back(spec.control_point(i));
        }
    }
    return out;
}

Counterfactual make_counterfactual(const InputSpec &spec, const TestInput &original,
                                   const Candidate &candidate) {
    Counterfactual cf;
    cf.original = original;
    cf.modified = TestInput(spec, candidate.features);
    cf.changed_points = changed_points(cf.original, cf.modified, spec);
    cf.predicted = candidate.predicted;
    cf.proximity = proximity(cf.original.features(), cf.modified.features(), spec);
    return cf;
}

void validate(const Plant &plant, const Formula &phi, std::vector<Counterfactual> &cfs) {
    parallel_for(cfs.size(), [&](std::size_t i) {
        Validation v;
        try {
            v.robustness = evaluate(plant, phi, cfs[i].modified).value;
            v.verdict = verdict(v.robustness);
        } catch (const SimulationDivergence &e) {
            v.robustness = 0.0;
            v.verdict = Verdict::Fail;
            v.diagnostic = e.what();
        }
        cfs[i].validated = v;
    });
}

std::vector<Counterfactual> select(std::vector<Counterfactual> cfs, std::size_t k_max,
                                   const InputSpec &spec) {
    std::vector<Counterfactual> pool;
    for (auto &cf : cfs) {
        if (cf.valid()) {
            pool.push_back(std::move(cf));
        }
    }
    std::vector<Counterfactual> chosen;
    std::vector<bool> taken(pool.size(), false);
    while (chosen.size() < k_max) {
        std::size_t best = pool.size();
        double best_spread = 0.0;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (taken[i]) {
                continue;
            }
            double spread = 0.0;
            for (const auto &c : chosen) {
                spread += proximity(pool[i].modified.features(), c.modified.features(), spec);
            }
            if (!chosen.empty()) {
                spread /= static_cast<double>(chosen.size());
            }
            bool better = best == pool.size();
            if (!better) {
                const auto &b = pool[best];
                if (pool[i].proximity != b.proximity) {
                    better = pool[i].proximity < b.proximity;
                } else if (spread != best_spread) {
                    better = spread > best_spread;
                } else {
                    better = pool[i].modified.features() < b.modified.features();
                }
            }
            if (better) {
                best = i;
                best_spread = spread;
            }
        }
        if (best == pool.size()) {
            break;
        }
        taken[best] = true;
        chosen.push_back(pool[best]);
    }
    return chosen;
}

json to_json(const Counterfactual &cf, const InputSpec &spec) {
    json changed = json::array();
    for (const ControlPoint &cp : cf.changed_points) {
        const std::size_t f = spec.feature_index(cp);
        const Interval iv = segment_interval(spec.signal(cp.signal), cp.index);
        changed.push_back({{"signal", spec.signal(cp.signal).name},
                           {"index", cp.index},
                           {"name", control_point_name(spec, cp)},
                           {"interval", {iv.lo, iv.hi}},
                           {"old", cf.original[f]},
                           {"new", cf.modified[f]}});
    }
    json j;
    j["original"] = cf.original.features();
    j["modified"] = cf.modified.features();
    j["proximity"] = cf.proximity;
    j["predicted"] = {{"estimate", cf.predicted.estimate},
                      {"verdict", std::string(to_string(cf.predicted.verdict))}};
    j["changed_points"] = std::move(changed);
    if (cf.validated) {
        json v{{"robustness", cf.validated->robustness},
               {"verdict", std::string(to_string(cf.validated->verdict))}};
        if (cf.validated->diagnostic) {
            v["diagnostic"] = *cf.validated->diagnostic;
        }
        j["validated"] = std::move(v);
    } else {
        j["validated"] = nullptr;
    }
    j["valid"] = cf.valid();
    return j;
}

Counterfactual counterfactual_from_json(const json &j, const InputSpec &spec) {
    try {
        Counterfactual cf;
        cf.original = TestInput(spec, j.at("original").get<std::vector<double>>());
        cf.modified = TestInput(spec, j.at("modified").get<std::vector<double>>());
        cf.changed_points = changed_points(cf.original, cf.modified, spec);
        cf.proximity = proximity(cf.original.features(), cf.modified.features(), spec);
        cf.predicted.estimate = j.at("predicted").at("estimate").get<double>();
        cf.predicted.verdict = parse_verdict(j.at("predicted").at("verdict").get<std::string>());
        const json &v = j.at("validated");
        if (!v.is_null()) {
            Validation val;
            val.robustness = v.at("robustness").get<double>();
            val.verdict = parse_verdict(v.at("verdict").get<std::string>());
            if (v.contains("diagnostic")) {
                val.diagnostic = v.at("diagnostic").get<std::string>();
            }
            cf.validated = val;
        }
        return cf;
    } catch (const json::exception &e) {
        throw ConfigError(std::string("malformed counterfactual: ") + e.what());
    } catch (const DomainError &e) {
        throw ConfigError(std::string("malformed counterfactual: ") + e.what());
    }
}

} // namespace decaf
