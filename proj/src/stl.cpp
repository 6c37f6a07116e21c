#include "decaf/stl.hpp"

#include "decaf/error.hpp"
#include "decaf/util.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <limits>
#include <set>

namespace decaf {

struct Formula::Node {
    Kind kind = Kind::Atom;
    std::string signal;
    Comparison comparison = Comparison::Less;
    double threshold = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    std::vector<Formula> children;
};

std::string_view to_string(Comparison c) {
    switch (c) {
    case Comparison::Less:
        return "<";
    case Comparison::LessEqual:
        return "<=";
    case Comparison::Greater:
        return ">";
    case Comparison::GreaterEqual:
        return ">=";
    }
    return "?";
}

namespace {

void check_interval(double a, double b) {
    if (!std::isfinite(a) || !std::isfinite(b) || a < 0.0 || a > b) {
        throw DomainError("malformed temporal interval [" + format_double(a) + "," +
                          format_double(b) + "]");
    }
}

} // namespace

Formula Formula::atom(std::string signal, Comparison op, double threshold) {
    if (!std::isfinite(threshold)) {
        throw DomainError("atom threshold must be finite");
    }
    auto n = std::make_shared<Node>();
    n->kind = Kind::Atom;
    n->signal = std::move(signal);
    n->comparison = op;
    n->threshold = threshold;
    return Formula(std::move(n));
}

Formula Formula::negation(Formula operand) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Not;
    n->children = {std::move(operand)};
    return Formula(std::move(n));
}

Formula Formula::conjunction(Formula lhs, Formula rhs) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::And;
    n->children = {std::move(lhs), std::move(rhs)};
    return Formula(std::move(n));
}

Formula Formula::disjunction(Formula lhs, Formula rhs) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Or;
    n->children = {std::move(lhs), std::move(rhs)};
    return Formula(std::move(n));
}

Formula Formula::implication(Formula lhs, Formula rhs) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Implies;
    n->children = {std::move(lhs), std::move(rhs)};
    return Formula(std::move(n));
}

Formula Formula::always(double a, double b, Formula operand) {
    check_interval(a, b);
    auto n = std::make_shared<Node>();
    n->kind = Kind::Always;
    n->lower = a;
    n->upper = b;
    n->children = {std::move(operand)};
    return Formula(std::move(n));
}

Formula Formula::eventually(double a, double b, Formula operand) {
    check_interval(a, b);
    auto n = std::make_shared<Node>();
    n->kind = Kind::Eventually;
    n->lower = a;
    n->upper = b;
    n->children = {std::move(operand)};
    return Formula(std::move(n));
}

Formula Formula::until(double a, double b, Formula lhs, Formula rhs) {
    check_interval(a, b);
    auto n = std::make_shared<Node>();
    n->kind = Kind::Until;
    n->lower = a;
    n->upper = b;
    n->children = {std::move(lhs), std::move(rhs)};
    return Formula(std::move(n));
}

Formula::Kind Formula::kind() const { return node_->kind; }
const std::string &Formula::signal() const { return node_->signal; }
Comparison Formula::comparison() const { return node_->comparison; }
double Formula::threshold() const { return node_->threshold; }
double Formula::lower() const { return node_->lower; }
double Formula::upper() const { return node_->upper; }
const std::vector<Formula> &Formula::children() const { return node_->children; }

double Formula::horizon() const {
    double child = 0.0;
    for (const auto &c : node_->children) {
        child = std::max(child, c.horizon());
    }
    switch (node_->kind) {
    case Kind::Always:
    case Kind::Eventually:
    case Kind::Until:
        return node_->upper + child;
    default:
        return child;
    }
}

std::vector<std::string> Formula::channels() const {
    std::set<std::string> out;
    std::vector<const Formula *> stack{this};
    while (!stack.empty()) {
        const Formula *f = stack.back();
        stack.pop_back();
        if (f->kind() == Kind::Atom) {
            out.insert(f->signal());
        }
        for (const auto &c : f->children()) {
            stack.push_back(&c);
        }
    }
    return {out.begin(), out.end()};
}

std::string Formula::to_string() const {
    const auto interval = [this] {
        return "[" + format_double(node_->lower) + "," + format_double(node_->upper) + "]";
    };
    const auto &ch = node_->children;
    switch (node_->kind) {
    case Kind::Atom:
        return node_->signal + " " + std::string(decaf::to_string(node_->comparison)) + " " +
               format_double(node_->threshold);
    case Kind::Not:
        return "not (" + ch[0].to_string() + ")";
    case Kind::And:
        return "(" + ch[0].to_string() + ") and (" + ch[1].to_string() + ")";
    case Kind::Or:
        return "(" + ch[0].to_string() + ") or (" + ch[1].to_string() + ")";
    case Kind::Implies:
        return "(" + ch[0].to_string() + ") -> (" + ch[1].to_string() + ")";
    case Kind::Always:
        return "always" + interval() + " (" + ch[0].to_string() + ")";
    case Kind::Eventually:
        return "eventually" + interval() + " (" + ch[0].to_string() + ")";
    case Kind::Until:
        return "(" + ch[0].to_string() + ") until" + interval() + " (" + ch[1].to_string() + ")";
    }
    return {};
}

bool operator==(const Formula &lhs, const Formula &rhs) {
    const auto &a = *lhs.node_;
    const auto &b = *rhs.node_;
    if (a.kind != b.kind || a.children.size() != b.children.size()) {
        return false;
    }
    if (a.kind == Formula::Kind::Atom) {
        return a.signal == b.signal && a.comparison == b.comparison && a.threshold == b.threshold;
    }
    if (a.lower != b.lower || a.upper != b.upper) {
        return false;
    }
    return std::equal(a.children.begin(), a.children.end(), b.children.begin());
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace {

class Parser {
  public:
    explicit Parser(std::string_view text) : text_(text) {}

    Formula parse() {
        Formula f = parse_implication();
        skip_ws();
        if (pos_ != text_.size()) {
            throw ParseError("unexpected trailing input '" + std::string(text_.substr(pos_)) + "'",
                             pos_);
        }
        return f;
    }

  private:
    std::string_view text_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
    }

    bool at_symbol(std::string_view sym) {
        skip_ws();
        return text_.substr(pos_, sym.size()) == sym;
    }

    bool accept_symbol(std::string_view sym) {
        if (at_symbol(sym)) {
            pos_ += sym.size();
            return true;
        }
        return false;
    }

    void expect_symbol(std::string_view sym) {
        if (!accept_symbol(sym)) {
            throw ParseError("expected '" + std::string(sym) + "'", pos_);
        }
    }

    static bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
    static bool ident_char(char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
    }

    std::string_view peek_word() {
        skip_ws();
        std::size_t end = pos_;
        if (end < text_.size() && ident_start(text_[end])) {
            while (end < text_.size() && ident_char(text_[end])) {
                ++end;
            }
        }
        return text_.substr(pos_, end - pos_);
    }

    bool accept_keyword(std::string_view kw) {
        if (peek_word() == kw) {
            pos_ += kw.size();
            return true;
        }
        return false;
    }

    double parse_number() {
        skip_ws();
        const std::size_t start = pos_;
        std::size_t end = pos_;
        if (end < text_.size() && (text_[end] == '-' || text_[end] == '+')) {
            ++end;
        }
        while (end < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[end])) || text_[end] == '.' ||
                text_[end] == 'e' || text_[end] == 'E' ||
                ((text_[end] == '-' || text_[end] == '+') &&
                 (text_[end - 1] == 'e' || text_[end - 1] == 'E')))) {
            ++end;
        }
        std::string_view token = text_.substr(start, end - start);
        if (!token.empty() && token.front() == '+') {
            token.remove_prefix(1);
        }
        try {
            double v = parse_double(token);
            pos_ = end;
            return v;
        } catch (const ConfigError &) {
            throw ParseError("expected a number", start);
        }
    }

    std::pair<double, double> parse_interval() {
        const std::size_t start = pos_;
        expect_symbol("[");
        const double a = parse_number();
        expect_symbol(",");
        const double b = parse_number();
        expect_symbol("]");
        if (a < 0.0 || a > b) {
            throw ParseError("malformed interval [" + format_double(a) + "," + format_double(b) + "]",
                             start);
        }
        return {a, b};
    }

    Formula parse_implication() {
        Formula lhs = parse_or();
        if (accept_symbol("->")) {
            Formula rhs = parse_implication();
            return Formula::implication(std::move(lhs), std::move(rhs));
        }
        return lhs;
    }

    Formula parse_or() {
        Formula lhs = parse_and();
        while (accept_keyword("or")) {
            lhs = Formula::disjunction(std::move(lhs), parse_and());
        }
        return lhs;
    }

    Formula parse_and() {
        Formula lhs = parse_until();
        while (accept_keyword("and")) {
            lhs = Formula::conjunction(std::move(lhs), parse_until());
        }
        return lhs;
    }

    Formula parse_until() {
        Formula lhs = parse_unary();
        if (accept_keyword("until")) {
            auto [a, b] = parse_interval();
            Formula rhs = parse_unary();
            return Formula::until(a, b, std::move(lhs), std::move(rhs));
        }
        return lhs;
    }

    Formula parse_unary() {
        if (accept_keyword("not")) {
            return Formula::negation(parse_unary());
        }
        if (accept_keyword("always")) {
            auto [a, b] = parse_interval();
            return Formula::always(a, b, parse_unary());
        }
        if (accept_keyword("eventually")) {
            auto [a, b] = parse_interval();
            return Formula::eventually(a, b, parse_unary());
        }
        return parse_primary();
    }

    Formula parse_primary() {
        if (accept_symbol("(")) {
            Formula inner = parse_implication();
            expect_symbol(")");
            return inner;
        }
        const std::size_t start = pos_;
        std::string_view word = peek_word();
        if (word.empty()) {
            throw ParseError("expected a signal name or '('", pos_);
        }
        static constexpr std::string_view keywords[] = {"not", "and", "or", "always", "eventually",
                                                        "until"};
        for (auto kw : keywords) {
            if (word == kw) {
                throw ParseError("unexpected keyword '" + std::string(word) + "'", start);
            }
        }
        pos_ += word.size();
        Comparison op{};
        if (accept_symbol("<=")) {
            op = Comparison::LessEqual;
        } else if (accept_symbol(">=")) {
            op = Comparison::GreaterEqual;
        } else if (accept_symbol("<")) {
            op = Comparison::Less;
        } else if (accept_symbol(">")) {
            op = Comparison::Greater;
        } else {
            throw ParseError("unknown or missing comparison operator after '" + std::string(word) +
                                 "'",
                             pos_);
        }
        const double value = parse_number();
        return Formula::atom(std::string(word), op, value);
    }
};

} // namespace

Formula parse_formula(std::string_view text) { return Parser(text).parse(); }

// ---------------------------------------------------------------------------
// Trace
// ---------------------------------------------------------------------------

Trace::Trace(double dt, std::vector<std::string> names, std::vector<std::vector<double>> channels)
    : dt_(dt), names_(std::move(names)), channels_(std::move(channels)) {
    if (!(dt > 0.0)) {
        throw DomainError("trace sampling step must be positive");
    }
    if (names_.size() != channels_.size() || channels_.empty()) {
        throw DomainError("trace needs one name per channel and at least one channel");
    }
    const std::size_t n = channels_.front().size();
    for (std::size_t c = 0; c < channels_.size(); ++c) {
        if (channels_[c].size() != n) {
            throw DomainError("trace channel '" + names_[c] + "' has a different length");
        }
        for (double v : channels_[c]) {
            if (!std::isfinite(v)) {
                throw DomainError("trace channel '" + names_[c] + "' contains a non-finite value");
            }
        }
    }
    times_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        times_[i] = static_cast<double>(i) * dt;
    }
}

bool Trace::has_channel(std::string_view name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
}

const std::vector<double> &Trace::channel(std::string_view name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) {
        throw TraceError("unknown channel '" + std::string(name) + "'");
    }
    return channels_[static_cast<std::size_t>(it - names_.begin())];
}

std::string Trace::to_csv() const {
    std::string out = "time";
    for (const auto &n : names_) {
        out += ',' + n;
    }
    out += '\n';
    for (std::size_t i = 0; i < times_.size(); ++i) {
        out += format_double(times_[i]);
        for (const auto &ch : channels_) {
            out += ',' + format_double(ch[i]);
        }
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Robustness
// ---------------------------------------------------------------------------

namespace {

constexpr double kIndexTol = 1e-9;

std::size_t first_offset(double a, double dt) {
    return static_cast<std::size_t>(std::ceil(a / dt - kIndexTol));
}

std::size_t last_offset(double b, double dt) {
    return static_cast<std::size_t>(std::floor(b / dt + kIndexTol));
}

/// Number of samples beyond the evaluation instant the formula reads.
std::size_t index_horizon(const Formula &f, double dt) {
    std::size_t child = 0;
    for (const auto &c : f.children()) {
        child = std::max(child, index_horizon(c, dt));
    }
    switch (f.kind()) {
    case Formula::Kind::Always:
    case Formula::Kind::Eventually:
    case Formula::Kind::Until:
        return last_offset(f.upper(), dt) + child;
    default:
        return child;
    }
}

/// Sliding-window extremum: out[i] = ext(in[i+ka .. i+kb]) for i in [0, count).
template <typename Better>
std::vector<double> window_extremum(const std::vector<double> &in, std::size_t ka, std::size_t kb,
                                    std::size_t count, Better better) {
    std::vector<double> out(count);
    std::deque<std::size_t> dq;
    std::size_t next = ka;
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t hi = i + kb;
        while (next <= hi) {
            while (!dq.empty() && !better(in[dq.back()], in[next])) {
                dq.pop_back();
            }
            dq.push_back(next);
            ++next;
        }
        while (dq.front() < i + ka) {
            dq.pop_front();
        }
        out[i] = in[dq.front()];
    }
    return out;
}

/// Robustness of f at every sample index in [lo, lo + count).
std::vector<double> eval(const Formula &f, const Trace &trace, std::size_t lo, std::size_t count) {
    const double dt = trace.dt();
    switch (f.kind()) {
    case Formula::Kind::Atom: {
        const auto &ch = trace.channel(f.signal());
        std::vector<double> out(count);
        const bool upper = f.comparison() == Comparison::Less ||
                           f.comparison() == Comparison::LessEqual;
        for (std::size_t i = 0; i < count; ++i) {
            const double s = ch[lo + i];
            out[i] = upper ? f.threshold() - s : s - f.threshold();
        }
        return out;
    }
    case Formula::Kind::Not: {
        auto out = eval(f.children()[0], trace, lo, count);
        for (double &v : out) {
            v = -v;
        }
        return out;
    }
    case Formula::Kind::And:
    case Formula::Kind::Or:
    case Formula::Kind::Implies: {
        auto lhs = eval(f.children()[0], trace, lo, count);
        const auto rhs = eval(f.children()[1], trace, lo, count);
        for (std::size_t i = 0; i < count; ++i) {
            switch (f.kind()) {
            case Formula::Kind::And:
                lhs[i] = std::min(lhs[i], rhs[i]);
                break;
            case Formula::Kind::Or:
                lhs[i] = std::max(lhs[i], rhs[i]);
                break;
            default:
                lhs[i] = std::max(-lhs[i], rhs[i]);
                break;
            }
        }
        return lhs;
    }
    case Formula::Kind::Always:
    case Formula::Kind::Eventually: {
        const std::size_t ka = first_offset(f.lower(), dt);
        const std::size_t kb = last_offset(f.upper(), dt);
        if (ka > kb) {
            throw TraceError("temporal interval of '" + f.to_string() +
                             "' contains no sample instant");
        }
        const auto child = eval(f.children()[0], trace, lo, count + kb);
        if (f.kind() == Formula::Kind::Always) {
            return window_extremum(child, ka, kb, count, [](double a, double b) { return a < b; });
        }
        return window_extremum(child, ka, kb, count, [](double a, double b) { return a > b; });
    }
    case Formula::Kind::Until: {
        const std::size_t ka = first_offset(f.lower(), dt);
        const std::size_t kb = last_offset(f.upper(), dt);
        if (ka > kb) {
            throw TraceError("temporal interval of '" + f.to_string() +
                             "' contains no sample instant");
        }
        const auto lhs = eval(f.children()[0], trace, lo, count + kb);
        const auto rhs = eval(f.children()[1], trace, lo, count + kb);
        std::vector<double> out(count);
        for (std::size_t i = 0; i < count; ++i) {
            double best = -std::numeric_limits<double>::infinity();
            double prefix = std::numeric_limits<double>::infinity(); // min of lhs on [i, j)
            for (std::size_t j = i; j <= i + kb; ++j) {
                if (j >= i + ka) {
                    best = std::max(best, std::min(rhs[j], prefix));
                }
                prefix = std::min(prefix, lhs[j]);
            }
            out[i] = best;
        }
        return out;
    }
    }
    return {};
}

} // namespace

Robustness robustness(const Formula &phi, const Trace &trace, double t0) {
    if (trace.size() == 0) {
        throw TraceError("empty trace");
    }
    for (const auto &name : phi.channels()) {
        if (!trace.has_channel(name)) {
            throw TraceError("formula references unknown channel '" + name + "'");
        }
    }
    const double pos = t0 / trace.dt();
    const double rounded = std::round(pos);
    if (t0 < 0.0 || std::abs(pos - rounded) > 1e-6) {
        throw TraceError("t0=" + format_double(t0) + " is not a sample instant");
    }
    const auto i0 = static_cast<std::size_t>(rounded);
    if (i0 + index_horizon(phi, trace.dt()) >= trace.size()) {
        throw TraceError("trace of length " + format_double(trace.times().back()) +
                         " s is too short for formula horizon " + format_double(phi.horizon()) +
                         " s from t0=" + format_double(t0));
    }
    return {eval(phi, trace, i0, 1).front()};
}

Verdict verdict(Robustness rb) { return rb.value < 0.0 ? Verdict::Fail : Verdict::Pass; }

std::string_view to_string(Verdict v) { return v == Verdict::Pass ? "pass" : "fail"; }

Verdict parse_verdict(std::string_view text) {
    if (text == "pass") {
        return Verdict::Pass;
    }
    if (text == "fail") {
        return Verdict::Fail;
    }
    throw ConfigError("verdict must be 'pass' or 'fail', got '" + std::string(text) + "'");
}

} // namespace decaf
