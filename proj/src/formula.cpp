#include "stlsynth/formula.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <utility>
#include <vector>

namespace stlsynth {

struct Formula::Node {
    NodeKind kind;
    Interval window;
    RectPredicate rect;
    Formula left, right;
    int horizon = 0;
};

namespace {

void check_interval(const Interval& w) {
    if (w.lo < 0 || w.hi < 0)
        throw FormulaError("interval bounds must be non-negative");
    if (w.lo > w.hi)
        throw FormulaError("interval lower bound exceeds upper bound");
}

void check_rect(const RectPredicate& r) {
    if (!(r.x_lo < r.x_hi) || !(r.y_lo < r.y_hi))
        throw FormulaError("rectangle must have positive extent on both axes");
}

}  // namespace

Formula Formula::truth() {
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::True;
    return Formula(std::move(n));
}

Formula Formula::pred(RectPredicate r) {
    check_rect(r);
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Predicate;
    n->rect = r;
    return Formula(std::move(n));
}

Formula Formula::negate(const Formula& predicate) {
    if (!predicate.valid() || predicate.kind() != NodeKind::Predicate)
        throw FormulaError("negation is only defined on predicates");
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Not;
    n->left = predicate;
    return Formula(std::move(n));
}

Formula Formula::conj(const Formula& a, const Formula& b) {
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::And;
    n->left = a;
    n->right = b;
    n->horizon = std::max(a.horizon(), b.horizon());
    return Formula(std::move(n));
}

Formula Formula::disj(const Formula& a, const Formula& b) {
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Or;
    n->left = a;
    n->right = b;
    n->horizon = std::max(a.horizon(), b.horizon());
    return Formula(std::move(n));
}

Formula Formula::eventually(Interval window, const Formula& f) {
    check_interval(window);
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Eventually;
    n->window = window;
    n->left = f;
    n->horizon = window.hi + f.horizon();
    return Formula(std::move(n));
}

Formula Formula::always(Interval window, const Formula& f) {
    check_interval(window);
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Always;
    n->window = window;
    n->left = f;
    n->horizon = window.hi + f.horizon();
    return Formula(std::move(n));
}

Formula Formula::until(Interval window, const Formula& a, const Formula& b) {
    check_interval(window);
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Until;
    n->window = window;
    n->left = a;
    n->right = b;
    n->horizon = window.hi + std::max(a.horizon(), b.horizon());
    return Formula(std::move(n));
}

NodeKind Formula::kind() const { return node_->kind; }

const Interval& Formula::window() const { return node_->window; }

const RectPredicate& Formula::rect() const { return node_->rect; }

int Formula::arity() const {
    switch (node_->kind) {
        case NodeKind::True:
        case NodeKind::Predicate: return 0;
        case NodeKind::Not:
        case NodeKind::Eventually:
        case NodeKind::Always: return 1;
        default: return 2;
    }
}

const Formula& Formula::child(int i) const {
    return i == 0 ? node_->left : node_->right;
}

int Formula::horizon() const { return node_->horizon; }

const void* Formula::identity() const noexcept { return node_.get(); }

bool Formula::structurally_equal(const Formula& other) const {
    const Node* a = node_.get();
    const Node* b = other.node_.get();
    if (a == b) return true;
    if (!a || !b) return false;
    if (a->kind != b->kind) return false;
    switch (a->kind) {
        case NodeKind::True: return true;
        case NodeKind::Predicate: return a->rect == b->rect;
        case NodeKind::Not:
            return a->left.structurally_equal(b->left);
        case NodeKind::And:
        case NodeKind::Or:
            return a->left.structurally_equal(b->left) &&
                   a->right.structurally_equal(b->right);
        case NodeKind::Eventually:
        case NodeKind::Always:
            return a->window == b->window && a->left.structurally_equal(b->left);
        case NodeKind::Until:
            return a->window == b->window && a->left.structurally_equal(b->left) &&
                   a->right.structurally_equal(b->right);
    }
    return false;
}

std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace {

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    Formula run() {
        Formula f = expr();
        skip_ws();
        // One optional unparenthesized binary operator at top level, so that
        // e.g. "F[0,2](..) & G[4,7](..)" is accepted without outer parens.
        if (!done()) {
            char c = peek();
            if (c == '&' || c == '|' || c == 'U') {
                f = finish_binary(f);
            }
        }
        skip_ws();
        if (!done()) fail("unexpected trailing input");
        return f;
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(msg, pos_);
    }

    bool done() const { return pos_ >= text_.size(); }
    char peek() const { return done() ? '\0' : text_[pos_]; }

    void skip_ws() {
        while (!done() && std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
    }

    void expect(char c) {
        skip_ws();
        if (peek() != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    bool consume_word(std::string_view w) {
        skip_ws();
        if (text_.substr(pos_, w.size()) == w) {
            pos_ += w.size();
            return true;
        }
        return false;
    }

    int integer() {
        skip_ws();
        std::size_t start = pos_;
        bool neg = false;
        if (peek() == '-') { neg = true; ++pos_; }
        if (!std::isdigit(static_cast<unsigned char>(peek())))
            fail("expected integer");
        long v = 0;
        while (std::isdigit(static_cast<unsigned char>(peek()))) {
            v = v * 10 + (text_[pos_] - '0');
            if (v > 1'000'000) { pos_ = start; fail("interval bound too large"); }
            ++pos_;
        }
        return static_cast<int>(neg ? -v : v);
    }

    double number() {
        skip_ws();
        std::size_t start = pos_;
        if (peek() == '-' || peek() == '+') ++pos_;
        bool any = false;
        while (std::isdigit(static_cast<unsigned char>(peek()))) { ++pos_; any = true; }
        if (peek() == '.') {
            ++pos_;
            while (std::isdigit(static_cast<unsigned char>(peek()))) { ++pos_; any = true; }
        }
        if (!any) { pos_ = start; fail("expected number"); }
        if (peek() == 'e' || peek() == 'E') {
            ++pos_;
            if (peek() == '-' || peek() == '+') ++pos_;
            if (!std::isdigit(static_cast<unsigned char>(peek()))) fail("malformed exponent");
            while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
        }
        std::string tok(text_.substr(start, pos_ - start));
        return std::strtod(tok.c_str(), nullptr);
    }

    Interval interval() {
        expect('[');
        std::size_t at = pos_;
        int lo = integer();
        expect(',');
        int hi = integer();
        expect(']');
        if (lo < 0 || hi < 0) {
            pos_ = at;
            fail("interval bounds must be non-negative");
        }
        if (lo > hi) {
            pos_ = at;
            fail("interval lower bound exceeds upper bound");
        }
        return Interval{lo, hi};
    }

    Formula predicate() {
        // 'R' already consumed.
        expect('(');
        std::size_t at = pos_;
        double a = number();
        expect(',');
        double b = number();
        expect(',');
        double c = number();
        expect(',');
        double d = number();
        expect(')');
        if (!(a < b) || !(c < d)) {
            pos_ = at;
            fail("rectangle must have positive extent on both axes");
        }
        return Formula::pred(RectPredicate{a, b, c, d});
    }

    Formula finish_binary(Formula lhs) {
        skip_ws();
        char op = peek();
        if (op == '&') {
            ++pos_;
            return Formula::conj(lhs, expr());
        }
        if (op == '|') {
            ++pos_;
            return Formula::disj(lhs, expr());
        }
        if (op == 'U') {
            ++pos_;
            Interval w = interval();
            return Formula::until(w, lhs, expr());
        }
        fail("expected binary operator '&', '|' or 'U[a,b]'");
    }

    Formula expr() {
        skip_ws();
        if (done()) fail("unexpected end of input");
        char c = peek();
        if (c == 'R') {
            ++pos_;
            return predicate();
        }
        if (c == '!') {
            ++pos_;
            expect('(');
            skip_ws();
            if (peek() != 'R') fail("negation applies only to a predicate");
            ++pos_;
            Formula p = predicate();
            expect(')');
            return Formula::negate(p);
        }
        if (c == 'F' || c == 'G') {
            ++pos_;
            Interval w = interval();
            expect('(');
            Formula f = expr();
            expect(')');
            return c == 'F' ? Formula::eventually(w, f) : Formula::always(w, f);
        }
        if (c == '(') {
            ++pos_;
            Formula lhs = expr();
            Formula f = finish_binary(lhs);
            expect(')');
            return f;
        }
        if (consume_word("true")) return Formula::truth();
        fail("expected formula");
    }
};

void format_into(const Formula& f, std::string& out) {
    switch (f.kind()) {
        case NodeKind::True:
            out += "true";
            return;
        case NodeKind::Predicate: {
            const RectPredicate& r = f.rect();
            out += "R(";
            out += format_double(r.x_lo);
            out += ',';
            out += format_double(r.x_hi);
            out += ',';
            out += format_double(r.y_lo);
            out += ',';
            out += format_double(r.y_hi);
            out += ')';
            return;
        }
        case NodeKind::Not:
            out += "!(";
            format_into(f.child(0), out);
            out += ')';
            return;
        case NodeKind::And:
        case NodeKind::Or:
            out += '(';
            format_into(f.child(0), out);
            out += f.kind() == NodeKind::And ? " & " : " | ";
            format_into(f.child(1), out);
            out += ')';
            return;
        case NodeKind::Eventually:
        case NodeKind::Always:
            out += f.kind() == NodeKind::Eventually ? 'F' : 'G';
            out += '[';
            out += std::to_string(f.window().lo);
            out += ',';
            out += std::to_string(f.window().hi);
            out += "](";
            format_into(f.child(0), out);
            out += ')';
            return;
        case NodeKind::Until:
            out += '(';
            format_into(f.child(0), out);
            out += " U[";
            out += std::to_string(f.window().lo);
            out += ',';
            out += std::to_string(f.window().hi);
            out += "] ";
            format_into(f.child(1), out);
            out += ')';
            return;
    }
}

}  // namespace

Formula parse(std::string_view text) { return Parser(text).run(); }

std::string format(const Formula& f) {
    std::string out;
    format_into(f, out);
    return out;
}

}  // namespace stlsynth
