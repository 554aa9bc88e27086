#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>

namespace stlsynth {

// Thrown by parse() with the byte offset of the offending input position.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, std::size_t offset)
        : std::runtime_error(msg + " (at byte " + std::to_string(offset) + ")"),
          offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// Thrown when a formula violates a structural invariant (bad interval,
// degenerate rectangle, negation of a non-predicate).
class FormulaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class NodeKind : std::uint8_t {
    True,
    Predicate,
    Not,
    And,
    Or,
    Eventually,
    Always,
    Until,
};

// Axis-aligned rectangle predicate: satisfied when the planar position lies
// inside [x_lo,x_hi] x [y_lo,y_hi]. Requires x_lo < x_hi and y_lo < y_hi.
struct RectPredicate {
    double x_lo = 0.0;
    double x_hi = 0.0;
    double y_lo = 0.0;
    double y_hi = 0.0;

    bool operator==(const RectPredicate&) const = default;
};

// Closed discrete-time interval [lo, hi], 0 <= lo <= hi.
struct Interval {
    int lo = 0;
    int hi = 0;

    bool operator==(const Interval&) const = default;
};

// Immutable formula tree. Handles share nodes; all accessors are const and
// the tree is safe to read from any thread after construction.
class Formula {
public:
    Formula() = default;

    static Formula truth();
    static Formula pred(RectPredicate r);
    static Formula negate(const Formula& predicate);  // predicate-level only
    static Formula conj(const Formula& a, const Formula& b);
    static Formula disj(const Formula& a, const Formula& b);
    static Formula eventually(Interval window, const Formula& f);
    static Formula always(Interval window, const Formula& f);
    static Formula until(Interval window, const Formula& a, const Formula& b);

    bool valid() const noexcept { return node_ != nullptr; }
    NodeKind kind() const;
    const Interval& window() const;       // temporal kinds only
    const RectPredicate& rect() const;    // Predicate only
    int arity() const;
    const Formula& child(int i) const;    // 0 = only/left child, 1 = right

    // Number of future steps the formula can reference: evaluating at step t
    // requires t + horizon() <= trajectory horizon.
    int horizon() const;

    bool structurally_equal(const Formula& other) const;

    // Stable identity of the shared tree node (handles copied from the same
    // subtree compare equal). Useful as a memoization key.
    const void* identity() const noexcept;

private:
    struct Node;
    explicit Formula(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    std::shared_ptr<const Node> node_;
};

// Parses the concrete surface syntax:
//   formula := expr (binop expr)?            -- parens optional at top level
//   expr    := 'true'
//            | 'R' '(' num ',' num ',' num ',' num ')'
//            | '!' '(' R-predicate ')'
//            | ('F'|'G') '[' int ',' int ']' '(' formula ')'
//            | '(' expr binop expr ')'
//   binop   := '&' | '|' | 'U' '[' int ',' int ']'
Formula parse(std::string_view text);

// Canonical fully parenthesized rendering; parse(format(f)) == f.
std::string format(const Formula& f);

// Shortest round-tripping decimal rendering of a double (used by format()
// and the CSV/SVG writers).
std::string format_double(double v);

}  // namespace stlsynth
