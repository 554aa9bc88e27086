#pragma once

#include <array>
#include <string>
#include <vector>

#include "stlsynth/formula.hpp"

namespace stlsynth {

inline constexpr int kTokenDim = 14;

using TokenVector = std::array<double, kTokenDim>;

// The flat lexical view of a formula: one 14-dimensional vector per element
// of the canonical rendering (operators, brackets, intervals, predicates),
// plus a parallel list of human-readable labels.
struct TokenSeq {
    std::vector<TokenVector> vectors;
    std::vector<std::string> labels;

    std::size_t size() const { return vectors.size(); }
};

enum class GraphNodeKind : std::uint8_t {
    Operator,      // !  &  |  F  G  U
    TimeInterval,  // [a,b] attached to a temporal operator
    Predicate,
};

// Edge relations in the graph view. Every edge points child -> parent.
enum EdgeRelation : int {
    kRelDefault = 0,
    kRelInterval = 1,   // time-interval node -> its temporal operator
    kRelUntilLeft = 2,  // left until operand -> until node
    kRelUntilRight = 3, // right until operand -> until node
};

struct SpecGraphEdge {
    int src = 0;
    int dst = 0;
    int relation = kRelDefault;
};

// Directed tree oriented toward the root: one node per operator, interval
// and predicate (brackets contribute no nodes). Nodes are stored in
// post-order (children before parents, root last), so walking the node list
// front to back doubles as the bottom-up tree-encoder schedule.
struct SpecGraph {
    std::vector<TokenVector> node_vectors;
    std::vector<GraphNodeKind> node_kinds;
    std::vector<std::string> node_labels;
    std::vector<SpecGraphEdge> edges;
    int root = -1;

    std::size_t node_count() const { return node_vectors.size(); }

    // Children of a node with the relation of the connecting edge.
    std::vector<std::pair<int, int>> children_of(int node) const;

    // Debug export: "src dst relation" per line.
    std::string edge_list_text() const;
};

TokenSeq tokenize(const Formula& f);
SpecGraph to_graph(const Formula& f);

// The fixed vector assigned to each token class (interval and predicate
// tokens carry their numbers in the trailing slots).
TokenVector token_vector_negation();
TokenVector token_vector_and();
TokenVector token_vector_or();
TokenVector token_vector_eventually();
TokenVector token_vector_always();
TokenVector token_vector_until();
TokenVector token_vector_lbracket();
TokenVector token_vector_rbracket();
TokenVector token_vector_interval(double lo, double hi);
TokenVector token_vector_predicate(const RectPredicate& r);

}  // namespace stlsynth
