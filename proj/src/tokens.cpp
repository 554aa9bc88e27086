#include "stlsynth/tokens.hpp"

namespace stlsynth {

namespace {

TokenVector one_hot(int slot) {
    TokenVector v{};
    v[slot] = 1.0;
    return v;
}

}  // namespace

TokenVector token_vector_negation()   { return one_hot(0); }
TokenVector token_vector_and()        { return one_hot(1); }
TokenVector token_vector_or()         { return one_hot(2); }
TokenVector token_vector_eventually() { return one_hot(3); }
TokenVector token_vector_always()     { return one_hot(4); }
TokenVector token_vector_until()      { return one_hot(5); }
TokenVector token_vector_lbracket()   { return one_hot(6); }
TokenVector token_vector_rbracket()   { return one_hot(7); }

TokenVector token_vector_interval(double lo, double hi) {
    TokenVector v{};
    v[8] = lo;
    v[9] = hi;
    return v;
}

TokenVector token_vector_predicate(const RectPredicate& r) {
    TokenVector v{};
    v[10] = r.x_lo;
    v[11] = r.x_hi;
    v[12] = r.y_lo;
    v[13] = r.y_hi;
    return v;
}

namespace {

std::string interval_label(const Interval& w) {
    return "[" + std::to_string(w.lo) + "," + std::to_string(w.hi) + "]";
}

std::string predicate_label(const RectPredicate& r) {
    return "R(" + format_double(r.x_lo) + "," + format_double(r.x_hi) + "," +
           format_double(r.y_lo) + "," + format_double(r.y_hi) + ")";
}

class Tokenizer {
public:
    TokenSeq run(const Formula& f) {
        emit_formula(f);
        return std::move(out_);
    }

private:
    TokenSeq out_;

    void emit(TokenVector v, std::string label) {
        out_.vectors.push_back(v);
        out_.labels.push_back(std::move(label));
    }

    void lbracket() { emit(token_vector_lbracket(), "("); }
    void rbracket() { emit(token_vector_rbracket(), ")"); }

    // Mirrors format(): one token per lexical element, brackets included,
    // the interval token immediately after its temporal operator.
    void emit_formula(const Formula& f) {
        switch (f.kind()) {
            case NodeKind::True:
                throw FormulaError("'true' has no token encoding");
            case NodeKind::Predicate:
                emit(token_vector_predicate(f.rect()), predicate_label(f.rect()));
                return;
            case NodeKind::Not:
                emit(token_vector_negation(), "!");
                lbracket();
                emit_formula(f.child(0));
                rbracket();
                return;
            case NodeKind::And:
            case NodeKind::Or:
                lbracket();
                emit_formula(f.child(0));
                if (f.kind() == NodeKind::And)
                    emit(token_vector_and(), "&");
                else
                    emit(token_vector_or(), "|");
                emit_formula(f.child(1));
                rbracket();
                return;
            case NodeKind::Eventually:
            case NodeKind::Always:
                if (f.kind() == NodeKind::Eventually)
                    emit(token_vector_eventually(), "F");
                else
                    emit(token_vector_always(), "G");
                emit(token_vector_interval(f.window().lo, f.window().hi),
                     interval_label(f.window()));
                lbracket();
                emit_formula(f.child(0));
                rbracket();
                return;
            case NodeKind::Until:
                lbracket();
                emit_formula(f.child(0));
                emit(token_vector_until(), "U");
                emit(token_vector_interval(f.window().lo, f.window().hi),
                     interval_label(f.window()));
                emit_formula(f.child(1));
                rbracket();
                return;
        }
    }
};

class GraphBuilder {
public:
    SpecGraph run(const Formula& f) {
        int root = build(f);
        g_.root = root;
        return std::move(g_);
    }

private:
    SpecGraph g_;

    int add_node(TokenVector v, GraphNodeKind kind, std::string label) {
        g_.node_vectors.push_back(v);
        g_.node_kinds.push_back(kind);
        g_.node_labels.push_back(std::move(label));
        return static_cast<int>(g_.node_vectors.size()) - 1;
    }

    void add_edge(int src, int dst, int relation) {
        g_.edges.push_back(SpecGraphEdge{src, dst, relation});
    }

    // Post-order: children are created before their parent, so node indices
    // increase toward the root.
    int build(const Formula& f) {
        switch (f.kind()) {
            case NodeKind::True:
                throw FormulaError("'true' has no token encoding");
            case NodeKind::Predicate:
                return add_node(token_vector_predicate(f.rect()),
                                GraphNodeKind::Predicate, predicate_label(f.rect()));
            case NodeKind::Not: {
                int c = build(f.child(0));
                int n = add_node(token_vector_negation(), GraphNodeKind::Operator, "!");
                add_edge(c, n, kRelDefault);
                return n;
            }
            case NodeKind::And:
            case NodeKind::Or: {
                int a = build(f.child(0));
                int b = build(f.child(1));
                bool is_and = f.kind() == NodeKind::And;
                int n = add_node(is_and ? token_vector_and() : token_vector_or(),
                                 GraphNodeKind::Operator, is_and ? "&" : "|");
                add_edge(a, n, kRelDefault);
                add_edge(b, n, kRelDefault);
                return n;
            }
            case NodeKind::Eventually:
            case NodeKind::Always: {
                int c = build(f.child(0));
                int iv = add_node(token_vector_interval(f.window().lo, f.window().hi),
                                  GraphNodeKind::TimeInterval, interval_label(f.window()));
                bool is_f = f.kind() == NodeKind::Eventually;
                int n = add_node(is_f ? token_vector_eventually() : token_vector_always(),
                                 GraphNodeKind::Operator, is_f ? "F" : "G");
                add_edge(c, n, kRelDefault);
                add_edge(iv, n, kRelInterval);
                return n;
            }
            case NodeKind::Until: {
                int a = build(f.child(0));
                int b = build(f.child(1));
                int iv = add_node(token_vector_interval(f.window().lo, f.window().hi),
                                  GraphNodeKind::TimeInterval, interval_label(f.window()));
                int n = add_node(token_vector_until(), GraphNodeKind::Operator, "U");
                add_edge(a, n, kRelUntilLeft);
                add_edge(b, n, kRelUntilRight);
                add_edge(iv, n, kRelInterval);
                return n;
            }
        }
        throw FormulaError("invalid formula node");
    }
};

}  // namespace

std::vector<std::pair<int, int>> SpecGraph::children_of(int node) const {
    std::vector<std::pair<int, int>> out;
    for (const auto& e : edges)
        if (e.dst == node) out.emplace_back(e.src, e.relation);
    return out;
}

std::string SpecGraph::edge_list_text() const {
    std::string out;
    for (const auto& e : edges) {
        out += std::to_string(e.src);
        out += ' ';
        out += std::to_string(e.dst);
        out += ' ';
        out += std::to_string(e.relation);
        out += '\n';
    }
    return out;
}

TokenSeq tokenize(const Formula& f) { return Tokenizer().run(f); }

SpecGraph to_graph(const Formula& f) { return GraphBuilder().run(f); }

}  // namespace stlsynth
