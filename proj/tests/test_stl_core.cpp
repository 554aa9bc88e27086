#include <doctest.h>

#include "stlsynth/tokens.hpp"
#include "test_support.hpp"

using namespace stlsynth;

TEST_CASE("parse the conjunction of two temporal terms") {
    Formula f = parse("F[0,2](R(1,2,3,4)) & G[4,7](R(0,1,0,1))");
    REQUIRE(f.kind() == NodeKind::And);
    Formula left = f.child(0);
    Formula right = f.child(1);
    CHECK(left.kind() == NodeKind::Eventually);
    CHECK(left.window() == Interval{0, 2});
    CHECK(left.child(0).rect() == RectPredicate{1, 2, 3, 4});
    CHECK(right.kind() == NodeKind::Always);
    CHECK(right.window() == Interval{4, 7});
    CHECK(right.child(0).rect() == RectPredicate{0, 1, 0, 1});
}

TEST_CASE("parse a bare predicate") {
    Formula f = parse("R(0,1,0,1)");
    REQUIRE(f.kind() == NodeKind::Predicate);
    CHECK(f.rect() == RectPredicate{0, 1, 0, 1});
}

TEST_CASE("parse a parenthesized until") {
    Formula f = parse("( R(0,1,0,1) U[2,5] R(2,3,2,3) )");
    REQUIRE(f.kind() == NodeKind::Until);
    CHECK(f.window() == Interval{2, 5});
    CHECK(f.child(0).kind() == NodeKind::Predicate);
    CHECK(f.child(1).rect() == RectPredicate{2, 3, 2, 3});
}

TEST_CASE("parse errors carry byte offsets and reject bad structures") {
    CHECK_THROWS_AS(parse("F[2,1](R(0,1,0,1))"), ParseError);   // reversed window
    CHECK_THROWS_AS(parse("F[-1,2](R(0,1,0,1))"), ParseError);  // negative bound
    CHECK_THROWS_AS(parse("R(1,0,0,1)"), ParseError);           // x_lo >= x_hi
    CHECK_THROWS_AS(parse("R(0,1,1,1)"), ParseError);           // y_lo >= y_hi
    CHECK_THROWS_AS(parse("!(F[0,1](R(0,1,0,1)))"), ParseError);  // not on non-predicate
    CHECK_THROWS_AS(parse("R(0,1,0,1) &"), ParseError);
    CHECK_THROWS_AS(parse(""), ParseError);
    CHECK_THROWS_AS(parse("R(0,1,0,1) R(0,1,0,1)"), ParseError);
    try {
        parse("F[0,2](R(0,1,0,1)");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.offset() > 0);
    }
}

TEST_CASE("format renders canonical text") {
    CHECK(format(Formula::pred(RectPredicate{0, 1, 0, 1})) == "R(0,1,0,1)");
    Formula p = Formula::pred(RectPredicate{0, 1, 0, 1});
    Formula q = Formula::pred(RectPredicate{2, 3, 2, 3});
    CHECK(format(Formula::conj(p, q)) == "(R(0,1,0,1) & R(2,3,2,3))");
    CHECK(format(Formula::eventually(Interval{3, 8}, p)) == "F[3,8](R(0,1,0,1))");
    CHECK(format(Formula::negate(p)) == "!(R(0,1,0,1))");
    CHECK(format(Formula::until(Interval{2, 5}, p, q)) ==
          "(R(0,1,0,1) U[2,5] R(2,3,2,3))");
}

TEST_CASE("round trip on 1000 random formulas of depth <= 4") {
    Rng rng(2024);
    for (int i = 0; i < 1000; ++i) {
        Formula f = testsupport::random_formula(rng, 4);
        Formula back = parse(format(f));
        REQUIRE(back.structurally_equal(f));
    }
}

TEST_CASE("constructor invariants") {
    CHECK_THROWS_AS(Formula::pred(RectPredicate{1, 0, 0, 1}), FormulaError);
    CHECK_THROWS_AS(Formula::eventually(Interval{3, 1},
                                        Formula::pred(RectPredicate{0, 1, 0, 1})),
                    FormulaError);
    CHECK_THROWS_AS(
        Formula::negate(Formula::conj(Formula::pred(RectPredicate{0, 1, 0, 1}),
                                      Formula::pred(RectPredicate{0, 1, 0, 1}))),
        FormulaError);
}

TEST_CASE("tokenize emits the element vectors in reading order") {
    TokenVector conj = token_vector_and();
    TokenVector expect{};
    expect[1] = 1.0;
    CHECK(conj == expect);

    TokenVector interval = token_vector_interval(4, 7);
    TokenVector expect_iv{};
    expect_iv[8] = 4.0;
    expect_iv[9] = 7.0;
    CHECK(interval == expect_iv);

    TokenVector pred = token_vector_predicate(RectPredicate{1, 2, 3, 4});
    TokenVector expect_p{};
    expect_p[10] = 1.0;
    expect_p[11] = 2.0;
    expect_p[12] = 3.0;
    expect_p[13] = 4.0;
    CHECK(pred == expect_p);

    Formula f = parse("F[0,2](R(1,2,3,4)) & G[4,7](R(0,1,0,1))");
    TokenSeq seq = tokenize(f);
    std::vector<std::string> expected_labels = {"(",      "F", "[0,2]", "(",
                                                "R(1,2,3,4)", ")", "&",     "G",
                                                "[4,7]",  "(", "R(0,1,0,1)", ")",
                                                ")"};
    CHECK(seq.labels == expected_labels);
    // Interval token immediately follows its temporal operator token.
    CHECK(seq.vectors[1] == token_vector_eventually());
    CHECK(seq.vectors[2] == token_vector_interval(0, 2));
}

TEST_CASE("token labels carry exactly the lexical content of format()") {
    Rng rng(77);
    for (int i = 0; i < 200; ++i) {
        Formula f = testsupport::random_formula(rng, 3);
        TokenSeq seq = tokenize(f);
        REQUIRE(seq.vectors.size() == seq.labels.size());
        // Concatenating the labels reproduces the canonical text modulo
        // whitespace, so reparsing them recovers the formula.
        std::string joined;
        for (const std::string& label : seq.labels) joined += label;
        Formula back = parse(joined);
        CHECK(back.structurally_equal(f));
        // And the canonical text stripped of spaces matches the join.
        std::string canonical = format(f);
        std::erase(canonical, ' ');
        CHECK(joined == canonical);
    }
}

TEST_CASE("graph view of a single temporal operator") {
    Formula f = parse("F[0,2](R(0,1,0,1))");
    SpecGraph g = to_graph(f);
    REQUIRE(g.node_count() == 3);
    REQUIRE(g.edges.size() == 2);
    CHECK(g.node_kinds[static_cast<std::size_t>(g.root)] == GraphNodeKind::Operator);
    bool saw_interval = false, saw_pred = false;
    for (const auto& e : g.edges) {
        CHECK(e.dst == g.root);
        if (g.node_kinds[static_cast<std::size_t>(e.src)] == GraphNodeKind::TimeInterval) {
            CHECK(e.relation == kRelInterval);
            saw_interval = true;
        } else {
            CHECK(e.relation == kRelDefault);
            saw_pred = true;
        }
    }
    CHECK(saw_interval);
    CHECK(saw_pred);
}

TEST_CASE("graph view tags until operands left and right") {
    Formula f = parse("(R(0,1,0,1) U[2,5] R(2,3,2,3))");
    SpecGraph g = to_graph(f);
    REQUIRE(g.node_count() == 4);
    int left = -1, right = -1, interval = -1;
    for (const auto& e : g.edges) {
        if (e.relation == kRelUntilLeft) left = e.src;
        if (e.relation == kRelUntilRight) right = e.src;
        if (e.relation == kRelInterval) interval = e.src;
    }
    REQUIRE(left >= 0);
    REQUIRE(right >= 0);
    REQUIRE(interval >= 0);
    CHECK(g.node_labels[static_cast<std::size_t>(left)] == "R(0,1,0,1)");
    CHECK(g.node_labels[static_cast<std::size_t>(right)] == "R(2,3,2,3)");
}

TEST_CASE("graph view of the two-term conjunction has seven nodes") {
    Formula f = parse("F[0,2](R(1,2,3,4)) & G[4,7](R(0,1,0,1))");
    SpecGraph g = to_graph(f);
    CHECK(g.node_count() == 7);
    CHECK(g.edges.size() == 6);
    CHECK(g.node_labels[static_cast<std::size_t>(g.root)] == "&");
}

TEST_CASE("graph shape and edge typing on random formulas") {
    Rng rng(4242);
    for (int i = 0; i < 300; ++i) {
        Formula f = testsupport::random_formula(rng, 3);
        SpecGraph g = to_graph(f);
        // node count = operators + intervals + predicates; edges = nodes - 1.
        int operators = 0, intervals = 0, predicates = 0;
        std::vector<Formula> stack = {f};
        while (!stack.empty()) {
            Formula cur = stack.back();
            stack.pop_back();
            switch (cur.kind()) {
                case NodeKind::Predicate: ++predicates; break;
                case NodeKind::Eventually:
                case NodeKind::Always:
                case NodeKind::Until:
                    ++operators;
                    ++intervals;
                    break;
                default: ++operators; break;
            }
            for (int c = 0; c < cur.arity(); ++c) stack.push_back(cur.child(c));
        }
        CHECK(static_cast<int>(g.node_count()) == operators + intervals + predicates);
        CHECK(g.edges.size() == g.node_count() - 1);
        // Every non-root node has exactly one outgoing edge.
        std::vector<int> out_degree(g.node_count(), 0);
        for (const auto& e : g.edges) out_degree[static_cast<std::size_t>(e.src)]++;
        for (std::size_t n = 0; n < g.node_count(); ++n) {
            if (static_cast<int>(n) == g.root)
                CHECK(out_degree[n] == 0);
            else
                CHECK(out_degree[n] == 1);
        }
        // Relation typing: interval edges are exactly the r=1 edges, until
        // operands r=2/r=3, everything else r=0.
        for (const auto& e : g.edges) {
            bool src_is_interval =
                g.node_kinds[static_cast<std::size_t>(e.src)] == GraphNodeKind::TimeInterval;
            bool dst_is_until = g.node_labels[static_cast<std::size_t>(e.dst)] == "U";
            if (src_is_interval)
                CHECK(e.relation == kRelInterval);
            else if (dst_is_until)
                CHECK((e.relation == kRelUntilLeft || e.relation == kRelUntilRight));
            else
                CHECK(e.relation == kRelDefault);
        }
        // Post-order: children precede parents.
        for (const auto& e : g.edges) CHECK(e.src < e.dst);
    }
}

TEST_CASE("edge list debug export") {
    Formula f = parse("F[0,2](R(0,1,0,1))");
    SpecGraph g = to_graph(f);
    CHECK(g.edge_list_text() == "0 2 0\n1 2 1\n");
}

TEST_CASE("'true' parses, formats and evaluates but has no token encoding") {
    Formula t = parse("true");
    CHECK(t.kind() == NodeKind::True);
    CHECK(format(t) == "true");
    CHECK_THROWS_AS(tokenize(t), FormulaError);
    CHECK_THROWS_AS(to_graph(t), FormulaError);
}
