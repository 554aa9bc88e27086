#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "stlsynth/nn.hpp"
#include "stlsynth/policy.hpp"
#include "test_support.hpp"

using namespace stlsynth;
using ad::Shape;
using ad::Tape;
using ad::Value;

namespace {

std::vector<double> random_vec(Rng& rng, int n, double lo = -1, double hi = 1) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Straight-line reference for one LSTM step (independent of the tape path).
void lstm_reference(const std::vector<std::vector<double>>& W,
                    const std::vector<std::vector<double>>& U,
                    const std::vector<std::vector<double>>& b,
                    const std::vector<double>& s, const std::vector<double>& h0,
                    const std::vector<double>& c0, std::vector<double>& h1,
                    std::vector<double>& c1) {
    std::size_t hid = h0.size(), in = s.size();
    auto affine = [&](int gate, std::size_t r) {
        double acc = b[static_cast<std::size_t>(gate)][r];
        for (std::size_t c = 0; c < in; ++c)
            acc += W[static_cast<std::size_t>(gate)][r * in + c] * s[c];
        for (std::size_t c = 0; c < hid; ++c)
            acc += U[static_cast<std::size_t>(gate)][r * hid + c] * h0[c];
        return acc;
    };
    h1.resize(hid);
    c1.resize(hid);
    for (std::size_t r = 0; r < hid; ++r) {
        double ig = sigmoid(affine(0, r));
        double fg = sigmoid(affine(1, r));
        double og = sigmoid(affine(2, r));
        double ug = std::tanh(affine(3, r));
        c1[r] = ig * ug + fg * c0[r];
        h1[r] = og * std::tanh(c1[r]);
    }
}

nn::BoundParams bind_lstm(Tape& t, const std::string& prefix,
                          const std::vector<std::vector<double>>& W,
                          const std::vector<std::vector<double>>& U,
                          const std::vector<std::vector<double>>& b, int hid, int in) {
    nn::BoundParams p;
    const char* gates[4] = {"i", "f", "o", "u"};
    for (int g = 0; g < 4; ++g) {
        p.emplace(prefix + "W" + gates[g],
                  t.leaf(Shape{hid, in}, W[static_cast<std::size_t>(g)]));
        p.emplace(prefix + "U" + gates[g],
                  t.leaf(Shape{hid, hid}, U[static_cast<std::size_t>(g)]));
        p.emplace(prefix + "b" + gates[g],
                  t.leaf(Shape{hid, 1}, b[static_cast<std::size_t>(g)]));
    }
    return p;
}

}  // namespace

TEST_CASE("dense layer basics and naive-matmul oracle") {
    Tape t;
    std::vector<double> eye = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    std::vector<double> zero3 = {0, 0, 0};
    std::vector<double> x = {0.3, -0.7, 1.1};
    Value W = t.leaf(Shape{3, 3}, eye);
    Value b = t.leaf(Shape{3, 1}, zero3);
    Value y = nn::dense(t, W, b, t.leaf(Shape{3, 1}, x));
    for (int i = 0; i < 3; ++i) CHECK(y.data()[static_cast<std::size_t>(i)] == x[static_cast<std::size_t>(i)]);

    std::vector<double> zeros9(9, 0.0);
    std::vector<double> c = {4, 5, 6};
    Value y2 = nn::dense(t, t.leaf(Shape{3, 3}, zeros9), t.leaf(Shape{3, 1}, c),
                         t.leaf(Shape{3, 1}, x));
    CHECK(std::vector<double>(y2.data().begin(), y2.data().end()) == c);

    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        auto wv = random_vec(rng, 12), bv = random_vec(rng, 3), xv = random_vec(rng, 4);
        Value out = nn::dense(t, t.leaf(Shape{3, 4}, wv), t.leaf(Shape{3, 1}, bv),
                              t.leaf(Shape{4, 1}, xv));
        for (int r = 0; r < 3; ++r) {
            double acc = bv[static_cast<std::size_t>(r)];
            for (int cc = 0; cc < 4; ++cc)
                acc += wv[static_cast<std::size_t>(r * 4 + cc)] * xv[static_cast<std::size_t>(cc)];
            CHECK(out.data()[static_cast<std::size_t>(r)] == doctest::Approx(acc).epsilon(1e-12));
        }
    }
}

TEST_CASE("lstm cell with all weights and biases zero") {
    const int hid = 3, in = 2;
    Tape t;
    std::vector<std::vector<double>> W(4, std::vector<double>(hid * in, 0.0));
    std::vector<std::vector<double>> U(4, std::vector<double>(hid * hid, 0.0));
    std::vector<std::vector<double>> b(4, std::vector<double>(hid, 0.0));
    nn::BoundParams p = bind_lstm(t, "z.", W, U, b, hid, in);
    nn::LstmWeights w = nn::lstm_weights(p, "z.");

    std::vector<double> s = {0.4, -0.9};
    std::vector<double> cprev = {0.5, -1.0, 2.0};
    auto [h, c] = nn::lstm_cell(t, w, t.leaf(Shape{in, 1}, s),
                                t.zeros(Shape{hid, 1}), t.leaf(Shape{hid, 1}, cprev));
    for (int i = 0; i < hid; ++i) {
        CHECK(c.data()[static_cast<std::size_t>(i)] ==
              doctest::Approx(0.5 * cprev[static_cast<std::size_t>(i)]).epsilon(1e-15));
        CHECK(h.data()[static_cast<std::size_t>(i)] ==
              doctest::Approx(0.5 * std::tanh(0.5 * cprev[static_cast<std::size_t>(i)]))
                  .epsilon(1e-15));
    }

    // Zero input, zero previous state: the update path vanishes entirely.
    auto [h0, c0] = nn::lstm_cell(t, w, t.zeros(Shape{in, 1}), t.zeros(Shape{hid, 1}),
                                  t.zeros(Shape{hid, 1}));
    for (double v : h0.data()) CHECK(v == 0.0);
    for (double v : c0.data()) CHECK(v == 0.0);
}

TEST_CASE("lstm cell matches an independent reimplementation") {
    Rng rng(2);
    const int hid = 4, in = 3;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::vector<double>> W, U, b;
        for (int g = 0; g < 4; ++g) {
            W.push_back(random_vec(rng, hid * in));
            U.push_back(random_vec(rng, hid * hid));
            b.push_back(random_vec(rng, hid));
        }
        auto s = random_vec(rng, in);
        auto h0 = random_vec(rng, hid);
        auto c0 = random_vec(rng, hid);
        Tape t;
        nn::BoundParams p = bind_lstm(t, "z.", W, U, b, hid, in);
        auto [h, c] = nn::lstm_cell(t, nn::lstm_weights(p, "z."),
                                    t.leaf(Shape{in, 1}, s), t.leaf(Shape{hid, 1}, h0),
                                    t.leaf(Shape{hid, 1}, c0));
        std::vector<double> h_ref, c_ref;
        lstm_reference(W, U, b, s, h0, c0, h_ref, c_ref);
        for (int i = 0; i < hid; ++i) {
            CHECK(std::abs(h.data()[static_cast<std::size_t>(i)] - h_ref[static_cast<std::size_t>(i)]) <= 1e-12);
            CHECK(std::abs(c.data()[static_cast<std::size_t>(i)] - c_ref[static_cast<std::size_t>(i)]) <= 1e-12);
        }
    }
}

namespace {

nn::BoundParams bind_tree(Tape& t, const std::vector<std::vector<double>>& W,
                          const std::vector<std::vector<double>>& U,
                          const std::vector<std::vector<double>>& b,
                          const std::vector<std::vector<double>>& Wr, int hid, int in) {
    nn::BoundParams p = bind_lstm(t, "tr.", W, U, b, hid, in);
    for (int r = 0; r < 3; ++r)
        p.emplace("tr.Wr" + std::to_string(r),
                  t.leaf(Shape{hid, hid}, Wr[static_cast<std::size_t>(r)]));
    return p;
}

}  // namespace

TEST_CASE("tree lstm leaf with identity update projection") {
    const int hid = 3, in = 3;
    Tape t;
    std::vector<std::vector<double>> W(4, std::vector<double>(hid * in, 0.0));
    std::vector<std::vector<double>> U(4, std::vector<double>(hid * hid, 0.0));
    std::vector<std::vector<double>> b(4, std::vector<double>(hid, 0.0));
    std::vector<std::vector<double>> Wr(3, std::vector<double>(hid * hid, 0.0));
    for (int i = 0; i < hid; ++i) W[3][static_cast<std::size_t>(i * in + i)] = 1.0;  // update gate reads s

    nn::BoundParams p = bind_tree(t, W, U, b, Wr, hid, in);
    nn::TreeLstmWeights w = nn::tree_lstm_weights(p, "tr.");
    std::vector<double> s = {0.7, -0.3, 1.2};
    auto [h, c] = nn::tree_lstm_node(t, w, t.leaf(Shape{in, 1}, s), {});
    for (int i = 0; i < hid; ++i) {
        double expect = 0.5 * std::tanh(0.5 * std::tanh(s[static_cast<std::size_t>(i)]));
        CHECK(h.data()[static_cast<std::size_t>(i)] == doctest::Approx(expect).epsilon(1e-15));
        CHECK(c.data()[static_cast<std::size_t>(i)] ==
              doctest::Approx(0.5 * std::tanh(s[static_cast<std::size_t>(i)])).epsilon(1e-15));
    }
}

TEST_CASE("tree lstm with one child and zero relation matrices") {
    Rng rng(3);
    const int hid = 3, in = 2;
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<std::vector<double>> W, U, b;
        for (int g = 0; g < 4; ++g) {
            W.push_back(random_vec(rng, hid * in));
            U.push_back(random_vec(rng, hid * hid));
            b.push_back(random_vec(rng, hid));
        }
        std::vector<std::vector<double>> Wr(3, std::vector<double>(hid * hid, 0.0));
        auto s = random_vec(rng, in);
        auto ch = random_vec(rng, hid);
        auto cc = random_vec(rng, hid);

        Tape t;
        nn::BoundParams p = bind_tree(t, W, U, b, Wr, hid, in);
        nn::TreeLstmWeights w = nn::tree_lstm_weights(p, "tr.");
        std::array<nn::TreeChild, 1> child = {
            nn::TreeChild{t.leaf(Shape{hid, 1}, ch), t.leaf(Shape{hid, 1}, cc), 0}};
        auto [h, c] = nn::tree_lstm_node(t, w, t.leaf(Shape{in, 1}, s), child);

        // With the relation matrices zeroed, the node sees no child hidden
        // state; only the forget-gated child cell survives.
        auto [h_leaf, c_leaf] =
            nn::tree_lstm_node(t, w, t.leaf(Shape{in, 1}, s), {});
        for (int i = 0; i < hid; ++i) {
            double fpre = b[1][static_cast<std::size_t>(i)];
            for (int cc2 = 0; cc2 < in; ++cc2)
                fpre += W[1][static_cast<std::size_t>(i * in + cc2)] * s[static_cast<std::size_t>(cc2)];
            for (int cc2 = 0; cc2 < hid; ++cc2)
                fpre += U[1][static_cast<std::size_t>(i * hid + cc2)] * ch[static_cast<std::size_t>(cc2)];
            double c_expect = c_leaf.data()[static_cast<std::size_t>(i)] +
                              sigmoid(fpre) * cc[static_cast<std::size_t>(i)];
            CHECK(c.data()[static_cast<std::size_t>(i)] ==
                  doctest::Approx(c_expect).epsilon(1e-12));
            (void)h;
        }
    }
}

TEST_CASE("tree lstm with two children matches an independent reimplementation") {
    Rng rng(4);
    const int hid = 3, in = 2;
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<std::vector<double>> W, U, b, Wr;
        for (int g = 0; g < 4; ++g) {
            W.push_back(random_vec(rng, hid * in));
            U.push_back(random_vec(rng, hid * hid));
            b.push_back(random_vec(rng, hid));
        }
        for (int r = 0; r < 3; ++r) Wr.push_back(random_vec(rng, hid * hid));
        auto s = random_vec(rng, in);
        std::array<std::vector<double>, 2> ch = {random_vec(rng, hid), random_vec(rng, hid)};
        std::array<std::vector<double>, 2> cc = {random_vec(rng, hid), random_vec(rng, hid)};
        int rel[2] = {1, 2};

        Tape t;
        nn::BoundParams p = bind_tree(t, W, U, b, Wr, hid, in);
        nn::TreeLstmWeights w = nn::tree_lstm_weights(p, "tr.");
        std::array<nn::TreeChild, 2> children = {
            nn::TreeChild{t.leaf(Shape{hid, 1}, ch[0]), t.leaf(Shape{hid, 1}, cc[0]), rel[0]},
            nn::TreeChild{t.leaf(Shape{hid, 1}, ch[1]), t.leaf(Shape{hid, 1}, cc[1]), rel[1]}};
        auto [h, c] = nn::tree_lstm_node(t, w, t.leaf(Shape{in, 1}, s), children);

        // Independent reference: relation-summed hidden, per-child forget.
        std::vector<double> hsum(hid, 0.0);
        for (int k = 0; k < 2; ++k)
            for (int r = 0; r < hid; ++r)
                for (int c2 = 0; c2 < hid; ++c2)
                    hsum[static_cast<std::size_t>(r)] +=
                        Wr[static_cast<std::size_t>(rel[k])][static_cast<std::size_t>(r * hid + c2)] *
                        ch[static_cast<std::size_t>(k)][static_cast<std::size_t>(c2)];
        auto affine = [&](int gate, int r, const std::vector<double>& hvec) {
            double acc = b[static_cast<std::size_t>(gate)][static_cast<std::size_t>(r)];
            for (int c2 = 0; c2 < in; ++c2)
                acc += W[static_cast<std::size_t>(gate)][static_cast<std::size_t>(r * in + c2)] *
                       s[static_cast<std::size_t>(c2)];
            for (int c2 = 0; c2 < hid; ++c2)
                acc += U[static_cast<std::size_t>(gate)][static_cast<std::size_t>(r * hid + c2)] *
                       hvec[static_cast<std::size_t>(c2)];
            return acc;
        };
        for (int r = 0; r < hid; ++r) {
            double ig = sigmoid(affine(0, r, hsum));
            double og = sigmoid(affine(2, r, hsum));
            double ug = std::tanh(affine(3, r, hsum));
            double c_ref = ig * ug;
            for (int k = 0; k < 2; ++k)
                c_ref += sigmoid(affine(1, r, ch[static_cast<std::size_t>(k)])) *
                         cc[static_cast<std::size_t>(k)][static_cast<std::size_t>(r)];
            double h_ref = og * std::tanh(c_ref);
            CHECK(std::abs(c.data()[static_cast<std::size_t>(r)] - c_ref) <= 1e-12);
            CHECK(std::abs(h.data()[static_cast<std::size_t>(r)] - h_ref) <= 1e-12);
        }
    }
}

namespace {

nn::BoundParams bind_gnn(Tape& t, const std::vector<double>& Wself,
                         const std::array<std::vector<double>, 4>& Wr, int hid) {
    nn::BoundParams p;
    p.emplace("g.Wself", t.leaf(Shape{hid, 2 * hid}, Wself));
    for (int r = 0; r < 4; ++r)
        p.emplace("g.Wr" + std::to_string(r),
                  t.leaf(Shape{hid, 2 * hid}, Wr[static_cast<std::size_t>(r)]));
    return p;
}

}  // namespace

TEST_CASE("gnn step basics") {
    const int hid = 2;
    Tape t;
    std::vector<double> zeroW(hid * 2 * hid, 0.0);
    std::array<std::vector<double>, 4> Wr = {zeroW, zeroW, zeroW, zeroW};
    nn::BoundParams p = bind_gnn(t, zeroW, Wr, hid);
    nn::GnnWeights w = nn::gnn_weights(p, "g.");

    std::vector<double> state = {0.4, -0.2, 0.9, 0.1};
    std::array<Value, 1> nodes = {t.leaf(Shape{2 * hid, 1}, state)};
    auto out = nn::gnn_step(t, w, nodes, {});
    for (double v : out[0].data()) CHECK(v == 0.0);  // tanh(0)

    // A single edge with a zero relation matrix leaves the target at its
    // self-projection.
    Rng rng(5);
    auto Wself = random_vec(rng, hid * 2 * hid);
    nn::BoundParams p2 = bind_gnn(t, Wself, Wr, hid);
    nn::GnnWeights w2 = nn::gnn_weights(p2, "g.");
    std::array<Value, 2> two = {t.leaf(Shape{2 * hid, 1}, random_vec(rng, 2 * hid)),
                                t.leaf(Shape{2 * hid, 1}, random_vec(rng, 2 * hid))};
    std::array<nn::GraphEdgeView, 1> edge = {nn::GraphEdgeView{0, 1, 0}};
    auto isolated = nn::gnn_step(t, w2, two, {});
    auto with_edge = nn::gnn_step(t, w2, two, edge);
    for (int i = 0; i < hid; ++i)
        CHECK(with_edge[1].data()[static_cast<std::size_t>(i)] ==
              isolated[1].data()[static_cast<std::size_t>(i)]);

    std::array<nn::GraphEdgeView, 1> bad = {nn::GraphEdgeView{0, 7, 0}};
    CHECK_THROWS(nn::gnn_step(t, w2, two, bad));
}

TEST_CASE("gnn chain over two steps matches an independent reimplementation") {
    Rng rng(6);
    const int hid = 3;
    for (int trial = 0; trial < 20; ++trial) {
        auto Wself = random_vec(rng, hid * 2 * hid);
        std::array<std::vector<double>, 4> Wr;
        for (auto& m : Wr) m = random_vec(rng, hid * 2 * hid);
        std::array<std::vector<double>, 3> init;
        for (auto& v : init) v = random_vec(rng, hid);

        // chain 0 ->(r=0) 1 ->(r=1) 2
        std::array<nn::GraphEdgeView, 2> edges = {nn::GraphEdgeView{0, 1, 0},
                                                  nn::GraphEdgeView{1, 2, 1}};
        Tape t;
        nn::BoundParams p = bind_gnn(t, Wself, Wr, hid);
        nn::GnnWeights w = nn::gnn_weights(p, "g.");
        std::vector<Value> concat_states;
        for (const auto& v : init) {
            std::vector<double> both(v);
            both.insert(both.end(), v.begin(), v.end());
            concat_states.push_back(t.leaf(Shape{2 * hid, 1}, both));
        }
        std::vector<std::vector<double>> ref;
        for (const auto& v : init) {
            std::vector<double> both(v);
            both.insert(both.end(), v.begin(), v.end());
            ref.push_back(both);
        }
        for (int step = 0; step < 2; ++step) {
            auto out = nn::gnn_step(t, w, concat_states, edges);
            // reference
            std::vector<std::vector<double>> nxt(3, std::vector<double>(hid, 0.0));
            for (int node = 0; node < 3; ++node)
                for (int r = 0; r < hid; ++r) {
                    double acc = 0;
                    for (int c = 0; c < 2 * hid; ++c)
                        acc += Wself[static_cast<std::size_t>(r * 2 * hid + c)] *
                               ref[static_cast<std::size_t>(node)][static_cast<std::size_t>(c)];
                    nxt[static_cast<std::size_t>(node)][static_cast<std::size_t>(r)] = acc;
                }
            for (const auto& e : edges)
                for (int r = 0; r < hid; ++r) {
                    double acc = 0;
                    for (int c = 0; c < 2 * hid; ++c)
                        acc += Wr[static_cast<std::size_t>(e.relation)]
                                 [static_cast<std::size_t>(r * 2 * hid + c)] *
                               ref[static_cast<std::size_t>(e.src)][static_cast<std::size_t>(c)];
                    nxt[static_cast<std::size_t>(e.dst)][static_cast<std::size_t>(r)] += acc;
                }
            for (int node = 0; node < 3; ++node) {
                for (int r = 0; r < hid; ++r) {
                    double expect = std::tanh(nxt[static_cast<std::size_t>(node)][static_cast<std::size_t>(r)]);
                    CHECK(std::abs(out[static_cast<std::size_t>(node)].data()[static_cast<std::size_t>(r)] -
                                   expect) <= 1e-12);
                }
            }
            // re-concat for the next step
            for (int node = 0; node < 3; ++node) {
                std::vector<double> both(init[static_cast<std::size_t>(node)]);
                for (int r = 0; r < hid; ++r)
                    both.push_back(std::tanh(nxt[static_cast<std::size_t>(node)][static_cast<std::size_t>(r)]));
                ref[static_cast<std::size_t>(node)] = both;
                std::array<Value, 2> parts = {
                    t.leaf(Shape{hid, 1}, init[static_cast<std::size_t>(node)]),
                    out[static_cast<std::size_t>(node)]};
                concat_states[static_cast<std::size_t>(node)] = t.concat(parts);
            }
        }
    }
}

TEST_CASE("gnn with tied relation matrices is invariant to edge relabeling") {
    Rng rng(7);
    const int hid = 3;
    auto Wself = random_vec(rng, hid * 2 * hid);
    auto tied = random_vec(rng, hid * 2 * hid);
    std::array<std::vector<double>, 4> Wr = {tied, tied, tied, tied};
    Tape t;
    nn::BoundParams p = bind_gnn(t, Wself, Wr, hid);
    nn::GnnWeights w = nn::gnn_weights(p, "g.");
    std::vector<Value> nodes;
    for (int i = 0; i < 3; ++i)
        nodes.push_back(t.leaf(Shape{2 * hid, 1}, random_vec(rng, 2 * hid)));
    std::array<nn::GraphEdgeView, 2> a = {nn::GraphEdgeView{0, 2, 0},
                                          nn::GraphEdgeView{1, 2, 3}};
    std::array<nn::GraphEdgeView, 2> b = {nn::GraphEdgeView{0, 2, 2},
                                          nn::GraphEdgeView{1, 2, 1}};
    auto outa = nn::gnn_step(t, w, nodes, a);
    auto outb = nn::gnn_step(t, w, nodes, b);
    for (int node = 0; node < 3; ++node)
        for (int r = 0; r < hid; ++r)
            CHECK(outa[static_cast<std::size_t>(node)].data()[static_cast<std::size_t>(r)] ==
                  outb[static_cast<std::size_t>(node)].data()[static_cast<std::size_t>(r)]);
}

TEST_CASE("tree lstm rejects invalid relation ids") {
    const int hid = 2, in = 2;
    Tape t;
    std::vector<std::vector<double>> W(4, std::vector<double>(hid * in, 0.0));
    std::vector<std::vector<double>> U(4, std::vector<double>(hid * hid, 0.0));
    std::vector<std::vector<double>> b(4, std::vector<double>(hid, 0.0));
    std::vector<std::vector<double>> Wr(3, std::vector<double>(hid * hid, 0.0));
    nn::BoundParams p = bind_tree(t, W, U, b, Wr, hid, in);
    nn::TreeLstmWeights w = nn::tree_lstm_weights(p, "tr.");
    std::array<nn::TreeChild, 1> bad = {
        nn::TreeChild{t.zeros(Shape{hid, 1}), t.zeros(Shape{hid, 1}), 3}};
    CHECK_THROWS(nn::tree_lstm_node(t, w, t.zeros(Shape{in, 1}), bad));
}

TEST_CASE("graph pooling") {
    Rng rng(8);
    Tape t;
    const int dim = 2;
    // gamma = identity: W = I, b = 0.
    std::vector<double> eye = {1, 0, 0, 1};
    std::vector<double> zero = {0, 0};
    Value W = t.leaf(Shape{dim, dim}, eye);
    Value b = t.leaf(Shape{dim, 1}, zero);

    std::vector<double> n1 = {1, 0}, n2 = {0, 1};
    std::array<Value, 2> nodes = {t.leaf(Shape{dim, 1}, n1), t.leaf(Shape{dim, 1}, n2)};
    auto check_pool = [&](nn::PoolMode mode, std::vector<double> expect) {
        Value pooled = nn::graph_pool(t, W, b, nodes, mode);
        CHECK(std::vector<double>(pooled.data().begin(), pooled.data().end()) == expect);
    };
    check_pool(nn::PoolMode::Max, {1, 1});
    check_pool(nn::PoolMode::Mean, {0.5, 0.5});
    check_pool(nn::PoolMode::Sum, {1, 1});

    // Single node: pooling returns gamma(state) for every mode.
    std::array<Value, 1> single = {t.leaf(Shape{dim, 1}, n1)};
    for (auto mode : {nn::PoolMode::Max, nn::PoolMode::Mean, nn::PoolMode::Sum}) {
        Value pooled = nn::graph_pool(t, W, b, single, mode);
        CHECK(std::vector<double>(pooled.data().begin(), pooled.data().end()) == n1);
    }

    // Pooling over an empty node set is an error.
    CHECK_THROWS(nn::graph_pool(t, W, b, {}, nn::PoolMode::Max));

    // Hard max against a sort-based oracle on random instances.
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Value> many;
        std::vector<std::vector<double>> raw;
        int n = rng.uniform_int(2, 6);
        for (int i = 0; i < n; ++i) {
            raw.push_back(random_vec(rng, dim));
            many.push_back(t.leaf(Shape{dim, 1}, raw.back()));
        }
        Value pooled = nn::graph_pool(t, W, b, many, nn::PoolMode::Max);
        for (int k = 0; k < dim; ++k) {
            std::vector<double> col;
            for (const auto& v : raw) col.push_back(v[static_cast<std::size_t>(k)]);
            std::sort(col.begin(), col.end());
            CHECK(pooled.data()[static_cast<std::size_t>(k)] == col.back());
        }
    }
}

TEST_CASE("attention weights and context") {
    Rng rng(9);
    const int qdim = 3, kdim = 4, adim = 3;
    Tape t;
    // Zero alignment vector: uniform weights, context = mean of keys.
    {
        nn::BoundParams p;
        p.emplace("a.Wq", t.leaf(Shape{adim, qdim}, random_vec(rng, adim * qdim)));
        p.emplace("a.Wk", t.leaf(Shape{adim, kdim}, random_vec(rng, adim * kdim)));
        std::vector<double> zero(adim, 0.0);
        p.emplace("a.v", t.leaf(Shape{adim, 1}, zero));
        nn::AttentionWeights w = nn::attention_weights(p, "a.");
        std::vector<Value> keys;
        for (int i = 0; i < 4; ++i)
            keys.push_back(t.leaf(Shape{kdim, 1}, random_vec(rng, kdim)));
        auto [ctx, alpha] =
            nn::attention_context(t, w, t.leaf(Shape{qdim, 1}, random_vec(rng, qdim)), keys);
        for (double a : alpha.data()) CHECK(a == doctest::Approx(0.25).epsilon(1e-12));
        for (int k = 0; k < kdim; ++k) {
            double mean = 0;
            for (const Value& key : keys) mean += key.data()[static_cast<std::size_t>(k)];
            mean /= 4;
            CHECK(ctx.data()[static_cast<std::size_t>(k)] == doctest::Approx(mean).epsilon(1e-12));
        }
    }
    // Single key: weight 1, context equals the key.
    {
        nn::BoundParams p;
        p.emplace("a.Wq", t.leaf(Shape{adim, qdim}, random_vec(rng, adim * qdim)));
        p.emplace("a.Wk", t.leaf(Shape{adim, kdim}, random_vec(rng, adim * kdim)));
        p.emplace("a.v", t.leaf(Shape{adim, 1}, random_vec(rng, adim)));
        nn::AttentionWeights w = nn::attention_weights(p, "a.");
        auto key_data = random_vec(rng, kdim);
        std::array<Value, 1> keys = {t.leaf(Shape{kdim, 1}, key_data)};
        auto [ctx, alpha] =
            nn::attention_context(t, w, t.leaf(Shape{qdim, 1}, random_vec(rng, qdim)), keys);
        CHECK(alpha.data()[0] == 1.0);
        CHECK(std::vector<double>(ctx.data().begin(), ctx.data().end()) == key_data);
    }
    // Random instances: weights sum to one, context is the hand-computed sum.
    for (int trial = 0; trial < 50; ++trial) {
        nn::BoundParams p;
        p.emplace("a.Wq", t.leaf(Shape{adim, qdim}, random_vec(rng, adim * qdim)));
        p.emplace("a.Wk", t.leaf(Shape{adim, kdim}, random_vec(rng, adim * kdim)));
        p.emplace("a.v", t.leaf(Shape{adim, 1}, random_vec(rng, adim)));
        nn::AttentionWeights w = nn::attention_weights(p, "a.");
        int n = rng.uniform_int(1, 6);
        std::vector<Value> keys;
        for (int i = 0; i < n; ++i)
            keys.push_back(t.leaf(Shape{kdim, 1}, random_vec(rng, kdim)));
        auto [ctx, alpha] =
            nn::attention_context(t, w, t.leaf(Shape{qdim, 1}, random_vec(rng, qdim)), keys);
        double sum = 0;
        for (double a : alpha.data()) {
            CHECK(a >= 0.0);
            sum += a;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
        for (int k = 0; k < kdim; ++k) {
            double expect = 0;
            for (int i = 0; i < n; ++i)
                expect += alpha.data()[static_cast<std::size_t>(i)] *
                          keys[static_cast<std::size_t>(i)].data()[static_cast<std::size_t>(k)];
            CHECK(ctx.data()[static_cast<std::size_t>(k)] ==
                  doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("output squash") {
    Tape t;
    std::vector<double> eye = {1, 0, 0, 1};
    Value W = t.leaf(Shape{2, 2}, eye);
    std::array<double, 2> lo = {-1.5, -1.0}, hi = {1.5, 1.0};

    std::vector<double> zero = {0, 0};
    Value mid = nn::output_squash(t, W, t.leaf(Shape{2, 1}, zero), lo, hi);
    CHECK(mid.data()[0] == 0.0);
    CHECK(mid.data()[1] == 0.0);

    std::vector<double> big = {1e9, 1e9};
    Value sat = nn::output_squash(t, W, t.leaf(Shape{2, 1}, big), lo, hi);
    CHECK(sat.data()[0] < 1.5);
    CHECK(sat.data()[0] > 1.5 - 1e-9);
    CHECK(sat.data()[1] < 1.0);

    double a = std::atanh(0.5);
    std::vector<double> pre = {a, a};
    Value u = nn::output_squash(t, W, t.leaf(Shape{2, 1}, pre), lo, hi);
    CHECK(u.data()[0] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(u.data()[1] == doctest::Approx(0.5).epsilon(1e-12));

    // 10^4 random pre-activations stay strictly inside the box.
    Rng rng(10);
    for (int trial = 0; trial < 10000; ++trial) {
        std::vector<double> p = {rng.uniform(-50, 50), rng.uniform(-50, 50)};
        Value out = nn::output_squash(t, W, t.leaf(Shape{2, 1}, p), lo, hi);
        for (int k = 0; k < 2; ++k) {
            CHECK(out.data()[static_cast<std::size_t>(k)] > lo[static_cast<std::size_t>(k)]);
            CHECK(out.data()[static_cast<std::size_t>(k)] < hi[static_cast<std::size_t>(k)]);
        }
    }
}

TEST_CASE("adam steps") {
    nn::ParamSet params;
    params.emplace("w", nn::Tensor(Shape{1, 1}));
    params["w"].data[0] = 1.0;
    nn::AdamState adam(nn::AdamConfig{});

    nn::GradMap g1;
    g1.emplace("w", std::vector<double>{1.0});
    nn::adam_step(adam, params, g1);
    CHECK(params["w"].data[0] == doctest::Approx(1.0 - 3e-4).epsilon(1e-6));

    // Zero gradient leaves the parameter unchanged (fresh state).
    nn::ParamSet params2;
    params2.emplace("w", nn::Tensor(Shape{1, 1}));
    params2["w"].data[0] = 0.7;
    nn::AdamState adam2(nn::AdamConfig{});
    nn::GradMap g0;
    g0.emplace("w", std::vector<double>{0.0});
    nn::adam_step(adam2, params2, g0);
    CHECK(params2["w"].data[0] == 0.7);

    // Constant gradient: per-step move bounded by lr, direction opposite g.
    nn::ParamSet params3;
    params3.emplace("w", nn::Tensor(Shape{1, 1}));
    params3["w"].data[0] = 0.0;
    nn::AdamState adam3(nn::AdamConfig{});
    nn::GradMap gc;
    gc.emplace("w", std::vector<double>{-2.5});
    double prev = 0.0;
    for (int step = 0; step < 2; ++step) {
        nn::adam_step(adam3, params3, gc);
        double delta = params3["w"].data[0] - prev;
        CHECK(delta > 0.0);  // opposite sign of the gradient
        CHECK(std::abs(delta) <= 3e-4 * 1.0001);
        prev = params3["w"].data[0];
    }

    // Missing gradient entries are an error.
    nn::GradMap missing;
    CHECK_THROWS(nn::adam_step(adam3, params3, missing));
}

TEST_CASE("parameter initialization recipe") {
    policy::Arch arch;
    arch.variant = policy::EncoderVariant::Sequential;
    arch.attention = true;
    nn::ParamSet params = policy::make_params(arch);
    Rng rng(11);
    nn::init_params(params, rng);
    // Forget-gate biases are one, other biases zero, matrices bounded by
    // 1/sqrt(fan_in).
    for (const auto& [name, tensor] : params) {
        if (name.ends_with(".bf")) {
            for (double v : tensor.data) CHECK(v == 1.0);
        } else if (name.find(".b") != std::string::npos && tensor.shape.cols == 1 &&
                   name.substr(name.rfind('.') + 1)[0] == 'b') {
            for (double v : tensor.data) CHECK(v == 0.0);
        } else {
            double bound = 1.0 / std::sqrt(static_cast<double>(
                               tensor.shape.cols > 1 ? tensor.shape.cols : tensor.shape.rows));
            for (double v : tensor.data) CHECK(std::abs(v) <= bound);
        }
    }
}

TEST_CASE("checkpoint round trip is bit exact") {
    Rng rng(12);
    policy::Arch arch;
    arch.variant = policy::EncoderVariant::Graph;
    arch.attention = true;
    arch.encoder_hidden = 8;
    arch.decoder_hidden = 4;
    arch.embedding_dim = 4;
    arch.attention_dim = 4;
    nn::ParamSet params = policy::make_params(arch);
    nn::init_params(params, rng);
    auto path = std::filesystem::temp_directory_path() / "stlsynth_test_ckpt.bin";
    nn::save_checkpoint(path.string(), policy::to_meta(arch), params);
    auto [meta, loaded] = nn::load_checkpoint(path.string());
    std::filesystem::remove(path);
    CHECK(meta.encoder == "graph");
    CHECK(meta.attention);
    REQUIRE(loaded.size() == params.size());
    for (const auto& [name, tensor] : params) {
        const nn::Tensor& got = loaded.at(name);
        CHECK(got.shape == tensor.shape);
        CHECK(got.data == tensor.data);  // bitwise equality of doubles
    }
}
