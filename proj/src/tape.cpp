#include "stlsynth/tape.hpp"

#include <algorithm>
#include <cmath>

namespace stlsynth::ad {

void Tape::reset() { nodes_.clear(); }

Value Tape::leaf(Shape shape, std::span<const double> data, bool requires_grad) {
    if (static_cast<int>(data.size()) != shape.size())
        throw ShapeError("leaf data does not match declared shape");
    Node n;
    n.op = Op::Leaf;
    n.shape = shape;
    n.requires_grad = requires_grad;
    n.val.assign(data.begin(), data.end());
    return wrap(push(std::move(n)));
}

Value Tape::scalar(double v, bool requires_grad) {
    return leaf(Shape{1, 1}, std::span<const double>(&v, 1), requires_grad);
}

Value Tape::zeros(Shape shape, bool requires_grad) {
    std::vector<double> z(static_cast<std::size_t>(shape.size()), 0.0);
    return leaf(shape, z, requires_grad);
}

Value Tape::unary(Op op, Value a) {
    const Node& na = at(a.id());
    Node n;
    n.op = op;
    n.shape = na.shape;
    n.a = a.id();
    n.requires_grad = na.requires_grad;
    n.val.resize(na.val.size());
    const double* x = na.val.data();
    double* y = n.val.data();
    std::size_t m = na.val.size();
    switch (op) {
        case Op::Neg:     for (std::size_t i = 0; i < m; ++i) y[i] = -x[i]; break;
        case Op::Tanh:    for (std::size_t i = 0; i < m; ++i) y[i] = std::tanh(x[i]); break;
        case Op::Sigmoid: for (std::size_t i = 0; i < m; ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i])); break;
        case Op::Exp:     for (std::size_t i = 0; i < m; ++i) y[i] = std::exp(x[i]); break;
        case Op::Log:     for (std::size_t i = 0; i < m; ++i) y[i] = std::log(x[i]); break;
        case Op::Sin:     for (std::size_t i = 0; i < m; ++i) y[i] = std::sin(x[i]); break;
        case Op::Cos:     for (std::size_t i = 0; i < m; ++i) y[i] = std::cos(x[i]); break;
        default: throw ShapeError("bad unary op");
    }
    return wrap(push(std::move(n)));
}

Value Tape::binary(Op op, Value a, Value b) {
    const Node& na = at(a.id());
    const Node& nb = at(b.id());
    if (!(na.shape == nb.shape))
        throw ShapeError("elementwise op on mismatched shapes");
    Node n;
    n.op = op;
    n.shape = na.shape;
    n.a = a.id();
    n.b = b.id();
    n.requires_grad = na.requires_grad || nb.requires_grad;
    n.val.resize(na.val.size());
    const double* x = na.val.data();
    const double* y = nb.val.data();
    double* z = n.val.data();
    std::size_t m = na.val.size();
    switch (op) {
        case Op::Add: for (std::size_t i = 0; i < m; ++i) z[i] = x[i] + y[i]; break;
        case Op::Sub: for (std::size_t i = 0; i < m; ++i) z[i] = x[i] - y[i]; break;
        case Op::Mul: for (std::size_t i = 0; i < m; ++i) z[i] = x[i] * y[i]; break;
        case Op::Div: for (std::size_t i = 0; i < m; ++i) z[i] = x[i] / y[i]; break;
        default: throw ShapeError("bad binary op");
    }
    return wrap(push(std::move(n)));
}

Value Tape::add(Value a, Value b) { return binary(Op::Add, a, b); }
Value Tape::sub(Value a, Value b) { return binary(Op::Sub, a, b); }
Value Tape::mul(Value a, Value b) { return binary(Op::Mul, a, b); }
Value Tape::div(Value a, Value b) { return binary(Op::Div, a, b); }
Value Tape::neg(Value a) { return unary(Op::Neg, a); }
Value Tape::tanh(Value a) { return unary(Op::Tanh, a); }
Value Tape::sigmoid(Value a) { return unary(Op::Sigmoid, a); }
Value Tape::exp(Value a) { return unary(Op::Exp, a); }
Value Tape::log(Value a) { return unary(Op::Log, a); }
Value Tape::sin(Value a) { return unary(Op::Sin, a); }
Value Tape::cos(Value a) { return unary(Op::Cos, a); }

Value Tape::scale(Value a, double c) {
    const Node& na = at(a.id());
    Node n;
    n.op = Op::Scale;
    n.shape = na.shape;
    n.a = a.id();
    n.c0 = c;
    n.requires_grad = na.requires_grad;
    n.val.resize(na.val.size());
    for (std::size_t i = 0; i < na.val.size(); ++i) n.val[i] = c * na.val[i];
    return wrap(push(std::move(n)));
}

Value Tape::add_const(Value a, double c) {
    const Node& na = at(a.id());
    Node n;
    n.op = Op::AddConst;
    n.shape = na.shape;
    n.a = a.id();
    n.c0 = c;
    n.requires_grad = na.requires_grad;
    n.val.resize(na.val.size());
    for (std::size_t i = 0; i < na.val.size(); ++i) n.val[i] = na.val[i] + c;
    return wrap(push(std::move(n)));
}

Value Tape::const_affine(Value a, std::span<const double> w, std::span<const double> b) {
    const Node& na = at(a.id());
    if (w.size() != na.val.size() || b.size() != na.val.size())
        throw ShapeError("const_affine coefficient length mismatch");
    Node n;
    n.op = Op::ConstAffine;
    n.shape = na.shape;
    n.a = a.id();
    n.requires_grad = na.requires_grad;
    n.aux.assign(w.begin(), w.end());
    n.val.resize(na.val.size());
    for (std::size_t i = 0; i < na.val.size(); ++i)
        n.val[i] = w[i] * na.val[i] + b[i];
    return wrap(push(std::move(n)));
}

Value Tape::matvec(Value m, Value x) {
    const Node& nm = at(m.id());
    const Node& nx = at(x.id());
    if (!nx.shape.is_vector() || nm.shape.cols != nx.shape.rows)
        throw ShapeError("matvec dimension mismatch");
    Node n;
    n.op = Op::MatVec;
    n.shape = Shape{nm.shape.rows, 1};
    n.a = m.id();
    n.b = x.id();
    n.requires_grad = nm.requires_grad || nx.requires_grad;
    int rows = nm.shape.rows, cols = nm.shape.cols;
    n.val.assign(static_cast<std::size_t>(rows), 0.0);
    const double* mm = nm.val.data();
    const double* xx = nx.val.data();
    for (int r = 0; r < rows; ++r) {
        const double* row = mm + static_cast<std::size_t>(r) * cols;
        double acc = 0.0;
        for (int c = 0; c < cols; ++c) acc += row[c] * xx[c];
        n.val[static_cast<std::size_t>(r)] = acc;
    }
    return wrap(push(std::move(n)));
}

Value Tape::concat(std::span<const Value> parts) {
    if (parts.empty()) throw ShapeError("concat of zero parts");
    Node n;
    n.op = Op::Concat;
    int total = 0;
    for (const Value& p : parts) {
        const Node& np = at(p.id());
        if (!np.shape.is_vector()) throw ShapeError("concat expects vectors");
        total += np.shape.rows;
        n.requires_grad = n.requires_grad || np.requires_grad;
        n.ins.push_back(p.id());
        n.val.insert(n.val.end(), np.val.begin(), np.val.end());
    }
    n.shape = Shape{total, 1};
    return wrap(push(std::move(n)));
}

Value Tape::slice(Value a, int offset, int len) {
    const Node& na = at(a.id());
    if (!na.shape.is_vector() || offset < 0 || len <= 0 ||
        offset + len > na.shape.rows)
        throw ShapeError("slice out of range");
    Node n;
    n.op = Op::Slice;
    n.shape = Shape{len, 1};
    n.a = a.id();
    n.i0 = offset;
    n.requires_grad = na.requires_grad;
    n.val.assign(na.val.begin() + offset, na.val.begin() + offset + len);
    return wrap(push(std::move(n)));
}

Value Tape::reshape(Value a, Shape shape) {
    const Node& na = at(a.id());
    if (shape.size() != na.shape.size())
        throw ShapeError("reshape size mismatch");
    Node n;
    n.op = Op::Reshape;
    n.shape = shape;
    n.a = a.id();
    n.requires_grad = na.requires_grad;
    n.val = na.val;
    return wrap(push(std::move(n)));
}

Value Tape::sum(Value a) {
    const Node& na = at(a.id());
    Node n;
    n.op = Op::Sum;
    n.shape = Shape{1, 1};
    n.a = a.id();
    n.requires_grad = na.requires_grad;
    double acc = 0.0;
    for (double v : na.val) acc += v;
    n.val.assign(1, acc);
    return wrap(push(std::move(n)));
}

Value Tape::dot(Value a, Value b) {
    const Node& na = at(a.id());
    const Node& nb = at(b.id());
    if (!(na.shape == nb.shape) || !na.shape.is_vector())
        throw ShapeError("dot expects equal-length vectors");
    Node n;
    n.op = Op::Dot;
    n.shape = Shape{1, 1};
    n.a = a.id();
    n.b = b.id();
    n.requires_grad = na.requires_grad || nb.requires_grad;
    double acc = 0.0;
    for (std::size_t i = 0; i < na.val.size(); ++i) acc += na.val[i] * nb.val[i];
    n.val.assign(1, acc);
    return wrap(push(std::move(n)));
}

Value Tape::smooth_max(std::span<const Value> xs, double beta) {
    if (xs.empty()) throw ShapeError("smooth_max of zero terms");
    Node n;
    n.op = Op::SmoothMax;
    n.shape = Shape{1, 1};
    n.c0 = beta;
    double hi = -HUGE_VAL;
    for (const Value& x : xs) {
        const Node& nx = at(x.id());
        if (!nx.shape.is_scalar()) throw ShapeError("smooth_max expects scalars");
        n.requires_grad = n.requires_grad || nx.requires_grad;
        n.ins.push_back(x.id());
        hi = std::max(hi, nx.val[0]);
    }
    // Max-shifted log-sum-exp; one term is exactly exp(0) = 1.
    double s = 0.0;
    n.aux.resize(n.ins.size());
    for (std::size_t i = 0; i < n.ins.size(); ++i) {
        double e = std::exp(beta * (at(n.ins[i]).val[0] - hi));
        n.aux[i] = e;
        s += e;
    }
    for (double& w : n.aux) w /= s;
    n.val.assign(1, hi + std::log(s) / beta);
    return wrap(push(std::move(n)));
}

Value Tape::smooth_min(std::span<const Value> xs, double beta) {
    if (xs.empty()) throw ShapeError("smooth_min of zero terms");
    Node n;
    n.op = Op::SmoothMin;
    n.shape = Shape{1, 1};
    n.c0 = beta;
    double lo = HUGE_VAL;
    for (const Value& x : xs) {
        const Node& nx = at(x.id());
        if (!nx.shape.is_scalar()) throw ShapeError("smooth_min expects scalars");
        n.requires_grad = n.requires_grad || nx.requires_grad;
        n.ins.push_back(x.id());
        lo = std::min(lo, nx.val[0]);
    }
    double s = 0.0;
    n.aux.resize(n.ins.size());
    for (std::size_t i = 0; i < n.ins.size(); ++i) {
        double e = std::exp(-beta * (at(n.ins[i]).val[0] - lo));
        n.aux[i] = e;
        s += e;
    }
    for (double& w : n.aux) w /= s;
    n.val.assign(1, lo - std::log(s) / beta);
    return wrap(push(std::move(n)));
}

Value Tape::softmax(std::span<const Value> xs) {
    if (xs.empty()) throw ShapeError("softmax of zero terms");
    Node n;
    n.op = Op::Softmax;
    n.shape = Shape{static_cast<int>(xs.size()), 1};
    double hi = -HUGE_VAL;
    for (const Value& x : xs) {
        const Node& nx = at(x.id());
        if (!nx.shape.is_scalar()) throw ShapeError("softmax expects scalars");
        n.requires_grad = n.requires_grad || nx.requires_grad;
        n.ins.push_back(x.id());
        hi = std::max(hi, nx.val[0]);
    }
    double s = 0.0;
    n.val.resize(n.ins.size());
    for (std::size_t i = 0; i < n.ins.size(); ++i) {
        double e = std::exp(at(n.ins[i]).val[0] - hi);
        n.val[i] = e;
        s += e;
    }
    for (double& v : n.val) v /= s;
    return wrap(push(std::move(n)));
}

Value Tape::weighted_sum(Value weights, std::span<const Value> vs) {
    const Node& nw = at(weights.id());
    if (!nw.shape.is_vector() || nw.shape.rows != static_cast<int>(vs.size()))
        throw ShapeError("weighted_sum weight/vector count mismatch");
    if (vs.empty()) throw ShapeError("weighted_sum of zero vectors");
    int dim = at(vs[0].id()).shape.rows;
    Node n;
    n.op = Op::WeightedSum;
    n.shape = Shape{dim, 1};
    n.a = weights.id();
    n.requires_grad = nw.requires_grad;
    n.val.assign(static_cast<std::size_t>(dim), 0.0);
    for (std::size_t i = 0; i < vs.size(); ++i) {
        const Node& nv = at(vs[i].id());
        if (!(nv.shape == Shape{dim, 1}))
            throw ShapeError("weighted_sum vectors must share one shape");
        n.requires_grad = n.requires_grad || nv.requires_grad;
        n.ins.push_back(vs[i].id());
        double w = nw.val[i];
        for (int k = 0; k < dim; ++k)
            n.val[static_cast<std::size_t>(k)] += w * nv.val[static_cast<std::size_t>(k)];
    }
    return wrap(push(std::move(n)));
}

Value Tape::clamp_interior(Value a, double lo, double hi) {
    const Node& na = at(a.id());
    Node n;
    n.op = Op::ClampInterior;
    n.shape = na.shape;
    n.a = a.id();
    n.c0 = lo;
    n.c1 = hi;
    n.requires_grad = na.requires_grad;
    double ilo = std::nextafter(lo, hi);
    double ihi = std::nextafter(hi, lo);
    n.val.resize(na.val.size());
    for (std::size_t i = 0; i < na.val.size(); ++i)
        n.val[i] = std::min(std::max(na.val[i], ilo), ihi);
    return wrap(push(std::move(n)));
}

std::vector<double>& Tape::grad_buf(int id) {
    Node& n = at(id);
    if (n.grad.empty()) n.grad.assign(n.val.size(), 0.0);
    return n.grad;
}

void Tape::backward(Value root) {
    if (root.tape() != this) throw ShapeError("backward root from another tape");
    Node& r = at(root.id());
    if (!r.shape.is_scalar()) throw ShapeError("backward requires a scalar root");
    for (Node& n : nodes_) n.grad.clear();
    grad_buf(root.id())[0] = 1.0;
    for (int id = root.id(); id >= 0; --id) {
        Node& n = at(id);
        if (n.grad.empty() || !n.requires_grad) continue;
        backward_node(id);
    }
}

void Tape::backward_node(int id) {
    Node& n = at(id);
    const double* g = n.grad.data();
    std::size_t m = n.val.size();
    auto acc = [&](int in) -> double* {
        return needs(in) ? grad_buf(in).data() : nullptr;
    };
    switch (n.op) {
        case Op::Leaf:
            break;
        case Op::Add: {
            if (double* ga = acc(n.a)) for (std::size_t i = 0; i < m; ++i) ga[i] += g[i];
            if (double* gb = acc(n.b)) for (std::size_t i = 0; i < m; ++i) gb[i] += g[i];
            break;
        }
        case Op::Sub: {
            if (double* ga = acc(n.a)) for (std::size_t i = 0; i < m; ++i) ga[i] += g[i];
            if (double* gb = acc(n.b)) for (std::size_t i = 0; i < m; ++i) gb[i] -= g[i];
            break;
        }
        case Op::Mul: {
            const double* xa = at(n.a).val.data();
            const double* xb = at(n.b).val.data();
            if (double* ga = acc(n.a)) for (std::size_t i = 0; i < m; ++i) ga[i] += g[i] * xb[i];
            if (double* gb = acc(n.b)) for (std::size_t i = 0; i < m; ++i) gb[i] += g[i] * xa[i];
            break;
        }
        case Op::Div: {
            const double* xa = at(n.a).val.data();
            const double* xb = at(n.b).val.data();
            if (double* ga = acc(n.a)) for (std::size_t i = 0; i < m; ++i) ga[i] += g[i] / xb[i];
            if (double* gb = acc(n.b))
                for (std::size_t i = 0; i < m; ++i) gb[i] -= g[i] * xa[i] / (xb[i] * xb[i]);
            break;
        }
        case Op::Neg: {
            if (double* ga = acc(n.a)) for (std::size_t i = 0; i < m; ++i) ga[i] -= g[i];
            break;
        }
        case Op::Scale: {
            if (double* ga = acc(n.a)) for (std::size_t i = 0; i < m; ++i) ga[i] += n.c0 * g[i];
            break;
        }
        case Op::AddConst: {
            if (double* ga = acc(n.a)) for (std::size_t i = 0; i < m; ++i) ga[i] += g[i];
            break;
        }
        case Op::ConstAffine: {
            if (double* ga = acc(n.a))
                for (std::size_t i = 0; i < m; ++i) ga[i] += n.aux[i] * g[i];
            break;
        }
        case Op::Tanh: {
            if (double* ga = acc(n.a))
                for (std::size_t i = 0; i < m; ++i) ga[i] += g[i] * (1.0 - n.val[i] * n.val[i]);
            break;
        }
        case Op::Sigmoid: {
            if (double* ga = acc(n.a))
                for (std::size_t i = 0; i < m; ++i) ga[i] += g[i] * n.val[i] * (1.0 - n.val[i]);
            break;
        }
        case Op::Exp: {
            if (double* ga = acc(n.a))
                for (std::size_t i = 0; i < m; ++i) ga[i] += g[i] * n.val[i];
            break;
        }
        case Op::Log: {
            const double* xa = at(n.a).val.data();
            if (double* ga = acc(n.a))
                for (std::size_t i = 0; i < m; ++i) ga[i] += g[i] / xa[i];
            break;
        }
        case Op::Sin: {
            const double* xa = at(n.a).val.data();
            if (double* ga = acc(n.a))
                for (std::size_t i = 0; i < m; ++i) ga[i] += g[i] * std::cos(xa[i]);
            break;
        }
        case Op::Cos: {
            const double* xa = at(n.a).val.data();
            if (double* ga = acc(n.a))
                for (std::size_t i = 0; i < m; ++i) ga[i] -= g[i] * std::sin(xa[i]);
            break;
        }
        case Op::MatVec: {
            const Node& nm = at(n.a);
            const Node& nx = at(n.b);
            int rows = nm.shape.rows, cols = nm.shape.cols;
            const double* mm = nm.val.data();
            const double* xx = nx.val.data();
            double* gm = acc(n.a);
            double* gx = acc(n.b);
            for (int r = 0; r < rows; ++r) {
                double gr = g[r];
                if (gr == 0.0) continue;
                std::size_t off = static_cast<std::size_t>(r) * cols;
                if (gm) for (int c = 0; c < cols; ++c) gm[off + c] += gr * xx[c];
                if (gx) {
                    const double* row = mm + off;
                    for (int c = 0; c < cols; ++c) gx[c] += gr * row[c];
                }
            }
            break;
        }
        case Op::Concat: {
            std::size_t off = 0;
            for (int in : n.ins) {
                std::size_t len = at(in).val.size();
                if (double* gi = acc(in))
                    for (std::size_t i = 0; i < len; ++i) gi[i] += g[off + i];
                off += len;
            }
            break;
        }
        case Op::Slice: {
            if (double* ga = acc(n.a))
                for (std::size_t i = 0; i < m; ++i) ga[static_cast<std::size_t>(n.i0) + i] += g[i];
            break;
        }
        case Op::Reshape: {
            if (double* ga = acc(n.a))
                for (std::size_t i = 0; i < m; ++i) ga[i] += g[i];
            break;
        }
        case Op::Sum: {
            if (double* ga = acc(n.a)) {
                std::size_t len = at(n.a).val.size();
                for (std::size_t i = 0; i < len; ++i) ga[i] += g[0];
            }
            break;
        }
        case Op::Dot: {
            const double* xa = at(n.a).val.data();
            const double* xb = at(n.b).val.data();
            std::size_t len = at(n.a).val.size();
            if (double* ga = acc(n.a)) for (std::size_t i = 0; i < len; ++i) ga[i] += g[0] * xb[i];
            if (double* gb = acc(n.b)) for (std::size_t i = 0; i < len; ++i) gb[i] += g[0] * xa[i];
            break;
        }
        case Op::SmoothMax:
        case Op::SmoothMin: {
            for (std::size_t i = 0; i < n.ins.size(); ++i)
                if (double* gi = acc(n.ins[i])) gi[0] += g[0] * n.aux[i];
            break;
        }
        case Op::Softmax: {
            double gdotp = 0.0;
            for (std::size_t i = 0; i < m; ++i) gdotp += g[i] * n.val[i];
            for (std::size_t i = 0; i < n.ins.size(); ++i)
                if (double* gi = acc(n.ins[i])) gi[0] += n.val[i] * (g[i] - gdotp);
            break;
        }
        case Op::WeightedSum: {
            const Node& nw = at(n.a);
            double* gw = acc(n.a);
            for (std::size_t i = 0; i < n.ins.size(); ++i) {
                const Node& nv = at(n.ins[i]);
                if (gw) {
                    double d = 0.0;
                    for (std::size_t k = 0; k < m; ++k) d += g[k] * nv.val[k];
                    gw[i] += d;
                }
                if (double* gv = acc(n.ins[i])) {
                    double w = nw.val[i];
                    for (std::size_t k = 0; k < m; ++k) gv[k] += w * g[k];
                }
            }
            break;
        }
        case Op::ClampInterior: {
            if (double* ga = acc(n.a))
                for (std::size_t i = 0; i < m; ++i) ga[i] += g[i];
            break;
        }
    }
}

double grad_check(const ScalarFn& f, std::span<const double> point, double eps) {
    Tape tape;
    Value x = tape.leaf(Shape{static_cast<int>(point.size()), 1}, point, true);
    Value y = f(tape, x);
    tape.backward(y);
    std::vector<double> analytic(x.grad().begin(), x.grad().end());

    auto eval_at = [&](std::span<const double> p) {
        Tape t;
        Value xx = t.leaf(Shape{static_cast<int>(p.size()), 1}, p, false);
        return f(t, xx).scalar();
    };

    std::vector<double> probe(point.begin(), point.end());
    double worst = 0.0;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        double save = probe[i];
        probe[i] = save + eps;
        double fp = eval_at(probe);
        probe[i] = save - eps;
        double fm = eval_at(probe);
        probe[i] = save;
        double numeric = (fp - fm) / (2.0 * eps);
        double denom = std::max(std::abs(analytic[i]), 1e-8);
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

double grad_check_directional(const ScalarFn& f, std::span<const double> point,
                              double eps, int n_dirs, Rng& rng) {
    Tape tape;
    Value x = tape.leaf(Shape{static_cast<int>(point.size()), 1}, point, true);
    Value y = f(tape, x);
    tape.backward(y);
    std::vector<double> analytic(x.grad().begin(), x.grad().end());

    auto eval_at = [&](std::span<const double> p) {
        Tape t;
        Value xx = t.leaf(Shape{static_cast<int>(p.size()), 1}, p, false);
        return f(t, xx).scalar();
    };

    std::size_t n = point.size();
    std::vector<double> dir(n), probe(n);
    double worst = 0.0;
    for (int k = 0; k < n_dirs; ++k) {
        double norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            dir[i] = rng.uniform(-1.0, 1.0);
            norm += dir[i] * dir[i];
        }
        norm = std::sqrt(norm);
        double along = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            dir[i] /= norm;
            along += analytic[i] * dir[i];
        }
        for (std::size_t i = 0; i < n; ++i) probe[i] = point[i] + eps * dir[i];
        double fp = eval_at(probe);
        for (std::size_t i = 0; i < n; ++i) probe[i] = point[i] - eps * dir[i];
        double fm = eval_at(probe);
        double numeric = (fp - fm) / (2.0 * eps);
        double denom = std::max(std::abs(along), 1e-8);
        worst = std::max(worst, std::abs(along - numeric) / denom);
    }
    return worst;
}

double grad_check_sampled(const ScalarFn& f, std::span<const double> point,
                          double eps, int n_coords, Rng& rng) {
    Tape tape;
    Value x = tape.leaf(Shape{static_cast<int>(point.size()), 1}, point, true);
    Value y = f(tape, x);
    tape.backward(y);
    std::vector<double> analytic(x.grad().begin(), x.grad().end());

    auto eval_at = [&](std::span<const double> p) {
        Tape t;
        Value xx = t.leaf(Shape{static_cast<int>(p.size()), 1}, p, false);
        return f(t, xx).scalar();
    };

    std::vector<double> probe(point.begin(), point.end());
    double worst = 0.0;
    for (int k = 0; k < n_coords; ++k) {
        std::size_t i = static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<int>(probe.size()) - 1));
        double save = probe[i];
        probe[i] = save + eps;
        double fp = eval_at(probe);
        probe[i] = save - eps;
        double fm = eval_at(probe);
        probe[i] = save;
        double numeric = (fp - fm) / (2.0 * eps);
        double denom = std::max(std::abs(analytic[i]), 1e-8);
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

}  // namespace stlsynth::ad
