#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "stlsynth/rng.hpp"

namespace stlsynth::ad {

class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Scalars are (1,1), column vectors (n,1), matrices (n,m) row-major.
struct Shape {
    int rows = 1;
    int cols = 1;

    int size() const { return rows * cols; }
    bool is_scalar() const { return rows == 1 && cols == 1; }
    bool is_vector() const { return cols == 1; }
    bool operator==(const Shape&) const = default;
};

class Tape;

// Handle to a node on a tape. Cheap to copy; invalidated by Tape::reset().
class Value {
public:
    Value() = default;

    bool valid() const { return tape_ != nullptr; }
    Tape* tape() const { return tape_; }
    int id() const { return id_; }
    Shape shape() const;
    std::span<const double> data() const;
    double scalar() const;
    // Gradient of the last backward() root with respect to this node.
    std::span<const double> grad() const;

private:
    friend class Tape;
    Value(Tape* t, int id) : tape_(t), id_(id) {}
    Tape* tape_ = nullptr;
    int id_ = -1;
};

// Append-only reverse-mode tape. Forward values are computed eagerly as
// nodes are recorded; backward() walks the records in reverse insertion
// order exactly once.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    std::size_t size() const { return nodes_.size(); }
    void reset();

    // Leaves.
    Value leaf(Shape shape, std::span<const double> data, bool requires_grad = false);
    Value scalar(double v, bool requires_grad = false);
    Value zeros(Shape shape, bool requires_grad = false);

    // Elementwise, shapes must match.
    Value add(Value a, Value b);
    Value sub(Value a, Value b);
    Value mul(Value a, Value b);
    Value div(Value a, Value b);
    Value neg(Value a);
    Value scale(Value a, double c);       // c * a
    Value add_const(Value a, double c);   // a + c
    // w[i]*a[i] + b[i] with constant coefficient vectors.
    Value const_affine(Value a, std::span<const double> w, std::span<const double> b);

    Value tanh(Value a);
    Value sigmoid(Value a);
    Value exp(Value a);
    Value log(Value a);
    Value sin(Value a);
    Value cos(Value a);

    Value matvec(Value m, Value x);
    Value concat(std::span<const Value> parts);
    Value slice(Value a, int offset, int len);
    // Same data viewed under a different shape (sizes must agree).
    Value reshape(Value a, Shape shape);
    Value sum(Value a);
    Value dot(Value a, Value b);

    // (1/beta) * ln(sum_i exp(beta * a_i)) over scalar inputs, max-shifted.
    Value smooth_max(std::span<const Value> xs, double beta);
    // -(1/beta) * ln(sum_i exp(-beta * a_i)) over scalar inputs.
    Value smooth_min(std::span<const Value> xs, double beta);
    // Softmax over scalar inputs, returned as one vector node.
    Value softmax(std::span<const Value> xs);
    // sum_i weights[i] * vs[i] for a weight vector and equal-length vectors.
    Value weighted_sum(Value weights, std::span<const Value> vs);
    // Clamp one ulp inside [lo, hi]; gradient passes through unchanged.
    Value clamp_interior(Value a, double lo, double hi);

    // Reverse-mode sweep from a scalar root. Fills the gradient buffers of
    // every node that (transitively) requires grad; others stay empty.
    void backward(Value root);

private:
    enum class Op : std::uint8_t {
        Leaf, Add, Sub, Mul, Div, Neg, Scale, AddConst, ConstAffine,
        Tanh, Sigmoid, Exp, Log, Sin, Cos,
        MatVec, Concat, Slice, Reshape, Sum, Dot,
        SmoothMax, SmoothMin, Softmax, WeightedSum, ClampInterior,
    };

    struct Node {
        Op op = Op::Leaf;
        bool requires_grad = false;
        Shape shape;
        int a = -1, b = -1;
        int i0 = 0;
        double c0 = 0.0, c1 = 0.0;
        std::vector<int> ins;
        std::vector<double> val;
        std::vector<double> aux;   // saved coefficients for backward
        std::vector<double> grad;
    };

    friend class Value;

    int push(Node&& n) {
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }
    Node& at(int id) { return nodes_[static_cast<std::size_t>(id)]; }
    const Node& at(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
    Value wrap(int id) { return Value(this, id); }
    bool needs(int id) const { return id >= 0 && at(id).requires_grad; }
    std::vector<double>& grad_buf(int id);
    void backward_node(int id);

    Value unary(Op op, Value a);
    Value binary(Op op, Value a, Value b);

    std::vector<Node> nodes_;
};

inline Shape Value::shape() const { return tape_->at(id_).shape; }
inline std::span<const double> Value::data() const { return tape_->at(id_).val; }
inline double Value::scalar() const {
    const auto& n = tape_->at(id_);
    if (!n.shape.is_scalar()) throw ShapeError("scalar() on non-scalar value");
    return n.val[0];
}
inline std::span<const double> Value::grad() const { return tape_->at(id_).grad; }

// Central-difference check of backward() for a scalar function of a vector.
// Returns max over components of |analytic - numeric| / max(|analytic|, 1e-8).
using ScalarFn = std::function<Value(Tape&, Value)>;
double grad_check(const ScalarFn& f, std::span<const double> point, double eps);
// Same, probing only `n_coords` randomly chosen components.
double grad_check_sampled(const ScalarFn& f, std::span<const double> point,
                          double eps, int n_coords, Rng& rng);
// Central differences along random unit directions: compares <grad, d>
// against (f(x+eps d) - f(x-eps d)) / (2 eps). Directional probes stay
// well-scaled even when single components of the gradient are tiny.
double grad_check_directional(const ScalarFn& f, std::span<const double> point,
                              double eps, int n_dirs, Rng& rng);

}  // namespace stlsynth::ad
