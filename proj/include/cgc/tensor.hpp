#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "cgc/errors.hpp"
#include "cgc/matrix.hpp"

namespace cgc {

// Inputs of log/KL are clamped to this floor so softmax underflow can
// never produce -inf.
inline constexpr double kLogClamp = 1e-10;

// Long-lived trainable matrix. Parameters outlive the tapes built during
// training steps; gradients accumulate here across per-graph tapes until
// the optimizer consumes them.
struct Param {
    std::string name;
    Matrix value;
    Matrix grad;

    Param() = default;
    Param(std::string n, Matrix v)
        : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}

    void zero_grad() { grad.fill(0.0); }
};

class Tape;

// Lightweight handle to a node on a tape.
class Tensor {
public:
    Tensor() = default;
    Tensor(Tape* tape, std::size_t idx) : tape_(tape), idx_(idx) {}

    const Matrix& value() const;
    const Matrix& grad() const;
    bool requires_grad() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    bool is_scalar() const { return rows() == 1 && cols() == 1; }
    double scalar() const {
        if (!is_scalar()) throw ShapeError("Tensor::scalar on " + value().shape_str());
        return value()(0, 0);
    }

    Tape* tape() const { return tape_; }
    std::size_t index() const { return idx_; }
    bool valid() const { return tape_ != nullptr; }

private:
    Tape* tape_ = nullptr;
    std::size_t idx_ = 0;
};

// Reverse-mode tape over dense matrices. Nodes are appended in evaluation
// order, which is a topological order by construction: every node's
// parents have smaller indices.
class Tape {
public:
    struct Node {
        Matrix value;
        Matrix adjoint;          // d(loss)/d(node), valid while seeded
        bool seeded = false;     // adjoint allocated this sweep
        bool requires_grad = false;
        Param* bound = nullptr;  // leaf nodes flush adjoints into the Param
        std::function<void(Tape&, Node&)> backward;
    };

    std::size_t size() const { return nodes_.size(); }
    Node& node(std::size_t i) { return nodes_[i]; }
    const Node& node(std::size_t i) const { return nodes_[i]; }

    // Leaf bound to a trainable parameter.
    Tensor leaf(Param& p) {
        Node n;
        n.value = p.value;
        n.requires_grad = true;
        n.bound = &p;
        return push(std::move(n));
    }

    // Constant; no gradient ever flows into it.
    Tensor constant(Matrix m) {
        Node n;
        n.value = std::move(m);
        return push(std::move(n));
    }

    Tensor scalar_constant(double v) { return constant(Matrix{{v}}); }

    // Records a new node computed from parents. The backward callback
    // receives this tape and the node itself and must push contributions
    // into parents via accumulate().
    Tensor record(Matrix value, bool requires_grad, std::function<void(Tape&, Node&)> backward) {
        Node n;
        n.value = std::move(value);
        n.requires_grad = requires_grad;
        if (requires_grad) n.backward = std::move(backward);
        return push(std::move(n));
    }

    void accumulate(std::size_t parent, const Matrix& delta) {
        Node& p = nodes_[parent];
        if (!p.requires_grad) return;
        if (!p.seeded) {
            p.adjoint = Matrix(p.value.rows(), p.value.cols());
            p.seeded = true;
        }
        p.adjoint += delta;
    }

    // Reverse sweep from a scalar loss. Each call runs a fresh sweep
    // (node adjoints are reset) and ADDS leaf adjoints into their bound
    // Param grads, so repeated calls accumulate parameter gradients.
    void backward(const Tensor& loss) {
        if (loss.tape() != this) throw ShapeError("backward: tensor from another tape");
        if (!loss.is_scalar()) throw ShapeError("backward: loss must be scalar, got " + loss.value().shape_str());
        if (nodes_.empty()) throw ShapeError("backward: empty tape");

        const std::size_t top = loss.index();
        for (std::size_t i = 0; i <= top; ++i) nodes_[i].seeded = false;

        Node& root = nodes_[top];
        root.adjoint = Matrix{{1.0}};
        root.seeded = true;

        for (std::size_t i = top + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (!n.seeded || !n.requires_grad) continue;
            if (n.bound) n.bound->grad += n.adjoint;
            if (n.backward) n.backward(*this, n);
        }
    }

private:
    Tensor push(Node n) {
        nodes_.push_back(std::move(n));
        return Tensor(this, nodes_.size() - 1);
    }

    std::deque<Node> nodes_; // deque: stable addresses for in-flight sweeps
};

inline const Matrix& Tensor::value() const { return tape_->node(idx_).value; }
inline const Matrix& Tensor::grad() const { return tape_->node(idx_).adjoint; }
inline bool Tensor::requires_grad() const { return tape_->node(idx_).requires_grad; }

namespace detail {

inline Tape* common_tape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.tape() != b.tape()) throw ShapeError(std::string(op) + ": tensors from different tapes");
    return a.tape();
}

} // namespace detail

// ---- elementwise / reduction ops --------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
    Tape* t = detail::common_tape(a, b, "add");
    a.value().require_same_shape(b.value(), "add");
    const std::size_t ia = a.index(), ib = b.index();
    return t->record(a.value() + b.value(), a.requires_grad() || b.requires_grad(),
                     [ia, ib](Tape& tp, Tape::Node& n) {
                         tp.accumulate(ia, n.adjoint);
                         tp.accumulate(ib, n.adjoint);
                     });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    Tape* t = detail::common_tape(a, b, "sub");
    a.value().require_same_shape(b.value(), "sub");
    const std::size_t ia = a.index(), ib = b.index();
    return t->record(a.value() - b.value(), a.requires_grad() || b.requires_grad(),
                     [ia, ib](Tape& tp, Tape::Node& n) {
                         tp.accumulate(ia, n.adjoint);
                         tp.accumulate(ib, n.adjoint * -1.0);
                     });
}

inline Tensor scale(const Tensor& a, double s) {
    Tape* t = a.tape();
    const std::size_t ia = a.index();
    return t->record(a.value() * s, a.requires_grad(),
                     [ia, s](Tape& tp, Tape::Node& n) { tp.accumulate(ia, n.adjoint * s); });
}

inline Tensor hadamard(const Tensor& a, const Tensor& b) {
    Tape* t = detail::common_tape(a, b, "hadamard");
    a.value().require_same_shape(b.value(), "hadamard");
    const std::size_t ia = a.index(), ib = b.index();
    const Matrix av = a.value(), bv = b.value();
    return t->record(hadamard(av, bv), a.requires_grad() || b.requires_grad(),
                     [ia, ib, av, bv](Tape& tp, Tape::Node& n) {
                         if (tp.node(ia).requires_grad) tp.accumulate(ia, hadamard(n.adjoint, bv));
                         if (tp.node(ib).requires_grad) tp.accumulate(ib, hadamard(n.adjoint, av));
                     });
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    Tape* t = detail::common_tape(a, b, "matmul");
    const std::size_t ia = a.index(), ib = b.index();
    const Matrix av = a.value(), bv = b.value();
    return t->record(matmul(av, bv), a.requires_grad() || b.requires_grad(),
                     [ia, ib, av, bv](Tape& tp, Tape::Node& n) {
                         if (tp.node(ia).requires_grad)
                             tp.accumulate(ia, matmul(n.adjoint, transpose(bv)));
                         if (tp.node(ib).requires_grad)
                             tp.accumulate(ib, matmul(transpose(av), n.adjoint));
                     });
}

// Elementwise multiply by a 1x1 tensor (used for GIN's learnable epsilon).
inline Tensor scale_by(const Tensor& a, const Tensor& s) {
    Tape* t = detail::common_tape(a, s, "scale_by");
    if (!s.is_scalar()) throw ShapeError("scale_by: scale must be 1x1");
    const std::size_t ia = a.index(), is = s.index();
    const Matrix av = a.value();
    const double sv = s.scalar();
    return t->record(av * sv, a.requires_grad() || s.requires_grad(),
                     [ia, is, av, sv](Tape& tp, Tape::Node& n) {
                         tp.accumulate(ia, n.adjoint * sv);
                         tp.accumulate(is, Matrix{{sum(hadamard(n.adjoint, av))}});
                     });
}

inline Tensor sigmoid(const Tensor& a) {
    Tape* t = a.tape();
    const std::size_t ia = a.index();
    Matrix out = map(a.value(), [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    return t->record(out, a.requires_grad(),
                     [ia, out](Tape& tp, Tape::Node& n) {
                         Matrix g = n.adjoint;
                         for (std::size_t i = 0; i < g.rows(); ++i)
                             for (std::size_t j = 0; j < g.cols(); ++j)
                                 g(i, j) *= out(i, j) * (1.0 - out(i, j));
                         tp.accumulate(ia, g);
                     });
}

inline Tensor relu(const Tensor& a) {
    Tape* t = a.tape();
    const std::size_t ia = a.index();
    const Matrix av = a.value();
    return t->record(map(av, [](double x) { return x > 0.0 ? x : 0.0; }), a.requires_grad(),
                     [ia, av](Tape& tp, Tape::Node& n) {
                         Matrix g = n.adjoint;
                         for (std::size_t i = 0; i < g.rows(); ++i)
                             for (std::size_t j = 0; j < g.cols(); ++j)
                                 if (av(i, j) <= 0.0) g(i, j) = 0.0;
                         tp.accumulate(ia, g);
                     });
}

// Natural log with a 1e-10 input clamp.
inline Tensor log(const Tensor& a) {
    Tape* t = a.tape();
    const std::size_t ia = a.index();
    const Matrix av = a.value();
    Matrix out = map(av, [](double x) { return std::log(std::max(x, kLogClamp)); });
    return t->record(out, a.requires_grad(),
                     [ia, av](Tape& tp, Tape::Node& n) {
                         Matrix g = n.adjoint;
                         for (std::size_t i = 0; i < g.rows(); ++i)
                             for (std::size_t j = 0; j < g.cols(); ++j)
                                 g(i, j) /= std::max(av(i, j), kLogClamp);
                         tp.accumulate(ia, g);
                     });
}

inline Tensor exp(const Tensor& a) {
    Tape* t = a.tape();
    const std::size_t ia = a.index();
    Matrix out = map(a.value(), [](double x) { return std::exp(x); });
    return t->record(out, a.requires_grad(),
                     [ia, out](Tape& tp, Tape::Node& n) {
                         tp.accumulate(ia, hadamard(n.adjoint, out));
                     });
}

// Elementwise sqrt; inputs are sums of squares, clamped at 0.
inline Tensor sqrt(const Tensor& a) {
    Tape* t = a.tape();
    const std::size_t ia = a.index();
    Matrix out = map(a.value(), [](double x) { return std::sqrt(std::max(x, 0.0)); });
    return t->record(out, a.requires_grad(),
                     [ia, out](Tape& tp, Tape::Node& n) {
                         Matrix g = n.adjoint;
                         for (std::size_t i = 0; i < g.rows(); ++i)
                             for (std::size_t j = 0; j < g.cols(); ++j)
                                 g(i, j) = out(i, j) > 0.0 ? g(i, j) * 0.5 / out(i, j) : 0.0;
                         tp.accumulate(ia, g);
                     });
}

inline Tensor div(const Tensor& a, const Tensor& b) {
    Tape* t = detail::common_tape(a, b, "div");
    a.value().require_same_shape(b.value(), "div");
    const std::size_t ia = a.index(), ib = b.index();
    const Matrix av = a.value(), bv = b.value();
    Matrix out = av;
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) /= bv(i, j);
    return t->record(out, a.requires_grad() || b.requires_grad(),
                     [ia, ib, av, bv](Tape& tp, Tape::Node& n) {
                         Matrix ga = n.adjoint, gb = n.adjoint;
                         for (std::size_t i = 0; i < ga.rows(); ++i)
                             for (std::size_t j = 0; j < ga.cols(); ++j) {
                                 ga(i, j) /= bv(i, j);
                                 gb(i, j) *= -av(i, j) / (bv(i, j) * bv(i, j));
                             }
                         tp.accumulate(ia, ga);
                         tp.accumulate(ib, gb);
                     });
}

inline Tensor sum(const Tensor& a) {
    Tape* t = a.tape();
    const std::size_t ia = a.index();
    const std::size_t r = a.rows(), c = a.cols();
    return t->record(Matrix{{sum(a.value())}}, a.requires_grad(),
                     [ia, r, c](Tape& tp, Tape::Node& n) {
                         tp.accumulate(ia, Matrix(r, c, n.adjoint(0, 0)));
                     });
}

// Column means: (1 x cols) from (rows x cols). Mean-pool readout.
inline Tensor mean_rows(const Tensor& a) {
    Tape* t = a.tape();
    const std::size_t ia = a.index();
    const Matrix av = a.value();
    const std::size_t r = av.rows(), c = av.cols();
    Matrix out(1, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out(0, j) += av(i, j) / double(r);
    return t->record(out, a.requires_grad(),
                     [ia, r, c](Tape& tp, Tape::Node& n) {
                         Matrix g(r, c);
                         for (std::size_t i = 0; i < r; ++i)
                             for (std::size_t j = 0; j < c; ++j) g(i, j) = n.adjoint(0, j) / double(r);
                         tp.accumulate(ia, g);
                     });
}

inline Tensor softmax_row(const Tensor& a) {
    Tape* t = a.tape();
    const std::size_t ia = a.index();
    const Matrix av = a.value();
    Matrix out = av;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        double mx = out(i, 0);
        for (std::size_t j = 1; j < out.cols(); ++j) mx = std::max(mx, out(i, j));
        double z = 0.0;
        for (std::size_t j = 0; j < out.cols(); ++j) {
            out(i, j) = std::exp(out(i, j) - mx);
            z += out(i, j);
        }
        for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) /= z;
    }
    return t->record(out, a.requires_grad(),
                     [ia, out](Tape& tp, Tape::Node& n) {
                         Matrix g(out.rows(), out.cols());
                         for (std::size_t i = 0; i < out.rows(); ++i) {
                             double dot = 0.0;
                             for (std::size_t j = 0; j < out.cols(); ++j)
                                 dot += n.adjoint(i, j) * out(i, j);
                             for (std::size_t j = 0; j < out.cols(); ++j)
                                 g(i, j) = out(i, j) * (n.adjoint(i, j) - dot);
                         }
                         tp.accumulate(ia, g);
                     });
}

// Straight-through stand-in: forward takes the hard matrix, backward
// passes the adjoint unchanged to the soft relaxation.
inline Tensor straight_through(const Tensor& soft, Matrix hard) {
    if (!soft.value().same_shape(hard))
        throw ShapeError("straight_through: soft " + soft.value().shape_str() + " vs hard " + hard.shape_str());
    Tape* t = soft.tape();
    const std::size_t is = soft.index();
    return t->record(std::move(hard), soft.requires_grad(),
                     [is](Tape& tp, Tape::Node& n) { tp.accumulate(is, n.adjoint); });
}

// Concatenate 1x1 tensors into a 1xT row.
inline Tensor concat_scalars(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_scalars: empty");
    Tape* t = parts.front().tape();
    Matrix out(1, parts.size());
    bool req = false;
    std::vector<std::size_t> idx;
    idx.reserve(parts.size());
    for (std::size_t k = 0; k < parts.size(); ++k) {
        if (parts[k].tape() != t) throw ShapeError("concat_scalars: mixed tapes");
        if (!parts[k].is_scalar()) throw ShapeError("concat_scalars: non-scalar part");
        out(0, k) = parts[k].scalar();
        req = req || parts[k].requires_grad();
        idx.push_back(parts[k].index());
    }
    return t->record(out, req, [idx](Tape& tp, Tape::Node& n) {
        for (std::size_t k = 0; k < idx.size(); ++k)
            tp.accumulate(idx[k], Matrix{{n.adjoint(0, k)}});
    });
}

inline Tensor dot(const Tensor& a, const Tensor& b) { return sum(hadamard(a, b)); }

// ---- Adam --------------------------------------------------------------

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    std::vector<Matrix> m, v;
};

// In-place Adam update over a fixed parameter list; gradients are zeroed
// afterwards. The params vector must be the same (same order) every call.
inline void adam_step(const std::vector<Param*>& params, AdamState& st, double lr) {
    if (st.m.empty()) {
        for (Param* p : params) {
            st.m.emplace_back(p->value.rows(), p->value.cols());
            st.v.emplace_back(p->value.rows(), p->value.cols());
        }
    }
    ++st.step;
    const double bc1 = 1.0 - std::pow(st.beta1, double(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, double(st.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Param& p = *params[k];
        Matrix& m = st.m[k];
        Matrix& v = st.v[k];
        for (std::size_t i = 0; i < p.value.rows(); ++i)
            for (std::size_t j = 0; j < p.value.cols(); ++j) {
                const double g = p.grad(i, j);
                m(i, j) = st.beta1 * m(i, j) + (1.0 - st.beta1) * g;
                v(i, j) = st.beta2 * v(i, j) + (1.0 - st.beta2) * g * g;
                const double mhat = m(i, j) / bc1;
                const double vhat = v(i, j) / bc2;
                p.value(i, j) -= lr * mhat / (std::sqrt(vhat) + st.eps);
            }
        p.zero_grad();
    }
}

} // namespace cgc
