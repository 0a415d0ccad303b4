#pragma once

// Minimal reverse-mode autodiff over dense row-major 2-D double tensors.
// Graphs are built per forward pass; leaves may alias shared parameter
// storage so parallel per-sample graphs never write to shared state.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "msd/errors.hpp"

namespace msd {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

struct TensorNode {
    size_t rows = 0, cols = 0;
    std::shared_ptr<std::vector<double>> val;
    std::vector<double> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backprop;

    size_t numel() const { return rows * cols; }
    void ensure_grad() {
        if (grad.size() != numel()) grad.assign(numel(), 0.0);
    }
    ConstMatMap vmap() const { return ConstMatMap(val->data(), rows, cols); }
    MatMap gmap() { return MatMap(grad.data(), rows, cols); }
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorNode> n) : n_(std::move(n)) {}

    static Tensor constant(size_t rows, size_t cols, std::vector<double> values) {
        if (values.size() != rows * cols) throw ShapeMismatch("constant: value count != rows*cols");
        auto n = std::make_shared<TensorNode>();
        n->rows = rows;
        n->cols = cols;
        n->val = std::make_shared<std::vector<double>>(std::move(values));
        return Tensor(n);
    }
    static Tensor zeros(size_t rows, size_t cols) {
        return constant(rows, cols, std::vector<double>(rows * cols, 0.0));
    }
    static Tensor scalar(double v) { return constant(1, 1, {v}); }
    // Leaf aliasing external storage (parameters). The storage must outlive
    // the graph and stay constant during the pass.
    static Tensor leaf(std::shared_ptr<std::vector<double>> storage, size_t rows, size_t cols,
                       bool requires_grad) {
        if (!storage || storage->size() != rows * cols)
            throw ShapeMismatch("leaf: storage size != rows*cols");
        auto n = std::make_shared<TensorNode>();
        n->rows = rows;
        n->cols = cols;
        n->val = std::move(storage);
        n->requires_grad = requires_grad;
        return Tensor(n);
    }

    bool defined() const { return n_ != nullptr; }
    size_t rows() const { return n_->rows; }
    size_t cols() const { return n_->cols; }
    size_t numel() const { return n_->numel(); }
    const std::vector<double>& values() const { return *n_->val; }
    const std::vector<double>& grad() const { return n_->grad; }
    double value_at(size_t i) const { return (*n_->val)[i]; }
    double scalar_value() const {
        if (numel() != 1) throw ShapeMismatch("scalar_value on non-scalar");
        return (*n_->val)[0];
    }
    bool requires_grad() const { return n_->requires_grad; }
    std::shared_ptr<TensorNode> node() const { return n_; }

private:
    std::shared_ptr<TensorNode> n_;
};

namespace detail {

inline std::shared_ptr<TensorNode> make_op(size_t rows, size_t cols,
                                           std::vector<std::shared_ptr<TensorNode>> parents) {
    auto n = std::make_shared<TensorNode>();
    n->rows = rows;
    n->cols = cols;
    n->val = std::make_shared<std::vector<double>>(rows * cols, 0.0);
    for (const auto& p : parents)
        if (p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) n->parents = std::move(parents);
    return n;
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeMismatch(std::string(op) + ": operand shapes differ");
}

}  // namespace detail

// --- elementwise -------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "add");
    auto n = detail::make_op(a.rows(), a.cols(), {a.node(), b.node()});
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& out = *n->val;
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    if (n->requires_grad) {
        auto pa = a.node(), pb = b.node();
        n->backprop = [pa, pb](TensorNode& self) {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] += self.grad[i];
            }
        };
    }
    return Tensor(n);
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "sub");
    auto n = detail::make_op(a.rows(), a.cols(), {a.node(), b.node()});
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& out = *n->val;
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
    if (n->requires_grad) {
        auto pa = a.node(), pb = b.node();
        n->backprop = [pa, pb](TensorNode& self) {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] -= self.grad[i];
            }
        };
    }
    return Tensor(n);
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "mul");
    auto n = detail::make_op(a.rows(), a.cols(), {a.node(), b.node()});
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& out = *n->val;
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    if (n->requires_grad) {
        auto pa = a.node(), pb = b.node();
        n->backprop = [pa, pb](TensorNode& self) {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i)
                    pa->grad[i] += self.grad[i] * (*pb->val)[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i)
                    pb->grad[i] += self.grad[i] * (*pa->val)[i];
            }
        };
    }
    return Tensor(n);
}

inline Tensor scale(const Tensor& a, double s) {
    auto n = detail::make_op(a.rows(), a.cols(), {a.node()});
    const auto& av = a.values();
    auto& out = *n->val;
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * s;
    if (n->requires_grad) {
        auto pa = a.node();
        n->backprop = [pa, s](TensorNode& self) {
            pa->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i] * s;
        };
    }
    return Tensor(n);
}

// a + s*b, used heavily by the diffusion steps
inline Tensor axpy(const Tensor& a, double s, const Tensor& b) {
    detail::check_same_shape(a, b, "axpy");
    auto n = detail::make_op(a.rows(), a.cols(), {a.node(), b.node()});
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& out = *n->val;
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] + s * bv[i];
    if (n->requires_grad) {
        auto pa = a.node(), pb = b.node();
        n->backprop = [pa, pb, s](TensorNode& self) {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] += self.grad[i] * s;
            }
        };
    }
    return Tensor(n);
}

inline Tensor gelu(const Tensor& a) {
    auto n = detail::make_op(a.rows(), a.cols(), {a.node()});
    const auto& av = a.values();
    auto& out = *n->val;
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = 0.5 * av[i] * (1.0 + std::erf(av[i] * M_SQRT1_2));
    if (n->requires_grad) {
        auto pa = a.node();
        n->backprop = [pa](TensorNode& self) {
            pa->ensure_grad();
            static const double inv_sqrt_2pi = 0.3989422804014327;
            for (size_t i = 0; i < self.grad.size(); ++i) {
                double x = (*pa->val)[i];
                double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
                double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
                pa->grad[i] += self.grad[i] * (cdf + x * pdf);
            }
        };
    }
    return Tensor(n);
}

inline Tensor relu(const Tensor& a) {
    auto n = detail::make_op(a.rows(), a.cols(), {a.node()});
    const auto& av = a.values();
    auto& out = *n->val;
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] > 0.0 ? av[i] : 0.0;
    if (n->requires_grad) {
        auto pa = a.node();
        n->backprop = [pa](TensorNode& self) {
            pa->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i)
                if ((*pa->val)[i] > 0.0) pa->grad[i] += self.grad[i];
        };
    }
    return Tensor(n);
}

// --- matrix ops --------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) throw ShapeMismatch("matmul: inner dimensions differ");
    auto n = detail::make_op(a.rows(), b.cols(), {a.node(), b.node()});
    ConstMatMap A(a.values().data(), a.rows(), a.cols());
    ConstMatMap B(b.values().data(), b.rows(), b.cols());
    MatMap(n->val->data(), n->rows, n->cols).noalias() = A * B;
    if (n->requires_grad) {
        auto pa = a.node(), pb = b.node();
        n->backprop = [pa, pb](TensorNode& self) {
            ConstMatMap G(self.grad.data(), self.rows, self.cols);
            if (pa->requires_grad) {
                pa->ensure_grad();
                pa->gmap().noalias() += G * pb->vmap().transpose();
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                pb->gmap().noalias() += pa->vmap().transpose() * G;
            }
        };
    }
    return Tensor(n);
}

// a * b^T without materializing the transpose (attention scores)
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.cols()) throw ShapeMismatch("matmul_nt: inner dimensions differ");
    auto n = detail::make_op(a.rows(), b.rows(), {a.node(), b.node()});
    ConstMatMap A(a.values().data(), a.rows(), a.cols());
    ConstMatMap B(b.values().data(), b.rows(), b.cols());
    MatMap(n->val->data(), n->rows, n->cols).noalias() = A * B.transpose();
    if (n->requires_grad) {
        auto pa = a.node(), pb = b.node();
        n->backprop = [pa, pb](TensorNode& self) {
            ConstMatMap G(self.grad.data(), self.rows, self.cols);
            if (pa->requires_grad) {
                pa->ensure_grad();
                pa->gmap().noalias() += G * pb->vmap();
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                pb->gmap().noalias() += G.transpose() * pa->vmap();
            }
        };
    }
    return Tensor(n);
}

// broadcast a (1 x m) bias over every row of a (n x m) tensor
inline Tensor add_row_broadcast(const Tensor& a, const Tensor& bias) {
    if (bias.rows() != 1 || bias.cols() != a.cols())
        throw ShapeMismatch("add_row_broadcast: bias must be (1 x cols)");
    auto n = detail::make_op(a.rows(), a.cols(), {a.node(), bias.node()});
    const auto& av = a.values();
    const auto& bv = bias.values();
    auto& out = *n->val;
    for (size_t r = 0; r < a.rows(); ++r)
        for (size_t c = 0; c < a.cols(); ++c) out[r * a.cols() + c] = av[r * a.cols() + c] + bv[c];
    if (n->requires_grad) {
        auto pa = a.node(), pb = bias.node();
        n->backprop = [pa, pb](TensorNode& self) {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (size_t r = 0; r < self.rows; ++r)
                    for (size_t c = 0; c < self.cols; ++c)
                        pb->grad[c] += self.grad[r * self.cols + c];
            }
        };
    }
    return Tensor(n);
}

// --- shape ops ---------------------------------------------------------------

inline Tensor row_concat(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw EmptyInput("row_concat: no parts");
    size_t cols = parts[0].cols(), rows = 0;
    std::vector<std::shared_ptr<TensorNode>> parents;
    for (const auto& p : parts) {
        if (p.cols() != cols) throw ShapeMismatch("row_concat: column counts differ");
        rows += p.rows();
        parents.push_back(p.node());
    }
    auto all_parents = parents;
    auto n = detail::make_op(rows, cols, std::move(parents));
    auto& out = *n->val;
    size_t r = 0;
    for (const auto& p : parts) {
        std::copy(p.values().begin(), p.values().end(), out.begin() + r * cols);
        r += p.rows();
    }
    if (n->requires_grad) {
        n->backprop = [all_parents](TensorNode& self) {
            size_t r = 0;
            for (const auto& p : all_parents) {
                if (p->requires_grad) {
                    p->ensure_grad();
                    for (size_t i = 0; i < p->numel(); ++i)
                        p->grad[i] += self.grad[r * self.cols + i];
                }
                r += p->rows;
            }
        };
    }
    return Tensor(n);
}

inline Tensor row_slice(const Tensor& a, size_t r0, size_t r1) {
    if (r0 >= r1 || r1 > a.rows()) throw ShapeMismatch("row_slice: bad range");
    auto n = detail::make_op(r1 - r0, a.cols(), {a.node()});
    const auto& av = a.values();
    std::copy(av.begin() + r0 * a.cols(), av.begin() + r1 * a.cols(), n->val->begin());
    if (n->requires_grad) {
        auto pa = a.node();
        n->backprop = [pa, r0](TensorNode& self) {
            pa->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i)
                pa->grad[r0 * self.cols + i] += self.grad[i];
        };
    }
    return Tensor(n);
}

inline Tensor col_slice(const Tensor& a, size_t c0, size_t c1) {
    if (c0 >= c1 || c1 > a.cols()) throw ShapeMismatch("col_slice: bad range");
    size_t w = c1 - c0;
    auto n = detail::make_op(a.rows(), w, {a.node()});
    const auto& av = a.values();
    auto& out = *n->val;
    for (size_t r = 0; r < a.rows(); ++r)
        for (size_t c = 0; c < w; ++c) out[r * w + c] = av[r * a.cols() + c0 + c];
    if (n->requires_grad) {
        auto pa = a.node();
        size_t acols = a.cols();
        n->backprop = [pa, c0, w, acols](TensorNode& self) {
            pa->ensure_grad();
            for (size_t r = 0; r < self.rows; ++r)
                for (size_t c = 0; c < w; ++c)
                    pa->grad[r * acols + c0 + c] += self.grad[r * w + c];
        };
    }
    return Tensor(n);
}

inline Tensor col_concat(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw EmptyInput("col_concat: no parts");
    size_t rows = parts[0].rows(), cols = 0;
    std::vector<std::shared_ptr<TensorNode>> parents;
    for (const auto& p : parts) {
        if (p.rows() != rows) throw ShapeMismatch("col_concat: row counts differ");
        cols += p.cols();
        parents.push_back(p.node());
    }
    auto all_parents = parents;
    auto n = detail::make_op(rows, cols, std::move(parents));
    auto& out = *n->val;
    size_t c = 0;
    for (const auto& p : parts) {
        for (size_t r = 0; r < rows; ++r)
            std::copy(p.values().begin() + r * p.cols(), p.values().begin() + (r + 1) * p.cols(),
                      out.begin() + r * cols + c);
        c += p.cols();
    }
    if (n->requires_grad) {
        n->backprop = [all_parents](TensorNode& self) {
            size_t c = 0;
            for (const auto& p : all_parents) {
                if (p->requires_grad) {
                    p->ensure_grad();
                    for (size_t r = 0; r < self.rows; ++r)
                        for (size_t k = 0; k < p->cols; ++k)
                            p->grad[r * p->cols + k] += self.grad[r * self.cols + c + k];
                }
                c += p->cols;
            }
        };
    }
    return Tensor(n);
}

// sliding windows of k rows, flattened: (f x C) -> (f-k+1 x k*C)
inline Tensor im2col_rows(const Tensor& a, size_t k) {
    if (a.rows() < k) throw ShapeMismatch("im2col_rows: fewer rows than kernel");
    size_t orows = a.rows() - k + 1, c = a.cols();
    auto n = detail::make_op(orows, k * c, {a.node()});
    const auto& av = a.values();
    auto& out = *n->val;
    for (size_t r = 0; r < orows; ++r)
        std::copy(av.begin() + r * c, av.begin() + (r + k) * c, out.begin() + r * k * c);
    if (n->requires_grad) {
        auto pa = a.node();
        n->backprop = [pa, k, c](TensorNode& self) {
            pa->ensure_grad();
            for (size_t r = 0; r < self.rows; ++r)
                for (size_t i = 0; i < k * c; ++i)
                    pa->grad[r * c + i] += self.grad[r * k * c + i];
        };
    }
    return Tensor(n);
}

// --- normalization / attention helpers ----------------------------------------

inline Tensor softmax_rows(const Tensor& a) {
    auto n = detail::make_op(a.rows(), a.cols(), {a.node()});
    const auto& av = a.values();
    auto& out = *n->val;
    size_t c = a.cols();
    for (size_t r = 0; r < a.rows(); ++r) {
        double mx = -1e300;
        for (size_t j = 0; j < c; ++j) mx = std::max(mx, av[r * c + j]);
        double sum = 0.0;
        for (size_t j = 0; j < c; ++j) {
            double e = std::exp(av[r * c + j] - mx);
            out[r * c + j] = e;
            sum += e;
        }
        for (size_t j = 0; j < c; ++j) out[r * c + j] /= sum;
    }
    if (n->requires_grad) {
        auto pa = a.node();
        auto yv = n->val;  // softmax output needed in backward
        n->backprop = [pa, yv](TensorNode& self) {
            pa->ensure_grad();
            size_t c = self.cols;
            for (size_t r = 0; r < self.rows; ++r) {
                double dot = 0.0;
                for (size_t j = 0; j < c; ++j) dot += self.grad[r * c + j] * (*yv)[r * c + j];
                for (size_t j = 0; j < c; ++j)
                    pa->grad[r * c + j] += (*yv)[r * c + j] * (self.grad[r * c + j] - dot);
            }
        };
    }
    return Tensor(n);
}

// Per-row layer normalization with affine parameters gamma/beta (1 x cols).
inline Tensor layer_norm_rows(const Tensor& a, const Tensor& gamma, const Tensor& beta,
                              double eps = 1e-5) {
    if (gamma.rows() != 1 || gamma.cols() != a.cols() || beta.rows() != 1 ||
        beta.cols() != a.cols())
        throw ShapeMismatch("layer_norm_rows: gamma/beta must be (1 x cols)");
    auto n = detail::make_op(a.rows(), a.cols(), {a.node(), gamma.node(), beta.node()});
    const auto& av = a.values();
    const auto& gv = gamma.values();
    const auto& bv = beta.values();
    auto& out = *n->val;
    size_t c = a.cols();
    auto stats = std::make_shared<std::vector<double>>(2 * a.rows());  // mean, inv_std per row
    for (size_t r = 0; r < a.rows(); ++r) {
        double mean = 0.0;
        for (size_t j = 0; j < c; ++j) mean += av[r * c + j];
        mean /= double(c);
        double var = 0.0;
        for (size_t j = 0; j < c; ++j) {
            double d = av[r * c + j] - mean;
            var += d * d;
        }
        var /= double(c);
        double inv_std = 1.0 / std::sqrt(var + eps);
        (*stats)[2 * r] = mean;
        (*stats)[2 * r + 1] = inv_std;
        for (size_t j = 0; j < c; ++j)
            out[r * c + j] = (av[r * c + j] - mean) * inv_std * gv[j] + bv[j];
    }
    if (n->requires_grad) {
        auto pa = a.node(), pg = gamma.node(), pb = beta.node();
        n->backprop = [pa, pg, pb, stats](TensorNode& self) {
            size_t c = self.cols;
            if (pg->requires_grad) pg->ensure_grad();
            if (pb->requires_grad) pb->ensure_grad();
            if (pa->requires_grad) pa->ensure_grad();
            for (size_t r = 0; r < self.rows; ++r) {
                double mean = (*stats)[2 * r], inv_std = (*stats)[2 * r + 1];
                double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                for (size_t j = 0; j < c; ++j) {
                    double xhat = ((*pa->val)[r * c + j] - mean) * inv_std;
                    double g = self.grad[r * c + j];
                    if (pg->requires_grad) pg->grad[j] += g * xhat;
                    if (pb->requires_grad) pb->grad[j] += g;
                    double dxhat = g * (*pg->val)[j];
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += dxhat * xhat;
                }
                if (pa->requires_grad) {
                    for (size_t j = 0; j < c; ++j) {
                        double xhat = ((*pa->val)[r * c + j] - mean) * inv_std;
                        double dxhat = self.grad[r * c + j] * (*pg->val)[j];
                        pa->grad[r * c + j] +=
                            inv_std *
                            (dxhat - sum_dxhat / double(c) - xhat * sum_dxhat_xhat / double(c));
                    }
                }
            }
        };
    }
    return Tensor(n);
}

// --- reductions / losses -------------------------------------------------------

inline Tensor sum(const Tensor& a) {
    auto n = detail::make_op(1, 1, {a.node()});
    double s = 0.0;
    for (double v : a.values()) s += v;
    (*n->val)[0] = s;
    if (n->requires_grad) {
        auto pa = a.node();
        n->backprop = [pa](TensorNode& self) {
            pa->ensure_grad();
            for (auto& g : pa->grad) g += self.grad[0];
        };
    }
    return Tensor(n);
}

inline Tensor mean_all(const Tensor& a) { return scale(sum(a), 1.0 / double(a.numel())); }

inline Tensor mean_rows(const Tensor& a) {
    auto n = detail::make_op(1, a.cols(), {a.node()});
    const auto& av = a.values();
    auto& out = *n->val;
    for (size_t r = 0; r < a.rows(); ++r)
        for (size_t c = 0; c < a.cols(); ++c) out[c] += av[r * a.cols() + c];
    for (auto& v : out) v /= double(a.rows());
    if (n->requires_grad) {
        auto pa = a.node();
        n->backprop = [pa](TensorNode& self) {
            pa->ensure_grad();
            double inv = 1.0 / double(pa->rows);
            for (size_t r = 0; r < pa->rows; ++r)
                for (size_t c = 0; c < self.cols; ++c)
                    pa->grad[r * self.cols + c] += self.grad[c] * inv;
        };
    }
    return Tensor(n);
}

// mean squared error over all elements
inline Tensor mse(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "mse");
    auto n = detail::make_op(1, 1, {a.node(), b.node()});
    const auto& av = a.values();
    const auto& bv = b.values();
    double s = 0.0;
    for (size_t i = 0; i < av.size(); ++i) {
        double d = av[i] - bv[i];
        s += d * d;
    }
    (*n->val)[0] = s / double(av.size());
    if (n->requires_grad) {
        auto pa = a.node(), pb = b.node();
        n->backprop = [pa, pb](TensorNode& self) {
            double coef = 2.0 * self.grad[0] / double(pa->numel());
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (size_t i = 0; i < pa->numel(); ++i)
                    pa->grad[i] += coef * ((*pa->val)[i] - (*pb->val)[i]);
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (size_t i = 0; i < pb->numel(); ++i)
                    pb->grad[i] -= coef * ((*pa->val)[i] - (*pb->val)[i]);
            }
        };
    }
    return Tensor(n);
}

// Cosine similarity of two flattened tensors with a clamped denominator:
// a.b / max(|a||b|, delta). Fused op with an exact hand derivative.
inline Tensor cosine_similarity_t(const Tensor& a, const Tensor& b, double delta = 1e-6) {
    if (a.numel() != b.numel()) throw DimensionMismatch("cosine_similarity: sizes differ");
    auto n = detail::make_op(1, 1, {a.node(), b.node()});
    const auto& av = a.values();
    const auto& bv = b.values();
    double dot = 0.0, na2 = 0.0, nb2 = 0.0;
    for (size_t i = 0; i < av.size(); ++i) {
        dot += av[i] * bv[i];
        na2 += av[i] * av[i];
        nb2 += bv[i] * bv[i];
    }
    double na = std::sqrt(na2), nb = std::sqrt(nb2);
    bool clamped = na * nb < delta;
    double denom = clamped ? delta : na * nb;
    double c = dot / denom;
    (*n->val)[0] = c;
    if (n->requires_grad) {
        auto pa = a.node(), pb = b.node();
        n->backprop = [pa, pb, c, denom, clamped, na2, nb2](TensorNode& self) {
            double g = self.grad[0];
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (size_t i = 0; i < pa->numel(); ++i) {
                    double da = (*pb->val)[i] / denom;
                    if (!clamped) da -= c * (*pa->val)[i] / na2;
                    pa->grad[i] += g * da;
                }
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (size_t i = 0; i < pb->numel(); ++i) {
                    double db = (*pa->val)[i] / denom;
                    if (!clamped) db -= c * (*pb->val)[i] / nb2;
                    pb->grad[i] += g * db;
                }
            }
        };
    }
    return Tensor(n);
}

// log-softmax cross-entropy against a hard label; logits are (1 x C)
inline Tensor cross_entropy_logits(const Tensor& logits, size_t label) {
    if (logits.rows() != 1 || label >= logits.cols())
        throw ShapeMismatch("cross_entropy_logits: bad logits/label");
    auto n = detail::make_op(1, 1, {logits.node()});
    const auto& lv = logits.values();
    double mx = -1e300;
    for (double v : lv) mx = std::max(mx, v);
    double lse = 0.0;
    for (double v : lv) lse += std::exp(v - mx);
    lse = mx + std::log(lse);
    (*n->val)[0] = lse - lv[label];
    if (n->requires_grad) {
        auto pa = logits.node();
        n->backprop = [pa, label, lse](TensorNode& self) {
            pa->ensure_grad();
            for (size_t j = 0; j < pa->numel(); ++j) {
                double soft = std::exp((*pa->val)[j] - lse);
                pa->grad[j] += self.grad[0] * (soft - (j == label ? 1.0 : 0.0));
            }
        };
    }
    return Tensor(n);
}

// Cut the graph: value copy with no parents.
inline Tensor stop_gradient(const Tensor& a) {
    return Tensor::constant(a.rows(), a.cols(), a.values());
}

// --- backward ------------------------------------------------------------------

inline void backward(const Tensor& loss) {
    if (loss.numel() != 1) throw NonScalarLoss("backward: loss must be scalar");
    if (!loss.requires_grad()) return;

    // iterative post-order toposort
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> seen;
    std::vector<std::pair<TensorNode*, size_t>> stack{{loss.node().get(), 0}};
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            TensorNode* p = node->parents[idx++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->ensure_grad();
    loss.node()->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* node = *it;
        if (node->backprop && !node->grad.empty()) node->backprop(*node);
    }
}

}  // namespace msd
