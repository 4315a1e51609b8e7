#include "udalm/autograd.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "udalm/error.hpp"

namespace udalm {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using StridedMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

ConstMatMap as_mat(const Tensor& t, int rows, int cols) { return {t.ptr(), rows, cols}; }
MatMap as_mat(Tensor& t, int rows, int cols) { return {t.ptr(), rows, cols}; }

void require(bool ok, const std::string& what) {
    if (!ok) throw InputError(what);
}

int conv_out(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }

// col is (C·k·k) × (Ho·Wo)
void im2col(const double* x, int channels, int height, int width, int k, int stride, int pad,
            int out_h, int out_w, double* col) {
    const int plane = out_h * out_w;
    for (int c = 0; c < channels; ++c) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                double* row = col + static_cast<std::size_t>((c * k + ki) * k + kj) * plane;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride - pad + ki;
                    double* dst = row + oy * out_w;
                    if (iy < 0 || iy >= height) {
                        std::fill(dst, dst + out_w, 0.0);
                        continue;
                    }
                    const double* src = x + (static_cast<std::size_t>(c) * height + iy) * width;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride - pad + kj;
                        dst[ox] = (ix >= 0 && ix < width) ? src[ix] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_add(const double* col, int channels, int height, int width, int k, int stride, int pad,
                int out_h, int out_w, double* x) {
    const int plane = out_h * out_w;
    for (int c = 0; c < channels; ++c) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                const double* row = col + static_cast<std::size_t>((c * k + ki) * k + kj) * plane;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride - pad + ki;
                    if (iy < 0 || iy >= height) continue;
                    double* dst = x + (static_cast<std::size_t>(c) * height + iy) * width;
                    const double* src = row + oy * out_w;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride - pad + kj;
                        if (ix >= 0 && ix < width) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

}  // namespace

std::string shape_string(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
}

int ParameterStore::add(std::string name, Tensor init) {
    params_.push_back({std::move(name), std::move(init)});
    return static_cast<int>(params_.size()) - 1;
}

int ParameterStore::find(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (params_[i].name == name) return static_cast<int>(i);
    return -1;
}

std::size_t ParameterStore::total_elements() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

Var Graph::push(Tensor value, bool needs_grad, BackwardFn backward) {
    Node node;
    node.value = std::move(value);
    node.needs_grad = track_ && needs_grad;
    if (node.needs_grad) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

bool Graph::any_needs(std::initializer_list<Var> vars) const {
    return std::any_of(vars.begin(), vars.end(),
                       [&](Var v) { return v.valid() && nodes_[static_cast<std::size_t>(v.id)].needs_grad; });
}

Var Graph::constant(Tensor value) { return push(std::move(value), false, nullptr); }

Var Graph::parameter(const ParameterStore& store, int index) {
    Node node;
    node.external = &store.at(index).value;
    node.param_index = index;
    node.needs_grad = track_;
    nodes_.push_back(std::move(node));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tensor& Graph::value(Var v) const {
    const Node& n = nodes_.at(static_cast<std::size_t>(v.id));
    return n.external ? *n.external : n.value;
}

const Tensor& Graph::grad(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).grad; }

Tensor& Graph::grad_buffer(Var v) {
    Node& n = nodes_.at(static_cast<std::size_t>(v.id));
    if (n.grad.size() == 0) {
        const Tensor& val = n.external ? *n.external : n.value;
        n.grad = Tensor(val.shape);
    }
    return n.grad;
}

bool Graph::requires_grad(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).needs_grad; }

void Graph::backward(Var root, double seed) {
    const std::pair<Var, double> roots[] = {{root, seed}};
    backward(roots);
}

void Graph::backward(std::span<const std::pair<Var, double>> roots) {
    if (!track_) throw InputError("backward on a graph built without gradient tracking");
    int last = -1;
    for (const auto& [v, w] : roots) {
        Tensor& g = grad_buffer(v);
        for (double& x : g.data) x += w;
        last = std::max(last, v.id);
    }
    for (int i = last; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (!n.needs_grad || !n.backward || n.grad.size() == 0) continue;
        n.backward(*this, n.grad);
    }
}

void Graph::accumulate_parameter_grads(std::vector<Tensor>& out) const {
    for (const Node& n : nodes_) {
        if (n.param_index < 0 || n.grad.size() == 0) continue;
        Tensor& dst = out.at(static_cast<std::size_t>(n.param_index));
        if (dst.size() != n.grad.size()) dst = Tensor(n.grad.shape);
        for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += n.grad.data[i];
    }
}

Var Graph::custom(Tensor value, std::span<const Var> parents, BackwardFn backward) {
    bool needs = false;
    for (Var p : parents) needs = needs || requires_grad(p);
    return push(std::move(value), needs, std::move(backward));
}

Var Graph::matmul(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    require(A.rank() == 2 && B.rank() == 2 && A.dim(1) == B.dim(0),
            "matmul shape mismatch " + shape_string(A.shape) + " · " + shape_string(B.shape));
    const int m = A.dim(0), k = A.dim(1), n = B.dim(1);
    Tensor out({m, n});
    as_mat(out, m, n).noalias() = as_mat(A, m, k) * as_mat(B, k, n);
    return push(std::move(out), any_needs({a, b}), [a, b, m, k, n](Graph& g, const Tensor& dy) {
        const auto dY = as_mat(dy, m, n);
        if (g.requires_grad(a)) as_mat(g.grad_buffer(a), m, k).noalias() += dY * as_mat(g.value(b), k, n).transpose();
        if (g.requires_grad(b)) as_mat(g.grad_buffer(b), k, n).noalias() += as_mat(g.value(a), m, k).transpose() * dY;
    });
}

Var Graph::linear(Var x, Var w, Var b) {
    const Tensor& X = value(x);
    const Tensor& W = value(w);
    require(X.rank() == 2 && W.rank() == 2 && X.dim(1) == W.dim(1),
            "linear shape mismatch " + shape_string(X.shape) + " vs weight " + shape_string(W.shape));
    const int n = X.dim(0), in = X.dim(1), out_f = W.dim(0);
    require(value(b).size() == static_cast<std::size_t>(out_f), "linear bias size mismatch");
    Tensor out({n, out_f});
    auto Y = as_mat(out, n, out_f);
    Y.noalias() = as_mat(X, n, in) * as_mat(W, out_f, in).transpose();
    const Eigen::Map<const Eigen::RowVectorXd> bias(value(b).ptr(), out_f);
    Y.rowwise() += bias;
    return push(std::move(out), any_needs({x, w, b}), [x, w, b, n, in, out_f](Graph& g, const Tensor& dy) {
        const auto dY = as_mat(dy, n, out_f);
        if (g.requires_grad(x)) as_mat(g.grad_buffer(x), n, in).noalias() += dY * as_mat(g.value(w), out_f, in);
        if (g.requires_grad(w)) as_mat(g.grad_buffer(w), out_f, in).noalias() += dY.transpose() * as_mat(g.value(x), n, in);
        if (g.requires_grad(b)) {
            Eigen::Map<Eigen::RowVectorXd> db(g.grad_buffer(b).ptr(), out_f);
            db += dY.colwise().sum();
        }
    });
}

Var Graph::add(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    require(A.size() == B.size(), "add size mismatch " + shape_string(A.shape) + " + " + shape_string(B.shape));
    Tensor out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += B.data[i];
    return push(std::move(out), any_needs({a, b}), [a, b](Graph& g, const Tensor& dy) {
        for (Var v : {a, b}) {
            if (!g.requires_grad(v)) continue;
            Tensor& d = g.grad_buffer(v);
            for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += dy.data[i];
        }
    });
}

Var Graph::add_constant(Var a, const Tensor& c) {
    const Tensor& A = value(a);
    require(A.size() == c.size(), "add_constant size mismatch");
    Tensor out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += c.data[i];
    return push(std::move(out), any_needs({a}), [a](Graph& g, const Tensor& dy) {
        Tensor& d = g.grad_buffer(a);
        for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += dy.data[i];
    });
}

Var Graph::scale(Var a, double factor) {
    Tensor out = value(a);
    for (double& v : out.data) v *= factor;
    return push(std::move(out), any_needs({a}), [a, factor](Graph& g, const Tensor& dy) {
        Tensor& d = g.grad_buffer(a);
        for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += factor * dy.data[i];
    });
}

Var Graph::relu(Var a) {
    Tensor out = value(a);
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    return push(std::move(out), any_needs({a}), [a](Graph& g, const Tensor& dy) {
        const Tensor& x = g.value(a);
        Tensor& d = g.grad_buffer(a);
        for (std::size_t i = 0; i < d.size(); ++i)
            if (x.data[i] > 0.0) d.data[i] += dy.data[i];
    });
}

Var Graph::sigmoid(Var a) {
    Tensor out = value(a);
    for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    const Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), any_needs({a}), [a, self](Graph& g, const Tensor& dy) {
        const Tensor& s = g.value(self);
        Tensor& d = g.grad_buffer(a);
        for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += dy.data[i] * s.data[i] * (1.0 - s.data[i]);
    });
}

Var Graph::grl(Var a) {
    Tensor out = value(a);
    return push(std::move(out), any_needs({a}), [a](Graph& g, const Tensor& dy) {
        Tensor& d = g.grad_buffer(a);
        for (std::size_t i = 0; i < d.size(); ++i) d.data[i] -= dy.data[i];
    });
}

Var Graph::reshape(Var a, std::vector<int> shape) {
    Tensor out = value(a);
    require(Tensor::count(shape) == out.size(), "reshape element count mismatch");
    out.shape = std::move(shape);
    return push(std::move(out), any_needs({a}), [a](Graph& g, const Tensor& dy) {
        Tensor& d = g.grad_buffer(a);
        for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += dy.data[i];
    });
}

Var Graph::conv2d(Var x, Var w, Var b, int stride, int pad) {
    const Tensor& X = value(x);
    const Tensor& W = value(w);
    require(X.rank() == 3 && W.rank() == 4 && W.dim(1) == X.dim(0) && W.dim(2) == W.dim(3),
            "conv2d shape mismatch " + shape_string(X.shape) + " * " + shape_string(W.shape));
    const int cin = X.dim(0), h = X.dim(1), wd = X.dim(2);
    const int cout = W.dim(0), k = W.dim(2);
    const int oh = conv_out(h, k, stride, pad), ow = conv_out(wd, k, stride, pad);
    require(oh > 0 && ow > 0, "conv2d output would be empty");
    const int rows = cin * k * k, plane = oh * ow;

    auto col = std::make_shared<Tensor>(std::vector<int>{rows, plane});
    im2col(X.ptr(), cin, h, wd, k, stride, pad, oh, ow, col->ptr());

    Tensor out({cout, oh, ow});
    auto Y = as_mat(out, cout, plane);
    Y.noalias() = as_mat(W, cout, rows) * as_mat(*col, rows, plane);
    const Eigen::Map<const Eigen::VectorXd> bias(value(b).ptr(), cout);
    Y.colwise() += bias;

    return push(std::move(out), any_needs({x, w, b}),
                [=](Graph& g, const Tensor& dy) {
                    const auto dY = as_mat(dy, cout, plane);
                    if (g.requires_grad(w))
                        as_mat(g.grad_buffer(w), cout, rows).noalias() += dY * as_mat(*col, rows, plane).transpose();
                    if (g.requires_grad(b)) {
                        Eigen::Map<Eigen::VectorXd> db(g.grad_buffer(b).ptr(), cout);
                        db += dY.rowwise().sum();
                    }
                    if (g.requires_grad(x)) {
                        Tensor dcol({rows, plane});
                        as_mat(dcol, rows, plane).noalias() = as_mat(g.value(w), cout, rows).transpose() * dY;
                        col2im_add(dcol.ptr(), cin, h, wd, k, stride, pad, oh, ow, g.grad_buffer(x).ptr());
                    }
                });
}

Var Graph::conv_transpose2d(Var x, Var w, Var b, int stride, int pad) {
    const Tensor& X = value(x);
    const Tensor& W = value(w);
    require(X.rank() == 3 && W.rank() == 4 && W.dim(0) == X.dim(0) && W.dim(2) == W.dim(3),
            "conv_transpose2d shape mismatch " + shape_string(X.shape) + " * " + shape_string(W.shape));
    const int cin = X.dim(0), h = X.dim(1), wd = X.dim(2);
    const int cout = W.dim(1), k = W.dim(2);
    const int oh = (h - 1) * stride - 2 * pad + k, ow = (wd - 1) * stride - 2 * pad + k;
    require(conv_out(oh, k, stride, pad) == h && conv_out(ow, k, stride, pad) == wd,
            "conv_transpose2d geometry is not invertible");
    const int rows = cout * k * k, plane = h * wd;

    Tensor cols({rows, plane});
    as_mat(cols, rows, plane).noalias() = as_mat(W, cin, rows).transpose() * as_mat(X, cin, plane);
    Tensor out({cout, oh, ow});
    col2im_add(cols.ptr(), cout, oh, ow, k, stride, pad, h, wd, out.ptr());
    const int oplane = oh * ow;
    const Tensor& B = value(b);
    for (int c = 0; c < cout; ++c)
        for (int i = 0; i < oplane; ++i) out.data[static_cast<std::size_t>(c) * oplane + i] += B.data[c];

    return push(std::move(out), any_needs({x, w, b}),
                [=](Graph& g, const Tensor& dy) {
                    Tensor dcol({rows, plane});
                    im2col(dy.ptr(), cout, oh, ow, k, stride, pad, h, wd, dcol.ptr());
                    const auto dC = as_mat(dcol, rows, plane);
                    if (g.requires_grad(x))
                        as_mat(g.grad_buffer(x), cin, plane).noalias() += as_mat(g.value(w), cin, rows) * dC;
                    if (g.requires_grad(w))
                        as_mat(g.grad_buffer(w), cin, rows).noalias() += as_mat(g.value(x), cin, plane) * dC.transpose();
                    if (g.requires_grad(b)) {
                        Tensor& db = g.grad_buffer(b);
                        for (int c = 0; c < cout; ++c) {
                            double s = 0.0;
                            for (int i = 0; i < oplane; ++i) s += dy.data[static_cast<std::size_t>(c) * oplane + i];
                            db.data[c] += s;
                        }
                    }
                });
}

Var Graph::layer_norm(Var x, Var gamma, Var beta, double eps) {
    const Tensor& X = value(x);
    require(X.rank() == 2, "layer_norm expects a matrix");
    const int n = X.dim(0), c = X.dim(1);
    require(value(gamma).size() == static_cast<std::size_t>(c) && value(beta).size() == static_cast<std::size_t>(c),
            "layer_norm affine size mismatch");
    auto xhat = std::make_shared<Tensor>(X.shape);
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n));
    Tensor out(X.shape);
    const Tensor& G = value(gamma);
    const Tensor& Bt = value(beta);
    for (int r = 0; r < n; ++r) {
        const double* row = X.ptr() + static_cast<std::size_t>(r) * c;
        double mean = 0.0;
        for (int j = 0; j < c; ++j) mean += row[j];
        mean /= c;
        double var = 0.0;
        for (int j = 0; j < c; ++j) var += (row[j] - mean) * (row[j] - mean);
        var /= c;
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[static_cast<std::size_t>(r)] = is;
        for (int j = 0; j < c; ++j) {
            const std::size_t idx = static_cast<std::size_t>(r) * c + j;
            xhat->data[idx] = (row[j] - mean) * is;
            out.data[idx] = G.data[j] * xhat->data[idx] + Bt.data[j];
        }
    }
    return push(std::move(out), any_needs({x, gamma, beta}),
                [=](Graph& g, const Tensor& dy) {
                    const Tensor& Gv = g.value(gamma);
                    if (g.requires_grad(gamma) || g.requires_grad(beta)) {
                        Tensor& dg = g.grad_buffer(gamma);
                        Tensor& db = g.grad_buffer(beta);
                        for (int r = 0; r < n; ++r)
                            for (int j = 0; j < c; ++j) {
                                const std::size_t idx = static_cast<std::size_t>(r) * c + j;
                                dg.data[j] += dy.data[idx] * xhat->data[idx];
                                db.data[j] += dy.data[idx];
                            }
                    }
                    if (!g.requires_grad(x)) return;
                    Tensor& dx = g.grad_buffer(x);
                    std::vector<double> dxhat(static_cast<std::size_t>(c));
                    for (int r = 0; r < n; ++r) {
                        double mean_d = 0.0, mean_dx = 0.0;
                        for (int j = 0; j < c; ++j) {
                            const std::size_t idx = static_cast<std::size_t>(r) * c + j;
                            dxhat[j] = dy.data[idx] * Gv.data[j];
                            mean_d += dxhat[j];
                            mean_dx += dxhat[j] * xhat->data[idx];
                        }
                        mean_d /= c;
                        mean_dx /= c;
                        const double is = (*inv_std)[static_cast<std::size_t>(r)];
                        for (int j = 0; j < c; ++j) {
                            const std::size_t idx = static_cast<std::size_t>(r) * c + j;
                            dx.data[idx] += is * (dxhat[j] - mean_d - xhat->data[idx] * mean_dx);
                        }
                    }
                });
}

Var Graph::attention(Var q, Var k, Var v, int heads) {
    const Tensor& Q = value(q);
    const Tensor& K = value(k);
    const Tensor& V = value(v);
    require(Q.rank() == 2 && K.rank() == 2 && V.rank() == 2, "attention expects matrices");
    const int lq = Q.dim(0), c = Q.dim(1), n = K.dim(0);
    require(K.dim(1) == c && V.dim(1) == c && V.dim(0) == n, "attention shape mismatch");
    require(heads >= 1 && c % heads == 0, "attention heads must divide the embedding width");
    const int d = c / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d));

    // probs: heads × lq × n
    auto probs = std::make_shared<Tensor>(std::vector<int>{heads, lq, n});
    Tensor out({lq, c});
    for (int h = 0; h < heads; ++h) {
        const ConstStridedMap Qh(Q.ptr() + h * d, lq, d, Eigen::OuterStride<>(c));
        const ConstStridedMap Kh(K.ptr() + h * d, n, d, Eigen::OuterStride<>(c));
        const ConstStridedMap Vh(V.ptr() + h * d, n, d, Eigen::OuterStride<>(c));
        MatMap P(probs->ptr() + static_cast<std::size_t>(h) * lq * n, lq, n);
        P.noalias() = (Qh * Kh.transpose()) * inv_sqrt;
        for (int r = 0; r < lq; ++r) {
            auto row = P.row(r);
            const double mx = row.maxCoeff();
            row = (row.array() - mx).exp();
            row /= row.sum();
        }
        StridedMap Oh(out.ptr() + h * d, lq, d, Eigen::OuterStride<>(c));
        Oh.noalias() = P * Vh;
    }
    return push(std::move(out), any_needs({q, k, v}),
                [=](Graph& g, const Tensor& dy) {
                    const Tensor& Qv = g.value(q);
                    const Tensor& Kv = g.value(k);
                    const Tensor& Vv = g.value(v);
                    const bool gq = g.requires_grad(q), gk = g.requires_grad(k), gv = g.requires_grad(v);
                    RowMat dP(lq, n), dS(lq, n);
                    for (int h = 0; h < heads; ++h) {
                        const ConstStridedMap dO(dy.ptr() + h * d, lq, d, Eigen::OuterStride<>(c));
                        const ConstMatMap P(probs->ptr() + static_cast<std::size_t>(h) * lq * n, lq, n);
                        const ConstStridedMap Qh(Qv.ptr() + h * d, lq, d, Eigen::OuterStride<>(c));
                        const ConstStridedMap Kh(Kv.ptr() + h * d, n, d, Eigen::OuterStride<>(c));
                        const ConstStridedMap Vh(Vv.ptr() + h * d, n, d, Eigen::OuterStride<>(c));
                        if (gv) {
                            StridedMap dV(g.grad_buffer(v).ptr() + h * d, n, d, Eigen::OuterStride<>(c));
                            dV.noalias() += P.transpose() * dO;
                        }
                        if (!gq && !gk) continue;
                        dP.noalias() = dO * Vh.transpose();
                        for (int r = 0; r < lq; ++r) {
                            const double dot = dP.row(r).dot(P.row(r));
                            dS.row(r) = P.row(r).array() * (dP.row(r).array() - dot);
                        }
                        dS *= inv_sqrt;
                        if (gq) {
                            StridedMap dQ(g.grad_buffer(q).ptr() + h * d, lq, d, Eigen::OuterStride<>(c));
                            dQ.noalias() += dS * Kh;
                        }
                        if (gk) {
                            StridedMap dK(g.grad_buffer(k).ptr() + h * d, n, d, Eigen::OuterStride<>(c));
                            dK.noalias() += dS.transpose() * Qh;
                        }
                    }
                });
}

Var Graph::global_avg_pool(Var x) {
    const Tensor& X = value(x);
    require(X.rank() == 3, "global_avg_pool expects C×H×W");
    const int c = X.dim(0), plane = X.dim(1) * X.dim(2);
    Tensor out({1, c});
    for (int ch = 0; ch < c; ++ch) {
        double s = 0.0;
        const double* p = X.ptr() + static_cast<std::size_t>(ch) * plane;
        for (int i = 0; i < plane; ++i) s += p[i];
        out.data[ch] = s / plane;
    }
    return push(std::move(out), any_needs({x}), [x, c, plane](Graph& g, const Tensor& dy) {
        Tensor& dx = g.grad_buffer(x);
        for (int ch = 0; ch < c; ++ch) {
            const double v = dy.data[ch] / plane;
            double* p = dx.ptr() + static_cast<std::size_t>(ch) * plane;
            for (int i = 0; i < plane; ++i) p[i] += v;
        }
    });
}

Var Graph::to_tokens(Var x) {
    const Tensor& X = value(x);
    require(X.rank() == 3, "to_tokens expects C×H×W");
    const int c = X.dim(0), plane = X.dim(1) * X.dim(2);
    Tensor out({plane, c});
    as_mat(out, plane, c) = as_mat(X, c, plane).transpose();
    return push(std::move(out), any_needs({x}), [x, c, plane](Graph& g, const Tensor& dy) {
        as_mat(g.grad_buffer(x), c, plane) += as_mat(dy, plane, c).transpose();
    });
}

}  // namespace udalm
