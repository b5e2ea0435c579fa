#include "tecswin/tensor.hpp"

#include <algorithm>
#include <cblas.h>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace tecswin {

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

NodePtr make_node(Shape shape, std::vector<float> value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return n;
}

bool any_grad(const std::vector<Tensor>& ts) {
    for (const auto& t : ts)
        if (t.defined() && t.requires_grad()) return true;
    return false;
}

thread_local int no_grad_depth = 0;

// Attach parents + backward closure; result requires grad iff a parent does.
Tensor make_op(Shape shape, std::vector<float> value, std::vector<Tensor> parents,
               std::function<void(Node&)> backward_fn) {
    bool grad = no_grad_depth == 0 && any_grad(parents);
    auto n = make_node(std::move(shape), std::move(value), grad);
    if (n->requires_grad) {
        for (const auto& p : parents)
            if (p.defined()) n->parents.push_back(p.node());
        n->backward_fn = std::move(backward_fn);
    }
    return Tensor(n);
}

std::vector<int64_t> row_major_strides(const Shape& s) {
    std::vector<int64_t> st(s.size());
    int64_t acc = 1;
    for (int i = static_cast<int>(s.size()) - 1; i >= 0; --i) {
        st[i] = acc;
        acc *= s[i];
    }
    return st;
}

// Right-aligned broadcast result shape.
Shape broadcast_shape(const Shape& a, const Shape& b) {
    size_t r = std::max(a.size(), b.size());
    Shape out(r);
    for (size_t i = 0; i < r; ++i) {
        int64_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
        int64_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
        if (da != db && da != 1 && db != 1)
            throw ShapeError("broadcast mismatch: " + shape_str(a) + " vs " + shape_str(b));
        out[i] = std::max(da, db);
    }
    return out;
}

// Strides of `in` viewed through the broadcast output shape (0 where broadcast).
std::vector<int64_t> broadcast_strides(const Shape& in, const Shape& out) {
    auto st = row_major_strides(in);
    std::vector<int64_t> res(out.size(), 0);
    size_t off = out.size() - in.size();
    for (size_t i = 0; i < in.size(); ++i)
        res[off + i] = (in[i] == 1 && out[off + i] != 1) ? 0 : st[i];
    return res;
}

// Iterate output indices, yielding (out_lin, a_lin, b_lin).
template <typename F>
void broadcast_iter(const Shape& out, const std::vector<int64_t>& sa,
                    const std::vector<int64_t>& sb, F&& f) {
    int64_t n = shape_numel(out);
    size_t r = out.size();
    std::vector<int64_t> idx(r, 0);
    int64_t ia = 0, ib = 0;
    for (int64_t lin = 0; lin < n; ++lin) {
        f(lin, ia, ib);
        for (int d = static_cast<int>(r) - 1; d >= 0; --d) {
            ++idx[d];
            ia += sa[d];
            ib += sb[d];
            if (idx[d] < out[d]) break;
            idx[d] = 0;
            ia -= sa[d] * out[d];
            ib -= sb[d] * out[d];
        }
    }
}

// Accumulate grad of a broadcast operand: sum `g` (shaped `out`) into parent grad.
void reduce_into(Node& parent, const std::vector<float>& g, const Shape& out) {
    parent.ensure_grad();
    auto sp = broadcast_strides(parent.shape, out);
    std::vector<int64_t> zero(out.size(), 0);
    broadcast_iter(out, sp, zero,
                   [&](int64_t lin, int64_t ip, int64_t) { parent.grad[ip] += g[lin]; });
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

void binary_check(const Tensor& a, const Tensor& b) {
    if (!a.defined() || !b.defined()) throw ShapeError("undefined tensor operand");
}

int normalize_axis(int axis, int rank) {
    if (axis < 0) axis += rank;
    if (axis < 0 || axis >= rank) throw ShapeError("axis out of range");
    return axis;
}

// Generic permutation op: out[i] = in[index[i]]. Backward scatters.
Tensor gather_op(const Tensor& x, Shape out_shape, std::shared_ptr<std::vector<int64_t>> index) {
    const auto& xv = x.data();
    std::vector<float> out(index->size());
    for (size_t i = 0; i < index->size(); ++i) out[i] = xv[(*index)[i]];
    return make_op(std::move(out_shape), std::move(out), {x}, [index](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        for (size_t i = 0; i < index->size(); ++i) p.grad[(*index)[i]] += n.grad[i];
    });
}

}  // namespace

// ------------------------------ Tensor -------------------------------------

Tensor Tensor::from_data(Shape shape, std::vector<float> data, bool requires_grad) {
    if (shape_numel(shape) != static_cast<int64_t>(data.size()))
        throw ShapeError("data size does not match shape " + shape_str(shape));
    return Tensor(make_node(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    std::vector<float> d(shape_numel(shape), 0.0f);
    return Tensor(make_node(std::move(shape), std::move(d), requires_grad));
}

Tensor Tensor::full(Shape shape, float v, bool requires_grad) {
    std::vector<float> d(shape_numel(shape), v);
    return Tensor(make_node(std::move(shape), std::move(d), requires_grad));
}

Tensor Tensor::scalar(float v, bool requires_grad) { return full({}, v, requires_grad); }

Tensor Tensor::randn(Shape shape, Rng& rng, float stddev, bool requires_grad) {
    std::vector<float> d(shape_numel(shape));
    for (auto& v : d) v = static_cast<float>(rng.normal()) * stddev;
    return Tensor(make_node(std::move(shape), std::move(d), requires_grad));
}

int64_t Tensor::dim(int i) const {
    if (i < 0) i += rank();
    if (i < 0 || i >= rank()) throw ShapeError("dim index out of range");
    return n_->shape[i];
}

float Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() on non-scalar tensor");
    return n_->value[0];
}

const std::vector<float>& Tensor::grad() const {
    if (n_->grad.size() != n_->value.size())
        throw std::runtime_error("grad not populated; run backward() first");
    return n_->grad;
}

// --------------------------- elementwise ------------------------------------

namespace {

template <typename FwdF, typename BwdF>
Tensor binary_broadcast(const Tensor& a, const Tensor& b, FwdF fwd, BwdF bwd) {
    binary_check(a, b);
    Shape out_shape = broadcast_shape(a.shape(), b.shape());
    auto sa = broadcast_strides(a.shape(), out_shape);
    auto sb = broadcast_strides(b.shape(), out_shape);
    const auto& av = a.data();
    const auto& bv = b.data();
    std::vector<float> out(shape_numel(out_shape));
    if (same_shape(a.shape(), b.shape())) {
        for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
    } else {
        broadcast_iter(out_shape, sa, sb,
                       [&](int64_t lin, int64_t ia, int64_t ib) { out[lin] = fwd(av[ia], bv[ib]); });
    }
    Shape os = out_shape;
    return make_op(std::move(out_shape), std::move(out), {a, b}, [os, bwd](Node& n) {
        bwd(n, os);
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_broadcast(
        a, b, [](float x, float y) { return x + y; },
        [](Node& n, const Shape& os) {
            reduce_into(*n.parents[0], n.grad, os);
            reduce_into(*n.parents[1], n.grad, os);
        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_broadcast(
        a, b, [](float x, float y) { return x - y; },
        [](Node& n, const Shape& os) {
            reduce_into(*n.parents[0], n.grad, os);
            std::vector<float> neg(n.grad.size());
            for (size_t i = 0; i < neg.size(); ++i) neg[i] = -n.grad[i];
            reduce_into(*n.parents[1], neg, os);
        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    binary_check(a, b);
    Shape out_shape = broadcast_shape(a.shape(), b.shape());
    auto sa = broadcast_strides(a.shape(), out_shape);
    auto sb = broadcast_strides(b.shape(), out_shape);
    const auto& av = a.data();
    const auto& bv = b.data();
    std::vector<float> out(shape_numel(out_shape));
    broadcast_iter(out_shape, sa, sb,
                   [&](int64_t lin, int64_t ia, int64_t ib) { out[lin] = av[ia] * bv[ib]; });
    Shape os = out_shape;
    return make_op(std::move(out_shape), std::move(out), {a, b}, [os, sa, sb](Node& n) {
        Node& pa = *n.parents[0];
        Node& pb = *n.parents[1];
        pa.ensure_grad();
        pb.ensure_grad();
        broadcast_iter(os, sa, sb, [&](int64_t lin, int64_t ia, int64_t ib) {
            pa.grad[ia] += n.grad[lin] * pb.value[ib];
            pb.grad[ib] += n.grad[lin] * pa.value[ia];
        });
    });
}

Tensor add_scalar(const Tensor& a, float c) {
    std::vector<float> out(a.data());
    for (auto& v : out) v += c;
    return make_op(a.shape(), std::move(out), {a}, [](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i];
    });
}

Tensor mul_scalar(const Tensor& a, float c) {
    std::vector<float> out(a.data());
    for (auto& v : out) v *= c;
    return make_op(a.shape(), std::move(out), {a}, [c](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += c * n.grad[i];
    });
}

Tensor broadcast_to(const Tensor& a, const Shape& shape) {
    Shape out_shape = broadcast_shape(a.shape(), shape);
    if (out_shape != shape)
        throw ShapeError("cannot broadcast " + shape_str(a.shape()) + " to " + shape_str(shape));
    auto sa = broadcast_strides(a.shape(), out_shape);
    std::vector<int64_t> zero(out_shape.size(), 0);
    const auto& av = a.data();
    std::vector<float> out(shape_numel(out_shape));
    broadcast_iter(out_shape, sa, zero,
                   [&](int64_t lin, int64_t ia, int64_t) { out[lin] = av[ia]; });
    Shape os = out_shape;
    return make_op(std::move(out_shape), std::move(out), {a},
                   [os](Node& n) { reduce_into(*n.parents[0], n.grad, os); });
}

// ----------------------------- matmul ---------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b) {
    binary_check(a, b);
    if (a.rank() < 2 || b.rank() < 2) throw ShapeError("matmul needs rank >= 2");
    int64_t m = a.dim(-2), k = a.dim(-1);
    int64_t bk = transpose_b ? b.dim(-1) : b.dim(-2);
    int64_t n = transpose_b ? b.dim(-2) : b.dim(-1);
    if (k != bk)
        throw ShapeError("matmul inner dim mismatch: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));

    Shape ab(a.shape().begin(), a.shape().end() - 2);
    Shape bb(b.shape().begin(), b.shape().end() - 2);
    Shape batch = broadcast_shape(ab, bb);
    int64_t nbatch = shape_numel(batch);

    // map output batch index -> operand batch offsets (in units of one matrix)
    auto sa = broadcast_strides(ab, batch);
    auto sb = broadcast_strides(bb, batch);
    std::vector<int64_t> offa(nbatch), offb(nbatch);
    {
        std::vector<int64_t> zero(batch.size(), 0);
        int64_t i = 0;
        broadcast_iter(batch, sa, sb, [&](int64_t, int64_t ia, int64_t ib) {
            offa[i] = ia;
            offb[i] = ib;
            ++i;
        });
    }

    Shape out_shape = batch;
    out_shape.push_back(m);
    out_shape.push_back(n);
    std::vector<float> out(nbatch * m * n);
    const float* pa = a.data().data();
    const float* pb = b.data().data();
    for (int64_t i = 0; i < nbatch; ++i) {
        cblas_sgemm(CblasRowMajor, CblasNoTrans, transpose_b ? CblasTrans : CblasNoTrans,
                    static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), 1.0f,
                    pa + offa[i] * m * k, static_cast<int>(k), pb + offb[i] * (transpose_b ? n * k : k * n),
                    static_cast<int>(transpose_b ? k : n), 0.0f, out.data() + i * m * n,
                    static_cast<int>(n));
    }

    return make_op(std::move(out_shape), std::move(out), {a, b},
                   [m, n, k, nbatch, offa, offb, transpose_b](Node& nd) {
                       Node& na = *nd.parents[0];
                       Node& nb = *nd.parents[1];
                       na.ensure_grad();
                       nb.ensure_grad();
                       const float* g = nd.grad.data();
                       const float* pa = na.value.data();
                       const float* pb = nb.value.data();
                       for (int64_t i = 0; i < nbatch; ++i) {
                           const float* gi = g + i * m * n;
                           // dA += dC * B^T  (or dC * B when b was transposed)
                           cblas_sgemm(CblasRowMajor, CblasNoTrans,
                                       transpose_b ? CblasNoTrans : CblasTrans,
                                       static_cast<int>(m), static_cast<int>(k),
                                       static_cast<int>(n), 1.0f, gi, static_cast<int>(n),
                                       pb + offb[i] * n * k,
                                       static_cast<int>(transpose_b ? k : n), 1.0f,
                                       na.grad.data() + offa[i] * m * k, static_cast<int>(k));
                           if (transpose_b) {
                               // B layout [n,k]: dB += dC^T * A
                               cblas_sgemm(CblasRowMajor, CblasTrans, CblasNoTrans,
                                           static_cast<int>(n), static_cast<int>(k),
                                           static_cast<int>(m), 1.0f, gi, static_cast<int>(n),
                                           pa + offa[i] * m * k, static_cast<int>(k), 1.0f,
                                           nb.grad.data() + offb[i] * n * k, static_cast<int>(k));
                           } else {
                               // dB += A^T * dC
                               cblas_sgemm(CblasRowMajor, CblasTrans, CblasNoTrans,
                                           static_cast<int>(k), static_cast<int>(n),
                                           static_cast<int>(m), 1.0f,
                                           pa + offa[i] * m * k, static_cast<int>(k), gi,
                                           static_cast<int>(n), 1.0f,
                                           nb.grad.data() + offb[i] * k * n, static_cast<int>(n));
                           }
                       }
                   });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.dim(-1) != w.dim(0))
        throw ShapeError("linear: input dim " + std::to_string(x.dim(-1)) + " vs weight " +
                         shape_str(w.shape()));
    Shape xs = x.shape();
    int64_t in = xs.back();
    int64_t rows = x.numel() / in;
    Tensor flat = reshape(x, {rows, in});
    Tensor y = matmul(flat, w);
    if (b.defined()) y = add(y, b);
    Shape out = xs;
    out.back() = w.dim(1);
    return reshape(y, out);
}

// --------------------------- activations ------------------------------------

namespace {
inline float gelu_f(float x) { return 0.5f * x * (1.0f + std::erf(x * 0.70710678f)); }
inline float gelu_df(float x) {
    float cdf = 0.5f * (1.0f + std::erf(x * 0.70710678f));
    float pdf = 0.3989422804f * std::exp(-0.5f * x * x);
    return cdf + x * pdf;
}
inline float sigmoid_f(float x) { return 1.0f / (1.0f + std::exp(-x)); }
}  // namespace

Tensor gelu(const Tensor& x) {
    std::vector<float> out(x.numel());
    const auto& xv = x.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = gelu_f(xv[i]);
    return make_op(x.shape(), std::move(out), {x}, [](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i] * gelu_df(p.value[i]);
    });
}

Tensor silu(const Tensor& x) {
    std::vector<float> out(x.numel());
    const auto& xv = x.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * sigmoid_f(xv[i]);
    return make_op(x.shape(), std::move(out), {x}, [](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) {
            float s = sigmoid_f(p.value[i]);
            p.grad[i] += n.grad[i] * (s + p.value[i] * s * (1.0f - s));
        }
    });
}

Tensor activation(const Tensor& x, Activation kind) {
    return kind == Activation::Gelu ? gelu(x) : silu(x);
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
    if (eps <= 0.0f) throw std::invalid_argument("layer_norm: eps must be > 0");
    int64_t C = x.dim(-1);
    if (gamma.numel() != C || beta.numel() != C)
        throw ShapeError("layer_norm: gamma/beta size mismatch with C=" + std::to_string(C));
    int64_t rows = x.numel() / C;
    const auto& xv = x.data();
    const auto& gv = gamma.data();
    const auto& bv = beta.data();
    std::vector<float> out(x.numel());
    auto stats = std::make_shared<std::vector<float>>(2 * rows);  // mean, rstd per row
    for (int64_t r = 0; r < rows; ++r) {
        const float* row = xv.data() + r * C;
        float mean = 0.0f;
        for (int64_t c = 0; c < C; ++c) mean += row[c];
        mean /= C;
        float var = 0.0f;
        for (int64_t c = 0; c < C; ++c) {
            float d = row[c] - mean;
            var += d * d;
        }
        var /= C;
        float rstd = 1.0f / std::sqrt(var + eps);
        (*stats)[2 * r] = mean;
        (*stats)[2 * r + 1] = rstd;
        float* orow = out.data() + r * C;
        for (int64_t c = 0; c < C; ++c) orow[c] = (row[c] - mean) * rstd * gv[c] + bv[c];
    }
    return make_op(x.shape(), std::move(out), {x, gamma, beta}, [rows, C, stats](Node& n) {
        Node& px = *n.parents[0];
        Node& pg = *n.parents[1];
        Node& pb = *n.parents[2];
        px.ensure_grad();
        pg.ensure_grad();
        pb.ensure_grad();
        for (int64_t r = 0; r < rows; ++r) {
            const float* row = px.value.data() + r * C;
            const float* g = n.grad.data() + r * C;
            float mean = (*stats)[2 * r];
            float rstd = (*stats)[2 * r + 1];
            float sum_gy = 0.0f, sum_gyx = 0.0f;
            for (int64_t c = 0; c < C; ++c) {
                float xhat = (row[c] - mean) * rstd;
                float gy = g[c] * pg.value[c];
                sum_gy += gy;
                sum_gyx += gy * xhat;
                pg.grad[c] += g[c] * xhat;
                pb.grad[c] += g[c];
            }
            for (int64_t c = 0; c < C; ++c) {
                float xhat = (row[c] - mean) * rstd;
                float gy = g[c] * pg.value[c];
                px.grad[r * C + c] +=
                    rstd * (gy - sum_gy / C - xhat * sum_gyx / C);
            }
        }
    });
}

Tensor softmax(const Tensor& x, int axis) {
    axis = normalize_axis(axis, x.rank());
    int64_t L = x.dim(axis);
    int64_t inner = 1;
    for (int i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
    int64_t outer = x.numel() / (L * inner);
    const auto& xv = x.data();
    std::vector<float> out(x.numel());
    for (int64_t o = 0; o < outer; ++o) {
        for (int64_t in = 0; in < inner; ++in) {
            int64_t base = o * L * inner + in;
            float mx = -INFINITY;
            for (int64_t l = 0; l < L; ++l) mx = std::max(mx, xv[base + l * inner]);
            float sum = 0.0f;
            for (int64_t l = 0; l < L; ++l) {
                float e = std::exp(xv[base + l * inner] - mx);
                out[base + l * inner] = e;
                sum += e;
            }
            float inv = 1.0f / sum;
            for (int64_t l = 0; l < L; ++l) out[base + l * inner] *= inv;
        }
    }
    return make_op(x.shape(), std::move(out), {x}, [L, inner, outer](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        for (int64_t o = 0; o < outer; ++o) {
            for (int64_t in = 0; in < inner; ++in) {
                int64_t base = o * L * inner + in;
                float dot = 0.0f;
                for (int64_t l = 0; l < L; ++l)
                    dot += n.grad[base + l * inner] * n.value[base + l * inner];
                for (int64_t l = 0; l < L; ++l) {
                    int64_t i = base + l * inner;
                    p.grad[i] += n.value[i] * (n.grad[i] - dot);
                }
            }
        }
    });
}

// --------------------------- structural -------------------------------------

Tensor reshape(const Tensor& x, Shape shape) {
    int64_t n = 1;
    int infer = -1;
    for (size_t i = 0; i < shape.size(); ++i) {
        if (shape[i] == -1) {
            if (infer >= 0) throw ShapeError("reshape: more than one -1");
            infer = static_cast<int>(i);
        } else {
            n *= shape[i];
        }
    }
    if (infer >= 0) shape[infer] = x.numel() / n;
    if (shape_numel(shape) != x.numel())
        throw ShapeError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
    return make_op(std::move(shape), x.data(), {x}, [](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i];
    });
}

Tensor permute(const Tensor& x, const std::vector<int>& order) {
    int r = x.rank();
    if (static_cast<int>(order.size()) != r) throw ShapeError("permute order rank mismatch");
    Shape out_shape(r);
    for (int i = 0; i < r; ++i) out_shape[i] = x.dim(order[i]);
    auto in_strides = row_major_strides(x.shape());
    auto index = std::make_shared<std::vector<int64_t>>(x.numel());
    std::vector<int64_t> idx(r, 0);
    for (int64_t lin = 0; lin < x.numel(); ++lin) {
        int64_t src = 0;
        for (int i = 0; i < r; ++i) src += idx[i] * in_strides[order[i]];
        (*index)[lin] = src;
        for (int d = r - 1; d >= 0; --d) {
            if (++idx[d] < out_shape[d]) break;
            idx[d] = 0;
        }
    }
    return gather_op(x, std::move(out_shape), index);
}

Tensor concat(const std::vector<Tensor>& xs, int axis) {
    if (xs.empty()) throw ShapeError("concat: empty input list");
    axis = normalize_axis(axis, xs[0].rank());
    Shape out_shape = xs[0].shape();
    int64_t total = 0;
    for (const auto& t : xs) {
        for (int i = 0; i < t.rank(); ++i)
            if (i != axis && t.dim(i) != out_shape[i])
                throw ShapeError("concat: shape mismatch on non-concat axis");
        total += t.dim(axis);
    }
    out_shape[axis] = total;
    int64_t inner = 1;
    for (int i = axis + 1; i < static_cast<int>(out_shape.size()); ++i) inner *= out_shape[i];
    int64_t outer = shape_numel(out_shape) / (total * inner);

    std::vector<float> out(shape_numel(out_shape));
    std::vector<int64_t> offsets;
    int64_t off = 0;
    for (const auto& t : xs) {
        offsets.push_back(off);
        int64_t len = t.dim(axis) * inner;
        const auto& tv = t.data();
        for (int64_t o = 0; o < outer; ++o)
            std::memcpy(out.data() + o * total * inner + off, tv.data() + o * len,
                        len * sizeof(float));
        off += len;
    }
    return make_op(std::move(out_shape), std::move(out), xs,
                   [offsets, total, inner, outer](Node& n) {
                       for (size_t pi = 0; pi < n.parents.size(); ++pi) {
                           Node& p = *n.parents[pi];
                           p.ensure_grad();
                           int64_t len = static_cast<int64_t>(p.value.size()) / outer;
                           for (int64_t o = 0; o < outer; ++o) {
                               const float* src = n.grad.data() + o * total * inner + offsets[pi];
                               float* dst = p.grad.data() + o * len;
                               for (int64_t i = 0; i < len; ++i) dst[i] += src[i];
                           }
                       }
                   });
}

Tensor slice(const Tensor& x, int axis, int64_t start, int64_t end) {
    axis = normalize_axis(axis, x.rank());
    if (start < 0 || end > x.dim(axis) || start >= end) throw ShapeError("slice range invalid");
    Shape out_shape = x.shape();
    out_shape[axis] = end - start;
    int64_t inner = 1;
    for (int i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
    int64_t L = x.dim(axis);
    int64_t outer = x.numel() / (L * inner);
    int64_t len = (end - start) * inner;
    std::vector<float> out(shape_numel(out_shape));
    const auto& xv = x.data();
    for (int64_t o = 0; o < outer; ++o)
        std::memcpy(out.data() + o * len, xv.data() + o * L * inner + start * inner,
                    len * sizeof(float));
    return make_op(std::move(out_shape), std::move(out), {x},
                   [start, inner, L, outer, len](Node& n) {
                       Node& p = *n.parents[0];
                       p.ensure_grad();
                       for (int64_t o = 0; o < outer; ++o) {
                           const float* src = n.grad.data() + o * len;
                           float* dst = p.grad.data() + o * L * inner + start * inner;
                           for (int64_t i = 0; i < len; ++i) dst[i] += src[i];
                       }
                   });
}

Tensor gather_rows(const Tensor& table, const std::vector<int64_t>& idx) {
    if (table.rank() != 2) throw ShapeError("gather_rows: expected [R,C] table");
    int64_t R = table.dim(0), C = table.dim(1);
    auto index = std::make_shared<std::vector<int64_t>>(idx.size() * C);
    for (size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= R) throw ShapeError("gather_rows: index out of range");
        for (int64_t c = 0; c < C; ++c) (*index)[i * C + c] = idx[i] * C + c;
    }
    return gather_op(table, {static_cast<int64_t>(idx.size()), C}, index);
}

Tensor conv_1x1(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.rank() != 4) throw ShapeError("conv_1x1: expected [B,H,W,C] input");
    if (x.dim(3) != w.dim(0)) throw ShapeError("conv_1x1: channel mismatch");
    return linear(x, w, b);
}

Tensor pixel_shuffle(const Tensor& x) {
    if (x.rank() != 4) throw ShapeError("pixel_shuffle: expected [B,H,W,4C]");
    int64_t B = x.dim(0), H = x.dim(1), W = x.dim(2), C4 = x.dim(3);
    if (C4 % 4 != 0) throw ShapeError("pixel_shuffle: channels not divisible by 4");
    int64_t C = C4 / 4;
    // channel group g in 0..3 maps to spatial offset (g/2, g%2), row-major
    auto index = std::make_shared<std::vector<int64_t>>(x.numel());
    int64_t i = 0;
    for (int64_t b = 0; b < B; ++b)
        for (int64_t h = 0; h < 2 * H; ++h)
            for (int64_t w = 0; w < 2 * W; ++w)
                for (int64_t c = 0; c < C; ++c) {
                    int64_t g = (h % 2) * 2 + (w % 2);
                    (*index)[i++] = ((b * H + h / 2) * W + w / 2) * C4 + g * C + c;
                }
    return gather_op(x, {B, 2 * H, 2 * W, C}, index);
}

Tensor pixel_unshuffle(const Tensor& x) {
    if (x.rank() != 4) throw ShapeError("pixel_unshuffle: expected [B,2H,2W,C]");
    int64_t B = x.dim(0), H2 = x.dim(1), W2 = x.dim(2), C = x.dim(3);
    if (H2 % 2 != 0 || W2 % 2 != 0) throw ShapeError("pixel_unshuffle: odd spatial dims");
    int64_t H = H2 / 2, W = W2 / 2;
    auto index = std::make_shared<std::vector<int64_t>>(x.numel());
    int64_t i = 0;
    for (int64_t b = 0; b < B; ++b)
        for (int64_t h = 0; h < H; ++h)
            for (int64_t w = 0; w < W; ++w)
                for (int64_t g = 0; g < 4; ++g)
                    for (int64_t c = 0; c < C; ++c) {
                        int64_t sh = 2 * h + g / 2, sw = 2 * w + g % 2;
                        (*index)[i++] = ((b * H2 + sh) * W2 + sw) * C + c;
                    }
    return gather_op(x, {B, H, W, 4 * C}, index);
}

Tensor window_partition(const Tensor& x, int win) {
    if (x.rank() != 4) throw ShapeError("window_partition: expected [B,H,W,C]");
    int64_t B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
    if (H % win != 0 || W % win != 0)
        throw ShapeError("window_partition: H,W not divisible by window " + std::to_string(win));
    int64_t nh = H / win, nw = W / win;
    auto index = std::make_shared<std::vector<int64_t>>(x.numel());
    int64_t i = 0;
    for (int64_t b = 0; b < B; ++b)
        for (int64_t wh = 0; wh < nh; ++wh)
            for (int64_t ww = 0; ww < nw; ++ww)
                for (int64_t y = 0; y < win; ++y)
                    for (int64_t xx = 0; xx < win; ++xx)
                        for (int64_t c = 0; c < C; ++c)
                            (*index)[i++] =
                                ((b * H + wh * win + y) * W + ww * win + xx) * C + c;
    return gather_op(x, {B * nh * nw, static_cast<int64_t>(win) * win, C}, index);
}

Tensor window_reverse(const Tensor& windows, int win, int64_t B, int64_t H, int64_t W) {
    if (windows.rank() != 3) throw ShapeError("window_reverse: expected [N,win*win,C]");
    int64_t C = windows.dim(2);
    int64_t nh = H / win, nw = W / win;
    if (windows.dim(0) != B * nh * nw || windows.dim(1) != static_cast<int64_t>(win) * win)
        throw ShapeError("window_reverse: window count/shape mismatch");
    auto index = std::make_shared<std::vector<int64_t>>(windows.numel());
    int64_t i = 0;
    for (int64_t b = 0; b < B; ++b)
        for (int64_t h = 0; h < H; ++h)
            for (int64_t w = 0; w < W; ++w)
                for (int64_t c = 0; c < C; ++c) {
                    int64_t wh = h / win, ww = w / win;
                    int64_t widx = (b * nh + wh) * nw + ww;
                    int64_t pos = (h % win) * win + (w % win);
                    (*index)[i++] = (widx * win * win + pos) * C + c;
                }
    return gather_op(windows, {B, H, W, C}, index);
}

Tensor cyclic_shift(const Tensor& x, int dy, int dx) {
    if (x.rank() != 4) throw ShapeError("cyclic_shift: expected [B,H,W,C]");
    int64_t B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
    auto mod = [](int64_t a, int64_t m) { return ((a % m) + m) % m; };
    auto index = std::make_shared<std::vector<int64_t>>(x.numel());
    int64_t i = 0;
    for (int64_t b = 0; b < B; ++b)
        for (int64_t h = 0; h < H; ++h)
            for (int64_t w = 0; w < W; ++w)
                for (int64_t c = 0; c < C; ++c)
                    (*index)[i++] = ((b * H + mod(h - dy, H)) * W + mod(w - dx, W)) * C + c;
    return gather_op(x, x.shape(), index);
}

// --------------------------- reductions -------------------------------------

Tensor sum_all(const Tensor& x) {
    double s = 0.0;
    for (float v : x.data()) s += v;
    return make_op({}, {static_cast<float>(s)}, {x}, [](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        for (auto& g : p.grad) g += n.grad[0];
    });
}

Tensor mean_all(const Tensor& x) {
    double s = 0.0;
    for (float v : x.data()) s += v;
    float inv = 1.0f / static_cast<float>(x.numel());
    return make_op({}, {static_cast<float>(s) * inv}, {x}, [inv](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        for (auto& g : p.grad) g += n.grad[0] * inv;
    });
}

Tensor mean_axis(const Tensor& x, int axis) {
    axis = normalize_axis(axis, x.rank());
    int64_t L = x.dim(axis);
    int64_t inner = 1;
    for (int i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
    int64_t outer = x.numel() / (L * inner);
    Shape out_shape;
    for (int i = 0; i < x.rank(); ++i)
        if (i != axis) out_shape.push_back(x.dim(i));
    std::vector<float> out(outer * inner, 0.0f);
    const auto& xv = x.data();
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t l = 0; l < L; ++l)
            for (int64_t in = 0; in < inner; ++in)
                out[o * inner + in] += xv[(o * L + l) * inner + in];
    float inv = 1.0f / static_cast<float>(L);
    for (auto& v : out) v *= inv;
    return make_op(std::move(out_shape), std::move(out), {x}, [L, inner, outer, inv](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        for (int64_t o = 0; o < outer; ++o)
            for (int64_t l = 0; l < L; ++l)
                for (int64_t in = 0; in < inner; ++in)
                    p.grad[(o * L + l) * inner + in] += n.grad[o * inner + in] * inv;
    });
}

Tensor mse(const Tensor& a, const Tensor& b) {
    Tensor d = sub(a, b);
    return mean_all(mul(d, d));
}

// ---------------------------- backward --------------------------------------

void backward(const Tensor& loss) {
    if (loss.numel() != 1) throw ShapeError("backward: loss must be scalar");
    if (!std::isfinite(loss.item())) throw std::runtime_error("backward: loss is not finite");

    // iterative topo sort (graphs get deep)
    std::vector<Node*> topo;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, ci] = stack.back();
        if (ci < node->parents.size()) {
            Node* p = node->parents[ci++].get();
            if (p->backward_fn && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            topo.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->ensure_grad();
    loss.node()->grad[0] = 1.0f;
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && n->grad.size() == n->value.size()) n->backward_fn(*n);
    }
}

NoGradGuard::NoGradGuard() { ++no_grad_depth; }
NoGradGuard::~NoGradGuard() { --no_grad_depth; }

}  // namespace tecswin
