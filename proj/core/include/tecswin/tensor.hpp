#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "tecswin/rng.hpp"

namespace tecswin {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {
struct Node {
    Shape shape;
    std::vector<float> value;
    std::vector<float> grad;  // sized lazily during backward
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;  // accumulate into parents' grads

    int64_t numel() const { return static_cast<int64_t>(value.size()); }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0f);
    }
};
}  // namespace detail

// Suspends tape construction while alive (inference paths); ops computed
// under the guard come out as constant leaves. Nestable, thread-local.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

// Dense row-major f32 tensor participating in a dynamic gradient tape.
// Values are immutable once an op has consumed the tensor; gradients
// accumulate in-place during backward().
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<detail::Node> n) : n_(std::move(n)) {}

    static Tensor from_data(Shape shape, std::vector<float> data, bool requires_grad = false);
    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, float v, bool requires_grad = false);
    static Tensor scalar(float v, bool requires_grad = false);
    static Tensor randn(Shape shape, Rng& rng, float stddev = 1.0f, bool requires_grad = false);

    bool defined() const { return n_ != nullptr; }
    const Shape& shape() const { return n_->shape; }
    int64_t dim(int i) const;
    int rank() const { return static_cast<int>(n_->shape.size()); }
    int64_t numel() const { return n_->numel(); }

    const std::vector<float>& data() const { return n_->value; }
    std::vector<float>& mutable_data() { return n_->value; }
    float item() const;

    bool requires_grad() const { return n_->requires_grad; }
    const std::vector<float>& grad() const;
    void zero_grad() { n_->grad.assign(n_->value.size(), 0.0f); }

    std::shared_ptr<detail::Node> node() const { return n_; }

private:
    std::shared_ptr<detail::Node> n_;
};

// ----- elementwise / broadcast arithmetic (numpy-style, right-aligned) -----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, float c);
Tensor mul_scalar(const Tensor& a, float c);
Tensor broadcast_to(const Tensor& a, const Shape& shape);

// ----- linear algebra -----
// a: [.., m, k], b: [.., k, n] (or [.., n, k] with transpose_b); batch dims broadcast
Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b = false);
// x: [.., in], w: [in, out], b: [out] (b optional: pass undefined Tensor)
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// ----- activations / normalization -----
Tensor gelu(const Tensor& x);
Tensor silu(const Tensor& x);
enum class Activation { Gelu, Silu };
Tensor activation(const Tensor& x, Activation kind);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps = 1e-5f);
Tensor softmax(const Tensor& x, int axis);

// ----- structural ops -----
Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<int>& order);
Tensor concat(const std::vector<Tensor>& xs, int axis);
Tensor slice(const Tensor& x, int axis, int64_t start, int64_t end);
// table: [R, C] -> [idx.size(), C]; differentiable into table
Tensor gather_rows(const Tensor& table, const std::vector<int64_t>& idx);

// x: [B,H,W,Cin], w: [Cin,Cout], b: [Cout]; per-pixel linear map
Tensor conv_1x1(const Tensor& x, const Tensor& w, const Tensor& b);
// x: [B,H,W,4C] -> [B,2H,2W,C]; channel groups of 4 fill 2x2 spatial blocks row-major
Tensor pixel_shuffle(const Tensor& x);
Tensor pixel_unshuffle(const Tensor& x);
// x: [B,H,W,C] -> [B*(H/win)*(W/win), win*win, C]
Tensor window_partition(const Tensor& x, int win);
Tensor window_reverse(const Tensor& windows, int win, int64_t B, int64_t H, int64_t W);
// toroidal roll of the spatial axes
Tensor cyclic_shift(const Tensor& x, int dy, int dx);

// ----- reductions -----
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
Tensor mean_axis(const Tensor& x, int axis);
Tensor mse(const Tensor& a, const Tensor& b);

// Reverse-mode sweep from a scalar loss; populates grads of every
// requires_grad leaf reachable on the tape. One backward per tape.
void backward(const Tensor& loss);

}  // namespace tecswin
