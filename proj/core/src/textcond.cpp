#include "tecswin/textcond.hpp"

#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace tecswin {

namespace {

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

uint64_t mix64(uint64_t a, uint64_t b) {
    uint64_t z = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::vector<uint64_t> tokenize(const std::string& prompt, int seq_len) {
    std::istringstream is(prompt);
    std::vector<uint64_t> ids;
    std::string tok;
    while (is >> tok && static_cast<int>(ids.size()) < seq_len) ids.push_back(fnv1a(tok) | 1);
    while (static_cast<int>(ids.size()) < seq_len) ids.push_back(0);  // pad
    return ids;
}

}  // namespace

EncoderOutput StubEncoder::encode(const std::string& prompt) const {
    std::string trimmed;
    for (char c : prompt)
        if (!std::isspace(static_cast<unsigned char>(c)) || !trimmed.empty()) trimmed += c;
    while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.back())))
        trimmed.pop_back();
    if (trimmed.empty()) throw std::invalid_argument("encode: empty prompt");

    auto ids = tokenize(trimmed, spec_.seq_len);
    int64_t L = spec_.seq_len, D = spec_.d_enc;

    std::vector<float> layer0(L * D);
    for (int64_t i = 0; i < L; ++i) {
        Rng r(mix64(spec_.seed, ids[i]));
        for (int64_t j = 0; j < D; ++j) layer0[i * D + j] = static_cast<float>(r.normal());
    }
    EncoderOutput out;
    out.layer_outputs.push_back(Tensor::from_data({L, D}, layer0));

    float scale = 1.0f / std::sqrt(static_cast<float>(D));
    for (int l = 1; l < spec_.layers; ++l) {
        Rng r(mix64(spec_.seed ^ 0xA11ED, static_cast<uint64_t>(l)));
        Tensor w = Tensor::randn({D, D}, r, scale);
        out.layer_outputs.push_back(matmul(out.layer_outputs[0], w));
    }
    out.pooled = mean_axis(out.layer_outputs.back(), 0);
    return out;
}

Tensor average_layers(const EncoderOutput& out, const std::vector<int>& indices) {
    if (indices.empty()) throw std::invalid_argument("average_layers: no indices");
    int L = static_cast<int>(out.layer_outputs.size());
    Tensor acc;
    for (int idx : indices) {
        if (idx < 0 || idx >= L)
            throw std::out_of_range("average_layers: layer index " + std::to_string(idx));
        acc = acc.defined() ? add(acc, out.layer_outputs[idx]) : out.layer_outputs[idx];
    }
    return mul_scalar(acc, 1.0f / static_cast<float>(indices.size()));
}

Tensor sinusoidal_time_embedding(int64_t t, int dim) {
    if (t < 0) throw std::invalid_argument("time_embedding: negative timestep");
    if (dim % 2 != 0) throw std::invalid_argument("time_embedding: dim must be even");
    int half = dim / 2;
    std::vector<float> e(dim);
    for (int i = 0; i < half; ++i) {
        double freq = std::exp(-std::log(10000.0) * i / half);
        e[i] = static_cast<float>(std::sin(t * freq));
        e[half + i] = static_cast<float>(std::cos(t * freq));
    }
    return Tensor::from_data({dim}, std::move(e));
}

ContextAssembler::ContextAssembler(Params& p, const std::string& prefix, int ltok, int d_enc,
                                   int n_ctx, int d)
    : ltok_(ltok), d_enc_(d_enc), n_ctx_(n_ctx), d_(d) {
    token_proj_ = p.randn(prefix + ".token_proj", {n_ctx, ltok},
                          1.0f / std::sqrt(static_cast<float>(ltok)));
    chan_w_ = p.weight(prefix + ".chan.w", d_enc, d);
    chan_b_ = p.zeros(prefix + ".chan.b", {d});
    time_w1_ = p.weight(prefix + ".time.w1", d, d);
    time_b1_ = p.zeros(prefix + ".time.b1", {d});
    time_w2_ = p.weight(prefix + ".time.w2", d, d);
    time_b2_ = p.zeros(prefix + ".time.b2", {d});
    null_tokens_ = p.randn(prefix + ".null_tokens", {n_ctx, d}, 0.02f);
    null_pooled_ = p.randn(prefix + ".null_pooled", {d}, 0.02f);
}

Tensor ContextAssembler::time_mlp(const Tensor& t_raw) const {
    return linear(silu(linear(t_raw, time_w1_, time_b1_)), time_w2_, time_b2_);
}

ContextBundle ContextAssembler::assemble(const Tensor& text_emb, int64_t t, bool masked) const {
    if (text_emb.rank() != 2 || text_emb.dim(0) != ltok_ || text_emb.dim(1) != d_enc_)
        throw ShapeError("assemble_context: expected [" + std::to_string(ltok_) + "," +
                         std::to_string(d_enc_) + "] text embedding");

    Tensor t_emb = time_mlp(reshape(sinusoidal_time_embedding(t, d_), {1, d_}));  // [1, d]

    Tensor text_tokens, pooled;
    if (masked) {
        text_tokens = null_tokens_;
        pooled = reshape(null_pooled_, {1, d_});
    } else {
        // token-axis reduction then channel projection
        text_tokens = linear(matmul(token_proj_, text_emb), chan_w_, chan_b_);  // [n_ctx, d]
        pooled = reshape(mean_axis(text_tokens, 0), {1, d_});
    }

    Tensor cond = add(t_emb, pooled);  // [1, d]
    Tensor tokens = concat({text_tokens, t_emb, cond}, 0);  // two time tokens appended

    ContextBundle b;
    b.tokens = reshape(tokens, {1, n_ctx_ + 2, d_});
    b.pooled = pooled;
    b.cond = cond;
    b.masked = {masked};
    return b;
}

ContextBundle ContextAssembler::assemble_batch(const std::vector<Tensor>& text_embs,
                                               const std::vector<int64_t>& ts,
                                               const std::vector<bool>& masked) const {
    size_t B = ts.size();
    if (text_embs.size() != B || masked.size() != B)
        throw std::invalid_argument("assemble_batch: size mismatch");
    std::vector<Tensor> tokens, pooled, cond;
    ContextBundle out;
    out.masked.resize(B);
    for (size_t i = 0; i < B; ++i) {
        ContextBundle b = assemble(text_embs[i], ts[i], masked[i]);
        tokens.push_back(b.tokens);
        pooled.push_back(b.pooled);
        cond.push_back(b.cond);
        out.masked[i] = masked[i];
    }
    out.tokens = concat(tokens, 0);
    out.pooled = concat(pooled, 0);
    out.cond = concat(cond, 0);
    return out;
}

}  // namespace tecswin
