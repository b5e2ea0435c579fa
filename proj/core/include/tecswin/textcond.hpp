#pragma once

#include <string>
#include <vector>

#include "tecswin/attention.hpp"
#include "tecswin/params.hpp"
#include "tecswin/tensor.hpp"

namespace tecswin {

// Per-layer token embeddings plus a pooled vector, the shape any encoder
// plug-in must produce. The default provider is the deterministic stub below.
struct EncoderOutput {
    std::vector<Tensor> layer_outputs;  // L tensors [Ltok, D_enc]
    Tensor pooled;                      // [D_enc]
};

// Deterministic stand-in for a real multilingual text encoder: hashed byte /
// whitespace tokenization, seeded embeddings, and fixed seeded linear maps as
// the higher layers.
struct StubEncoderSpec {
    uint64_t seed = 0x7ec5;
    int d_enc = 64;
    int layers = 4;
    int seq_len = 16;
};

// Encoder plug-in boundary: UTF-8 text in, EncoderOutput out.
class TextEncoder {
public:
    virtual ~TextEncoder() = default;
    virtual EncoderOutput encode(const std::string& prompt) const = 0;
    virtual int d_enc() const = 0;
    virtual int seq_len() const = 0;
};

class StubEncoder : public TextEncoder {
public:
    explicit StubEncoder(StubEncoderSpec spec) : spec_(spec) {}
    EncoderOutput encode(const std::string& prompt) const override;
    int d_enc() const override { return spec_.d_enc; }
    int seq_len() const override { return spec_.seq_len; }

private:
    StubEncoderSpec spec_;
};

// arithmetic mean over the selected encoder layers -> [Ltok, D_enc]
Tensor average_layers(const EncoderOutput& out, const std::vector<int>& indices);

// raw sinusoidal embedding of a timestep; dim must be even
Tensor sinusoidal_time_embedding(int64_t t, int dim);

// Projects averaged text embeddings into context tokens, appends two
// time-derived tokens, and maintains the learned null embedding used for
// masked (unconditional) samples.
class ContextAssembler {
public:
    ContextAssembler(Params& p, const std::string& prefix, int ltok, int d_enc, int n_ctx,
                     int d);

    // text_emb: [Ltok, D_enc]; one sample
    ContextBundle assemble(const Tensor& text_emb, int64_t t, bool masked) const;

    // batched convenience: stacks per-sample bundles
    ContextBundle assemble_batch(const std::vector<Tensor>& text_embs,
                                 const std::vector<int64_t>& ts,
                                 const std::vector<bool>& masked) const;

    int context_len() const { return n_ctx_ + 2; }
    int width() const { return d_; }

private:
    Tensor time_mlp(const Tensor& t_raw) const;

    int ltok_, d_enc_, n_ctx_, d_;
    Tensor token_proj_;            // [n_ctx, ltok]
    Tensor chan_w_, chan_b_;       // [d_enc, d]
    Tensor time_w1_, time_b1_, time_w2_, time_b2_;
    Tensor null_tokens_;           // [n_ctx, d]
    Tensor null_pooled_;           // [d]
};

}  // namespace tecswin
