#include "tecswin/model.hpp"

#include <stdexcept>

namespace tecswin {

TecSwinModel::TecSwinModel(const ModelConfig& cfg, uint64_t init_seed)
    : cfg_(cfg),
      params_(init_seed),
      encoder_(StubEncoderSpec{0x7ec5, cfg.enc_dim, cfg.enc_layers, cfg.seq_len}) {
    cfg_.validate();
    assembler_ = std::make_unique<ContextAssembler>(params_, "ctx", cfg.seq_len, cfg.enc_dim,
                                                    cfg.ctx_tokens, cfg.ctx_dim);
    unet_ = std::make_unique<UNet>(params_, cfg_);
}

Tensor TecSwinModel::encode_prompt(const std::string& prompt) const {
    return average_layers(encoder_.encode(prompt), cfg_.avg_layers);
}

void TecSwinModel::set_prompts(const std::vector<std::string>& prompts) {
    std::vector<Tensor> embs;
    embs.reserve(prompts.size());
    for (const auto& p : prompts) embs.push_back(encode_prompt(p));
    set_text_embeddings(std::move(embs));
}

void TecSwinModel::set_text_embeddings(std::vector<Tensor> embs) {
    for (const auto& e : embs)
        if (e.rank() != 2 || e.dim(0) != cfg_.seq_len || e.dim(1) != cfg_.enc_dim)
            throw ShapeError("set_text_embeddings: expected [seq_len, enc_dim]");
    text_embs_ = std::move(embs);
}

Tensor TecSwinModel::forward(const Tensor& x_t, const std::vector<int64_t>& ts,
                             const std::vector<bool>& masked) {
    if (x_t.rank() != 4) throw ShapeError("forward: expected [B,H,W,C]");
    int64_t B = x_t.dim(0);
    if (static_cast<int64_t>(ts.size()) != B ||
        static_cast<int64_t>(masked.size()) != B)
        throw std::invalid_argument("forward: ts/masked size must match batch");
    if (text_embs_.empty())
        throw std::logic_error("forward: no prompts bound; call set_prompts first");

    std::vector<Tensor> embs;
    if (static_cast<int64_t>(text_embs_.size()) == B) {
        embs = text_embs_;
    } else if (text_embs_.size() == 1) {
        embs.assign(B, text_embs_[0]);
    } else {
        throw std::invalid_argument("forward: prompt count does not match batch");
    }
    ContextBundle ctx = assembler_->assemble_batch(embs, ts, masked);
    return unet_->forward(x_t, ctx);
}

void TecSwinModel::save(const std::string& path) const {
    save_checkpoint(path, params_.to_checkpoint());
}

void TecSwinModel::load(const std::string& path) {
    params_.load(load_checkpoint(path));
}

}  // namespace tecswin
