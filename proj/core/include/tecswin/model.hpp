#pragma once

#include <memory>
#include <string>
#include <vector>

#include "tecswin/diffusion.hpp"
#include "tecswin/textcond.hpp"
#include "tecswin/unet.hpp"

namespace tecswin {

// Full text-conditioned denoiser: stub text encoder -> layer averaging ->
// context assembly -> Swin U-Net. Prompts are bound per batch before forward
// so the diffusion loops only see the EpsModel surface.
class TecSwinModel : public EpsModel {
public:
    explicit TecSwinModel(const ModelConfig& cfg, uint64_t init_seed = 0x5eed);

    Params& params() { return params_; }
    const Params& params() const { return params_; }
    const ModelConfig& config() const { return cfg_; }
    const UNet& unet() const { return *unet_; }

    // averaged text embedding [seq_len, enc_dim] for one prompt
    Tensor encode_prompt(const std::string& prompt) const;

    // Bind prompts for subsequent forward calls. One prompt broadcasts over
    // the batch; otherwise the count must match the batch size.
    void set_prompts(const std::vector<std::string>& prompts);
    void set_text_embeddings(std::vector<Tensor> embs);

    Tensor forward(const Tensor& x_t, const std::vector<int64_t>& ts,
                   const std::vector<bool>& masked) override;

    void save(const std::string& path) const;
    void load(const std::string& path);

private:
    ModelConfig cfg_;
    Params params_;
    StubEncoder encoder_;
    std::unique_ptr<ContextAssembler> assembler_;
    std::unique_ptr<UNet> unet_;
    std::vector<Tensor> text_embs_;
};

}  // namespace tecswin
