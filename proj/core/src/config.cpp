#include "tecswin/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace tecswin {

namespace {

nlohmann::json model_to_json(const ModelConfig& m) {
    nlohmann::json j;
    j["image_size"] = m.image_size;
    j["in_channels"] = m.in_channels;
    j["base_channels"] = m.base_channels;
    j["depths"] = m.depths;
    j["middle_depth"] = m.middle_depth;
    j["window"] = m.window;
    j["head_dim"] = m.head_dim;
    j["scale_shift_variant"] = m.scale_shift_variant;
    j["mlp_ratio_self"] = m.mlp_ratio_self;
    j["mlp_ratio_cross"] = m.mlp_ratio_cross;
    j["use_relative_bias"] = m.use_relative_bias;
    j["ctx_dim"] = m.ctx_dim;
    j["ctx_tokens"] = m.ctx_tokens;
    j["enc_dim"] = m.enc_dim;
    j["enc_layers"] = m.enc_layers;
    j["seq_len"] = m.seq_len;
    j["avg_layers"] = m.avg_layers;
    return j;
}

ModelConfig model_from_json(const nlohmann::json& j, ModelConfig m) {
    static const std::set<std::string> known = {
        "image_size", "in_channels", "base_channels", "depths", "middle_depth",
        "window", "head_dim", "scale_shift_variant", "mlp_ratio_self", "mlp_ratio_cross",
        "use_relative_bias", "ctx_dim", "ctx_tokens", "enc_dim", "enc_layers",
        "seq_len", "avg_layers"};
    for (const auto& [k, _] : j.items())
        if (!known.count(k)) throw std::invalid_argument("config: unknown model key " + k);
    m.image_size = j.value("image_size", m.image_size);
    m.in_channels = j.value("in_channels", m.in_channels);
    m.base_channels = j.value("base_channels", m.base_channels);
    if (j.contains("depths")) m.depths = j["depths"].get<std::vector<int>>();
    m.middle_depth = j.value("middle_depth", m.middle_depth);
    m.window = j.value("window", m.window);
    m.head_dim = j.value("head_dim", m.head_dim);
    m.scale_shift_variant = j.value("scale_shift_variant", m.scale_shift_variant);
    m.mlp_ratio_self = j.value("mlp_ratio_self", m.mlp_ratio_self);
    m.mlp_ratio_cross = j.value("mlp_ratio_cross", m.mlp_ratio_cross);
    m.use_relative_bias = j.value("use_relative_bias", m.use_relative_bias);
    m.ctx_dim = j.value("ctx_dim", m.ctx_dim);
    m.ctx_tokens = j.value("ctx_tokens", m.ctx_tokens);
    m.enc_dim = j.value("enc_dim", m.enc_dim);
    m.enc_layers = j.value("enc_layers", m.enc_layers);
    m.seq_len = j.value("seq_len", m.seq_len);
    if (j.contains("avg_layers")) m.avg_layers = j["avg_layers"].get<std::vector<int>>();
    return m;
}

ModelConfig preset_model(const std::string& preset) {
    if (preset == "toy") return ModelConfig::toy();
    if (preset == "paper_scale") return ModelConfig::paper_scale();
    if (preset == "tiny") return ModelConfig::tiny();
    if (preset == "custom") return ModelConfig::toy();
    throw std::invalid_argument("config: unknown preset " + preset);
}

}  // namespace

std::string RunConfig::to_json() const {
    nlohmann::json j;
    j["preset"] = preset;
    j["model"] = model_to_json(model);
    j["train_T"] = train_T;
    j["cond_scale"] = guidance.cond_scale;
    j["mask_prob"] = guidance.mask_prob;
    j["train_steps"] = train_steps;
    j["batch"] = batch;
    j["seed"] = seed;
    j["init_seed"] = init_seed;
    j["lr_peak"] = lr_peak;
    j["lr_floor"] = lr_floor;
    j["warmup_frac"] = warmup_frac;
    j["checkpoint_path"] = checkpoint_path;
    j["checkpoint_every"] = checkpoint_every;
    return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    static const std::set<std::string> known = {
        "preset", "model", "train_T", "cond_scale", "mask_prob", "train_steps",
        "batch", "seed", "init_seed", "lr_peak", "lr_floor", "warmup_frac",
        "checkpoint_path", "checkpoint_every"};
    for (const auto& [k, _] : j.items())
        if (!known.count(k)) throw std::invalid_argument("config: unknown key " + k);

    RunConfig c;
    c.preset = j.value("preset", "toy");
    c.model = preset_model(c.preset);
    if (j.contains("model")) c.model = model_from_json(j["model"], c.model);
    c.model.validate();
    c.train_T = j.value("train_T", c.train_T);
    c.guidance.cond_scale = j.value("cond_scale", c.guidance.cond_scale);
    c.guidance.mask_prob = j.value("mask_prob", c.guidance.mask_prob);
    c.train_steps = j.value("train_steps", c.train_steps);
    c.batch = j.value("batch", c.batch);
    c.seed = j.value("seed", c.seed);
    c.init_seed = j.value("init_seed", c.init_seed);
    c.lr_peak = j.value("lr_peak", c.lr_peak);
    c.lr_floor = j.value("lr_floor", c.lr_floor);
    c.warmup_frac = j.value("warmup_frac", c.warmup_frac);
    c.checkpoint_path = j.value("checkpoint_path", c.checkpoint_path);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return from_json(ss.str());
}

void RunConfig::save(const std::string& path) const {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    f << to_json() << "\n";
}

}  // namespace tecswin
