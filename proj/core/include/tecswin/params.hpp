#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tecswin/rng.hpp"
#include "tecswin/serialize.hpp"
#include "tecswin/tensor.hpp"

namespace tecswin {

// Ordered registry of learnable tensors. Construction order is fixed by the
// model config, which keeps init and checkpoints reproducible.
class Params {
public:
    explicit Params(uint64_t init_seed) : rng_(init_seed) {}

    Tensor randn(const std::string& name, Shape shape, float stddev) {
        Tensor t = Tensor::randn(std::move(shape), rng_, stddev, true);
        entries_.emplace_back(name, t);
        return t;
    }

    // fan-in scaled init for weight matrices [in, out]
    Tensor weight(const std::string& name, int64_t in, int64_t out) {
        return randn(name, {in, out}, 1.0f / std::sqrt(static_cast<float>(in)));
    }

    Tensor full(const std::string& name, Shape shape, float v) {
        Tensor t = Tensor::full(std::move(shape), v, true);
        entries_.emplace_back(name, t);
        return t;
    }

    Tensor zeros(const std::string& name, Shape shape) { return full(name, std::move(shape), 0.0f); }
    Tensor ones(const std::string& name, Shape shape) { return full(name, std::move(shape), 1.0f); }

    const std::vector<std::pair<std::string, Tensor>>& all() const { return entries_; }
    std::vector<std::pair<std::string, Tensor>>& all() { return entries_; }

    int64_t count() const {
        int64_t n = 0;
        for (const auto& [_, t] : entries_) n += t.numel();
        return n;
    }

    void zero_grad() {
        for (auto& [_, t] : entries_) t.zero_grad();
    }

    Checkpoint to_checkpoint() const {
        Checkpoint c;
        for (const auto& [name, t] : entries_) c.tensors[name] = t;
        return c;
    }

    void load(const Checkpoint& c) {
        for (auto& [name, t] : entries_) {
            auto it = c.tensors.find(name);
            if (it == c.tensors.end())
                throw std::runtime_error("checkpoint missing parameter " + name);
            if (it->second.shape() != t.shape())
                throw std::runtime_error("checkpoint shape mismatch for " + name);
            t.mutable_data() = it->second.data();
        }
    }

private:
    Rng rng_;
    std::vector<std::pair<std::string, Tensor>> entries_;
};

}  // namespace tecswin
