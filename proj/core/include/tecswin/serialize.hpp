#pragma once

#include <map>
#include <string>
#include <vector>

#include "tecswin/tensor.hpp"

namespace tecswin {

// Raw tensor file: magic "TSW1", u32 rank, u32 dims[rank], little-endian f32 payload.
void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

void write_tensor(std::vector<uint8_t>& out, const Tensor& t);

// Checkpoint: manifest (name -> offset/shape) followed by concatenated raw tensors.
struct Checkpoint {
    std::map<std::string, Tensor> tensors;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace tecswin
