#pragma once

#include <string>
#include <vector>

#include "tecswin/rng.hpp"
#include "tecswin/tensor.hpp"

namespace tecswin {

// Four-class colored-shape corpus at a small resolution: enough structure
// for the end-to-end loop (train, sample, classify) to be checkable without
// real data. Classes: red square, green circle, blue triangle, yellow cross.
inline constexpr int kToyClasses = 4;

const std::string& toy_class_prompt(int cls);

// [size, size, 3] in [-1,1]; jittered position/scale, dark background
Tensor make_toy_image(int cls, int size, Rng& rng);

std::vector<std::pair<Tensor, int>> make_toy_dataset(int per_class, int size, Rng& rng);

// nearest dominant-color classifier; independent of the model under test
int classify_toy(const Tensor& image);

}  // namespace tecswin
