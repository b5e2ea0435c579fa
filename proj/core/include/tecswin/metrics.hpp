#pragma once

#include <cstdint>
#include <vector>

#include "tecswin/tensor.hpp"

namespace tecswin {

struct FeatureSet {
    int64_t count = 0;
    int64_t dim = 0;
    std::vector<double> features;  // row-major [count, dim]
    std::vector<double> mean;      // [dim]
    std::vector<double> cov;       // [dim, dim], shrinkage 1e-6*I applied

    static FeatureSet from_rows(int64_t count, int64_t dim, std::vector<double> rows);
};

// ||mu_a - mu_b||^2 + Tr(Ca + Cb - 2 (Ca Cb)^{1/2}); matrix square root via
// eigendecomposition of sqrt(Ca) Cb sqrt(Ca) with tiny negative eigenvalues
// clamped to zero.
double frechet_distance(const FeatureSet& a, const FeatureSet& b);

// Frozen seeded 3-layer conv net used as the desk-scale feature extractor.
struct FeatureExtractor {
    uint64_t seed = 0xF1D0;
    int feature_dim = 16;

    // images: each [H,W,3] in [-1,1]
    FeatureSet extract(const std::vector<Tensor>& images) const;
};

}  // namespace tecswin
