#include "tecswin/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "tecswin/rng.hpp"

namespace tecswin {

FeatureSet FeatureSet::from_rows(int64_t count, int64_t dim, std::vector<double> rows) {
    if (static_cast<int64_t>(rows.size()) != count * dim)
        throw std::invalid_argument("FeatureSet: row buffer size mismatch");
    FeatureSet fs;
    fs.count = count;
    fs.dim = dim;
    fs.features = std::move(rows);
    fs.mean.assign(dim, 0.0);
    for (int64_t i = 0; i < count; ++i)
        for (int64_t j = 0; j < dim; ++j) fs.mean[j] += fs.features[i * dim + j];
    for (auto& m : fs.mean) m /= static_cast<double>(count);
    fs.cov.assign(dim * dim, 0.0);
    for (int64_t i = 0; i < count; ++i)
        for (int64_t j = 0; j < dim; ++j) {
            double dj = fs.features[i * dim + j] - fs.mean[j];
            for (int64_t k = 0; k < dim; ++k)
                fs.cov[j * dim + k] += dj * (fs.features[i * dim + k] - fs.mean[k]);
        }
    double denom = count > 1 ? static_cast<double>(count - 1) : 1.0;
    for (auto& c : fs.cov) c /= denom;
    for (int64_t j = 0; j < dim; ++j) fs.cov[j * dim + j] += 1e-6;  // shrinkage
    return fs;
}

double frechet_distance(const FeatureSet& a, const FeatureSet& b) {
    if (a.dim != b.dim) throw std::invalid_argument("frechet_distance: dim mismatch");
    int64_t F = a.dim;
    using Mat = Eigen::MatrixXd;
    Mat Ca = Eigen::Map<const Mat>(a.cov.data(), F, F);
    Mat Cb = Eigen::Map<const Mat>(b.cov.data(), F, F);

    Eigen::SelfAdjointEigenSolver<Mat> esa(0.5 * (Ca + Ca.transpose()));
    if (esa.info() != Eigen::Success)
        throw std::runtime_error("frechet_distance: eigendecomposition failed");
    Eigen::VectorXd ev = esa.eigenvalues().cwiseMax(0.0);
    Mat sqrt_ca = esa.eigenvectors() * ev.cwiseSqrt().asDiagonal() *
                  esa.eigenvectors().transpose();

    Mat prod = sqrt_ca * Cb * sqrt_ca;
    Eigen::SelfAdjointEigenSolver<Mat> esp(0.5 * (prod + prod.transpose()));
    if (esp.info() != Eigen::Success)
        throw std::runtime_error("frechet_distance: sqrt of product failed, residual " +
                                 std::to_string(prod.norm()));
    double tr_sqrt = esp.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

    double dmu = 0.0;
    for (int64_t j = 0; j < F; ++j) {
        double d = a.mean[j] - b.mean[j];
        dmu += d * d;
    }
    return dmu + Ca.trace() + Cb.trace() - 2.0 * tr_sqrt;
}

namespace {

// 3x3 valid-padding conv with stride 2, then ReLU; plain loops, forward only
std::vector<float> conv3x3_s2(const std::vector<float>& in, int H, int W, int Cin,
                              const std::vector<float>& w, int Cout, int* Ho, int* Wo) {
    int ho = (H - 3) / 2 + 1, wo = (W - 3) / 2 + 1;
    std::vector<float> out(static_cast<size_t>(ho) * wo * Cout, 0.0f);
    for (int y = 0; y < ho; ++y)
        for (int x = 0; x < wo; ++x)
            for (int co = 0; co < Cout; ++co) {
                float acc = 0.0f;
                for (int ky = 0; ky < 3; ++ky)
                    for (int kx = 0; kx < 3; ++kx)
                        for (int ci = 0; ci < Cin; ++ci)
                            acc += in[((2 * y + ky) * W + 2 * x + kx) * Cin + ci] *
                                   w[((ky * 3 + kx) * Cin + ci) * Cout + co];
                out[(y * wo + x) * Cout + co] = std::max(acc, 0.0f);
            }
    *Ho = ho;
    *Wo = wo;
    return out;
}

}  // namespace

FeatureSet FeatureExtractor::extract(const std::vector<Tensor>& images) const {
    if (images.empty()) throw std::invalid_argument("extract: no images");
    int H = static_cast<int>(images[0].dim(0));
    int W = static_cast<int>(images[0].dim(1));
    for (const auto& im : images)
        if (im.rank() != 3 || im.dim(0) != H || im.dim(1) != W || im.dim(2) != 3)
            throw ShapeError("extract: images must share shape [H,W,3]");

    const int widths[3] = {8, 12, feature_dim};
    std::vector<std::vector<float>> weights;
    int cin = 3;
    Rng rng(seed);
    for (int l = 0; l < 3; ++l) {
        std::vector<float> w(static_cast<size_t>(9) * cin * widths[l]);
        float sc = 1.0f / std::sqrt(9.0f * cin);
        for (auto& v : w) v = static_cast<float>(rng.normal()) * sc;
        weights.push_back(std::move(w));
        cin = widths[l];
    }

    int64_t F = feature_dim;
    std::vector<double> rows(images.size() * F);
    for (size_t i = 0; i < images.size(); ++i) {
        std::vector<float> act(images[i].data().begin(), images[i].data().end());
        int h = H, w = W, c = 3;
        for (int l = 0; l < 3; ++l) {
            if (h < 3 || w < 3) break;
            int ho, wo;
            act = conv3x3_s2(act, h, w, c, weights[l], widths[l], &ho, &wo);
            h = ho;
            w = wo;
            c = widths[l];
        }
        // global average pool over whatever resolution remains
        std::vector<double> pooled(F, 0.0);
        int64_t px = static_cast<int64_t>(h) * w;
        for (int64_t p = 0; p < px; ++p)
            for (int ch = 0; ch < c && ch < F; ++ch) pooled[ch] += act[p * c + ch];
        for (auto& v : pooled) v /= static_cast<double>(px);
        for (int64_t j = 0; j < F; ++j) rows[i * F + j] = pooled[j];
    }
    return FeatureSet::from_rows(static_cast<int64_t>(images.size()), F, std::move(rows));
}

}  // namespace tecswin
