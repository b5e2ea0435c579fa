#include "tecswin/toydata.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace tecswin {

namespace {

constexpr std::array<std::array<float, 3>, 4> kColors = {{
    {0.9f, -0.8f, -0.8f},   // red
    {-0.8f, 0.9f, -0.8f},   // green
    {-0.8f, -0.8f, 0.9f},   // blue
    {0.9f, 0.9f, -0.8f},    // yellow
}};
constexpr float kBackground = -0.9f;

}  // namespace

const std::string& toy_class_prompt(int cls) {
    static const std::vector<std::string> prompts = {
        "This is an image of a red square",
        "This is an image of a green circle",
        "This is an image of a blue triangle",
        "This is an image of a yellow cross",
    };
    return prompts.at(cls);
}

Tensor make_toy_image(int cls, int size, Rng& rng) {
    if (cls < 0 || cls >= kToyClasses) throw std::out_of_range("make_toy_image: bad class");
    std::vector<float> px(static_cast<size_t>(size) * size * 3, kBackground);

    double cx = size * (0.40 + 0.20 * rng.uniform());
    double cy = size * (0.40 + 0.20 * rng.uniform());
    double r = size * (0.25 + 0.10 * rng.uniform());
    const auto& col = kColors[cls];

    auto inside = [&](double x, double y) {
        double dx = x - cx, dy = y - cy;
        switch (cls) {
            case 0:  // square
                return std::abs(dx) <= r && std::abs(dy) <= r;
            case 1:  // circle
                return dx * dx + dy * dy <= r * r;
            case 2:  // triangle (upward)
                return dy >= -r && dy <= r && std::abs(dx) <= (dy + r) / 2.0;
            default:  // cross
                return (std::abs(dx) <= r * 0.35 && std::abs(dy) <= r) ||
                       (std::abs(dy) <= r * 0.35 && std::abs(dx) <= r);
        }
    };
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            if (inside(x + 0.5, y + 0.5))
                for (int c = 0; c < 3; ++c) px[(y * size + x) * 3 + c] = col[c];
    return Tensor::from_data({size, size, 3}, std::move(px));
}

std::vector<std::pair<Tensor, int>> make_toy_dataset(int per_class, int size, Rng& rng) {
    std::vector<std::pair<Tensor, int>> data;
    data.reserve(static_cast<size_t>(per_class) * kToyClasses);
    for (int cls = 0; cls < kToyClasses; ++cls)
        for (int i = 0; i < per_class; ++i) data.emplace_back(make_toy_image(cls, size, rng), cls);
    return data;
}

int classify_toy(const Tensor& image) {
    if (image.rank() != 3 || image.dim(2) != 3)
        throw ShapeError("classify_toy: expected [H,W,3]");
    const auto& px = image.data();
    int64_t n = image.dim(0) * image.dim(1);

    // average color over foreground-ish pixels (brighter than background)
    double mean[3] = {0, 0, 0};
    int64_t cnt = 0;
    for (int64_t p = 0; p < n; ++p) {
        double lum = (px[p * 3] + px[p * 3 + 1] + px[p * 3 + 2]) / 3.0;
        if (lum > -0.5) {
            for (int c = 0; c < 3; ++c) mean[c] += px[p * 3 + c];
            ++cnt;
        }
    }
    if (cnt == 0)
        for (int64_t p = 0; p < n; ++p) {
            for (int c = 0; c < 3; ++c) mean[c] += px[p * 3 + c];
            ++cnt;
        }
    for (auto& m : mean) m /= static_cast<double>(cnt);

    int best = 0;
    double best_d = 1e300;
    for (int cls = 0; cls < kToyClasses; ++cls) {
        double d = 0;
        for (int c = 0; c < 3; ++c) {
            double diff = mean[c] - kColors[cls][c];
            d += diff * diff;
        }
        if (d < best_d) {
            best_d = d;
            best = cls;
        }
    }
    return best;
}

}  // namespace tecswin
