#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tecswin/tensor.hpp"

namespace tecswin {

struct PairRecord {
    std::string image;  // path or URL
    int width = 0;
    int height = 0;
    std::string caption;
    std::string lang;  // "en" or "zh"
    std::vector<float> text_emb;
    std::vector<float> image_emb;
    std::optional<double> perplexity;
    std::string image_hash;

    std::string to_json() const;
    static PairRecord from_json(const std::string& line);
};

struct FilterVerdict {
    bool keep = true;
    std::vector<std::string> reasons;

    void reject(const std::string& reason) {
        keep = false;
        reasons.push_back(reason);
    }
};

// Pluggable scorers. Throwing marks the record quarantined, not dropped.
using PerplexityScorer = std::function<double(const std::string&)>;
using CharsetRatioFn = std::function<double(const std::string&)>;

// deterministic hash-based stand-in for the gpt2 perplexity scorer
double stub_perplexity(const std::string& caption);
// fraction of CJK codepoints among non-space characters
double cjk_ratio(const std::string& caption);

// Text rules: length > 5 chars, perplexity <= 6.5, charset ratio >= 0.70,
// no meaningless-description patterns. Boundary values keep.
FilterVerdict filter_text(const std::string& caption, const PerplexityScorer& scorer,
                          const CharsetRatioFn& charset_ratio,
                          bool apply_charset_rule = true);

// Image rules: min side >= 64, aspect ratio < 2.
FilterVerdict filter_image(int width, int height);

// Pair rule: cosine similarity >= 0.20 keeps; zero vectors quarantine.
FilterVerdict filter_pair(const std::vector<float>& text_emb,
                          const std::vector<float>& image_emb);

// center-crop to square, bilinear resize to `size`, rescale to [-1,1];
// pixels: [H,W,3] in [0,255]
Tensor preprocess_image(const Tensor& pixels, int size = 64);

// "This is an image of [CAPTION]" and the Chinese equivalent
std::string template_prompt(const std::string& caption, const std::string& lang);

// class-caption template with a Chinese ordinal class number
std::string chinese_ordinal(int n);
std::string template_class_prompt(const std::string& label, int class_index);

struct PipelineStats {
    int64_t input = 0;
    int64_t kept = 0;
    int64_t quarantined = 0;
    std::vector<std::pair<std::string, int64_t>> reject_reasons;  // primary reason counts

    std::string to_json() const;
};

struct PipelineConfig {
    PerplexityScorer scorer = stub_perplexity;
    CharsetRatioFn charset_ratio = cjk_ratio;
    double min_cosine = 0.20;
};

// Streaming pipeline over line-delimited JSON manifests; order-stable and
// idempotent. Records with scorer failures or missing fields land in the
// quarantine manifest.
PipelineStats run_pipeline(const std::string& manifest_in, const std::string& manifest_out,
                           const std::string& quarantine_out, const PipelineConfig& cfg = {});

}  // namespace tecswin
