#include "tecswin/datapipe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <regex>
#include <stdexcept>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace tecswin {

namespace {

// decode UTF-8 into codepoints; invalid bytes pass through as single units
std::vector<uint32_t> codepoints(const std::string& s) {
    std::vector<uint32_t> cps;
    for (size_t i = 0; i < s.size();) {
        unsigned char c = s[i];
        uint32_t cp = c;
        int extra = 0;
        if ((c & 0xE0) == 0xC0) {
            cp = c & 0x1F;
            extra = 1;
        } else if ((c & 0xF0) == 0xE0) {
            cp = c & 0x0F;
            extra = 2;
        } else if ((c & 0xF8) == 0xF0) {
            cp = c & 0x07;
            extra = 3;
        }
        if (i + extra >= s.size() + (extra ? 0 : 1)) extra = 0;
        for (int k = 0; k < extra; ++k) cp = (cp << 6) | (s[i + 1 + k] & 0x3F);
        cps.push_back(cp);
        i += 1 + extra;
    }
    return cps;
}

bool is_han(uint32_t cp) {
    return (cp >= 0x4E00 && cp <= 0x9FFF) || (cp >= 0x3400 && cp <= 0x4DBF);
}

bool is_space_cp(uint32_t cp) { return cp == ' ' || cp == '\t' || cp == '\n' || cp == 0x3000; }

const std::vector<std::regex>& meaningless_patterns() {
    static const std::vector<std::regex> pats = {
        std::regex(R"(^\s*\d+\.(jpe?g|png|gif|bmp|webp)\s*$)", std::regex::icase),
        std::regex(R"(^\s*(image|img|photo|picture|screenshot)[ _-]?\d+\s*$)",
                   std::regex::icase),
        std::regex(R"(click (here )?for more)", std::regex::icase),
        std::regex(R"(^\s*(dsc|img)[_-]?\d{3,}\s*$)", std::regex::icase),
    };
    return pats;
}

std::string normalize_caption(const std::string& caption) {
    std::string out;
    bool in_space = false;
    for (char c : caption) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_space = true;
            continue;
        }
        if (in_space && !out.empty()) out += ' ';
        in_space = false;
        out += std::tolower(static_cast<unsigned char>(c));
    }
    return out;
}

}  // namespace

double stub_perplexity(const std::string& caption) {
    uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : caption) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return static_cast<double>(h % 13000) / 1000.0;
}

double cjk_ratio(const std::string& caption) {
    auto cps = codepoints(caption);
    int64_t total = 0, han = 0;
    for (uint32_t cp : cps) {
        if (is_space_cp(cp)) continue;
        ++total;
        if (is_han(cp)) ++han;
    }
    if (total == 0) return 0.0;
    return static_cast<double>(han) / static_cast<double>(total);
}

FilterVerdict filter_text(const std::string& caption, const PerplexityScorer& scorer,
                          const CharsetRatioFn& charset_ratio, bool apply_charset_rule) {
    FilterVerdict v;
    if (codepoints(caption).size() <= 5) v.reject("length");
    for (const auto& pat : meaningless_patterns())
        if (std::regex_search(caption, pat)) {
            v.reject("meaningless");
            break;
        }
    if (apply_charset_rule && charset_ratio && charset_ratio(caption) < 0.70)
        v.reject("charset");
    if (scorer && scorer(caption) > 6.5) v.reject("perplexity");
    return v;
}

FilterVerdict filter_image(int width, int height) {
    if (width <= 0 || height <= 0)
        throw std::invalid_argument("filter_image: missing dimensions");
    FilterVerdict v;
    if (std::min(width, height) < 64) v.reject("resolution");
    double aspect = static_cast<double>(std::max(width, height)) / std::min(width, height);
    if (aspect >= 2.0) v.reject("aspect");
    return v;
}

FilterVerdict filter_pair(const std::vector<float>& text_emb,
                          const std::vector<float>& image_emb) {
    if (text_emb.size() != image_emb.size() || text_emb.empty())
        throw std::invalid_argument("filter_pair: embedding dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < text_emb.size(); ++i) {
        dot += static_cast<double>(text_emb[i]) * image_emb[i];
        na += static_cast<double>(text_emb[i]) * text_emb[i];
        nb += static_cast<double>(image_emb[i]) * image_emb[i];
    }
    if (na == 0.0 || nb == 0.0) throw std::invalid_argument("filter_pair: zero vector");
    FilterVerdict v;
    if (dot / std::sqrt(na * nb) < 0.20) v.reject("similarity");
    return v;
}

Tensor preprocess_image(const Tensor& pixels, int size) {
    if (pixels.rank() != 3 || pixels.dim(2) != 3)
        throw ShapeError("preprocess_image: expected [H,W,3]");
    int64_t H = pixels.dim(0), W = pixels.dim(1);
    int64_t side = std::min(H, W);
    int64_t y0 = (H - side) / 2, x0 = (W - side) / 2;
    const auto& pv = pixels.data();

    std::vector<float> out(static_cast<int64_t>(size) * size * 3);
    double scale = static_cast<double>(side) / size;
    for (int y = 0; y < size; ++y) {
        double sy = (y + 0.5) * scale - 0.5;
        int64_t iy = static_cast<int64_t>(std::floor(sy));
        double fy = sy - iy;
        int64_t y1 = std::clamp<int64_t>(iy, 0, side - 1), y2 = std::clamp<int64_t>(iy + 1, 0, side - 1);
        for (int x = 0; x < size; ++x) {
            double sx = (x + 0.5) * scale - 0.5;
            int64_t ix = static_cast<int64_t>(std::floor(sx));
            double fx = sx - ix;
            int64_t x1 = std::clamp<int64_t>(ix, 0, side - 1), x2 = std::clamp<int64_t>(ix + 1, 0, side - 1);
            for (int c = 0; c < 3; ++c) {
                auto at = [&](int64_t yy, int64_t xx) {
                    return pv[((y0 + yy) * W + x0 + xx) * 3 + c];
                };
                double v = at(y1, x1) * (1 - fy) * (1 - fx) + at(y1, x2) * (1 - fy) * fx +
                           at(y2, x1) * fy * (1 - fx) + at(y2, x2) * fy * fx;
                out[(static_cast<int64_t>(y) * size + x) * 3 + c] =
                    static_cast<float>(v / 127.5 - 1.0);
            }
        }
    }
    return Tensor::from_data({size, size, 3}, std::move(out));
}

std::string template_prompt(const std::string& caption, const std::string& lang) {
    if (lang == "zh") return "这是一张关于" + caption + "的图片";
    return "This is an image of " + caption;
}

std::string chinese_ordinal(int n) {
    if (n < 0 || n > 99999) throw std::out_of_range("chinese_ordinal: out of range");
    static const char* digits[] = {"零", "一", "二", "三", "四", "五", "六", "七", "八", "九"};
    if (n < 10) return digits[n];
    struct Unit {
        int value;
        const char* name;
    };
    static const Unit units[] = {{10000, "万"}, {1000, "千"}, {100, "百"}, {10, "十"}};
    std::string out;
    bool pending_zero = false;
    int rem = n;
    for (const auto& u : units) {
        int d = rem / u.value;
        rem %= u.value;
        if (d == 0) {
            if (!out.empty()) pending_zero = true;
            continue;
        }
        if (pending_zero) {
            out += digits[0];
            pending_zero = false;
        }
        if (!(d == 1 && u.value == 10 && out.empty())) out += digits[d];
        out += u.name;
    }
    if (rem > 0) {
        if (pending_zero && !out.empty()) out += digits[0];
        out += digits[rem];
    }
    return out;
}

std::string template_class_prompt(const std::string& label, int class_index) {
    return "这是第" + chinese_ordinal(class_index) + "类" + label + "的图片";
}

std::string PairRecord::to_json() const {
    nlohmann::json j;
    j["image"] = image;
    j["width"] = width;
    j["height"] = height;
    j["caption"] = caption;
    j["lang"] = lang;
    if (!text_emb.empty()) j["text_emb"] = text_emb;
    if (!image_emb.empty()) j["image_emb"] = image_emb;
    if (perplexity) j["perplexity"] = *perplexity;
    if (!image_hash.empty()) j["image_hash"] = image_hash;
    return j.dump();
}

PairRecord PairRecord::from_json(const std::string& line) {
    auto j = nlohmann::json::parse(line);
    PairRecord r;
    r.image = j.value("image", "");
    r.width = j.value("width", 0);
    r.height = j.value("height", 0);
    r.caption = j.value("caption", "");
    r.lang = j.value("lang", "en");
    if (j.contains("text_emb")) r.text_emb = j["text_emb"].get<std::vector<float>>();
    if (j.contains("image_emb")) r.image_emb = j["image_emb"].get<std::vector<float>>();
    if (j.contains("perplexity")) r.perplexity = j["perplexity"].get<double>();
    r.image_hash = j.value("image_hash", "");
    return r;
}

std::string PipelineStats::to_json() const {
    nlohmann::json j;
    j["input"] = input;
    j["kept"] = kept;
    j["quarantined"] = quarantined;
    nlohmann::json reasons = nlohmann::json::object();
    for (const auto& [r, c] : reject_reasons) reasons[r] = c;
    j["rejected"] = input - kept - quarantined;
    j["reject_reasons"] = reasons;
    return j.dump(2);
}

PipelineStats run_pipeline(const std::string& manifest_in, const std::string& manifest_out,
                           const std::string& quarantine_out, const PipelineConfig& cfg) {
    std::ifstream in(manifest_in);
    if (!in) throw std::runtime_error("cannot open manifest " + manifest_in);
    std::ofstream out(manifest_out, std::ios::trunc);
    std::ofstream quar(quarantine_out, std::ios::trunc);
    if (!out || !quar) throw std::runtime_error("cannot open output manifests");

    PipelineStats stats;
    std::map<std::string, int64_t> reason_counts;
    std::unordered_set<std::string> seen;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++stats.input;
        try {
            PairRecord r = PairRecord::from_json(line);

            FilterVerdict v;
            PerplexityScorer scorer = cfg.scorer;
            if (r.perplexity) {  // trust precomputed scores
                double px = *r.perplexity;
                scorer = [px](const std::string&) { return px; };
            }
            FilterVerdict vt =
                filter_text(r.caption, scorer, cfg.charset_ratio, r.lang == "zh");
            for (const auto& reason : vt.reasons) v.reject(reason);
            FilterVerdict vi = filter_image(r.width, r.height);
            for (const auto& reason : vi.reasons) v.reject(reason);
            if (!r.text_emb.empty() || !r.image_emb.empty()) {
                FilterVerdict vp = filter_pair(r.text_emb, r.image_emb);
                for (const auto& reason : vp.reasons) v.reject(reason);
            }
            std::string key = (r.image_hash.empty() ? r.image : r.image_hash) + "\x1f" +
                              normalize_caption(r.caption);
            if (v.keep) {
                if (seen.count(key)) v.reject("duplicate");
            }
            if (v.keep) {
                seen.insert(key);
                out << line << "\n";
                ++stats.kept;
            } else {
                ++reason_counts[v.reasons.front()];  // primary reason
            }
        } catch (const std::exception&) {
            quar << line << "\n";
            ++stats.quarantined;
        }
    }
    for (const auto& [r, c] : reason_counts) stats.reject_reasons.emplace_back(r, c);
    return stats;
}

}  // namespace tecswin
