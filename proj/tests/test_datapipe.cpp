#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "tecswin/datapipe.hpp"

using namespace tecswin;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / "tsw_datapipe_test") {
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const char* name) const { return (path / name).string(); }
};

PerplexityScorer fixed_ppl(double v) {
    return [v](const std::string&) { return v; };
}

std::string read_all(const std::string& path) {
    std::ifstream f(path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("caption length boundary: exactly 5 codepoints rejects, 6 keeps") {
    auto ok = fixed_ppl(1.0);
    CHECK(filter_text("abcde", ok, cjk_ratio, false).keep == false);   // 5 chars
    CHECK(filter_text("abcdef", ok, cjk_ratio, false).keep == true);   // 6 chars
    // multibyte codepoints count as single characters
    CHECK(filter_text("五个字的话", ok, cjk_ratio, true).keep == false);   // 5 cps
    CHECK(filter_text("六个字符的话", ok, cjk_ratio, true).keep == true);  // 6 cps
    auto v = filter_text("abc", ok, cjk_ratio, false);
    REQUIRE_FALSE(v.keep);
    CHECK(v.reasons.front() == "length");
}

TEST_CASE("perplexity boundary: 6.5 keeps, above rejects") {
    CHECK(filter_text("a normal caption", fixed_ppl(6.5), cjk_ratio, false).keep);
    CHECK_FALSE(filter_text("a normal caption", fixed_ppl(6.5000001), cjk_ratio, false).keep);
    auto v = filter_text("a normal caption", fixed_ppl(9.0), cjk_ratio, false);
    CHECK(v.reasons == std::vector<std::string>{"perplexity"});
}

TEST_CASE("charset boundary: ratio 0.70 keeps, below rejects; only when enabled") {
    // 7 of 10 non-space chars Han -> exactly 0.70
    std::string r70 = "这是一个好句子abc";
    CHECK(std::abs(cjk_ratio(r70) - 0.7) < 1e-12);
    CHECK(filter_text(r70, fixed_ppl(1.0), cjk_ratio, true).keep);
    std::string r60 = "这是一个好句abcd";  // 6 of 10
    CHECK_FALSE(filter_text(r60, fixed_ppl(1.0), cjk_ratio, true).keep);
    CHECK(filter_text(r60, fixed_ppl(1.0), cjk_ratio, false).keep);  // rule off
}

TEST_CASE("meaningless-description patterns reject") {
    auto ok = fixed_ppl(1.0);
    CHECK_FALSE(filter_text("1234.jpg", ok, cjk_ratio, false).keep);
    CHECK_FALSE(filter_text("IMG_0042", ok, cjk_ratio, false).keep);
    CHECK_FALSE(filter_text("image 17", ok, cjk_ratio, false).keep);
    CHECK_FALSE(filter_text("click here for more details", ok, cjk_ratio, false).keep);
    CHECK(filter_text("a cat sitting on IMG-shaped cushion", ok, cjk_ratio, false).keep);
}

TEST_CASE("image boundaries: min side 64 keeps, aspect 2.0 rejects") {
    CHECK(filter_image(64, 64).keep);
    CHECK_FALSE(filter_image(63, 100).keep);
    CHECK(filter_image(100, 64).keep);
    CHECK_FALSE(filter_image(128, 64).keep);          // aspect exactly 2.0
    CHECK(filter_image(127, 64).keep);                // just under
    CHECK_FALSE(filter_image(64, 200).keep);          // portrait aspect
    CHECK_THROWS(filter_image(0, 100));
    CHECK_THROWS(filter_image(100, -3));
}

TEST_CASE("pair similarity boundary: cosine 0.20 keeps, below rejects") {
    // cos = 0.2 exactly: a=(1,0), b=(0.2, sqrt(1-0.04))
    std::vector<float> a = {1.0f, 0.0f};
    std::vector<float> b = {0.2f, std::sqrt(0.96f)};
    CHECK(filter_pair(a, b).keep);
    std::vector<float> c = {0.19f, std::sqrt(1.0f - 0.19f * 0.19f)};
    CHECK_FALSE(filter_pair(a, c).keep);
    CHECK_THROWS(filter_pair(a, {1.0f}));            // dim mismatch
    CHECK_THROWS(filter_pair(a, {0.0f, 0.0f}));      // zero vector
}

TEST_CASE("preprocess: center-crop square output in [-1,1]") {
    // 4x8 image, left half 0, right half 255 -> crop keeps the middle columns
    std::vector<float> px(4 * 8 * 3);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 8; ++x)
            for (int c = 0; c < 3; ++c) px[(y * 8 + x) * 3 + c] = x < 4 ? 0.0f : 255.0f;
    Tensor out = preprocess_image(Tensor::from_data({4, 8, 3}, px), 4);
    REQUIRE(out.shape() == Shape{4, 4, 3});
    for (float v : out.data()) {
        CHECK(v >= -1.0f);
        CHECK(v <= 1.0f);
    }
    CHECK(out.data()[0] == -1.0f);                       // left of crop still dark
    CHECK(out.data()[(0 * 4 + 3) * 3] == 1.0f);          // right bright
    CHECK_THROWS(preprocess_image(Tensor::zeros({4, 4}), 4));
}

TEST_CASE("prompt templates") {
    CHECK(template_prompt("a red car", "en") == "This is an image of a red car");
    CHECK(template_prompt("红色的车", "zh") == "这是一张关于红色的车的图片");
}

TEST_CASE("chinese ordinals") {
    CHECK(chinese_ordinal(0) == "零");
    CHECK(chinese_ordinal(7) == "七");
    CHECK(chinese_ordinal(10) == "十");
    CHECK(chinese_ordinal(14) == "十四");
    CHECK(chinese_ordinal(20) == "二十");
    CHECK(chinese_ordinal(101) == "一百零一");
    CHECK(chinese_ordinal(110) == "一百一十");
    CHECK(chinese_ordinal(984) == "九百八十四");
    CHECK(chinese_ordinal(1005) == "一千零五");
    CHECK(chinese_ordinal(10000) == "一万");
    CHECK_THROWS(chinese_ordinal(-1));
    CHECK_THROWS(chinese_ordinal(100000));

    CHECK(template_class_prompt("金鱼", 984) == "这是第九百八十四类金鱼的图片");
}

TEST_CASE("pair record JSON round-trip") {
    PairRecord r;
    r.image = "img/0001.png";
    r.width = 256;
    r.height = 192;
    r.caption = "一只奔跑的狗";
    r.lang = "zh";
    r.text_emb = {0.1f, 0.2f};
    r.image_emb = {0.3f, 0.4f};
    r.perplexity = 3.25;
    r.image_hash = "abcd1234";
    PairRecord back = PairRecord::from_json(r.to_json());
    CHECK(back.image == r.image);
    CHECK(back.width == r.width);
    CHECK(back.height == r.height);
    CHECK(back.caption == r.caption);
    CHECK(back.lang == r.lang);
    CHECK(back.text_emb == r.text_emb);
    CHECK(back.image_emb == r.image_emb);
    REQUIRE(back.perplexity.has_value());
    CHECK(*back.perplexity == 3.25);
    CHECK(back.image_hash == r.image_hash);
}

TEST_CASE("pipeline: 1000-record manifest, conservation, dedup, idempotence") {
    TempDir tmp;
    auto t0 = std::chrono::steady_clock::now();

    std::ofstream in(tmp.file("in.jsonl"));
    for (int i = 0; i < 1000; ++i) {
        PairRecord r;
        r.image = "img/" + std::to_string(i) + ".png";
        r.width = 128;
        r.height = 96;
        r.lang = "en";
        r.caption = "photo number " + std::to_string(i) + " of a scene";
        r.perplexity = 2.0;
        switch (i % 10) {
            case 0: r.caption = "tiny"; break;                 // length
            case 1: r.perplexity = 9.9; break;                 // perplexity
            case 2: r.width = 40; break;                       // resolution
            case 3: r.width = 300; break;                      // aspect
            case 4: r.caption = "IMG_" + std::to_string(1000 + i); break;  // meaningless
            case 6:  // exact duplicate of the case-5 record just before it
                r.image = "img/" + std::to_string(i - 1) + ".png";
                r.caption = "photo number " + std::to_string(i - 1) + " of a scene";
                break;
            default: break;
        }
        in << r.to_json() << "\n";
    }
    // a malformed line lands in quarantine
    in << "{not json at all\n";
    in.close();
    // per decade: 5 rule rejections, 1 duplicate, 4 kept (cases 5,7,8,9)
    const int expected_kept = 400;

    PipelineStats stats = run_pipeline(tmp.file("in.jsonl"), tmp.file("out.jsonl"),
                                       tmp.file("quar.jsonl"), {});
    CHECK(stats.input == 1001);
    CHECK(stats.quarantined == 1);
    CHECK(stats.kept == expected_kept);

    // reason counts sum to rejected count exactly
    int64_t rejected = stats.input - stats.kept - stats.quarantined;
    int64_t sum = 0;
    std::map<std::string, int64_t> by_reason;
    for (auto& [r, c] : stats.reject_reasons) {
        sum += c;
        by_reason[r] = c;
    }
    CHECK(sum == rejected);
    CHECK(by_reason["length"] == 100);
    CHECK(by_reason["perplexity"] == 100);
    CHECK(by_reason["resolution"] == 100);
    CHECK(by_reason["aspect"] == 100);
    CHECK(by_reason["meaningless"] == 100);
    CHECK(by_reason["duplicate"] == 100);

    // idempotence: filtering the kept set changes nothing
    PipelineStats again = run_pipeline(tmp.file("out.jsonl"), tmp.file("out2.jsonl"),
                                       tmp.file("quar2.jsonl"), {});
    CHECK(again.kept == stats.kept);
    CHECK(again.quarantined == 0);
    CHECK(read_all(tmp.file("out2.jsonl")) == read_all(tmp.file("out.jsonl")));

    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(secs < 10.0);
}

TEST_CASE("pipeline quarantines records whose scorer throws") {
    TempDir tmp;
    PairRecord r;
    r.image = "x.png";
    r.width = 128;
    r.height = 128;
    r.caption = "a perfectly fine caption";
    std::ofstream(tmp.file("in.jsonl")) << r.to_json() << "\n";

    PipelineConfig cfg;
    cfg.scorer = [](const std::string&) -> double { throw std::runtime_error("scorer down"); };
    PipelineStats stats =
        run_pipeline(tmp.file("in.jsonl"), tmp.file("out.jsonl"), tmp.file("q.jsonl"), cfg);
    CHECK(stats.quarantined == 1);
    CHECK(stats.kept == 0);
}

TEST_CASE("stub perplexity is deterministic and in range") {
    double a = stub_perplexity("some caption");
    CHECK(a == stub_perplexity("some caption"));
    CHECK(a >= 0.0);
    CHECK(a < 13.0);
    CHECK(stub_perplexity("another") != a);
}
