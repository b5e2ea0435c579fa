#include <doctest.h>

#include <cmath>

#include "tecswin/textcond.hpp"
#include "testutil.hpp"

using namespace tecswin;
using testutil::max_abs_diff;

TEST_CASE("stub encoder: deterministic, shape-correct, prompt-sensitive") {
    StubEncoder enc(StubEncoderSpec{});
    EncoderOutput a = enc.encode("a red square on black");
    EncoderOutput b = enc.encode("a red square on black");
    EncoderOutput c = enc.encode("a blue circle on white");

    REQUIRE(static_cast<int>(a.layer_outputs.size()) == 4);
    for (const auto& l : a.layer_outputs) CHECK(l.shape() == Shape{16, 64});
    CHECK(a.pooled.shape() == Shape{64});

    for (size_t l = 0; l < a.layer_outputs.size(); ++l)
        CHECK(a.layer_outputs[l].data() == b.layer_outputs[l].data());
    CHECK(a.pooled.data() == b.pooled.data());
    CHECK(max_abs_diff(a.layer_outputs[0], c.layer_outputs[0]) > 1e-3);
}

TEST_CASE("stub encoder rejects empty prompt") {
    StubEncoder enc(StubEncoderSpec{});
    CHECK_THROWS(enc.encode(""));
    CHECK_THROWS(enc.encode("   "));
}

TEST_CASE("pooled output is the mean of the last layer") {
    StubEncoder enc(StubEncoderSpec{});
    EncoderOutput out = enc.encode("check pooling");
    const Tensor& last = out.layer_outputs.back();
    int64_t L = last.dim(0), D = last.dim(1);
    for (int64_t d = 0; d < D; ++d) {
        double mean = 0;
        for (int64_t t = 0; t < L; ++t) mean += last.data()[t * D + d];
        mean /= static_cast<double>(L);
        CHECK(std::abs(out.pooled.data()[d] - mean) < 1e-6);
    }
}

TEST_CASE("average_layers is the arithmetic mean of selected layers") {
    StubEncoder enc(StubEncoderSpec{});
    EncoderOutput out = enc.encode("layer averaging test");
    Tensor avg = average_layers(out, {0, 2, 3});
    for (size_t i = 0; i < avg.data().size(); ++i) {
        double want = (out.layer_outputs[0].data()[i] + out.layer_outputs[2].data()[i] +
                       out.layer_outputs[3].data()[i]) /
                      3.0;
        CHECK(std::abs(avg.data()[i] - want) < 1e-6);
    }
    CHECK(max_abs_diff(average_layers(out, {1}), out.layer_outputs[1]) == 0.0);
    CHECK_THROWS(average_layers(out, {0, 7}));
    CHECK_THROWS(average_layers(out, {}));
}

TEST_CASE("sinusoidal time embedding") {
    Tensor e0 = sinusoidal_time_embedding(0, 8);
    REQUIRE(e0.shape() == Shape{8});
    // t=0: all sines 0, all cosines 1
    for (int i = 0; i < 4; ++i) {
        CHECK(e0.data()[i] == 0.0f);
        CHECK(e0.data()[4 + i] == 1.0f);
    }
    Tensor e1 = sinusoidal_time_embedding(25, 8);
    Tensor e2 = sinusoidal_time_embedding(26, 8);
    CHECK(max_abs_diff(e1, e2) > 1e-4);  // distinct timesteps distinguishable
    CHECK_THROWS(sinusoidal_time_embedding(3, 7));   // odd dim
    CHECK_THROWS(sinusoidal_time_embedding(-1, 8));  // negative t
}

TEST_CASE("context assembler geometry and determinism") {
    Params p(5);
    ContextAssembler asmbl(p, "ctx", 16, 64, 8, 32);
    StubEncoder enc(StubEncoderSpec{});
    Tensor emb = average_layers(enc.encode("geometry probe"), {0, 2, 3});

    ContextBundle b1 = asmbl.assemble(emb, 17, false);
    REQUIRE(b1.tokens.shape() == Shape{1, 8 + 2, 32});
    REQUIRE(b1.pooled.shape() == Shape{1, 32});
    REQUIRE(b1.cond.shape() == Shape{1, 32});

    ContextBundle b2 = asmbl.assemble(emb, 17, false);
    CHECK(b1.tokens.data() == b2.tokens.data());
    CHECK(b1.cond.data() == b2.cond.data());
}

TEST_CASE("masked bundle equals the canonical null bundle at the same timestep") {
    Params p(7);
    ContextAssembler asmbl(p, "ctx", 16, 64, 8, 32);
    StubEncoder enc(StubEncoderSpec{});
    Tensor e1 = average_layers(enc.encode("first prompt"), {0, 2, 3});
    Tensor e2 = average_layers(enc.encode("a completely different prompt"), {0, 2, 3});

    ContextBundle m1 = asmbl.assemble(e1, 42, true);
    ContextBundle m2 = asmbl.assemble(e2, 42, true);
    CHECK(m1.tokens.data() == m2.tokens.data());  // prompt fully suppressed
    CHECK(m1.pooled.data() == m2.pooled.data());
    CHECK(m1.cond.data() == m2.cond.data());

    ContextBundle c1 = asmbl.assemble(e1, 42, false);
    CHECK(max_abs_diff(c1.tokens, m1.tokens) > 1e-4);  // unmasked differs

    // time information survives masking
    ContextBundle m3 = asmbl.assemble(e1, 7, true);
    CHECK(max_abs_diff(m1.cond, m3.cond) > 1e-6);
}

TEST_CASE("assemble_batch stacks per-sample bundles") {
    Params p(9);
    ContextAssembler asmbl(p, "ctx", 16, 64, 8, 32);
    StubEncoder enc(StubEncoderSpec{});
    Tensor e1 = average_layers(enc.encode("alpha"), {0, 2, 3});
    Tensor e2 = average_layers(enc.encode("beta"), {0, 2, 3});

    ContextBundle batch = asmbl.assemble_batch({e1, e2}, {3, 9}, {false, true});
    REQUIRE(batch.batch() == 2);
    ContextBundle s0 = asmbl.assemble(e1, 3, false);
    ContextBundle s1 = asmbl.assemble(e2, 9, true);
    int64_t n = s0.tokens.numel();
    for (int64_t i = 0; i < n; ++i) {
        CHECK(batch.tokens.data()[i] == s0.tokens.data()[i]);
        CHECK(batch.tokens.data()[n + i] == s1.tokens.data()[i]);
    }
    CHECK(batch.masked == std::vector<bool>{false, true});
}
