#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "tecswin/params.hpp"
#include "tecswin/serialize.hpp"

using namespace tecswin;
namespace fs = std::filesystem;

namespace {
struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / "tsw_serialize_test") {
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};
}  // namespace

TEST_CASE("raw tensor round-trip preserves shape and bits") {
    TempDir tmp;
    Rng rng(1);
    Tensor t = Tensor::randn({3, 4, 5}, rng);
    std::string f = (tmp.path / "a.tsw").string();
    save_tensor(f, t);
    Tensor back = load_tensor(f);
    CHECK(back.shape() == t.shape());
    CHECK(back.data() == t.data());
}

TEST_CASE("raw tensor file starts with magic bytes") {
    TempDir tmp;
    std::string f = (tmp.path / "m.tsw").string();
    save_tensor(f, Tensor::full({2}, 1.5f));
    std::ifstream in(f, std::ios::binary);
    char magic[4];
    in.read(magic, 4);
    CHECK(std::string(magic, 4) == "TSW1");
}

TEST_CASE("scalar (rank 0) round-trips") {
    TempDir tmp;
    std::string f = (tmp.path / "s.tsw").string();
    save_tensor(f, Tensor::scalar(2.25f));
    Tensor back = load_tensor(f);
    CHECK(back.rank() == 0);
    CHECK(back.item() == 2.25f);
}

TEST_CASE("checkpoint round-trip across many tensors") {
    TempDir tmp;
    Rng rng(2);
    Checkpoint c;
    c.tensors["w1"] = Tensor::randn({8, 8}, rng);
    c.tensors["b1"] = Tensor::randn({8}, rng);
    c.tensors["deep.nested.name"] = Tensor::randn({2, 3, 4, 5}, rng);
    std::string f = (tmp.path / "ck.tswc").string();
    save_checkpoint(f, c);
    Checkpoint back = load_checkpoint(f);
    REQUIRE(back.tensors.size() == 3);
    for (auto& [name, t] : c.tensors) {
        REQUIRE(back.tensors.count(name));
        CHECK(back.tensors[name].shape() == t.shape());
        CHECK(back.tensors[name].data() == t.data());
    }
}

TEST_CASE("params load validates names and shapes") {
    TempDir tmp;
    Params p(3);
    p.weight("w", 4, 4);
    p.zeros("b", {4});
    std::string f = (tmp.path / "p.tswc").string();
    save_checkpoint(f, p.to_checkpoint());

    Params q(4);
    q.weight("w", 4, 4);
    q.zeros("b", {4});
    q.load(load_checkpoint(f));
    CHECK(q.all()[0].second.data() == p.all()[0].second.data());

    Params missing(5);
    missing.weight("other", 4, 4);
    CHECK_THROWS(missing.load(load_checkpoint(f)));

    Params wrong_shape(6);
    wrong_shape.weight("w", 4, 5);
    wrong_shape.zeros("b", {4});
    CHECK_THROWS(wrong_shape.load(load_checkpoint(f)));
}

TEST_CASE("load rejects corrupt magic") {
    TempDir tmp;
    std::string f = (tmp.path / "bad.tsw").string();
    std::ofstream(f, std::ios::binary) << "NOPE1234";
    CHECK_THROWS(load_tensor(f));
}
