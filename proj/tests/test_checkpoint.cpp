#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <vector>

#include "clnet/checkpoint.hpp"
#include "clnet/errors.hpp"

using namespace clnet;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    return std::string(std::istreambuf_iterator<char>(f), {});
}

struct Fixture {
    Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b = Tensor::from({4}, {-1, 0.5, 2.25, 1e-12});
    NamedTensors named() { return {{"layer.w", &a}, {"layer.b", &b}}; }
};

} // namespace

TEST_CASE("capture and restore round-trip exactly") {
    Fixture fx;
    Checkpoint ck = capture(fx.named(), 0xdeadbeefull);
    CHECK(ck.config_hash == 0xdeadbeefull);
    CHECK(ck.entries.size() == 2);

    Fixture other;
    other.a.fill(0);
    other.b.fill(0);
    auto named = other.named();
    restore_into(ck, named);
    for (int i = 0; i < fx.a.numel(); ++i) CHECK(other.a[i] == fx.a[i]);
    for (int i = 0; i < fx.b.numel(); ++i) CHECK(other.b[i] == fx.b[i]);
}

TEST_CASE("file round-trip preserves every bit and rewrites identically") {
    Fixture fx;
    Checkpoint ck = capture(fx.named(), 7);
    std::string p1 = "/tmp/clnet_ck_a.bin", p2 = "/tmp/clnet_ck_b.bin";
    save_checkpoint(p1, ck);
    Checkpoint back = load_checkpoint(p1);
    CHECK(back.config_hash == 7);
    REQUIRE(back.entries.size() == 2);
    CHECK(back.entries[0].first == "layer.w");
    const Tensor* w = back.find("layer.w");
    REQUIRE(w != nullptr);
    CHECK(w->dim(0) == 2);
    CHECK(w->dim(1) == 3);
    for (int i = 0; i < fx.a.numel(); ++i) CHECK((*w)[i] == fx.a[i]);
    CHECK(back.find("missing") == nullptr);

    save_checkpoint(p2, back);
    CHECK(slurp(p1) == slurp(p2)); // byte-identical rewrite
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("strict restore rejects mismatches") {
    Fixture fx;
    Checkpoint ck = capture(fx.named(), 1);

    SUBCASE("missing entry in checkpoint") {
        Fixture other;
        Tensor extra = Tensor::from({1}, {0});
        NamedTensors named = other.named();
        named.push_back({"layer.extra", &extra});
        CHECK_THROWS_AS(restore_into(ck, named), IngestError);
    }
    SUBCASE("extra entry in checkpoint") {
        Fixture other;
        NamedTensors named = other.named();
        named.pop_back();
        CHECK_THROWS_AS(restore_into(ck, named), IngestError);
    }
    SUBCASE("renamed entry") {
        Fixture other;
        NamedTensors named = {{"layer.w", &other.a}, {"layer.bias", &other.b}};
        CHECK_THROWS_AS(restore_into(ck, named), IngestError);
    }
    SUBCASE("shape mismatch") {
        Fixture other;
        other.b = Tensor::from({2, 2}, {0, 0, 0, 0});
        NamedTensors named = other.named();
        CHECK_THROWS_AS(restore_into(ck, named), IngestError);
    }
}

TEST_CASE("corrupted files are rejected") {
    Fixture fx;
    Checkpoint ck = capture(fx.named(), 1);
    std::string path = "/tmp/clnet_ck_corrupt.bin";
    save_checkpoint(path, ck);
    std::string bytes = slurp(path);

    auto write_bytes = [&](const std::string& s) {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        f.write(s.data(), static_cast<std::streamsize>(s.size()));
    };

    SUBCASE("bad magic") {
        std::string s = bytes;
        s[0] = 'X';
        write_bytes(s);
        CHECK_THROWS_AS(load_checkpoint(path), IngestError);
    }
    SUBCASE("unsupported version") {
        std::string s = bytes;
        s[4] = 99;
        write_bytes(s);
        CHECK_THROWS_AS(load_checkpoint(path), IngestError);
    }
    SUBCASE("truncated payload") {
        write_bytes(bytes.substr(0, bytes.size() - 5));
        CHECK_THROWS_AS(load_checkpoint(path), IngestError);
    }
    SUBCASE("truncated header") {
        write_bytes(bytes.substr(0, 6));
        CHECK_THROWS_AS(load_checkpoint(path), IngestError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_checkpoint("/tmp/clnet_ck_nope.bin"), IngestError);
    }
    std::remove(path.c_str());
}
