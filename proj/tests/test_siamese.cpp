#include <cmath>

#include "clnet/errors.hpp"
#include "clnet/siamese.hpp"
#include "doctest.h"

using namespace clnet;

TEST_CASE("conv2d plain forward: 1x1 config equals weighted channel mix") {
    Rng rng(21);
    Conv2d c = Conv2d::make(3, 2, 1, 1, rng);
    c.b = Tensor::from({2}, {0.1, -0.2});
    Tensor x = rng.randn({3, 4, 5});
    Tensor y = c.forward(x);
    REQUIRE(y.dim(0) == 2);
    for (int o = 0; o < 2; ++o)
        for (int py = 0; py < 4; ++py)
            for (int px = 0; px < 5; ++px) {
                double acc = c.b[o];
                for (int ci = 0; ci < 3; ++ci)
                    acc += c.w[o * 3 + ci] * x.at(ci, py, px);
                CHECK(y.at(o, py, px) == doctest::Approx(acc).epsilon(1e-14));
            }
    CHECK_THROWS_AS(c.forward(rng.randn({2, 4, 5})), InputError);
}

TEST_CASE("embed: zero image through zero-bias net gives zero map") {
    Rng rng(22);
    EmbedNet net = EmbedNet::make(1, {4, 6}, {2, 1}, rng);
    Tensor img = Tensor::zeros({1, 16, 16});
    Tensor f = net.forward(img);
    CHECK(f.dim(0) == 6);
    CHECK(f.max_abs() == 0.0);
}

TEST_CASE("embed is deterministic for fixed seed and input") {
    Tensor img;
    {
        Rng rng(23);
        img = rng.randn({1, 16, 16});
    }
    Rng r1(99), r2(99);
    EmbedNet n1 = EmbedNet::make(1, {4, 6}, {2, 1}, r1);
    EmbedNet n2 = EmbedNet::make(1, {4, 6}, {2, 1}, r2);
    Tensor f1 = n1.forward(img);
    Tensor f2 = n2.forward(img);
    REQUIRE(f1.same_shape(f2));
    for (int i = 0; i < f1.numel(); ++i) CHECK(f1[i] == f2[i]);
}

TEST_CASE("embed plain forward equals tape forward bit-exactly") {
    Rng rng(24);
    EmbedNet net = EmbedNet::make(1, {4, 6}, {2, 1}, rng);
    Tensor img = rng.randn({1, 16, 16});
    Tensor plain = net.forward(img);
    Tape t;
    const Tensor& taped = t.value(net.forward(t, t.input(img), false, false));
    REQUIRE(plain.same_shape(taped));
    for (int i = 0; i < plain.numel(); ++i) CHECK(plain[i] == taped[i]);
}

TEST_CASE("similarity map contracts") {
    Rng rng(25);
    Tensor tmpl = rng.randn({3, 2, 2});

    // all-zero instance: response is the offset everywhere
    Tensor zeros = Tensor::zeros({3, 5, 5});
    Tensor s = similarity_map(zeros, tmpl, 0.25);
    CHECK(s.dim(0) == 1);
    CHECK(s.dim(1) == 4);
    for (int i = 0; i < s.numel(); ++i) CHECK(s[i] == 0.25);

    // 1x1 all-ones template, b=0: per-position channel sum
    Tensor ones = Tensor::full({3, 1, 1}, 1.0);
    Tensor inst = rng.randn({3, 4, 4});
    Tensor cs = similarity_map(inst, ones, 0.0);
    for (int py = 0; py < 4; ++py)
        for (int px = 0; px < 4; ++px) {
            double acc = 0.0;
            for (int c = 0; c < 3; ++c) acc += inst.at(c, py, px);
            CHECK(cs.at(0, py, px) == doctest::Approx(acc).epsilon(1e-14));
        }

    // 2x2 single-channel hand example
    Tensor hi = Tensor::from({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    Tensor hz = Tensor::from({1, 2, 2}, {1, -1, 2, 0});
    Tensor hs = similarity_map(hi, hz, 1.0);
    CHECK(hs.at(0, 0, 0) == doctest::Approx(1 - 2 + 8 + 1));
    CHECK(hs.at(0, 1, 1) == doctest::Approx(5 - 6 + 16 + 1));

    // equal sizes reduce to a dot product
    Tensor a = rng.randn({2, 3, 3});
    Tensor b = rng.randn({2, 3, 3});
    Tensor dot = similarity_map(a, b, 0.0);
    CHECK(dot.numel() == 1);
    double acc = 0.0;
    for (int i = 0; i < a.numel(); ++i) acc += a[i] * b[i];
    CHECK(dot[0] == doctest::Approx(acc).epsilon(1e-12));

    CHECK_THROWS_AS(similarity_map(rng.randn({2, 5, 5}), tmpl, 0.0), InputError);
    CHECK_THROWS_AS(similarity_map(rng.randn({3, 1, 1}), tmpl, 0.0), InputError);
}

TEST_CASE("dw_xcorr: delta kernel shifts, naive oracle") {
    Rng rng(26);
    Tensor x = rng.randn({4, 6, 6});
    Tensor delta = Tensor::zeros({4, 3, 3});
    for (int c = 0; c < 4; ++c) delta.at(c, 1, 1) = 1.0; // same delta every channel
    Tensor y = dw_xcorr(x, delta);
    for (int c = 0; c < 4; ++c)
        for (int oy = 0; oy < 4; ++oy)
            for (int ox = 0; ox < 4; ++ox)
                CHECK(y.at(c, oy, ox) == x.at(c, oy + 1, ox + 1));

    Tensor z = rng.randn({4, 3, 3});
    Tensor r = dw_xcorr(x, z);
    for (int c = 0; c < 4; ++c)
        for (int oy = 0; oy < 4; ++oy)
            for (int ox = 0; ox < 4; ++ox) {
                double acc = 0.0;
                for (int ky = 0; ky < 3; ++ky)
                    for (int kx = 0; kx < 3; ++kx)
                        acc += x.at(c, oy + ky, ox + kx) * z.at(c, ky, kx);
                CHECK(r.at(c, oy, ox) == doctest::Approx(acc).epsilon(1e-9));
            }
}

TEST_CASE("branch hidden map reaches full-model dimensions") {
    Rng rng(27);
    BranchStack b = BranchStack::make(8, 256, 10, rng);
    Tensor fx = rng.randn({8, 31, 31});
    Tensor fz = rng.randn({8, 7, 7});
    Tensor m = b.hidden_map(fx, fz);
    CHECK(m.dim(0) == 256);
    CHECK(m.dim(1) == 25);
    CHECK(m.dim(2) == 25);
}

TEST_CASE("head_forward: zero head, output dims, affine oracle, linearity") {
    Rng rng(28);
    Tensor m = rng.randn({6, 3, 3});

    HeadWeights zero = HeadWeights::zeros(10, 6);
    Tensor az = head_forward(m, zero);
    CHECK(az.dim(0) == 10); // 2k for k=5
    CHECK(az.max_abs() == 0.0);

    HeadWeights th = HeadWeights::make(4, 6, rng);
    th.bias = rng.randn({4});
    th.offset = Tensor::from({1}, {0.3});
    Tensor a = head_forward(m, th);
    for (int o = 0; o < 4; ++o)
        for (int py = 0; py < 3; ++py)
            for (int px = 0; px < 3; ++px) {
                double acc = th.bias[o] + 0.3;
                for (int ci = 0; ci < 6; ++ci)
                    acc += th.matrix.m(o, ci) * m.at(ci, py, px);
                CHECK(a.at(o, py, px) == doctest::Approx(acc).epsilon(1e-12));
            }

    // linear in the weights: f(ta+tb) = f(ta) + f(tb) - f(0)
    HeadWeights ta = HeadWeights::make(4, 6, rng);
    HeadWeights tb = HeadWeights::make(4, 6, rng);
    ta.offset[0] = 0.7;
    tb.offset[0] = -0.2;
    HeadWeights tsum = HeadWeights::zeros(4, 6);
    for (int i = 0; i < 24; ++i) tsum.matrix[i] = ta.matrix[i] + tb.matrix[i];
    for (int i = 0; i < 4; ++i) tsum.bias[i] = ta.bias[i] + tb.bias[i];
    tsum.offset[0] = ta.offset[0] + tb.offset[0];
    Tensor fa = head_forward(m, ta), fb = head_forward(m, tb);
    Tensor fs = head_forward(m, tsum), f0 = head_forward(m, HeadWeights::zeros(4, 6));
    for (int i = 0; i < fs.numel(); ++i)
        CHECK(fs[i] == doctest::Approx(fa[i] + fb[i] - f0[i]).epsilon(1e-12));

    CHECK_THROWS_AS(head_forward(rng.randn({5, 3, 3}), th), InputError);
}

TEST_CASE("head_forward flat size matches closed-form arithmetic") {
    HeadWeights cls = HeadWeights::zeros(10, 256); // 2k, k=5
    CHECK(cls.flat_size() == 2571);
    HeadWeights loc = HeadWeights::zeros(20, 256); // 4k
    CHECK(loc.flat_size() == 5141);
}

TEST_CASE("rpn model geometry and parameter count") {
    Rng rng(29);
    BackboneConfig cfg; // toy defaults
    RpnModel model = RpnModel::make(cfg, rng);
    CHECK(model.response_size() == cfg.map_size);
    CHECK(model.embed.out_size(cfg.template_size) == 7);
    CHECK(model.embed.out_size(cfg.search_size) == 19);

    Tensor z = rng.randn({1, cfg.template_size, cfg.template_size});
    Tensor x = rng.randn({1, cfg.search_size, cfg.search_size});
    Tensor fz = model.embed_patch(z);
    Tensor fx = model.embed_patch(x);
    auto [mc, ml] = model.hidden_maps(fx, fz);
    CHECK(mc.dim(0) == cfg.head_hidden);
    CHECK(mc.dim(1) == cfg.map_size);
    CHECK(ml.same_shape(mc));

    Tensor a_cls = head_forward(mc, model.cls.head1);
    Tensor a_loc = head_forward(ml, model.loc.head1);
    CHECK(a_cls.dim(0) == 2 * cfg.anchors_per_cell);
    CHECK(a_loc.dim(0) == 4 * cfg.anchors_per_cell);

    // counted parameters match a hand count of the layer shapes
    NamedTensors named;
    model.params(named);
    int total = 0;
    for (auto& [name, ten] : named) total += ten->numel();
    CHECK(total == model.param_count());

    auto conv_block = [](int ci, int co, int k) { return co * ci * k * k + co + 2 * co; };
    int embed = conv_block(1, 12, 3) + conv_block(12, 16, 3) + conv_block(16, 16, 3);
    int branch_shared = conv_block(16, 24, 1) * 2 + conv_block(24, 24, 1);
    int heads = (10 * 24 + 10 + 1) + (20 * 24 + 20 + 1);
    CHECK(total == embed + 2 * branch_shared + heads);
}

TEST_CASE("fc model responds with template correlation") {
    Rng rng(30);
    BackboneConfig cfg;
    FcModel model = FcModel::make(cfg, rng);
    model.b[0] = 0.5;
    Tensor z = rng.randn({1, cfg.template_size, cfg.template_size});
    Tensor x = rng.randn({1, cfg.search_size, cfg.search_size});
    Tensor fz = model.embed_patch(z);
    Tensor fx = model.embed_patch(x);
    Tensor s = model.respond(fx, fz);
    CHECK(s.dim(0) == 1);
    CHECK(s.dim(1) == 13);
    Tensor expect = similarity_map(fx, fz, 0.5);
    for (int i = 0; i < s.numel(); ++i) CHECK(s[i] == expect[i]);
}
