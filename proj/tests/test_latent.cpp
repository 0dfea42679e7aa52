#include <cmath>

#include "clnet/errors.hpp"
#include "clnet/latent_net.hpp"
#include "doctest.h"
#include "gradcheck.hpp"

using namespace clnet;

namespace {

LabelMap make_labels(std::vector<Label> ls) {
    LabelMap y;
    y.labels = std::move(ls);
    for (Label l : y.labels) {
        y.pos_count += l == Label::POS;
        y.neg_count += l == Label::NEG;
    }
    return y;
}

CLNetConfig toy_cfg(Branch branch, Augmentation mode = Augmentation::ADDITIVE) {
    CLNetConfig cfg;
    cfg.latent_channels = 4;
    cfg.hidden = 8;
    cfg.branch = branch;
    cfg.augmentation = mode;
    return cfg;
}

void zero_fc3(CompactLatentNet& net) {
    net.fc3.w.fill(0.0);
    net.fc3.b.fill(0.0);
}

} // namespace

TEST_CASE("adjust_features: spatial size preserved, channel widths per branch") {
    Rng rng(40);
    CLNetConfig cls = toy_cfg(Branch::CLS);
    CompactLatentNet net = CompactLatentNet::make(cls, 6, delta_length(cls, 4, 6), rng);
    Tensor m = rng.randn({6, 25, 25});
    Tensor mbar = adjust_features(m, net);
    CHECK(mbar.dim(0) == 4);
    CHECK(mbar.dim(1) == 25);
    CHECK(mbar.dim(2) == 25);

    CLNetConfig reg = toy_cfg(Branch::REG);
    CompactLatentNet rnet = CompactLatentNet::make(reg, 6, delta_length(reg, 8, 6), rng);
    Tensor rbar = adjust_features(m, rnet);
    CHECK(rbar.dim(0) == 8); // 2 * latent_channels

    CHECK_THROWS_AS(adjust_features(rng.randn({5, 9, 9}), net), ConfigError);
}

TEST_CASE("adjust_features: zero conv weights give zero map") {
    Rng rng(41);
    CLNetConfig cfg = toy_cfg(Branch::CLS);
    CompactLatentNet net = CompactLatentNet::make(cfg, 3, delta_length(cfg, 4, 3), rng);
    for (ConvBlock* blk : {&net.conv1, &net.conv2, &net.conv3}) {
        blk->conv.w.fill(0.0);
        blk->conv.b.fill(0.0);
    }
    Tensor mbar = adjust_features(rng.randn({3, 5, 5}), net);
    CHECK(mbar.max_abs() == 0.0);
}

TEST_CASE("adjust_features matches per-position affine oracle") {
    Rng rng(42);
    CLNetConfig cfg = toy_cfg(Branch::CLS);
    CompactLatentNet net = CompactLatentNet::make(cfg, 3, delta_length(cfg, 4, 3), rng);
    // give the running stats some structure
    for (ConvBlock* blk : {&net.conv1, &net.conv2, &net.conv3}) {
        blk->bn.running_mean = rng.randn({blk->bn.channels()}, 0.2);
        blk->bn.running_var = Tensor::full({blk->bn.channels()}, 1.3);
        blk->bn.gamma = rng.randn({blk->bn.channels()}, 0.5);
        blk->bn.beta = rng.randn({blk->bn.channels()}, 0.1);
    }
    Tensor m = rng.randn({3, 4, 4});
    Tensor got = adjust_features(m, net);

    auto block_oracle = [](const ConvBlock& blk, const Tensor& in) {
        int co = blk.conv.out_channels(), ci = blk.conv.in_channels();
        Tensor out({co, in.dim(1), in.dim(2)});
        for (int o = 0; o < co; ++o)
            for (int py = 0; py < in.dim(1); ++py)
                for (int px = 0; px < in.dim(2); ++px) {
                    double acc = blk.conv.b[o];
                    for (int c = 0; c < ci; ++c)
                        acc += blk.conv.w[o * ci + c] * in.at(c, py, px);
                    double norm = (acc - blk.bn.running_mean[o]) /
                                  std::sqrt(blk.bn.running_var[o] + blk.bn.eps);
                    double v = blk.bn.gamma[o] * norm + blk.bn.beta[o];
                    out.at(o, py, px) = std::max(0.0, v);
                }
        return out;
    };
    Tensor want = block_oracle(net.conv3, block_oracle(net.conv2, block_oracle(net.conv1, m)));
    REQUIRE(got.same_shape(want));
    for (int i = 0; i < got.numel(); ++i)
        CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("latent_encode: mean/std oracle and part layout") {
    // channels hold {1,3} and {3,5} over two positive cells; negatives elsewhere
    Tensor mbar = Tensor::from({2, 2, 2}, {1, 3, 10, 20, 3, 5, 30, 40});
    LabelMap y = make_labels({Label::POS, Label::POS, Label::NEG, Label::NEG});
    LatentFeature f = latent_encode(mbar, y, Branch::CLS);
    REQUIRE(f.size() == 8);
    CHECK(f.part_lengths == std::vector<int>{2, 2, 2, 2});
    CHECK(f.values[0] == doctest::Approx(2.0));  // mu+ ch0
    CHECK(f.values[1] == doctest::Approx(4.0));  // mu+ ch1
    CHECK(f.values[2] == doctest::Approx(1.0));  // sigma+ ch0
    CHECK(f.values[3] == doctest::Approx(1.0));  // sigma+ ch1
    CHECK(f.values[4] == doctest::Approx(15.0)); // mu- ch0
    CHECK(f.values[5] == doctest::Approx(35.0)); // mu- ch1
    CHECK(f.values[6] == doctest::Approx(5.0));  // sigma- ch0
    CHECK(f.values[7] == doctest::Approx(5.0));  // sigma- ch1
}

TEST_CASE("latent_encode: zero-variance set, number-free length, REG positive-only") {
    Rng rng(43);
    Tensor mbar = rng.randn({3, 3, 3});
    // all positives carry the same vector
    for (int c = 0; c < 3; ++c) {
        mbar.at(c, 0, 0) = c + 0.5;
        mbar.at(c, 0, 1) = c + 0.5;
    }
    LabelMap y = make_labels({Label::POS, Label::POS, Label::NEG, Label::NEG, Label::NEG,
                              Label::IGNORE, Label::NEG, Label::NEG, Label::NEG});
    LatentFeature f = latent_encode(mbar, y, Branch::CLS);
    CHECK(f.values[0] == doctest::Approx(0.5));
    CHECK(f.values[3] == 0.0); // sigma+ ch0
    CHECK(f.values[4] == 0.0);
    CHECK(f.values[5] == 0.0);

    // length is independent of the set sizes
    LabelMap y2 = make_labels({Label::POS, Label::NEG, Label::NEG, Label::NEG, Label::NEG,
                               Label::NEG, Label::NEG, Label::NEG, Label::NEG});
    CHECK(latent_encode(mbar, y2, Branch::CLS).size() == f.size());

    // sigma segments are nonnegative
    for (int i = 3; i < 6; ++i) CHECK(f.values[static_cast<size_t>(i)] >= 0.0);

    // REG: only the positive set is consumed, output is still 4*c-bar of the
    // doubled-width map
    LabelMap pos_only = make_labels({Label::POS, Label::POS, Label::IGNORE, Label::IGNORE,
                                     Label::IGNORE, Label::IGNORE, Label::IGNORE,
                                     Label::IGNORE, Label::IGNORE});
    LatentFeature fr = latent_encode(mbar, pos_only, Branch::REG);
    CHECK(fr.size() == 6);
    CHECK(fr.part_lengths == std::vector<int>{3, 3});

    CHECK_THROWS_AS(latent_encode(mbar, pos_only, Branch::CLS), EncoderInputError);
    LabelMap neg_only = make_labels({Label::NEG, Label::NEG, Label::NEG, Label::NEG,
                                     Label::NEG, Label::NEG, Label::NEG, Label::NEG,
                                     Label::NEG});
    CHECK_THROWS_AS(latent_encode(mbar, neg_only, Branch::REG), EncoderInputError);
    CHECK_THROWS_AS(latent_encode(mbar, neg_only, Branch::CLS), EncoderInputError);
}

TEST_CASE("latent_encode: anchor labels map onto cells; permutation invariance") {
    Rng rng(44);
    Tensor mbar = rng.randn({2, 2, 2});
    // k=2 anchors per cell: anchors 0,1 -> cell 0, anchors 2,3 -> cell 1...
    std::vector<Label> ls(8, Label::NEG);
    ls[0] = Label::POS; // cell 0
    ls[3] = Label::POS; // cell 1
    LatentFeature a = latent_encode(mbar, make_labels(ls), Branch::CLS);

    std::vector<Label> ls2(8, Label::NEG);
    ls2[1] = Label::POS; // cell 0 again, different anchor
    ls2[2] = Label::POS; // cell 1
    LatentFeature b = latent_encode(mbar, make_labels(ls2), Branch::CLS);
    for (int i = 0; i < a.size(); ++i) CHECK(a.values[i] == b.values[i]);

    // permuting the member values leaves the statistics unchanged
    Tensor swapped = mbar;
    for (int c = 0; c < 2; ++c) {
        std::swap(swapped.at(c, 0, 0), swapped.at(c, 0, 1));
    }
    std::vector<Label> both(8, Label::NEG);
    both[0] = both[2] = Label::POS;
    LatentFeature p1 = latent_encode(mbar, make_labels(both), Branch::CLS);
    LatentFeature p2 = latent_encode(swapped, make_labels(both), Branch::CLS);
    for (int i = 0; i < p1.size(); ++i)
        CHECK(p1.values[i] == doctest::Approx(p2.values[i]).epsilon(1e-12));

    // label count must tile the map
    std::vector<Label> bad(7, Label::NEG);
    CHECK_THROWS_AS(latent_encode(mbar, make_labels(bad), Branch::CLS), InputError);
}

TEST_CASE("latent_encode tape path matches plain path bit-exactly") {
    Rng rng(45);
    Tensor mbar = rng.randn({5, 3, 3});
    std::vector<Label> ls(9, Label::NEG);
    ls[2] = ls[4] = ls[7] = Label::POS;
    LabelMap y = make_labels(ls);
    LatentFeature plain = latent_encode(mbar, y, Branch::CLS);
    Tape t;
    const Tensor& taped = t.value(latent_encode(t, t.input(mbar), y, Branch::CLS));
    REQUIRE(taped.numel() == plain.size());
    for (int i = 0; i < plain.size(); ++i) CHECK(taped[i] == plain.values[i]);
}

TEST_CASE("predict_delta: zero FC3, full-dims lengths, MLP oracle, tanh bound") {
    Rng rng(46);
    CLNetConfig cfg; // full dims: c-bar 128, hidden 256
    CHECK(latent_length(cfg) == 512);
    CHECK(delta_length(cfg, 10, 256) == 2571);
    CHECK(delta_length(cfg, 20, 256) == 5141);

    CLNetConfig toy = toy_cfg(Branch::CLS);
    int dlen = delta_length(toy, 4, 3); // 4*(3+1)+1 = 17
    CHECK(dlen == 17);
    CompactLatentNet net = CompactLatentNet::make(toy, 3, dlen, rng);

    LatentFeature c;
    c.values = rng.randn({latent_length(toy)});
    c.part_lengths = {4, 4, 4, 4};

    zero_fc3(net);
    WeightDelta d0 = predict_delta(c, net, 4, 3);
    CHECK(d0.delta.numel() == 17);
    CHECK(d0.delta.max_abs() == 0.0); // tanh(0) exactly

    Rng rng2(47);
    CompactLatentNet net2 = CompactLatentNet::make(toy, 3, dlen, rng2);
    WeightDelta d = predict_delta(c, net2, 4, 3);
    // explicit 3-layer MLP oracle
    Tensor y1({net2.fc1.out_dim()});
    for (int r = 0; r < net2.fc1.out_dim(); ++r) {
        double acc = net2.fc1.b[r];
        for (int i = 0; i < c.size(); ++i) acc += net2.fc1.w.m(r, i) * c.values[i];
        y1[r] = std::max(0.0, acc);
    }
    Tensor y2({net2.fc2.out_dim()});
    for (int r = 0; r < net2.fc2.out_dim(); ++r) {
        double acc = net2.fc2.b[r];
        for (int i = 0; i < y1.numel(); ++i) acc += net2.fc2.w.m(r, i) * y1[i];
        y2[r] = std::max(0.0, acc);
    }
    for (int r = 0; r < dlen; ++r) {
        double acc = net2.fc3.b[r];
        for (int i = 0; i < y2.numel(); ++i) acc += net2.fc3.w.m(r, i) * y2[i];
        CHECK(d.delta[r] == doctest::Approx(std::tanh(acc)).epsilon(1e-9));
        CHECK(d.delta[r] > -1.0);
        CHECK(d.delta[r] < 1.0);
    }

    LatentFeature wrong;
    wrong.values = rng.randn({latent_length(toy) + 1});
    CHECK_THROWS_AS(predict_delta(wrong, net2, 4, 3), ConfigError);
    CHECK_THROWS_AS(predict_delta(c, net2, 5, 3), ConfigError);
}

TEST_CASE("augment_weights: identities and CBAM arithmetic") {
    Rng rng(48);
    HeadWeights th = HeadWeights::make(3, 4, rng);
    th.bias = rng.randn({3});
    th.offset[0] = 0.4;

    WeightDelta zero;
    zero.mode = Augmentation::ADDITIVE;
    zero.delta = Tensor::zeros({th.flat_size()});
    HeadWeights a = augment_weights(th, zero);
    for (int i = 0; i < 12; ++i) CHECK(a.matrix[i] == th.matrix[i]);
    for (int i = 0; i < 3; ++i) CHECK(a.bias[i] == th.bias[i]);
    CHECK(a.offset[0] == th.offset[0]);

    WeightDelta ones;
    ones.mode = Augmentation::CBAM;
    ones.delta_m = Tensor::full({3}, 1.0);
    ones.delta_n = Tensor::full({4}, 1.0);
    HeadWeights ac = augment_weights(th, ones);
    for (int i = 0; i < 12; ++i) CHECK(ac.matrix[i] == th.matrix[i]);

    WeightDelta film;
    film.mode = Augmentation::FILM;
    film.gamma = Tensor::full({3, 4}, 1.0);
    film.beta = Tensor::zeros({3, 4});
    HeadWeights af = augment_weights(th, film);
    for (int i = 0; i < 12; ++i) CHECK(af.matrix[i] == th.matrix[i]);

    // CBAM worked example
    HeadWeights h2 = HeadWeights::zeros(2, 2);
    h2.matrix = Tensor::from({2, 2}, {1, 2, 3, 4});
    WeightDelta cb;
    cb.mode = Augmentation::CBAM;
    cb.delta_m = Tensor::from({2}, {2, 1});
    cb.delta_n = Tensor::from({2}, {1, 3});
    HeadWeights hc = augment_weights(h2, cb);
    CHECK(hc.matrix.m(0, 0) == 2.0);
    CHECK(hc.matrix.m(0, 1) == 12.0);
    CHECK(hc.matrix.m(1, 0) == 3.0);
    CHECK(hc.matrix.m(1, 1) == 12.0);

    // additive partition: matrix row-major, bias, offset
    WeightDelta add;
    add.mode = Augmentation::ADDITIVE;
    add.delta = Tensor::zeros({th.flat_size()});
    add.delta[1] = 0.25;             // matrix[0,1]
    add.delta[12 + 2] = -0.5;        // bias[2]
    add.delta[12 + 3] = 0.125;       // offset
    HeadWeights aa = augment_weights(th, add);
    CHECK(aa.matrix.m(0, 1) == doctest::Approx(th.matrix.m(0, 1) + 0.25));
    CHECK(aa.bias[2] == doctest::Approx(th.bias[2] - 0.5));
    CHECK(aa.offset[0] == doctest::Approx(th.offset[0] + 0.125));

    WeightDelta bad;
    bad.mode = Augmentation::ADDITIVE;
    bad.delta = Tensor::zeros({th.flat_size() + 1});
    CHECK_THROWS_AS(augment_weights(th, bad), ConfigError);
}

TEST_CASE("identity invariance: zero predictor reproduces base outputs bit-exactly") {
    Rng rng(49);
    Tensor m = rng.randn({5, 6, 6});
    std::vector<Label> ls(36, Label::NEG);
    ls[14] = ls[15] = ls[21] = Label::POS;
    LabelMap y = make_labels(ls);

    for (Augmentation mode :
         {Augmentation::ADDITIVE, Augmentation::CBAM, Augmentation::FILM}) {
        for (Branch branch : {Branch::CLS, Branch::REG}) {
            CLNetConfig cfg = toy_cfg(branch, mode);
            int out = branch == Branch::CLS ? 6 : 12;
            HeadWeights th = HeadWeights::make(out, 5, rng);
            th.bias = rng.randn({out});
            th.offset[0] = 0.2;
            CompactLatentNet net =
                CompactLatentNet::make(cfg, 5, delta_length(cfg, out, 5), rng);
            zero_fc3(net);

            HeadWeights th_a = adjust_head(m, y, net, th);
            Tensor base = head_forward(m, th);
            Tensor adj = adjusted_forward(m, th_a);
            REQUIRE(base.same_shape(adj));
            for (int i = 0; i < base.numel(); ++i) CHECK(base[i] == adj[i]);
        }
    }
}

TEST_CASE("adjusted_forward composes augment and head oracles") {
    Rng rng(50);
    Tensor m = rng.randn({4, 5, 5});
    std::vector<Label> ls(25, Label::NEG);
    ls[7] = ls[12] = Label::POS;
    LabelMap y = make_labels(ls);

    CLNetConfig cfg = toy_cfg(Branch::CLS);
    HeadWeights th = HeadWeights::make(6, 4, rng);
    CompactLatentNet net = CompactLatentNet::make(cfg, 4, delta_length(cfg, 6, 4), rng);

    Tensor mbar = adjust_features(m, net);
    LatentFeature c = latent_encode(mbar, y, Branch::CLS);
    WeightDelta d = predict_delta(c, net, 6, 4);
    HeadWeights th_a = augment_weights(th, d);

    Tensor a1 = adjusted_forward(m, th_a);
    Tensor a2 = head_forward(m, adjust_head(m, y, net, th));
    REQUIRE(a1.same_shape(a2));
    for (int i = 0; i < a1.numel(); ++i) CHECK(a1[i] == a2[i]);
    CHECK(a1.dim(0) == 6);

    // every additive component obeys the tanh bound
    for (int i = 0; i < d.delta.numel(); ++i) {
        CHECK(d.delta[i] > -1.0);
        CHECK(d.delta[i] < 1.0);
    }
}

TEST_CASE("fc_adjust: zero predictor identity, channel contract, linearity") {
    Rng rng(51);
    CLNetConfig cfg = toy_cfg(Branch::FC);

    Tensor inst = rng.randn({3, 8, 8});
    Tensor tmpl = rng.randn({3, 3, 3});
    double b = 0.35;
    Tensor s = similarity_map(inst, tmpl, b); // [1,6,6]

    std::vector<Label> ls(36, Label::NEG);
    ls[14] = ls[15] = Label::POS;
    LabelMap y = make_labels(ls);

    int dlen = tmpl.numel() + 1;
    CompactLatentNet net = CompactLatentNet::make(cfg, 1, dlen, rng);
    CHECK(net.in_channels() == 1);

    CompactLatentNet zeroed = net;
    zero_fc3(zeroed);
    FcAdjusted idn = fc_adjust(inst, s, y, tmpl, b, zeroed);
    CHECK(idn.b_a == b);
    for (int i = 0; i < tmpl.numel(); ++i) CHECK(idn.tmpl_a[i] == tmpl[i]);
    REQUIRE(idn.s_f.same_shape(s));
    for (int i = 0; i < s.numel(); ++i) CHECK(idn.s_f[i] == s[i]);

    // S_f - S == inst (*) dTmpl + db
    FcAdjusted adj = fc_adjust(inst, s, y, tmpl, b, net);
    Tensor dtmpl = adj.tmpl_a;
    dtmpl.axpy_(-1.0, tmpl);
    Tensor lin = similarity_map(inst, dtmpl, adj.b_a - b);
    for (int i = 0; i < s.numel(); ++i)
        CHECK(adj.s_f[i] - s[i] == doctest::Approx(lin[i]).epsilon(1e-9));

    // response-delta mode adjusts the map directly
    CLNetConfig rcfg = cfg;
    rcfg.fc_delta_mode = FcDeltaMode::RESPONSE;
    CompactLatentNet rnet = CompactLatentNet::make(rcfg, 1, s.numel() + 1, rng);
    CompactLatentNet rzero = rnet;
    zero_fc3(rzero);
    FcAdjusted ridn = fc_adjust(inst, s, y, tmpl, b, rzero);
    for (int i = 0; i < s.numel(); ++i) CHECK(ridn.s_f[i] == s[i]);
    FcAdjusted radj = fc_adjust(inst, s, y, tmpl, b, rnet);
    bool changed = false;
    for (int i = 0; i < s.numel(); ++i) changed = changed || radj.s_f[i] != s[i];
    CHECK(changed);

    CHECK_THROWS_AS(fc_adjust(inst, rng.randn({2, 6, 6}), y, tmpl, b, net), InputError);
}

TEST_CASE("full adjustment chain: gradients vs central differences") {
    Rng rng(52);
    CLNetConfig cfg = toy_cfg(Branch::CLS);
    int out = 4, in = 5;
    CompactLatentNet net = CompactLatentNet::make(cfg, in, delta_length(cfg, out, in), rng);

    Tensor m = rng.randn({in, 4, 4});
    std::vector<Label> ls(16, Label::NEG);
    ls[5] = ls[6] = ls[10] = Label::POS;
    LabelMap y = make_labels(ls);

    HeadWeights th = HeadWeights::make(out, in, rng);
    th.bias = rng.randn({out});
    th.offset[0] = 0.15;

    Tensor r = rng.randn({out, 4, 4}); // fixed projection to a scalar

    for (Augmentation mode :
         {Augmentation::ADDITIVE, Augmentation::CBAM, Augmentation::FILM}) {
        CLNetConfig mc = toy_cfg(Branch::CLS, mode);
        CompactLatentNet mnet =
            CompactLatentNet::make(mc, in, delta_length(mc, out, in), rng);
        auto build = [&](Tape& t, const std::vector<Var>& v) {
            HeadVars th1{v[1], v[2], v[3]};
            Var a = adjusted_map(t, v[0], y, mnet, th1, false, false);
            return t.sum(t.mul(a, t.input(r)));
        };
        double err =
            testutil::check_gradients(build, {m, th.matrix, th.bias, th.offset});
        CHECK(err < 1e-5);
    }

    // finite difference directly on a network parameter
    CLNetConfig ac = toy_cfg(Branch::CLS, Augmentation::ADDITIVE);
    CompactLatentNet pnet = CompactLatentNet::make(ac, in, delta_length(ac, out, in), rng);
    auto loss_of = [&]() {
        Tape t;
        HeadVars th1{t.input(th.matrix), t.input(th.bias), t.input(th.offset)};
        Var a = adjusted_map(t, t.input(m), y, pnet, th1, false, false);
        return t.value(t.sum(t.mul(a, t.input(r))))[0];
    };
    Tape t;
    HeadVars th1{t.input(th.matrix), t.input(th.bias), t.input(th.offset)};
    Var a = adjusted_map(t, t.input(m), y, pnet, th1, true, false);
    t.backward(t.sum(t.mul(a, t.input(r))));
    double* probe = &pnet.fc2.w[3];
    const Tensor* grad = nullptr;
    for (auto& [storage, g] : t.param_grads())
        if (storage == &pnet.fc2.w) grad = g;
    REQUIRE(grad != nullptr);
    double h = 1e-6, orig = *probe;
    *probe = orig + h;
    double fp = loss_of();
    *probe = orig - h;
    double fm = loss_of();
    *probe = orig;
    double fd = (fp - fm) / (2 * h);
    CHECK((*grad)[3] == doctest::Approx(fd).epsilon(1e-5));
}

TEST_CASE("analytic parameter counts equal instantiated counts") {
    Rng rng(53);
    for (Branch branch : {Branch::CLS, Branch::REG}) {
        CLNetConfig cfg = toy_cfg(branch);
        int out = branch == Branch::CLS ? 6 : 12;
        int dlen = delta_length(cfg, out, 7);
        CompactLatentNet net = CompactLatentNet::make(cfg, 7, dlen, rng);
        ParamBreakdown pb = analytic_params(cfg, 7, dlen);
        CHECK(pb.total() == net.param_count());

        NamedTensors named;
        net.params("clnet", named);
        int counted = 0;
        for (auto& [name, ten] : named) counted += ten->numel();
        CHECK(counted == pb.total());
    }
}

TEST_CASE("full-dims parameter accounting approaches the published delta") {
    CLNetConfig cls; // c-bar 128, hidden 256
    CLNetConfig reg = cls;
    reg.branch = Branch::REG;
    int cls_total = analytic_params(cls, 256, delta_length(cls, 10, 256)).total();
    int reg_total = analytic_params(reg, 256, delta_length(reg, 20, 256)).total();
    CHECK(cls_total == 924555);
    CHECK(reg_total == 1717269);
    double three_level = 3.0 * (cls_total + reg_total);
    CHECK(std::fabs(three_level - 7.872e6) / 7.872e6 < 0.15);
}
