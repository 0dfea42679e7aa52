#include "clnet/latent_net.hpp"

#include <cmath>

#include "clnet/errors.hpp"

namespace clnet {

namespace {

// Map anchor-indexed labels onto spatial positions of the map (anchor index
// = cell*k + a), keeping duplicates so every anchor contributes one sample.
struct SetPositions {
    std::vector<int> pos, neg;
};

SetPositions split_positions(const Tensor& mbar, const LabelMap& labels) {
    int cells = mbar.dim(1) * mbar.dim(2);
    int n = labels.size();
    if (cells <= 0 || n % cells != 0)
        throw InputError("latent encode: label count " + std::to_string(n) +
                         " is not a multiple of map cells " + std::to_string(cells));
    int k = n / cells;
    SetPositions sp;
    for (int i = 0; i < n; ++i) {
        if (labels[i] == Label::POS) sp.pos.push_back(i / k);
        else if (labels[i] == Label::NEG) sp.neg.push_back(i / k);
    }
    return sp;
}

void mean_std(const Tensor& mbar, const std::vector<int>& positions, double* mu,
              double* sigma) {
    int c = mbar.dim(0);
    int hw = mbar.dim(1) * mbar.dim(2);
    int n = static_cast<int>(positions.size());
    for (int ci = 0; ci < c; ++ci) {
        const double* mp = mbar.data() + static_cast<size_t>(ci) * hw;
        double m = 0.0;
        for (int p : positions) m += mp[p];
        m /= n;
        double v = 0.0;
        for (int p : positions) {
            double d = mp[p] - m;
            v += d * d;
        }
        mu[ci] = m;
        sigma[ci] = std::sqrt(v / n);
    }
}

Tensor fc_chain(const Tensor& c, const CompactLatentNet& net) {
    Tensor y = net.fc1.forward(c);
    for (int i = 0; i < y.numel(); ++i) y[i] = std::max(0.0, y[i]);
    y = net.fc2.forward(y);
    for (int i = 0; i < y.numel(); ++i) y[i] = std::max(0.0, y[i]);
    y = net.fc3.forward(y);
    for (int i = 0; i < y.numel(); ++i) y[i] = std::tanh(y[i]);
    return y;
}

} // namespace

int ga_out_channels(const CLNetConfig& cfg) {
    return cfg.branch == Branch::REG ? 2 * cfg.latent_channels : cfg.latent_channels;
}

int latent_length(const CLNetConfig& cfg) { return 4 * cfg.latent_channels; }

int delta_length(const CLNetConfig& cfg, int head_out, int head_in) {
    switch (cfg.augmentation) {
    case Augmentation::ADDITIVE: return head_out * (head_in + 1) + 1;
    case Augmentation::CBAM: return head_out + head_in;
    case Augmentation::FILM: return 2 * head_out * head_in;
    }
    throw ConfigError("unknown augmentation mode");
}

CompactLatentNet CompactLatentNet::make(const CLNetConfig& cfg, int in_channels,
                                        int delta_size, Rng& rng) {
    CompactLatentNet net;
    net.cfg = cfg;
    int w = ga_out_channels(cfg);
    net.conv1 = ConvBlock::make(in_channels, w, 1, 1, rng);
    net.conv2 = ConvBlock::make(w, w, 1, 1, rng);
    net.conv3 = ConvBlock::make(w, w, 1, 1, rng);
    net.fc1 = Linear::make(latent_length(cfg), cfg.hidden, rng);
    net.fc2 = Linear::make(cfg.hidden, cfg.hidden, rng);
    net.fc3 = Linear::make(cfg.hidden, delta_size, rng);
    return net;
}

void CompactLatentNet::params(const std::string& prefix, NamedTensors& out) {
    conv1.params(prefix + ".conv1", out);
    conv2.params(prefix + ".conv2", out);
    conv3.params(prefix + ".conv3", out);
    fc1.params(prefix + ".fc1", out);
    fc2.params(prefix + ".fc2", out);
    fc3.params(prefix + ".fc3", out);
}

void CompactLatentNet::buffers(const std::string& prefix, NamedTensors& out) {
    conv1.buffers(prefix + ".conv1", out);
    conv2.buffers(prefix + ".conv2", out);
    conv3.buffers(prefix + ".conv3", out);
}

int CompactLatentNet::param_count() const {
    return conv1.param_count() + conv2.param_count() + conv3.param_count() +
           fc1.param_count() + fc2.param_count() + fc3.param_count();
}

Tensor adjust_features(const Tensor& m, const CompactLatentNet& net) {
    if (m.rank() != 3 || m.dim(0) != net.in_channels())
        throw ConfigError("adjust_features: map has " + std::to_string(m.dim(0)) +
                          " channels, net expects " + std::to_string(net.in_channels()));
    return net.conv3.forward(net.conv2.forward(net.conv1.forward(m)));
}

LatentFeature latent_encode(const Tensor& mbar, const LabelMap& labels, Branch branch) {
    SetPositions sp = split_positions(mbar, labels);
    if (sp.pos.empty())
        throw EncoderInputError("latent encode: positive set is empty");
    if (branch != Branch::REG && sp.neg.empty())
        throw EncoderInputError("latent encode: negative set is empty");

    int c = mbar.dim(0);
    LatentFeature f;
    if (branch == Branch::REG) {
        f.values = Tensor({2 * c});
        mean_std(mbar, sp.pos, f.values.data(), f.values.data() + c);
        f.part_lengths = {c, c};
    } else {
        f.values = Tensor({4 * c});
        mean_std(mbar, sp.pos, f.values.data(), f.values.data() + c);
        mean_std(mbar, sp.neg, f.values.data() + 2 * c, f.values.data() + 3 * c);
        f.part_lengths = {c, c, c, c};
    }
    return f;
}

WeightDelta predict_delta(const LatentFeature& c, const CompactLatentNet& net,
                          int head_out, int head_in) {
    if (c.size() != net.fc1.in_dim())
        throw ConfigError("predict_delta: latent length " + std::to_string(c.size()) +
                          " does not match FC1 input " + std::to_string(net.fc1.in_dim()));
    int expect = delta_length(net.cfg, head_out, head_in);
    if (net.delta_size() != expect)
        throw ConfigError("predict_delta: FC3 outputs " + std::to_string(net.delta_size()) +
                          ", head needs " + std::to_string(expect));
    Tensor raw = fc_chain(c.values, net);

    WeightDelta d;
    d.mode = net.cfg.augmentation;
    switch (net.cfg.augmentation) {
    case Augmentation::ADDITIVE:
        d.delta = std::move(raw);
        break;
    case Augmentation::CBAM:
        d.delta_m = Tensor({head_out});
        d.delta_n = Tensor({head_in});
        for (int i = 0; i < head_out; ++i) d.delta_m[i] = 1.0 + raw[i];
        for (int i = 0; i < head_in; ++i) d.delta_n[i] = 1.0 + raw[head_out + i];
        break;
    case Augmentation::FILM:
        d.gamma = Tensor({head_out, head_in});
        d.beta = Tensor({head_out, head_in});
        for (int i = 0; i < head_out * head_in; ++i) {
            d.gamma[i] = 1.0 + raw[i];
            d.beta[i] = raw[head_out * head_in + i];
        }
        break;
    }
    return d;
}

HeadWeights augment_weights(const HeadWeights& th1, const WeightDelta& d) {
    int out = th1.out_dim(), in = th1.in_dim();
    HeadWeights a;
    a.matrix = th1.matrix;
    a.bias = th1.bias;
    a.offset = th1.offset;

    switch (d.mode) {
    case Augmentation::ADDITIVE: {
        if (d.delta.numel() != th1.flat_size())
            throw ConfigError("augment: delta length " + std::to_string(d.delta.numel()) +
                              " does not match head size " + std::to_string(th1.flat_size()));
        for (int i = 0; i < out * in; ++i) a.matrix[i] += d.delta[i];
        for (int i = 0; i < out; ++i) a.bias[i] += d.delta[out * in + i];
        a.offset[0] += d.delta[out * in + out];
        break;
    }
    case Augmentation::CBAM: {
        if (d.delta_m.numel() != out || d.delta_n.numel() != in)
            throw ConfigError("augment: CBAM vector shape mismatch");
        for (int r = 0; r < out; ++r)
            for (int c = 0; c < in; ++c) a.matrix[r * in + c] *= d.delta_m[r] * d.delta_n[c];
        break;
    }
    case Augmentation::FILM: {
        if (d.gamma.numel() != out * in || d.beta.numel() != out * in)
            throw ConfigError("augment: FILM matrix shape mismatch");
        for (int i = 0; i < out * in; ++i)
            a.matrix[i] = a.matrix[i] * d.gamma[i] + d.beta[i];
        break;
    }
    }
    return a;
}

Tensor adjusted_forward(const Tensor& m, const HeadWeights& th_a) {
    return head_forward(m, th_a);
}

HeadWeights adjust_head(const Tensor& m, const LabelMap& labels,
                        const CompactLatentNet& net, const HeadWeights& th1) {
    Tensor mbar = adjust_features(m, net);
    LatentFeature c = latent_encode(mbar, labels, net.cfg.branch);
    WeightDelta d = predict_delta(c, net, th1.out_dim(), th1.in_dim());
    return augment_weights(th1, d);
}

FcAdjusted fc_adjust(const Tensor& inst, const Tensor& s, const LabelMap& labels,
                     const Tensor& tmpl, double b, const CompactLatentNet& net) {
    if (s.rank() != 3 || s.dim(0) != 1)
        throw InputError("fc_adjust: response must be single-channel");
    Tensor mbar = adjust_features(s, net);
    LatentFeature c = latent_encode(mbar, labels, Branch::FC);
    if (c.size() != net.fc1.in_dim())
        throw ConfigError("fc_adjust: latent length mismatch");
    Tensor raw = fc_chain(c.values, net);

    FcAdjusted adj;
    if (net.cfg.fc_delta_mode == FcDeltaMode::TEMPLATE) {
        if (raw.numel() != tmpl.numel() + 1)
            throw ConfigError("fc_adjust: FC3 outputs " + std::to_string(raw.numel()) +
                              ", template mode needs " + std::to_string(tmpl.numel() + 1));
        adj.tmpl_a = tmpl;
        for (int i = 0; i < tmpl.numel(); ++i) adj.tmpl_a[i] += raw[i];
        adj.b_a = b + raw[tmpl.numel()];
        adj.s_f = similarity_map(inst, adj.tmpl_a, adj.b_a);
    } else {
        if (raw.numel() != s.numel() + 1)
            throw ConfigError("fc_adjust: FC3 outputs " + std::to_string(raw.numel()) +
                              ", response mode needs " + std::to_string(s.numel() + 1));
        double db = raw[s.numel()];
        adj.tmpl_a = tmpl;
        adj.b_a = b + db;
        adj.s_f = s;
        for (int i = 0; i < s.numel(); ++i) adj.s_f[i] += raw[i] + db;
    }
    return adj;
}

Var adjust_features(Tape& t, Var m, CompactLatentNet& net, bool train_params,
                    bool batch_stats) {
    Var y = net.conv1.forward(t, m, train_params, batch_stats);
    y = net.conv2.forward(t, y, train_params, batch_stats);
    return net.conv3.forward(t, y, train_params, batch_stats);
}

Var latent_encode(Tape& t, Var mbar, const LabelMap& labels, Branch branch) {
    SetPositions sp = split_positions(t.value(mbar), labels);
    if (sp.pos.empty())
        throw EncoderInputError("latent encode: positive set is empty");
    if (branch != Branch::REG && sp.neg.empty())
        throw EncoderInputError("latent encode: negative set is empty");
    Var pos = t.set_mean_std(mbar, sp.pos);
    if (branch == Branch::REG) return pos;
    return t.concat({pos, t.set_mean_std(mbar, sp.neg)});
}

Var predict_delta_raw(Tape& t, Var c, CompactLatentNet& net, bool train_params) {
    Var y = t.relu(net.fc1.forward(t, c, train_params));
    y = t.relu(net.fc2.forward(t, y, train_params));
    return t.tanh(net.fc3.forward(t, y, train_params));
}

HeadVars augment_weights(Tape& t, HeadVars th1, Var raw, Augmentation mode) {
    int out = t.value(th1.matrix).dim(0);
    int in = t.value(th1.matrix).dim(1);
    HeadVars a;
    switch (mode) {
    case Augmentation::ADDITIVE:
        a.matrix = t.add(th1.matrix, t.reshape(t.slice(raw, 0, out * in), {out, in}));
        a.bias = t.add(th1.bias, t.slice(raw, out * in, out));
        a.offset = t.add(th1.offset, t.slice(raw, out * in + out, 1));
        break;
    case Augmentation::CBAM: {
        Var one = t.input(Tensor::scalar(1.0));
        Var dm = t.add_scalar(t.slice(raw, 0, out), one);
        Var dn = t.add_scalar(t.slice(raw, out, in), one);
        a.matrix = t.scale_cols(t.scale_rows(th1.matrix, dm), dn);
        a.bias = th1.bias;
        a.offset = th1.offset;
        break;
    }
    case Augmentation::FILM: {
        Var one = t.input(Tensor::scalar(1.0));
        Var gamma = t.add_scalar(t.reshape(t.slice(raw, 0, out * in), {out, in}), one);
        Var beta = t.reshape(t.slice(raw, out * in, out * in), {out, in});
        a.matrix = t.add(t.mul(th1.matrix, gamma), beta);
        a.bias = th1.bias;
        a.offset = th1.offset;
        break;
    }
    }
    return a;
}

Var adjusted_map(Tape& t, Var m, const LabelMap& labels, CompactLatentNet& net,
                 HeadVars th1, bool train_params, bool batch_stats) {
    Var mbar = adjust_features(t, m, net, train_params, batch_stats);
    Var c = latent_encode(t, mbar, labels, net.cfg.branch);
    Var raw = predict_delta_raw(t, c, net, train_params);
    HeadVars th_a = augment_weights(t, th1, raw, net.cfg.augmentation);
    return head_forward(t, m, th_a.matrix, th_a.bias, th_a.offset);
}

ParamBreakdown analytic_params(const CLNetConfig& cfg, int in_channels, int delta_size) {
    ParamBreakdown p;
    int w = ga_out_channels(cfg);
    auto conv_block = [](int ci, int co) { return ci * co + co + 2 * co; };
    p.conv1 = conv_block(in_channels, w);
    p.conv2 = conv_block(w, w);
    p.conv3 = conv_block(w, w);
    p.fc1 = latent_length(cfg) * cfg.hidden + cfg.hidden;
    p.fc2 = cfg.hidden * cfg.hidden + cfg.hidden;
    p.fc3 = cfg.hidden * delta_size + delta_size;
    return p;
}

} // namespace clnet
