#include "clnet/nn.hpp"

#include <cmath>

#include "clnet/errors.hpp"

namespace clnet {

Conv2d Conv2d::make(int in_ch, int out_ch, int k, int stride, Rng& rng) {
    Conv2d c;
    double std = std::sqrt(2.0 / (in_ch * k * k));
    c.w = rng.randn({out_ch, in_ch, k, k}, std);
    c.b = Tensor::zeros({out_ch});
    c.stride = stride;
    return c;
}

Tensor Conv2d::forward(const Tensor& x) const {
    if (x.rank() != 3 || x.dim(0) != in_channels())
        throw InputError("conv: input shape " + x.shape_str() + " does not match " +
                         std::to_string(in_channels()) + " channels");
    int cin = in_channels(), cout = out_channels(), k = kernel();
    int h = x.dim(1), wdt = x.dim(2);
    if (k > h || k > wdt) throw InputError("conv: kernel larger than input");
    int oh = (h - k) / stride + 1;
    int ow = (wdt - k) / stride + 1;

    Tensor out({cout, oh, ow});
    for (int o = 0; o < cout; ++o)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double acc = b[o];
                for (int ci = 0; ci < cin; ++ci)
                    for (int ky = 0; ky < k; ++ky) {
                        const double* xr = x.data() +
                            (static_cast<size_t>(ci) * h + oy * stride + ky) * wdt +
                            ox * stride;
                        const double* wr = w.data() +
                            ((static_cast<size_t>(o) * cin + ci) * k + ky) * k;
                        for (int kx = 0; kx < k; ++kx) acc += wr[kx] * xr[kx];
                    }
                out.at(o, oy, ox) = acc;
            }
    return out;
}

Var Conv2d::forward(Tape& t, Var x, bool train_params) {
    Var wv = train_params ? t.param(&w) : t.input(w);
    Var bv = train_params ? t.param(&b) : t.input(b);
    if (kernel() == 1 && stride == 1)
        return t.pointwise_affine(x, t.reshape(wv, {out_channels(), in_channels()}), bv);
    return t.conv2d(x, wv, bv, stride);
}

void Conv2d::params(const std::string& prefix, NamedTensors& out) {
    out.emplace_back(prefix + ".w", &w);
    out.emplace_back(prefix + ".b", &b);
}

Linear Linear::make(int in_dim, int out_dim, Rng& rng) {
    Linear l;
    l.w = rng.randn({out_dim, in_dim}, std::sqrt(2.0 / in_dim));
    l.b = Tensor::zeros({out_dim});
    return l;
}

Tensor Linear::forward(const Tensor& x) const {
    if (x.numel() != in_dim())
        throw InputError("linear: input length " + std::to_string(x.numel()) +
                         " does not match " + std::to_string(in_dim()));
    Tensor out({out_dim()});
    for (int r = 0; r < out_dim(); ++r) {
        double acc = b[r];
        const double* wr = w.data() + static_cast<size_t>(r) * in_dim();
        for (int c = 0; c < in_dim(); ++c) acc += wr[c] * x[c];
        out[r] = acc;
    }
    return out;
}

Var Linear::forward(Tape& t, Var x, bool train_params) {
    Var wv = train_params ? t.param(&w) : t.input(w);
    Var bv = train_params ? t.param(&b) : t.input(b);
    return t.linear(x, wv, bv);
}

void Linear::params(const std::string& prefix, NamedTensors& out) {
    out.emplace_back(prefix + ".w", &w);
    out.emplace_back(prefix + ".b", &b);
}

BatchNorm BatchNorm::make(int channels) {
    BatchNorm bn;
    bn.gamma = Tensor::full({channels}, 1.0);
    bn.beta = Tensor::zeros({channels});
    bn.running_mean = Tensor::zeros({channels});
    bn.running_var = Tensor::full({channels}, 1.0);
    return bn;
}

Tensor BatchNorm::forward(const Tensor& x) const {
    if (x.rank() != 3 || x.dim(0) != channels())
        throw InputError("batchnorm: channel mismatch");
    int c = channels(), hw = x.dim(1) * x.dim(2);
    Tensor out(x.shape());
    for (int ci = 0; ci < c; ++ci) {
        double inv = 1.0 / std::sqrt(running_var[ci] + eps);
        const double* xp = x.data() + static_cast<size_t>(ci) * hw;
        double* op = out.data() + static_cast<size_t>(ci) * hw;
        for (int p = 0; p < hw; ++p)
            op[p] = gamma[ci] * (xp[p] - running_mean[ci]) * inv + beta[ci];
    }
    return out;
}

Var BatchNorm::forward(Tape& t, Var x, bool train_params, bool batch_stats) {
    Var g = train_params ? t.param(&gamma) : t.input(gamma);
    Var b = train_params ? t.param(&beta) : t.input(beta);
    if (!batch_stats) return t.batchnorm(x, g, b, running_mean, running_var, false, eps);
    Tensor bm, bv;
    Var out = t.batchnorm(x, g, b, running_mean, running_var, true, eps, &bm, &bv);
    for (int ci = 0; ci < channels(); ++ci) {
        running_mean[ci] = (1.0 - momentum) * running_mean[ci] + momentum * bm[ci];
        running_var[ci] = (1.0 - momentum) * running_var[ci] + momentum * bv[ci];
    }
    return out;
}

void BatchNorm::params(const std::string& prefix, NamedTensors& out) {
    out.emplace_back(prefix + ".gamma", &gamma);
    out.emplace_back(prefix + ".beta", &beta);
}

void BatchNorm::buffers(const std::string& prefix, NamedTensors& out) {
    out.emplace_back(prefix + ".running_mean", &running_mean);
    out.emplace_back(prefix + ".running_var", &running_var);
}

ConvBlock ConvBlock::make(int in_ch, int out_ch, int k, int stride, Rng& rng) {
    ConvBlock blk;
    blk.conv = Conv2d::make(in_ch, out_ch, k, stride, rng);
    blk.bn = BatchNorm::make(out_ch);
    return blk;
}

Tensor ConvBlock::forward(const Tensor& x) const {
    Tensor y = bn.forward(conv.forward(x));
    for (int i = 0; i < y.numel(); ++i) y[i] = std::max(0.0, y[i]);
    return y;
}

Var ConvBlock::forward(Tape& t, Var x, bool train_params, bool batch_stats) {
    return t.relu(bn.forward(t, conv.forward(t, x, train_params), train_params, batch_stats));
}

void ConvBlock::params(const std::string& prefix, NamedTensors& out) {
    conv.params(prefix + ".conv", out);
    bn.params(prefix + ".bn", out);
}

void ConvBlock::buffers(const std::string& prefix, NamedTensors& out) {
    bn.buffers(prefix + ".bn", out);
}

} // namespace clnet
