#include "clnet/siamese.hpp"

#include <cmath>

#include "clnet/errors.hpp"

namespace clnet {

HeadWeights HeadWeights::make(int out_dim, int in_dim, Rng& rng) {
    HeadWeights h;
    h.matrix = rng.randn({out_dim, in_dim}, std::sqrt(2.0 / in_dim));
    h.bias = Tensor::zeros({out_dim});
    h.offset = Tensor::zeros({1});
    return h;
}

HeadWeights HeadWeights::zeros(int out_dim, int in_dim) {
    HeadWeights h;
    h.matrix = Tensor::zeros({out_dim, in_dim});
    h.bias = Tensor::zeros({out_dim});
    h.offset = Tensor::zeros({1});
    return h;
}

void HeadWeights::params(const std::string& prefix, NamedTensors& out) {
    out.emplace_back(prefix + ".matrix", &matrix);
    out.emplace_back(prefix + ".bias", &bias);
    out.emplace_back(prefix + ".offset", &offset);
}

Tensor head_forward(const Tensor& m, const HeadWeights& th) {
    if (m.rank() != 3 || m.dim(0) != th.in_dim())
        throw InputError("head: map channels " + std::to_string(m.dim(0)) +
                         " do not match head in_dim " + std::to_string(th.in_dim()));
    int cin = th.in_dim(), cout = th.out_dim();
    int hw = m.dim(1) * m.dim(2);
    Tensor out({cout, m.dim(1), m.dim(2)});
    for (int o = 0; o < cout; ++o) {
        double base = th.bias[o] + th.offset[0];
        const double* wr = th.matrix.data() + static_cast<size_t>(o) * cin;
        double* op = out.data() + static_cast<size_t>(o) * hw;
        for (int p = 0; p < hw; ++p) op[p] = base;
        for (int ci = 0; ci < cin; ++ci) {
            const double* mp = m.data() + static_cast<size_t>(ci) * hw;
            double wc = wr[ci];
            if (wc == 0.0) continue;
            for (int p = 0; p < hw; ++p) op[p] += wc * mp[p];
        }
    }
    return out;
}

Var head_forward(Tape& t, Var m, Var matrix, Var bias, Var offset) {
    return t.add_scalar(t.pointwise_affine(m, matrix, bias), offset);
}

Tensor dw_xcorr(const Tensor& x, const Tensor& z) {
    if (x.rank() != 3 || z.rank() != 3 || x.dim(0) != z.dim(0))
        throw InputError("dw_xcorr: channel mismatch");
    int c = x.dim(0), hx = x.dim(1), wx = x.dim(2);
    int hz = z.dim(1), wz = z.dim(2);
    if (hz > hx || wz > wx) throw InputError("dw_xcorr: kernel larger than instance");
    int oh = hx - hz + 1, ow = wx - wz + 1;
    Tensor out({c, oh, ow});
    for (int ci = 0; ci < c; ++ci)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double acc = 0.0;
                for (int ky = 0; ky < hz; ++ky) {
                    const double* xr = x.data() + (static_cast<size_t>(ci) * hx + oy + ky) * wx + ox;
                    const double* zr = z.data() + (static_cast<size_t>(ci) * hz + ky) * wz;
                    for (int kx = 0; kx < wz; ++kx) acc += xr[kx] * zr[kx];
                }
                out.at(ci, oy, ox) = acc;
            }
    return out;
}

Tensor similarity_map(const Tensor& inst, const Tensor& tmpl, double b) {
    if (inst.rank() != 3 || tmpl.rank() != 3 || inst.dim(0) != tmpl.dim(0))
        throw InputError("similarity: channel mismatch");
    if (tmpl.dim(1) > inst.dim(1) || tmpl.dim(2) > inst.dim(2))
        throw InputError("similarity: template larger than instance");
    Tensor per_ch = dw_xcorr(inst, tmpl);
    int hw = per_ch.dim(1) * per_ch.dim(2);
    Tensor out({1, per_ch.dim(1), per_ch.dim(2)});
    for (int p = 0; p < hw; ++p) out[p] = b;
    for (int ci = 0; ci < per_ch.dim(0); ++ci) {
        const double* cp = per_ch.data() + static_cast<size_t>(ci) * hw;
        for (int p = 0; p < hw; ++p) out[p] += cp[p];
    }
    return out;
}

EmbedNet EmbedNet::make(int in_ch, const std::vector<int>& widths,
                        const std::vector<int>& strides, Rng& rng) {
    if (widths.empty() || widths.size() != strides.size())
        throw ConfigError("embed: widths/strides length mismatch");
    EmbedNet net;
    int ch = in_ch;
    for (size_t i = 0; i < widths.size(); ++i) {
        net.blocks.push_back(ConvBlock::make(ch, widths[i], 3, strides[i], rng));
        ch = widths[i];
    }
    return net;
}

int EmbedNet::out_size(int in_size) const {
    int s = in_size;
    for (const ConvBlock& blk : blocks) s = blk.out_size(s);
    return s;
}

Tensor EmbedNet::forward(const Tensor& img) const {
    Tensor y = img;
    for (const ConvBlock& blk : blocks) y = blk.forward(y);
    return y;
}

Var EmbedNet::forward(Tape& t, Var img, bool train_params, bool batch_stats) {
    Var y = img;
    for (ConvBlock& blk : blocks) y = blk.forward(t, y, train_params, batch_stats);
    return y;
}

void EmbedNet::params(const std::string& prefix, NamedTensors& out) {
    for (size_t i = 0; i < blocks.size(); ++i)
        blocks[i].params(prefix + ".b" + std::to_string(i), out);
}

void EmbedNet::buffers(const std::string& prefix, NamedTensors& out) {
    for (size_t i = 0; i < blocks.size(); ++i)
        blocks[i].buffers(prefix + ".b" + std::to_string(i), out);
}

BranchStack BranchStack::make(int embed_ch, int hidden, int out_dim, Rng& rng) {
    BranchStack b;
    b.alpha_fea = ConvBlock::make(embed_ch, hidden, 1, 1, rng);
    b.alpha_ker = ConvBlock::make(embed_ch, hidden, 1, 1, rng);
    b.head0 = ConvBlock::make(hidden, hidden, 1, 1, rng);
    b.head1 = HeadWeights::make(out_dim, hidden, rng);
    return b;
}

Tensor BranchStack::hidden_map(const Tensor& feat_x, const Tensor& feat_z) const {
    return head0.forward(dw_xcorr(alpha_fea.forward(feat_x), alpha_ker.forward(feat_z)));
}

Var BranchStack::hidden_map(Tape& t, Var feat_x, Var feat_z, bool train_params,
                            bool batch_stats) {
    Var fx = alpha_fea.forward(t, feat_x, train_params, batch_stats);
    Var fz = alpha_ker.forward(t, feat_z, train_params, batch_stats);
    return head0.forward(t, t.dw_xcorr(fx, fz), train_params, batch_stats);
}

void BranchStack::params(const std::string& prefix, NamedTensors& out) {
    alpha_fea.params(prefix + ".alpha_fea", out);
    alpha_ker.params(prefix + ".alpha_ker", out);
    head0.params(prefix + ".head0", out);
    head1.params(prefix + ".head1", out);
}

void BranchStack::buffers(const std::string& prefix, NamedTensors& out) {
    alpha_fea.buffers(prefix + ".alpha_fea", out);
    alpha_ker.buffers(prefix + ".alpha_ker", out);
    head0.buffers(prefix + ".head0", out);
}

RpnModel RpnModel::make(const BackboneConfig& cfg, Rng& rng) {
    RpnModel m;
    m.cfg = cfg;
    m.embed = EmbedNet::make(1, cfg.embed_widths, cfg.embed_strides, rng);
    if (m.embed.out_channels() != cfg.embed_channels)
        throw ConfigError("model: embed_widths must end at embed_channels");
    m.cls = BranchStack::make(cfg.embed_channels, cfg.head_hidden, cfg.cls_out(), rng);
    m.loc = BranchStack::make(cfg.embed_channels, cfg.head_hidden, cfg.loc_out(), rng);
    return m;
}

std::pair<Tensor, Tensor> RpnModel::hidden_maps(const Tensor& feat_x,
                                                const Tensor& feat_z) const {
    return {cls.hidden_map(feat_x, feat_z), loc.hidden_map(feat_x, feat_z)};
}

int RpnModel::response_size() const {
    return embed.out_size(cfg.search_size) - embed.out_size(cfg.template_size) + 1;
}

void RpnModel::params(NamedTensors& out) {
    embed.params("embed", out);
    cls.params("cls", out);
    loc.params("loc", out);
}

void RpnModel::buffers(NamedTensors& out) {
    embed.buffers("embed", out);
    cls.buffers("cls", out);
    loc.buffers("loc", out);
}

int RpnModel::param_count() const {
    NamedTensors named;
    const_cast<RpnModel*>(this)->params(named);
    int n = 0;
    for (auto& [name, t] : named) n += t->numel();
    return n;
}

FcModel FcModel::make(const BackboneConfig& cfg, Rng& rng) {
    FcModel m;
    m.cfg = cfg;
    m.embed = EmbedNet::make(1, cfg.embed_widths, cfg.embed_strides, rng);
    m.b = Tensor::zeros({1});
    return m;
}

void FcModel::params(NamedTensors& out) {
    embed.params("embed", out);
    out.emplace_back("b", &b);
}

void FcModel::buffers(NamedTensors& out) { embed.buffers("embed", out); }

} // namespace clnet
