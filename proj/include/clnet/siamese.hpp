#pragma once

#include <utility>
#include <vector>

#include "clnet/nn.hpp"

namespace clnet {

struct BackboneConfig {
    int embed_channels = 16;  // c
    int map_size = 13;        // nominal response cells (w = h)
    int head_hidden = 24;     // channels of the hidden map M
    int anchors_per_cell = 5; // k
    int levels = 1;
    int template_size = 24; // px
    int search_size = 48;   // px
    double anchor_stride = 2.0;
    std::vector<double> anchor_scales{8.0};
    std::vector<double> anchor_ratios{1.0 / 3.0, 0.5, 1.0, 2.0, 3.0};
    std::vector<int> embed_widths{12, 16, 16};
    std::vector<int> embed_strides{2, 1, 1};

    int cls_out() const { return 2 * anchors_per_cell; }
    int loc_out() const { return 4 * anchors_per_cell; }
};

// Last-layer head: per-position affine map plus a scalar output offset.
// Flattened size out*(in+1)+1 = matrix row-major, then bias, then offset.
struct HeadWeights {
    Tensor matrix; // [out,in]
    Tensor bias;   // [out]
    Tensor offset; // [1]

    static HeadWeights make(int out_dim, int in_dim, Rng& rng);
    static HeadWeights zeros(int out_dim, int in_dim);
    int out_dim() const { return matrix.dim(0); }
    int in_dim() const { return matrix.dim(1); }
    int flat_size() const { return out_dim() * (in_dim() + 1) + 1; }

    void params(const std::string& prefix, NamedTensors& out);
    int param_count() const { return flat_size(); }
};

// A = head1(M; th): out[o,y,x] = sum_i matrix[o,i]*M[i,y,x] + bias[o] + offset
Tensor head_forward(const Tensor& m, const HeadWeights& th);
Var head_forward(Tape& t, Var m, Var matrix, Var bias, Var offset);

// Depth-wise valid cross-correlation of x against kernel z.
Tensor dw_xcorr(const Tensor& x, const Tensor& z);

// Single-channel similarity response: S = x (*) z + b, summed over channels.
Tensor similarity_map(const Tensor& inst, const Tensor& tmpl, double b);

struct EmbedNet {
    std::vector<ConvBlock> blocks;

    static EmbedNet make(int in_ch, const std::vector<int>& widths,
                         const std::vector<int>& strides, Rng& rng);
    int out_channels() const { return blocks.back().conv.out_channels(); }
    int out_size(int in_size) const;

    Tensor forward(const Tensor& img) const;
    Var forward(Tape& t, Var img, bool train_params, bool batch_stats);

    void params(const std::string& prefix, NamedTensors& out);
    void buffers(const std::string& prefix, NamedTensors& out);
};

// One correlation branch: 1x1 blocks on both features, depth-wise
// correlation, one more 1x1 block to the hidden map M, then the exposed
// last layer head1.
struct BranchStack {
    ConvBlock alpha_fea; // search-side 1x1
    ConvBlock alpha_ker; // template-side 1x1
    ConvBlock head0;     // post-correlation 1x1
    HeadWeights head1;

    static BranchStack make(int embed_ch, int hidden, int out_dim, Rng& rng);
    Tensor hidden_map(const Tensor& feat_x, const Tensor& feat_z) const;
    Var hidden_map(Tape& t, Var feat_x, Var feat_z, bool train_params, bool batch_stats);

    void params(const std::string& prefix, NamedTensors& out);
    void buffers(const std::string& prefix, NamedTensors& out);
};

struct RpnModel {
    BackboneConfig cfg;
    EmbedNet embed;
    BranchStack cls, loc;

    static RpnModel make(const BackboneConfig& cfg, Rng& rng);
    Tensor embed_patch(const Tensor& img) const { return embed.forward(img); }
    // (M_cls, M_loc) from already-embedded features
    std::pair<Tensor, Tensor> hidden_maps(const Tensor& feat_x, const Tensor& feat_z) const;
    int response_size() const; // cells per side for configured patch sizes

    void params(NamedTensors& out);
    void buffers(NamedTensors& out);
    int param_count() const;
};

struct FcModel {
    BackboneConfig cfg;
    EmbedNet embed;
    Tensor b; // [1] correlation offset

    static FcModel make(const BackboneConfig& cfg, Rng& rng);
    Tensor embed_patch(const Tensor& img) const { return embed.forward(img); }
    Tensor respond(const Tensor& feat_x, const Tensor& feat_z) const {
        return similarity_map(feat_x, feat_z, b[0]);
    }

    void params(NamedTensors& out);
    void buffers(NamedTensors& out);
};

} // namespace clnet
