#pragma once

#include <string>
#include <vector>

#include "clnet/geometry.hpp"
#include "clnet/nn.hpp"
#include "clnet/siamese.hpp"

namespace clnet {

enum class Augmentation { ADDITIVE, CBAM, FILM };
enum class Branch { CLS, REG, FC };
enum class FcDeltaMode { TEMPLATE, RESPONSE };

struct CLNetConfig {
    int latent_channels = 128; // c-bar
    int hidden = 256;          // c-dot
    Augmentation augmentation = Augmentation::ADDITIVE;
    Branch branch = Branch::CLS;
    FcDeltaMode fc_delta_mode = FcDeltaMode::TEMPLATE;
};

// Adjusted-map channel count: the regression branch carries twice the width.
int ga_out_channels(const CLNetConfig& cfg);
// Encoded feature length: 4*c-bar for every branch.
int latent_length(const CLNetConfig& cfg);
// FC3 output length for a head of the given dims under the configured mode.
int delta_length(const CLNetConfig& cfg, int head_out, int head_in);

struct LatentFeature {
    Tensor values;
    std::vector<int> part_lengths; // (mu+, sigma+, mu-, sigma-) or (mu+, sigma+)
    int size() const { return values.numel(); }
};

struct WeightDelta {
    Augmentation mode = Augmentation::ADDITIVE;
    Tensor delta;            // ADDITIVE: flat, matrix row-major + bias + offset
    Tensor delta_m, delta_n; // CBAM output/input attention vectors
    Tensor gamma, beta;      // FILM coefficient matrices
};

// g_a (three 1x1 conv blocks) + g_delta (FC1-FC3) for one branch.
struct CompactLatentNet {
    CLNetConfig cfg;
    ConvBlock conv1, conv2, conv3;
    Linear fc1, fc2, fc3;

    static CompactLatentNet make(const CLNetConfig& cfg, int in_channels, int delta_size,
                                 Rng& rng);
    int in_channels() const { return conv1.conv.in_channels(); }
    int delta_size() const { return fc3.out_dim(); }

    void params(const std::string& prefix, NamedTensors& out);
    void buffers(const std::string& prefix, NamedTensors& out);
    int param_count() const;
};

Tensor adjust_features(const Tensor& m, const CompactLatentNet& net);
LatentFeature latent_encode(const Tensor& mbar, const LabelMap& labels, Branch branch);
WeightDelta predict_delta(const LatentFeature& c, const CompactLatentNet& net,
                          int head_out, int head_in);
HeadWeights augment_weights(const HeadWeights& th1, const WeightDelta& d);
Tensor adjusted_forward(const Tensor& m, const HeadWeights& th_a);

// Whole per-branch adjustment pipeline: encode, predict, augment.
HeadWeights adjust_head(const Tensor& m, const LabelMap& labels,
                        const CompactLatentNet& net, const HeadWeights& th1);

struct FcAdjusted {
    Tensor tmpl_a;
    double b_a = 0.0;
    Tensor s_f; // adjusted response
};

// FC-variant adjustment: reads the similarity response as the hidden map,
// then adjusts the template feature and offset (or, in RESPONSE mode, the
// response itself, matching the alternative output-size reading).
FcAdjusted fc_adjust(const Tensor& inst, const Tensor& s, const LabelMap& labels,
                     const Tensor& tmpl, double b, const CompactLatentNet& net);

// --- tape variants (training / gradient checking) ---

struct HeadVars {
    Var matrix, bias, offset;
};

Var adjust_features(Tape& t, Var m, CompactLatentNet& net, bool train_params,
                    bool batch_stats);
Var latent_encode(Tape& t, Var mbar, const LabelMap& labels, Branch branch);
Var predict_delta_raw(Tape& t, Var c, CompactLatentNet& net, bool train_params);
HeadVars augment_weights(Tape& t, HeadVars th1, Var raw, Augmentation mode);

// Full chain m -> adjusted output map on one tape.
Var adjusted_map(Tape& t, Var m, const LabelMap& labels, CompactLatentNet& net,
                 HeadVars th1, bool train_params, bool batch_stats);

// Per-layer analytic parameter counts (matches param_count exactly).
struct ParamBreakdown {
    int conv1 = 0, conv2 = 0, conv3 = 0, fc1 = 0, fc2 = 0, fc3 = 0;
    int total() const { return conv1 + conv2 + conv3 + fc1 + fc2 + fc3; }
};
ParamBreakdown analytic_params(const CLNetConfig& cfg, int in_channels, int delta_size);

} // namespace clnet
