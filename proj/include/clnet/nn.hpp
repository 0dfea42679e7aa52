#pragma once

#include <string>
#include <utility>
#include <vector>

#include "clnet/tape.hpp"
#include "clnet/tensor.hpp"

namespace clnet {

using NamedTensors = std::vector<std::pair<std::string, Tensor*>>;

struct Conv2d {
    Tensor w; // [out,in,k,k]
    Tensor b; // [out]
    int stride = 1;

    static Conv2d make(int in_ch, int out_ch, int k, int stride, Rng& rng);
    int in_channels() const { return w.dim(1); }
    int out_channels() const { return w.dim(0); }
    int kernel() const { return w.dim(2); }
    int out_size(int in_size) const { return (in_size - kernel()) / stride + 1; }

    Tensor forward(const Tensor& x) const;
    Var forward(Tape& t, Var x, bool train_params);

    void params(const std::string& prefix, NamedTensors& out);
    int param_count() const { return w.numel() + b.numel(); }
};

struct Linear {
    Tensor w; // [out,in]
    Tensor b; // [out]

    static Linear make(int in_dim, int out_dim, Rng& rng);
    int in_dim() const { return w.dim(1); }
    int out_dim() const { return w.dim(0); }

    Tensor forward(const Tensor& x) const;
    Var forward(Tape& t, Var x, bool train_params);

    void params(const std::string& prefix, NamedTensors& out);
    int param_count() const { return w.numel() + b.numel(); }
};

struct BatchNorm {
    Tensor gamma, beta;
    Tensor running_mean, running_var;
    double momentum = 0.1;
    double eps = 1e-5;

    static BatchNorm make(int channels);
    int channels() const { return gamma.numel(); }

    // Inference mode: normalize with learned running statistics.
    Tensor forward(const Tensor& x) const;
    // batch_stats selects per-sample statistics and updates the running ones.
    Var forward(Tape& t, Var x, bool train_params, bool batch_stats);

    void params(const std::string& prefix, NamedTensors& out);
    void buffers(const std::string& prefix, NamedTensors& out);
    int param_count() const { return gamma.numel() + beta.numel(); }
};

// Conv -> BatchNorm -> ReLU
struct ConvBlock {
    Conv2d conv;
    BatchNorm bn;

    static ConvBlock make(int in_ch, int out_ch, int k, int stride, Rng& rng);
    int out_size(int in_size) const { return conv.out_size(in_size); }

    Tensor forward(const Tensor& x) const;
    Var forward(Tape& t, Var x, bool train_params, bool batch_stats);

    void params(const std::string& prefix, NamedTensors& out);
    void buffers(const std::string& prefix, NamedTensors& out);
    int param_count() const { return conv.param_count() + bn.param_count(); }
};

} // namespace clnet
