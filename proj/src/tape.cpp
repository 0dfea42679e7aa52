#include "clnet/tape.hpp"

#include <cmath>

#include "clnet/errors.hpp"

namespace clnet {

namespace {

double softplus(double t) {
    // log(1 + e^t), stable for large |t|
    return std::log1p(std::exp(-std::fabs(t))) + std::max(t, 0.0);
}

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

} // namespace

double smooth_l1_scalar(double r) {
    double a = std::fabs(r);
    return a < 1.0 ? 0.5 * r * r : a - 0.5;
}

Var Tape::push(Tensor value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::input(Tensor value) { return push(std::move(value), false); }

Var Tape::leaf(Tensor value) { return push(std::move(value), true); }

Var Tape::param(Tensor* storage) {
    auto it = param_ids_.find(storage);
    if (it != param_ids_.end()) return Var{it->second};
    Var v = push(*storage, true);
    nodes_[static_cast<size_t>(v.id)].storage = storage;
    params_.push_back(v.id);
    param_ids_.emplace(storage, v.id);
    return v;
}

const Tensor& Tape::grad(Var v) const {
    const Node& n = nodes_[static_cast<size_t>(v.id)];
    static const Tensor empty;
    return n.grad.empty() ? empty : n.grad;
}

Tensor& Tape::grad_buf(Var v) {
    Node& n = nodes_[static_cast<size_t>(v.id)];
    if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape());
    return n.grad;
}

std::vector<std::pair<Tensor*, const Tensor*>> Tape::param_grads() const {
    std::vector<std::pair<Tensor*, const Tensor*>> out;
    out.reserve(params_.size());
    for (int id : params_) {
        const Node& n = nodes_[static_cast<size_t>(id)];
        out.emplace_back(n.storage, n.grad.empty() ? nullptr : &n.grad);
    }
    return out;
}

void Tape::backward(Var loss) {
    if (value(loss).numel() != 1) throw InternalError("backward: loss must be scalar");
    grad_buf(loss)[0] = 1.0;
    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (n.requires_grad && !n.grad.empty() && n.back) n.back();
    }
}

Var Tape::add(Var a, Var b) {
    if (!value(a).same_shape(value(b))) throw InputError("add: shape mismatch");
    Tensor out = value(a);
    out.add_(value(b));
    Var o = push(std::move(out), wants(a) || wants(b));
    if (!wants(o)) return o;
    nodes_.back().back = [this, a, b, o] {
        const Tensor& g = grad(o);
        if (wants(a)) grad_buf(a).add_(g);
        if (wants(b)) grad_buf(b).add_(g);
    };
    return o;
}

Var Tape::sub(Var a, Var b) {
    if (!value(a).same_shape(value(b))) throw InputError("sub: shape mismatch");
    Tensor out = value(a);
    out.axpy_(-1.0, value(b));
    Var o = push(std::move(out), wants(a) || wants(b));
    if (!wants(o)) return o;
    nodes_.back().back = [this, a, b, o] {
        const Tensor& g = grad(o);
        if (wants(a)) grad_buf(a).add_(g);
        if (wants(b)) grad_buf(b).axpy_(-1.0, g);
    };
    return o;
}

Var Tape::mul(Var a, Var b) {
    if (!value(a).same_shape(value(b))) throw InputError("mul: shape mismatch");
    Tensor out = value(a);
    for (int i = 0; i < out.numel(); ++i) out[i] *= value(b)[i];
    Var o = push(std::move(out), wants(a) || wants(b));
    if (!wants(o)) return o;
    nodes_.back().back = [this, a, b, o] {
        const Tensor& g = grad(o);
        if (wants(a)) {
            Tensor& ga = grad_buf(a);
            for (int i = 0; i < g.numel(); ++i) ga[i] += g[i] * value(b)[i];
        }
        if (wants(b)) {
            Tensor& gb = grad_buf(b);
            for (int i = 0; i < g.numel(); ++i) gb[i] += g[i] * value(a)[i];
        }
    };
    return o;
}

Var Tape::scale(Var a, double k) {
    Tensor out = value(a);
    out.scale_(k);
    Var o = push(std::move(out), wants(a));
    if (!wants(o)) return o;
    nodes_.back().back = [this, a, o, k] { grad_buf(a).axpy_(k, grad(o)); };
    return o;
}

Var Tape::add_scalar(Var a, Var s) {
    if (value(s).numel() != 1) throw InputError("add_scalar: offset must be scalar");
    Tensor out = value(a);
    double c = value(s)[0];
    for (int i = 0; i < out.numel(); ++i) out[i] += c;
    Var o = push(std::move(out), wants(a) || wants(s));
    if (!wants(o)) return o;
    nodes_.back().back = [this, a, s, o] {
        const Tensor& g = grad(o);
        if (wants(a)) grad_buf(a).add_(g);
        if (wants(s)) {
            double sum = 0.0;
            for (int i = 0; i < g.numel(); ++i) sum += g[i];
            grad_buf(s)[0] += sum;
        }
    };
    return o;
}

Var Tape::relu(Var a) {
    Tensor out = value(a);
    for (int i = 0; i < out.numel(); ++i) out[i] = std::max(0.0, out[i]);
    Var o = push(std::move(out), wants(a));
    if (!wants(o)) return o;
    nodes_.back().back = [this, a, o] {
        const Tensor& g = grad(o);
        Tensor& ga = grad_buf(a);
        for (int i = 0; i < g.numel(); ++i)
            if (value(a)[i] > 0.0) ga[i] += g[i];
    };
    return o;
}

Var Tape::tanh(Var a) {
    Tensor out = value(a);
    for (int i = 0; i < out.numel(); ++i) out[i] = std::tanh(out[i]);
    Var o = push(std::move(out), wants(a));
    if (!wants(o)) return o;
    nodes_.back().back = [this, a, o] {
        const Tensor& g = grad(o);
        const Tensor& y = value(o);
        Tensor& ga = grad_buf(a);
        for (int i = 0; i < g.numel(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
    };
    return o;
}

Var Tape::sum(Var a) {
    double acc = 0.0;
    for (int i = 0; i < value(a).numel(); ++i) acc += value(a)[i];
    Var o = push(Tensor::scalar(acc), wants(a));
    if (!wants(o)) return o;
    nodes_.back().back = [this, a, o] {
        double g = grad(o)[0];
        Tensor& ga = grad_buf(a);
        for (int i = 0; i < ga.numel(); ++i) ga[i] += g;
    };
    return o;
}

Var Tape::reshape(Var a, std::vector<int> shape) {
    Tensor out = value(a).reshaped(shape);
    Var o = push(std::move(out), wants(a));
    if (!wants(o)) return o;
    nodes_.back().back = [this, a, o] {
        const Tensor& g = grad(o);
        Tensor& ga = grad_buf(a);
        for (int i = 0; i < g.numel(); ++i) ga[i] += g[i];
    };
    return o;
}

Var Tape::slice(Var a, int offset, int len) {
    const Tensor& x = value(a);
    if (offset < 0 || len <= 0 || offset + len > x.numel())
        throw InputError("slice: range out of bounds");
    Tensor out({len});
    for (int i = 0; i < len; ++i) out[i] = x[offset + i];
    Var o = push(std::move(out), wants(a));
    if (!wants(o)) return o;
    nodes_.back().back = [this, a, o, offset, len] {
        const Tensor& g = grad(o);
        Tensor& ga = grad_buf(a);
        for (int i = 0; i < len; ++i) ga[offset + i] += g[i];
    };
    return o;
}

Var Tape::concat(const std::vector<Var>& parts) {
    int total = 0;
    bool req = false;
    for (Var p : parts) {
        total += value(p).numel();
        req = req || wants(p);
    }
    Tensor out({total});
    int off = 0;
    for (Var p : parts) {
        const Tensor& t = value(p);
        for (int i = 0; i < t.numel(); ++i) out[off + i] = t[i];
        off += t.numel();
    }
    Var o = push(std::move(out), req);
    if (!wants(o)) return o;
    std::vector<Var> ps = parts;
    nodes_.back().back = [this, ps, o] {
        const Tensor& g = grad(o);
        int off = 0;
        for (Var p : ps) {
            int n = value(p).numel();
            if (wants(p)) {
                Tensor& gp = grad_buf(p);
                for (int i = 0; i < n; ++i) gp[i] += g[off + i];
            }
            off += n;
        }
    };
    return o;
}

Var Tape::linear(Var x, Var w, Var b) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(w);
    const Tensor& bv = value(b);
    if (wv.rank() != 2 || xv.numel() != wv.dim(1) || bv.numel() != wv.dim(0))
        throw InputError("linear: dimension mismatch");
    int m = wv.dim(0), n = wv.dim(1);
    Tensor out({m});
    for (int r = 0; r < m; ++r) {
        double acc = bv[r];
        const double* wr = wv.data() + static_cast<size_t>(r) * n;
        for (int c = 0; c < n; ++c) acc += wr[c] * xv[c];
        out[r] = acc;
    }
    Var o = push(std::move(out), wants(x) || wants(w) || wants(b));
    if (!wants(o)) return o;
    nodes_.back().back = [this, x, w, b, o, m, n] {
        const Tensor& g = grad(o);
        const Tensor& xv = value(x);
        const Tensor& wv = value(w);
        if (wants(w)) {
            Tensor& gw = grad_buf(w);
            for (int r = 0; r < m; ++r)
                for (int c = 0; c < n; ++c) gw[r * n + c] += g[r] * xv[c];
        }
        if (wants(b)) {
            Tensor& gb = grad_buf(b);
            for (int r = 0; r < m; ++r) gb[r] += g[r];
        }
        if (wants(x)) {
            Tensor& gx = grad_buf(x);
            for (int r = 0; r < m; ++r)
                for (int c = 0; c < n; ++c) gx[c] += g[r] * wv[r * n + c];
        }
    };
    return o;
}

Var Tape::conv2d(Var x, Var w, Var b, int stride) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(w);
    const Tensor& bv = value(b);
    if (xv.rank() != 3 || wv.rank() != 4) throw InputError("conv2d: rank mismatch");
    int cin = xv.dim(0), h = xv.dim(1), wdt = xv.dim(2);
    int cout = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
    if (wv.dim(1) != cin) throw InputError("conv2d: input channel mismatch");
    if (bv.numel() != cout) throw InputError("conv2d: bias size mismatch");
    if (kh > h || kw > wdt) throw InputError("conv2d: kernel larger than input");
    int oh = (h - kh) / stride + 1;
    int ow = (wdt - kw) / stride + 1;

    Tensor out({cout, oh, ow});
    for (int o = 0; o < cout; ++o)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double acc = bv[o];
                for (int ci = 0; ci < cin; ++ci)
                    for (int ky = 0; ky < kh; ++ky)
                        for (int kx = 0; kx < kw; ++kx)
                            acc += wv[((o * cin + ci) * kh + ky) * kw + kx] *
                                   xv.at(ci, oy * stride + ky, ox * stride + kx);
                out.at(o, oy, ox) = acc;
            }

    Var ov = push(std::move(out), wants(x) || wants(w) || wants(b));
    if (!wants(ov)) return ov;
    nodes_.back().back = [this, x, w, b, ov, stride, cin, cout, kh, kw, oh, ow] {
        const Tensor& g = grad(ov);
        const Tensor& xv = value(x);
        const Tensor& wv = value(w);
        bool gw = wants(w), gx = wants(x), gb = wants(b);
        Tensor* wgrad = gw ? &grad_buf(w) : nullptr;
        Tensor* xgrad = gx ? &grad_buf(x) : nullptr;
        Tensor* bgrad = gb ? &grad_buf(b) : nullptr;
        for (int o = 0; o < cout; ++o)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double gv = g.at(o, oy, ox);
                    if (gv == 0.0) continue;
                    if (gb) (*bgrad)[o] += gv;
                    for (int ci = 0; ci < cin; ++ci)
                        for (int ky = 0; ky < kh; ++ky)
                            for (int kx = 0; kx < kw; ++kx) {
                                int wi = ((o * cin + ci) * kh + ky) * kw + kx;
                                if (gw)
                                    (*wgrad)[wi] += gv * xv.at(ci, oy * stride + ky, ox * stride + kx);
                                if (gx)
                                    xgrad->at(ci, oy * stride + ky, ox * stride + kx) += gv * wv[wi];
                            }
                }
    };
    return ov;
}

Var Tape::dw_xcorr(Var x, Var z) {
    const Tensor& xv = value(x);
    const Tensor& zv = value(z);
    if (xv.rank() != 3 || zv.rank() != 3 || xv.dim(0) != zv.dim(0))
        throw InputError("dw_xcorr: channel mismatch");
    int c = xv.dim(0);
    int hx = xv.dim(1), wx = xv.dim(2);
    int hz = zv.dim(1), wz = zv.dim(2);
    if (hz > hx || wz > wx) throw InputError("dw_xcorr: kernel larger than instance");
    int oh = hx - hz + 1, ow = wx - wz + 1;

    Tensor out({c, oh, ow});
    for (int ci = 0; ci < c; ++ci)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double acc = 0.0;
                for (int ky = 0; ky < hz; ++ky)
                    for (int kx = 0; kx < wz; ++kx)
                        acc += xv.at(ci, oy + ky, ox + kx) * zv.at(ci, ky, kx);
                out.at(ci, oy, ox) = acc;
            }

    Var o = push(std::move(out), wants(x) || wants(z));
    if (!wants(o)) return o;
    nodes_.back().back = [this, x, z, o, c, hz, wz, oh, ow] {
        const Tensor& g = grad(o);
        const Tensor& xv = value(x);
        const Tensor& zv = value(z);
        bool gx = wants(x), gz = wants(z);
        Tensor* xgrad = gx ? &grad_buf(x) : nullptr;
        Tensor* zgrad = gz ? &grad_buf(z) : nullptr;
        for (int ci = 0; ci < c; ++ci)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double gv = g.at(ci, oy, ox);
                    if (gv == 0.0) continue;
                    for (int ky = 0; ky < hz; ++ky)
                        for (int kx = 0; kx < wz; ++kx) {
                            if (gx) xgrad->at(ci, oy + ky, ox + kx) += gv * zv.at(ci, ky, kx);
                            if (gz) zgrad->at(ci, ky, kx) += gv * xv.at(ci, oy + ky, ox + kx);
                        }
                }
    };
    return o;
}

Var Tape::pointwise_affine(Var x, Var w, Var b) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(w);
    const Tensor& bv = value(b);
    if (xv.rank() != 3 || wv.rank() != 2 || wv.dim(1) != xv.dim(0))
        throw InputError("pointwise_affine: dimension mismatch");
    if (bv.numel() != wv.dim(0)) throw InputError("pointwise_affine: bias size mismatch");
    int cin = xv.dim(0), h = xv.dim(1), wdt = xv.dim(2);
    int cout = wv.dim(0);

    Tensor out({cout, h, wdt});
    int hw = h * wdt;
    for (int o = 0; o < cout; ++o) {
        const double* wr = wv.data() + static_cast<size_t>(o) * cin;
        double* op = out.data() + static_cast<size_t>(o) * hw;
        for (int p = 0; p < hw; ++p) op[p] = bv[o];
        for (int ci = 0; ci < cin; ++ci) {
            const double* xp = xv.data() + static_cast<size_t>(ci) * hw;
            double wc = wr[ci];
            for (int p = 0; p < hw; ++p) op[p] += wc * xp[p];
        }
    }

    Var o = push(std::move(out), wants(x) || wants(w) || wants(b));
    if (!wants(o)) return o;
    nodes_.back().back = [this, x, w, b, o, cin, cout, hw] {
        const Tensor& g = grad(o);
        const Tensor& xv = value(x);
        const Tensor& wv = value(w);
        if (wants(b)) {
            Tensor& gb = grad_buf(b);
            for (int oc = 0; oc < cout; ++oc) {
                const double* gp = g.data() + static_cast<size_t>(oc) * hw;
                double acc = 0.0;
                for (int p = 0; p < hw; ++p) acc += gp[p];
                gb[oc] += acc;
            }
        }
        if (wants(w)) {
            Tensor& gw = grad_buf(w);
            for (int oc = 0; oc < cout; ++oc) {
                const double* gp = g.data() + static_cast<size_t>(oc) * hw;
                for (int ci = 0; ci < cin; ++ci) {
                    const double* xp = xv.data() + static_cast<size_t>(ci) * hw;
                    double acc = 0.0;
                    for (int p = 0; p < hw; ++p) acc += gp[p] * xp[p];
                    gw[oc * cin + ci] += acc;
                }
            }
        }
        if (wants(x)) {
            Tensor& gx = grad_buf(x);
            for (int oc = 0; oc < cout; ++oc) {
                const double* gp = g.data() + static_cast<size_t>(oc) * hw;
                for (int ci = 0; ci < cin; ++ci) {
                    double wc = wv[oc * cin + ci];
                    double* xp = gx.data() + static_cast<size_t>(ci) * hw;
                    for (int p = 0; p < hw; ++p) xp[p] += gp[p] * wc;
                }
            }
        }
    };
    return o;
}

Var Tape::scale_rows(Var w, Var v) {
    const Tensor& wv = value(w);
    const Tensor& vv = value(v);
    if (wv.rank() != 2 || vv.numel() != wv.dim(0))
        throw InputError("scale_rows: dimension mismatch");
    int m = wv.dim(0), n = wv.dim(1);
    Tensor out = wv;
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < n; ++c) out[r * n + c] *= vv[r];
    Var o = push(std::move(out), wants(w) || wants(v));
    if (!wants(o)) return o;
    nodes_.back().back = [this, w, v, o, m, n] {
        const Tensor& g = grad(o);
        if (wants(w)) {
            Tensor& gw = grad_buf(w);
            for (int r = 0; r < m; ++r)
                for (int c = 0; c < n; ++c) gw[r * n + c] += g[r * n + c] * value(v)[r];
        }
        if (wants(v)) {
            Tensor& gv = grad_buf(v);
            for (int r = 0; r < m; ++r) {
                double acc = 0.0;
                for (int c = 0; c < n; ++c) acc += g[r * n + c] * value(w)[r * n + c];
                gv[r] += acc;
            }
        }
    };
    return o;
}

Var Tape::scale_cols(Var w, Var v) {
    const Tensor& wv = value(w);
    const Tensor& vv = value(v);
    if (wv.rank() != 2 || vv.numel() != wv.dim(1))
        throw InputError("scale_cols: dimension mismatch");
    int m = wv.dim(0), n = wv.dim(1);
    Tensor out = wv;
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < n; ++c) out[r * n + c] *= vv[c];
    Var o = push(std::move(out), wants(w) || wants(v));
    if (!wants(o)) return o;
    nodes_.back().back = [this, w, v, o, m, n] {
        const Tensor& g = grad(o);
        if (wants(w)) {
            Tensor& gw = grad_buf(w);
            for (int r = 0; r < m; ++r)
                for (int c = 0; c < n; ++c) gw[r * n + c] += g[r * n + c] * value(v)[c];
        }
        if (wants(v)) {
            Tensor& gv = grad_buf(v);
            for (int c = 0; c < n; ++c) {
                double acc = 0.0;
                for (int r = 0; r < m; ++r) acc += g[r * n + c] * value(w)[r * n + c];
                gv[c] += acc;
            }
        }
    };
    return o;
}

Var Tape::batchnorm(Var x, Var gamma, Var beta, const Tensor& running_mean,
                    const Tensor& running_var, bool training, double eps,
                    Tensor* batch_mean, Tensor* batch_var) {
    const Tensor& xv = value(x);
    if (xv.rank() != 3) throw InputError("batchnorm: expected [C,H,W]");
    int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    if (value(gamma).numel() != c || value(beta).numel() != c)
        throw InputError("batchnorm: parameter size mismatch");
    int hw = h * w;

    Tensor mean({c}), var({c});
    if (training) {
        for (int ci = 0; ci < c; ++ci) {
            const double* xp = xv.data() + static_cast<size_t>(ci) * hw;
            double m = 0.0;
            for (int p = 0; p < hw; ++p) m += xp[p];
            m /= hw;
            double v = 0.0;
            for (int p = 0; p < hw; ++p) {
                double d = xp[p] - m;
                v += d * d;
            }
            mean[ci] = m;
            var[ci] = v / hw;
        }
        if (batch_mean) *batch_mean = mean;
        if (batch_var) *batch_var = var;
    } else {
        if (running_mean.numel() != c || running_var.numel() != c)
            throw InputError("batchnorm: running statistics size mismatch");
        mean = running_mean;
        var = running_var;
    }

    Tensor out(xv.shape());
    const Tensor& gv = value(gamma);
    const Tensor& bv = value(beta);
    for (int ci = 0; ci < c; ++ci) {
        double inv = 1.0 / std::sqrt(var[ci] + eps);
        const double* xp = xv.data() + static_cast<size_t>(ci) * hw;
        double* op = out.data() + static_cast<size_t>(ci) * hw;
        for (int p = 0; p < hw; ++p) op[p] = gv[ci] * (xp[p] - mean[ci]) * inv + bv[ci];
    }

    Var o = push(std::move(out), wants(x) || wants(gamma) || wants(beta));
    if (!wants(o)) return o;
    Tensor mean_c = mean, var_c = var;
    nodes_.back().back = [this, x, gamma, beta, o, c, hw, eps, training,
                          mean_c, var_c] {
        const Tensor& g = grad(o);
        const Tensor& xv = value(x);
        const Tensor& gv = value(gamma);
        for (int ci = 0; ci < c; ++ci) {
            double inv = 1.0 / std::sqrt(var_c[ci] + eps);
            const double* xp = xv.data() + static_cast<size_t>(ci) * hw;
            const double* gp = g.data() + static_cast<size_t>(ci) * hw;
            double sum_g = 0.0, sum_gx = 0.0;
            for (int p = 0; p < hw; ++p) {
                double xhat = (xp[p] - mean_c[ci]) * inv;
                sum_g += gp[p];
                sum_gx += gp[p] * xhat;
            }
            if (wants(gamma)) grad_buf(gamma)[ci] += sum_gx;
            if (wants(beta)) grad_buf(beta)[ci] += sum_g;
            if (wants(x)) {
                Tensor& gx = grad_buf(x);
                double* xgp = gx.data() + static_cast<size_t>(ci) * hw;
                if (training) {
                    double mg = sum_g / hw, mgx = sum_gx / hw;
                    for (int p = 0; p < hw; ++p) {
                        double xhat = (xp[p] - mean_c[ci]) * inv;
                        xgp[p] += gv[ci] * inv * (gp[p] - mg - xhat * mgx);
                    }
                } else {
                    for (int p = 0; p < hw; ++p) xgp[p] += gv[ci] * inv * gp[p];
                }
            }
        }
    };
    return o;
}

Var Tape::set_mean_std(Var m, const std::vector<int>& positions) {
    const Tensor& mv = value(m);
    if (mv.rank() != 3) throw InputError("set_mean_std: expected [C,H,W]");
    if (positions.empty()) throw EncoderInputError("set_mean_std: empty sample set");
    int c = mv.dim(0);
    int hw = mv.dim(1) * mv.dim(2);
    int n = static_cast<int>(positions.size());
    for (int p : positions)
        if (p < 0 || p >= hw) throw InputError("set_mean_std: position out of range");

    Tensor out({2 * c});
    for (int ci = 0; ci < c; ++ci) {
        const double* mp = mv.data() + static_cast<size_t>(ci) * hw;
        double mu = 0.0;
        for (int p : positions) mu += mp[p];
        mu /= n;
        double var = 0.0;
        for (int p : positions) {
            double d = mp[p] - mu;
            var += d * d;
        }
        out[ci] = mu;
        out[c + ci] = std::sqrt(var / n);
    }

    Var o = push(std::move(out), wants(m));
    if (!wants(o)) return o;
    std::vector<int> pos = positions;
    nodes_.back().back = [this, m, o, pos, c, hw, n] {
        const Tensor& g = grad(o);
        const Tensor& val = value(o);
        const Tensor& mv = value(m);
        Tensor& gm = grad_buf(m);
        for (int ci = 0; ci < c; ++ci) {
            double mu = val[ci];
            double sigma = val[c + ci];
            double gmu = g[ci] / n;
            double gsig = g[c + ci];
            const double* mp = mv.data() + static_cast<size_t>(ci) * hw;
            double* gp = gm.data() + static_cast<size_t>(ci) * hw;
            for (int p : pos) {
                gp[p] += gmu;
                if (sigma > 0.0) gp[p] += gsig * (mp[p] - mu) / (n * sigma);
            }
        }
    };
    return o;
}

Var Tape::softmax_ce(Var logits, int anchors_per_cell,
                     const std::vector<std::pair<int, int>>& samples) {
    const Tensor& lv = value(logits);
    if (lv.rank() != 3 || lv.dim(0) != 2 * anchors_per_cell)
        throw InputError("softmax_ce: logits must be [2k,H,W]");
    if (samples.empty()) throw InputError("softmax_ce: no samples");
    int k = anchors_per_cell;
    int w = lv.dim(2);
    int n = static_cast<int>(samples.size());

    auto locate = [k, w](int idx) {
        int a = idx % k;
        int cell = idx / k;
        return std::array<int, 3>{a, cell / w, cell % w};
    };

    double loss = 0.0;
    for (auto [idx, label] : samples) {
        auto [a, y, x] = locate(idx);
        double d = lv.at(2 * a + 1, y, x) - lv.at(2 * a, y, x);
        loss += label == 1 ? softplus(-d) : softplus(d);
    }
    Tensor out = Tensor::scalar(loss / n);

    Var o = push(std::move(out), wants(logits));
    if (!wants(o)) return o;
    std::vector<std::pair<int, int>> s = samples;
    nodes_.back().back = [this, logits, o, s, locate, n] {
        double g = grad(o)[0] / n;
        const Tensor& lv = value(logits);
        Tensor& gl = grad_buf(logits);
        for (auto [idx, label] : s) {
            auto [a, y, x] = locate(idx);
            double d = lv.at(2 * a + 1, y, x) - lv.at(2 * a, y, x);
            double delta = g * (sigmoid(d) - label);
            gl.at(2 * a + 1, y, x) += delta;
            gl.at(2 * a, y, x) -= delta;
        }
    };
    return o;
}

Var Tape::smooth_l1(Var loc, int anchors_per_cell,
                    const std::vector<std::pair<int, std::array<double, 4>>>& samples) {
    const Tensor& lv = value(loc);
    if (lv.rank() != 3 || lv.dim(0) != 4 * anchors_per_cell)
        throw InputError("smooth_l1: offsets must be [4k,H,W]");
    if (samples.empty()) throw InputError("smooth_l1: no samples");
    int k = anchors_per_cell;
    int w = lv.dim(2);
    int n = static_cast<int>(samples.size());

    auto locate = [k, w](int idx) {
        int a = idx % k;
        int cell = idx / k;
        return std::array<int, 3>{a, cell / w, cell % w};
    };

    double loss = 0.0;
    for (const auto& [idx, target] : samples) {
        auto [a, y, x] = locate(idx);
        for (int j = 0; j < 4; ++j)
            loss += smooth_l1_scalar(lv.at(4 * a + j, y, x) - target[static_cast<size_t>(j)]);
    }
    Tensor out = Tensor::scalar(loss / n);

    Var o = push(std::move(out), wants(loc));
    if (!wants(o)) return o;
    std::vector<std::pair<int, std::array<double, 4>>> s = samples;
    nodes_.back().back = [this, loc, o, s, locate, n] {
        double g = grad(o)[0] / n;
        const Tensor& lv = value(loc);
        Tensor& gl = grad_buf(loc);
        for (const auto& [idx, target] : s) {
            auto [a, y, x] = locate(idx);
            for (int j = 0; j < 4; ++j) {
                double r = lv.at(4 * a + j, y, x) - target[static_cast<size_t>(j)];
                gl.at(4 * a + j, y, x) += g * std::clamp(r, -1.0, 1.0);
            }
        }
    };
    return o;
}

} // namespace clnet
