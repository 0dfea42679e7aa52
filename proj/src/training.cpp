#include "clnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "clnet/errors.hpp"
#include "clnet/tape.hpp"

namespace clnet {

std::vector<int> SampleSelection::used() const {
    std::vector<int> out = pos;
    out.insert(out.end(), neg.begin(), neg.end());
    return out;
}

SampleSelection select_training_samples(const LabelMap& labels, Rng& rng, int max_pos,
                                        int base_samples) {
    SampleSelection sel;
    std::vector<int> pos = labels.indices_of(Label::POS);
    std::vector<int> neg = labels.indices_of(Label::NEG);
    if (static_cast<int>(pos.size()) > max_pos) {
        rng.shuffle(pos);
        pos.resize(static_cast<size_t>(max_pos));
        std::sort(pos.begin(), pos.end());
    }
    int need_neg = base_samples - static_cast<int>(pos.size());
    if (static_cast<int>(neg.size()) > need_neg) {
        rng.shuffle(neg);
        neg.resize(static_cast<size_t>(need_neg));
        std::sort(neg.begin(), neg.end());
    }
    sel.pos = std::move(pos);
    sel.neg = std::move(neg);
    return sel;
}

namespace {

// positive softmax from the 2-way logits of anchor a
double pos_score_at(const Tensor& cls, int anchor, int k) {
    int cells = cls.dim(1) * cls.dim(2);
    int cell = anchor / k, a = anchor % k;
    int y = cell / cls.dim(2), x = cell % cls.dim(2);
    (void)cells;
    double l0 = cls.at(2 * a, y, x);
    double l1 = cls.at(2 * a + 1, y, x);
    return 1.0 / (1.0 + std::exp(l0 - l1));
}

} // namespace

std::vector<int> mine_diverse_samples(const Tensor& cls_base, const LabelMap& labels,
                                      const std::vector<int>& used, int count) {
    if (count <= 0) return {};
    int k = static_cast<int>(labels.labels.size()) / (cls_base.dim(1) * cls_base.dim(2));
    std::vector<char> taken(labels.labels.size(), 0);
    for (int u : used) taken[static_cast<size_t>(u)] = 1;
    std::vector<std::pair<double, int>> ranked;
    for (int i = 0; i < static_cast<int>(labels.labels.size()); ++i) {
        if (labels.labels[static_cast<size_t>(i)] != Label::NEG) continue;
        if (taken[static_cast<size_t>(i)]) continue;
        ranked.emplace_back(pos_score_at(cls_base, i, k), i);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    if (static_cast<int>(ranked.size()) > count) ranked.resize(static_cast<size_t>(count));
    std::vector<int> out;
    for (const auto& [score, idx] : ranked) out.push_back(idx);
    return out;
}

double schedule_lr(int step, int total_steps, int warmup_steps, double lr_start,
                   double lr_peak, double lr_end) {
    if (total_steps <= 0) return lr_peak;
    if (warmup_steps > 0 && step < warmup_steps) {
        double f = static_cast<double>(step) / warmup_steps;
        return lr_start + f * (lr_peak - lr_start);
    }
    int decay_span = total_steps - warmup_steps;
    if (decay_span <= 1) return lr_peak;
    double f = static_cast<double>(step - warmup_steps) / (decay_span - 1);
    f = std::clamp(f, 0.0, 1.0);
    return lr_peak * std::pow(lr_end / lr_peak, f);
}

void Sgd::apply(const std::vector<std::pair<Tensor*, const Tensor*>>& grads, double lr) {
    for (const auto& [storage, grad] : grads) {
        if (!grad || grad->empty()) continue;
        Tensor& v = velocity[storage];
        if (v.empty()) v = Tensor::zeros(storage->shape());
        v.scale_(momentum);
        v.axpy_(-lr, *grad);
        storage->add_(v);
    }
}

CropSpec template_crop(const BBox& box, double context, int out_px) {
    CropSpec c;
    c.cx = box.cx();
    c.cy = box.cy();
    c.side = context * std::max(box.w, box.h);
    c.out_px = out_px;
    return c;
}

CropSpec search_crop(double cx, double cy, const BBox& size_ref, double context,
                     int out_px) {
    CropSpec c;
    c.cx = cx;
    c.cy = cy;
    c.side = context * std::max(size_ref.w, size_ref.h);
    c.out_px = out_px;
    return c;
}

BBox box_to_patch(const BBox& b, const CropSpec& crop) {
    double s = crop.scale();
    return BBox{(b.x - crop.left()) * s, (b.y - crop.top()) * s, b.w * s, b.h * s};
}

BBox box_to_image(const BBox& b, const CropSpec& crop) {
    double s = crop.scale();
    return BBox{b.x / s + crop.left(), b.y / s + crop.top(), b.w / s, b.h / s};
}

AnchorGrid response_grid(const BackboneConfig& cfg) {
    // receptive-field center of feature j in patch pixels: offset + stride*j
    double offset = 0.0, stride = 1.0;
    for (int st : cfg.embed_strides) {
        offset += stride; // kernel-3 blocks center one pixel in at each level
        stride *= st;
    }
    int tz = cfg.template_size, sx = cfg.search_size;
    for (size_t i = 0; i < cfg.embed_strides.size(); ++i) {
        tz = (tz - 3) / cfg.embed_strides[i] + 1;
        sx = (sx - 3) / cfg.embed_strides[i] + 1;
    }
    int response = sx - tz + 1;
    if (response <= 0)
        throw ConfigError("search/template sizes give a nonpositive response size");
    AnchorGrid g = generate_anchors(response, response, cfg.anchors_per_cell,
                                    cfg.anchor_stride, cfg.anchor_scales,
                                    cfg.anchor_ratios);
    // template window center over response cell 0, then half-pixel to
    // continuous coordinates
    double t0 = offset + stride * ((tz - 1) / 2.0) + 0.5;
    double shift = t0 + cfg.anchor_stride * ((response - 1) / 2.0);
    return g.translated(shift, shift);
}

PatchTargets patch_targets(const AnchorGrid& grid, const BBox& gt_img,
                           const CropSpec& crop) {
    PatchTargets t;
    t.gt_patch = box_to_patch(gt_img, crop);
    t.labels = assign_labels(grid, t.gt_patch);
    for (int idx : t.labels.indices_of(Label::POS))
        t.loc_targets.emplace_back(
            idx, encode_box(t.gt_patch, grid.boxes[static_cast<size_t>(idx)]));
    return t;
}

ImageDataset ImageDataset::load(const std::vector<Sequence>& seqs) {
    ImageDataset ds;
    ds.seqs = seqs;
    for (const auto& s : seqs) {
        std::vector<Tensor> frames;
        for (const auto& p : s.frame_paths) frames.push_back(load_pgm(p));
        ds.frames.push_back(std::move(frames));
    }
    return ds;
}

PairPick pick_pair(const ImageDataset& ds, Rng& rng, int gap_min, int gap_max) {
    if (ds.seqs.empty()) throw InputError("training dataset is empty");
    for (int tries = 0; tries < 1000; ++tries) {
        PairPick p;
        p.seq = rng.uniform_int(static_cast<int>(ds.seqs.size()));
        int n = ds.seqs[static_cast<size_t>(p.seq)].size();
        if (n < gap_min + 1) continue; // too short, resample
        int max_gap = std::min(gap_max, n - 1);
        int gap = gap_min + rng.uniform_int(max_gap - gap_min + 1);
        p.frame_z = rng.uniform_int(n - gap);
        p.frame_x = p.frame_z + gap;
        return p;
    }
    throw InputError("no sequence long enough for the configured frame gap");
}

namespace {

struct GradAccumulator {
    std::unordered_map<Tensor*, Tensor> sums;
    std::vector<Tensor*> order;

    void add(const std::vector<std::pair<Tensor*, const Tensor*>>& grads) {
        for (const auto& [storage, grad] : grads) {
            if (!grad || grad->empty()) continue;
            auto it = sums.find(storage);
            if (it == sums.end()) {
                order.push_back(storage);
                sums.emplace(storage, *grad);
            } else {
                it->second.add_(*grad);
            }
        }
    }

    std::vector<std::pair<Tensor*, const Tensor*>> mean(int n) {
        std::vector<std::pair<Tensor*, const Tensor*>> out;
        for (Tensor* p : order) {
            Tensor& g = sums.at(p);
            g.scale_(1.0 / n);
            out.emplace_back(p, &g);
        }
        return out;
    }

    void reset() {
        sums.clear();
        order.clear();
    }
};

struct LossParts {
    double cls = 0, loc = 0, total = 0;
};

void check_finite(double v, int step) {
    if (!std::isfinite(v))
        throw TrainingDiverged("loss is not finite at step " + std::to_string(step));
}

std::vector<std::pair<int, int>> cls_samples(const SampleSelection& sel) {
    std::vector<std::pair<int, int>> s;
    for (int i : sel.pos) s.emplace_back(i, 1);
    for (int i : sel.neg) s.emplace_back(i, 0);
    for (int i : sel.diverse) s.emplace_back(i, 0);
    return s;
}

struct PairCrops {
    Tensor tmpl, search;
    PatchTargets targets;
    CropSpec search_spec;
};

// template from frame_z around its gt; search window on frame_x around the
// jittered gt center so regression sees varied offsets
PairCrops make_pair_crops(const ImageDataset& ds, const PairPick& pick,
                          const AnchorGrid& grid, const RunConfig& cfg, Rng& rng) {
    const Sequence& seq = ds.seqs[static_cast<size_t>(pick.seq)];
    const Tensor& img_z = ds.frames[static_cast<size_t>(pick.seq)][static_cast<size_t>(pick.frame_z)];
    const Tensor& img_x = ds.frames[static_cast<size_t>(pick.seq)][static_cast<size_t>(pick.frame_x)];
    const BBox& gt_z = seq.gt[static_cast<size_t>(pick.frame_z)];
    const BBox& gt_x = seq.gt[static_cast<size_t>(pick.frame_x)];

    PairCrops out;
    CropSpec tc = template_crop(gt_z, cfg.template_context, cfg.template_size);
    out.tmpl = crop_patch(img_z, tc.cx, tc.cy, tc.side, tc.out_px);

    CropSpec sc = search_crop(gt_x.cx(), gt_x.cy(), gt_x, cfg.search_context,
                              cfg.search_size);
    double j = cfg.center_jitter / sc.scale(); // patch px -> image px
    sc.cx -= rng.uniform(-j, j);
    sc.cy -= rng.uniform(-j, j);
    out.search = crop_patch(img_x, sc.cx, sc.cy, sc.side, sc.out_px);
    out.search_spec = sc;
    out.targets = patch_targets(grid, gt_x, sc);
    return out;
}

void append_log(const std::string& path, int step, const LossParts& mean) {
    if (path.empty()) return;
    std::ofstream os(path, std::ios::app);
    char line[128];
    std::snprintf(line, sizeof(line), "%d,%.6f,%.6f,%.6f\n", step, mean.cls, mean.loc,
                  mean.total);
    os << line;
}

} // namespace

void train_base(TrackModel& model, const ImageDataset& ds, const RunConfig& cfg,
                const std::string& log_path) {
    validate_config(cfg);
    Rng rng(cfg.seed * 1000003ull + 17);
    AnchorGrid grid = response_grid(model.backbone);
    Sgd opt;
    opt.momentum = cfg.momentum;
    GradAccumulator acc;
    if (!log_path.empty()) std::ofstream(log_path, std::ios::trunc) << "step,loss_cls,loss_loc,loss_total\n";

    for (int step = 0; step < cfg.base_steps; ++step) {
        acc.reset();
        LossParts mean;
        for (int b = 0; b < cfg.batch_size; ++b) {
            PairPick pick = pick_pair(ds, rng, cfg.frame_gap_min, cfg.frame_gap_max);
            PairCrops pc = make_pair_crops(ds, pick, grid, cfg, rng);
            SampleSelection sel =
                select_training_samples(pc.targets.labels, rng, cfg.max_pos,
                                        cfg.base_samples);
            if (sel.pos.empty()) continue; // degenerate crop, skip

            Tape t;
            Var vz = model.base.embed.forward(t, t.input(pc.tmpl), true, true);
            Var vx = model.base.embed.forward(t, t.input(pc.search), true, true);
            Var m_cls = model.base.cls.hidden_map(t, vx, vz, true, true);
            Var m_loc = model.base.loc.hidden_map(t, vx, vz, true, true);
            Var a_cls = head_forward(t, m_cls, t.param(&model.base.cls.head1.matrix),
                                     t.param(&model.base.cls.head1.bias),
                                     t.param(&model.base.cls.head1.offset));
            Var a_loc = head_forward(t, m_loc, t.param(&model.base.loc.head1.matrix),
                                     t.param(&model.base.loc.head1.bias),
                                     t.param(&model.base.loc.head1.offset));
            Var l_cls = t.softmax_ce(a_cls, model.backbone.anchors_per_cell,
                                     cls_samples(sel));
            Var l_loc = t.smooth_l1(a_loc, model.backbone.anchors_per_cell,
                                    pc.targets.loc_targets);
            Var loss = t.add(l_cls, t.scale(l_loc, cfg.lambda));
            t.backward(loss);
            acc.add(t.param_grads());

            mean.cls += t.value(l_cls)[0];
            mean.loc += t.value(l_loc)[0];
            mean.total += t.value(loss)[0];
        }
        mean.cls /= cfg.batch_size;
        mean.loc /= cfg.batch_size;
        mean.total /= cfg.batch_size;
        check_finite(mean.total, step);
        double lr = schedule_lr(step, cfg.base_steps, cfg.warmup_steps, cfg.lr_start,
                                cfg.lr_peak, cfg.lr_end);
        opt.apply(acc.mean(cfg.batch_size), lr);
        append_log(log_path, step, mean);
    }
}

void train_clnet(TrackModel& model, const ImageDataset& ds, const RunConfig& cfg,
                 const std::string& log_path) {
    validate_config(cfg);
    Rng rng(cfg.seed * 1000003ull + 71);
    AnchorGrid grid = response_grid(model.backbone);
    Sgd opt;
    opt.momentum = cfg.momentum;
    GradAccumulator acc;
    if (!log_path.empty()) std::ofstream(log_path, std::ios::trunc) << "step,loss_cls,loss_loc,loss_total\n";

    int k = model.backbone.anchors_per_cell;

    for (int step = 0; step < cfg.steps; ++step) {
        acc.reset();
        LossParts mean;
        for (int b = 0; b < cfg.batch_size; ++b) {
            PairPick pick = pick_pair(ds, rng, cfg.frame_gap_min, cfg.frame_gap_max);
            const Sequence& seq = ds.seqs[static_cast<size_t>(pick.seq)];
            const Tensor& img_z =
                ds.frames[static_cast<size_t>(pick.seq)][static_cast<size_t>(pick.frame_z)];
            const BBox& gt_z = seq.gt[static_cast<size_t>(pick.frame_z)];

            // frozen forward: adjustment map on the template frame
            CropSpec tc = template_crop(gt_z, cfg.template_context, cfg.template_size);
            Tensor tmpl = crop_patch(img_z, tc.cx, tc.cy, tc.side, tc.out_px);
            CropSpec zc = search_crop(gt_z.cx(), gt_z.cy(), gt_z, cfg.search_context,
                                      cfg.search_size);
            Tensor zwin = crop_patch(img_z, zc.cx, zc.cy, zc.side, zc.out_px);
            Tensor fz = model.base.embed_patch(tmpl);
            Tensor fzwin = model.base.embed_patch(zwin);
            auto [mz_cls, mz_loc] = model.base.hidden_maps(fzwin, fz);
            LabelMap labels_z = assign_labels(grid, box_to_patch(gt_z, zc));
            if (labels_z.pos_count == 0 || labels_z.neg_count == 0) continue;

            // frozen forward: loss map on the search frame
            PairCrops pc = make_pair_crops(ds, pick, grid, cfg, rng);
            Tensor fx = model.base.embed_patch(pc.search);
            auto [mx_cls, mx_loc] = model.base.hidden_maps(fx, fz);
            SampleSelection sel =
                select_training_samples(pc.targets.labels, rng, cfg.max_pos,
                                        cfg.base_samples);
            if (sel.pos.empty()) continue;
            Tensor base_cls = head_forward(mx_cls, model.base.cls.head1);
            sel.diverse = mine_diverse_samples(base_cls, pc.targets.labels, sel.used(),
                                               cfg.diverse_count);

            Tape t;
            auto adjusted = [&](CompactLatentNet& net, const Tensor& mz,
                                const Tensor& mx, Branch branch,
                                const HeadWeights& head) {
                Var mbar = adjust_features(t, t.input(mz), net, true, true);
                Var c = latent_encode(t, mbar, labels_z, branch);
                Var raw = predict_delta_raw(t, c, net, true);
                HeadVars th1{t.input(head.matrix), t.input(head.bias),
                             t.input(head.offset)};
                HeadVars th_a = augment_weights(t, th1, raw, net.cfg.augmentation);
                return head_forward(t, t.input(mx), th_a.matrix, th_a.bias, th_a.offset);
            };
            Var a_cls = adjusted(model.cls_net, mz_cls, mx_cls, Branch::CLS,
                                 model.base.cls.head1);
            Var a_loc = adjusted(model.loc_net, mz_loc, mx_loc, Branch::REG,
                                 model.base.loc.head1);
            Var l_cls = t.softmax_ce(a_cls, k, cls_samples(sel));
            Var l_loc = t.smooth_l1(a_loc, k, pc.targets.loc_targets);
            Var loss = t.add(l_cls, t.scale(l_loc, cfg.lambda));
            t.backward(loss);
            acc.add(t.param_grads());

            mean.cls += t.value(l_cls)[0];
            mean.loc += t.value(l_loc)[0];
            mean.total += t.value(loss)[0];
        }
        mean.cls /= cfg.batch_size;
        mean.loc /= cfg.batch_size;
        mean.total /= cfg.batch_size;
        check_finite(mean.total, step);
        double lr = schedule_lr(step, cfg.steps, cfg.warmup_steps, cfg.lr_start,
                                cfg.lr_peak, cfg.lr_end);
        opt.apply(acc.mean(cfg.batch_size), lr);
        append_log(log_path, step, mean);
    }
}

} // namespace clnet
