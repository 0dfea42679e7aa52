#include "clnet/tracker.hpp"

#include <algorithm>
#include <cmath>

#include "clnet/errors.hpp"

namespace clnet {

namespace {

// sqrt((w+p)(h+p)) with p = (w+h)/2, the usual pad-aware size measure
double size_measure(double w, double h) {
    double pad = (w + h) / 2.0;
    return std::sqrt((w + pad) * (h + pad));
}

double ratio_change(double a, double b) {
    double r = a / b;
    return std::max(r, 1.0 / r);
}

std::vector<double> cosine_window(const AnchorGrid& grid) {
    auto hann = [](int i, int n) {
        if (n <= 1) return 1.0;
        return 0.5 - 0.5 * std::cos(2.0 * 3.14159265358979323846 * i / (n - 1));
    };
    std::vector<double> win(static_cast<size_t>(grid.count()), 0.0);
    for (int i = 0; i < grid.count(); ++i) {
        win[static_cast<size_t>(i)] =
            hann(grid.cell_y(i), grid.height) * hann(grid.cell_x(i), grid.width);
    }
    return win;
}

} // namespace

CandidateSet update_candidates(const CandidateSet& prev, int frame_index, double score,
                               double tau_r, const Tensor& m_cls, const Tensor& m_loc,
                               const BBox& box_patch) {
    if (frame_index <= 1) return CandidateSet{}; // starts empty
    if (score > tau_r) {
        CandidateSet next;
        next.present = true;
        next.m_cls = m_cls;
        next.m_loc = m_loc;
        next.box_patch = box_patch;
        return next;
    }
    return prev;
}

std::optional<double> margin_eta(const std::vector<double>& scores,
                                 const LabelMap& pseudo) {
    if (static_cast<int>(scores.size()) != pseudo.size())
        throw InputError("margin_eta: score/label size mismatch");
    if (pseudo.pos_count == 0 || pseudo.neg_count == 0) return std::nullopt;
    double best_pos = -1.0, best_neg = -1.0;
    for (int i = 0; i < pseudo.size(); ++i) {
        if (pseudo[i] == Label::POS)
            best_pos = std::max(best_pos, scores[static_cast<size_t>(i)]);
        else if (pseudo[i] == Label::NEG)
            best_neg = std::max(best_neg, scores[static_cast<size_t>(i)]);
    }
    return best_pos - best_neg;
}

std::vector<double> softmax_scores(const Tensor& cls_map, int anchors_per_cell) {
    int h = cls_map.dim(1), w = cls_map.dim(2);
    std::vector<double> out(static_cast<size_t>(h * w * anchors_per_cell), 0.0);
    for (int iy = 0; iy < h; ++iy) {
        for (int ix = 0; ix < w; ++ix) {
            for (int a = 0; a < anchors_per_cell; ++a) {
                double l0 = cls_map.at(2 * a, iy, ix);
                double l1 = cls_map.at(2 * a + 1, iy, ix);
                double m = std::max(l0, l1);
                double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
                out[static_cast<size_t>((iy * w + ix) * anchors_per_cell + a)] =
                    e1 / (e0 + e1);
            }
        }
    }
    return out;
}

Tracker::Tracker(const TrackModel& model, const RunConfig& cfg, const TrackOptions& opts)
    : model_(&model), cfg_(cfg), opts_(opts), cls_net_(model.cls_net),
      loc_net_(model.loc_net) {
    grid_ = response_grid(model.backbone);
    window_ = cosine_window(grid_);
    if (opts_.zero_delta) {
        cls_net_.fc3.w.fill(0.0);
        cls_net_.fc3.b.fill(0.0);
        loc_net_.fc3.w.fill(0.0);
        loc_net_.fc3.b.fill(0.0);
    }
}

void Tracker::adjust_from(const Tensor& m_cls, const Tensor& m_loc,
                          const LabelMap& labels) {
    th_cls_ = adjust_head(m_cls, labels, cls_net_, model_->base.cls.head1);
    th_loc_ = adjust_head(m_loc, labels, loc_net_, model_->base.loc.head1);
}

FrameRecord Tracker::init(const Tensor& frame, const BBox& gt) {
    const BackboneConfig& bb = model_->backbone;
    CropSpec zc = template_crop(gt, cfg_.template_context, bb.template_size);
    fz_ = model_->base.embed_patch(
        crop_patch(frame, zc.cx, zc.cy, zc.side, bb.template_size));

    if (opts_.mode == TrackMode::BASE) {
        th_cls_ = model_->base.cls.head1;
        th_loc_ = model_->base.loc.head1;
    } else {
        // First-frame statistics come from a search-sized window around the
        // target, same as the training-time pairing.
        CropSpec sc = search_crop(gt.cx(), gt.cy(), gt, cfg_.search_context,
                                  bb.search_size);
        Tensor fx = model_->base.embed_patch(
            crop_patch(frame, sc.cx, sc.cy, sc.side, bb.search_size));
        auto [m_cls, m_loc] = model_->base.hidden_maps(fx, fz_);
        LabelMap labels = assign_labels(grid_, box_to_patch(gt, sc));
        adjust_from(m_cls, m_loc, labels); // throws EncoderInputError on empty sets
    }

    cur_ = gt;
    frame_ = 1;
    cand_ = CandidateSet{};
    updates_fired_ = 0;
    last_candidates_.clear();
    return FrameRecord{0, gt, 1.0, 0.0, false};
}

FrameRecord Tracker::step(const Tensor& frame) {
    if (frame_ < 1) throw InternalError("Tracker::step before init");
    const BackboneConfig& bb = model_->backbone;
    CropSpec sc = search_crop(cur_.cx(), cur_.cy(), cur_, cfg_.search_context,
                              bb.search_size);
    Tensor fx = model_->base.embed_patch(
        crop_patch(frame, sc.cx, sc.cy, sc.side, bb.search_size));
    auto [m_cls, m_loc] = model_->base.hidden_maps(fx, fz_);
    Tensor cls_map = head_forward(m_cls, th_cls_);
    Tensor loc_map = head_forward(m_loc, th_loc_);

    int k = bb.anchors_per_cell;
    std::vector<double> scores = softmax_scores(cls_map, k);

    // decode every anchor once; selection applies the scale/ratio penalty
    // and the cosine window on top of the raw scores
    std::vector<BBox> boxes(scores.size());
    double wi = opts_.window_influence;
    int best = 0;
    double best_pscore = -1.0, best_penalty = 1.0;
    BBox cur_patch = box_to_patch(cur_, sc);
    double cur_sm = size_measure(cur_patch.w, cur_patch.h);
    for (int i = 0; i < grid_.count(); ++i) {
        const BBox& anchor = grid_.boxes[static_cast<size_t>(i)];
        int iy = grid_.cell_y(i), ix = grid_.cell_x(i), a = grid_.anchor_of(i);
        BBox b = decode_box(anchor, loc_map.at(4 * a, iy, ix), loc_map.at(4 * a + 1, iy, ix),
                            loc_map.at(4 * a + 2, iy, ix), loc_map.at(4 * a + 3, iy, ix));
        boxes[static_cast<size_t>(i)] = b;
        double penalty = std::exp(-opts_.penalty_k *
                                  (ratio_change(b.w / b.h, cur_patch.w / cur_patch.h) *
                                       ratio_change(size_measure(b.w, b.h), cur_sm) -
                                   1.0));
        double pscore = penalty * scores[static_cast<size_t>(i)] * (1.0 - wi) +
                        window_[static_cast<size_t>(i)] * wi;
        if (pscore > best_pscore) {
            best_pscore = pscore;
            best = i;
            best_penalty = penalty;
        }
    }

    double s_i = scores[static_cast<size_t>(best)]; // pre-penalty confidence
    BBox pred_patch = boxes[static_cast<size_t>(best)];
    BBox pred = box_to_image(pred_patch, sc);

    // damp size changes; position follows the decoded box directly
    double lr = opts_.size_lr * best_penalty * s_i;
    double nw = cur_.w * (1.0 - lr) + pred.w * lr;
    double nh = cur_.h * (1.0 - lr) + pred.h * lr;
    cur_ = BBox::from_center(pred.cx(), pred.cy(), std::max(nw, 2.0), std::max(nh, 2.0));

    if (opts_.collect_candidates) {
        last_candidates_.clear();
        last_candidates_.reserve(scores.size());
        for (size_t i = 0; i < scores.size(); ++i)
            last_candidates_.emplace_back(box_to_image(boxes[i], sc), scores[i]);
    }

    frame_ += 1;
    double eta = 0.0;
    bool updated = false;
    if (opts_.mode != TrackMode::BASE) {
        // pseudo labels around the predicted box drive the margin; the
        // re-adjustment itself only happens in the starred mode
        LabelMap pseudo = assign_labels(grid_, pred_patch);
        auto m = margin_eta(scores, pseudo);
        if (m) eta = *m;
        if (opts_.mode == TrackMode::CLNET_STAR) {
            cand_ = update_candidates(cand_, frame_, s_i, opts_.tau_r, m_cls, m_loc,
                                      pred_patch);
            if (m && *m < opts_.tau_m && cand_.present) {
                LabelMap cl = assign_labels(grid_, cand_.box_patch);
                try {
                    adjust_from(cand_.m_cls, cand_.m_loc, cl);
                    cand_ = CandidateSet{};
                    updated = true;
                    updates_fired_ += 1;
                } catch (const EncoderInputError&) {
                    // degenerate candidate labels; keep the old heads
                }
            }
        }
    }

    return FrameRecord{frame_ - 1, cur_, s_i, eta, updated};
}

TrackOutput track_sequence(const TrackModel& model, const Sequence& seq,
                           const RunConfig& cfg, const TrackOptions& opts) {
    if (seq.frame_paths.empty())
        throw InputError("track_sequence: empty sequence " + seq.id);
    Tracker tr(model, cfg, opts);
    TrackOutput out;
    out.records.reserve(seq.frame_paths.size());
    out.records.push_back(tr.init(load_pgm(seq.frame_paths[0]), seq.gt[0]));
    if (opts.collect_candidates) out.candidates.push_back({});
    for (size_t i = 1; i < seq.frame_paths.size(); ++i) {
        out.records.push_back(tr.step(load_pgm(seq.frame_paths[i])));
        if (opts.collect_candidates) out.candidates.push_back(tr.last_candidates());
    }
    return out;
}

TrackMode parse_track_mode(const std::string& name) {
    if (name == "base") return TrackMode::BASE;
    if (name == "clnet") return TrackMode::CLNET;
    if (name == "clnet-star" || name == "clnet_star") return TrackMode::CLNET_STAR;
    throw ConfigError("unknown track mode: " + name);
}

} // namespace clnet
