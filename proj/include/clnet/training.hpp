#pragma once

#include <array>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "clnet/config.hpp"
#include "clnet/evalbench.hpp"
#include "clnet/geometry.hpp"
#include "clnet/model.hpp"

namespace clnet {

// Anchor indices backing one training pair: up to max_pos positives topped up
// with negatives to base_samples, plus mined hard negatives kept separate.
struct SampleSelection {
    std::vector<int> pos, neg, diverse;
    std::vector<int> used() const;
    int total() const {
        return static_cast<int>(pos.size() + neg.size() + diverse.size());
    }
};

SampleSelection select_training_samples(const LabelMap& labels, Rng& rng, int max_pos,
                                        int base_samples);

// Hard-negative mining on the unadjusted classification map: unused NEG
// anchors ranked by positive softmax score, descending, ties by ascending
// index. Returns at most count indices.
std::vector<int> mine_diverse_samples(const Tensor& cls_base, const LabelMap& labels,
                                      const std::vector<int>& used, int count);

// Linear warmup to lr_peak, then exponential decay to lr_end at total_steps.
double schedule_lr(int step, int total_steps, int warmup_steps, double lr_start,
                   double lr_peak, double lr_end);

struct Sgd {
    double momentum = 0.9;
    std::unordered_map<Tensor*, Tensor> velocity;
    void apply(const std::vector<std::pair<Tensor*, const Tensor*>>& grads, double lr);
};

// --- crop geometry shared by training and tracking ---

struct CropSpec {
    double cx = 0, cy = 0; // window center, image coords
    double side = 1;       // window side, image px
    int out_px = 0;
    double scale() const { return out_px / side; }
    double left() const { return cx - side / 2.0; }
    double top() const { return cy - side / 2.0; }
};

CropSpec template_crop(const BBox& box, double context, int out_px);
CropSpec search_crop(double cx, double cy, const BBox& size_ref, double context,
                     int out_px);

BBox box_to_patch(const BBox& b, const CropSpec& crop);
BBox box_to_image(const BBox& b, const CropSpec& crop);

// Anchor grid in search-patch coordinates for the configured embed stack
// (kernel 3 per block); centers sit on the receptive-field centers of the
// correlation response.
AnchorGrid response_grid(const BackboneConfig& cfg);

struct PatchTargets {
    LabelMap labels;
    std::vector<std::pair<int, std::array<double, 4>>> loc_targets; // POS only
    BBox gt_patch;
};

PatchTargets patch_targets(const AnchorGrid& grid, const BBox& gt_img,
                           const CropSpec& crop);

// Frames decoded up front so the step loop never touches disk.
struct ImageDataset {
    std::vector<Sequence> seqs;
    std::vector<std::vector<Tensor>> frames;
    static ImageDataset load(const std::vector<Sequence>& seqs);
};

struct PairPick {
    int seq = 0, frame_z = 0, frame_x = 0;
};
// One sequence per batch: the pick is (sequence, template frame, search frame)
// with the frame gap drawn from [gap_min, gap_max], clamped to what the
// sequence allows; too-short sequences are resampled.
PairPick pick_pair(const ImageDataset& ds, Rng& rng, int gap_min, int gap_max);

// Stage one: trains embedding, branch convs, and heads on the synthetic
// corpus. Appends CSV rows (step, loss_cls, loss_loc, loss_total) to log_path
// when nonempty.
void train_base(TrackModel& model, const ImageDataset& ds, const RunConfig& cfg,
                const std::string& log_path);

// Stage two: base frozen, latent nets trained with mined hard negatives in
// the classification loss. Base weights are not registered on the tape, so
// their gradients are identically absent.
void train_clnet(TrackModel& model, const ImageDataset& ds, const RunConfig& cfg,
                 const std::string& log_path);

} // namespace clnet
