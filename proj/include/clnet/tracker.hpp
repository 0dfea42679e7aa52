#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "clnet/config.hpp"
#include "clnet/evalbench.hpp"
#include "clnet/model.hpp"
#include "clnet/training.hpp"

namespace clnet {

enum class TrackMode { BASE, CLNET, CLNET_STAR };

struct TrackOptions {
    TrackMode mode = TrackMode::CLNET;
    double tau_r = 0.9; // reliability threshold on the pre-penalty score
    double tau_m = 0.2; // margin threshold; -inf disables updates
    double window_influence = 0.3;
    double penalty_k = 0.2;
    double size_lr = 0.3;
    bool zero_delta = false;        // zero the deviation predictor output layer
    bool collect_candidates = false; // keep every per-anchor (box, score)
};

// Reliable-frame memory: hidden maps plus the predicted box in the capture
// crop's patch coordinates. Both parts present or neither.
struct CandidateSet {
    bool present = false;
    Tensor m_cls, m_loc;
    BBox box_patch;
};

// Candidate transition for one frame: empty at the first frame, replaced by
// the current frame when its score clears tau_r, kept otherwise.
CandidateSet update_candidates(const CandidateSet& prev, int frame_index, double score,
                               double tau_r, const Tensor& m_cls, const Tensor& m_loc,
                               const BBox& box_patch);

// Highest positive minus highest negative score under the pseudo labels;
// empty when either set has no anchors.
std::optional<double> margin_eta(const std::vector<double>& scores,
                                 const LabelMap& pseudo);

// Per-anchor positive softmax from the 2-way logit channels.
std::vector<double> softmax_scores(const Tensor& cls_map, int anchors_per_cell);

struct TrackOutput {
    std::vector<FrameRecord> records;
    // [frame][anchor] -> (box in image coords, score); filled only when
    // collect_candidates is set
    std::vector<std::vector<std::pair<BBox, double>>> candidates;
};

class Tracker {
public:
    Tracker(const TrackModel& model, const RunConfig& cfg, const TrackOptions& opts);

    // First-frame adjustment; throws EncoderInputError when the ground truth
    // yields no positive anchors.
    FrameRecord init(const Tensor& frame, const BBox& gt);
    FrameRecord step(const Tensor& frame);

    const BBox& current_box() const { return cur_; }
    const CandidateSet& candidates() const { return cand_; }
    const HeadWeights& cls_head() const { return th_cls_; }
    const HeadWeights& loc_head() const { return th_loc_; }
    const std::vector<std::pair<BBox, double>>& last_candidates() const {
        return last_candidates_;
    }
    int updates_fired() const { return updates_fired_; }

private:
    void adjust_from(const Tensor& m_cls, const Tensor& m_loc, const LabelMap& labels);

    const TrackModel* model_;
    RunConfig cfg_;
    TrackOptions opts_;
    CompactLatentNet cls_net_, loc_net_; // private copies (zero_delta mutates)
    AnchorGrid grid_;
    std::vector<double> window_; // per anchor, [0,1]
    Tensor fz_;
    HeadWeights th_cls_, th_loc_;
    BBox cur_;
    int frame_ = 0;
    CandidateSet cand_;
    int updates_fired_ = 0;
    std::vector<std::pair<BBox, double>> last_candidates_;
};

TrackOutput track_sequence(const TrackModel& model, const Sequence& seq,
                           const RunConfig& cfg, const TrackOptions& opts);

TrackMode parse_track_mode(const std::string& name);

} // namespace clnet
