#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "clnet/geometry.hpp"
#include "clnet/tensor.hpp"

namespace clnet {

// Dataset container, OTB-style on disk: <dir>/img/0001.pgm ... plus
// groundtruth_rect.txt with one "x,y,w,h" line per frame.
struct Sequence {
    std::string id;
    std::vector<std::string> frame_paths;
    std::vector<BBox> gt;
    int size() const { return static_cast<int>(gt.size()); }
};

// 8-bit grayscale PGM (P5). Values map to [0,1].
Tensor load_pgm(const std::string& path);
void save_pgm(const std::string& path, const Tensor& img);

// Bilinear crop of a square window (side px, centered at cx,cy in continuous
// image coords) resampled to out_px. Out-of-frame samples take the frame mean.
Tensor crop_patch(const Tensor& img, double cx, double cy, double side, int out_px);

Sequence load_sequence(const std::string& dir, bool allow_whitespace = false);
std::vector<Sequence> load_dataset(const std::string& dir, bool allow_whitespace = false);

struct SynthSpec {
    uint64_t seed = 0;
    int length = 40;
    int canvas = 80;
    int distractors = 2;
    double noise = 0.02;
    int shift_frame = -1; // target appearance changes from this frame on
    int shift_ramp = 0;   // frames the pattern morph is spread over; 0 swaps at once
    double min_size = 14.0;
    double max_size = 20.0;
};

// In-memory rendering; frames are [1,H,W] in [0,1].
struct SynthSequence {
    std::vector<Tensor> frames;
    std::vector<BBox> gt;
};

SynthSequence synth_frames(const SynthSpec& spec);

// Render and persist one sequence under <root>/<id>/; returns the loadable
// Sequence record.
Sequence synth_write(const SynthSpec& spec, const std::string& root,
                     const std::string& id);

// --- OPE metrics ---

// curve[t] = fraction of frames whose center error is <= t px, t = 0..50.
std::vector<double> precision_curve(const std::vector<BBox>& preds,
                                    const std::vector<BBox>& gts);

// Mean IoU over frames; the fine-threshold-grid limit of the overlap success
// curve, which makes perfect/opposite/half-split inputs score exactly 1/0/0.5.
double success_auc(const std::vector<BBox>& preds, const std::vector<BBox>& gts);

// 21-point overlap success curve (thresholds 0, 0.05, ..., 1.0) kept for
// report plotting; success at t = fraction of frames with IoU > t.
std::vector<double> success_curve(const std::vector<BBox>& preds,
                                  const std::vector<BBox>& gts);

// --- results bundle ---

// One tracker output line; serialized as JSONL under frames/<seq>.jsonl.
struct FrameRecord {
    int frame = 0;
    BBox box;
    double score = 0.0;
    double eta = 0.0;
    bool updated = false;
};

struct SeqResult {
    std::string id;
    int frames = 0;
    double auc = 0.0;
    double precision20 = 0.0;
    bool failed = false;
    std::string error;
    std::vector<FrameRecord> records;
};

struct BenchmarkResult {
    std::vector<SeqResult> per_sequence;
    double mean_auc = 0.0;
    double mean_precision20 = 0.0;
    int failures = 0;
};

using TrackFn = std::function<std::vector<FrameRecord>(const Sequence&)>;

// Runs the tracker over every sequence; a throwing sequence is recorded as a
// failure and the run continues. The first frame (initialization) is excluded
// from the metrics. Results merge in sequence-id order.
BenchmarkResult run_benchmark(const std::vector<Sequence>& dataset, const TrackFn& fn);

// Writes summary.json, per_sequence.csv, and frames/<id>.jsonl under run_dir.
void write_benchmark(const BenchmarkResult& result, const std::string& run_dir);

} // namespace clnet
