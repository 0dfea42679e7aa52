#pragma once

#include <string>
#include <utility>
#include <vector>

#include "clnet/geometry.hpp"
#include "clnet/tracker.hpp"

namespace clnet {

// Decisive candidate pair for one frame: candidates split against the
// ground truth at IoU 0.5, highest-scoring box on each side. With no box on
// the positive side both scores read 0 and the difference is 0; with no
// negative box only that side reads 0.
struct FrameDiagnostics {
    bool has_p = false;
    bool has_n = false;
    BBox p_box, n_box;
    double p_score = 0.0; // P_c
    double n_score = 0.0; // N_c
    double p_overlap = 0.0;
    double n_overlap = 0.0;
    double d = 0.0; // P_c - N_c, negative means a distractor outscores the target
};

FrameDiagnostics decisive_boxes(const std::vector<std::pair<BBox, double>>& candidates,
                                const BBox& gt);

struct DiagnosticsRow {
    int frame = 0;
    double p_score = 0.0;
    double n_score = 0.0;
    double d = 0.0;
    double overlap = 0.0; // predicted box vs ground truth
};

struct SequenceDiagnostics {
    std::string id;
    std::vector<DiagnosticsRow> rows; // tracked frames only, first frame skipped
    double mean_d = 0.0;
    int faults = 0; // frames with d < 0
};

SequenceDiagnostics sequence_report(const std::string& id, const TrackOutput& out,
                                    const std::vector<BBox>& gt);

void write_diagnostics_csv(const std::string& path, const SequenceDiagnostics& diag);

} // namespace clnet
