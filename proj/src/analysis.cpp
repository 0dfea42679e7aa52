#include "clnet/analysis.hpp"

#include <fstream>

#include "clnet/errors.hpp"

namespace clnet {

FrameDiagnostics decisive_boxes(const std::vector<std::pair<BBox, double>>& candidates,
                                const BBox& gt) {
    FrameDiagnostics out;
    for (const auto& [box, score] : candidates) {
        double o = iou(box, gt);
        if (o >= 0.5) {
            if (!out.has_p || score > out.p_score) {
                out.has_p = true;
                out.p_box = box;
                out.p_score = score;
                out.p_overlap = o;
            }
        } else {
            if (!out.has_n || score > out.n_score) {
                out.has_n = true;
                out.n_box = box;
                out.n_score = score;
                out.n_overlap = o;
            }
        }
    }
    if (!out.has_p) {
        // no candidate covers the target; the comparison is void
        out.p_score = 0.0;
        out.n_score = 0.0;
        out.d = 0.0;
    } else {
        if (!out.has_n) out.n_score = 0.0;
        out.d = out.p_score - out.n_score;
    }
    return out;
}

SequenceDiagnostics sequence_report(const std::string& id, const TrackOutput& out,
                                    const std::vector<BBox>& gt) {
    if (out.candidates.size() != out.records.size())
        throw InputError("sequence_report: run was not made with candidate collection");
    if (gt.size() < out.records.size())
        throw InputError("sequence_report: ground truth shorter than the run");
    SequenceDiagnostics diag;
    diag.id = id;
    double sum_d = 0.0;
    for (size_t i = 1; i < out.records.size(); ++i) {
        FrameDiagnostics fd = decisive_boxes(out.candidates[i], gt[i]);
        DiagnosticsRow row;
        row.frame = out.records[i].frame;
        row.p_score = fd.p_score;
        row.n_score = fd.n_score;
        row.d = fd.d;
        row.overlap = iou(out.records[i].box, gt[i]);
        diag.rows.push_back(row);
        sum_d += fd.d;
        if (fd.d < 0.0) diag.faults += 1;
    }
    if (!diag.rows.empty()) diag.mean_d = sum_d / static_cast<double>(diag.rows.size());
    return diag;
}

void write_diagnostics_csv(const std::string& path, const SequenceDiagnostics& diag) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw InputError("cannot write " + path);
    f << "frame,p_score,n_score,d,overlap\n";
    for (const auto& r : diag.rows) {
        f << r.frame << ',' << r.p_score << ',' << r.n_score << ',' << r.d << ','
          << r.overlap << '\n';
    }
    f << "# mean_d=" << diag.mean_d << " faults=" << diag.faults << '\n';
}

} // namespace clnet
