#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace clnet {

// Axis-aligned box, (left, top, width, height) in pixels. Matches the
// OTB ground-truth line format `x,y,w,h`; center form is derived.
struct BBox {
    double x = 0.0;
    double y = 0.0;
    double w = 1.0;
    double h = 1.0;

    double cx() const { return x + w / 2.0; }
    double cy() const { return y + h / 2.0; }
    double right() const { return x + w; }
    double bottom() const { return y + h; }
    double area() const { return w * h; }
    bool valid() const;

    static BBox from_center(double cx, double cy, double w, double h) {
        return BBox{cx - w / 2.0, cy - h / 2.0, w, h};
    }
};

double iou(const BBox& a, const BBox& b);
double center_distance(const BBox& a, const BBox& b);

enum class Label : uint8_t { NEG = 0, POS = 1, IGNORE = 2 };

// w x h x k anchor boxes, centered on the origin; callers translate to the
// search-region center. Flat index = (iy * width + ix) * k + a, with a
// iterating scale-major over (scales x ratios).
struct AnchorGrid {
    int width = 0;
    int height = 0;
    int anchors_per_cell = 0;
    double stride = 0.0;
    std::vector<BBox> boxes;

    int count() const { return static_cast<int>(boxes.size()); }
    int cell_of(int index) const { return index / anchors_per_cell; }
    int cell_x(int index) const { return cell_of(index) % width; }
    int cell_y(int index) const { return cell_of(index) / width; }
    int anchor_of(int index) const { return index % anchors_per_cell; }

    AnchorGrid translated(double dx, double dy) const;
};

// Anchor side lengths are stride*scale, reshaped per aspect ratio r = h/w.
AnchorGrid generate_anchors(int width, int height, int k, double stride,
                            const std::vector<double>& scales,
                            const std::vector<double>& ratios);

struct LabelMap {
    std::vector<Label> labels;
    int pos_count = 0;
    int neg_count = 0;

    int size() const { return static_cast<int>(labels.size()); }
    Label operator[](int i) const { return labels[static_cast<size_t>(i)]; }
    std::vector<int> indices_of(Label l) const;
};

// POS iff IoU > pos_thr, NEG iff IoU < neg_thr, IGNORE otherwise.
LabelMap assign_labels(const AnchorGrid& anchors, const BBox& gt,
                       double neg_thr = 0.3, double pos_thr = 0.6);

// Offset parameterization relative to an anchor: (dx, dy, dw, dh) with
// dx = (gcx - acx)/aw, dw = log(gw/aw), etc.
std::array<double, 4> encode_box(const BBox& gt, const BBox& anchor);
BBox decode_box(const BBox& anchor, double dx, double dy, double dw, double dh);

} // namespace clnet
