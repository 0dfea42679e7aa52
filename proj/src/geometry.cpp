#include "clnet/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "clnet/errors.hpp"

namespace clnet {

bool BBox::valid() const {
    return w > 0.0 && h > 0.0 && std::isfinite(x) && std::isfinite(y) &&
           std::isfinite(w) && std::isfinite(h);
}

double iou(const BBox& a, const BBox& b) {
    double ix = std::max(a.x, b.x);
    double iy = std::max(a.y, b.y);
    double ir = std::min(a.right(), b.right());
    double ib = std::min(a.bottom(), b.bottom());
    double iw = std::max(0.0, ir - ix);
    double ih = std::max(0.0, ib - iy);
    double inter = iw * ih;
    // areas from the same corner arithmetic as the intersection, so
    // identical boxes land on exactly 1
    double area_a = (a.right() - a.x) * (a.bottom() - a.y);
    double area_b = (b.right() - b.x) * (b.bottom() - b.y);
    double uni = area_a + area_b - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

double center_distance(const BBox& a, const BBox& b) {
    double dx = a.cx() - b.cx();
    double dy = a.cy() - b.cy();
    return std::sqrt(dx * dx + dy * dy);
}

AnchorGrid AnchorGrid::translated(double dx, double dy) const {
    AnchorGrid g = *this;
    for (auto& box : g.boxes) {
        box.x += dx;
        box.y += dy;
    }
    return g;
}

AnchorGrid generate_anchors(int width, int height, int k, double stride,
                            const std::vector<double>& scales,
                            const std::vector<double>& ratios) {
    if (width <= 0 || height <= 0 || k <= 0 || stride <= 0.0)
        throw ConfigError("generate_anchors: dimensions and stride must be positive");
    if (static_cast<int>(scales.size() * ratios.size()) != k)
        throw ConfigError("generate_anchors: |scales|*|ratios| must equal anchors_per_cell");

    AnchorGrid grid;
    grid.width = width;
    grid.height = height;
    grid.anchors_per_cell = k;
    grid.stride = stride;
    grid.boxes.reserve(static_cast<size_t>(width) * height * k);

    double ox = (width - 1) / 2.0;
    double oy = (height - 1) / 2.0;
    for (int iy = 0; iy < height; ++iy) {
        for (int ix = 0; ix < width; ++ix) {
            double cx = (ix - ox) * stride;
            double cy = (iy - oy) * stride;
            for (double s : scales) {
                for (double r : ratios) {
                    double base = stride * s;
                    double w = base / std::sqrt(r);
                    double h = base * std::sqrt(r);
                    grid.boxes.push_back(BBox::from_center(cx, cy, w, h));
                }
            }
        }
    }
    return grid;
}

std::vector<int> LabelMap::indices_of(Label l) const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
        if (labels[static_cast<size_t>(i)] == l) out.push_back(i);
    return out;
}

LabelMap assign_labels(const AnchorGrid& anchors, const BBox& gt,
                       double neg_thr, double pos_thr) {
    if (!(0.0 <= neg_thr && neg_thr < pos_thr && pos_thr <= 1.0))
        throw ConfigError("assign_labels: need 0 <= neg_thr < pos_thr <= 1");

    LabelMap map;
    map.labels.reserve(anchors.boxes.size());
    for (const BBox& a : anchors.boxes) {
        double v = iou(a, gt);
        if (v > pos_thr) {
            map.labels.push_back(Label::POS);
            ++map.pos_count;
        } else if (v < neg_thr) {
            map.labels.push_back(Label::NEG);
            ++map.neg_count;
        } else {
            map.labels.push_back(Label::IGNORE);
        }
    }
    return map;
}

std::array<double, 4> encode_box(const BBox& gt, const BBox& anchor) {
    return {(gt.cx() - anchor.cx()) / anchor.w,
            (gt.cy() - anchor.cy()) / anchor.h,
            std::log(gt.w / anchor.w),
            std::log(gt.h / anchor.h)};
}

BBox decode_box(const BBox& anchor, double dx, double dy, double dw, double dh) {
    double cx = anchor.cx() + dx * anchor.w;
    double cy = anchor.cy() + dy * anchor.h;
    double w = anchor.w * std::exp(dw);
    double h = anchor.h * std::exp(dh);
    return BBox::from_center(cx, cy, w, h);
}

} // namespace clnet
