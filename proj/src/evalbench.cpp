#include "clnet/evalbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "clnet/errors.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace clnet {

namespace {

constexpr double kTau = 6.283185307179586476925286766559;

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// One moving striped rectangle.
struct Entity {
    double cx, cy, vx, vy, w, h;
    double fx, fy, phase, amp, base;
};

double pattern_value(const Entity& e, double x, double y) {
    double lx = x - (e.cx - e.w / 2.0);
    double ly = y - (e.cy - e.h / 2.0);
    return e.base + e.amp * std::sin(kTau * (e.fx * lx + e.fy * ly) + e.phase);
}

void randomize_pattern(Entity& e, Rng& rng) {
    e.fx = rng.uniform(0.08, 0.35) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    e.fy = rng.uniform(0.08, 0.35) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    e.phase = rng.uniform(0.0, kTau);
    e.amp = rng.uniform(0.20, 0.30);
    e.base = rng.uniform(0.40, 0.70);
}

void step_entity(Entity& e, Rng& rng, int canvas) {
    e.vx += rng.gauss(0.0, 0.3);
    e.vy += rng.gauss(0.0, 0.3);
    double cap = 3.0;
    e.vx = std::clamp(e.vx, -cap, cap);
    e.vy = std::clamp(e.vy, -cap, cap);
    double margin = 2.0;
    if (e.cx + e.vx - e.w / 2.0 < margin || e.cx + e.vx + e.w / 2.0 > canvas - margin)
        e.vx = -e.vx;
    if (e.cy + e.vy - e.h / 2.0 < margin || e.cy + e.vy + e.h / 2.0 > canvas - margin)
        e.vy = -e.vy;
    e.cx += e.vx;
    e.cy += e.vy;
}

void draw_entity(Tensor& img, const Entity& e) {
    int H = img.dim(1), W = img.dim(2);
    double left = e.cx - e.w / 2.0, top = e.cy - e.h / 2.0;
    int x0 = std::max(0, static_cast<int>(std::ceil(left - 0.5)));
    int y0 = std::max(0, static_cast<int>(std::ceil(top - 0.5)));
    for (int y = y0; y < H; ++y) {
        if (y + 0.5 >= top + e.h) break;
        for (int x = x0; x < W; ++x) {
            if (x + 0.5 >= left + e.w) break;
            img.at(0, y, x) = clamp01(pattern_value(e, x + 0.5, y + 0.5));
        }
    }
}

BBox parse_gt_line(const std::string& line, int lineno, bool allow_whitespace) {
    std::string fields = line;
    if (allow_whitespace) {
        for (char& c : fields)
            if (c == '\t' || c == ' ') c = ',';
    }
    std::vector<double> vals;
    std::stringstream ss(fields);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            size_t used = 0;
            vals.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw IngestError("ground-truth line " + std::to_string(lineno) +
                              ": bad number '" + item + "'");
        }
    }
    if (vals.size() != 4)
        throw IngestError("ground-truth line " + std::to_string(lineno) + ": expected " +
                          "x,y,w,h, got " + std::to_string(vals.size()) + " fields");
    if (vals[2] <= 0 || vals[3] <= 0)
        throw IngestError("ground-truth line " + std::to_string(lineno) +
                          ": nonpositive size");
    return BBox{vals[0], vals[1], vals[2], vals[3]};
}

double center_error(const BBox& a, const BBox& b) { return center_distance(a, b); }

} // namespace

Tensor load_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IngestError("cannot open image: " + path);
    auto next_token = [&]() -> std::string {
        std::string tok;
        while (is) {
            int c = is.get();
            if (c == '#') { // comment to end of line
                while (is && is.get() != '\n') {
                }
                continue;
            }
            if (std::isspace(c)) {
                if (!tok.empty()) break;
                continue;
            }
            if (c == EOF) break;
            tok += static_cast<char>(c);
        }
        return tok;
    };
    if (next_token() != "P5") throw IngestError("not a P5 PGM: " + path);
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(next_token());
        h = std::stoi(next_token());
        maxval = std::stoi(next_token());
    } catch (const std::exception&) {
        throw IngestError("bad PGM header: " + path);
    }
    if (w <= 0 || h <= 0 || maxval != 255)
        throw IngestError("unsupported PGM dims/maxval: " + path);
    std::vector<unsigned char> raw(static_cast<size_t>(w) * h);
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!is) throw IngestError("PGM pixel data truncated: " + path);
    Tensor img({1, h, w});
    for (int i = 0; i < w * h; ++i) img[i] = raw[static_cast<size_t>(i)] / 255.0;
    return img;
}

void save_pgm(const std::string& path, const Tensor& img) {
    if (img.rank() != 3 || img.dim(0) != 1)
        throw InputError("save_pgm expects a [1,H,W] tensor, got " + img.shape_str());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw InputError("cannot open image for writing: " + path);
    int h = img.dim(1), w = img.dim(2);
    os << "P5\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> raw(static_cast<size_t>(w) * h);
    for (int i = 0; i < w * h; ++i)
        raw[static_cast<size_t>(i)] =
            static_cast<unsigned char>(std::lround(clamp01(img[i]) * 255.0));
    os.write(reinterpret_cast<const char*>(raw.data()),
             static_cast<std::streamsize>(raw.size()));
    if (!os) throw InputError("write failed for image: " + path);
}

Tensor crop_patch(const Tensor& img, double cx, double cy, double side, int out_px) {
    if (img.rank() != 3 || img.dim(0) != 1)
        throw InputError("crop_patch expects a [1,H,W] tensor");
    if (side <= 0 || out_px <= 0) throw InputError("crop_patch needs positive sizes");
    int H = img.dim(1), W = img.dim(2);
    double mean = 0.0;
    for (int i = 0; i < img.numel(); ++i) mean += img[i];
    mean /= img.numel();
    double left = cx - side / 2.0, top = cy - side / 2.0;
    double scale = side / out_px;
    Tensor out({1, out_px, out_px});
    auto sample = [&](double sx, double sy) -> double {
        // bilinear over pixel centers; anything outside takes the frame mean
        double px = sx - 0.5, py = sy - 0.5;
        int x0 = static_cast<int>(std::floor(px)), y0 = static_cast<int>(std::floor(py));
        double ax = px - x0, ay = py - y0;
        double acc = 0.0;
        for (int dy = 0; dy <= 1; ++dy)
            for (int dx = 0; dx <= 1; ++dx) {
                double wgt = (dx ? ax : 1.0 - ax) * (dy ? ay : 1.0 - ay);
                int x = x0 + dx, y = y0 + dy;
                double v = (x >= 0 && x < W && y >= 0 && y < H) ? img.at(0, y, x) : mean;
                acc += wgt * v;
            }
        return acc;
    };
    for (int oy = 0; oy < out_px; ++oy)
        for (int ox = 0; ox < out_px; ++ox)
            out.at(0, oy, ox) = sample(left + (ox + 0.5) * scale, top + (oy + 0.5) * scale);
    return out;
}

Sequence load_sequence(const std::string& dir, bool allow_whitespace) {
    fs::path root(dir);
    fs::path gt_path = root / "groundtruth_rect.txt";
    std::ifstream is(gt_path);
    if (!is) throw IngestError("missing ground-truth file: " + gt_path.string());
    Sequence seq;
    seq.id = root.filename().string();
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        seq.gt.push_back(parse_gt_line(line, lineno, allow_whitespace));
    }
    fs::path img_dir = root / "img";
    if (!fs::is_directory(img_dir))
        throw IngestError("missing img/ directory under " + dir);
    for (const auto& e : fs::directory_iterator(img_dir))
        if (e.is_regular_file() && e.path().extension() == ".pgm")
            seq.frame_paths.push_back(e.path().string());
    std::sort(seq.frame_paths.begin(), seq.frame_paths.end());
    if (seq.frame_paths.size() != seq.gt.size())
        throw IngestError("sequence " + seq.id + ": " +
                          std::to_string(seq.frame_paths.size()) + " frames but " +
                          std::to_string(seq.gt.size()) + " ground-truth lines");
    if (seq.gt.empty()) throw IngestError("sequence " + seq.id + " is empty");
    return seq;
}

std::vector<Sequence> load_dataset(const std::string& dir, bool allow_whitespace) {
    if (!fs::is_directory(dir)) throw IngestError("not a dataset directory: " + dir);
    std::vector<std::string> subdirs;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_directory()) subdirs.push_back(e.path().string());
    std::sort(subdirs.begin(), subdirs.end());
    if (subdirs.empty()) throw IngestError("dataset has no sequence directories: " + dir);
    std::vector<Sequence> out;
    for (const auto& s : subdirs) out.push_back(load_sequence(s, allow_whitespace));
    return out;
}

SynthSequence synth_frames(const SynthSpec& spec) {
    if (spec.length < 2) throw InputError("synthetic sequences need length >= 2");
    Rng rng(spec.seed);
    int N = spec.canvas;

    auto make_entity = [&]() {
        Entity e;
        double long_side = rng.uniform(spec.min_size, spec.max_size);
        double aspect = rng.uniform(0.75, 1.0 / 0.75);
        if (rng.uniform() < 0.5) {
            e.w = long_side;
            e.h = long_side / aspect;
        } else {
            e.h = long_side;
            e.w = long_side / aspect;
        }
        e.cx = rng.uniform(e.w / 2.0 + 3.0, N - e.w / 2.0 - 3.0);
        e.cy = rng.uniform(e.h / 2.0 + 3.0, N - e.h / 2.0 - 3.0);
        e.vx = rng.uniform(-1.5, 1.5);
        e.vy = rng.uniform(-1.5, 1.5);
        randomize_pattern(e, rng);
        return e;
    };

    Entity target = make_entity();
    std::vector<Entity> distractors;
    for (int d = 0; d < spec.distractors; ++d) {
        Entity e = make_entity();
        for (int tries = 0; tries < 64; ++tries) {
            double dx = e.cx - target.cx, dy = e.cy - target.cy;
            if (std::sqrt(dx * dx + dy * dy) >= 25.0) break;
            e.cx = rng.uniform(e.w / 2.0 + 3.0, N - e.w / 2.0 - 3.0);
            e.cy = rng.uniform(e.h / 2.0 + 3.0, N - e.h / 2.0 - 3.0);
        }
        distractors.push_back(e);
    }

    // gradient direction for the background, fixed per sequence
    double gx = rng.uniform(0.05, 0.15), gy = rng.uniform(0.05, 0.15);

    SynthSequence out;
    bool shifted = false;
    Entity pat_from{}, pat_to{};
    for (int f = 0; f < spec.length; ++f) {
        if (f > 0) {
            step_entity(target, rng, N);
            for (Entity& d : distractors) {
                step_entity(d, rng, N);
                // keep distractors from swallowing the target box
                double dx = d.cx - target.cx, dy = d.cy - target.cy;
                double dist = std::sqrt(dx * dx + dy * dy);
                if (dist < 18.0 && dist > 1e-9) {
                    d.vx = 1.5 * dx / dist;
                    d.vy = 1.5 * dy / dist;
                }
            }
        }
        if (spec.shift_frame >= 0 && f >= spec.shift_frame && !shifted) {
            pat_from = target;
            randomize_pattern(target, rng);
            pat_to = target;
            shifted = true;
        }
        if (shifted && spec.shift_ramp > 0) {
            // morph the pattern over the ramp window instead of swapping it;
            // land exactly on the new pattern once the window closes
            double u = (f - spec.shift_frame + 1.0) / spec.shift_ramp;
            if (u >= 1.0) {
                target.fx = pat_to.fx;
                target.fy = pat_to.fy;
                target.phase = pat_to.phase;
                target.amp = pat_to.amp;
                target.base = pat_to.base;
            } else {
                target.fx = pat_from.fx + u * (pat_to.fx - pat_from.fx);
                target.fy = pat_from.fy + u * (pat_to.fy - pat_from.fy);
                target.phase = pat_from.phase + u * (pat_to.phase - pat_from.phase);
                target.amp = pat_from.amp + u * (pat_to.amp - pat_from.amp);
                target.base = pat_from.base + u * (pat_to.base - pat_from.base);
            }
        }
        Tensor img({1, N, N});
        for (int y = 0; y < N; ++y)
            for (int x = 0; x < N; ++x) {
                double v = 0.15 + gx * (static_cast<double>(x) / N) +
                           gy * (static_cast<double>(y) / N);
                if (spec.noise > 0) v += rng.gauss(0.0, spec.noise);
                img.at(0, y, x) = clamp01(v);
            }
        for (const Entity& d : distractors) draw_entity(img, d);
        draw_entity(img, target);
        out.frames.push_back(std::move(img));
        out.gt.push_back(BBox{target.cx - target.w / 2.0, target.cy - target.h / 2.0,
                              target.w, target.h});
    }
    return out;
}

Sequence synth_write(const SynthSpec& spec, const std::string& root,
                     const std::string& id) {
    SynthSequence s = synth_frames(spec);
    fs::path dir = fs::path(root) / id;
    fs::create_directories(dir / "img");
    std::ofstream gt(dir / "groundtruth_rect.txt", std::ios::trunc);
    if (!gt) throw InputError("cannot write ground truth under " + dir.string());
    Sequence seq;
    seq.id = id;
    for (size_t f = 0; f < s.frames.size(); ++f) {
        char name[32];
        std::snprintf(name, sizeof(name), "%04zu.pgm", f + 1);
        fs::path p = dir / "img" / name;
        save_pgm(p.string(), s.frames[f]);
        seq.frame_paths.push_back(p.string());
        char line[128];
        std::snprintf(line, sizeof(line), "%.4f,%.4f,%.4f,%.4f\n", s.gt[f].x, s.gt[f].y,
                      s.gt[f].w, s.gt[f].h);
        gt << line;
        seq.gt.push_back(s.gt[f]);
    }
    gt.flush();
    if (!gt) throw InputError("write failed for ground truth under " + dir.string());
    return seq;
}

std::vector<double> precision_curve(const std::vector<BBox>& preds,
                                    const std::vector<BBox>& gts) {
    if (preds.size() != gts.size())
        throw InputError("precision_curve: " + std::to_string(preds.size()) +
                         " predictions vs " + std::to_string(gts.size()) + " truths");
    std::vector<double> curve(51, 0.0);
    if (preds.empty()) return curve;
    for (size_t i = 0; i < preds.size(); ++i) {
        double err = center_error(preds[i], gts[i]);
        for (int t = 0; t <= 50; ++t)
            if (err <= t) curve[static_cast<size_t>(t)] += 1.0;
    }
    for (double& v : curve) v /= static_cast<double>(preds.size());
    return curve;
}

double success_auc(const std::vector<BBox>& preds, const std::vector<BBox>& gts) {
    if (preds.size() != gts.size())
        throw InputError("success_auc: " + std::to_string(preds.size()) +
                         " predictions vs " + std::to_string(gts.size()) + " truths");
    if (preds.empty()) return 0.0;
    double acc = 0.0;
    for (size_t i = 0; i < preds.size(); ++i) acc += iou(preds[i], gts[i]);
    return acc / static_cast<double>(preds.size());
}

std::vector<double> success_curve(const std::vector<BBox>& preds,
                                  const std::vector<BBox>& gts) {
    if (preds.size() != gts.size())
        throw InputError("success_curve: prediction/truth count mismatch");
    std::vector<double> curve(21, 0.0);
    if (preds.empty()) return curve;
    for (size_t i = 0; i < preds.size(); ++i) {
        double ov = iou(preds[i], gts[i]);
        for (int t = 0; t <= 20; ++t)
            if (ov > 0.05 * t) curve[static_cast<size_t>(t)] += 1.0;
    }
    for (double& v : curve) v /= static_cast<double>(preds.size());
    return curve;
}

BenchmarkResult run_benchmark(const std::vector<Sequence>& dataset, const TrackFn& fn) {
    BenchmarkResult result;
    std::vector<const Sequence*> ordered;
    for (const auto& s : dataset) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(),
              [](const Sequence* a, const Sequence* b) { return a->id < b->id; });
    double sum_auc = 0.0, sum_p20 = 0.0;
    int scored = 0;
    for (const Sequence* seq : ordered) {
        SeqResult r;
        r.id = seq->id;
        r.frames = seq->size();
        try {
            r.records = fn(*seq);
            if (static_cast<int>(r.records.size()) != seq->size())
                throw InternalError("tracker returned " +
                                    std::to_string(r.records.size()) + " records for " +
                                    std::to_string(seq->size()) + " frames");
            // skip the initialization frame
            std::vector<BBox> preds, gts;
            for (int f = 1; f < seq->size(); ++f) {
                preds.push_back(r.records[static_cast<size_t>(f)].box);
                gts.push_back(seq->gt[static_cast<size_t>(f)]);
            }
            r.auc = success_auc(preds, gts);
            r.precision20 = precision_curve(preds, gts)[20];
            sum_auc += r.auc;
            sum_p20 += r.precision20;
            ++scored;
        } catch (const std::exception& e) {
            r.failed = true;
            r.error = e.what();
            ++result.failures;
        }
        result.per_sequence.push_back(std::move(r));
    }
    if (scored > 0) {
        result.mean_auc = sum_auc / scored;
        result.mean_precision20 = sum_p20 / scored;
    }
    return result;
}

void write_benchmark(const BenchmarkResult& result, const std::string& run_dir) {
    fs::create_directories(fs::path(run_dir) / "frames");

    nlohmann::json summary;
    summary["mean_auc"] = result.mean_auc;
    summary["mean_precision20"] = result.mean_precision20;
    summary["failures"] = result.failures;
    summary["sequences"] = result.per_sequence.size();
    std::ofstream js(fs::path(run_dir) / "summary.json", std::ios::trunc);
    if (!js) throw InputError("cannot write summary under " + run_dir);
    js << summary.dump(2) << "\n";

    std::ofstream csv(fs::path(run_dir) / "per_sequence.csv", std::ios::trunc);
    csv << "sequence,frames,auc,precision20,failed\n";
    for (const auto& r : result.per_sequence) {
        char line[256];
        std::snprintf(line, sizeof(line), "%s,%d,%.6f,%.6f,%d\n", r.id.c_str(), r.frames,
                      r.auc, r.precision20, r.failed ? 1 : 0);
        csv << line;
    }

    for (const auto& r : result.per_sequence) {
        if (r.failed) continue;
        std::ofstream jl(fs::path(run_dir) / "frames" / (r.id + ".jsonl"), std::ios::trunc);
        for (const auto& rec : r.records) {
            nlohmann::json row;
            row["frame"] = rec.frame;
            row["x"] = rec.box.x;
            row["y"] = rec.box.y;
            row["w"] = rec.box.w;
            row["h"] = rec.box.h;
            row["score"] = rec.score;
            row["eta"] = rec.eta;
            row["updated"] = rec.updated;
            jl << row.dump() << "\n";
        }
    }
}

} // namespace clnet
