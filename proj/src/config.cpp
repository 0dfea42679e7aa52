#include "clnet/config.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "clnet/errors.hpp"

namespace clnet {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

long long parse_int(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        long long out = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return out;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected integer, got '" + v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    if (v == "-inf") return -std::numeric_limits<double>::infinity();
    if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
    try {
        size_t used = 0;
        double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return out;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected number, got '" + v + "'");
    }
}

std::vector<std::string> split_csv(const std::string& v) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss(v);
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    if (!v.empty() && v.back() == ',') out.push_back("");
    return out;
}

std::vector<int> parse_ints(const std::string& key, const std::string& v) {
    std::vector<int> out;
    for (const auto& item : split_csv(v))
        out.push_back(static_cast<int>(parse_int(key, item)));
    return out;
}

std::vector<double> parse_doubles(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& item : split_csv(v)) out.push_back(parse_double(key, item));
    return out;
}

std::string fmt_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_ints(const std::vector<int>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

std::string fmt_doubles(const std::vector<double>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += fmt_double(v[i]);
    }
    return out;
}

struct SchemaEntry {
    const char* key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define INT_KEY(name, field)                                                            \
    {name, [](RunConfig& c, const std::string& v) {                                     \
         c.field = static_cast<int>(parse_int(name, v));                                \
     },                                                                                 \
     [](const RunConfig& c) { return std::to_string(c.field); }}
#define DBL_KEY(name, field)                                                            \
    {name, [](RunConfig& c, const std::string& v) { c.field = parse_double(name, v); }, \
     [](const RunConfig& c) { return fmt_double(c.field); }}
#define STR_KEY(name, field)                                                            \
    {name, [](RunConfig& c, const std::string& v) { c.field = v; },                     \
     [](const RunConfig& c) { return c.field; }}

const std::vector<SchemaEntry>& schema() {
    static const std::vector<SchemaEntry> s = {
        {"seed",
         [](RunConfig& c, const std::string& v) {
             c.seed = static_cast<uint64_t>(parse_int("seed", v));
         },
         [](const RunConfig& c) { return std::to_string(c.seed); }},
        STR_KEY("results_root", results_root),
        INT_KEY("model.template_size", template_size),
        INT_KEY("model.search_size", search_size),
        {"model.embed_widths",
         [](RunConfig& c, const std::string& v) {
             c.embed_widths = parse_ints("model.embed_widths", v);
         },
         [](const RunConfig& c) { return fmt_ints(c.embed_widths); }},
        {"model.embed_strides",
         [](RunConfig& c, const std::string& v) {
             c.embed_strides = parse_ints("model.embed_strides", v);
         },
         [](const RunConfig& c) { return fmt_ints(c.embed_strides); }},
        INT_KEY("model.head_hidden", head_hidden),
        INT_KEY("model.anchors_per_cell", anchors_per_cell),
        DBL_KEY("model.anchor_scale", anchor_scale),
        {"model.anchor_ratios",
         [](RunConfig& c, const std::string& v) {
             c.anchor_ratios = parse_doubles("model.anchor_ratios", v);
         },
         [](const RunConfig& c) { return fmt_doubles(c.anchor_ratios); }},
        DBL_KEY("model.template_context", template_context),
        DBL_KEY("model.search_context", search_context),
        INT_KEY("clnet.latent_channels", latent_channels),
        INT_KEY("clnet.hidden", hidden),
        STR_KEY("clnet.augmentation", augmentation),
        STR_KEY("clnet.fc_delta_mode", fc_delta_mode),
        STR_KEY("training.dataset", train_dataset),
        INT_KEY("training.base_steps", base_steps),
        INT_KEY("training.steps", steps),
        INT_KEY("training.batch_size", batch_size),
        INT_KEY("training.warmup_steps", warmup_steps),
        DBL_KEY("training.lr_start", lr_start),
        DBL_KEY("training.lr_peak", lr_peak),
        DBL_KEY("training.lr_end", lr_end),
        DBL_KEY("training.momentum", momentum),
        DBL_KEY("training.lambda", lambda),
        INT_KEY("training.max_pos", max_pos),
        INT_KEY("training.base_samples", base_samples),
        INT_KEY("training.diverse_count", diverse_count),
        INT_KEY("training.frame_gap_min", frame_gap_min),
        INT_KEY("training.frame_gap_max", frame_gap_max),
        DBL_KEY("training.center_jitter", center_jitter),
        DBL_KEY("tracking.tau_r", tau_r),
        DBL_KEY("tracking.tau_m", tau_m),
        DBL_KEY("tracking.window_influence", window_influence),
        DBL_KEY("tracking.penalty_k", penalty_k),
        DBL_KEY("tracking.size_lr", size_lr),
        STR_KEY("eval.dataset", eval_dataset),
        STR_KEY("eval.run_id", run_id),
        STR_KEY("synth.out", synth_out),
        INT_KEY("synth.count", synth_count),
        INT_KEY("synth.length", synth_length),
        INT_KEY("synth.canvas", synth_canvas),
        INT_KEY("synth.distractors", synth_distractors),
        DBL_KEY("synth.noise", synth_noise),
        INT_KEY("synth.shift_frame", synth_shift_frame),
        INT_KEY("synth.shift_ramp", synth_shift_ramp),
        DBL_KEY("synth.min_size", synth_min_size),
        DBL_KEY("synth.max_size", synth_max_size),
    };
    return s;
}

#undef INT_KEY
#undef DBL_KEY
#undef STR_KEY

} // namespace

void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& entry : schema()) {
        if (key == entry.key) {
            entry.set(cfg, value);
            return;
        }
    }
    throw ConfigError("unknown config key '" + key + "'");
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::string section;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError("line " + std::to_string(lineno) +
                                  ": malformed section header '" + t + "'");
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        std::string dotted = section.empty() ? key : section + "." + key;
        try {
            set_config_key(cfg, dotted, value);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot open config file: " + path);
    std::stringstream buf;
    buf << is.rdbuf();
    return parse_config_text(buf.str());
}

void validate_config(const RunConfig& cfg) {
    auto req = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError(msg);
    };
    req(cfg.template_size > 0 && cfg.search_size > cfg.template_size,
        "model sizes must satisfy 0 < template_size < search_size");
    req(!cfg.embed_widths.empty(), "model.embed_widths must not be empty");
    req(cfg.embed_widths.size() == cfg.embed_strides.size(),
        "model.embed_widths and model.embed_strides must have equal length");
    for (int w : cfg.embed_widths) req(w > 0, "model.embed_widths entries must be > 0");
    for (int s : cfg.embed_strides) req(s > 0, "model.embed_strides entries must be > 0");
    req(cfg.head_hidden > 0, "model.head_hidden must be > 0");
    req(cfg.anchors_per_cell > 0, "model.anchors_per_cell must be > 0");
    req(static_cast<int>(cfg.anchor_ratios.size()) == cfg.anchors_per_cell,
        "model.anchor_ratios must list exactly model.anchors_per_cell values");
    req(cfg.anchor_scale > 0, "model.anchor_scale must be > 0");
    req(cfg.template_context > 0 && cfg.search_context >= cfg.template_context,
        "crop contexts must satisfy 0 < template_context <= search_context");
    req(cfg.latent_channels > 0 && cfg.hidden > 0, "clnet dims must be > 0");
    req(cfg.augmentation == "additive" || cfg.augmentation == "cbam" ||
            cfg.augmentation == "film",
        "clnet.augmentation must be additive, cbam, or film");
    req(cfg.fc_delta_mode == "template" || cfg.fc_delta_mode == "response",
        "clnet.fc_delta_mode must be template or response");
    req(cfg.lambda > 0, "training.lambda must be > 0");
    req(cfg.batch_size > 0 && cfg.steps >= 0 && cfg.base_steps >= 0,
        "training counts must be nonnegative (batch_size > 0)");
    req(cfg.max_pos > 0 && cfg.base_samples >= cfg.max_pos,
        "training.base_samples must be >= training.max_pos");
    req(cfg.diverse_count >= 0, "training.diverse_count must be >= 0");
    req(cfg.frame_gap_min >= 1 && cfg.frame_gap_max >= cfg.frame_gap_min,
        "training frame gap must satisfy 1 <= min <= max");
    req(cfg.warmup_steps >= 0, "training.warmup_steps must be >= 0");
    req(cfg.lr_start > 0 && cfg.lr_peak > 0 && cfg.lr_end > 0,
        "learning rates must be > 0");
    req(cfg.momentum >= 0 && cfg.momentum < 1, "training.momentum must be in [0,1)");
    req(cfg.window_influence >= 0 && cfg.window_influence <= 1,
        "tracking.window_influence must be in [0,1]");
    req(cfg.penalty_k >= 0, "tracking.penalty_k must be >= 0");
    req(cfg.size_lr >= 0 && cfg.size_lr <= 1, "tracking.size_lr must be in [0,1]");
    req(cfg.synth_length >= 2, "synth.length must be >= 2");
    req(cfg.synth_canvas >= 32, "synth.canvas must be >= 32");
    req(cfg.synth_distractors >= 0, "synth.distractors must be >= 0");
    req(cfg.synth_noise >= 0, "synth.noise must be >= 0");
    req(cfg.synth_shift_ramp >= 0, "synth.shift_ramp must be >= 0");
    req(cfg.synth_min_size >= 4 && cfg.synth_max_size >= cfg.synth_min_size,
        "synth sizes must satisfy 4 <= min <= max");
}

std::string canonical_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& entry : schema()) {
        out += entry.key;
        out += "=";
        out += entry.get(cfg);
        out += "\n";
    }
    return out;
}

uint64_t fnv1a64(const std::string& text) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

uint64_t config_hash(const RunConfig& cfg) { return fnv1a64(canonical_config(cfg)); }

std::string resolve_results_root(const RunConfig& cfg) {
    if (!cfg.results_root.empty()) return cfg.results_root;
    if (const char* env = std::getenv("CLNET_RESULTS_ROOT"); env && *env) return env;
    return "./results";
}

std::string derive_run_id(const RunConfig& cfg, const std::string& tag) {
    if (!cfg.run_id.empty()) return cfg.run_id;
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%08llx",
                  static_cast<unsigned long long>(config_hash(cfg) & 0xffffffffull));
    std::string id = "run-";
    id += buf;
    if (!tag.empty()) id += "-" + tag;
    return id;
}

} // namespace clnet
