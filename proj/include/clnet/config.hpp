#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace clnet {

// Effective run configuration. Parsed from an INI-style file ([section]
// headers, key = value lines, # or ; comments), then overridden by
// --set section.key=value flags. Unknown keys are rejected so typos fail
// loudly instead of silently running defaults.
struct RunConfig {
    // top level
    uint64_t seed = 0;
    std::string results_root; // empty -> CLNET_RESULTS_ROOT env -> ./results

    // [model]
    int template_size = 24;
    int search_size = 48;
    std::vector<int> embed_widths{12, 16, 16};
    std::vector<int> embed_strides{2, 1, 1};
    int head_hidden = 24;
    int anchors_per_cell = 5;
    double anchor_scale = 6.0;
    std::vector<double> anchor_ratios{0.33, 0.5, 1.0, 2.0, 3.0};
    double template_context = 2.0; // crop side = context * max(w,h)
    double search_context = 4.0;

    // [clnet]
    int latent_channels = 8;
    int hidden = 16;
    std::string augmentation = "additive"; // additive | cbam | film
    std::string fc_delta_mode = "template"; // template | response

    // [training]
    std::string train_dataset;
    int base_steps = 600;
    int steps = 500;
    int batch_size = 8;
    int warmup_steps = 50;
    double lr_start = 1e-3;
    double lr_peak = 0.05;
    double lr_end = 1e-3;
    double momentum = 0.9;
    double lambda = 1.2;
    int max_pos = 16;
    int base_samples = 64;
    int diverse_count = 16;
    int frame_gap_min = 1;
    int frame_gap_max = 100;
    double center_jitter = 4.0; // px at search-patch scale

    // [tracking]
    double tau_r = 0.9;
    double tau_m = 0.2; // accepts -inf
    double window_influence = 0.3;
    double penalty_k = 0.2;
    double size_lr = 0.3;

    // [eval]
    std::string eval_dataset;
    std::string run_id; // empty -> derived from config hash + mode

    // [synth]
    std::string synth_out;
    int synth_count = 12;
    int synth_length = 40;
    int synth_canvas = 80;
    int synth_distractors = 2;
    double synth_noise = 0.02;
    int synth_shift_frame = -1; // -1 disables the appearance shift
    int synth_shift_ramp = 0;   // frames the shift is spread over; 0 swaps at once
    double synth_min_size = 14.0;
    double synth_max_size = 20.0;
};

// Set one dotted key ("training.steps", "seed"); throws ConfigError on
// unknown keys or unparsable values.
void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value);

// Parse file text over the defaults. Later assignments win.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config_file(const std::string& path);

// Cross-field checks (widths/strides aligned, ratios count, positive dims...).
void validate_config(const RunConfig& cfg);

// Full schema rendered in fixed order; two configs hash equal iff every
// effective value matches.
std::string canonical_config(const RunConfig& cfg);
uint64_t fnv1a64(const std::string& text);
uint64_t config_hash(const RunConfig& cfg);

// Precedence: config value, then CLNET_RESULTS_ROOT, then ./results.
std::string resolve_results_root(const RunConfig& cfg);

// Stable id for a results bundle: explicit run_id or run-<hash8>-<tag>.
std::string derive_run_id(const RunConfig& cfg, const std::string& tag);

} // namespace clnet
