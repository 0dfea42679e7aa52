#include "clnet/model.hpp"

#include "clnet/errors.hpp"

namespace clnet {

Augmentation parse_augmentation(const std::string& name) {
    if (name == "additive") return Augmentation::ADDITIVE;
    if (name == "cbam") return Augmentation::CBAM;
    if (name == "film") return Augmentation::FILM;
    throw ConfigError("unknown augmentation '" + name + "'");
}

FcDeltaMode parse_fc_delta_mode(const std::string& name) {
    if (name == "template") return FcDeltaMode::TEMPLATE;
    if (name == "response") return FcDeltaMode::RESPONSE;
    throw ConfigError("unknown fc_delta_mode '" + name + "'");
}

BackboneConfig backbone_from(const RunConfig& cfg) {
    BackboneConfig b;
    b.embed_widths = cfg.embed_widths;
    b.embed_strides = cfg.embed_strides;
    b.embed_channels = cfg.embed_widths.back();
    b.head_hidden = cfg.head_hidden;
    b.anchors_per_cell = cfg.anchors_per_cell;
    b.template_size = cfg.template_size;
    b.search_size = cfg.search_size;
    double stride = 1.0;
    for (int s : cfg.embed_strides) stride *= s;
    b.anchor_stride = stride;
    b.anchor_scales = {cfg.anchor_scale};
    b.anchor_ratios = cfg.anchor_ratios;
    return b;
}

TrackModel TrackModel::make(const RunConfig& cfg, Rng& rng) {
    validate_config(cfg);
    TrackModel m;
    m.backbone = backbone_from(cfg);
    m.base = RpnModel::make(m.backbone, rng);
    m.backbone.map_size = m.base.response_size();

    m.cls_cfg.latent_channels = cfg.latent_channels;
    m.cls_cfg.hidden = cfg.hidden;
    m.cls_cfg.augmentation = parse_augmentation(cfg.augmentation);
    m.cls_cfg.branch = Branch::CLS;
    m.cls_cfg.fc_delta_mode = parse_fc_delta_mode(cfg.fc_delta_mode);
    m.loc_cfg = m.cls_cfg;
    m.loc_cfg.branch = Branch::REG;

    int hidden_ch = m.backbone.head_hidden;
    m.cls_net = CompactLatentNet::make(
        m.cls_cfg, hidden_ch,
        delta_length(m.cls_cfg, m.backbone.cls_out(), hidden_ch), rng);
    m.loc_net = CompactLatentNet::make(
        m.loc_cfg, hidden_ch,
        delta_length(m.loc_cfg, m.backbone.loc_out(), hidden_ch), rng);
    return m;
}

void TrackModel::base_params(NamedTensors& out) { base.params(out); }

void TrackModel::clnet_params(NamedTensors& out) {
    cls_net.params("clnet.cls", out);
    loc_net.params("clnet.loc", out);
}

void TrackModel::named_all(NamedTensors& out) {
    base.params(out);
    base.buffers(out);
    cls_net.params("clnet.cls", out);
    cls_net.buffers("clnet.cls", out);
    loc_net.params("clnet.loc", out);
    loc_net.buffers("clnet.loc", out);
}

void save_model(const std::string& path, TrackModel& model, uint64_t config_hash) {
    NamedTensors named;
    model.named_all(named);
    save_checkpoint(path, capture(named, config_hash));
}

uint64_t load_model(const std::string& path, TrackModel& model) {
    Checkpoint ck = load_checkpoint(path);
    NamedTensors named;
    model.named_all(named);
    restore_into(ck, named);
    return ck.config_hash;
}

} // namespace clnet
