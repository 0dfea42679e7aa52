#pragma once

#include <string>

#include "clnet/checkpoint.hpp"
#include "clnet/config.hpp"
#include "clnet/latent_net.hpp"
#include "clnet/siamese.hpp"

namespace clnet {

Augmentation parse_augmentation(const std::string& name);
FcDeltaMode parse_fc_delta_mode(const std::string& name);

BackboneConfig backbone_from(const RunConfig& cfg);

// Base tracker plus one latent net per adapted branch (classification and
// regression). Checkpoints cover parameters and normalization buffers.
struct TrackModel {
    BackboneConfig backbone;
    CLNetConfig cls_cfg, loc_cfg;
    RpnModel base;
    CompactLatentNet cls_net, loc_net;

    static TrackModel make(const RunConfig& cfg, Rng& rng);

    void base_params(NamedTensors& out);
    void clnet_params(NamedTensors& out);
    void named_all(NamedTensors& out); // params + buffers, checkpoint contents
};

void save_model(const std::string& path, TrackModel& model, uint64_t config_hash);
// Strict: checkpoint must carry exactly the model's tensor set.
uint64_t load_model(const std::string& path, TrackModel& model);

} // namespace clnet
