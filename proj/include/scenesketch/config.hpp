#pragma once

#include "scenesketch/pipeline.hpp"

#include <stdexcept>
#include <string>

namespace ssk {

// Schema violation: unknown key, bad value, unreadable file. The message
// lists every offending key. CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Fully resolved run settings: training hyper-parameters plus backend
// selection and file locations. Config files are flat `key = value` lines
// grouped under [section] headers; CLI flags override file values.
struct RunConfig {
    TrainConfig train;

    std::string encoder = "clip_vit_b32"; // or "toy"
    std::string saliency = "edge";        // "edge" or "mask"
    std::string inpaint = "boundary";
    std::string weights_root; // defaults to $SCENESKETCH_WEIGHTS or ./weights
    std::string mask_path;    // used when saliency = mask
    std::string output_dir = "runs/out";

    std::string classes_path;    // defaults under weights_root/../data
    std::string templates_path;
    std::string class_embs_path; // precomputed text embeddings for real runs

    double raster_softness = 1.0;
    bool raster_parallel = true;
    bool keep_partial = false;
};

// Parses a config file. Unknown keys raise ConfigError listing all of them.
RunConfig parse_config_file(const std::string &path);

// Applies one `section.key=value` (or plain `key=value`) assignment; used for
// both file lines and flag overrides.
void apply_config_entry(RunConfig &cfg, const std::string &key, const std::string &value);

// Serializes every field as `key = value` lines for the run manifest.
std::string dump_config(const RunConfig &cfg);

std::string default_weights_root();

} // namespace ssk
