#include "scenesketch/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace ssk {

namespace {

std::string trim(const std::string &s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos)
        return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

int parse_int(const std::string &key, const std::string &v) {
    try {
        size_t pos;
        int x = std::stoi(v, &pos);
        if (pos != v.size())
            throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw ConfigError("invalid integer for " + key + ": '" + v + "'");
    }
}

double parse_double(const std::string &key, const std::string &v) {
    try {
        size_t pos;
        double x = std::stod(v, &pos);
        if (pos != v.size())
            throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw ConfigError("invalid number for " + key + ": '" + v + "'");
    }
}

bool parse_bool(const std::string &key, const std::string &v) {
    if (v == "1" || v == "true" || v == "on" || v == "yes")
        return true;
    if (v == "0" || v == "false" || v == "off" || v == "no")
        return false;
    throw ConfigError("invalid boolean for " + key + ": '" + v + "'");
}

std::vector<int> parse_int_list(const std::string &key, const std::string &v) {
    std::vector<int> out;
    std::string item;
    std::istringstream ss(v);
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty())
            out.push_back(parse_int(key, item));
    }
    if (out.empty())
        throw ConfigError("empty list for " + key);
    return out;
}

} // namespace

std::string default_weights_root() {
    if (const char *env = std::getenv("SCENESKETCH_WEIGHTS"))
        return env;
    return "weights";
}

void apply_config_entry(RunConfig &cfg, const std::string &raw_key, const std::string &raw_value) {
    std::string key = trim(raw_key);
    std::string v = trim(raw_value);
    // section prefixes are namespacing only; strip them
    if (auto dot = key.rfind('.'); dot != std::string::npos)
        key = key.substr(dot + 1);

    TrainConfig &t = cfg.train;
    if (key == "n_strokes") t.n_strokes = parse_int(key, v);
    else if (key == "iters_fidelity") t.iters_fidelity = parse_int(key, v);
    else if (key == "iters_per_simplify") t.iters_per_simplify = parse_int(key, v);
    else if (key == "learning_rate") t.learning_rate = parse_double(key, v);
    else if (key == "augmentations_per_step") t.augmentations_per_step = parse_int(key, v);
    else if (key == "fidelity_layers" || key == "layers") t.fidelity_layers = parse_int_list(key, v);
    else if (key == "simplify_levels" || key == "levels") t.simplify_levels = parse_int(key, v);
    else if (key == "matrix_rows") t.matrix_rows = parse_int_list(key, v);
    else if (key == "seed") t.seed = static_cast<unsigned>(parse_int(key, v));
    else if (key == "finetune_loc_during_simplify") t.finetune_loc_during_simplify = parse_bool(key, v);
    else if (key == "fg_geometry_layer") t.fg_geometry_layer = parse_int(key, v);
    else if (key == "use_fg_geometry_layer") t.use_fg_geometry_layer = parse_bool(key, v);
    else if (key == "hidden") t.hidden = parse_int(key, v);
    else if (key == "base_width") t.base_width = parse_double(key, v);
    else if (key == "canvas") t.canvas = parse_int(key, v);
    else if (key == "gradnorm_alpha") t.gradnorm_alpha = parse_double(key, v);
    else if (key == "gradnorm_every") t.gradnorm_every = parse_int(key, v);
    else if (key == "aug_perspective") t.aug_perspective = parse_double(key, v);
    else if (key == "aug_crop_min") t.aug_crop_min = parse_double(key, v);
    else if (key == "aug_crop_max") t.aug_crop_max = parse_double(key, v);
    else if (key == "drop_threshold") t.drop_threshold = parse_double(key, v);
    else if (key == "shared_step") t.shared_step = parse_double(key, v);
    else if (key == "shared_factor_set") t.shared_factor_set = parse_bool(key, v);
    else if (key == "jobs") t.jobs = parse_int(key, v);
    else if (key.rfind("step_layer_", 0) == 0)
        t.step_overrides[parse_int(key, key.substr(11))] = parse_double(key, v);
    else if (key == "encoder") cfg.encoder = v;
    else if (key == "saliency") cfg.saliency = v;
    else if (key == "inpaint") cfg.inpaint = v;
    else if (key == "weights_root") cfg.weights_root = v;
    else if (key == "mask_path" || key == "mask") { cfg.mask_path = v; cfg.saliency = "mask"; }
    else if (key == "output_dir") cfg.output_dir = v;
    else if (key == "classes_path") cfg.classes_path = v;
    else if (key == "templates_path") cfg.templates_path = v;
    else if (key == "class_embs_path") cfg.class_embs_path = v;
    else if (key == "raster_softness") cfg.raster_softness = parse_double(key, v);
    else if (key == "raster_parallel") cfg.raster_parallel = parse_bool(key, v);
    else if (key == "keep_partial") cfg.keep_partial = parse_bool(key, v);
    else
        throw ConfigError("unknown config key: " + key);
}

RunConfig parse_config_file(const std::string &path) {
    std::ifstream f(path);
    if (!f)
        throw ConfigError("cannot open config file: " + path);
    RunConfig cfg;
    std::string line, section, bad;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';')
            continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            bad += "  line " + std::to_string(lineno) + ": missing '='\n";
            continue;
        }
        std::string key = trim(line.substr(0, eq));
        if (!section.empty())
            key = section + "." + key;
        try {
            apply_config_entry(cfg, key, line.substr(eq + 1));
        } catch (const ConfigError &e) {
            bad += "  line " + std::to_string(lineno) + ": " + e.what() + "\n";
        }
    }
    if (!bad.empty())
        throw ConfigError("config errors in " + path + ":\n" + bad);
    if (cfg.weights_root.empty())
        cfg.weights_root = default_weights_root();
    return cfg;
}

std::string dump_config(const RunConfig &cfg) {
    const TrainConfig &t = cfg.train;
    std::ostringstream os;
    auto list = [](const std::vector<int> &v) {
        std::string s;
        for (size_t i = 0; i < v.size(); ++i)
            s += (i ? "," : "") + std::to_string(v[i]);
        return s;
    };
    os << "n_strokes = " << t.n_strokes << "\n";
    os << "iters_fidelity = " << t.iters_fidelity << "\n";
    os << "iters_per_simplify = " << t.iters_per_simplify << "\n";
    os << "learning_rate = " << t.learning_rate << "\n";
    os << "augmentations_per_step = " << t.augmentations_per_step << "\n";
    os << "fidelity_layers = " << list(t.fidelity_layers) << "\n";
    os << "simplify_levels = " << t.simplify_levels << "\n";
    os << "matrix_rows = " << list(t.matrix_rows) << "\n";
    os << "seed = " << t.seed << "\n";
    os << "finetune_loc_during_simplify = " << t.finetune_loc_during_simplify << "\n";
    os << "fg_geometry_layer = " << t.fg_geometry_layer << "\n";
    os << "use_fg_geometry_layer = " << t.use_fg_geometry_layer << "\n";
    os << "hidden = " << t.hidden << "\n";
    os << "base_width = " << t.base_width << "\n";
    os << "canvas = " << t.canvas << "\n";
    os << "gradnorm_alpha = " << t.gradnorm_alpha << "\n";
    os << "gradnorm_every = " << t.gradnorm_every << "\n";
    os << "aug_perspective = " << t.aug_perspective << "\n";
    os << "aug_crop_min = " << t.aug_crop_min << "\n";
    os << "aug_crop_max = " << t.aug_crop_max << "\n";
    os << "drop_threshold = " << t.drop_threshold << "\n";
    if (t.shared_step)
        os << "shared_step = " << *t.shared_step << "\n";
    os << "shared_factor_set = " << t.shared_factor_set << "\n";
    for (const auto &[layer, step] : t.step_overrides)
        os << "step_layer_" << layer << " = " << step << "\n";
    os << "jobs = " << t.jobs << "\n";
    os << "encoder = " << cfg.encoder << "\n";
    os << "saliency = " << cfg.saliency << "\n";
    os << "inpaint = " << cfg.inpaint << "\n";
    os << "weights_root = " << cfg.weights_root << "\n";
    if (!cfg.mask_path.empty())
        os << "mask_path = " << cfg.mask_path << "\n";
    os << "output_dir = " << cfg.output_dir << "\n";
    os << "raster_softness = " << cfg.raster_softness << "\n";
    os << "raster_parallel = " << cfg.raster_parallel << "\n";
    os << "keep_partial = " << cfg.keep_partial << "\n";
    return os.str();
}

} // namespace ssk
