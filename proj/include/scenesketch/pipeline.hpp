#pragma once

#include "scenesketch/augment.hpp"
#include "scenesketch/encoder.hpp"
#include "scenesketch/losses.hpp"
#include "scenesketch/networks.hpp"
#include "scenesketch/raster.hpp"
#include "scenesketch/scene.hpp"
#include "scenesketch/scheduler.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ssk {

struct TrainConfig {
    int n_strokes = 64;
    int iters_fidelity = 2000;
    int iters_per_simplify = 500;
    double learning_rate = 1e-4;
    int augmentations_per_step = 4;
    std::vector<int> fidelity_layers{2, 7, 8, 11};
    int simplify_levels = 8;               // m
    std::vector<int> matrix_rows{0, 2, 4, 7}; // presented subset of the m levels
    unsigned seed = 0;
    bool finetune_loc_during_simplify = true;
    int fg_geometry_layer = 4;  // extra foreground loss layer
    bool use_fg_geometry_layer = true;
    int hidden = 512;
    double base_width = 1.5;
    int canvas = 224;
    double gradnorm_alpha = 0.12;
    int gradnorm_every = 20;
    double aug_perspective = 0.3;
    double aug_crop_min = 0.8;
    double aug_crop_max = 1.0;
    double drop_threshold = 0.1;
    std::map<int, double> step_overrides;  // layer -> simplification step size
    std::optional<double> shared_step;     // ablation: one step size for all layers
    bool shared_factor_set = false;        // ablation: reuse layer 0's factors everywhere
    int jobs = 1;
};

struct LossLogRow {
    std::string region;
    int layer = 0;
    int level = -1; // -1 = fidelity phase
    int iteration = 0;
    double clip = 0, sparse = 0, ratio = 0, total = 0;
    double w_clip = 1, w_sparse = 1, w_ratio = 1;
};

struct PipelineError : std::runtime_error {
    std::string checkpoint_path;
    PipelineError(const std::string &msg, std::string ckpt)
        : std::runtime_error(msg), checkpoint_path(std::move(ckpt)) {}
};

struct FidelityResult {
    Sketch sketch; // all probabilities 1
    LocNet loc;
    Eigen::VectorXd z_init;
    double final_clip = 0.0; // unaugmented clip loss at the trained sketch
};

FidelityResult train_fidelity(const Image &target, int layer, const TrainConfig &cfg, const Encoder &encoder,
                              const SoftRasterizer &raster, Region region, std::vector<Stroke> init_strokes,
                              unsigned seed, std::vector<LossLogRow> *log = nullptr);

// Iterative simplification: m levels sharing networks (warm start, never
// reset). Clip gradients reach both networks; sparse and ratio gradients
// reach only the probability net.
std::vector<Sketch> simplify_sequence(const Image &target, FidelityResult &fid, int layer,
                                      const TrainConfig &cfg, const Encoder &encoder,
                                      const SoftRasterizer &raster, Region region, double step_size,
                                      unsigned seed, std::vector<LossLogRow> *log = nullptr,
                                      SimplificationSchedule *schedule_out = nullptr);

struct PipelineBackends {
    std::shared_ptr<Encoder> encoder;
    std::shared_ptr<SaliencyBackend> saliency;
    std::shared_ptr<InpaintBackend> inpaint;
    RasterSettings raster;
};

struct AbstractionMatrix {
    // (layer, level) -> sketch; levels are the presented matrix_rows
    std::map<std::pair<int, int>, Sketch> fg, bg, combined;
    std::vector<std::string> missing_cells;
    SceneDecomposition scene;
    std::vector<LossLogRow> losses;
    std::map<std::pair<std::string, int>, SimplificationSchedule> schedules; // (region, layer)
};

// Full build: decompose -> per region, per layer: fidelity then
// simplification -> map foreground back -> aggregate combined cells.
// When run_dir is non-empty, writes manifest, SVG/PNG cells, losses.csv and
// mask.png there.
AbstractionMatrix build_matrix(const Image &photo, const TrainConfig &cfg, const PipelineBackends &backends,
                               const std::string &run_dir = "", bool keep_partial = false);

void write_loss_csv(const std::string &path, const std::vector<LossLogRow> &rows);

} // namespace ssk
