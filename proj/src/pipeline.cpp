#include "scenesketch/pipeline.hpp"
#include "scenesketch/svg.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace ssk {

namespace {

Sketch make_sketch(const Eigen::VectorXd &z, const Eigen::VectorXd *probs, int canvas, double width,
                   Region region) {
    const int n = static_cast<int>(z.size() / 8);
    Sketch sk;
    sk.canvas_size = canvas;
    sk.region = region;
    sk.strokes.resize(n);
    for (int i = 0; i < n; ++i) {
        Stroke &s = sk.strokes[i];
        for (int k = 0; k < 4; ++k)
            s.points[k] = {z((i * 4 + k) * 2), z((i * 4 + k) * 2 + 1)};
        s.width = width;
        s.probability = probs ? std::clamp((*probs)(i), 0.0, 1.0) : 1.0;
        s.region = region;
    }
    return sk;
}

Eigen::VectorXd flatten_points(const std::vector<Stroke> &strokes) {
    Eigen::VectorXd z(strokes.size() * 8);
    for (size_t i = 0; i < strokes.size(); ++i)
        for (int k = 0; k < 4; ++k) {
            z((i * 4 + k) * 2) = strokes[i].points[k].x;
            z((i * 4 + k) * 2 + 1) = strokes[i].points[k].y;
        }
    return z;
}

struct ClipEval {
    double loss = 0.0;
    Eigen::VectorXd dz; // w.r.t. control coordinates (n*8)
    Eigen::VectorXd dp; // w.r.t. probabilities (n)
};

// Augmented clip loss with gradients routed back through the rasterizer.
ClipEval clip_eval(const Sketch &sketch, const Image &target, const std::vector<int> &layers,
                   const Encoder &encoder, const SoftRasterizer &raster, int n_augs, std::mt19937 &rng,
                   const TrainConfig &cfg, bool want_grad = true) {
    const int n = static_cast<int>(sketch.strokes.size());
    RasterImage simg = raster.render(sketch);
    Image d_simg(simg.w, simg.h, 1, 0.0);
    double loss = 0.0;
    const int augs = std::max(1, n_augs);
    for (int a = 0; a < augs; ++a) {
        Image ws, wt;
        AffineAugment aug;
        if (n_augs >= 1) {
            aug = AffineAugment::sample(rng, sketch.canvas_size, cfg.aug_perspective, cfg.aug_crop_min,
                                        cfg.aug_crop_max);
            ws = aug.apply(simg);
            wt = aug.apply(target);
        } else {
            ws = simg;
            wt = target;
        }
        EncodeResult se = encoder.encode_with_grad(ws, layers);
        LayerActivations ta = encoder.encode(wt, layers);
        Image d_ws;
        loss += clip_loss_vs_activations(se, ta, layers, want_grad ? &d_ws : nullptr);
        if (want_grad) {
            Image contrib = n_augs >= 1 ? aug.backward(d_ws, simg.w, simg.h, 1) : d_ws;
            for (size_t i = 0; i < d_simg.px.size(); ++i)
                d_simg.px[i] += contrib.px[i];
        }
    }
    loss /= augs;
    ClipEval ev;
    ev.loss = loss;
    if (want_grad) {
        for (auto &v : d_simg.px)
            v /= augs;
        std::vector<StrokeGrad> sg = raster.backward(sketch, d_simg);
        ev.dz.resize(n * 8);
        ev.dp.resize(n);
        for (int i = 0; i < n; ++i) {
            for (int k = 0; k < 4; ++k) {
                ev.dz((i * 4 + k) * 2) = sg[i].d_points[k].x;
                ev.dz((i * 4 + k) * 2 + 1) = sg[i].d_points[k].y;
            }
            ev.dp(i) = sg[i].d_prob;
        }
    }
    return ev;
}

std::vector<int> lineage_layers(int layer, Region region, const TrainConfig &cfg) {
    std::vector<int> layers{layer};
    if (region == Region::Foreground && cfg.use_fg_geometry_layer && cfg.fg_geometry_layer != layer)
        layers.push_back(cfg.fg_geometry_layer);
    return layers;
}

std::string abort_checkpoint(const LocNet &loc, const SimpNet &simp, unsigned seed, int n) {
    std::string path = (fs::temp_directory_path() / "scenesketch_abort.ckpt").string();
    try {
        save_checkpoint(path, loc, simp, seed, n);
    } catch (...) {
        path.clear();
    }
    return path;
}

} // namespace

FidelityResult train_fidelity(const Image &target_in, int layer, const TrainConfig &cfg,
                              const Encoder &encoder, const SoftRasterizer &raster, Region region,
                              std::vector<Stroke> init, unsigned seed, std::vector<LossLogRow> *log) {
    const int canvas = cfg.canvas;
    Image target = resize_bilinear(target_in, canvas, canvas);
    const int n = static_cast<int>(init.size());
    std::vector<int> layers = lineage_layers(layer, region, cfg);

    FidelityResult res;
    res.z_init = flatten_points(init);
    res.loc = LocNet(n, cfg.hidden, seed);
    Mlp last_good = res.loc.net;

    Adam adam;
    adam.lr = cfg.learning_rate;
    adam.attach(res.loc.net.weight_refs(), res.loc.net.bias_refs());
    std::mt19937 rng(seed ^ 0x51ed2705u);

    Sketch sketch;
    for (int it = 0; it < cfg.iters_fidelity; ++it) {
        Eigen::VectorXd dz_net = res.loc.predict_offsets(res.z_init);
        Eigen::VectorXd z = res.z_init + dz_net;
        sketch = make_sketch(z, nullptr, canvas, cfg.base_width, region);
        sketch.fidelity_level = layer;

        ClipEval ev = clip_eval(sketch, target, layers, encoder, raster, cfg.augmentations_per_step, rng, cfg);
        if (!std::isfinite(ev.loss)) {
            res.loc.net = last_good;
            SimpNet dummy(n, 8, seed);
            throw PipelineError("train_fidelity diverged (non-finite loss) at iteration " + std::to_string(it),
                                abort_checkpoint(res.loc, dummy, seed, n));
        }
        last_good = res.loc.net;
        res.loc.net.zero_grad();
        res.loc.net.backward(ev.dz);
        adam.step(res.loc.net.weight_grad_refs(), res.loc.net.bias_grad_refs());

        if (log)
            log->push_back({region_name(region), layer, -1, it, ev.loss, 0, 0, ev.loss, 1, 1, 1});
    }

    Eigen::VectorXd z = res.z_init + res.loc.predict_offsets(res.z_init);
    res.sketch = make_sketch(z, nullptr, canvas, cfg.base_width, region);
    res.sketch.fidelity_level = layer;
    // Seeds the simplification schedule. Measured exactly like the clip term
    // inside the ratio loss (same layer set, augmented average) so that the
    // level-0 target sparse/clip = 1/final_clip reduces to sparse ~= 1; a
    // fixed rng keeps the measurement deterministic.
    std::mt19937 rng2(0);
    const int probe_augs = std::max(64, cfg.augmentations_per_step);
    res.final_clip =
        clip_eval(res.sketch, target, layers, encoder, raster, probe_augs, rng2, cfg, false).loss;
    return res;
}

std::vector<Sketch> simplify_sequence(const Image &target_in, FidelityResult &fid, int layer,
                                      const TrainConfig &cfg, const Encoder &encoder,
                                      const SoftRasterizer &raster, Region region, double step_size,
                                      unsigned seed, std::vector<LossLogRow> *log,
                                      SimplificationSchedule *schedule_out) {
    const int canvas = cfg.canvas;
    Image target = resize_bilinear(target_in, canvas, canvas);
    const int n = static_cast<int>(fid.z_init.size() / 8);
    std::vector<int> layers = lineage_layers(layer, region, cfg);

    double r1 = initial_factor(fid.final_clip);
    SimplificationSchedule sched = build_schedule(r1, step_size, cfg.simplify_levels);
    if (schedule_out)
        *schedule_out = sched;

    SimpNet simp(n, cfg.hidden, seed ^ 0xabcd1234u);
    Adam adam_loc, adam_simp;
    adam_loc.lr = cfg.learning_rate;
    adam_simp.lr = cfg.learning_rate;
    adam_loc.attach(fid.loc.net.weight_refs(), fid.loc.net.bias_refs());
    adam_simp.attach(simp.net.weight_refs(), simp.net.bias_refs());

    std::mt19937 rng(seed ^ 0x7f4a7c15u);
    std::vector<double> weights{1.0, 1.0, 1.0};
    std::vector<double> loss0; // per-loss initial values for the rate term
    const double inv_n = 1.0 / n;
    const double sqrt_n = std::sqrt(static_cast<double>(n));
    long global_it = 0;

    std::vector<Sketch> out;
    for (int level = 0; level < cfg.simplify_levels; ++level) {
        const double r = sched.factors[level];
        for (int it = 0; it < cfg.iters_per_simplify; ++it, ++global_it) {
            Eigen::VectorXd probs = simp.predict_probabilities();
            Eigen::VectorXd z = fid.z_init + fid.loc.predict_offsets(fid.z_init);
            Sketch sketch = make_sketch(z, &probs, canvas, cfg.base_width, region);
            sketch.fidelity_level = layer;
            sketch.simplicity_level = level;

            ClipEval ev = clip_eval(sketch, target, layers, encoder, raster, cfg.augmentations_per_step, rng, cfg);
            std::vector<double> pvec(probs.data(), probs.data() + probs.size());
            double sparse = sparse_loss(pvec);
            double d_ratio_d_sparse = 0.0;
            double ratio = ratio_loss(sparse, ev.loss, r, &d_ratio_d_sparse);

            if (!std::isfinite(ev.loss) || !std::isfinite(ratio))
                throw PipelineError("simplify_sequence diverged at level " + std::to_string(level) +
                                        " iteration " + std::to_string(it),
                                    abort_checkpoint(fid.loc, simp, seed, n));

            if (loss0.empty())
                loss0 = {std::max(ev.loss, 1e-8), std::max(sparse, 1e-8), std::max(ratio, 1e-8)};
            if (global_it % cfg.gradnorm_every == 0) {
                // gradient norms w.r.t. the shared probability vector
                std::vector<double> norms{ev.dp.norm(), inv_n * sqrt_n, std::abs(d_ratio_d_sparse) * inv_n * sqrt_n};
                std::vector<double> rates{ev.loss / loss0[0], sparse / loss0[1], ratio / loss0[2]};
                double mean_rate = (rates[0] + rates[1] + rates[2]) / 3.0;
                if (mean_rate > 0)
                    for (auto &x : rates)
                        x /= mean_rate;
                weights = gradnorm_weights(norms, rates, cfg.gradnorm_alpha);
            }
            LossBreakdown bd = simp_objective(ev.loss, sparse, ratio, weights);

            // routing: clip -> both nets; sparse and ratio -> SimpNet only
            Eigen::VectorXd dp_total = weights[0] * ev.dp;
            dp_total.array() += weights[1] * inv_n + weights[2] * d_ratio_d_sparse * inv_n;
            simp.net.zero_grad();
            simp.net.backward(dp_total);
            adam_simp.step(simp.net.weight_grad_refs(), simp.net.bias_grad_refs());
            if (cfg.finetune_loc_during_simplify) {
                fid.loc.net.zero_grad();
                fid.loc.net.backward(weights[0] * ev.dz);
                adam_loc.step(fid.loc.net.weight_grad_refs(), fid.loc.net.bias_grad_refs());
            }
            if (log)
                log->push_back({region_name(region), layer, level, it, ev.loss, sparse, ratio, bd.total,
                                weights[0], weights[1], weights[2]});
        }
        Eigen::VectorXd probs = simp.predict_probabilities();
        Eigen::VectorXd z = fid.z_init + fid.loc.predict_offsets(fid.z_init);
        Sketch snap = make_sketch(z, &probs, canvas, cfg.base_width, region);
        snap.fidelity_level = layer;
        snap.simplicity_level = level;
        out.push_back(std::move(snap));
    }
    return out;
}

void write_loss_csv(const std::string &path, const std::vector<LossLogRow> &rows) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot write " + path);
    f << "region,layer,level,iteration,clip,sparse,ratio,total,w_clip,w_sparse,w_ratio\n";
    char buf[256];
    for (const auto &r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%d,%d,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.region.c_str(),
                      r.layer, r.level, r.iteration, r.clip, r.sparse, r.ratio, r.total, r.w_clip, r.w_sparse,
                      r.w_ratio);
        f << buf;
    }
}

namespace {

struct LineageOutput {
    Region region = Region::Foreground;
    int layer = 0;
    std::vector<Sketch> levels;
    SimplificationSchedule schedule;
    std::vector<LossLogRow> log;
    std::string error;
};

double lineage_step_size(const TrainConfig &cfg, Region region, int layer) {
    if (cfg.shared_step)
        return *cfg.shared_step;
    auto it = cfg.step_overrides.find(layer);
    if (it != cfg.step_overrides.end())
        return it->second;
    return default_steps(region, layer);
}

unsigned lineage_seed(unsigned master, Region region, int layer) {
    unsigned h = master * 2654435761u;
    h ^= static_cast<unsigned>(layer) * 1000003u + (region == Region::Foreground ? 17u : 31u);
    return h;
}

} // namespace

AbstractionMatrix build_matrix(const Image &photo, const TrainConfig &cfg, const PipelineBackends &backends,
                               const std::string &run_dir, bool keep_partial) {
    (void)keep_partial; // persistence behavior is identical; the caller decides the exit status
    AbstractionMatrix mat;
    mat.scene = decompose(photo, *backends.saliency, *backends.inpaint);
    bool do_rescale = mat.scene.single_object;
    if (do_rescale)
        mat.scene = rescale_object(mat.scene);

    const Encoder &enc = *backends.encoder;
    SoftRasterizer raster(backends.raster);

    struct RegionTask {
        Region region;
        Image target;
    };
    std::vector<RegionTask> regions{{Region::Foreground, mat.scene.foreground_img},
                                    {Region::Background, mat.scene.background_img}};

    // phase 1: fidelity lineages
    struct Lineage {
        Region region;
        int layer;
        Image target;
        FidelityResult fid;
        LineageOutput out;
        bool fid_ok = false;
    };
    std::vector<Lineage> lineages;
    for (const auto &rt : regions)
        for (int layer : cfg.fidelity_layers) {
            Lineage l;
            l.region = rt.region;
            l.layer = layer;
            l.target = resize_bilinear(rt.target, cfg.canvas, cfg.canvas);
            l.out.region = rt.region;
            l.out.layer = layer;
            lineages.push_back(std::move(l));
        }

    auto run_phase = [&](auto &&fn) {
        if (cfg.jobs <= 1) {
            for (auto &l : lineages)
                fn(l);
            return;
        }
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        int jobs = std::min<int>(cfg.jobs, static_cast<int>(lineages.size()));
        for (int t = 0; t < jobs; ++t)
            pool.emplace_back([&] {
                size_t i;
                while ((i = next.fetch_add(1)) < lineages.size())
                    fn(lineages[i]);
            });
        for (auto &t : pool)
            t.join();
    };

    run_phase([&](Lineage &l) {
        try {
            unsigned seed = lineage_seed(cfg.seed, l.region, l.layer);
            Image relevancy = enc.relevancy_map(l.target);
            auto init = init_strokes(l.target, relevancy, cfg.n_strokes, seed, cfg.base_width, l.region);
            l.fid = train_fidelity(l.target, l.layer, cfg, enc, raster, l.region, std::move(init), seed, &l.out.log);
            l.fid_ok = true;
        } catch (const std::exception &e) {
            l.out.error = e.what();
        }
    });

    // ablation: reuse the first lineage's r1 everywhere by overriding final_clip
    if (cfg.shared_factor_set) {
        double ref = -1;
        for (auto &l : lineages)
            if (l.fid_ok) {
                ref = l.fid.final_clip;
                break;
            }
        if (ref > 0)
            for (auto &l : lineages)
                if (l.fid_ok)
                    l.fid.final_clip = ref;
    }

    // phase 2: simplification lineages
    run_phase([&](Lineage &l) {
        if (!l.fid_ok)
            return;
        try {
            unsigned seed = lineage_seed(cfg.seed, l.region, l.layer) ^ 0x5bd1e995u;
            double step = lineage_step_size(cfg, l.region, l.layer);
            l.out.levels = simplify_sequence(l.target, l.fid, l.layer, cfg, enc, raster, l.region, step, seed,
                                             &l.out.log, &l.out.schedule);
        } catch (const std::exception &e) {
            l.out.error = e.what();
        }
    });

    // assemble
    std::vector<int> rows;
    for (int r : cfg.matrix_rows)
        if (r >= 0 && r < cfg.simplify_levels)
            rows.push_back(r);
    if (rows.empty())
        for (int r = 0; r < cfg.simplify_levels; ++r)
            rows.push_back(r);

    CanvasTransform back = mat.scene.fg_transform.is_identity() ? CanvasTransform{} : mat.scene.fg_transform.inverse();
    for (auto &l : lineages) {
        mat.losses.insert(mat.losses.end(), l.out.log.begin(), l.out.log.end());
        std::string rname = region_name(l.region);
        if (!l.out.error.empty() || l.out.levels.empty()) {
            for (int r : rows)
                mat.missing_cells.push_back(rname + "/L" + std::to_string(l.layer) + "_S" + std::to_string(r));
            if (!l.out.error.empty())
                std::cerr << "lineage " << rname << "/L" << l.layer << " failed: " << l.out.error << "\n";
            continue;
        }
        mat.schedules[{rname, l.layer}] = l.out.schedule;
        for (int r : rows) {
            Sketch cell = l.out.levels[r];
            if (l.region == Region::Foreground && !mat.scene.fg_transform.is_identity())
                cell = apply_transform(cell, back);
            auto &target_map = l.region == Region::Foreground ? mat.fg : mat.bg;
            target_map[{l.layer, r}] = cell;
        }
    }
    for (int layer : cfg.fidelity_layers)
        for (int r : rows) {
            auto fg_it = mat.fg.find({layer, r});
            auto bg_it = mat.bg.find({layer, r});
            if (fg_it == mat.fg.end() && bg_it == mat.bg.end())
                continue;
            Sketch comb;
            comb.canvas_size = cfg.canvas;
            comb.fidelity_level = layer;
            comb.simplicity_level = r;
            comb.region = Region::Combined;
            if (fg_it != mat.fg.end())
                comb.strokes.insert(comb.strokes.end(), fg_it->second.strokes.begin(), fg_it->second.strokes.end());
            if (bg_it != mat.bg.end())
                comb.strokes.insert(comb.strokes.end(), bg_it->second.strokes.begin(), bg_it->second.strokes.end());
            mat.combined[{layer, r}] = comb;
        }

    if (!run_dir.empty()) {
        fs::create_directories(run_dir);
        for (const char *sub : {"fg", "bg", "combined"})
            fs::create_directories(fs::path(run_dir) / sub);
        write_image((fs::path(run_dir) / "mask.png").string(), mat.scene.mask);
        write_loss_csv((fs::path(run_dir) / "losses.csv").string(), mat.losses);
        auto write_cells = [&](const std::map<std::pair<int, int>, Sketch> &cells, const std::string &sub) {
            for (const auto &[key, sk] : cells) {
                std::string base = "L" + std::to_string(key.first) + "_S" + std::to_string(key.second);
                write_svg_file((fs::path(run_dir) / sub / (base + ".svg")).string(), sk, cfg.drop_threshold);
                write_image((fs::path(run_dir) / sub / (base + ".png")).string(), raster.render(sk));
            }
        };
        write_cells(mat.fg, "fg");
        write_cells(mat.bg, "bg");
        write_cells(mat.combined, "combined");

        std::ofstream man(fs::path(run_dir) / "manifest.txt");
        char num[64];
        auto fmtd = [&](double v) {
            std::snprintf(num, sizeof(num), "%.17g", v);
            return std::string(num);
        };
        man << "[run]\n";
        man << "tool = scenesketch\n";
        man << "encoder = " << enc.name() << "\n";
        man << "seed = " << cfg.seed << "\n";
        man << "[config]\n";
        man << "n_strokes = " << cfg.n_strokes << "\n";
        man << "iters_fidelity = " << cfg.iters_fidelity << "\n";
        man << "iters_per_simplify = " << cfg.iters_per_simplify << "\n";
        man << "learning_rate = " << fmtd(cfg.learning_rate) << "\n";
        man << "augmentations_per_step = " << cfg.augmentations_per_step << "\n";
        man << "fidelity_layers =";
        for (int l : cfg.fidelity_layers)
            man << " " << l;
        man << "\n";
        man << "simplify_levels = " << cfg.simplify_levels << "\n";
        man << "matrix_rows =";
        for (int r : rows)
            man << " " << r;
        man << "\n";
        man << "finetune_loc_during_simplify = " << (cfg.finetune_loc_during_simplify ? 1 : 0) << "\n";
        man << "use_fg_geometry_layer = " << (cfg.use_fg_geometry_layer ? 1 : 0) << "\n";
        man << "fg_geometry_layer = " << cfg.fg_geometry_layer << "\n";
        man << "hidden = " << cfg.hidden << "\n";
        man << "base_width = " << fmtd(cfg.base_width) << "\n";
        man << "canvas = " << cfg.canvas << "\n";
        man << "drop_threshold = " << fmtd(cfg.drop_threshold) << "\n";
        man << "gradnorm_alpha = " << fmtd(cfg.gradnorm_alpha) << "\n";
        man << "[scene]\n";
        man << "single_object = " << (mat.scene.single_object ? 1 : 0) << "\n";
        man << "fg_scale = " << fmtd(mat.scene.fg_transform.scale) << "\n";
        man << "fg_translation = " << fmtd(mat.scene.fg_transform.translation.x) << " "
            << fmtd(mat.scene.fg_transform.translation.y) << "\n";
        man << "[schedules]\n";
        for (const auto &[key, sched] : mat.schedules) {
            man << key.first << "_L" << key.second << " =";
            for (double fct : sched.factors)
                man << " " << fmtd(fct);
            man << "\n";
        }
        man << "[cells]\n";
        for (const auto &[key, sk] : mat.combined)
            man << "combined/L" << key.first << "_S" << key.second << " = " << sk.strokes.size() << "\n";
        man << "[missing]\n";
        for (const auto &m : mat.missing_cells)
            man << m << "\n";
    }
    return mat;
}

} // namespace ssk
