#include "scenesketch/config.hpp"
#include "scenesketch/evalmetrics.hpp"
#include "scenesketch/pipeline.hpp"
#include "scenesketch/svg.hpp"
#include "scenesketch/vit.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace ssk;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitMissingArtifact = 3;

std::shared_ptr<Encoder> build_encoder(const RunConfig &cfg) {
    EncoderSpec spec;
    spec.layers_fidelity = cfg.train.fidelity_layers;
    spec.layer_geometry = cfg.train.fg_geometry_layer;
    if (cfg.encoder == "toy") {
        spec.backend = EncoderBackend::Toy;
    } else if (cfg.encoder == "clip_vit_b32") {
        spec.backend = EncoderBackend::ClipVitB32;
        spec.weights_path = (fs::path(cfg.weights_root) / "clip_vit_b32.bin").string();
        if (!fs::exists(spec.weights_path))
            throw ConfigError("encoder weights not found: " + spec.weights_path +
                              " (set SCENESKETCH_WEIGHTS or use --toy-backends)");
    } else {
        throw ConfigError("unknown encoder backend: " + cfg.encoder);
    }
    return make_encoder(spec);
}

PipelineBackends build_backends(const RunConfig &cfg) {
    PipelineBackends b;
    b.encoder = build_encoder(cfg);
    if (cfg.saliency == "mask") {
        if (cfg.mask_path.empty())
            throw ConfigError("saliency = mask requires mask_path / --mask");
        b.saliency = std::make_shared<MaskFileSaliency>(cfg.mask_path);
    } else if (cfg.saliency == "edge") {
        b.saliency = std::make_shared<EdgeSaliency>();
    } else {
        throw ConfigError("unknown saliency backend: " + cfg.saliency);
    }
    if (cfg.inpaint == "boundary")
        b.inpaint = std::make_shared<BoundaryAverageInpaint>();
    else
        throw ConfigError("unknown inpaint backend: " + cfg.inpaint);
    b.raster.softness = cfg.raster_softness;
    b.raster.parallel = cfg.raster_parallel;
    return b;
}

Image load_photo(const std::string &path) {
    if (!fs::exists(path)) {
        std::cerr << "error: no such file: " << path << "\n";
        std::exit(kExitConfig);
    }
    return read_image(path);
}

struct CommonFlags {
    std::string config_file;
    std::vector<std::string> sets; // key=value overrides
    bool toy_backends = false;
    std::string mask;
    std::string out;
    int seed = -1;
    int jobs = 0;
    std::vector<int> layers;
    int levels = -1;
    bool keep_partial = false;

    void add_to(CLI::App *cmd) {
        cmd->add_option("--config", config_file, "config file (key = value lines with [sections])");
        cmd->add_option("--set", sets, "override a config entry, key=value")->take_all();
        cmd->add_flag("--toy-backends", toy_backends, "weight-free encoder/saliency backends");
        cmd->add_option("--mask", mask, "user-provided mask image (bypasses saliency)");
        cmd->add_option("-o,--out", out, "output directory");
        cmd->add_option("--seed", seed, "master seed");
        cmd->add_option("--jobs", jobs, "parallel matrix lineages");
        cmd->add_option("--layers", layers, "fidelity layers")->delimiter(',');
        cmd->add_option("--levels", levels, "simplification levels");
        cmd->add_flag("--keep-partial", keep_partial, "exit 0 even with failed cells");
    }

    RunConfig resolve() const {
        RunConfig cfg;
        if (!config_file.empty())
            cfg = parse_config_file(config_file);
        if (cfg.weights_root.empty())
            cfg.weights_root = default_weights_root();
        for (const auto &kv : sets) {
            auto eq = kv.find('=');
            if (eq == std::string::npos)
                throw ConfigError("--set expects key=value, got '" + kv + "'");
            apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (toy_backends) {
            cfg.encoder = "toy";
            cfg.saliency = cfg.mask_path.empty() && mask.empty() ? "edge" : "mask";
        }
        if (!mask.empty()) {
            cfg.mask_path = mask;
            cfg.saliency = "mask";
        }
        if (!out.empty())
            cfg.output_dir = out;
        if (seed >= 0)
            cfg.train.seed = static_cast<unsigned>(seed);
        if (jobs > 0)
            cfg.train.jobs = jobs;
        if (!layers.empty())
            cfg.train.fidelity_layers = layers;
        if (levels > 0) {
            cfg.train.simplify_levels = levels;
            std::vector<int> rows;
            for (int r : cfg.train.matrix_rows)
                if (r < levels)
                    rows.push_back(r);
            if (rows.empty())
                for (int r = 0; r < levels; ++r)
                    rows.push_back(r);
            cfg.train.matrix_rows = rows;
        }
        if (keep_partial)
            cfg.keep_partial = true;
        return cfg;
    }
};

int cmd_decompose(const std::string &photo_path, const CommonFlags &flags) {
    RunConfig cfg = flags.resolve();
    Image photo = load_photo(photo_path);
    std::shared_ptr<SaliencyBackend> sal;
    if (cfg.saliency == "mask")
        sal = std::make_shared<MaskFileSaliency>(cfg.mask_path);
    else
        sal = std::make_shared<EdgeSaliency>();
    BoundaryAverageInpaint inp;
    SceneDecomposition d = decompose(photo, *sal, inp);
    if (d.single_object)
        d = rescale_object(d);
    fs::create_directories(cfg.output_dir);
    write_image((fs::path(cfg.output_dir) / "mask.png").string(), d.mask);
    write_image((fs::path(cfg.output_dir) / "fg.png").string(), d.foreground_img);
    write_image((fs::path(cfg.output_dir) / "bg.png").string(), d.background_img);
    std::cout << "wrote mask.png fg.png bg.png to " << cfg.output_dir << "\n";
    return 0;
}

int cmd_matrix(const std::string &photo_path, const CommonFlags &flags) {
    RunConfig cfg = flags.resolve();
    Image photo = load_photo(photo_path);
    PipelineBackends backends = build_backends(cfg);
    AbstractionMatrix mat = build_matrix(photo, cfg.train, backends, cfg.output_dir, cfg.keep_partial);
    {
        std::ofstream f(fs::path(cfg.output_dir) / "config.txt");
        f << dump_config(cfg);
    }
    std::cout << "matrix: " << mat.combined.size() << " combined cells";
    if (!mat.missing_cells.empty()) {
        std::cout << ", " << mat.missing_cells.size() << " missing";
        for (const auto &m : mat.missing_cells)
            std::cerr << "missing cell: " << m << "\n";
    }
    std::cout << " -> " << cfg.output_dir << "\n";
    if (!mat.missing_cells.empty() && !cfg.keep_partial)
        return 1;
    return 0;
}

int cmd_sketch(const std::string &photo_path, int layer, int level, const CommonFlags &flags) {
    RunConfig cfg = flags.resolve();
    cfg.train.fidelity_layers = {layer};
    cfg.train.matrix_rows = {level};
    if (level >= cfg.train.simplify_levels)
        cfg.train.simplify_levels = level + 1;
    Image photo = load_photo(photo_path);
    PipelineBackends backends = build_backends(cfg);
    AbstractionMatrix mat = build_matrix(photo, cfg.train, backends, cfg.output_dir, cfg.keep_partial);
    auto it = mat.combined.find({layer, level});
    if (it == mat.combined.end()) {
        std::cerr << "cell L" << layer << "_S" << level << " was not produced\n";
        return 1;
    }
    std::cout << "wrote combined/L" << layer << "_S" << level << ".svg to " << cfg.output_dir << "\n";
    return 0;
}

// Rebuilds an AbstractionMatrix view from a run directory's SVG cells.
AbstractionMatrix load_run_dir(const std::string &run_dir, std::vector<std::string> &missing) {
    AbstractionMatrix mat;
    fs::path comb = fs::path(run_dir) / "combined";
    if (!fs::exists(comb))
        throw std::runtime_error("missing artifact: " + comb.string());
    for (const auto &e : fs::directory_iterator(comb)) {
        std::string name = e.path().filename().string();
        int layer, level;
        if (std::sscanf(name.c_str(), "L%d_S%d.svg", &layer, &level) == 2) {
            Sketch sk = read_svg_file(e.path().string());
            sk.fidelity_level = layer;
            sk.simplicity_level = level;
            sk.region = Region::Combined;
            mat.combined[{layer, level}] = sk;
        }
    }
    if (mat.combined.empty())
        missing.push_back(comb.string() + "/L*_S*.svg");
    return mat;
}

int cmd_eval(const std::string &run_dir, const std::string &photo_path, const CommonFlags &flags,
             bool no_recognizability) {
    RunConfig cfg = flags.resolve();
    Image photo = load_photo(photo_path);
    std::vector<std::string> missing;
    AbstractionMatrix mat;
    try {
        mat = load_run_dir(run_dir, missing);
    } catch (const std::exception &e) {
        std::cerr << e.what() << "\n";
        return kExitMissingArtifact;
    }
    if (!missing.empty()) {
        std::cerr << "missing artifact: " << missing.front() << "\n";
        return kExitMissingArtifact;
    }
    EvalOptions opt;
    opt.raster.softness = cfg.raster_softness;
    opt.raster.parallel = cfg.raster_parallel;
    opt.drop_threshold = cfg.train.drop_threshold;
    opt.with_recognizability = !no_recognizability;
    ToyEmbeddingProvider toy_provider;
    ClassDatabase db;
    Eigen::MatrixXd embs;
    if (opt.with_recognizability) {
        std::string classes = cfg.classes_path.empty() ? "data/classes.txt" : cfg.classes_path;
        std::string templates = cfg.templates_path.empty() ? "data/templates.txt" : cfg.templates_path;
        db = load_class_database(classes, templates);
        opt.classes = &db;
        opt.provider = &toy_provider;
        if (!cfg.class_embs_path.empty()) {
            embs = load_precomputed_class_embeddings(cfg.class_embs_path, db);
            opt.class_embs = &embs;
        }
    }
    MetricReport rep = evaluate_matrix(mat, photo, opt);
    fs::path out = cfg.output_dir.empty() ? fs::path(run_dir) : fs::path(cfg.output_dir);
    fs::create_directories(out);
    write_metric_csv((out / "metrics.csv").string(), rep);
    std::cout << "ms_ssim grid (rows = simplicity levels, cols = layers";
    for (int l : rep.layers)
        std::cout << " " << l;
    std::cout << "):\n" << rep.ms_ssim_matrix << "\n";
    std::cout << "stroke counts:\n" << rep.stroke_count_matrix << "\n";
    if (opt.with_recognizability)
        std::cout << "recognizability:\n" << rep.recognizability_matrix << "\n";
    std::cout << "wrote " << (out / "metrics.csv").string() << "\n";
    return rep.partial && !cfg.keep_partial ? 1 : 0;
}

int cmd_export(const std::string &run_dir, const std::string &out_dir, int resolution, double threshold) {
    fs::path comb = fs::path(run_dir) / "combined";
    if (!fs::exists(comb)) {
        std::cerr << "missing artifact: " << comb.string() << "\n";
        return kExitMissingArtifact;
    }
    fs::create_directories(out_dir);
    int count = 0;
    for (const auto &e : fs::directory_iterator(comb)) {
        if (e.path().extension() != ".svg")
            continue;
        Sketch sk = read_svg_file(e.path().string());
        if (resolution > 0 && resolution != sk.canvas_size) {
            double s = static_cast<double>(resolution) / sk.canvas_size;
            sk = apply_transform(sk, CanvasTransform{s, {0, 0}});
            sk.canvas_size = resolution;
        }
        write_svg_file((fs::path(out_dir) / e.path().filename()).string(), sk, threshold);
        ++count;
    }
    std::cout << "re-exported " << count << " sketches to " << out_dir << "\n";
    return count > 0 ? 0 : kExitMissingArtifact;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"photo -> matrix of vector sketches over fidelity and simplicity axes"};
    app.require_subcommand(1);

    std::string photo, run_dir, out_dir;
    int layer = 11, level = 0, resolution = 0;
    double threshold = 0.1;
    bool no_recognizability = false;

    CommonFlags fd, fm, fs_, fe;
    auto *dec = app.add_subcommand("decompose", "split a photo into mask / foreground / background");
    dec->add_option("photo", photo)->required();
    fd.add_to(dec);

    auto *mtx = app.add_subcommand("matrix", "build the full abstraction matrix");
    mtx->add_option("photo", photo)->required();
    fm.add_to(mtx);

    auto *skc = app.add_subcommand("sketch", "produce a single matrix cell");
    skc->add_option("photo", photo)->required();
    skc->add_option("--layer", layer, "encoder layer (fidelity)");
    skc->add_option("--level", level, "simplification level");
    fs_.add_to(skc);

    auto *evl = app.add_subcommand("eval", "score a run directory against the photo");
    evl->add_option("run_dir", run_dir)->required();
    evl->add_option("photo", photo)->required();
    evl->add_flag("--no-recognizability", no_recognizability, "skip the zero-shot metric");
    fe.add_to(evl);

    auto *exp = app.add_subcommand("export", "re-export SVGs at a new resolution / drop threshold");
    exp->add_option("run_dir", run_dir)->required();
    exp->add_option("-o,--out", out_dir)->required();
    exp->add_option("--resolution", resolution, "new canvas size (0 = keep)");
    exp->add_option("--threshold", threshold, "probability drop threshold");

    CLI11_PARSE(app, argc, argv);

    try {
        if (dec->parsed())
            return cmd_decompose(photo, fd);
        if (mtx->parsed())
            return cmd_matrix(photo, fm);
        if (skc->parsed())
            return cmd_sketch(photo, layer, level, fs_);
        if (evl->parsed())
            return cmd_eval(run_dir, photo, fe, no_recognizability);
        if (exp->parsed())
            return cmd_export(run_dir, out_dir, resolution, threshold);
    } catch (const ConfigError &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
