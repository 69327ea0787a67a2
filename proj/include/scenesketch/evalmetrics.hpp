#pragma once

#include "scenesketch/image.hpp"
#include "scenesketch/pipeline.hpp"

#include <Eigen/Core>
#include <string>
#include <vector>

namespace ssk {

struct XdogParams {
    double sigma = 0.8;
    double k = 1.6;
    double p = 20.0;
    double eps = 0.7;
    double phi = 10.0;
};

// Extended difference-of-Gaussians edge map: white background, dark edges,
// binarized. Thresholds 1 + p*(G_sigma - G_{k*sigma}) so a constant image of
// any brightness maps to all white.
Image xdog_edges(const Image &photo, const XdogParams &params = {});

// Multi-scale SSIM, five scales by default. Each scale contributes its full
// SSIM mean raised to the standard exponent; images smaller than 160 px fall
// back to fewer scales (renormalized exponents) with a warning on stderr.
double ms_ssim(const Image &a, const Image &b);

// Zero-shot classification inputs: class names and prompt templates with a
// "{}" placeholder for the class name.
struct ClassDatabase {
    std::vector<std::string> classes;
    std::vector<std::string> templates;
};

// Throws std::runtime_error naming the missing or malformed file.
ClassDatabase load_class_database(const std::string &classes_path, const std::string &templates_path);

// Joint image/text embedding space. Real CLIP runs use precomputed text
// embeddings (no text tower here); tests use small synthetic providers.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual Eigen::VectorXd embed_image(const Image &img) const = 0;
    virtual Eigen::VectorXd embed_text(const std::string &prompt) const = 0;
};

// Deterministic weight-free provider: pooled grayscale patches for images,
// seeded hash-random unit vectors for prompts. Suitable only for smoke runs
// and the identity fixture (sketch == photo).
class ToyEmbeddingProvider : public EmbeddingProvider {
public:
    explicit ToyEmbeddingProvider(int dim = 64) : dim_(dim) {}
    Eigen::VectorXd embed_image(const Image &img) const override;
    Eigen::VectorXd embed_text(const std::string &prompt) const override;

private:
    int dim_;
};

// Rows = classes, L2-normalized mean over all templates per class.
Eigen::MatrixXd class_embeddings(const EmbeddingProvider &provider, const ClassDatabase &db);

// Text file "name: v0 v1 v2 ...", one class per line; rows aligned to
// db.classes. Throws naming the first class without an embedding.
Eigen::MatrixXd load_precomputed_class_embeddings(const std::string &path, const ClassDatabase &db);

// Indices of the k classes with the highest cosine similarity, best first.
std::vector<int> top_k_classes(const Eigen::VectorXd &image_embedding, const Eigen::MatrixXd &class_embs,
                               int k = 5);

// |top5(photo) n top5(sketch)| >= min_overlap.
bool recognizability(const Image &photo, const Image &sketch_img, const Eigen::MatrixXd &class_embs,
                     const EmbeddingProvider &provider, int top_k = 5, int min_overlap = 2);
bool recognizability(const Image &photo, const Image &sketch_img, const ClassDatabase &db,
                     const EmbeddingProvider &provider, int top_k = 5, int min_overlap = 2);

struct MetricReport {
    std::vector<int> layers; // columns (fidelity axis)
    std::vector<int> levels; // rows (simplicity axis)
    Eigen::MatrixXd ms_ssim_matrix;         // levels x layers
    Eigen::MatrixXd recognizability_matrix; // 0/1 per cell, NaN when skipped
    Eigen::MatrixXd stroke_count_matrix;    // visible strokes (p >= drop threshold)
    std::vector<std::string> missing_cells;
    bool partial = false;
};

struct EvalOptions {
    RasterSettings raster;
    double drop_threshold = 0.1;
    bool with_recognizability = true;
    const EmbeddingProvider *provider = nullptr; // required when with_recognizability
    const ClassDatabase *classes = nullptr;
    const Eigen::MatrixXd *class_embs = nullptr; // optional cache; computed otherwise
    XdogParams xdog;
};

// Scores every combined cell of the matrix against the photo: MS-SSIM of the
// rendered cell vs the photo's edge map, recognizability, visible-stroke
// count. Missing cells are flagged and left as NaN.
MetricReport evaluate_matrix(const AbstractionMatrix &matrix, const Image &photo, const EvalOptions &opt);

void write_metric_csv(const std::string &path, const MetricReport &report);
MetricReport read_metric_csv(const std::string &path);

} // namespace ssk
