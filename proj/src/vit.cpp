#include "scenesketch/vit.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <random>

namespace ssk {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kClipMean[3] = {0.48145466, 0.4578275, 0.40821073};
constexpr double kClipStd[3] = {0.26862954, 0.26130258, 0.27577711};

inline double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y = g * (x - mu)/s + b per row; cache normalized rows and 1/s for the adjoint.
struct LnCache {
    Eigen::MatrixXd xhat;
    Eigen::VectorXd inv_s;
};

Eigen::MatrixXd layer_norm(const Eigen::MatrixXd &x, const Eigen::VectorXd &g, const Eigen::VectorXd &b,
                           LnCache *cache) {
    const int T = static_cast<int>(x.rows());
    const int W = static_cast<int>(x.cols());
    Eigen::MatrixXd y(T, W);
    if (cache) {
        cache->xhat.resize(T, W);
        cache->inv_s.resize(T);
    }
    for (int t = 0; t < T; ++t) {
        double mu = x.row(t).mean();
        double var = (x.row(t).array() - mu).square().mean();
        double inv_s = 1.0 / std::sqrt(var + kLnEps);
        Eigen::ArrayXd xhat = (x.row(t).array() - mu) * inv_s;
        y.row(t) = (xhat * g.transpose().array() + b.transpose().array()).matrix();
        if (cache) {
            cache->xhat.row(t) = xhat.matrix();
            cache->inv_s(t) = inv_s;
        }
    }
    return y;
}

Eigen::MatrixXd layer_norm_backward(const Eigen::MatrixXd &dy, const Eigen::VectorXd &g, const LnCache &cache) {
    const int T = static_cast<int>(dy.rows());
    const int W = static_cast<int>(dy.cols());
    Eigen::MatrixXd dx(T, W);
    for (int t = 0; t < T; ++t) {
        Eigen::ArrayXd gdy = dy.row(t).transpose().array() * g.array();
        Eigen::ArrayXd xhat = cache.xhat.row(t).transpose().array();
        double m1 = gdy.mean();
        double m2 = (gdy * xhat).mean();
        dx.row(t) = ((gdy - m1 - xhat * m2) * cache.inv_s(t)).matrix().transpose();
    }
    return dx;
}

struct BlockCache {
    Eigen::MatrixXd x_in;
    LnCache ln1;
    Eigen::MatrixXd xn1;
    Eigen::MatrixXd qkv;
    std::vector<Eigen::MatrixXd> attn; // per-head softmax matrices (T x T)
    Eigen::MatrixXd heads_cat;         // T x W
    Eigen::MatrixXd x_mid;             // after attention residual
    LnCache ln2;
    Eigen::MatrixXd xn2;
    Eigen::MatrixXd fc_pre; // T x 4W, pre-activation
    Eigen::MatrixXd fc_act; // T x 4W, QuickGELU output
};

Eigen::MatrixXd block_forward(const Eigen::MatrixXd &x, const VitBlockWeights &w, int heads, BlockCache *c) {
    const int T = static_cast<int>(x.rows());
    const int W = static_cast<int>(x.cols());
    const int dh = W / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    if (c)
        c->x_in = x;
    LnCache ln1_local;
    Eigen::MatrixXd xn1 = layer_norm(x, w.ln1_g, w.ln1_b, c ? &c->ln1 : &ln1_local);
    Eigen::MatrixXd qkv = xn1 * w.qkv_w.transpose();
    qkv.rowwise() += w.qkv_b.transpose();

    Eigen::MatrixXd heads_cat(T, W);
    std::vector<Eigen::MatrixXd> attn(heads);
    for (int h = 0; h < heads; ++h) {
        auto Q = qkv.block(0, h * dh, T, dh);
        auto K = qkv.block(0, W + h * dh, T, dh);
        auto V = qkv.block(0, 2 * W + h * dh, T, dh);
        Eigen::MatrixXd S = Q * K.transpose() * scale;
        for (int t = 0; t < T; ++t) {
            double mx = S.row(t).maxCoeff();
            Eigen::ArrayXd e = (S.row(t).array() - mx).exp();
            S.row(t) = (e / e.sum()).matrix();
        }
        attn[h] = S;
        heads_cat.block(0, h * dh, T, dh) = S * V;
    }
    Eigen::MatrixXd attn_out = heads_cat * w.out_w.transpose();
    attn_out.rowwise() += w.out_b.transpose();
    Eigen::MatrixXd x_mid = x + attn_out;

    LnCache ln2_local;
    Eigen::MatrixXd xn2 = layer_norm(x_mid, w.ln2_g, w.ln2_b, c ? &c->ln2 : &ln2_local);
    Eigen::MatrixXd fc_pre = xn2 * w.fc_w.transpose();
    fc_pre.rowwise() += w.fc_b.transpose();
    Eigen::MatrixXd fc_act = fc_pre.unaryExpr([](double v) { return v * sigm(1.702 * v); });
    Eigen::MatrixXd mlp_out = fc_act * w.proj_w.transpose();
    mlp_out.rowwise() += w.proj_b.transpose();

    if (c) {
        c->xn1 = std::move(xn1);
        c->qkv = std::move(qkv);
        c->attn = std::move(attn);
        c->heads_cat = std::move(heads_cat);
        c->x_mid = x_mid;
        c->xn2 = std::move(xn2);
        c->fc_pre = std::move(fc_pre);
        c->fc_act = std::move(fc_act);
    }
    return x_mid + mlp_out;
}

Eigen::MatrixXd block_backward(const Eigen::MatrixXd &dy, const VitBlockWeights &w, int heads, const BlockCache &c) {
    const int T = static_cast<int>(dy.rows());
    const int W = static_cast<int>(dy.cols());
    const int dh = W / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    // MLP branch
    Eigen::MatrixXd d_fc_act = dy * w.proj_w;
    Eigen::MatrixXd d_fc_pre =
        d_fc_act.binaryExpr(c.fc_pre, [](double g, double v) {
            double s = sigm(1.702 * v);
            return g * (s + 1.702 * v * s * (1.0 - s));
        });
    Eigen::MatrixXd d_xn2 = d_fc_pre * w.fc_w;
    Eigen::MatrixXd d_x_mid = dy + layer_norm_backward(d_xn2, w.ln2_g, c.ln2);

    // Attention branch
    Eigen::MatrixXd d_heads = d_x_mid * w.out_w;
    Eigen::MatrixXd d_qkv = Eigen::MatrixXd::Zero(T, 3 * W);
    for (int h = 0; h < heads; ++h) {
        auto V = c.qkv.block(0, 2 * W + h * dh, T, dh);
        auto Q = c.qkv.block(0, h * dh, T, dh);
        auto K = c.qkv.block(0, W + h * dh, T, dh);
        const Eigen::MatrixXd &A = c.attn[h];
        Eigen::MatrixXd dH = d_heads.block(0, h * dh, T, dh);
        Eigen::MatrixXd dA = dH * V.transpose();
        d_qkv.block(0, 2 * W + h * dh, T, dh) = A.transpose() * dH;
        // softmax rows
        Eigen::MatrixXd dS(T, T);
        for (int t = 0; t < T; ++t) {
            double dot = dA.row(t).dot(A.row(t));
            dS.row(t) = (A.row(t).array() * (dA.row(t).array() - dot)).matrix();
        }
        d_qkv.block(0, h * dh, T, dh) = dS * K * scale;
        d_qkv.block(0, W + h * dh, T, dh) = dS.transpose() * Q * scale;
    }
    Eigen::MatrixXd d_xn1 = d_qkv * w.qkv_w;
    return d_x_mid + layer_norm_backward(d_xn1, w.ln1_g, c.ln1);
}

Eigen::MatrixXd gaussian_matrix(int rows, int cols, std::mt19937 &rng, double std_scale) {
    std::normal_distribution<double> dist(0.0, std_scale);
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            m(i, j) = dist(rng);
    return m;
}

// ---- weight archive ----

constexpr char kMagic[8] = {'S', 'S', 'V', 'T', '0', '0', '0', '1'};

void write_tensor(std::ofstream &f, const std::string &name, const double *data, size_t count) {
    std::uint32_t nl = static_cast<std::uint32_t>(name.size());
    f.write(reinterpret_cast<const char *>(&nl), 4);
    f.write(name.data(), nl);
    std::uint64_t n = count;
    f.write(reinterpret_cast<const char *>(&n), 8);
    f.write(reinterpret_cast<const char *>(data), count * sizeof(double));
}

std::vector<double> read_tensor(std::ifstream &f, std::string &name) {
    std::uint32_t nl = 0;
    f.read(reinterpret_cast<char *>(&nl), 4);
    if (!f) {
        name.clear();
        return {};
    }
    name.resize(nl);
    f.read(name.data(), nl);
    std::uint64_t n = 0;
    f.read(reinterpret_cast<char *>(&n), 8);
    std::vector<double> data(n);
    f.read(reinterpret_cast<char *>(data.data()), n * sizeof(double));
    if (!f)
        throw std::runtime_error("truncated tensor in weight file");
    return data;
}

} // namespace

VitWeights VitWeights::random(const VitConfig &cfg, unsigned seed) {
    std::mt19937 rng(seed);
    VitWeights w;
    w.cfg = cfg;
    const int W = cfg.width;
    double s = 1.0 / std::sqrt(static_cast<double>(W));
    w.patch_proj = gaussian_matrix(W, 3 * cfg.patch * cfg.patch, rng, 1.0 / std::sqrt(3.0 * cfg.patch * cfg.patch));
    w.class_embed = gaussian_matrix(W, 1, rng, s).col(0);
    w.pos_embed = gaussian_matrix(cfg.tokens(), W, rng, 0.01);
    w.ln_pre_g = Eigen::VectorXd::Ones(W);
    w.ln_pre_b = Eigen::VectorXd::Zero(W);
    w.ln_post_g = Eigen::VectorXd::Ones(W);
    w.ln_post_b = Eigen::VectorXd::Zero(W);
    w.blocks.resize(cfg.depth);
    for (auto &b : w.blocks) {
        b.ln1_g = Eigen::VectorXd::Ones(W);
        b.ln1_b = Eigen::VectorXd::Zero(W);
        b.ln2_g = Eigen::VectorXd::Ones(W);
        b.ln2_b = Eigen::VectorXd::Zero(W);
        b.qkv_w = gaussian_matrix(3 * W, W, rng, s);
        b.qkv_b = Eigen::VectorXd::Zero(3 * W);
        b.out_w = gaussian_matrix(W, W, rng, s);
        b.out_b = Eigen::VectorXd::Zero(W);
        b.fc_w = gaussian_matrix(4 * W, W, rng, s);
        b.fc_b = Eigen::VectorXd::Zero(4 * W);
        b.proj_w = gaussian_matrix(W, 4 * W, rng, 0.5 / std::sqrt(static_cast<double>(W)));
        b.proj_b = Eigen::VectorXd::Zero(W);
    }
    w.visual_proj = gaussian_matrix(cfg.embed_dim, W, rng, s);
    return w;
}

void VitWeights::save(const std::string &path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot write weights: " + path);
    f.write(kMagic, 8);
    std::int64_t hdr[6] = {cfg.image_size, cfg.patch, cfg.width, cfg.depth, cfg.heads, cfg.embed_dim};
    f.write(reinterpret_cast<const char *>(hdr), sizeof(hdr));
    auto wt = [&](const std::string &n, const Eigen::MatrixXd &m) { write_tensor(f, n, m.data(), m.size()); };
    auto wv = [&](const std::string &n, const Eigen::VectorXd &v) { write_tensor(f, n, v.data(), v.size()); };
    wt("patch_proj", patch_proj);
    wv("class_embed", class_embed);
    wt("pos_embed", pos_embed);
    wv("ln_pre_g", ln_pre_g);
    wv("ln_pre_b", ln_pre_b);
    wv("ln_post_g", ln_post_g);
    wv("ln_post_b", ln_post_b);
    for (size_t i = 0; i < blocks.size(); ++i) {
        std::string p = "block" + std::to_string(i) + ".";
        const auto &b = blocks[i];
        wv(p + "ln1_g", b.ln1_g);
        wv(p + "ln1_b", b.ln1_b);
        wt(p + "qkv_w", b.qkv_w);
        wv(p + "qkv_b", b.qkv_b);
        wt(p + "out_w", b.out_w);
        wv(p + "out_b", b.out_b);
        wv(p + "ln2_g", b.ln2_g);
        wv(p + "ln2_b", b.ln2_b);
        wt(p + "fc_w", b.fc_w);
        wv(p + "fc_b", b.fc_b);
        wt(p + "proj_w", b.proj_w);
        wv(p + "proj_b", b.proj_b);
    }
    wt("visual_proj", visual_proj);
}

VitWeights VitWeights::load(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot load encoder weights: " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("bad weight file magic: " + path);
    std::int64_t hdr[6];
    f.read(reinterpret_cast<char *>(hdr), sizeof(hdr));
    VitWeights w;
    w.cfg = VitConfig{static_cast<int>(hdr[0]), static_cast<int>(hdr[1]), static_cast<int>(hdr[2]),
                      static_cast<int>(hdr[3]), static_cast<int>(hdr[4]), static_cast<int>(hdr[5])};
    w.blocks.resize(w.cfg.depth);
    std::string name;
    std::map<std::string, std::vector<double>> tensors;
    while (true) {
        auto data = read_tensor(f, name);
        if (data.empty() && name.empty())
            break;
        tensors[name] = std::move(data);
        if (f.peek() == EOF)
            break;
    }
    auto getm = [&](const std::string &n, int rows, int cols) {
        auto it = tensors.find(n);
        if (it == tensors.end() || it->second.size() != static_cast<size_t>(rows) * cols)
            throw std::runtime_error("weight file " + path + ": missing or misshaped tensor " + n);
        return Eigen::Map<const Eigen::MatrixXd>(it->second.data(), rows, cols).eval();
    };
    auto getv = [&](const std::string &n, int len) {
        auto it = tensors.find(n);
        if (it == tensors.end() || it->second.size() != static_cast<size_t>(len))
            throw std::runtime_error("weight file " + path + ": missing or misshaped tensor " + n);
        return Eigen::Map<const Eigen::VectorXd>(it->second.data(), len).eval();
    };
    const int W = w.cfg.width;
    w.patch_proj = getm("patch_proj", W, 3 * w.cfg.patch * w.cfg.patch);
    w.class_embed = getv("class_embed", W);
    w.pos_embed = getm("pos_embed", w.cfg.tokens(), W);
    w.ln_pre_g = getv("ln_pre_g", W);
    w.ln_pre_b = getv("ln_pre_b", W);
    w.ln_post_g = getv("ln_post_g", W);
    w.ln_post_b = getv("ln_post_b", W);
    for (int i = 0; i < w.cfg.depth; ++i) {
        std::string p = "block" + std::to_string(i) + ".";
        auto &b = w.blocks[i];
        b.ln1_g = getv(p + "ln1_g", W);
        b.ln1_b = getv(p + "ln1_b", W);
        b.qkv_w = getm(p + "qkv_w", 3 * W, W);
        b.qkv_b = getv(p + "qkv_b", 3 * W);
        b.out_w = getm(p + "out_w", W, W);
        b.out_b = getv(p + "out_b", W);
        b.ln2_g = getv(p + "ln2_g", W);
        b.ln2_b = getv(p + "ln2_b", W);
        b.fc_w = getm(p + "fc_w", 4 * W, W);
        b.fc_b = getv(p + "fc_b", 4 * W);
        b.proj_w = getm(p + "proj_w", W, 4 * W);
        b.proj_b = getv(p + "proj_b", W);
    }
    w.visual_proj = getm("visual_proj", w.cfg.embed_dim, W);
    return w;
}

VitEncoder::VitEncoder(const std::string &weights_path) : weights_(VitWeights::load(weights_path)) {}
VitEncoder::VitEncoder(VitWeights weights) : weights_(std::move(weights)) {}

namespace {

struct VitForward {
    Eigen::MatrixXd tokens_in; // before ln_pre residual chain, after pos embed
    LnCache ln_pre;
    std::vector<BlockCache> blocks;
    std::vector<Eigen::MatrixXd> block_out;
    int in_w = 0, in_h = 0, in_c = 3;
    bool resized = false;
};

// Resize + CLIP normalization + patch linear. Returns T x W token matrix.
Eigen::MatrixXd embed_image(const VitWeights &w, const Image &img_in, VitForward *fwd) {
    Image rgb = to_rgb(img_in);
    const int S = w.cfg.image_size;
    bool resized = rgb.w != S || rgb.h != S;
    if (fwd) {
        fwd->in_w = rgb.w;
        fwd->in_h = rgb.h;
        fwd->in_c = img_in.c;
        fwd->resized = resized;
    }
    if (resized)
        rgb = resize_bilinear(rgb, S, S);
    const int P = w.cfg.patch, G = w.cfg.grid();
    Eigen::MatrixXd patches(3 * P * P, G * G);
    for (int gy = 0; gy < G; ++gy)
        for (int gx = 0; gx < G; ++gx) {
            int col = gy * G + gx;
            for (int ch = 0; ch < 3; ++ch)
                for (int v = 0; v < P; ++v)
                    for (int u = 0; u < P; ++u)
                        patches(ch * P * P + v * P + u, col) =
                            (rgb.at(gx * P + u, gy * P + v, ch) - kClipMean[ch]) / kClipStd[ch];
        }
    Eigen::MatrixXd tok(w.cfg.tokens(), w.cfg.width);
    tok.row(0) = w.class_embed.transpose();
    tok.bottomRows(G * G) = (w.patch_proj * patches).transpose();
    tok += w.pos_embed;
    return tok;
}

Image embed_image_backward(const VitWeights &w, const Eigen::MatrixXd &d_tok, const VitForward &fwd) {
    const int P = w.cfg.patch, G = w.cfg.grid(), S = w.cfg.image_size;
    Eigen::MatrixXd d_patches = w.patch_proj.transpose() * d_tok.bottomRows(G * G).transpose();
    Image grad(S, S, 3, 0.0);
    for (int gy = 0; gy < G; ++gy)
        for (int gx = 0; gx < G; ++gx) {
            int col = gy * G + gx;
            for (int ch = 0; ch < 3; ++ch)
                for (int v = 0; v < P; ++v)
                    for (int u = 0; u < P; ++u)
                        grad.at(gx * P + u, gy * P + v, ch) = d_patches(ch * P * P + v * P + u, col) / kClipStd[ch];
        }
    if (fwd.resized)
        grad = resize_bilinear_backward(grad, fwd.in_w, fwd.in_h);
    if (fwd.in_c == 1) { // input was grayscale replicated to 3 channels
        Image g1(grad.w, grad.h, 1, 0.0);
        for (int y = 0; y < grad.h; ++y)
            for (int x = 0; x < grad.w; ++x)
                g1.at(x, y) = grad.at(x, y, 0) + grad.at(x, y, 1) + grad.at(x, y, 2);
        return g1;
    }
    return grad;
}

} // namespace

EncodeResult VitEncoder::encode_with_grad(const Image &img, const std::vector<int> &layers) const {
    check_layers(layers);
    const auto &w = weights_;
    auto fwd = std::make_shared<VitForward>();
    Eigen::MatrixXd tok = embed_image(w, img, fwd.get());
    Eigen::MatrixXd x = layer_norm(tok, w.ln_pre_g, w.ln_pre_b, &fwd->ln_pre);
    int deepest = 1;
    for (int l : layers)
        deepest = std::max(deepest, l);
    fwd->blocks.resize(deepest);
    fwd->block_out.resize(deepest);
    for (int l = 0; l < deepest; ++l) {
        x = block_forward(x, w.blocks[l], w.cfg.heads, &fwd->blocks[l]);
        fwd->block_out[l] = x;
    }

    EncodeResult res;
    res.activations.source_resolution = img.h;
    for (int l : layers) {
        const Eigen::MatrixXd &m = fwd->block_out[l - 1];
        res.activations.layers[l] = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
        if (!res.activations.layers[l].allFinite())
            throw std::runtime_error("encoder produced non-finite activations at layer " + std::to_string(l));
    }

    const VitWeights *wp = &weights_;
    res.backward = [wp, fwd, deepest](const std::map<int, Eigen::VectorXd> &act_grads) -> Image {
        const auto &w = *wp;
        const int T = w.cfg.tokens(), W = w.cfg.width;
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(T, W);
        for (int l = deepest; l >= 1; --l) {
            auto it = act_grads.find(l);
            if (it != act_grads.end())
                g += Eigen::Map<const Eigen::MatrixXd>(it->second.data(), T, W);
            g = block_backward(g, w.blocks[l - 1], w.cfg.heads, fwd->blocks[l - 1]);
        }
        Eigen::MatrixXd d_tok = layer_norm_backward(g, w.ln_pre_g, fwd->ln_pre);
        return embed_image_backward(w, d_tok, *fwd);
    };
    return res;
}

Image VitEncoder::relevancy_map(const Image &photo) const {
    const auto &w = weights_;
    VitForward fwd;
    Eigen::MatrixXd tok = embed_image(w, photo, &fwd);
    LnCache lnc;
    Eigen::MatrixXd x = layer_norm(tok, w.ln_pre_g, w.ln_pre_b, &lnc);
    const int T = w.cfg.tokens();
    // attention rollout: product of 0.5*A + 0.5*I with head-averaged A
    Eigen::MatrixXd rollout = Eigen::MatrixXd::Identity(T, T);
    for (int l = 0; l < w.cfg.depth; ++l) {
        BlockCache c;
        x = block_forward(x, w.blocks[l], w.cfg.heads, &c);
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(T, T);
        for (const auto &ah : c.attn)
            a += ah;
        a /= static_cast<double>(w.cfg.heads);
        rollout = (0.5 * a + 0.5 * Eigen::MatrixXd::Identity(T, T)) * rollout;
    }
    const int G = w.cfg.grid();
    Image grid_map(G, G, 1, 0.0);
    for (int gy = 0; gy < G; ++gy)
        for (int gx = 0; gx < G; ++gx)
            grid_map.at(gx, gy) = rollout(0, 1 + gy * G + gx);
    Image map = resize_bilinear(grid_map, photo.w, photo.h);
    double total = 0.0;
    for (auto &v : map.px) {
        v = std::max(v, 0.0);
        total += v;
    }
    if (total <= 1e-18) {
        double u = 1.0 / (static_cast<double>(photo.w) * photo.h);
        for (auto &v : map.px)
            v = u;
    } else {
        for (auto &v : map.px)
            v /= total;
    }
    return map;
}

Eigen::VectorXd VitEncoder::image_embedding(const Image &img) const {
    const auto &w = weights_;
    VitForward fwd;
    Eigen::MatrixXd tok = embed_image(w, img, &fwd);
    LnCache lnc;
    Eigen::MatrixXd x = layer_norm(tok, w.ln_pre_g, w.ln_pre_b, &lnc);
    for (int l = 0; l < w.cfg.depth; ++l)
        x = block_forward(x, w.blocks[l], w.cfg.heads, nullptr);
    Eigen::MatrixXd cls = layer_norm(x.topRows(1), w.ln_post_g, w.ln_post_b, nullptr);
    Eigen::VectorXd e = w.visual_proj * cls.row(0).transpose();
    double n = e.norm();
    return n > 0 ? Eigen::VectorXd(e / n) : e;
}

} // namespace ssk
