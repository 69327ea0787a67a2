#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace ssk {

// Plain 3-layer fully connected net with SeLU hidden activations.
// Holds its own forward cache; backward() must follow a forward().
class Mlp {
public:
    Mlp() = default;
    Mlp(int in_dim, int hidden, int out_dim, unsigned seed, bool sigmoid_output = false);

    Eigen::VectorXd forward(const Eigen::VectorXd &x);
    // Returns gradient w.r.t. the input; fills parameter gradients.
    Eigen::VectorXd backward(const Eigen::VectorXd &d_out);

    void zero_grad();
    std::vector<Eigen::MatrixXd *> weight_refs();
    std::vector<Eigen::VectorXd *> bias_refs();
    std::vector<Eigen::MatrixXd *> weight_grad_refs();
    std::vector<Eigen::VectorXd *> bias_grad_refs();

    int in_dim() const { return static_cast<int>(w_[0].cols()); }
    int out_dim() const { return static_cast<int>(w_.back().rows()); }
    int hidden() const { return static_cast<int>(w_[0].rows()); }
    bool sigmoid_output() const { return sigmoid_output_; }

    void save(std::ostream &os) const;
    static Mlp load(std::istream &is);

private:
    std::vector<Eigen::MatrixXd> w_, dw_;
    std::vector<Eigen::VectorXd> b_, db_;
    bool sigmoid_output_ = false;
    // forward cache
    Eigen::VectorXd x_in_;
    std::vector<Eigen::VectorXd> pre_, post_;
};

// Stroke-offset predictor: flattened initial control points -> offsets.
struct LocNet {
    Mlp net;
    LocNet() = default;
    LocNet(int n_strokes, int hidden, unsigned seed) : net(n_strokes * 8, hidden, n_strokes * 8, seed) {}
    Eigen::VectorXd predict_offsets(const Eigen::VectorXd &z_init);
};

// Stroke-probability predictor: a frozen random input vector of dimension n
// (sampled once per lineage) -> n probabilities through a sigmoid head.
// The head is biased at construction so every stroke starts near p = 0.95
// (keep everything); training has to argue strokes away.
struct SimpNet {
    Mlp net;
    Eigen::VectorXd input;
    SimpNet() = default;
    SimpNet(int n_strokes, int hidden, unsigned seed);
    Eigen::VectorXd predict_probabilities();
};

struct Adam {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void attach(const std::vector<Eigen::MatrixXd *> &weights, const std::vector<Eigen::VectorXd *> &biases);
    void step(const std::vector<Eigen::MatrixXd *> &weight_grads, const std::vector<Eigen::VectorXd *> &bias_grads);

private:
    std::vector<Eigen::MatrixXd *> w_;
    std::vector<Eigen::VectorXd *> b_;
    std::vector<Eigen::MatrixXd> mw_, vw_;
    std::vector<Eigen::VectorXd> mb_, vb_;
    long t_ = 0;
};

void save_checkpoint(const std::string &path, const LocNet &loc, const SimpNet &simp, unsigned seed, int n_strokes);
void load_checkpoint(const std::string &path, LocNet &loc, SimpNet &simp, unsigned &seed, int &n_strokes);

} // namespace ssk
