#pragma once

#include "sat/rng.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace sat::nn {

struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, double fill = 0.0) : shape(std::move(s)) {
        data.assign(numel(shape), fill);
    }

    static size_t numel(const std::vector<int>& s) {
        size_t n = 1;
        for (int d : s) n *= static_cast<size_t>(d);
        return n;
    }
    size_t size() const { return data.size(); }
    int dim(int i) const { return shape[i]; }
};

// Reverse-mode autodiff node. Graphs are DAGs of shared_ptr nodes; backward()
// runs a topological sweep from a scalar root.
struct Node {
    Tensor value;
    Tensor grad; // allocated lazily, same shape as value
    bool requires_grad = false;
    std::string name; // set for parameters
    bool trainable = true;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop; // scatters this->grad into parents

    void ensure_grad() {
        if (grad.data.empty()) grad = Tensor(value.shape);
    }
    void zero_grad() {
        if (!grad.data.empty()) std::fill(grad.data.begin(), grad.data.end(), 0.0);
    }
};

using Var = std::shared_ptr<Node>;

Var constant(Tensor value);
Var parameter(Tensor value, std::string name, bool trainable = true);
// Leaf sharing no history with v (value copied).
Var detach(const Var& v);

// Runs reverse-mode accumulation from a scalar root (shape {1}).
void backward(const Var& root);

// ---- ops ----
// x: (Cin,H,W)  w: (Cout,Cin,kh,kw)  b: (Cout)
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
Var relu(const Var& x);
Var sigmoid(const Var& x);
Var exp_op(const Var& x);
Var add(const Var& a, const Var& b);              // same shape
Var scale(const Var& x, double k);
Var concat_channels(const Var& a, const Var& b);  // (Ca+Cb, H, W)
Var resize_bilinear(const Var& x, int out_h, int out_w); // align-corners
// Depthwise cross-correlation: search (C,Hs,Ws) x templ (C,Ht,Wt) -> (C,Hs-Ht+1,Ws-Wt+1)
Var xcorr_depthwise(const Var& search, const Var& templ);

// Pixel-averaged binary cross-entropy on logits; target values in [0,1].
Var bce_with_logits_mean(const Var& logits, const Tensor& target);
// Mean absolute error over the masked positions (mask spatial, broadcast over
// channels); returns 0 for an all-zero mask.
Var masked_l1_mean(const Var& pred, const Tensor& target, const Tensor& mask);

// ---- init ----
void fill_he_normal(Tensor& w, int fan_in, Rng& rng);

// ---- optimizer ----
class SgdMomentum {
public:
    SgdMomentum(std::vector<Var> params, double momentum) : params_(std::move(params)), momentum_(momentum) {
        velocity_.resize(params_.size());
        for (size_t i = 0; i < params_.size(); ++i) velocity_[i] = Tensor(params_[i]->value.shape);
    }

    void zero_grad() {
        for (auto& p : params_) p->zero_grad();
    }

    // v <- m*v + g; w <- w - lr*v  (trainable parameters only)
    void step(double lr);

    const std::vector<Var>& params() const { return params_; }

private:
    std::vector<Var> params_;
    double momentum_;
    std::vector<Tensor> velocity_;
};

bool all_finite(const Tensor& t);

} // namespace sat::nn
