#include "sat/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace sat::nn {

Var constant(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    return n;
}

Var parameter(Tensor value, std::string name, bool trainable) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    n->name = std::move(name);
    n->trainable = trainable;
    return n;
}

Var detach(const Var& v) { return constant(v->value); }

namespace {

Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    for (const auto& p : n->parents) {
        if (p->requires_grad) {
            n->requires_grad = true;
            break;
        }
    }
    if (n->requires_grad) n->backprop = std::move(backprop);
    return n;
}

// C(M x N) += A(M x K) * B(K x N), row major
void matmul_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double* crow = c + static_cast<size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            if (av == 0.0) continue;
            const double* brow = b + static_cast<size_t>(kk) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C(M x N) += A(M x K) * B^T, with B given as (N x K)
void matmul_abt_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double* crow = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* brow = b + static_cast<size_t>(j) * k;
            double s = 0.0;
            for (int kk = 0; kk < k; ++kk) s += arow[kk] * brow[kk];
            crow[j] += s;
        }
    }
}

// C(K x N) += A^T * B where A is (M x K), B is (M x N)
void matmul_atb_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        const double* brow = b + static_cast<size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            if (av == 0.0) continue;
            double* crow = c + static_cast<size_t>(kk) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void im2col(const double* x, int cin, int h, int w, int kh, int kw, int stride, int pad, int oh, int ow,
            double* col) {
    // col layout: (cin*kh*kw) x (oh*ow)
    const int ospatial = oh * ow;
    for (int c = 0; c < cin; ++c) {
        const double* plane = x + static_cast<size_t>(c) * h * w;
        for (int a = 0; a < kh; ++a) {
            for (int b = 0; b < kw; ++b) {
                double* crow = col + (static_cast<size_t>(c) * kh * kw + a * kw + b) * ospatial;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride - pad + a;
                    const bool yin = iy >= 0 && iy < h;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride - pad + b;
                        crow[oy * ow + ox] = (yin && ix >= 0 && ix < w)
                                                 ? plane[static_cast<size_t>(iy) * w + ix]
                                                 : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_acc(const double* col, int cin, int h, int w, int kh, int kw, int stride, int pad, int oh, int ow,
                double* x) {
    const int ospatial = oh * ow;
    for (int c = 0; c < cin; ++c) {
        double* plane = x + static_cast<size_t>(c) * h * w;
        for (int a = 0; a < kh; ++a) {
            for (int b = 0; b < kw; ++b) {
                const double* crow = col + (static_cast<size_t>(c) * kh * kw + a * kw + b) * ospatial;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride - pad + a;
                    if (iy < 0 || iy >= h) continue;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride - pad + b;
                        if (ix < 0 || ix >= w) continue;
                        plane[static_cast<size_t>(iy) * w + ix] += crow[oy * ow + ox];
                    }
                }
            }
        }
    }
}

} // namespace

void backward(const Var& root) {
    if (root->value.size() != 1) throw std::invalid_argument("backward: root must be scalar");
    // topological order via iterative post-order DFS
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack{{root.get(), 0}};
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root->ensure_grad();
    root->grad.data[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backprop && n->requires_grad) n->backprop(*n);
    }
}

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
    const auto& xs = x->value.shape;
    const auto& ws = w->value.shape;
    if (xs.size() != 3 || ws.size() != 4 || xs[0] != ws[1])
        throw std::invalid_argument("conv2d: shape mismatch");
    const int cin = xs[0], h = xs[1], wd = xs[2];
    const int cout = ws[0], kh = ws[2], kw = ws[3];
    const int oh = (h + 2 * pad - kh) / stride + 1;
    const int ow = (wd + 2 * pad - kw) / stride + 1;
    if (oh <= 0 || ow <= 0) throw std::invalid_argument("conv2d: output would be empty");

    const int q = cin * kh * kw;
    const int p = oh * ow;
    auto col = std::make_shared<std::vector<double>>(static_cast<size_t>(q) * p);
    im2col(x->value.data.data(), cin, h, wd, kh, kw, stride, pad, oh, ow, col->data());

    Tensor out({cout, oh, ow});
    matmul_acc(w->value.data.data(), col->data(), out.data.data(), cout, q, p);
    for (int c = 0; c < cout; ++c) {
        const double bv = b->value.data[c];
        double* orow = out.data.data() + static_cast<size_t>(c) * p;
        for (int i = 0; i < p; ++i) orow[i] += bv;
    }

    return make_op(std::move(out), {x, w, b},
                   [col, cin, h, wd, kh, kw, stride, pad, oh, ow, cout, q, p](Node& n) {
                       auto& xp = *n.parents[0];
                       auto& wp = *n.parents[1];
                       auto& bp = *n.parents[2];
                       const double* go = n.grad.data.data();
                       if (bp.requires_grad) {
                           bp.ensure_grad();
                           for (int c = 0; c < cout; ++c) {
                               double s = 0.0;
                               const double* row = go + static_cast<size_t>(c) * p;
                               for (int i = 0; i < p; ++i) s += row[i];
                               bp.grad.data[c] += s;
                           }
                       }
                       if (wp.requires_grad) {
                           wp.ensure_grad();
                           matmul_abt_acc(go, col->data(), wp.grad.data.data(), cout, p, q);
                       }
                       if (xp.requires_grad) {
                           xp.ensure_grad();
                           std::vector<double> gcol(static_cast<size_t>(q) * p, 0.0);
                           matmul_atb_acc(wp.value.data.data(), go, gcol.data(), cout, q, p);
                           col2im_acc(gcol.data(), cin, h, wd, kh, kw, stride, pad, oh, ow,
                                      xp.grad.data.data());
                       }
                   });
}

Var relu(const Var& x) {
    Tensor out = x->value;
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    return make_op(std::move(out), {x}, [](Node& n) {
        auto& xp = *n.parents[0];
        if (!xp.requires_grad) return;
        xp.ensure_grad();
        for (size_t i = 0; i < n.grad.data.size(); ++i)
            if (xp.value.data[i] > 0.0) xp.grad.data[i] += n.grad.data[i];
    });
}

Var sigmoid(const Var& x) {
    Tensor out = x->value;
    for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    return make_op(std::move(out), {x}, [](Node& n) {
        auto& xp = *n.parents[0];
        if (!xp.requires_grad) return;
        xp.ensure_grad();
        for (size_t i = 0; i < n.grad.data.size(); ++i) {
            const double s = n.value.data[i];
            xp.grad.data[i] += n.grad.data[i] * s * (1.0 - s);
        }
    });
}

Var exp_op(const Var& x) {
    Tensor out = x->value;
    for (double& v : out.data) v = std::exp(v);
    return make_op(std::move(out), {x}, [](Node& n) {
        auto& xp = *n.parents[0];
        if (!xp.requires_grad) return;
        xp.ensure_grad();
        for (size_t i = 0; i < n.grad.data.size(); ++i) xp.grad.data[i] += n.grad.data[i] * n.value.data[i];
    });
}

Var add(const Var& a, const Var& b) {
    if (a->value.shape != b->value.shape) throw std::invalid_argument("add: shape mismatch");
    Tensor out = a->value;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b->value.data[i];
    return make_op(std::move(out), {a, b}, [](Node& n) {
        for (auto& parent : n.parents) {
            if (!parent->requires_grad) continue;
            parent->ensure_grad();
            for (size_t i = 0; i < n.grad.data.size(); ++i) parent->grad.data[i] += n.grad.data[i];
        }
    });
}

Var scale(const Var& x, double k) {
    Tensor out = x->value;
    for (double& v : out.data) v *= k;
    return make_op(std::move(out), {x}, [k](Node& n) {
        auto& xp = *n.parents[0];
        if (!xp.requires_grad) return;
        xp.ensure_grad();
        for (size_t i = 0; i < n.grad.data.size(); ++i) xp.grad.data[i] += k * n.grad.data[i];
    });
}

Var concat_channels(const Var& a, const Var& b) {
    const auto& as = a->value.shape;
    const auto& bs = b->value.shape;
    if (as.size() != 3 || bs.size() != 3 || as[1] != bs[1] || as[2] != bs[2])
        throw std::invalid_argument("concat_channels: shape mismatch");
    Tensor out({as[0] + bs[0], as[1], as[2]});
    std::copy(a->value.data.begin(), a->value.data.end(), out.data.begin());
    std::copy(b->value.data.begin(), b->value.data.end(), out.data.begin() + a->value.data.size());
    return make_op(std::move(out), {a, b}, [na = a->value.data.size()](Node& n) {
        auto& ap = *n.parents[0];
        auto& bp = *n.parents[1];
        if (ap.requires_grad) {
            ap.ensure_grad();
            for (size_t i = 0; i < na; ++i) ap.grad.data[i] += n.grad.data[i];
        }
        if (bp.requires_grad) {
            bp.ensure_grad();
            for (size_t i = na; i < n.grad.data.size(); ++i) bp.grad.data[i - na] += n.grad.data[i];
        }
    });
}

Var resize_bilinear(const Var& x, int out_h, int out_w) {
    const auto& xs = x->value.shape;
    if (xs.size() != 3) throw std::invalid_argument("resize_bilinear: rank-3 input required");
    const int c = xs[0], h = xs[1], w = xs[2];
    const double sy = out_h > 1 ? static_cast<double>(h - 1) / (out_h - 1) : 0.0;
    const double sx = out_w > 1 ? static_cast<double>(w - 1) / (out_w - 1) : 0.0;
    Tensor out({c, out_h, out_w});
    for (int oy = 0; oy < out_h; ++oy) {
        const double fy = oy * sy;
        const int y0 = std::min(static_cast<int>(fy), h - 1);
        const int y1 = std::min(y0 + 1, h - 1);
        const double wy = fy - y0;
        for (int ox = 0; ox < out_w; ++ox) {
            const double fx = ox * sx;
            const int x0 = std::min(static_cast<int>(fx), w - 1);
            const int x1 = std::min(x0 + 1, w - 1);
            const double wx = fx - x0;
            for (int ch = 0; ch < c; ++ch) {
                const double* p = x->value.data.data() + static_cast<size_t>(ch) * h * w;
                out.data[(static_cast<size_t>(ch) * out_h + oy) * out_w + ox] =
                    (1 - wy) * ((1 - wx) * p[static_cast<size_t>(y0) * w + x0] +
                                wx * p[static_cast<size_t>(y0) * w + x1]) +
                    wy * ((1 - wx) * p[static_cast<size_t>(y1) * w + x0] +
                          wx * p[static_cast<size_t>(y1) * w + x1]);
            }
        }
    }
    return make_op(std::move(out), {x}, [c, h, w, out_h, out_w, sy, sx](Node& n) {
        auto& xp = *n.parents[0];
        if (!xp.requires_grad) return;
        xp.ensure_grad();
        for (int oy = 0; oy < out_h; ++oy) {
            const double fy = oy * sy;
            const int y0 = std::min(static_cast<int>(fy), h - 1);
            const int y1 = std::min(y0 + 1, h - 1);
            const double wy = fy - y0;
            for (int ox = 0; ox < out_w; ++ox) {
                const double fx = ox * sx;
                const int x0 = std::min(static_cast<int>(fx), w - 1);
                const int x1 = std::min(x0 + 1, w - 1);
                const double wx = fx - x0;
                for (int ch = 0; ch < c; ++ch) {
                    const double g = n.grad.data[(static_cast<size_t>(ch) * out_h + oy) * out_w + ox];
                    double* gp = xp.grad.data.data() + static_cast<size_t>(ch) * h * w;
                    gp[static_cast<size_t>(y0) * w + x0] += g * (1 - wy) * (1 - wx);
                    gp[static_cast<size_t>(y0) * w + x1] += g * (1 - wy) * wx;
                    gp[static_cast<size_t>(y1) * w + x0] += g * wy * (1 - wx);
                    gp[static_cast<size_t>(y1) * w + x1] += g * wy * wx;
                }
            }
        }
    });
}

Var xcorr_depthwise(const Var& search, const Var& templ) {
    const auto& ss = search->value.shape;
    const auto& ts = templ->value.shape;
    if (ss.size() != 3 || ts.size() != 3 || ss[0] != ts[0])
        throw std::invalid_argument("xcorr_depthwise: shape mismatch");
    const int c = ss[0], hs = ss[1], wsz = ss[2], ht = ts[1], wt = ts[2];
    const int oh = hs - ht + 1, ow = wsz - wt + 1;
    if (oh <= 0 || ow <= 0) throw std::invalid_argument("xcorr_depthwise: template larger than search");
    Tensor out({c, oh, ow});
    for (int ch = 0; ch < c; ++ch) {
        const double* sp = search->value.data.data() + static_cast<size_t>(ch) * hs * wsz;
        const double* tp = templ->value.data.data() + static_cast<size_t>(ch) * ht * wt;
        double* op = out.data.data() + static_cast<size_t>(ch) * oh * ow;
        for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j) {
                double s = 0.0;
                for (int a = 0; a < ht; ++a) {
                    const double* srow = sp + static_cast<size_t>(i + a) * wsz + j;
                    const double* trow = tp + static_cast<size_t>(a) * wt;
                    for (int bcol = 0; bcol < wt; ++bcol) s += srow[bcol] * trow[bcol];
                }
                op[static_cast<size_t>(i) * ow + j] = s;
            }
    }
    return make_op(std::move(out), {search, templ}, [c, hs, wsz, ht, wt, oh, ow](Node& n) {
        auto& sp = *n.parents[0];
        auto& tp = *n.parents[1];
        if (sp.requires_grad) sp.ensure_grad();
        if (tp.requires_grad) tp.ensure_grad();
        for (int ch = 0; ch < c; ++ch) {
            const double* go = n.grad.data.data() + static_cast<size_t>(ch) * oh * ow;
            const double* sv = sp.value.data.data() + static_cast<size_t>(ch) * hs * wsz;
            const double* tv = tp.value.data.data() + static_cast<size_t>(ch) * ht * wt;
            for (int i = 0; i < oh; ++i)
                for (int j = 0; j < ow; ++j) {
                    const double g = go[static_cast<size_t>(i) * ow + j];
                    if (g == 0.0) continue;
                    for (int a = 0; a < ht; ++a)
                        for (int bcol = 0; bcol < wt; ++bcol) {
                            if (sp.requires_grad)
                                sp.grad.data[static_cast<size_t>(ch) * hs * wsz +
                                             static_cast<size_t>(i + a) * wsz + j + bcol] +=
                                    g * tv[static_cast<size_t>(a) * wt + bcol];
                            if (tp.requires_grad)
                                tp.grad.data[static_cast<size_t>(ch) * ht * wt +
                                             static_cast<size_t>(a) * wt + bcol] +=
                                    g * sv[static_cast<size_t>(i + a) * wsz + j + bcol];
                        }
                }
        }
    });
}

Var bce_with_logits_mean(const Var& logits, const Tensor& target) {
    if (logits->value.shape != target.shape) throw std::invalid_argument("bce: shape mismatch");
    const size_t n = logits->value.size();
    double loss = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double z = logits->value.data[i];
        const double t = target.data[i];
        loss += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
    }
    Tensor out({1});
    out.data[0] = loss / static_cast<double>(n);
    auto tgt = std::make_shared<Tensor>(target);
    return make_op(std::move(out), {logits}, [tgt, n](Node& node) {
        auto& lp = *node.parents[0];
        if (!lp.requires_grad) return;
        lp.ensure_grad();
        const double g = node.grad.data[0] / static_cast<double>(n);
        for (size_t i = 0; i < n; ++i) {
            const double s = 1.0 / (1.0 + std::exp(-lp.value.data[i]));
            lp.grad.data[i] += g * (s - tgt->data[i]);
        }
    });
}

Var masked_l1_mean(const Var& pred, const Tensor& target, const Tensor& mask) {
    const auto& ps = pred->value.shape;
    if (ps.size() != 3 || pred->value.shape != target.shape)
        throw std::invalid_argument("masked_l1_mean: shape mismatch");
    const int c = ps[0], h = ps[1], w = ps[2];
    if (mask.size() != static_cast<size_t>(h) * w) throw std::invalid_argument("masked_l1_mean: bad mask");
    double count = 0.0;
    for (double v : mask.data) count += v;
    Tensor out({1});
    if (count == 0.0) {
        return make_op(std::move(out), {pred}, [](Node&) {});
    }
    const double denom = count * c;
    double loss = 0.0;
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < h * w; ++i)
            if (mask.data[i] != 0.0)
                loss += std::abs(pred->value.data[static_cast<size_t>(ch) * h * w + i] -
                                 target.data[static_cast<size_t>(ch) * h * w + i]) *
                        mask.data[i];
    out.data[0] = loss / denom;
    auto tgt = std::make_shared<Tensor>(target);
    auto msk = std::make_shared<Tensor>(mask);
    return make_op(std::move(out), {pred}, [tgt, msk, c, h, w, denom](Node& node) {
        auto& pp = *node.parents[0];
        if (!pp.requires_grad) return;
        pp.ensure_grad();
        const double g = node.grad.data[0] / denom;
        for (int ch = 0; ch < c; ++ch)
            for (int i = 0; i < h * w; ++i) {
                const double mv = msk->data[i];
                if (mv == 0.0) continue;
                const size_t idx = static_cast<size_t>(ch) * h * w + i;
                const double d = pp.value.data[idx] - tgt->data[idx];
                pp.grad.data[idx] += g * mv * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
            }
    });
}

void fill_he_normal(Tensor& w, int fan_in, Rng& rng) {
    const double stddev = std::sqrt(2.0 / std::max(1, fan_in));
    for (double& v : w.data) v = rng.normal(0.0, stddev);
}

void SgdMomentum::step(double lr) {
    for (size_t i = 0; i < params_.size(); ++i) {
        auto& p = params_[i];
        if (!p->trainable || p->grad.data.empty()) continue;
        auto& v = velocity_[i];
        for (size_t j = 0; j < p->value.data.size(); ++j) {
            v.data[j] = momentum_ * v.data[j] + p->grad.data[j];
            p->value.data[j] -= lr * v.data[j];
        }
    }
}

bool all_finite(const Tensor& t) {
    for (double v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

} // namespace sat::nn
