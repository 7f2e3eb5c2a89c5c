#include "dcseg/tape.hpp"

#include <algorithm>
#include <cmath>

namespace dcseg {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

bool channel_broadcast(const Tensor& a, const Tensor& b) {
    return a.rank() == 3 && b.rank() == 1 && b.shape[0] == a.shape[0];
}

}  // namespace

int Tape::push(Node n) {
    n.grad = Tensor(n.value.shape);
    nodes_.push_back(std::move(n));
    backward_ready_ = true;
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::check(int id) const {
    if (id < 0 || id >= static_cast<int>(nodes_.size()))
        throw std::invalid_argument("tape: bad node id " + std::to_string(id));
    return id;
}

int Tape::input(Tensor t, std::string name) {
    if (!t.all_finite())
        throw std::invalid_argument("tape: non-finite input tensor '" + name + "'");
    Node n;
    n.op = Op::Input;
    n.value = std::move(t);
    n.name = std::move(name);
    return push(std::move(n));
}

int Tape::param(Tensor t, std::string name) {
    if (!t.all_finite())
        throw std::invalid_argument("tape: non-finite parameter tensor '" + name + "'");
    Node n;
    n.op = Op::Param;
    n.value = std::move(t);
    n.name = std::move(name);
    return push(std::move(n));
}

int Tape::conv2d(int x, int w, int stride) {
    const Tensor& in = value(x);
    const Tensor& ker = value(w);
    require(in.rank() == 3 && ker.rank() == 4,
            "conv2d: need [Cin,H,W] input and [Cout,Cin,k,k] kernel at node " +
                std::to_string(nodes_.size()));
    require(ker.shape[1] == in.shape[0], "conv2d: channel mismatch " + in.shape_str() + " vs " +
                                             ker.shape_str() + " at node " +
                                             std::to_string(nodes_.size()));
    require(ker.shape[2] == ker.shape[3] && ker.shape[2] % 2 == 1, "conv2d: odd square kernel only");
    require(stride >= 1, "conv2d: stride must be >= 1");

    const int cin = in.shape[0], h = in.shape[1], wdt = in.shape[2];
    const int cout = ker.shape[0], k = ker.shape[2], pad = (k - 1) / 2;
    const int oh = (h + 2 * pad - k) / stride + 1;
    const int ow = (wdt + 2 * pad - k) / stride + 1;

    Node n;
    n.op = Op::Conv2d;
    n.inputs = {x, w};
    n.iattr = stride;
    n.value = Tensor({cout, oh, ow});
#pragma omp parallel for schedule(static)
    for (int co = 0; co < cout; ++co) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double acc = 0.0;
                for (int ci = 0; ci < cin; ++ci) {
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = ox * stride + kx - pad;
                            if (ix < 0 || ix >= wdt) continue;
                            acc += in.at(ci, iy, ix) * ker.at(((co * cin + ci) * k + ky) * k + kx);
                        }
                    }
                }
                n.value.at(co, oy, ox) = acc;
            }
        }
    }
    return push(std::move(n));
}

int Tape::relu(int x) {
    Node n;
    n.op = Op::Relu;
    n.inputs = {x};
    n.value = value(x);
    for (double& v : n.value.data) v = std::max(0.0, v);
    return push(std::move(n));
}

int Tape::add(int a, int b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    Node n;
    n.op = Op::Add;
    n.inputs = {a, b};
    if (ta.same_shape(tb)) {
        n.value = ta;
        for (std::size_t i = 0; i < tb.data.size(); ++i) n.value.data[i] += tb.data[i];
    } else if (channel_broadcast(ta, tb)) {
        n.value = ta;
        const int c = ta.shape[0], hw = ta.shape[1] * ta.shape[2];
        for (int ci = 0; ci < c; ++ci)
            for (int i = 0; i < hw; ++i) n.value.data[ci * hw + i] += tb.data[ci];
    } else if (tb.numel() == 1) {
        n.value = ta;
        for (double& v : n.value.data) v += tb.data[0];
    } else {
        require(false, "add: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str() +
                           " at node " + std::to_string(nodes_.size()));
    }
    return push(std::move(n));
}

int Tape::mul(int a, int b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    Node n;
    n.op = Op::Mul;
    n.inputs = {a, b};
    if (ta.same_shape(tb)) {
        n.value = ta;
        for (std::size_t i = 0; i < tb.data.size(); ++i) n.value.data[i] *= tb.data[i];
    } else if (channel_broadcast(ta, tb)) {
        n.value = ta;
        const int c = ta.shape[0], hw = ta.shape[1] * ta.shape[2];
        for (int ci = 0; ci < c; ++ci)
            for (int i = 0; i < hw; ++i) n.value.data[ci * hw + i] *= tb.data[ci];
    } else if (tb.numel() == 1) {
        n.value = ta;
        for (double& v : n.value.data) v *= tb.data[0];
    } else {
        require(false, "mul: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str() +
                           " at node " + std::to_string(nodes_.size()));
    }
    return push(std::move(n));
}

int Tape::scalar_mul(int x, double s) {
    Node n;
    n.op = Op::ScalarMul;
    n.inputs = {x};
    n.sattr = s;
    n.value = value(x);
    for (double& v : n.value.data) v *= s;
    return push(std::move(n));
}

int Tape::exp_(int x) {
    Node n;
    n.op = Op::Exp;
    n.inputs = {x};
    n.value = value(x);
    for (double& v : n.value.data) v = std::exp(v);
    if (!n.value.all_finite())
        throw std::runtime_error("exp: non-finite result at node " + std::to_string(nodes_.size()));
    return push(std::move(n));
}

int Tape::log_(int x) {
    Node n;
    n.op = Op::Log;
    n.inputs = {x};
    n.value = value(x);
    for (double& v : n.value.data) v = std::log(v);
    if (!n.value.all_finite())
        throw std::runtime_error("log: non-finite result at node " + std::to_string(nodes_.size()));
    return push(std::move(n));
}

int Tape::sum(int x) {
    Node n;
    n.op = Op::Sum;
    n.inputs = {x};
    double acc = 0.0;
    for (double v : value(x).data) acc += v;
    n.value = Tensor({1}, {acc});
    return push(std::move(n));
}

int Tape::mean(int x) {
    Node n;
    n.op = Op::Mean;
    n.inputs = {x};
    double acc = 0.0;
    for (double v : value(x).data) acc += v;
    n.value = Tensor({1}, {acc / static_cast<double>(value(x).numel())});
    return push(std::move(n));
}

int Tape::max_reduce(int x) {
    Node n;
    n.op = Op::MaxReduce;
    n.inputs = {x};
    const Tensor& t = value(x);
    int arg = 0;
    for (std::size_t i = 1; i < t.data.size(); ++i)
        if (t.data[i] > t.data[arg]) arg = static_cast<int>(i);
    n.iattr = arg;
    n.value = Tensor({1}, {t.data[arg]});
    return push(std::move(n));
}

int Tape::matmul(int a, int b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require(ta.rank() == 2, "matmul: lhs must be rank-2, got " + ta.shape_str());
    require(tb.rank() == 1 || tb.rank() == 2, "matmul: rhs must be rank-1 or rank-2");
    const int m = ta.shape[0], k = ta.shape[1];
    const int kb = tb.shape[0];
    require(k == kb, "matmul: inner dim mismatch " + ta.shape_str() + " vs " + tb.shape_str() +
                         " at node " + std::to_string(nodes_.size()));
    const int ncols = tb.rank() == 2 ? tb.shape[1] : 1;

    Node n;
    n.op = Op::Matmul;
    n.inputs = {a, b};
    n.value = tb.rank() == 2 ? Tensor({m, ncols}) : Tensor({m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < ncols; ++j) {
            double acc = 0.0;
            for (int kk = 0; kk < k; ++kk) acc += ta.at(i, kk) * tb.data[kk * ncols + j];
            n.value.data[i * ncols + j] = acc;
        }
    return push(std::move(n));
}

int Tape::log_softmax_rows(int x) {
    const Tensor& t = value(x);
    require(t.rank() == 2, "log_softmax_rows: expected [N,K], got " + t.shape_str());
    const int rows = t.shape[0], cols = t.shape[1];
    Node n;
    n.op = Op::LogSoftmaxRows;
    n.inputs = {x};
    n.value = t;
    for (int r = 0; r < rows; ++r) {
        double mx = t.at(r, 0);
        for (int c = 1; c < cols; ++c) mx = std::max(mx, t.at(r, c));
        double lse = 0.0;
        for (int c = 0; c < cols; ++c) lse += std::exp(t.at(r, c) - mx);
        lse = mx + std::log(lse);
        for (int c = 0; c < cols; ++c) n.value.at(r, c) = t.at(r, c) - lse;
    }
    return push(std::move(n));
}

int Tape::gather_rows(int x, std::vector<int> indices) {
    const Tensor& t = value(x);
    require(t.rank() == 2, "gather_rows: expected [N,D]");
    for (int idx : indices)
        require(idx >= 0 && idx < t.shape[0], "gather_rows: index out of range");
    Node n;
    n.op = Op::GatherRows;
    n.inputs = {x};
    n.value = Tensor({static_cast<int>(indices.size()), t.shape[1]});
    for (std::size_t r = 0; r < indices.size(); ++r)
        for (int c = 0; c < t.shape[1]; ++c)
            n.value.at(static_cast<int>(r), c) = t.at(indices[r], c);
    n.indices = std::move(indices);
    return push(std::move(n));
}

int Tape::l2_normalize_rows(int x) {
    const Tensor& t = value(x);
    require(t.rank() == 1 || t.rank() == 2, "l2_normalize_rows: expected [N,D] or [D]");
    const int rows = t.rank() == 2 ? t.shape[0] : 1;
    const int cols = t.rank() == 2 ? t.shape[1] : t.shape[0];
    Node n;
    n.op = Op::L2NormalizeRows;
    n.inputs = {x};
    n.value = t;
    for (int r = 0; r < rows; ++r) {
        double s = 0.0;
        for (int c = 0; c < cols; ++c) s += t.data[r * cols + c] * t.data[r * cols + c];
        // Degenerate rows (an all-dark crop can zero a feature row) are left
        // at zero via a clamped denominator instead of failing the forward.
        s = std::max(std::sqrt(s), 1e-12);
        for (int c = 0; c < cols; ++c) n.value.data[r * cols + c] /= s;
    }
    return push(std::move(n));
}

int Tape::global_avg_pool(int x) {
    const Tensor& t = value(x);
    require(t.rank() == 3, "global_avg_pool: expected [C,H,W]");
    const int c = t.shape[0], hw = t.shape[1] * t.shape[2];
    Node n;
    n.op = Op::GlobalAvgPool;
    n.inputs = {x};
    n.value = Tensor({c});
    for (int ci = 0; ci < c; ++ci) {
        double acc = 0.0;
        for (int i = 0; i < hw; ++i) acc += t.data[ci * hw + i];
        n.value.data[ci] = acc / hw;
    }
    return push(std::move(n));
}

int Tape::nearest_upsample(int x, int factor) {
    const Tensor& t = value(x);
    require(t.rank() == 3, "nearest_upsample: expected [C,H,W]");
    require(factor >= 1, "nearest_upsample: factor must be >= 1");
    const int c = t.shape[0], h = t.shape[1], w = t.shape[2];
    Node n;
    n.op = Op::NearestUpsample;
    n.inputs = {x};
    n.iattr = factor;
    n.value = Tensor({c, h * factor, w * factor});
    for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < h * factor; ++y)
            for (int xx = 0; xx < w * factor; ++xx)
                n.value.at(ci, y, xx) = t.at(ci, y / factor, xx / factor);
    return push(std::move(n));
}

int Tape::pixels_to_rows(int x) {
    const Tensor& t = value(x);
    require(t.rank() == 3, "pixels_to_rows: expected [C,H,W]");
    const int c = t.shape[0], hw = t.shape[1] * t.shape[2];
    Node n;
    n.op = Op::PixelsToRows;
    n.inputs = {x};
    n.value = Tensor({hw, c});
    for (int ci = 0; ci < c; ++ci)
        for (int i = 0; i < hw; ++i) n.value.at(i, ci) = t.data[ci * hw + i];
    return push(std::move(n));
}

void Tape::zero_grads() {
    for (Node& n : nodes_) {
        n.grad.fill(0.0);
        n.has_grad = false;
    }
}

void Tape::accumulate_grad(int id, const Tensor& g) {
    Node& n = nodes_[check(id)];
    if (!g.same_shape(n.value))
        throw std::invalid_argument("accumulate_grad: seed shape " + g.shape_str() +
                                    " does not match node value " + n.value.shape_str());
    for (std::size_t i = 0; i < g.data.size(); ++i) n.grad.data[i] += g.data[i];
    n.has_grad = true;
}

void Tape::backward(int output, const Tensor& seed) {
    zero_grads();
    accumulate_grad(output, seed);
    run_backward();
}

void Tape::run_backward() {
    if (nodes_.empty() || !backward_ready_)
        throw std::runtime_error("tape: backward requested before any forward evaluation");
    for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id)
        if (nodes_[id].has_grad) backprop_node(id);
}

void Tape::backprop_node(int id) {
    Node& n = nodes_[id];
    auto& g = n.grad;
    auto feed = [&](int src, auto&& write) {
        Node& s = nodes_[src];
        write(s.grad);
        s.has_grad = true;
    };

    switch (n.op) {
        case Op::Input:
        case Op::Param:
            break;
        case Op::Conv2d: {
            const Tensor& in = nodes_[n.inputs[0]].value;
            const Tensor& ker = nodes_[n.inputs[1]].value;
            Tensor& gin = nodes_[n.inputs[0]].grad;
            Tensor& gker = nodes_[n.inputs[1]].grad;
            nodes_[n.inputs[0]].has_grad = true;
            nodes_[n.inputs[1]].has_grad = true;
            const int cin = in.shape[0], h = in.shape[1], wdt = in.shape[2];
            const int cout = ker.shape[0], k = ker.shape[2], pad = (k - 1) / 2;
            const int oh = n.value.shape[1], ow = n.value.shape[2];
            const int stride = n.iattr;
            for (int co = 0; co < cout; ++co)
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox) {
                        const double go = g.at(co, oy, ox);
                        if (go == 0.0) continue;
                        for (int ci = 0; ci < cin; ++ci)
                            for (int ky = 0; ky < k; ++ky) {
                                const int iy = oy * stride + ky - pad;
                                if (iy < 0 || iy >= h) continue;
                                for (int kx = 0; kx < k; ++kx) {
                                    const int ix = ox * stride + kx - pad;
                                    if (ix < 0 || ix >= wdt) continue;
                                    const int kidx = ((co * cin + ci) * k + ky) * k + kx;
                                    gin.at(ci, iy, ix) += go * ker.at(kidx);
                                    gker.at(kidx) += go * in.at(ci, iy, ix);
                                }
                            }
                    }
            break;
        }
        case Op::Relu:
            feed(n.inputs[0], [&](Tensor& gi) {
                const Tensor& in = nodes_[n.inputs[0]].value;
                for (std::size_t i = 0; i < g.data.size(); ++i)
                    if (in.data[i] > 0.0) gi.data[i] += g.data[i];
            });
            break;
        case Op::Add: {
            const Tensor& ta = nodes_[n.inputs[0]].value;
            const Tensor& tb = nodes_[n.inputs[1]].value;
            feed(n.inputs[0], [&](Tensor& ga) {
                for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
            });
            feed(n.inputs[1], [&](Tensor& gb) {
                if (ta.same_shape(tb)) {
                    for (std::size_t i = 0; i < g.data.size(); ++i) gb.data[i] += g.data[i];
                } else if (channel_broadcast(ta, tb)) {
                    const int c = ta.shape[0], hw = ta.shape[1] * ta.shape[2];
                    for (int ci = 0; ci < c; ++ci)
                        for (int i = 0; i < hw; ++i) gb.data[ci] += g.data[ci * hw + i];
                } else {
                    for (double v : g.data) gb.data[0] += v;
                }
            });
            break;
        }
        case Op::Mul: {
            const Tensor& ta = nodes_[n.inputs[0]].value;
            const Tensor& tb = nodes_[n.inputs[1]].value;
            feed(n.inputs[0], [&](Tensor& ga) {
                if (ta.same_shape(tb)) {
                    for (std::size_t i = 0; i < g.data.size(); ++i)
                        ga.data[i] += g.data[i] * tb.data[i];
                } else if (channel_broadcast(ta, tb)) {
                    const int c = ta.shape[0], hw = ta.shape[1] * ta.shape[2];
                    for (int ci = 0; ci < c; ++ci)
                        for (int i = 0; i < hw; ++i)
                            ga.data[ci * hw + i] += g.data[ci * hw + i] * tb.data[ci];
                } else {
                    for (std::size_t i = 0; i < g.data.size(); ++i)
                        ga.data[i] += g.data[i] * tb.data[0];
                }
            });
            feed(n.inputs[1], [&](Tensor& gb) {
                if (ta.same_shape(tb)) {
                    for (std::size_t i = 0; i < g.data.size(); ++i)
                        gb.data[i] += g.data[i] * ta.data[i];
                } else if (channel_broadcast(ta, tb)) {
                    const int c = ta.shape[0], hw = ta.shape[1] * ta.shape[2];
                    for (int ci = 0; ci < c; ++ci)
                        for (int i = 0; i < hw; ++i)
                            gb.data[ci] += g.data[ci * hw + i] * ta.data[ci * hw + i];
                } else {
                    for (std::size_t i = 0; i < g.data.size(); ++i)
                        gb.data[0] += g.data[i] * ta.data[i];
                }
            });
            break;
        }
        case Op::ScalarMul:
            feed(n.inputs[0], [&](Tensor& gi) {
                for (std::size_t i = 0; i < g.data.size(); ++i) gi.data[i] += g.data[i] * n.sattr;
            });
            break;
        case Op::Exp:
            feed(n.inputs[0], [&](Tensor& gi) {
                for (std::size_t i = 0; i < g.data.size(); ++i)
                    gi.data[i] += g.data[i] * n.value.data[i];
            });
            break;
        case Op::Log:
            feed(n.inputs[0], [&](Tensor& gi) {
                const Tensor& in = nodes_[n.inputs[0]].value;
                for (std::size_t i = 0; i < g.data.size(); ++i)
                    gi.data[i] += g.data[i] / in.data[i];
            });
            break;
        case Op::Sum:
            feed(n.inputs[0], [&](Tensor& gi) {
                for (double& v : gi.data) v += g.data[0];
            });
            break;
        case Op::Mean:
            feed(n.inputs[0], [&](Tensor& gi) {
                const double s = g.data[0] / static_cast<double>(gi.numel());
                for (double& v : gi.data) v += s;
            });
            break;
        case Op::MaxReduce:
            feed(n.inputs[0], [&](Tensor& gi) { gi.data[n.iattr] += g.data[0]; });
            break;
        case Op::Matmul: {
            const Tensor& ta = nodes_[n.inputs[0]].value;
            const Tensor& tb = nodes_[n.inputs[1]].value;
            const int m = ta.shape[0], k = ta.shape[1];
            const int ncols = tb.rank() == 2 ? tb.shape[1] : 1;
            feed(n.inputs[0], [&](Tensor& ga) {
                for (int i = 0; i < m; ++i)
                    for (int kk = 0; kk < k; ++kk) {
                        double acc = 0.0;
                        for (int j = 0; j < ncols; ++j)
                            acc += g.data[i * ncols + j] * tb.data[kk * ncols + j];
                        ga.at(i, kk) += acc;
                    }
            });
            feed(n.inputs[1], [&](Tensor& gb) {
                for (int kk = 0; kk < k; ++kk)
                    for (int j = 0; j < ncols; ++j) {
                        double acc = 0.0;
                        for (int i = 0; i < m; ++i) acc += ta.at(i, kk) * g.data[i * ncols + j];
                        gb.data[kk * ncols + j] += acc;
                    }
            });
            break;
        }
        case Op::LogSoftmaxRows:
            feed(n.inputs[0], [&](Tensor& gi) {
                const int rows = n.value.shape[0], cols = n.value.shape[1];
                for (int r = 0; r < rows; ++r) {
                    double gsum = 0.0;
                    for (int c = 0; c < cols; ++c) gsum += g.at(r, c);
                    for (int c = 0; c < cols; ++c)
                        gi.at(r, c) += g.at(r, c) - std::exp(n.value.at(r, c)) * gsum;
                }
            });
            break;
        case Op::GatherRows:
            feed(n.inputs[0], [&](Tensor& gi) {
                const int cols = n.value.shape[1];
                for (std::size_t r = 0; r < n.indices.size(); ++r)
                    for (int c = 0; c < cols; ++c)
                        gi.at(n.indices[r], c) += g.at(static_cast<int>(r), c);
            });
            break;
        case Op::L2NormalizeRows:
            feed(n.inputs[0], [&](Tensor& gi) {
                const Tensor& in = nodes_[n.inputs[0]].value;
                const int rows = in.rank() == 2 ? in.shape[0] : 1;
                const int cols = in.rank() == 2 ? in.shape[1] : in.shape[0];
                for (int r = 0; r < rows; ++r) {
                    double norm = 0.0, gdotu = 0.0;
                    for (int c = 0; c < cols; ++c)
                        norm += in.data[r * cols + c] * in.data[r * cols + c];
                    norm = std::max(std::sqrt(norm), 1e-12);  // matches the clamped forward
                    for (int c = 0; c < cols; ++c)
                        gdotu += g.data[r * cols + c] * n.value.data[r * cols + c];
                    for (int c = 0; c < cols; ++c)
                        gi.data[r * cols + c] +=
                            (g.data[r * cols + c] - gdotu * n.value.data[r * cols + c]) / norm;
                }
            });
            break;
        case Op::GlobalAvgPool:
            feed(n.inputs[0], [&](Tensor& gi) {
                const int c = gi.shape[0], hw = gi.shape[1] * gi.shape[2];
                for (int ci = 0; ci < c; ++ci)
                    for (int i = 0; i < hw; ++i) gi.data[ci * hw + i] += g.data[ci] / hw;
            });
            break;
        case Op::NearestUpsample:
            feed(n.inputs[0], [&](Tensor& gi) {
                const int c = gi.shape[0], oh = n.value.shape[1], ow = n.value.shape[2];
                const int f = n.iattr;
                for (int ci = 0; ci < c; ++ci)
                    for (int y = 0; y < oh; ++y)
                        for (int x = 0; x < ow; ++x) gi.at(ci, y / f, x / f) += g.at(ci, y, x);
            });
            break;
        case Op::PixelsToRows:
            feed(n.inputs[0], [&](Tensor& gi) {
                const int c = gi.shape[0], hw = gi.shape[1] * gi.shape[2];
                for (int ci = 0; ci < c; ++ci)
                    for (int i = 0; i < hw; ++i) gi.data[ci * hw + i] += g.at(i, ci);
            });
            break;
    }
}

double finite_diff_check(const std::function<double(const Tensor&)>& f, const Tensor& point,
                         const Tensor& analytic, double step) {
    if (step <= 0.0) throw std::invalid_argument("finite_diff_check: step must be > 0");
    if (!point.same_shape(analytic))
        throw std::invalid_argument("finite_diff_check: gradient shape mismatch");
    Tensor x = point;
    double worst = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double saved = x.data[i];
        x.data[i] = saved + step;
        const double fp = f(x);
        x.data[i] = saved - step;
        const double fm = f(x);
        x.data[i] = saved;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw std::runtime_error("finite_diff_check: non-finite evaluation at coordinate " +
                                     std::to_string(i));
        const double numeric = (fp - fm) / (2.0 * step);
        const double a = analytic.data[i];
        worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
    }
    return worst;
}

}  // namespace dcseg
