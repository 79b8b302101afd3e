#include "prerank/autodiff.hpp"

#include <cmath>
#include <memory>

namespace prerank {

Tape::Var Tape::push_leaf(Matrix value, bool requires_grad) {
    nodes_.push_back(Node{std::move(value), Matrix(), nullptr, requires_grad});
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Tape::Var Tape::push(Matrix value, std::function<void()> back, bool requires_grad) {
    nodes_.push_back(Node{std::move(value), Matrix(), std::move(back), requires_grad});
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Matrix& Tape::grad_buf(int id) {
    Node& n = nodes_[id];
    if (n.grad.empty() && !n.value.empty()) n.grad = Matrix(n.value.rows, n.value.cols);
    return n.grad;
}

const Matrix& Tape::grad(Var v) const {
    static const Matrix empty;
    const Node& n = nodes_[v.id];
    return n.grad.empty() ? empty : n.grad;
}

namespace {
void accumulate(Matrix& dst, const Matrix& src) {
    for (std::size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += src.v[i];
}
}  // namespace

Tape::Var Tape::matmul(Var a, Var b) {
    Matrix out = prerank::matmul(value(a), value(b));
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), [this, a, b, self]() {
        const Matrix& dc = nodes_[self.id].grad;
        if (requires_grad(a)) accumulate(grad_buf(a.id), prerank::matmul_nt(dc, value(b)));
        if (requires_grad(b)) {
            accumulate(grad_buf(b.id), prerank::matmul(prerank::transpose(value(a)), dc));
        }
    }, requires_grad(a) || requires_grad(b));
}

Tape::Var Tape::matmul_nt(Var a, Var b) {
    Matrix out = prerank::matmul_nt(value(a), value(b));
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), [this, a, b, self]() {
        const Matrix& dc = nodes_[self.id].grad;
        if (requires_grad(a)) accumulate(grad_buf(a.id), prerank::matmul(dc, value(b)));
        if (requires_grad(b)) {
            accumulate(grad_buf(b.id), prerank::matmul(prerank::transpose(dc), value(a)));
        }
    }, requires_grad(a) || requires_grad(b));
}

Tape::Var Tape::add(Var a, Var b) {
    Matrix out = prerank::add(value(a), value(b));
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), [this, a, b, self]() {
        const Matrix& dc = nodes_[self.id].grad;
        if (requires_grad(a)) accumulate(grad_buf(a.id), dc);
        if (requires_grad(b)) accumulate(grad_buf(b.id), dc);
    }, requires_grad(a) || requires_grad(b));
}

Tape::Var Tape::sub(Var a, Var b) {
    const Matrix& av = value(a);
    const Matrix& bv = value(b);
    if (!av.same_shape(bv)) throw input_error("tape sub: shape mismatch");
    Matrix out(av.rows, av.cols);
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] = av.v[i] - bv.v[i];
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), [this, a, b, self]() {
        const Matrix& dc = nodes_[self.id].grad;
        if (requires_grad(a)) accumulate(grad_buf(a.id), dc);
        if (requires_grad(b)) {
            Matrix& gb = grad_buf(b.id);
            for (std::size_t i = 0; i < gb.v.size(); ++i) gb.v[i] -= dc.v[i];
        }
    }, requires_grad(a) || requires_grad(b));
}

Tape::Var Tape::add_row_vector(Var a, Var bias) {
    Matrix out = prerank::add_row_vector(value(a), value(bias));
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), [this, a, bias, self]() {
        const Matrix& dc = nodes_[self.id].grad;
        if (requires_grad(a)) accumulate(grad_buf(a.id), dc);
        if (requires_grad(bias)) {
            Matrix& gb = grad_buf(bias.id);
            for (int i = 0; i < dc.rows; ++i) {
                const float* row = dc.row(i);
                for (int j = 0; j < dc.cols; ++j) gb.v[j] += row[j];
            }
        }
    }, requires_grad(a) || requires_grad(bias));
}

Tape::Var Tape::scale(Var a, float c) {
    Matrix out = prerank::scale(value(a), c);
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), [this, a, c, self]() {
        if (!requires_grad(a)) return;
        const Matrix& dc = nodes_[self.id].grad;
        Matrix& ga = grad_buf(a.id);
        for (std::size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += c * dc.v[i];
    }, requires_grad(a));
}

Tape::Var Tape::gelu(Var x) {
    Matrix out = prerank::gelu(value(x));
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), [this, x, self]() {
        if (!requires_grad(x)) return;
        const Matrix& dc = nodes_[self.id].grad;
        const Matrix& xv = value(x);
        Matrix& gx = grad_buf(x.id);
        for (std::size_t i = 0; i < gx.v.size(); ++i) {
            gx.v[i] += dc.v[i] * gelu_grad_scalar(xv.v[i]);
        }
    }, requires_grad(x));
}

Tape::Var Tape::layer_norm(Var x, Var gamma, Var beta, float eps) {
    const Matrix& xv = value(x);
    const int rows = xv.rows;
    const int d = xv.cols;
    auto mean = std::make_shared<std::vector<float>>(rows);
    auto inv_std = std::make_shared<std::vector<float>>(rows);
    for (int i = 0; i < rows; ++i) {
        const float* row = xv.row(i);
        float mu = 0.0f;
        for (int j = 0; j < d; ++j) mu += row[j];
        mu /= static_cast<float>(d);
        float var = 0.0f;
        for (int j = 0; j < d; ++j) {
            const float delta = row[j] - mu;
            var += delta * delta;
        }
        var /= static_cast<float>(d);
        (*mean)[i] = mu;
        (*inv_std)[i] = 1.0f / std::sqrt(var + eps);
    }
    Matrix out = prerank::layer_norm(xv, value(gamma), value(beta), eps);
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), [this, x, gamma, beta, mean, inv_std, self]() {
        const Matrix& dy = nodes_[self.id].grad;
        const Matrix& xv2 = value(x);
        const Matrix& g = value(gamma);
        const int r = xv2.rows;
        const int n = xv2.cols;
        const bool need_x = requires_grad(x);
        const bool need_g = requires_grad(gamma);
        const bool need_b = requires_grad(beta);
        for (int i = 0; i < r; ++i) {
            const float mu = (*mean)[i];
            const float is = (*inv_std)[i];
            const float* xrow = xv2.row(i);
            const float* dyrow = dy.row(i);
            if (need_g) {
                Matrix& gg = grad_buf(gamma.id);
                for (int j = 0; j < n; ++j) gg.v[j] += dyrow[j] * (xrow[j] - mu) * is;
            }
            if (need_b) {
                Matrix& gb = grad_buf(beta.id);
                for (int j = 0; j < n; ++j) gb.v[j] += dyrow[j];
            }
            if (need_x) {
                float sum_dxhat = 0.0f;
                float sum_dxhat_xhat = 0.0f;
                for (int j = 0; j < n; ++j) {
                    const float xhat = (xrow[j] - mu) * is;
                    const float dxhat = dyrow[j] * g.v[j];
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += dxhat * xhat;
                }
                const float inv_n = 1.0f / static_cast<float>(n);
                float* gxrow = grad_buf(x.id).row(i);
                for (int j = 0; j < n; ++j) {
                    const float xhat = (xrow[j] - mu) * is;
                    const float dxhat = dyrow[j] * g.v[j];
                    gxrow[j] += is * (dxhat - inv_n * sum_dxhat - xhat * inv_n * sum_dxhat_xhat);
                }
            }
        }
    }, requires_grad(x) || requires_grad(gamma) || requires_grad(beta));
}

Tape::Var Tape::masked_softmax(Var scores, const BoolMask& mask) {
    Matrix out = prerank::masked_softmax_rows(value(scores), mask);
    Var self{static_cast<int>(nodes_.size())};
    auto m = std::make_shared<BoolMask>(mask);
    return push(std::move(out), [this, scores, m, self]() {
        if (!requires_grad(scores)) return;
        const Matrix& dp = nodes_[self.id].grad;
        const Matrix& p = nodes_[self.id].value;
        Matrix& gs = grad_buf(scores.id);
        for (int i = 0; i < p.rows; ++i) {
            const float* prow = p.row(i);
            const float* dprow = dp.row(i);
            float dot = 0.0f;
            for (int j = 0; j < p.cols; ++j) {
                if (m->at(i, j)) dot += dprow[j] * prow[j];
            }
            float* gsrow = gs.row(i);
            for (int j = 0; j < p.cols; ++j) {
                if (m->at(i, j)) gsrow[j] += prow[j] * (dprow[j] - dot);
            }
        }
    }, requires_grad(scores));
}

Tape::Var Tape::gather_rows(Var table, std::vector<int> indices) {
    const Matrix& t = value(table);
    Matrix out(static_cast<int>(indices.size()), t.cols);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const int idx = indices[i];
        if (idx < 0 || idx >= t.rows) throw input_error("tape gather_rows: index out of range");
        std::copy(t.row(idx), t.row(idx) + t.cols, out.row(static_cast<int>(i)));
    }
    Var self{static_cast<int>(nodes_.size())};
    auto idxs = std::make_shared<std::vector<int>>(std::move(indices));
    return push(std::move(out), [this, table, idxs, self]() {
        if (!requires_grad(table)) return;
        const Matrix& dc = nodes_[self.id].grad;
        Matrix& gt = grad_buf(table.id);
        for (std::size_t i = 0; i < idxs->size(); ++i) {
            const float* src = dc.row(static_cast<int>(i));
            float* dst = gt.row((*idxs)[i]);
            for (int j = 0; j < dc.cols; ++j) dst[j] += src[j];
        }
    }, requires_grad(table));
}

Tape::Var Tape::slice_rows(Var a, int begin, int end) {
    Matrix out = prerank::slice_rows(value(a), begin, end);
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), [this, a, begin, self]() {
        if (!requires_grad(a)) return;
        const Matrix& dc = nodes_[self.id].grad;
        Matrix& ga = grad_buf(a.id);
        for (int i = 0; i < dc.rows; ++i) {
            const float* src = dc.row(i);
            float* dst = ga.row(begin + i);
            for (int j = 0; j < dc.cols; ++j) dst[j] += src[j];
        }
    }, requires_grad(a));
}

Tape::Var Tape::slice_cols(Var a, int begin, int end) {
    Matrix out = prerank::slice_cols(value(a), begin, end);
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), [this, a, begin, self]() {
        if (!requires_grad(a)) return;
        const Matrix& dc = nodes_[self.id].grad;
        Matrix& ga = grad_buf(a.id);
        for (int i = 0; i < dc.rows; ++i) {
            const float* src = dc.row(i);
            float* dst = ga.row(i) + begin;
            for (int j = 0; j < dc.cols; ++j) dst[j] += src[j];
        }
    }, requires_grad(a));
}

Tape::Var Tape::concat_rows(Var a, Var b) {
    Matrix out = prerank::concat_rows(value(a), value(b));
    Var self{static_cast<int>(nodes_.size())};
    const int split = value(a).rows;
    return push(std::move(out), [this, a, b, split, self]() {
        const Matrix& dc = nodes_[self.id].grad;
        const bool need_a = requires_grad(a);
        const bool need_b = requires_grad(b);
        for (int i = 0; i < dc.rows; ++i) {
            const bool top = i < split;
            if (top && !need_a) continue;
            if (!top && !need_b) continue;
            const float* src = dc.row(i);
            float* dst = top ? grad_buf(a.id).row(i) : grad_buf(b.id).row(i - split);
            for (int j = 0; j < dc.cols; ++j) dst[j] += src[j];
        }
    }, requires_grad(a) || requires_grad(b));
}

Tape::Var Tape::concat_cols(const std::vector<Var>& parts) {
    std::vector<Matrix> values;
    values.reserve(parts.size());
    for (Var p : parts) values.push_back(value(p));
    Matrix out = prerank::concat_cols(values);
    bool any_req = false;
    for (Var p : parts) any_req = any_req || requires_grad(p);
    Var self{static_cast<int>(nodes_.size())};
    auto parts_copy = std::make_shared<std::vector<Var>>(parts);
    return push(std::move(out), [this, parts_copy, self]() {
        const Matrix& dc = nodes_[self.id].grad;
        int col = 0;
        for (Var p : *parts_copy) {
            const int w = value(p).cols;
            if (requires_grad(p)) {
                Matrix& gp = grad_buf(p.id);
                for (int i = 0; i < dc.rows; ++i) {
                    const float* src = dc.row(i) + col;
                    float* dst = gp.row(i);
                    for (int j = 0; j < w; ++j) dst[j] += src[j];
                }
            }
            col += w;
        }
    }, any_req);
}

Tape::Var Tape::overwrite_rows(Var base, Var rows, int at) {
    const Matrix& bv = value(base);
    const Matrix& rv = value(rows);
    if (rv.cols != bv.cols || at < 0 || at + rv.rows > bv.rows) {
        throw input_error("tape overwrite_rows: bad region");
    }
    Matrix out = bv;
    std::copy(rv.v.begin(), rv.v.end(), out.row(at));
    Var self{static_cast<int>(nodes_.size())};
    const int count = rv.rows;
    return push(std::move(out), [this, base, rows, at, count, self]() {
        const Matrix& dc = nodes_[self.id].grad;
        const bool need_base = requires_grad(base);
        const bool need_rows = requires_grad(rows);
        for (int i = 0; i < dc.rows; ++i) {
            const bool inside = i >= at && i < at + count;
            if (inside && !need_rows) continue;
            if (!inside && !need_base) continue;
            const float* src = dc.row(i);
            float* dst = inside ? grad_buf(rows.id).row(i - at) : grad_buf(base.id).row(i);
            for (int j = 0; j < dc.cols; ++j) dst[j] += src[j];
        }
    }, requires_grad(base) || requires_grad(rows));
}

Tape::Var Tape::mse_vs(Var a, const Matrix& target) {
    const Matrix& av = value(a);
    if (!av.same_shape(target)) throw input_error("tape mse_vs: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < av.v.size(); ++i) {
        const double delta = static_cast<double>(av.v[i]) - target.v[i];
        acc += delta * delta;
    }
    Matrix out(1, 1);
    out.v[0] = static_cast<float>(acc / static_cast<double>(av.v.size()));
    Var self{static_cast<int>(nodes_.size())};
    auto t = std::make_shared<Matrix>(target);
    return push(std::move(out), [this, a, t, self]() {
        if (!requires_grad(a)) return;
        const float d_out = nodes_[self.id].grad.v[0];
        const Matrix& av2 = value(a);
        Matrix& ga = grad_buf(a.id);
        const float k = 2.0f / static_cast<float>(av2.v.size());
        for (std::size_t i = 0; i < ga.v.size(); ++i) {
            ga.v[i] += d_out * k * (av2.v[i] - t->v[i]);
        }
    }, requires_grad(a));
}

Tape::Var Tape::softplus(Var x) {
    const Matrix& xv = value(x);
    Matrix out(xv.rows, xv.cols);
    for (std::size_t i = 0; i < xv.v.size(); ++i) {
        const float v = xv.v[i];
        out.v[i] = v > 0.0f ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
    }
    Var self{static_cast<int>(nodes_.size())};
    return push(std::move(out), [this, x, self]() {
        if (!requires_grad(x)) return;
        const Matrix& dc = nodes_[self.id].grad;
        const Matrix& xv2 = value(x);
        Matrix& gx = grad_buf(x.id);
        for (std::size_t i = 0; i < gx.v.size(); ++i) {
            const float s = 1.0f / (1.0f + std::exp(-xv2.v[i]));
            gx.v[i] += dc.v[i] * s;
        }
    }, requires_grad(x));
}

void Tape::backward(Var loss) {
    Node& top = nodes_[loss.id];
    if (top.value.rows != 1 || top.value.cols != 1) {
        throw input_error("tape backward: loss must be 1x1");
    }
    grad_buf(loss.id).v[0] = 1.0f;
    for (int i = loss.id; i >= 0; --i) {
        Node& n = nodes_[i];
        if (n.back && !n.grad.empty()) n.back();
    }
}

}  // namespace prerank
