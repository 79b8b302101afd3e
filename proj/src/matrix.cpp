#include "prerank/matrix.hpp"

#include <cmath>
#include <string>

namespace prerank {

namespace {

[[noreturn]] void dim_error(const char* op, const Matrix& a, const Matrix& b) {
    throw input_error(std::string(op) + ": dimension mismatch " + std::to_string(a.rows) + "x" +
                      std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" +
                      std::to_string(b.cols));
}

}  // namespace

Matrix::Matrix(int r, int c, std::vector<float> data) : rows(r), cols(c), v(std::move(data)) {
    if (v.size() != static_cast<std::size_t>(r) * c) {
        throw input_error("Matrix: data length does not match rows*cols");
    }
}

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0f;
    return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) dim_error("matmul", a, b);
    Matrix c(a.rows, b.cols);
    // ikj order keeps the b row hot in cache.
    for (int i = 0; i < a.rows; ++i) {
        const float* arow = a.row(i);
        float* crow = c.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const float aik = arow[k];
            if (aik == 0.0f) continue;
            const float* brow = b.row(k);
            for (int j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols) dim_error("matmul_nt", a, b);
    Matrix c(a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i) {
        const float* arow = a.row(i);
        float* crow = c.row(i);
        for (int j = 0; j < b.rows; ++j) {
            const float* brow = b.row(j);
            float acc = 0.0f;
            for (int k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
            crow[j] = acc;
        }
    }
    return c;
}

Matrix masked_softmax_rows(const Matrix& scores, const BoolMask& mask) {
    if (scores.rows != mask.rows || scores.cols != mask.cols) {
        throw input_error("masked_softmax_rows: scores and mask shapes differ");
    }
    Matrix out(scores.rows, scores.cols);
    for (int i = 0; i < scores.rows; ++i) {
        const float* srow = scores.row(i);
        float* orow = out.row(i);
        float max_val = -std::numeric_limits<float>::infinity();
        bool any = false;
        for (int j = 0; j < scores.cols; ++j) {
            if (!mask.at(i, j)) continue;
            any = true;
            if (srow[j] > max_val) max_val = srow[j];
        }
        if (!any) {
            throw input_error("masked_softmax_rows: fully masked row " + std::to_string(i));
        }
        float sum = 0.0f;
        for (int j = 0; j < scores.cols; ++j) {
            if (!mask.at(i, j)) continue;
            const float e = std::exp(srow[j] - max_val);
            orow[j] = e;
            sum += e;
        }
        const float inv = 1.0f / sum;
        for (int j = 0; j < scores.cols; ++j) {
            if (mask.at(i, j)) orow[j] *= inv;
        }
    }
    return out;
}

Matrix layer_norm(const Matrix& x, const Matrix& gamma, const Matrix& beta, float eps) {
    if (gamma.cols != x.cols || beta.cols != x.cols || gamma.rows != 1 || beta.rows != 1) {
        throw input_error("layer_norm: gamma/beta must be 1 x cols");
    }
    Matrix out(x.rows, x.cols);
    const int d = x.cols;
    for (int i = 0; i < x.rows; ++i) {
        const float* row = x.row(i);
        float mean = 0.0f;
        for (int j = 0; j < d; ++j) mean += row[j];
        mean /= static_cast<float>(d);
        float var = 0.0f;
        for (int j = 0; j < d; ++j) {
            const float delta = row[j] - mean;
            var += delta * delta;
        }
        var /= static_cast<float>(d);
        const float inv_std = 1.0f / std::sqrt(var + eps);
        float* orow = out.row(i);
        for (int j = 0; j < d; ++j) {
            orow[j] = (row[j] - mean) * inv_std * gamma.v[j] + beta.v[j];
        }
    }
    return out;
}

float gelu_scalar(float x) {
    return x * 0.5f * (1.0f + std::erf(x * 0.70710678118654752440f));
}

float gelu_grad_scalar(float x) {
    const float cdf = 0.5f * (1.0f + std::erf(x * 0.70710678118654752440f));
    const float pdf = 0.39894228040143267794f * std::exp(-0.5f * x * x);
    return cdf + x * pdf;
}

Matrix gelu(const Matrix& x) {
    Matrix out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.v.size(); ++i) out.v[i] = gelu_scalar(x.v[i]);
    return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) dim_error("add", a, b);
    Matrix c(a.rows, a.cols);
    for (std::size_t i = 0; i < a.v.size(); ++i) c.v[i] = a.v[i] + b.v[i];
    return c;
}

Matrix add_row_vector(const Matrix& a, const Matrix& bias) {
    if (bias.rows != 1 || bias.cols != a.cols) dim_error("add_row_vector", a, bias);
    Matrix c(a.rows, a.cols);
    for (int i = 0; i < a.rows; ++i) {
        const float* arow = a.row(i);
        float* crow = c.row(i);
        for (int j = 0; j < a.cols; ++j) crow[j] = arow[j] + bias.v[j];
    }
    return c;
}

Matrix scale(const Matrix& a, float c) {
    Matrix out(a.rows, a.cols);
    for (std::size_t i = 0; i < a.v.size(); ++i) out.v[i] = a.v[i] * c;
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
    return t;
}

Matrix slice_rows(const Matrix& a, int begin, int end) {
    if (begin < 0 || end > a.rows || begin > end) throw input_error("slice_rows: bad range");
    Matrix out(end - begin, a.cols);
    std::copy(a.row(begin), a.row(begin) + out.size(), out.v.begin());
    return out;
}

Matrix slice_cols(const Matrix& a, int begin, int end) {
    if (begin < 0 || end > a.cols || begin > end) throw input_error("slice_cols: bad range");
    Matrix out(a.rows, end - begin);
    for (int i = 0; i < a.rows; ++i) {
        const float* arow = a.row(i) + begin;
        std::copy(arow, arow + out.cols, out.row(i));
    }
    return out;
}

Matrix concat_rows(const Matrix& top, const Matrix& bottom) {
    if (top.cols != bottom.cols) dim_error("concat_rows", top, bottom);
    Matrix out(top.rows + bottom.rows, top.cols);
    std::copy(top.v.begin(), top.v.end(), out.v.begin());
    std::copy(bottom.v.begin(), bottom.v.end(), out.v.begin() + top.v.size());
    return out;
}

Matrix concat_cols(const std::vector<Matrix>& parts) {
    if (parts.empty()) throw input_error("concat_cols: empty input");
    int total = 0;
    for (const auto& p : parts) {
        if (p.rows != parts[0].rows) dim_error("concat_cols", parts[0], p);
        total += p.cols;
    }
    Matrix out(parts[0].rows, total);
    for (int i = 0; i < out.rows; ++i) {
        float* dst = out.row(i);
        for (const auto& p : parts) {
            std::copy(p.row(i), p.row(i) + p.cols, dst);
            dst += p.cols;
        }
    }
    return out;
}

bool all_finite(const Matrix& a) {
    for (float x : a.v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace prerank
