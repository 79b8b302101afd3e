#pragma once

#include <cstddef>
#include <vector>

#include "prerank/errors.hpp"

namespace prerank {

// Row-major dense float32 matrix. Working precision everywhere; half precision
// exists only at the storage boundary (see half.hpp).
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<float> v;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0f) {}
    Matrix(int r, int c, std::vector<float> data);

    float& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    float at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
    const float* row(int r) const { return v.data() + static_cast<std::size_t>(r) * cols; }
    float* row(int r) { return v.data() + static_cast<std::size_t>(r) * cols; }

    std::size_t size() const { return v.size(); }
    bool empty() const { return v.empty(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    static Matrix identity(int n);
};

// true = attention permitted. Every row must keep at least one true entry,
// otherwise the row softmax is undefined.
struct BoolMask {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> allowed;

    BoolMask() = default;
    BoolMask(int r, int c, bool fill = false)
        : rows(r), cols(c), allowed(static_cast<std::size_t>(r) * c, fill ? 1 : 0) {}

    bool at(int r, int c) const { return allowed[static_cast<std::size_t>(r) * cols + c] != 0; }
    void set(int r, int c, bool val) { allowed[static_cast<std::size_t>(r) * cols + c] = val ? 1 : 0; }
};

Matrix matmul(const Matrix& a, const Matrix& b);
// a * b^T without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

// Row-wise softmax restricted to allowed entries; disallowed entries are
// exactly 0 in the output. Uses per-row max subtraction. Throws input_error
// on a fully masked row.
Matrix masked_softmax_rows(const Matrix& scores, const BoolMask& mask);

// Per-token (per-row) normalization: (x - mean) / sqrt(var + eps) * gamma + beta.
// gamma and beta are 1 x d.
Matrix layer_norm(const Matrix& x, const Matrix& gamma, const Matrix& beta, float eps = 1e-5f);

// Exact erf form: x * Phi(x).
Matrix gelu(const Matrix& x);
float gelu_scalar(float x);
// d/dx of x * Phi(x) = Phi(x) + x * phi(x).
float gelu_grad_scalar(float x);

Matrix add(const Matrix& a, const Matrix& b);
// Broadcast a 1 x d row vector over every row of a.
Matrix add_row_vector(const Matrix& a, const Matrix& bias);
Matrix scale(const Matrix& a, float c);
Matrix transpose(const Matrix& a);
Matrix slice_rows(const Matrix& a, int begin, int end);
Matrix slice_cols(const Matrix& a, int begin, int end);
Matrix concat_rows(const Matrix& top, const Matrix& bottom);
Matrix concat_cols(const std::vector<Matrix>& parts);

bool all_finite(const Matrix& a);

}  // namespace prerank
