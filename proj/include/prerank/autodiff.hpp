#pragma once

#include <functional>
#include <vector>

#include "prerank/matrix.hpp"

namespace prerank {

// Reverse-mode tape over Matrix-valued operations. Nodes are appended in
// evaluation order, so reverse iteration is a valid topological order for the
// backward sweep. Forward values are computed with the same kernels the plain
// encoder uses, keeping both paths numerically identical.
class Tape {
  public:
    struct Var {
        int id = -1;
        bool valid() const { return id >= 0; }
    };

    // Leaves: params take part in backward, constants never receive gradients
    // and anything derived only from constants is skipped entirely.
    Var constant(Matrix value) { return push_leaf(std::move(value), false); }
    Var param(Matrix value) { return push_leaf(std::move(value), true); }

    const Matrix& value(Var v) const { return nodes_[v.id].value; }
    bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
    // Zero matrix until backward() has run.
    const Matrix& grad(Var v) const;

    Var matmul(Var a, Var b);
    Var matmul_nt(Var a, Var b);              // a * b^T
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var add_row_vector(Var a, Var bias);
    Var scale(Var a, float c);
    Var gelu(Var x);
    Var layer_norm(Var x, Var gamma, Var beta, float eps = 1e-5f);
    Var masked_softmax(Var scores, const BoolMask& mask);
    Var gather_rows(Var table, std::vector<int> indices);
    Var slice_rows(Var a, int begin, int end);
    Var slice_cols(Var a, int begin, int end);
    Var concat_rows(Var a, Var b);
    Var concat_cols(const std::vector<Var>& parts);
    // base with rows [at, at+rows.rows) replaced by `rows`.
    Var overwrite_rows(Var base, Var rows, int at);
    // 1x1: mean squared difference against a constant target.
    Var mse_vs(Var a, const Matrix& target);
    Var softplus(Var x);

    // Seeds d(loss)/d(loss) = 1 and accumulates gradients; loss must be 1x1.
    void backward(Var loss);

    std::size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Matrix value;
        Matrix grad;
        std::function<void()> back;  // empty for leaves
        bool requires_grad = false;
    };

    Var push_leaf(Matrix value, bool requires_grad);
    Var push(Matrix value, std::function<void()> back, bool requires_grad);
    Matrix& grad_buf(int id);

    std::vector<Node> nodes_;
};

}  // namespace prerank
