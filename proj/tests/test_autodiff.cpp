#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "prerank/autodiff.hpp"
#include "prerank/split.hpp"
#include "prerank/taped_model.hpp"
#include "prerank/train.hpp"
#include "support/reference_model.hpp"

using namespace prerank;

namespace {

Matrix random_matrix(int r, int c, std::mt19937_64& rng, float scale = 1.0f) {
    Matrix m(r, c);
    for (auto& x : m.v) {
        x = scale * (static_cast<float>(rng() % 20001) / 10000.0f - 1.0f);
    }
    return m;
}

std::vector<int> random_tokens(std::mt19937_64& rng, int len, int vocab) {
    std::vector<int> ids(len);
    for (auto& t : ids) t = kReservedIds + static_cast<int>(rng() % (vocab - kReservedIds));
    return ids;
}

// Single-op finite-difference probe: loss = mse_vs(op(x), target).
template <typename BuildFn>
void check_op_gradient(Matrix x, const Matrix& target, const BuildFn& build, float step = 1e-2f,
                       float tol = 2e-2f) {
    Tape tape;
    Tape::Var xv = tape.param(x);
    Tape::Var loss = tape.mse_vs(build(tape, xv), target);
    tape.backward(loss);
    const Matrix analytic = tape.grad(xv);

    for (std::size_t i = 0; i < x.v.size(); ++i) {
        const float orig = x.v[i];
        auto eval = [&](float v) {
            Matrix xx = x;
            xx.v[i] = v;
            Tape t2;
            Tape::Var var = t2.constant(xx);
            Tape::Var l2 = t2.mse_vs(build(t2, var), target);
            return t2.value(l2).v[0];
        };
        const float fd = (eval(orig + step) - eval(orig - step)) / (2.0f * step);
        const float got = analytic.v[i];
        const float denom = std::max({std::abs(fd), std::abs(got), 0.05f});
        CHECK(std::abs(fd - got) / denom <= tol);
    }
}

}  // namespace

TEST_CASE("per-op gradients agree with finite differences") {
    std::mt19937_64 rng(1);
    const Matrix x = random_matrix(3, 4, rng);
    const Matrix target = random_matrix(3, 4, rng);

    SUBCASE("matmul") {
        const Matrix b = random_matrix(4, 4, rng);
        check_op_gradient(x, target, [&](Tape& t, Tape::Var v) {
            return t.matmul(v, t.constant(b));
        });
    }
    SUBCASE("matmul_nt") {
        const Matrix b = random_matrix(4, 4, rng);
        check_op_gradient(x, target, [&](Tape& t, Tape::Var v) {
            return t.matmul_nt(v, t.constant(b));
        });
    }
    SUBCASE("gelu") {
        check_op_gradient(x, target, [](Tape& t, Tape::Var v) { return t.gelu(v); });
    }
    SUBCASE("layer_norm input") {
        const Matrix gamma = random_matrix(1, 4, rng);
        const Matrix beta = random_matrix(1, 4, rng);
        check_op_gradient(x, target, [&](Tape& t, Tape::Var v) {
            return t.layer_norm(v, t.constant(gamma), t.constant(beta));
        });
    }
    SUBCASE("masked softmax") {
        BoolMask mask(3, 4, true);
        mask.set(0, 2, false);
        mask.set(2, 0, false);
        Matrix soft_target = random_matrix(3, 4, rng, 0.2f);
        check_op_gradient(x, soft_target, [&](Tape& t, Tape::Var v) {
            return t.masked_softmax(v, mask);
        });
    }
    SUBCASE("softplus") {
        check_op_gradient(x, target, [](Tape& t, Tape::Var v) { return t.softplus(v); });
    }
    SUBCASE("add_row_vector bias") {
        const Matrix a = random_matrix(3, 4, rng);
        Matrix bias = random_matrix(1, 4, rng);
        Tape tape;
        Tape::Var bv = tape.param(bias);
        Tape::Var loss = tape.mse_vs(tape.add_row_vector(tape.constant(a), bv), target);
        tape.backward(loss);
        const Matrix analytic = tape.grad(bv);
        for (int j = 0; j < 4; ++j) {
            auto eval = [&](float v) {
                Matrix bb = bias;
                bb.v[j] = v;
                Tape t2;
                Tape::Var l2 =
                    t2.mse_vs(t2.add_row_vector(t2.constant(a), t2.constant(bb)), target);
                return t2.value(l2).v[0];
            };
            const float fd = (eval(bias.v[j] + 1e-2f) - eval(bias.v[j] - 1e-2f)) / 2e-2f;
            CHECK(std::abs(fd - analytic.v[j]) <= 2e-2f * std::max(1.0f, std::abs(fd)));
        }
    }
}

TEST_CASE("constants do not accumulate gradients") {
    std::mt19937_64 rng(2);
    Tape tape;
    Tape::Var c = tape.constant(random_matrix(2, 2, rng));
    Tape::Var p = tape.param(random_matrix(2, 2, rng));
    Tape::Var loss = tape.mse_vs(tape.matmul(c, p), Matrix(2, 2));
    tape.backward(loss);
    CHECK(tape.grad(c).empty());
    CHECK_FALSE(tape.grad(p).empty());
}

TEST_CASE("taped forward equals the plain encoder forward") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 4; ++trial) {
        ModelConfig cfg;
        cfg.n_layers = 2;
        cfg.d_model = 8;
        cfg.n_heads = 2;
        cfg.d_ff = 16;
        cfg.vocab_size = 48;
        cfg.max_len = 24;
        cfg.q_max = 4;
        cfg.split_layer = static_cast<int>(rng() % 3);
        cfg.comp_dim = trial % 2 == 0 ? 4 : 0;
        const Weights w = init_weights(cfg, 50 + trial);
        const auto q = random_tokens(rng, 2, cfg.vocab_size);
        const auto d = random_tokens(rng, 5, cfg.vocab_size);
        const EncodedSequence seq = make_joint_sequence(q, d, cfg);

        FullForwardOptions opts;
        opts.with_compression = cfg.compression_enabled();
        const ForwardResult plain = full_sequence_forward(seq, w, cfg, opts);

        Tape tape;
        const TapedWeights tw = register_weights(tape, w, Trainable::All);
        const TapedForward taped = taped_forward(tape, tw, seq, cfg, cfg.compression_enabled());
        const Matrix& cls = tape.value(taped.cls);
        for (int j = 0; j < cfg.d_model; ++j) {
            CHECK(std::abs(cls.v[j] - plain.cls.v[j]) <= 1e-6f);
        }
    }
}

TEST_CASE("full-model gradients match finite differences on the double reference") {
    // d=8, h=2, n=2, e=4 instance with every parameter checked entry-wise.
    ModelConfig cfg;
    cfg.n_layers = 2;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.d_ff = 12;
    cfg.vocab_size = 16;
    cfg.max_len = 16;
    cfg.q_max = 3;
    cfg.split_layer = 1;
    cfg.comp_dim = 4;
    Weights w = init_weights(cfg, 9001);
    // Larger-than-default init keeps gradients clear of float noise.
    std::mt19937_64 wrng(4);
    for_each_param(w, [&](const std::string& name, Matrix& m) {
        if (name.find("ln") != std::string::npos) return;  // keep norm params at identity
        for (auto& x : m.v) {
            x = 0.35f * (static_cast<float>(wrng() % 20001) / 10000.0f - 1.0f);
        }
    });

    std::mt19937_64 rng(5);
    std::vector<TrainPair> batch;
    for (int i = 0; i < 2; ++i) {
        TrainPair p;
        p.query = random_tokens(rng, 2, cfg.vocab_size);
        p.pos_doc = random_tokens(rng, 3, cfg.vocab_size);
        p.neg_doc = random_tokens(rng, 4, cfg.vocab_size);
        batch.push_back(std::move(p));
    }

    const GradientSet gs = grads(w, batch, cfg);
    const double loss_float = gs.loss;
    const double loss_ref = refmodel::dbatch_loss(batch, w, cfg);
    CHECK(std::abs(loss_float - loss_ref) <= 1e-5);

    std::vector<Matrix*> mats;
    for_each_param(w, [&](const std::string&, Matrix& m) { mats.push_back(&m); });
    REQUIRE(mats.size() == gs.grads.size());

    const double step = 1e-3;
    std::size_t checked = 0;
    std::size_t zeros = 0;
    for (std::size_t p = 0; p < mats.size(); ++p) {
        for (std::size_t i = 0; i < mats[p]->v.size(); ++i) {
            const float orig = mats[p]->v[i];
            mats[p]->v[i] = orig + static_cast<float>(step);
            const double up = refmodel::dbatch_loss(batch, w, cfg);
            mats[p]->v[i] = orig - static_cast<float>(step);
            const double down = refmodel::dbatch_loss(batch, w, cfg);
            mats[p]->v[i] = orig;
            const double fd = (up - down) / (2.0 * step);
            const double got = gs.grads[p].v[i];
            // Relative agreement where the gradient is measurable; entries that
            // are zero in both (PAD rows, unused vocab) pass on the floor.
            const double denom = std::max({std::abs(fd), std::abs(got), 1e-4});
            CHECK(std::abs(fd - got) / denom <= 1e-3);
            if (fd == 0.0 && got == 0.0) ++zeros;
            ++checked;
        }
    }
    CHECK(checked > 1000);
    CHECK(zeros < checked);  // the check must not be vacuous
}

TEST_CASE("query-phase representations take no gradient from document embeddings") {
    // Loss built only from query-side rows at the split layer: document token
    // embedding rows must receive exactly zero gradient.
    ModelConfig cfg;
    cfg.n_layers = 2;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.d_ff = 16;
    cfg.vocab_size = 32;
    cfg.max_len = 20;
    cfg.q_max = 3;
    cfg.split_layer = 2;  // the whole network is query-internal for query rows
    const Weights w = init_weights(cfg, 6);
    const std::vector<int> q = {9, 10};
    const std::vector<int> d = {20, 21, 22};
    const EncodedSequence seq = make_joint_sequence(q, d, cfg);

    Tape tape;
    const TapedWeights tw = register_weights(tape, w, Trainable::All);
    const TapedForward fwd = taped_forward(tape, tw, seq, cfg, false);
    const int q_rows = cfg.q_max + 2;
    Tape::Var query_rows = tape.slice_rows(fwd.states[cfg.split_layer], 0, q_rows);
    Tape::Var loss = tape.mse_vs(query_rows, Matrix(q_rows, cfg.d_model));
    tape.backward(loss);

    const Matrix& emb_grad = tape.grad(tw.tok_emb);
    REQUIRE_FALSE(emb_grad.empty());
    for (int token : d) {
        for (int j = 0; j < cfg.d_model; ++j) CHECK(emb_grad.at(token, j) == 0.0f);
    }
    // Query tokens do receive gradient.
    float q_grad_mag = 0.0f;
    for (int token : q) {
        for (int j = 0; j < cfg.d_model; ++j) q_grad_mag += std::abs(emb_grad.at(token, j));
    }
    CHECK(q_grad_mag > 0.0f);
}
