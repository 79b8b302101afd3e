#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cfenv>
#include <cmath>
#include <random>

#include "prerank/half.hpp"
#include "prerank/matrix.hpp"

using namespace prerank;

namespace {

Matrix random_matrix(int r, int c, std::mt19937& rng, float scale = 1.0f) {
    std::uniform_real_distribution<float> dist(-scale, scale);
    Matrix m(r, c);
    for (auto& x : m.v) x = dist(rng);
    return m;
}

// Entry-wise triple-loop product, no shared code with matmul.
Matrix matmul_oracle(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < b.cols; ++j) {
            double acc = 0.0;
            for (int k = 0; k < a.cols; ++k) acc += static_cast<double>(a.at(i, k)) * b.at(k, j);
            c.at(i, j) = static_cast<float>(acc);
        }
    return c;
}

float max_abs_diff(const Matrix& a, const Matrix& b) {
    REQUIRE(a.same_shape(b));
    float worst = 0.0f;
    for (std::size_t i = 0; i < a.v.size(); ++i) worst = std::max(worst, std::abs(a.v[i] - b.v[i]));
    return worst;
}

}  // namespace

TEST_CASE("matmul identity and hand cases") {
    Matrix m(2, 2, {1, 2, 3, 4});
    CHECK(max_abs_diff(matmul(Matrix::identity(2), m), m) == 0.0f);

    Matrix a(1, 2, {1, 2});
    Matrix b(2, 1, {3, 4});
    Matrix c = matmul(a, b);
    CHECK(c.rows == 1);
    CHECK(c.cols == 1);
    CHECK(c.v[0] == doctest::Approx(11.0f));
}

TEST_CASE("matmul matches triple-loop oracle") {
    std::mt19937 rng(42);
    const Matrix a = random_matrix(5, 7, rng);
    const Matrix b = random_matrix(7, 3, rng);
    CHECK(max_abs_diff(matmul(a, b), matmul_oracle(a, b)) <= 1e-6f);
}

TEST_CASE("matmul rejects dimension mismatch") {
    CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), input_error);
}

TEST_CASE("matmul associativity on random conformant triples") {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const int n1 = 1 + static_cast<int>(rng() % 64);
        const int n2 = 1 + static_cast<int>(rng() % 64);
        const int n3 = 1 + static_cast<int>(rng() % 64);
        const int n4 = 1 + static_cast<int>(rng() % 64);
        const Matrix a = random_matrix(n1, n2, rng);
        const Matrix b = random_matrix(n2, n3, rng);
        const Matrix c = random_matrix(n3, n4, rng);
        CHECK(max_abs_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))) <= 1e-4f);
    }
}

TEST_CASE("matmul_nt equals matmul with explicit transpose") {
    std::mt19937 rng(11);
    const Matrix a = random_matrix(4, 6, rng);
    const Matrix b = random_matrix(5, 6, rng);
    CHECK(max_abs_diff(matmul_nt(a, b), matmul(a, transpose(b))) <= 1e-6f);
}

TEST_CASE("masked softmax basics") {
    BoolMask all(1, 2, true);
    Matrix row(1, 2, {0.0f, 0.0f});
    Matrix p = masked_softmax_rows(row, all);
    CHECK(p.v[0] == doctest::Approx(0.5f));
    CHECK(p.v[1] == doctest::Approx(0.5f));

    BoolMask first_only(1, 2);
    first_only.set(0, 0, true);
    Matrix q = masked_softmax_rows(Matrix(1, 2, {5.0f, 100.0f}), first_only);
    CHECK(q.v[0] == 1.0f);
    CHECK(q.v[1] == 0.0f);
}

TEST_CASE("masked softmax matches direct exp/sum oracle") {
    Matrix row(1, 3, {1.0f, 2.0f, 3.0f});
    BoolMask all(1, 3, true);
    const Matrix p = masked_softmax_rows(row, all);
    const double denom = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
    for (int j = 0; j < 3; ++j) {
        CHECK(std::abs(p.v[j] - std::exp(1.0 + j) / denom) <= 1e-7);
    }
}

TEST_CASE("masked softmax rejects fully masked rows") {
    BoolMask none(1, 3);
    CHECK_THROWS_AS(masked_softmax_rows(Matrix(1, 3), none), input_error);
}

TEST_CASE("masked softmax property: rows sum to one, zeros exactly at masked entries") {
    std::mt19937 rng(123);
    std::uniform_real_distribution<float> dist(-8.0f, 8.0f);
    for (int trial = 0; trial < 50; ++trial) {
        const int rows = 1 + static_cast<int>(rng() % 6);
        const int cols = 1 + static_cast<int>(rng() % 8);
        Matrix scores(rows, cols);
        for (auto& x : scores.v) x = dist(rng);
        BoolMask mask(rows, cols);
        for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < cols; ++j) mask.set(i, j, rng() % 2 == 0);
            mask.set(i, static_cast<int>(rng() % cols), true);  // keep the row well-defined
        }
        const Matrix p = masked_softmax_rows(scores, mask);
        for (int i = 0; i < rows; ++i) {
            float sum = 0.0f;
            for (int j = 0; j < cols; ++j) {
                if (!mask.at(i, j)) CHECK(p.at(i, j) == 0.0f);
                sum += p.at(i, j);
            }
            CHECK(std::abs(sum - 1.0f) <= 1e-6f);
        }
    }
}

TEST_CASE("layer norm hand cases") {
    Matrix gamma(1, 3, {1, 1, 1});
    Matrix beta(1, 3, {0, 0, 0});
    const Matrix z = layer_norm(Matrix(1, 3, {1, 1, 1}), gamma, beta);
    for (float x : z.v) CHECK(std::abs(x) <= 1e-6f);

    Matrix g2(1, 2, {1, 1});
    Matrix b2(1, 2, {0, 0});
    const Matrix pair = layer_norm(Matrix(1, 2, {1, -1}), g2, b2);
    CHECK(pair.v[0] == doctest::Approx(1.0f).epsilon(1e-4));
    CHECK(pair.v[1] == doctest::Approx(-1.0f).epsilon(1e-4));
}

TEST_CASE("layer norm matches two-pass mean/variance oracle") {
    std::mt19937 rng(5);
    const int d = 16;
    Matrix x = random_matrix(3, d, rng, 2.0f);
    Matrix gamma = random_matrix(1, d, rng);
    Matrix beta = random_matrix(1, d, rng);
    const float eps = 1e-5f;
    const Matrix out = layer_norm(x, gamma, beta, eps);
    for (int i = 0; i < x.rows; ++i) {
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += x.at(i, j);
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) var += (x.at(i, j) - mean) * (x.at(i, j) - mean);
        var /= d;
        for (int j = 0; j < d; ++j) {
            const double want = (x.at(i, j) - mean) / std::sqrt(var + eps) * gamma.v[j] + beta.v[j];
            CHECK(std::abs(out.at(i, j) - want) <= 1e-6);
        }
    }
}

TEST_CASE("gelu fixed points and tails") {
    CHECK(gelu_scalar(0.0f) == 0.0f);
    // Oracle: x * Phi(x) with the erf-based normal CDF in double.
    const double phi1 = 0.5 * (1.0 + std::erf(1.0 / std::sqrt(2.0)));
    CHECK(std::abs(gelu_scalar(1.0f) - 1.0 * phi1) <= 1e-6);
    CHECK(std::abs(gelu_scalar(1.0f) - 0.8413f) <= 1e-4);
    CHECK(std::abs(gelu_scalar(-10.0f)) < 1e-8f);
}

TEST_CASE("gelu shape: single dip at ~-0.75, monotone to the right, reflection identity") {
    // x * Phi(x) is not globally monotone: gelu'(x) = Phi(x) + x*phi(x) turns
    // negative left of the minimum at x ~ -0.7518 (value ~ -0.1700).
    float prev = gelu_scalar(-0.7518f);
    for (float x = -0.7518f; x <= 6.0f; x += 0.01f) {
        const float y = gelu_scalar(x);
        CHECK(y >= prev - 1e-7f);
        prev = y;
    }
    prev = gelu_scalar(-6.0f);
    for (float x = -6.0f; x <= -0.7519f; x += 0.01f) {
        const float y = gelu_scalar(x);
        CHECK(y <= prev + 1e-7f);
        prev = y;
    }
    CHECK(gelu_scalar(-0.7518f) == doctest::Approx(-0.17f).epsilon(1e-2));
    // Phi(x) + Phi(-x) = 1, so x*Phi(x) - (-x)*Phi(-x) = x.
    for (float x = -6.0f; x <= 6.0f; x += 0.01f) {
        CHECK(std::abs(gelu_scalar(x) - gelu_scalar(-x) - x) <= 1e-6f);
    }
}

namespace {

// Arithmetic round-to-nearest-even binary16 oracle built on nearbyint; no bit
// twiddling shared with the implementation.
double half_roundtrip_oracle(float f) {
    if (std::isnan(f)) return std::nan("");
    const double af = std::abs(f);
    const double sign = std::signbit(f) ? -1.0 : 1.0;
    if (af == 0.0) return sign * 0.0;
    std::fesetround(FE_TONEAREST);
    if (af < std::ldexp(1.0, -14)) {  // subnormal half quantum 2^-24
        const double q = std::ldexp(1.0, -24);
        return sign * std::nearbyint(af / q) * q;
    }
    const int e = std::ilogb(af);
    const double q = std::ldexp(1.0, e - 10);
    const double r = std::nearbyint(af / q) * q;
    return r > 65504.0 ? sign * 65504.0 : sign * r;  // matches the clamped contract
}

}  // namespace

TEST_CASE("half conversion exact and clamped cases") {
    std::size_t clamped = 0;
    CHECK(half_bits_to_float(float_to_half_bits(1.0f, &clamped)) == 1.0f);
    CHECK(clamped == 0);

    const float back = half_bits_to_float(float_to_half_bits(0.1f, &clamped));
    CHECK(std::abs(back - 0.1f) / 0.1f <= std::ldexp(1.0f, -11));

    CHECK(half_bits_to_float(float_to_half_bits(70000.0f, &clamped)) == 65504.0f);
    CHECK(clamped == 1);
    CHECK(half_bits_to_float(float_to_half_bits(-70000.0f, &clamped)) == -65504.0f);
    CHECK(clamped == 2);
}

TEST_CASE("half conversion matches arithmetic rounding oracle") {
    std::mt19937 rng(99);
    std::uniform_real_distribution<float> exp_dist(-20.0f, 15.0f);
    std::uniform_real_distribution<float> mant_dist(1.0f, 2.0f);
    for (int trial = 0; trial < 5000; ++trial) {
        float f = std::ldexp(mant_dist(rng), static_cast<int>(exp_dist(rng)));
        if (rng() % 2) f = -f;
        const float got = half_bits_to_float(float_to_half_bits(f));
        const double want = half_roundtrip_oracle(f);
        CHECK(static_cast<double>(got) == want);
    }
}

TEST_CASE("half roundtrip relative error within 2^-11 on the normal range") {
    std::mt19937 rng(17);
    std::uniform_real_distribution<float> exp_dist(-14.0f, 15.0f);
    std::uniform_real_distribution<float> mant_dist(1.0f, 2.0f);
    const float bound = std::ldexp(1.0f, -11);
    for (int trial = 0; trial < 5000; ++trial) {
        float f = std::ldexp(mant_dist(rng), static_cast<int>(exp_dist(rng)));
        if (f > 65504.0f) continue;
        if (rng() % 2) f = -f;
        const float back = half_bits_to_float(float_to_half_bits(f));
        CHECK(std::abs(back - f) / std::abs(f) <= bound);
    }
}

TEST_CASE("to_half / from_half vectors") {
    HalfVector hv = to_half({1.0f, -2.5f, 70000.0f});
    CHECK(hv.clamped == 1);
    const std::vector<float> back = from_half(hv.bits);
    CHECK(back[0] == 1.0f);
    CHECK(back[1] == -2.5f);
    CHECK(back[2] == 65504.0f);
}
