#include "treegrad/numerics.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <limits>
#include <cmath>
#include <stdexcept>

namespace treegrad {

void Vector::set_zero() noexcept { std::fill(data_.begin(), data_.end(), 0.0); }

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) {
            throw std::invalid_argument("Matrix: ragged row initializer");
        }
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

void Matrix::set_zero() noexcept { std::fill(data_.begin(), data_.end(), 0.0); }

std::string shape_string(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Vector affine(const Matrix& W, const Vector& x, const Vector& b) {
    if (W.cols() != x.size() || W.rows() != b.size()) {
        throw std::invalid_argument("affine: W is " + shape_string(W) + ", x has length " +
                                    std::to_string(x.size()) + ", b has length " +
                                    std::to_string(b.size()));
    }
    Vector out = b;
    kernels::gemv_acc(W, x.data(), out.data());
    return out;
}

Vector tanh_map(const Vector& x) {
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = std::tanh(x[i]);
    }
    return out;
}

double sigmoid(double x) noexcept {
    // Branching keeps exp() from overflowing for large |x|.
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Vector sigmoid_map(const Vector& x) {
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = sigmoid(x[i]);
    }
    return out;
}

Vector softmax(const Vector& x) {
    Vector out(x.size());
    if (x.size() == 0) {
        return out;
    }
    const double peak = *std::max_element(x.values().begin(), x.values().end());
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = std::exp(x[i] - peak);
        total += out[i];
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] /= total;
    }
    return out;
}

double l2_norm(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) {
        s += v * v;
    }
    return std::sqrt(s);
}

namespace kernels {

void gemv_acc(const Matrix& W, const double* x, double* out) noexcept {
    gemv_acc_block(W, 0, W.cols(), x, out);
}

void gemv_acc_block(const Matrix& W, std::size_t col_offset, std::size_t len, const double* x,
                    double* out) noexcept {
    for (std::size_t r = 0; r < W.rows(); ++r) {
        const double* w = W.row(r).data() + col_offset;
        double s = 0.0;
        for (std::size_t c = 0; c < len; ++c) {
            s += w[c] * x[c];
        }
        out[r] += s;
    }
}

void gemv_t_acc(const Matrix& W, const double* delta, double* out) noexcept {
    gemv_t_acc_block(W, 0, W.cols(), delta, out);
}

void gemv_t_acc_block(const Matrix& W, std::size_t col_offset, std::size_t len, const double* delta,
                      double* out) noexcept {
    for (std::size_t r = 0; r < W.rows(); ++r) {
        const double d = delta[r];
        if (d == 0.0) {
            continue;
        }
        const double* w = W.row(r).data() + col_offset;
        for (std::size_t c = 0; c < len; ++c) {
            out[c] += w[c] * d;
        }
    }
}

void outer_acc(Matrix& G, std::size_t col_offset, const double* delta, const double* x,
               std::size_t len) noexcept {
    for (std::size_t r = 0; r < G.rows(); ++r) {
        const double d = delta[r];
        if (d == 0.0) {
            continue;
        }
        double* g = G.row(r).data() + col_offset;
        for (std::size_t c = 0; c < len; ++c) {
            g[c] += d * x[c];
        }
    }
}

void add(std::span<double> out, std::span<const double> in) noexcept {
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] += in[i];
    }
}

}  // namespace kernels

double SeededRng::uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double SeededRng::uniform_real(double lo, double hi) {
    double v = lo + (hi - lo) * uniform01();
    // Rounding can land exactly on hi when the span is tiny relative to lo.
    return v < hi ? v : std::nextafter(hi, lo);
}

std::int64_t SeededRng::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (lo > hi) {
        throw std::invalid_argument("uniform_int: empty range");
    }
    const std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo);
    if (span == 0) {
        return lo;
    }
    // Smallest all-ones mask covering span; draws above span are rejected.
    const std::uint64_t mask = ~std::uint64_t{0} >> std::countl_zero(span);
    for (;;) {
        const std::uint64_t draw = engine_() & mask;
        if (draw <= span) {
            return static_cast<std::int64_t>(static_cast<std::uint64_t>(lo) + draw);
        }
    }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Matrix uniform_init(std::size_t rows, std::size_t cols, double lo, double hi, SeededRng& rng) {
    if (!(lo < hi)) {
        throw std::invalid_argument("uniform_init: requires lo < hi");
    }
    Matrix m(rows, cols);
    for (double& v : m.values()) {
        v = rng.uniform_real(lo, hi);
    }
    return m;
}

Vector finite_diff_grad(const ScalarFunction& f, const Vector& x, double h) {
    if (!(h > 0.0)) {
        throw std::invalid_argument("finite_diff_grad: step must be positive");
    }
    Vector grad(x.size());
    Vector probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        const double up = f(probe);
        probe[i] = x[i] - h;
        const double down = f(probe);
        probe[i] = x[i];
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw std::domain_error("finite_diff_grad: non-finite function value at coordinate " +
                                    std::to_string(i));
        }
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

std::string format_double(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::optional<double> parse_double(std::string_view text) {
    if (text == "nan") {
        return std::numeric_limits<double>::quiet_NaN();
    }
    if (text == "inf") {
        return std::numeric_limits<double>::infinity();
    }
    if (text == "-inf") {
        return -std::numeric_limits<double>::infinity();
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        return std::nullopt;
    }
    return v;
}

}  // namespace treegrad
