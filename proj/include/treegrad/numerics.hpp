#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace treegrad {

/// Fixed-length vector of doubles. The length is set at construction.
class Vector {
public:
    Vector() = default;
    explicit Vector(std::size_t length, double fill = 0.0) : data_(length, fill) {}
    Vector(std::initializer_list<double> values) : data_(values) {}
    explicit Vector(std::vector<double> values) : data_(std::move(values)) {}

    std::size_t size() const noexcept { return data_.size(); }
    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    void set_zero() noexcept;

    friend bool operator==(const Vector&, const Vector&) = default;

private:
    std::vector<double> data_;
};

/// Row-major dense matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    /// Builds from nested rows; all rows must have equal length.
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    void set_zero() noexcept;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

std::string shape_string(const Matrix& m);

/// W·x + b. Throws std::invalid_argument naming both shapes on mismatch.
Vector affine(const Matrix& W, const Vector& x, const Vector& b);

Vector tanh_map(const Vector& x);
Vector sigmoid_map(const Vector& x);

/// Numerically safe softmax (max-subtracted).
Vector softmax(const Vector& x);

double l2_norm(std::span<const double> x);
inline double l2_norm(const Vector& x) { return l2_norm(x.values()); }

double sigmoid(double x) noexcept;

// Unchecked kernels used by the model hot loops. Sizes are the caller's job.
namespace kernels {

/// out += W · x
void gemv_acc(const Matrix& W, const double* x, double* out) noexcept;
/// out += W[:, col_offset : col_offset + len(x)] · x
void gemv_acc_block(const Matrix& W, std::size_t col_offset, std::size_t len, const double* x,
                    double* out) noexcept;
/// out += Wᵀ · delta
void gemv_t_acc(const Matrix& W, const double* delta, double* out) noexcept;
/// out += W[:, col_offset : col_offset + len]ᵀ · delta
void gemv_t_acc_block(const Matrix& W, std::size_t col_offset, std::size_t len, const double* delta,
                      double* out) noexcept;
/// G += delta · xᵀ, written into columns [col_offset, col_offset + len) of G.
void outer_acc(Matrix& G, std::size_t col_offset, const double* delta, const double* x,
               std::size_t len) noexcept;
/// out += in
void add(std::span<double> out, std::span<const double> in) noexcept;

}  // namespace kernels

/// Deterministic pseudo-random source.
///
/// Engine: std::mt19937_64, whose output sequence is fixed by the C++ standard.
/// Distributions are implemented here rather than with <random>'s distribution
/// classes, whose algorithms are implementation-defined, so a seed reproduces
/// the same draws on every conforming toolchain:
///   - uniform_real(lo, hi): lo + (hi - lo) * (u >> 11) * 2^-53
///   - uniform_int(lo, hi):  rejection sampling on the top bits (no modulo bias)
/// Child seeds come from SplitMix64 over (seed, stream).
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform on [0, 1).
    double uniform01();
    /// Uniform on [lo, hi).
    double uniform_real(double lo, double hi);
    /// Uniform on the closed range [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    /// Fisher-Yates shuffle driven by uniform_int.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

/// SplitMix64 finalizer mixing a parent seed with a stream index.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// rows×cols matrix with i.i.d. entries uniform on [lo, hi). Throws if lo >= hi.
Matrix uniform_init(std::size_t rows, std::size_t cols, double lo, double hi, SeededRng& rng);

using ScalarFunction = std::function<double(const Vector&)>;

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
/// Throws std::domain_error if f returns a non-finite value.
Vector finite_diff_grad(const ScalarFunction& f, const Vector& x, double h);

/// Shortest decimal text that parses back to exactly v ("nan", "inf" for non-finite).
std::string format_double(double v);
/// Parses the whole string as a double; std::nullopt on any leftover text.
std::optional<double> parse_double(std::string_view text);

}  // namespace treegrad
