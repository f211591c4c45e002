#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace actsteer {

// Norm guard used by every renormalization and unit-normalization.
inline constexpr double kDefaultEpsilon = 1e-8;

// A [length, hidden_dim] block of activations, row-major, float64.
//
// A default-constructed sequence is empty (0 x 0) and only exists so the type
// can live in containers; every operation below rejects it.
class TokenSequence {
public:
    TokenSequence() = default;
    TokenSequence(std::size_t length, std::size_t hidden_dim, double fill = 0.0);
    TokenSequence(std::size_t length, std::size_t hidden_dim, std::vector<double> values);

    static TokenSequence from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t length() const noexcept { return length_; }
    std::size_t hidden_dim() const noexcept { return hidden_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    std::span<double> row(std::size_t t) noexcept { return {values_.data() + t * hidden_, hidden_}; }
    std::span<const double> row(std::size_t t) const noexcept {
        return {values_.data() + t * hidden_, hidden_};
    }

    double& operator()(std::size_t t, std::size_t h) noexcept { return values_[t * hidden_ + h]; }
    double operator()(std::size_t t, std::size_t h) const noexcept { return values_[t * hidden_ + h]; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    bool same_shape(const TokenSequence& other) const noexcept {
        return length_ == other.length_ && hidden_ == other.hidden_;
    }

    bool operator==(const TokenSequence& other) const = default;

private:
    std::size_t length_ = 0;
    std::size_t hidden_ = 0;
    std::vector<double> values_;
};

// Dense row-major [rows, cols] matrix for weights and Jacobians.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {values_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {values_.data() + r * cols_, cols_}; }
    std::span<const double> values() const noexcept { return values_; }

    // y = M x
    std::vector<double> apply(std::span<const double> x) const;
    void apply_into(std::span<const double> x, std::span<double> y) const;

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

// Throws ErrorCode::non_finite ("non-finite activation") when any entry is NaN/inf.
void require_finite(const TokenSequence& seq);

// Frobenius norm over every entry.
double l2_norm(const TokenSequence& seq);
double l2_norm(std::span<const double> v);

// modified * (|original| / max(|modified|, epsilon)).
//
// The max() guard keeps the scale exactly 1 when modified == original and
// maps an all-zero modification to zero.
TokenSequence renorm_preserve(const TokenSequence& original, TokenSequence modified,
                              double epsilon = kDefaultEpsilon);

// v / max(|v|, epsilon)
std::vector<double> unit_normalized(std::span<const double> v, double epsilon = kDefaultEpsilon);

std::vector<double> softmax(std::span<const double> values);

// Endpoint-aligned linear interpolation along the token axis. Output position
// i samples input position i * (L_in - 1) / (L_out - 1); a target length of 1
// yields the mean token.
TokenSequence resample_sequence(const TokenSequence& seq, std::size_t target_len);

// Indices of the k largest values, largest first; equal values keep the lower
// index first.
std::vector<std::size_t> top_k_indices(std::span<const double> values, std::size_t k);

// Mean token over rows [begin, end).
std::vector<double> mean_token(const TokenSequence& seq, std::size_t begin, std::size_t end);
std::vector<double> mean_token(const TokenSequence& seq);

}  // namespace actsteer
