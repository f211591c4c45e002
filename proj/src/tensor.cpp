#include "actsteer/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "actsteer/error.hpp"
#include "actsteer/kernels.hpp"

namespace actsteer {

namespace {

void require_non_empty(const TokenSequence& seq, const char* what) {
    if (seq.empty()) throw Error(ErrorCode::invalid_argument, std::string(what) + ": empty token sequence");
}

}  // namespace

TokenSequence::TokenSequence(std::size_t length, std::size_t hidden_dim, double fill)
    : length_(length), hidden_(hidden_dim), values_(length * hidden_dim, fill) {
    if (length == 0 || hidden_dim == 0) {
        throw Error(ErrorCode::invalid_argument, "token sequence needs length >= 1 and hidden_dim >= 1");
    }
}

TokenSequence::TokenSequence(std::size_t length, std::size_t hidden_dim, std::vector<double> values)
    : length_(length), hidden_(hidden_dim), values_(std::move(values)) {
    if (length == 0 || hidden_dim == 0) {
        throw Error(ErrorCode::invalid_argument, "token sequence needs length >= 1 and hidden_dim >= 1");
    }
    if (values_.size() != length * hidden_dim) {
        throw Error(ErrorCode::shape_mismatch, "token sequence value count does not match its shape");
    }
}

TokenSequence TokenSequence::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    if (rows.size() == 0) throw Error(ErrorCode::invalid_argument, "from_rows: no rows");
    const std::size_t hidden = rows.begin()->size();
    std::vector<double> values;
    values.reserve(rows.size() * hidden);
    for (const auto& r : rows) {
        if (r.size() != hidden) throw Error(ErrorCode::shape_mismatch, "from_rows: ragged rows");
        values.insert(values.end(), r.begin(), r.end());
    }
    return TokenSequence(rows.size(), hidden, std::move(values));
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

std::vector<double> Matrix::apply(std::span<const double> x) const {
    std::vector<double> y(rows_);
    apply_into(x, y);
    return y;
}

void Matrix::apply_into(std::span<const double> x, std::span<double> y) const {
    if (x.size() != cols_ || y.size() != rows_) throw Error(ErrorCode::shape_mismatch, "matrix apply: shape mismatch");
    kernels::gemv(values_, x, y);
}

void require_finite(const TokenSequence& seq) {
    for (double v : seq.values()) {
        if (!std::isfinite(v)) throw Error(ErrorCode::non_finite, "non-finite activation");
    }
}

double l2_norm(std::span<const double> v) {
    const double ss = kernels::sum_squares(v);
    if (!std::isfinite(ss)) throw Error(ErrorCode::non_finite, "non-finite activation");
    return std::sqrt(ss);
}

double l2_norm(const TokenSequence& seq) {
    require_non_empty(seq, "l2_norm");
    return l2_norm(seq.values());
}

TokenSequence renorm_preserve(const TokenSequence& original, TokenSequence modified, double epsilon) {
    if (!original.same_shape(modified)) {
        throw Error(ErrorCode::shape_mismatch, "renorm_preserve: shape mismatch");
    }
    const double target = l2_norm(original);
    const double current = l2_norm(modified);
    kernels::scale(target / std::max(current, epsilon), modified.values());
    return modified;
}

std::vector<double> unit_normalized(std::span<const double> v, double epsilon) {
    std::vector<double> out(v.begin(), v.end());
    kernels::scale(1.0 / std::max(l2_norm(v), epsilon), out);
    return out;
}

std::vector<double> softmax(std::span<const double> values) {
    if (values.empty()) throw Error(ErrorCode::invalid_argument, "softmax: empty input");
    for (double v : values) {
        if (!std::isfinite(v)) throw Error(ErrorCode::non_finite, "softmax: non-finite input");
    }
    const double peak = *std::max_element(values.begin(), values.end());
    std::vector<double> out(values.size());
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = std::exp(values[i] - peak);
        total += out[i];
    }
    for (double& v : out) v /= total;
    return out;
}

TokenSequence resample_sequence(const TokenSequence& seq, std::size_t target_len) {
    require_non_empty(seq, "resample_sequence");
    if (target_len == 0) throw Error(ErrorCode::invalid_argument, "resample_sequence: target_len must be >= 1");
    const std::size_t in_len = seq.length();
    const std::size_t hidden = seq.hidden_dim();
    if (in_len == target_len) return seq;

    if (target_len == 1) {
        TokenSequence out(1, hidden);
        const auto mean = mean_token(seq);
        std::copy(mean.begin(), mean.end(), out.row(0).begin());
        return out;
    }

    TokenSequence out(target_len, hidden);
    const double stride = static_cast<double>(in_len - 1) / static_cast<double>(target_len - 1);
    for (std::size_t i = 0; i < target_len; ++i) {
        const double pos = static_cast<double>(i) * stride;
        std::size_t lo = static_cast<std::size_t>(std::floor(pos));
        if (lo >= in_len - 1) lo = in_len - 1;
        const std::size_t hi = std::min(lo + 1, in_len - 1);
        const double frac = pos - static_cast<double>(lo);
        const auto a = seq.row(lo);
        const auto b = seq.row(hi);
        auto dst = out.row(i);
        // a + f (b - a) reproduces a exactly when a == b.
        for (std::size_t h = 0; h < hidden; ++h) dst[h] = a[h] + frac * (b[h] - a[h]);
    }
    return out;
}

std::vector<std::size_t> top_k_indices(std::span<const double> values, std::size_t k) {
    if (k == 0) throw Error(ErrorCode::invalid_argument, "top_k_indices: k must be >= 1");
    if (k > values.size()) {
        throw Error(ErrorCode::invalid_argument, "top_k_indices: k = " + std::to_string(k) +
                                                     " exceeds value count " + std::to_string(values.size()));
    }
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    order.resize(k);
    return order;
}

std::vector<double> mean_token(const TokenSequence& seq, std::size_t begin, std::size_t end) {
    if (begin >= end || end > seq.length()) throw Error(ErrorCode::invalid_argument, "mean_token: bad row range");
    std::vector<double> acc(seq.hidden_dim(), 0.0);
    for (std::size_t t = begin; t < end; ++t) kernels::axpy(1.0, seq.row(t), acc);
    kernels::scale(1.0 / static_cast<double>(end - begin), acc);
    return acc;
}

std::vector<double> mean_token(const TokenSequence& seq) {
    require_non_empty(seq, "mean_token");
    return mean_token(seq, 0, seq.length());
}

}  // namespace actsteer
