#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rhythm/error.hpp"

namespace rhythm {

/// Dense row-major N x N matrix of doubles. Attention maps are stored this way;
/// entry (t, s) is the weight query position t places on key position s.
class SquareMatrix {
public:
    SquareMatrix() = default;
    explicit SquareMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

    SquareMatrix(std::size_t n, std::vector<double> data) : n_(n), data_(std::move(data)) {
        if (data_.size() != n_ * n_) {
            throw Error("dimension-mismatch", "matrix data does not hold n*n values");
        }
    }

    std::size_t size() const noexcept { return n_; }

    double& operator()(std::size_t t, std::size_t s) noexcept { return data_[t * n_ + s]; }
    double operator()(std::size_t t, std::size_t s) const noexcept { return data_[t * n_ + s]; }

    std::span<double> row(std::size_t t) noexcept { return {data_.data() + t * n_, n_}; }
    std::span<const double> row(std::size_t t) const noexcept { return {data_.data() + t * n_, n_}; }

    std::span<const double> values() const noexcept { return data_; }
    std::span<double> values() noexcept { return data_; }

    friend bool operator==(const SquareMatrix&, const SquareMatrix&) = default;

private:
    std::size_t n_ = 0;
    std::vector<double> data_;
};

/// Half-open interval [begin, end) of token positions.
struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end > begin ? end - begin : 0; }
    bool empty() const noexcept { return end <= begin; }
    bool contains(std::size_t i) const noexcept { return i >= begin && i < end; }

    friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

inline void require_range_within(const IndexRange& r, std::size_t n) {
    if (r.empty()) {
        throw Error("empty-response-range", "response range is empty");
    }
    if (r.end > n) {
        throw Error("dimension-mismatch", "response range exceeds sequence length");
    }
}

} // namespace rhythm
