#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "rhythm/error.hpp"

namespace rhythm {

/// Sorted, duplicate-free set of positions drawn from [0, universe_size).
class IndexSet {
public:
    IndexSet() = default;

    IndexSet(std::vector<std::size_t> indices, std::size_t universe_size)
        : indices_(std::move(indices)), universe_(universe_size) {
        std::sort(indices_.begin(), indices_.end());
        indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
        if (!indices_.empty() && indices_.back() >= universe_) {
            throw Error("index-out-of-range", "index set member outside its universe");
        }
    }

    const std::vector<std::size_t>& indices() const noexcept { return indices_; }
    std::size_t universe_size() const noexcept { return universe_; }
    std::size_t size() const noexcept { return indices_.size(); }
    bool empty() const noexcept { return indices_.empty(); }

    bool contains(std::size_t i) const {
        return std::binary_search(indices_.begin(), indices_.end(), i);
    }

    auto begin() const noexcept { return indices_.begin(); }
    auto end() const noexcept { return indices_.end(); }

    bool is_subset_of(const IndexSet& other) const {
        return std::includes(other.indices_.begin(), other.indices_.end(), indices_.begin(),
                             indices_.end());
    }

    std::size_t intersection_size(const IndexSet& other) const {
        std::size_t n = 0;
        auto a = indices_.begin();
        auto b = other.indices_.begin();
        while (a != indices_.end() && b != other.indices_.end()) {
            if (*a < *b) {
                ++a;
            } else if (*b < *a) {
                ++b;
            } else {
                ++n;
                ++a;
                ++b;
            }
        }
        return n;
    }

    friend bool operator==(const IndexSet&, const IndexSet&) = default;

private:
    std::vector<std::size_t> indices_;
    std::size_t universe_ = 0;
};

} // namespace rhythm
