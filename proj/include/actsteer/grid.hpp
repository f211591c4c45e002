#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "actsteer/error.hpp"

namespace actsteer {

// One value per (layer, step) pair, stored layer-major. Layer and step lists
// keep the order they were given in; lookups are by index value.
template <typename T>
struct Grid {
    std::vector<std::size_t> layers;
    std::vector<std::size_t> steps;
    std::vector<T> cells;

    Grid() = default;
    Grid(std::vector<std::size_t> l, std::vector<std::size_t> s, const T& fill = T{})
        : layers(std::move(l)), steps(std::move(s)), cells(layers.size() * steps.size(), fill) {}

    std::size_t size() const noexcept { return cells.size(); }
    bool empty() const noexcept { return cells.empty(); }

    bool contains(std::size_t layer, std::size_t step) const noexcept {
        return std::find(layers.begin(), layers.end(), layer) != layers.end() &&
               std::find(steps.begin(), steps.end(), step) != steps.end();
    }

    std::size_t offset(std::size_t layer, std::size_t step) const {
        const auto li = std::find(layers.begin(), layers.end(), layer);
        const auto si = std::find(steps.begin(), steps.end(), step);
        if (li == layers.end() || si == steps.end()) {
            throw Error(ErrorCode::grid_mismatch,
                        "no cell for layer " + std::to_string(layer) + ", step " + std::to_string(step));
        }
        return static_cast<std::size_t>(li - layers.begin()) * steps.size() +
               static_cast<std::size_t>(si - steps.begin());
    }

    T& at(std::size_t layer, std::size_t step) { return cells[offset(layer, step)]; }
    const T& at(std::size_t layer, std::size_t step) const { return cells[offset(layer, step)]; }

    template <typename U>
    bool same_grid(const Grid<U>& other) const noexcept {
        return layers == other.layers && steps == other.steps;
    }

    bool operator==(const Grid&) const = default;
};

// Rejects out-of-range or repeated indices.
inline void validate_index_list(const std::vector<std::size_t>& indices, std::size_t bound, const char* what) {
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= bound) {
            throw Error(ErrorCode::invalid_argument, std::string(what) + " index " + std::to_string(indices[i]) +
                                                         " out of range [0, " + std::to_string(bound) + ")");
        }
        if (std::find(indices.begin(), indices.begin() + static_cast<std::ptrdiff_t>(i), indices[i]) !=
            indices.begin() + static_cast<std::ptrdiff_t>(i)) {
            throw Error(ErrorCode::invalid_argument, std::string(what) + " index " + std::to_string(indices[i]) +
                                                         " listed twice");
        }
    }
}

}  // namespace actsteer
