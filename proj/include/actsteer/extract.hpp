#pragma once

// Stage 1: capture unsteered activations for the two reference sets and
// reduce them to a unit difference-in-means direction per (layer, step).

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "actsteer/corpus.hpp"
#include "actsteer/grid.hpp"
#include "actsteer/model.hpp"
#include "actsteer/tensor.hpp"

namespace actsteer::extract {

struct CaptureSet {
    Grid<std::vector<TokenSequence>> cells;  // one tensor per sample in every cell
    std::vector<std::size_t> lengths;        // captured sequence length per sample

    std::size_t sample_count() const noexcept { return lengths.size(); }
};

// per_step keeps one direction per (layer, step). collapsed averages the raw
// differences over steps, normalizes once per layer and repeats the result
// in every step cell.
enum class StepMode { per_step, collapsed };

enum class NormMode { unit };

struct DirectionField {
    Grid<TokenSequence> cells;             // each [token_count, hidden_dim]
    std::vector<std::uint8_t> degenerate;  // per cell, layer-major; 1 = zero direction
    std::size_t token_count = 0;
    std::size_t hidden_dim = 0;
    std::string attribute_id;
    StepMode step_mode = StepMode::per_step;
    NormMode norm_mode = NormMode::unit;

    const std::vector<std::size_t>& layers() const noexcept { return cells.layers; }
    const std::vector<std::size_t>& steps() const noexcept { return cells.steps; }
    const TokenSequence& at(std::size_t layer, std::size_t step) const { return cells.at(layer, step); }

    bool any_degenerate() const noexcept;
    bool all_degenerate() const noexcept;

    // Digest of grid, shape and values; used as provenance by later stages.
    std::uint64_t fingerprint() const;
};

// Pre-normalization norms below this make a cell degenerate.
inline constexpr double kDegenerateNorm = 1e-12;

// Runs one hook-free generation per sample, capturing every (layer, step)
// site. Samples run on up to `threads` workers (0 = all cores); the result
// does not depend on the thread count.
CaptureSet capture(const model::Model& model, const corpus::ReferenceSet& refs, const std::vector<std::size_t>& layers,
                   const std::vector<std::size_t>& steps, std::size_t threads = 0);

// round-half-to-even of the mean of all lengths in both sets.
std::size_t average_length(const CaptureSet& neutral, const CaptureSet& attribute);

// Every tensor is resampled to average_length() before the means are taken;
// u = mean(attribute) - mean(neutral), divided by its norm.
DirectionField difference_in_means(const CaptureSet& neutral, const CaptureSet& attribute,
                                   StepMode mode = StepMode::per_step);

// The cells of `field` on a sub-grid; throws ErrorCode::grid_mismatch when a
// requested (layer, step) is missing.
DirectionField restrict(const DirectionField& field, const std::vector<std::size_t>& layers,
                        const std::vector<std::size_t>& steps);

}  // namespace actsteer::extract
