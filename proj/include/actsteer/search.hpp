#pragma once

// Stage 2: rank the token rows of a direction field by how strongly each one,
// injected at every field site at once, pushes the oracle toward the target
// attribute; then fold the top-k rows into one steering vector per cell.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "actsteer/extract.hpp"
#include "actsteer/grid.hpp"
#include "actsteer/model.hpp"
#include "actsteer/oracle.hpp"

namespace actsteer::search {

struct SearchConfig {
    std::size_t k = 200;
    // Held-out request every probe runs on; its noise_seed is shared by all
    // probes so they differ only in the probed token.
    model::GenerationRequest probe_request;
    std::string attribute_id;
    std::size_t threads = 0;  // 0 = all cores
};

struct ProbeReport {
    std::vector<double> probabilities;     // one per token index
    std::vector<std::size_t> top_indices;  // k entries, best first
    std::vector<double> weights;           // softmax of the top-k probabilities, aligned with top_indices
    std::string attribute_id;
};

struct Provenance {
    std::uint64_t field_fingerprint = 0;
    std::uint64_t probe_noise_seed = 0;
    std::size_t k = 0;
};

struct SteeringVectorSet {
    Grid<std::vector<double>> vectors;  // s_hat per cell, not unit-normalized
    Grid<TokenSequence> masked_field;   // field rows outside top_indices zeroed; empty after a load
    ProbeReport report;                 // empty after a load except attribute_id
    std::string attribute_id;
    std::size_t hidden_dim = 0;
    std::size_t token_count = 0;
    std::size_t k = 0;
    Provenance provenance;

    const std::vector<std::size_t>& layers() const noexcept { return vectors.layers; }
    const std::vector<std::size_t>& steps() const noexcept { return vectors.steps; }
    const std::vector<double>& at(std::size_t layer, std::size_t step) const { return vectors.at(layer, step); }
};

// Hooks that add row token_index of the matching field cell to every row of
// the reference prefix and renormalize, at every site of the field grid.
std::vector<model::Hook> probe_hooks(const extract::DirectionField& field, std::size_t token_index);

// One generation, one oracle call.
double probe_token(const model::Model& model, const extract::DirectionField& field, std::size_t token_index,
                   const SearchConfig& config, const oracle::Oracle& oracle);

// Builds top_indices and weights from a full probability list.
ProbeReport rank_probabilities(std::vector<double> probabilities, std::size_t k, std::string attribute_id);

// Probes every token index once: exactly token_count generations.
ProbeReport run_search(const model::Model& model, const extract::DirectionField& field, const SearchConfig& config,
                       const oracle::Oracle& oracle);

SteeringVectorSet build_steering_vectors(const extract::DirectionField& field, const ProbeReport& report,
                                         std::uint64_t probe_noise_seed = 0);

}  // namespace actsteer::search
