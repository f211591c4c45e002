#include "actsteer/extract.hpp"

#include <algorithm>
#include <cmath>

#include "actsteer/error.hpp"
#include "actsteer/hash.hpp"
#include "actsteer/kernels.hpp"
#include "actsteer/parallel.hpp"

namespace actsteer::extract {

bool DirectionField::any_degenerate() const noexcept {
    return std::any_of(degenerate.begin(), degenerate.end(), [](std::uint8_t d) { return d != 0; });
}

bool DirectionField::all_degenerate() const noexcept {
    return !degenerate.empty() && std::all_of(degenerate.begin(), degenerate.end(), [](std::uint8_t d) { return d != 0; });
}

std::uint64_t DirectionField::fingerprint() const {
    Fnv1a h;
    const auto put = [&h](std::uint64_t v) {
        std::uint8_t raw[8];
        for (int i = 0; i < 8; ++i) raw[i] = static_cast<std::uint8_t>(v >> (8 * i));
        h.update(raw);
    };
    put(token_count);
    put(hidden_dim);
    for (auto l : cells.layers) put(l);
    put(~0ULL);
    for (auto s : cells.steps) put(s);
    for (const auto& c : cells.cells) h.update(c.values());
    return h.digest();
}

CaptureSet capture(const model::Model& model, const corpus::ReferenceSet& refs, const std::vector<std::size_t>& layers,
                   const std::vector<std::size_t>& steps, std::size_t threads) {
    const auto& cfg = model.config();
    validate_index_list(layers, cfg.num_layers, "layer");
    validate_index_list(steps, cfg.num_steps, "step");
    const auto sites = model::grid_sites(layers, steps);

    std::vector<model::CaptureMap> per_sample(refs.size());
    parallel_for(
        refs.size(),
        [&](std::size_t i) { per_sample[i] = *model::generate(model, refs.requests[i], {}, sites).captured; },
        threads);

    CaptureSet out;
    out.cells = Grid<std::vector<TokenSequence>>(layers, steps);
    for (std::size_t c = 0; c < sites.size(); ++c) {
        auto& cell = out.cells.cells[c];
        cell.reserve(refs.size());
        for (auto& sample : per_sample) cell.push_back(std::move(sample.at(sites[c])));
    }
    for (const auto& req : refs.requests) out.lengths.push_back(req.total_length());
    return out;
}

std::size_t average_length(const CaptureSet& neutral, const CaptureSet& attribute) {
    const std::size_t count = neutral.sample_count() + attribute.sample_count();
    if (count == 0) throw Error(ErrorCode::invalid_argument, "no captured samples");
    std::size_t total = 0;
    for (auto l : neutral.lengths) total += l;
    for (auto l : attribute.lengths) total += l;
    // Default rounding mode is to-nearest, ties to even.
    return static_cast<std::size_t>(std::nearbyint(static_cast<double>(total) / static_cast<double>(count)));
}

namespace {

// Sum of every tensor in the cell after resampling to `length`.
std::vector<double> resampled_sum(const std::vector<TokenSequence>& tensors, std::size_t length) {
    std::vector<double> sum;
    for (const auto& t : tensors) {
        const auto r = resample_sequence(t, length);
        if (sum.empty()) sum.assign(r.size(), 0.0);
        kernels::axpy(1.0, r.values(), sum);
    }
    return sum;
}

}  // namespace

DirectionField difference_in_means(const CaptureSet& neutral, const CaptureSet& attribute, StepMode mode) {
    if (!neutral.cells.same_grid(attribute.cells)) {
        throw Error(ErrorCode::grid_mismatch, "neutral and attribute captures use different (layer, step) grids");
    }
    if (neutral.sample_count() == 0 || attribute.sample_count() == 0) {
        throw Error(ErrorCode::invalid_argument, "difference_in_means needs at least one sample per set");
    }
    const std::size_t token_count = average_length(neutral, attribute);
    const double inv_m = 1.0 / static_cast<double>(neutral.sample_count());
    const double inv_n = 1.0 / static_cast<double>(attribute.sample_count());

    DirectionField field;
    field.cells = Grid<TokenSequence>(neutral.cells.layers, neutral.cells.steps);
    field.degenerate.assign(field.cells.size(), 0);
    field.token_count = token_count;
    field.step_mode = mode;

    std::vector<std::vector<double>> raw(field.cells.size());
    for (std::size_t c = 0; c < raw.size(); ++c) {
        const auto& a = neutral.cells.cells[c];
        const auto& b = attribute.cells.cells[c];
        if (a.size() != neutral.sample_count() || b.size() != attribute.sample_count()) {
            throw Error(ErrorCode::shape_mismatch, "capture cell does not hold one tensor per sample");
        }
        const std::size_t hidden = a.front().hidden_dim();
        if (field.hidden_dim == 0) field.hidden_dim = hidden;
        if (hidden != field.hidden_dim || b.front().hidden_dim() != hidden) {
            throw Error(ErrorCode::shape_mismatch, "captured tensors disagree on hidden_dim");
        }
        // Both means are formed before the subtraction so swapping the sets
        // negates u exactly.
        auto mean_a = resampled_sum(a, token_count);
        kernels::scale(inv_m, mean_a);
        raw[c] = resampled_sum(b, token_count);
        kernels::scale(inv_n, raw[c]);
        kernels::axpy(-1.0, mean_a, raw[c]);
    }

    if (mode == StepMode::collapsed && !field.cells.steps.empty()) {
        const std::size_t num_steps = field.cells.steps.size();
        for (std::size_t l = 0; l < field.cells.layers.size(); ++l) {
            std::vector<double> mean(raw[l * num_steps].size(), 0.0);
            for (std::size_t s = 0; s < num_steps; ++s) kernels::axpy(1.0, raw[l * num_steps + s], mean);
            kernels::scale(1.0 / static_cast<double>(num_steps), mean);
            for (std::size_t s = 0; s < num_steps; ++s) raw[l * num_steps + s] = mean;
        }
    }

    for (std::size_t c = 0; c < raw.size(); ++c) {
        const double norm = l2_norm(raw[c]);
        if (norm < kDegenerateNorm) {
            field.degenerate[c] = 1;
            raw[c].assign(raw[c].size(), 0.0);
        } else {
            kernels::scale(1.0 / norm, raw[c]);
        }
        field.cells.cells[c] = TokenSequence(token_count, field.hidden_dim, std::move(raw[c]));
    }
    return field;
}

DirectionField restrict(const DirectionField& field, const std::vector<std::size_t>& layers,
                        const std::vector<std::size_t>& steps) {
    DirectionField out = field;
    out.cells = Grid<TokenSequence>(layers, steps);
    out.degenerate.assign(out.cells.size(), 0);
    std::size_t c = 0;
    for (auto l : layers) {
        for (auto s : steps) {
            const std::size_t from = field.cells.offset(l, s);
            out.cells.cells[c] = field.cells.cells[from];
            out.degenerate[c] = field.degenerate[from];
            ++c;
        }
    }
    return out;
}

}  // namespace actsteer::extract
