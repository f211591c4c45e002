#include "actsteer/search.hpp"

#include <algorithm>

#include "actsteer/error.hpp"
#include "actsteer/kernels.hpp"
#include "actsteer/parallel.hpp"

namespace actsteer::search {

namespace {

void check_request(const SearchConfig& config, const oracle::Oracle& oracle) {
    if (config.probe_request.condition_dropped) {
        throw Error(ErrorCode::invalid_argument, "probe request must not drop the condition");
    }
    if (!oracle.supports(config.attribute_id)) {
        throw Error(ErrorCode::unknown_attribute, "oracle does not score '" + config.attribute_id + "'");
    }
}

}  // namespace

std::vector<model::Hook> probe_hooks(const extract::DirectionField& field, std::size_t token_index) {
    if (token_index >= field.token_count) {
        throw Error(ErrorCode::invalid_argument, "probe token index " + std::to_string(token_index) +
                                                     " out of range [0, " + std::to_string(field.token_count) + ")");
    }
    model::Hook hook;
    hook.matches = [&field](const model::HookSite& site) {
        return field.cells.contains(site.layer_index, site.step_index);
    };
    hook.transform = [&field, token_index](const TokenSequence& x, const model::HookContext& ctx) {
        const auto row = field.at(ctx.site.layer_index, ctx.site.step_index).row(token_index);
        TokenSequence probed = x;
        const std::size_t region = std::min(ctx.reference_len, x.length());
        for (std::size_t t = 0; t < region; ++t) kernels::axpy(1.0, row, probed.row(t));
        return renorm_preserve(x, std::move(probed));
    };
    return {std::move(hook)};
}

double probe_token(const model::Model& model, const extract::DirectionField& field, std::size_t token_index,
                   const SearchConfig& config, const oracle::Oracle& oracle) {
    check_request(config, oracle);
    const auto hooks = probe_hooks(field, token_index);
    return oracle.score(model::generate(model, config.probe_request, hooks).output).at(config.attribute_id);
}

ProbeReport rank_probabilities(std::vector<double> probabilities, std::size_t k, std::string attribute_id) {
    ProbeReport report;
    report.top_indices = top_k_indices(probabilities, k);
    std::vector<double> top;
    top.reserve(k);
    for (auto i : report.top_indices) top.push_back(probabilities[i]);
    report.weights = softmax(top);
    report.probabilities = std::move(probabilities);
    report.attribute_id = std::move(attribute_id);
    return report;
}

ProbeReport run_search(const model::Model& model, const extract::DirectionField& field, const SearchConfig& config,
                       const oracle::Oracle& oracle) {
    check_request(config, oracle);
    if (config.k == 0 || config.k > field.token_count) {
        throw Error(ErrorCode::invalid_argument, "k = " + std::to_string(config.k) + " must lie in [1, " +
                                                     std::to_string(field.token_count) + "]");
    }
    if (field.hidden_dim != model.config().hidden_dim) {
        throw Error(ErrorCode::shape_mismatch, "direction field width does not match the model");
    }
    std::vector<double> probabilities(field.token_count);
    parallel_for(
        field.token_count,
        [&](std::size_t i) {
            const auto hooks = probe_hooks(field, i);
            probabilities[i] =
                oracle.score(model::generate(model, config.probe_request, hooks).output).at(config.attribute_id);
        },
        config.threads);
    return rank_probabilities(std::move(probabilities), config.k, config.attribute_id);
}

SteeringVectorSet build_steering_vectors(const extract::DirectionField& field, const ProbeReport& report,
                                         std::uint64_t probe_noise_seed) {
    if (report.top_indices.empty() || report.top_indices.size() != report.weights.size()) {
        throw Error(ErrorCode::invalid_argument, "probe report needs one weight per top index");
    }
    if (!report.probabilities.empty() && report.probabilities.size() != field.token_count) {
        throw Error(ErrorCode::shape_mismatch, "probe report covers " + std::to_string(report.probabilities.size()) +
                                                   " tokens, field has " + std::to_string(field.token_count));
    }
    for (auto i : report.top_indices) {
        if (i >= field.token_count) throw Error(ErrorCode::invalid_argument, "probe report index out of range");
    }
    std::vector<std::uint8_t> keep(field.token_count, 0);
    for (auto i : report.top_indices) keep[i] = 1;

    SteeringVectorSet set;
    set.vectors = Grid<std::vector<double>>(field.cells.layers, field.cells.steps);
    set.masked_field = Grid<TokenSequence>(field.cells.layers, field.cells.steps);
    for (std::size_t c = 0; c < field.cells.size(); ++c) {
        TokenSequence masked = field.cells.cells[c];
        for (std::size_t t = 0; t < masked.length(); ++t) {
            if (!keep[t]) std::fill(masked.row(t).begin(), masked.row(t).end(), 0.0);
        }
        std::vector<double> s_hat(field.hidden_dim, 0.0);
        for (std::size_t j = 0; j < report.top_indices.size(); ++j) {
            kernels::axpy(report.weights[j], masked.row(report.top_indices[j]), s_hat);
        }
        set.vectors.cells[c] = std::move(s_hat);
        set.masked_field.cells[c] = std::move(masked);
    }
    set.report = report;
    set.attribute_id = report.attribute_id.empty() ? field.attribute_id : report.attribute_id;
    set.hidden_dim = field.hidden_dim;
    set.token_count = field.token_count;
    set.k = report.top_indices.size();
    set.provenance = {field.fingerprint(), probe_noise_seed, set.k};
    return set;
}

}  // namespace actsteer::search
