#include "actsteer/steer.hpp"

#include <algorithm>
#include <cmath>

#include "actsteer/error.hpp"
#include "actsteer/hash.hpp"
#include "actsteer/kernels.hpp"

namespace actsteer::steer {

namespace {

void check_region(const TokenSequence& x, std::size_t width, std::size_t region_len) {
    if (x.empty()) throw Error(ErrorCode::shape_mismatch, "steering needs a non-empty activation");
    if (width != x.hidden_dim()) {
        throw Error(ErrorCode::shape_mismatch, "steering vector width " + std::to_string(width) +
                                                   " does not match activation width " +
                                                   std::to_string(x.hidden_dim()));
    }
    if (region_len == 0 || region_len > x.length()) {
        throw Error(ErrorCode::shape_mismatch, "region_len must lie in [1, " + std::to_string(x.length()) + "]");
    }
}

void add_to_region(TokenSequence& x, std::span<const double> direction, double strength, std::size_t region_len) {
    for (std::size_t t = 0; t < region_len; ++t) kernels::axpy(strength, direction, x.row(t));
}

void erase_region(TokenSequence& x, std::span<const double> unit, double beta, std::size_t region_len) {
    for (std::size_t t = 0; t < region_len; ++t) {
        auto row = x.row(t);
        const double projection = kernels::dot(unit, row);
        kernels::axpy(-beta * projection, unit, row);
    }
}

}  // namespace

TokenSequence convert_unnormalized(const TokenSequence& x, std::span<const double> s_hat, double alpha,
                                   std::size_t region_len, double epsilon) {
    check_region(x, s_hat.size(), region_len);
    TokenSequence out = x;
    add_to_region(out, unit_normalized(s_hat, epsilon), alpha, region_len);
    return out;
}

TokenSequence erase_unnormalized(const TokenSequence& x, std::span<const double> s_hat, double beta,
                                 std::size_t region_len, double epsilon) {
    check_region(x, s_hat.size(), region_len);
    TokenSequence out = x;
    erase_region(out, unit_normalized(s_hat, epsilon), beta, region_len);
    return out;
}

TokenSequence replace_unnormalized(const TokenSequence& x, std::span<const double> s_hat_1,
                                   std::span<const double> s_hat_2, double beta, double alpha, std::size_t region_len,
                                   double epsilon) {
    check_region(x, s_hat_1.size(), region_len);
    check_region(x, s_hat_2.size(), region_len);
    TokenSequence out = x;
    erase_region(out, unit_normalized(s_hat_1, epsilon), beta, region_len);
    add_to_region(out, unit_normalized(s_hat_2, epsilon), alpha, region_len);
    return out;
}

TokenSequence multi_unnormalized(const TokenSequence& x, std::span<const Term> terms, std::size_t region_len,
                                 double epsilon) {
    if (terms.empty()) throw Error(ErrorCode::invalid_argument, "multi steering needs at least one term");
    for (const auto& [s_hat, strength] : terms) check_region(x, s_hat.size(), region_len);
    // Sum the shifts first so the edit is one addition per row.
    std::vector<double> shift(x.hidden_dim(), 0.0);
    for (const auto& [s_hat, strength] : terms) kernels::axpy(strength, unit_normalized(s_hat, epsilon), shift);
    TokenSequence out = x;
    add_to_region(out, shift, 1.0, region_len);
    return out;
}

TokenSequence apply_convert(const TokenSequence& x, std::span<const double> s_hat, double alpha,
                            std::size_t region_len, double epsilon) {
    return renorm_preserve(x, convert_unnormalized(x, s_hat, alpha, region_len, epsilon), epsilon);
}

TokenSequence apply_erase(const TokenSequence& x, std::span<const double> s_hat, double beta, std::size_t region_len,
                          double epsilon) {
    return renorm_preserve(x, erase_unnormalized(x, s_hat, beta, region_len, epsilon), epsilon);
}

TokenSequence apply_replace(const TokenSequence& x, std::span<const double> s_hat_1, std::span<const double> s_hat_2,
                            double beta, double alpha, std::size_t region_len, double epsilon) {
    return renorm_preserve(x, replace_unnormalized(x, s_hat_1, s_hat_2, beta, alpha, region_len, epsilon), epsilon);
}

TokenSequence apply_multi(const TokenSequence& x, std::span<const Term> terms, std::size_t region_len,
                          double epsilon) {
    return renorm_preserve(x, multi_unnormalized(x, terms, region_len, epsilon), epsilon);
}

bool annihilated(const TokenSequence& pre_renorm, double epsilon) { return l2_norm(pre_renorm) < epsilon; }

std::size_t mode_arity(Mode mode) noexcept {
    switch (mode) {
        case Mode::convert:
        case Mode::erase:
            return 1;
        case Mode::replace:
            return 2;
        case Mode::multi:
            return 0;
    }
    return 0;
}

std::vector<std::size_t> default_layers(std::size_t num_layers) {
    const auto stride = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(5.0 * static_cast<double>(num_layers) / 22.0)));
    std::vector<std::size_t> out;
    for (std::size_t l = 0; l < num_layers; l += stride) out.push_back(l);
    return out;
}

std::vector<std::size_t> all_steps(std::size_t num_steps) {
    std::vector<std::size_t> out(num_steps);
    for (std::size_t s = 0; s < num_steps; ++s) out[s] = s;
    return out;
}

void validate_plan(const model::ModelConfig& config, const SteeringPlan& plan,
                   std::span<const search::SteeringVectorSet> vectors) {
    const std::size_t arity = mode_arity(plan.mode);
    if (plan.strengths.size() != vectors.size()) {
        throw Error(ErrorCode::invalid_argument, "plan needs one strength per vector set");
    }
    if ((arity != 0 && vectors.size() != arity) || vectors.empty()) {
        throw Error(ErrorCode::invalid_argument, "mode " + mode_name(plan.mode) + " takes " +
                                                     (arity == 0 ? std::string("at least 1") : std::to_string(arity)) +
                                                     " vector set(s), got " + std::to_string(vectors.size()));
    }
    for (double s : plan.strengths) {
        if (!std::isfinite(s)) throw Error(ErrorCode::invalid_argument, "steering strengths must be finite");
    }
    if (!(plan.epsilon > 0.0)) throw Error(ErrorCode::invalid_argument, "epsilon must be positive");
    validate_index_list(plan.layers, config.num_layers, "layer");
    validate_index_list(plan.steps, config.num_steps, "step");
    for (const auto& set : vectors) {
        const bool width_ok = std::all_of(set.vectors.cells.begin(), set.vectors.cells.end(),
                                          [&](const auto& v) { return v.size() == config.hidden_dim; });
        if (set.hidden_dim != config.hidden_dim || !width_ok) {
            throw Error(ErrorCode::shape_mismatch, "steering vectors for '" + set.attribute_id +
                                                       "' do not match the model width");
        }
        for (auto l : plan.layers) {
            for (auto s : plan.steps) {
                if (!set.vectors.contains(l, s)) {
                    throw Error(ErrorCode::grid_mismatch, "plan/vector grid mismatch: '" + set.attribute_id +
                                                              "' has no cell for layer " + std::to_string(l) +
                                                              ", step " + std::to_string(s));
                }
            }
        }
    }
}

std::vector<model::Hook> plan_hooks(const SteeringPlan& plan, std::span<const search::SteeringVectorSet> vectors) {
    model::Hook hook;
    hook.matches = [&plan](const model::HookSite& site) {
        return std::find(plan.layers.begin(), plan.layers.end(), site.layer_index) != plan.layers.end() &&
               std::find(plan.steps.begin(), plan.steps.end(), site.step_index) != plan.steps.end();
    };
    hook.transform = [&plan, vectors](const TokenSequence& x, const model::HookContext& ctx) {
        const std::size_t region =
            plan.region == Region::full_sequence ? x.length() : std::min(ctx.reference_len, x.length());
        const auto cell = [&](std::size_t e) -> std::span<const double> {
            return vectors[e].at(ctx.site.layer_index, ctx.site.step_index);
        };
        switch (plan.mode) {
            case Mode::convert:
                return apply_convert(x, cell(0), plan.strengths[0], region, plan.epsilon);
            case Mode::erase:
                return apply_erase(x, cell(0), plan.strengths[0], region, plan.epsilon);
            case Mode::replace:
                return apply_replace(x, cell(0), cell(1), plan.strengths[0], plan.strengths[1], region, plan.epsilon);
            case Mode::multi:
                break;
        }
        std::vector<Term> terms;
        for (std::size_t e = 0; e < vectors.size(); ++e) terms.emplace_back(cell(e), plan.strengths[e]);
        return apply_multi(x, terms, region, plan.epsilon);
    };
    return {std::move(hook)};
}

SteeredOutput run_plan(const model::Model& model, const model::GenerationRequest& request, const SteeringPlan& plan,
                       std::span<const search::SteeringVectorSet> vectors) {
    validate_plan(model.config(), plan, vectors);
    SteeredOutput out;
    out.plan_echo = plan;
    out.baseline = model::generate(model, request).output;
    out.baseline_hash = fnv1a(out.baseline.values());
    const auto hooks = plan_hooks(out.plan_echo, vectors);
    out.result = model::generate(model, request, hooks);
    return out;
}

std::string mode_name(Mode mode) {
    switch (mode) {
        case Mode::convert:
            return "convert";
        case Mode::erase:
            return "erase";
        case Mode::replace:
            return "replace";
        case Mode::multi:
            return "multi";
    }
    return "?";
}

Mode parse_mode(const std::string& name) {
    for (Mode m : {Mode::convert, Mode::erase, Mode::replace, Mode::multi}) {
        if (mode_name(m) == name) return m;
    }
    throw Error(ErrorCode::config, "unknown steering mode '" + name + "' (convert, erase, replace, multi)");
}

}  // namespace actsteer::steer
