#pragma once

// Hookable flow-matching generator.
//
// A Model is a stack of DiT-style blocks sampled by an Euler conditional
// flow-matching loop over a sequence made of a reference prefix followed by
// the generated region. Before every block, at every step, the block input
// (the first residual stream) is exposed as a hook site: it can be captured
// and then rewritten by registered transforms.
//
// Two constructions share this machinery:
//   * build_toy_model: seeded random pre-norm blocks, for structural tests.
//   * build_analytic_testbed: blocks whose output depends linearly on the
//     mean of the reference-prefix activations, so the effect of any edit at
//     a hook site can be predicted in closed form.

#include <atomic>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "actsteer/tensor.hpp"

namespace actsteer::model {

struct ModelConfig {
    std::size_t num_layers = 4;
    std::size_t hidden_dim = 16;
    std::size_t num_steps = 8;
    std::size_t max_seq_len = 64;
    std::uint64_t seed = 1234;

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

enum class Stream { first_residual };
enum class Phase { pre_forward };

struct HookSite {
    std::size_t layer_index = 0;
    std::size_t step_index = 0;
    Stream stream = Stream::first_residual;
    Phase phase = Phase::pre_forward;

    auto operator<=>(const HookSite&) const = default;
};

struct GenerationRequest {
    TokenSequence condition_tokens;  // content condition ("text")
    TokenSequence reference_tokens;  // conditioning prefix
    std::size_t reference_len = 0;   // prefix rows taken from reference_tokens
    std::size_t output_len = 0;
    std::uint64_t noise_seed = 0;
    double noise_scale = 1.0;
    bool condition_dropped = false;  // guidance branch: prefix zeroed, hooks bypassed

    std::size_t total_length() const noexcept { return reference_len + output_len; }
};

struct HookContext {
    HookSite site;
    std::size_t reference_len = 0;
    double time = 0.0;
};

using HookPredicate = std::function<bool(const HookSite&)>;
using HookTransform = std::function<TokenSequence(const TokenSequence&, const HookContext&)>;

struct Hook {
    HookPredicate matches;
    HookTransform transform;
};

using CaptureMap = std::map<HookSite, TokenSequence>;

struct GenerationResult {
    TokenSequence output;                // [output_len, hidden_dim]
    std::optional<CaptureMap> captured;  // present iff capture sites were requested
};

enum class ModelKind { toy, analytic };

class AnalyticTestbed;

class Model {
public:
    const ModelConfig& config() const noexcept;
    ModelKind kind() const noexcept;

    // nullptr unless built by build_analytic_testbed.
    const AnalyticTestbed* testbed() const noexcept;

    // Number of generate() calls made against this model (and its copies).
    std::uint64_t generation_count() const noexcept { return counter_->load(); }

    struct Impl;

private:
    friend Model build_toy_model(const ModelConfig&);
    friend Model build_analytic_testbed(const ModelConfig&, std::size_t);
    friend GenerationResult generate(const Model&, const GenerationRequest&, std::span<const Hook>,
                                     std::span<const HookSite>);

    explicit Model(std::shared_ptr<const Impl> impl);

    std::shared_ptr<const Impl> impl_;
    std::shared_ptr<std::atomic<std::uint64_t>> counter_;
};

// Closed-form view of an analytic testbed.
//
// Block l reads the mean a_l of the prefix rows of its input, adds
// M_l a_l + d_l to every generated row, and re-anchors the prefix rows to the
// embedded reference. The velocity is the generated rows of the last block's
// output, so the final output is noise + mean over steps of that prediction.
// M_l = gain_l (P + c (I - P)), with P the projector onto the attribute
// subspace and c the complement gain.
class AnalyticTestbed {
public:
    std::size_t attribute_dim() const noexcept { return basis_.size(); }

    // Unit, pairwise-orthogonal directions spanning the attribute subspace.
    const std::vector<std::vector<double>>& attribute_basis() const noexcept { return basis_; }

    const Matrix& readout(std::size_t layer) const { return readout_.at(layer); }
    const std::vector<double>& layer_gains() const noexcept { return gains_; }
    double complement_gain() const noexcept { return complement_gain_; }

    // Output-mean change per unit additive shift v of every prefix row at each
    // (layer, step) site in the given sets.
    Matrix prefix_shift_jacobian(std::span<const std::size_t> layers, std::span<const std::size_t> steps) const;

    // Output-mean change per unit shift of every reference token.
    Matrix reference_shift_jacobian() const;

    // Output row produced for a zero reference prefix and zero noise.
    std::vector<double> neutral_target(const GenerationRequest& request) const;

private:
    friend Model build_analytic_testbed(const ModelConfig&, std::size_t);
    friend struct Model::Impl;

    std::size_t num_steps_ = 0;
    std::vector<std::vector<double>> basis_;
    std::vector<double> gains_;
    double complement_gain_ = 0.0;
    std::vector<Matrix> readout_;               // M_l
    std::vector<std::vector<double>> offsets_;  // d_l
    Matrix condition_embed_;                    // E_c
};

Model build_toy_model(const ModelConfig& config);

// Throws when attribute_dim >= hidden_dim or attribute_dim == 0.
Model build_analytic_testbed(const ModelConfig& config, std::size_t attribute_dim);

// Runs num_steps Euler steps. At every block entry the activation is first
// recorded (if its site is in capture_sites) and then passed through every
// matching hook in registration order, unless request.condition_dropped.
GenerationResult generate(const Model& model, const GenerationRequest& request, std::span<const Hook> hooks = {},
                          std::span<const HookSite> capture_sites = {});

// `count` unit, pairwise-orthogonal directions to plant attributes along: the
// testbed's attribute basis for an analytic model, otherwise a seeded random
// orthonormal set.
std::vector<std::vector<double>> attribute_directions(const Model& model, std::size_t count);

// floor(time * num_steps) clamped to [0, num_steps - 1].
std::size_t step_index_for_time(double time, std::size_t num_steps) noexcept;

// Every (layer, step) pair of the two lists, layer-major.
std::vector<HookSite> grid_sites(std::span<const std::size_t> layers, std::span<const std::size_t> steps);

}  // namespace actsteer::model
