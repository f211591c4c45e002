#include "actsteer/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <variant>

#include "actsteer/error.hpp"
#include "actsteer/kernels.hpp"
#include "actsteer/rng.hpp"

namespace actsteer::model {

namespace {

enum SeedTag : std::uint64_t {
    kTagBlock = 1,
    kTagEmbed = 2,
    kTagHead = 3,
    kTagBasis = 4,
    kTagGains = 5,
    kTagOffsets = 6,
    kTagNoise = 7,
};

Matrix random_matrix(std::size_t rows, std::size_t cols, double scale, GaussianSource& rng) {
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (double& v : m.row(r)) v = scale * rng();
    }
    return m;
}

std::vector<double> random_vector(std::size_t n, double scale, GaussianSource& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = scale * rng();
    return v;
}

// Modified Gram-Schmidt over Gaussian draws; redraws on (improbable) collapse.
std::vector<std::vector<double>> random_orthonormal_basis(std::size_t n, GaussianSource& rng) {
    std::vector<std::vector<double>> basis;
    while (basis.size() < n) {
        auto v = random_vector(n, 1.0, rng);
        for (const auto& b : basis) kernels::axpy(-kernels::dot(v, b), b, v);
        const double norm = std::sqrt(kernels::sum_squares(v));
        if (norm < 1e-6) continue;
        kernels::scale(1.0 / norm, v);
        basis.push_back(std::move(v));
    }
    return basis;
}

struct ToyBlock {
    Matrix token_mix;  // acts on each normalized token
    Matrix pool_mix;   // acts on the mean normalized token
    Matrix out;
    std::vector<double> time_gain;
    std::vector<double> time_bias;
};

struct ToyWeights {
    Matrix embed_reference;
    Matrix embed_state;
    Matrix embed_condition;
    Matrix positions;  // [max_seq_len, hidden]
    std::vector<ToyBlock> blocks;
    Matrix head;
};

void validate_request(const ModelConfig& config, const GenerationRequest& request) {
    const std::size_t hidden = config.hidden_dim;
    if (request.condition_tokens.empty() || request.reference_tokens.empty()) {
        throw Error(ErrorCode::invalid_argument, "generation request needs condition and reference tokens");
    }
    if (request.condition_tokens.hidden_dim() != hidden || request.reference_tokens.hidden_dim() != hidden) {
        throw Error(ErrorCode::shape_mismatch, "request token width does not match model hidden_dim " +
                                                   std::to_string(hidden));
    }
    if (request.reference_len == 0 || request.reference_len > request.reference_tokens.length()) {
        throw Error(ErrorCode::invalid_argument, "reference_len must be in [1, reference token count]");
    }
    if (request.output_len == 0) throw Error(ErrorCode::invalid_argument, "output_len must be >= 1");
    if (request.total_length() > config.max_seq_len) {
        throw Error(ErrorCode::invalid_argument, "sequence length " + std::to_string(request.total_length()) +
                                                     " exceeds max_seq_len " + std::to_string(config.max_seq_len));
    }
    if (!std::isfinite(request.noise_scale)) throw Error(ErrorCode::non_finite, "noise_scale is not finite");
    require_finite(request.condition_tokens);
    require_finite(request.reference_tokens);
}

}  // namespace

struct Model::Impl {
    ModelConfig config;
    std::variant<ToyWeights, AnalyticTestbed> weights;

    const AnalyticTestbed* testbed() const noexcept { return std::get_if<AnalyticTestbed>(&weights); }

    // Block input at layer 0 for the current state.
    void embed(const GenerationRequest& request, std::span<const double> condition_mean, const TokenSequence& state,
               TokenSequence& h) const;
    void block(std::size_t layer, double time, std::size_t reference_len, const GenerationRequest& request,
               TokenSequence& h) const;
    void velocity(const TokenSequence& h, std::size_t reference_len, TokenSequence& v) const;
};

void Model::Impl::embed(const GenerationRequest& request, std::span<const double> condition_mean,
                        const TokenSequence& state, TokenSequence& h) const {
    const std::size_t ref_len = request.reference_len;
    if (const auto* tb = std::get_if<AnalyticTestbed>(&weights)) {
        const auto cond = tb->condition_embed_.apply(condition_mean);
        for (std::size_t p = 0; p < h.length(); ++p) {
            auto row = h.row(p);
            if (p < ref_len) {
                if (request.condition_dropped) {
                    std::fill(row.begin(), row.end(), 0.0);
                } else {
                    const auto ref = request.reference_tokens.row(p);
                    std::copy(ref.begin(), ref.end(), row.begin());
                }
            } else {
                std::copy(cond.begin(), cond.end(), row.begin());
            }
        }
        return;
    }

    const auto& w = std::get<ToyWeights>(weights);
    const auto cond = w.embed_condition.apply(condition_mean);
    for (std::size_t p = 0; p < h.length(); ++p) {
        auto row = h.row(p);
        if (p < ref_len) {
            if (request.condition_dropped) {
                std::fill(row.begin(), row.end(), 0.0);
            } else {
                w.embed_reference.apply_into(request.reference_tokens.row(p), row);
            }
        } else {
            w.embed_state.apply_into(state.row(p - ref_len), row);
        }
        kernels::axpy(1.0, cond, row);
        kernels::axpy(1.0, w.positions.row(p), row);
    }
}

void Model::Impl::block(std::size_t layer, double time, std::size_t reference_len, const GenerationRequest& request,
                        TokenSequence& h) const {
    const std::size_t hidden = config.hidden_dim;
    if (const auto* tb = std::get_if<AnalyticTestbed>(&weights)) {
        const auto prefix_mean = mean_token(h, 0, reference_len);
        auto update = tb->readout_[layer].apply(prefix_mean);
        kernels::axpy(1.0, tb->offsets_[layer], update);
        for (std::size_t p = reference_len; p < h.length(); ++p) kernels::axpy(1.0, update, h.row(p));
        for (std::size_t p = 0; p < reference_len; ++p) {
            auto row = h.row(p);
            if (request.condition_dropped) {
                std::fill(row.begin(), row.end(), 0.0);
            } else {
                const auto ref = request.reference_tokens.row(p);
                std::copy(ref.begin(), ref.end(), row.begin());
            }
        }
        return;
    }

    const auto& b = std::get<ToyWeights>(weights).blocks[layer];
    // Pre-norm: RMS-normalize every token, then mix per token and through the mean token.
    TokenSequence normed = h;
    for (std::size_t p = 0; p < normed.length(); ++p) {
        auto row = normed.row(p);
        const double rms = std::sqrt(kernels::sum_squares(row) / static_cast<double>(hidden) + 1e-6);
        kernels::scale(1.0 / rms, row);
    }
    const auto pooled = mean_token(normed);
    auto shared = b.pool_mix.apply(pooled);
    kernels::axpy(time, b.time_gain, shared);
    kernels::axpy(1.0, b.time_bias, shared);

    std::vector<double> z(hidden);
    std::vector<double> delta(hidden);
    for (std::size_t p = 0; p < h.length(); ++p) {
        b.token_mix.apply_into(normed.row(p), z);
        kernels::axpy(1.0, shared, z);
        for (double& v : z) v = std::tanh(v);
        b.out.apply_into(z, delta);
        kernels::axpy(1.0, delta, h.row(p));
    }
}

void Model::Impl::velocity(const TokenSequence& h, std::size_t reference_len, TokenSequence& v) const {
    if (std::holds_alternative<AnalyticTestbed>(weights)) {
        for (std::size_t p = 0; p < v.length(); ++p) {
            const auto src = h.row(reference_len + p);
            std::copy(src.begin(), src.end(), v.row(p).begin());
        }
        return;
    }
    const auto& head = std::get<ToyWeights>(weights).head;
    for (std::size_t p = 0; p < v.length(); ++p) head.apply_into(h.row(reference_len + p), v.row(p));
}

void ModelConfig::validate() const {
    if (num_layers < 1) throw Error(ErrorCode::invalid_argument, "num_layers must be >= 1");
    if (num_steps < 1) throw Error(ErrorCode::invalid_argument, "num_steps must be >= 1");
    if (hidden_dim < 2) throw Error(ErrorCode::invalid_argument, "hidden_dim must be >= 2");
    if (max_seq_len < 2) throw Error(ErrorCode::invalid_argument, "max_seq_len must be >= 2");
}

Model::Model(std::shared_ptr<const Impl> impl)
    : impl_(std::move(impl)), counter_(std::make_shared<std::atomic<std::uint64_t>>(0)) {}

const ModelConfig& Model::config() const noexcept { return impl_->config; }

ModelKind Model::kind() const noexcept {
    return impl_->testbed() != nullptr ? ModelKind::analytic : ModelKind::toy;
}

const AnalyticTestbed* Model::testbed() const noexcept { return impl_->testbed(); }

Matrix AnalyticTestbed::prefix_shift_jacobian(std::span<const std::size_t> layers,
                                              std::span<const std::size_t> steps) const {
    const std::size_t hidden = basis_.empty() ? 0 : basis_.front().size();
    Matrix sum(hidden, hidden);
    for (std::size_t layer : layers) {
        const Matrix& m = readout_.at(layer);
        for (std::size_t r = 0; r < hidden; ++r) kernels::axpy(1.0, m.row(r), sum.row(r));
    }
    const double step_weight = static_cast<double>(steps.size()) / static_cast<double>(num_steps_);
    for (std::size_t r = 0; r < hidden; ++r) kernels::scale(step_weight, sum.row(r));
    return sum;
}

Matrix AnalyticTestbed::reference_shift_jacobian() const {
    std::vector<std::size_t> layers(readout_.size());
    std::vector<std::size_t> steps(num_steps_);
    for (std::size_t i = 0; i < layers.size(); ++i) layers[i] = i;
    for (std::size_t i = 0; i < steps.size(); ++i) steps[i] = i;
    return prefix_shift_jacobian(layers, steps);
}

std::vector<double> AnalyticTestbed::neutral_target(const GenerationRequest& request) const {
    auto target = condition_embed_.apply(mean_token(request.condition_tokens));
    for (const auto& d : offsets_) kernels::axpy(1.0, d, target);
    return target;
}

Model build_toy_model(const ModelConfig& config) {
    config.validate();
    const std::size_t hidden = config.hidden_dim;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hidden));

    ToyWeights w;
    GaussianSource embed_rng(derive_seed(config.seed, kTagEmbed));
    w.embed_reference = random_matrix(hidden, hidden, inv_sqrt, embed_rng);
    w.embed_state = random_matrix(hidden, hidden, 0.5 * inv_sqrt, embed_rng);
    for (std::size_t i = 0; i < hidden; ++i) w.embed_state(i, i) += 1.0;
    w.embed_condition = random_matrix(hidden, hidden, 0.5 * inv_sqrt, embed_rng);
    w.positions = random_matrix(config.max_seq_len, hidden, 0.1, embed_rng);

    w.blocks.reserve(config.num_layers);
    for (std::size_t l = 0; l < config.num_layers; ++l) {
        GaussianSource rng(derive_seed(config.seed, kTagBlock, l));
        ToyBlock b;
        b.token_mix = random_matrix(hidden, hidden, inv_sqrt, rng);
        b.pool_mix = random_matrix(hidden, hidden, 0.5 * inv_sqrt, rng);
        b.out = random_matrix(hidden, hidden, 0.5 * inv_sqrt, rng);
        b.time_gain = random_vector(hidden, 0.5, rng);
        b.time_bias = random_vector(hidden, 0.1, rng);
        w.blocks.push_back(std::move(b));
    }
    GaussianSource head_rng(derive_seed(config.seed, kTagHead));
    w.head = random_matrix(hidden, hidden, inv_sqrt, head_rng);

    auto impl = std::make_shared<Model::Impl>(Model::Impl{config, std::move(w)});
    return Model(std::move(impl));
}

Model build_analytic_testbed(const ModelConfig& config, std::size_t attribute_dim) {
    config.validate();
    const std::size_t hidden = config.hidden_dim;
    if (attribute_dim == 0 || attribute_dim >= hidden) {
        throw Error(ErrorCode::invalid_argument, "attribute_dim must be in [1, hidden_dim)");
    }

    AnalyticTestbed tb;
    tb.num_steps_ = config.num_steps;
    tb.complement_gain_ = 0.25;

    GaussianSource basis_rng(derive_seed(config.seed, kTagBasis));
    auto full_basis = random_orthonormal_basis(hidden, basis_rng);
    tb.basis_.assign(full_basis.begin(), full_basis.begin() + static_cast<std::ptrdiff_t>(attribute_dim));

    Matrix attribute_proj(hidden, hidden);
    for (const auto& b : tb.basis_) {
        for (std::size_t r = 0; r < hidden; ++r) kernels::axpy(b[r], b, attribute_proj.row(r));
    }
    Matrix complement_proj = Matrix::identity(hidden);
    for (std::size_t r = 0; r < hidden; ++r) kernels::axpy(-1.0, attribute_proj.row(r), complement_proj.row(r));

    GaussianSource gain_rng(derive_seed(config.seed, kTagGains));
    GaussianSource offset_rng(derive_seed(config.seed, kTagOffsets));
    for (std::size_t l = 0; l < config.num_layers; ++l) {
        const double gain = 0.3 + 0.4 * gain_rng.uniform();
        tb.gains_.push_back(gain);
        Matrix m(hidden, hidden);
        for (std::size_t r = 0; r < hidden; ++r) {
            kernels::axpy(gain, attribute_proj.row(r), m.row(r));
            kernels::axpy(gain * tb.complement_gain_, complement_proj.row(r), m.row(r));
        }
        tb.readout_.push_back(std::move(m));
        tb.offsets_.push_back(complement_proj.apply(random_vector(hidden, 0.2, offset_rng)));
    }
    tb.condition_embed_ = Matrix(hidden, hidden);
    for (std::size_t r = 0; r < hidden; ++r) kernels::axpy(0.5, complement_proj.row(r), tb.condition_embed_.row(r));

    auto impl = std::make_shared<Model::Impl>(Model::Impl{config, std::move(tb)});
    return Model(std::move(impl));
}

std::vector<std::vector<double>> attribute_directions(const Model& model, std::size_t count) {
    if (const auto* tb = model.testbed()) {
        if (count > tb->attribute_dim()) {
            throw Error(ErrorCode::invalid_argument, "testbed has only " + std::to_string(tb->attribute_dim()) +
                                                         " attribute directions, " + std::to_string(count) +
                                                         " requested");
        }
        return {tb->attribute_basis().begin(), tb->attribute_basis().begin() + static_cast<std::ptrdiff_t>(count)};
    }
    const std::size_t hidden = model.config().hidden_dim;
    if (count > hidden) throw Error(ErrorCode::invalid_argument, "more attribute directions than hidden_dim");
    GaussianSource rng(derive_seed(model.config().seed, kTagBasis));
    auto basis = random_orthonormal_basis(hidden, rng);
    basis.resize(count);
    return basis;
}

std::size_t step_index_for_time(double time, std::size_t num_steps) noexcept {
    const double scaled = std::floor(time * static_cast<double>(num_steps) + 1e-9);
    if (!(scaled > 0.0)) return 0;
    return std::min(static_cast<std::size_t>(scaled), num_steps - 1);
}

std::vector<HookSite> grid_sites(std::span<const std::size_t> layers, std::span<const std::size_t> steps) {
    std::vector<HookSite> sites;
    sites.reserve(layers.size() * steps.size());
    for (std::size_t l : layers) {
        for (std::size_t s : steps) sites.push_back(HookSite{l, s});
    }
    return sites;
}

GenerationResult generate(const Model& model, const GenerationRequest& request, std::span<const Hook> hooks,
                          std::span<const HookSite> capture_sites) {
    const Model::Impl& impl = *model.impl_;
    const ModelConfig& config = impl.config;
    validate_request(config, request);

    const std::size_t hidden = config.hidden_dim;
    const std::size_t ref_len = request.reference_len;
    const std::size_t total = request.total_length();
    const std::size_t steps = config.num_steps;
    const double dt = 1.0 / static_cast<double>(steps);

    TokenSequence state(request.output_len, hidden);
    GaussianSource noise(derive_seed(request.noise_seed, kTagNoise));
    for (double& v : state.values()) v = request.noise_scale * noise();

    const auto condition_mean = mean_token(request.condition_tokens);
    const bool want_capture = !capture_sites.empty();
    CaptureMap captured;

    TokenSequence h(total, hidden);
    TokenSequence v(request.output_len, hidden);
    for (std::size_t k = 0; k < steps; ++k) {
        const double time = static_cast<double>(k) * dt;
        const std::size_t step = step_index_for_time(time, steps);
        impl.embed(request, condition_mean, state, h);

        for (std::size_t layer = 0; layer < config.num_layers; ++layer) {
            const HookSite site{layer, step};
            if (want_capture && std::find(capture_sites.begin(), capture_sites.end(), site) != capture_sites.end()) {
                captured.insert_or_assign(site, h);
            }
            if (!request.condition_dropped) {
                const HookContext ctx{site, ref_len, time};
                for (const Hook& hook : hooks) {
                    if (!hook.matches || !hook.matches(site)) continue;
                    TokenSequence next = hook.transform(h, ctx);
                    if (!next.same_shape(h)) {
                        throw Error(ErrorCode::hook_shape_violation, "hook shape violation at layer " +
                                                                         std::to_string(layer) + ", step " +
                                                                         std::to_string(step));
                    }
                    require_finite(next);
                    h = std::move(next);
                }
            }
            impl.block(layer, time, ref_len, request, h);
        }

        impl.velocity(h, ref_len, v);
        kernels::axpy(dt, v.values(), state.values());
    }

    require_finite(state);
    model.counter_->fetch_add(1);

    GenerationResult result{std::move(state), std::nullopt};
    if (want_capture) result.captured = std::move(captured);
    return result;
}

}  // namespace actsteer::model
