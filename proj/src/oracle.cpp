#include "actsteer/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "actsteer/error.hpp"
#include "actsteer/kernels.hpp"

namespace actsteer::oracle {

double logistic(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double OracleScore::at(const std::string& attribute_id) const {
    const auto it = probabilities.find(attribute_id);
    if (it == probabilities.end()) throw Error(ErrorCode::unknown_attribute, "oracle has no label '" + attribute_id + "'");
    return it->second;
}

bool Oracle::supports(const std::string& attribute_id) const {
    const auto l = labels();
    return std::find(l.begin(), l.end(), attribute_id) != l.end();
}

LinearProbeOracle::LinearProbeOracle(std::vector<std::string> attributes, std::vector<LinearProbe> probes)
    : attributes_(std::move(attributes)), probes_(std::move(probes)) {
    if (attributes_.empty() || attributes_.size() != probes_.size()) {
        throw Error(ErrorCode::invalid_argument, "linear probe oracle needs one probe per attribute");
    }
    hidden_ = probes_.front().direction.size();
    for (std::size_t i = 0; i < probes_.size(); ++i) {
        if (probes_[i].direction.size() != hidden_ || hidden_ == 0) {
            throw Error(ErrorCode::shape_mismatch, "linear probe directions must share one non-zero width");
        }
        if (attributes_[i] == kNeutralLabel) {
            throw Error(ErrorCode::invalid_argument, "'neutral' is reserved for the no-attribute score");
        }
    }
}

OracleScore LinearProbeOracle::score(const TokenSequence& output) const {
    if (output.hidden_dim() != hidden_) {
        throw Error(ErrorCode::shape_mismatch, "oracle expects width " + std::to_string(hidden_) + ", got " +
                                                   std::to_string(output.hidden_dim()));
    }
    const auto mean = mean_token(output);
    OracleScore s;
    double none = 1.0;
    for (std::size_t i = 0; i < probes_.size(); ++i) {
        const double p = logistic(kernels::dot(probes_[i].direction, mean) - probes_[i].bias);
        s.probabilities[attributes_[i]] = p;
        none *= 1.0 - p;
    }
    s.probabilities[kNeutralLabel] = none;
    return s;
}

std::vector<std::string> LinearProbeOracle::labels() const {
    auto l = attributes_;
    l.emplace_back(kNeutralLabel);
    return l;
}

const LinearProbe& LinearProbeOracle::probe(const std::string& attribute_id) const {
    const auto it = std::find(attributes_.begin(), attributes_.end(), attribute_id);
    if (it == attributes_.end()) throw Error(ErrorCode::unknown_attribute, "unknown attribute '" + attribute_id + "'");
    return probes_[static_cast<std::size_t>(it - attributes_.begin())];
}

LinearProbeOracle calibrate_linear_probe(const model::Model& model, const std::vector<std::string>& attributes,
                                         const std::vector<std::vector<double>>& basis, double strength,
                                         const ProbeCalibration& calibration) {
    if (attributes.size() != basis.size() || attributes.empty()) {
        throw Error(ErrorCode::invalid_argument, "calibration needs one basis vector per attribute");
    }
    if (!(strength > 0.0)) throw Error(ErrorCode::invalid_argument, "calibration strength must be positive");
    const auto logit = [](double p) { return std::log(p / (1.0 - p)); };
    const double lo = logit(calibration.neutral_probability);
    const double hi = logit(calibration.attribute_probability);
    if (!(hi > lo)) throw Error(ErrorCode::invalid_argument, "attribute probability must exceed neutral probability");

    const std::size_t hidden = model.config().hidden_dim;
    model::GenerationRequest base;
    base.condition_tokens = TokenSequence(1, hidden);
    base.reference_tokens = TokenSequence(calibration.reference_len, hidden);
    base.reference_len = calibration.reference_len;
    base.output_len = calibration.output_len;
    base.noise_scale = 0.0;
    const auto neutral_mean = mean_token(model::generate(model, base).output);

    std::vector<LinearProbe> probes;
    for (const auto& direction : basis) {
        if (direction.size() != hidden) throw Error(ErrorCode::shape_mismatch, "basis vector width mismatch");
        model::GenerationRequest shifted = base;
        for (std::size_t p = 0; p < shifted.reference_len; ++p) {
            kernels::axpy(strength, direction, shifted.reference_tokens.row(p));
        }
        auto response = mean_token(model::generate(model, shifted).output);
        kernels::axpy(-1.0, neutral_mean, response);
        const double magnitude = l2_norm(response);
        if (magnitude < 1e-12) throw Error(ErrorCode::degenerate_field, "model output does not respond to attribute");

        // Unit direction u; logit(x) = gain * u.(x - neutral) + lo, reaching hi at the shifted output.
        const double gain = (hi - lo) / magnitude;
        LinearProbe probe;
        probe.direction = response;
        kernels::scale(gain / magnitude, probe.direction);
        probe.bias = kernels::dot(probe.direction, neutral_mean) - lo;
        probes.push_back(std::move(probe));
    }
    return LinearProbeOracle(attributes, std::move(probes));
}

std::vector<std::size_t> brute_force_rank(const Oracle& oracle, std::span<const TokenSequence> candidates,
                                          const std::string& attribute_id) {
    if (candidates.empty()) throw Error(ErrorCode::invalid_argument, "brute_force_rank: no candidates");
    std::vector<double> scores;
    scores.reserve(candidates.size());
    for (const auto& c : candidates) scores.push_back(oracle.score(c).at(attribute_id));
    return top_k_indices(scores, scores.size());
}

}  // namespace actsteer::oracle
