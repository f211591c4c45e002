#pragma once

// Stage 3: apply steering vectors at inference time.
//
// Every op edits the first region_len rows of an activation tensor, then
// rescales the whole tensor back to its original norm. s_hat is always
// unit-normalized first, so strengths mean the same thing for every
// attribute. The *_unnormalized variants return the edited tensor before
// that final rescale.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "actsteer/model.hpp"
#include "actsteer/search.hpp"
#include "actsteer/tensor.hpp"

namespace actsteer::steer {

enum class Mode { convert, erase, replace, multi };
enum class Region { reference_prefix, full_sequence };

struct SteeringPlan {
    Mode mode = Mode::convert;
    // One per vector set: convert {alpha}, erase {beta}, replace {beta, alpha}
    // (source then target), multi {alpha_1, ..., alpha_E}.
    std::vector<double> strengths;
    std::vector<std::size_t> layers;
    std::vector<std::size_t> steps;
    Region region = Region::reference_prefix;
    double epsilon = kDefaultEpsilon;

    bool operator==(const SteeringPlan&) const = default;
};

struct SteeredOutput {
    model::GenerationResult result;
    TokenSequence baseline;           // hook-free output for the same request
    std::uint64_t baseline_hash = 0;  // FNV-1a over the baseline's float64 bytes
    SteeringPlan plan_echo;
};

using Term = std::pair<std::span<const double>, double>;  // (s_hat, strength)

TokenSequence convert_unnormalized(const TokenSequence& x, std::span<const double> s_hat, double alpha,
                                   std::size_t region_len, double epsilon = kDefaultEpsilon);
TokenSequence erase_unnormalized(const TokenSequence& x, std::span<const double> s_hat, double beta,
                                 std::size_t region_len, double epsilon = kDefaultEpsilon);
TokenSequence replace_unnormalized(const TokenSequence& x, std::span<const double> s_hat_1,
                                   std::span<const double> s_hat_2, double beta, double alpha, std::size_t region_len,
                                   double epsilon = kDefaultEpsilon);
TokenSequence multi_unnormalized(const TokenSequence& x, std::span<const Term> terms, std::size_t region_len,
                                 double epsilon = kDefaultEpsilon);

// x + alpha * unit(s_hat) on region rows.
TokenSequence apply_convert(const TokenSequence& x, std::span<const double> s_hat, double alpha,
                            std::size_t region_len, double epsilon = kDefaultEpsilon);
// t - beta (s.t) s on region rows.
TokenSequence apply_erase(const TokenSequence& x, std::span<const double> s_hat, double beta, std::size_t region_len,
                          double epsilon = kDefaultEpsilon);
// Erase s_hat_1 and add alpha * s_hat_2 in one pass, then a single rescale.
TokenSequence apply_replace(const TokenSequence& x, std::span<const double> s_hat_1, std::span<const double> s_hat_2,
                            double beta, double alpha, std::size_t region_len, double epsilon = kDefaultEpsilon);
// x + sum_e alpha_e * unit(s_hat_e) on region rows, then a single rescale.
TokenSequence apply_multi(const TokenSequence& x, std::span<const Term> terms, std::size_t region_len,
                          double epsilon = kDefaultEpsilon);

// True when an edit removed (almost) all of the tensor's energy, so the
// rescale cannot restore the original norm and the output is ~zero.
bool annihilated(const TokenSequence& pre_renorm, double epsilon = kDefaultEpsilon);

// Number of required vector sets for the mode; multi returns 0 (any >= 1).
std::size_t mode_arity(Mode mode) noexcept;

// Every stride-th layer from 0, stride = max(1, round(5 * num_layers / 22)):
// 22 layers give {0, 5, 10, 15, 20}.
std::vector<std::size_t> default_layers(std::size_t num_layers);
std::vector<std::size_t> all_steps(std::size_t num_steps);

// Checks arity, strengths, bounds and that every plan site has a cell in
// every vector set (ErrorCode::grid_mismatch, "plan/vector grid mismatch").
void validate_plan(const model::ModelConfig& config, const SteeringPlan& plan,
                   std::span<const search::SteeringVectorSet> vectors);

std::vector<model::Hook> plan_hooks(const SteeringPlan& plan, std::span<const search::SteeringVectorSet> vectors);

// Generates the baseline and the steered output for one request.
SteeredOutput run_plan(const model::Model& model, const model::GenerationRequest& request, const SteeringPlan& plan,
                       std::span<const search::SteeringVectorSet> vectors);

std::string mode_name(Mode mode);
Mode parse_mode(const std::string& name);

}  // namespace actsteer::steer
