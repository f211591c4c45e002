#pragma once

// Attribute-probability scorers.
//
// The pipeline only ever asks an oracle one question: given a generated
// sequence, how likely is each attribute? Anything that answers it (a real
// classifier behind an adapter, or the linear probe below) can drive search
// and filtering.

#include <map>
#include <span>
#include <string>
#include <vector>

#include "actsteer/model.hpp"
#include "actsteer/tensor.hpp"

namespace actsteer::oracle {

// Label scored as the absence of every attribute.
inline constexpr const char* kNeutralLabel = "neutral";

struct OracleScore {
    std::map<std::string, double> probabilities;

    // Throws ErrorCode::unknown_attribute when the label was not scored.
    double at(const std::string& attribute_id) const;
};

class Oracle {
public:
    virtual ~Oracle() = default;

    virtual OracleScore score(const TokenSequence& output) const = 0;

    // Labels present in every OracleScore this oracle returns.
    virtual std::vector<std::string> labels() const = 0;

    bool supports(const std::string& attribute_id) const;
};

struct LinearProbe {
    std::vector<double> direction;  // g
    double bias = 0.0;              // b
};

// p_a = sigmoid(g_a . mean_token(output) - b_a), one independent probe per
// attribute; "neutral" is scored as prod_a (1 - p_a).
class LinearProbeOracle final : public Oracle {
public:
    LinearProbeOracle(std::vector<std::string> attributes, std::vector<LinearProbe> probes);

    OracleScore score(const TokenSequence& output) const override;
    std::vector<std::string> labels() const override;

    std::size_t hidden_dim() const noexcept { return hidden_; }
    const std::vector<std::string>& attributes() const noexcept { return attributes_; }
    const LinearProbe& probe(const std::string& attribute_id) const;

private:
    std::vector<std::string> attributes_;
    std::vector<LinearProbe> probes_;
    std::size_t hidden_ = 0;
};

struct ProbeCalibration {
    double neutral_probability = 0.02;    // target p_a for a zero reference prefix
    double attribute_probability = 0.9;   // target p_a for a prefix shifted by strength * basis_a
    std::size_t reference_len = 12;
    std::size_t output_len = 12;
};

// Builds one probe per attribute from the corpus attribute basis: g_a points
// along the output-mean response to shifting the reference prefix by
// strength * basis_a (measured with two noise-free generations), and its
// gain and bias are set so the neutral and shifted outputs land on the
// calibration probabilities.
LinearProbeOracle calibrate_linear_probe(const model::Model& model, const std::vector<std::string>& attributes,
                                         const std::vector<std::vector<double>>& basis, double strength,
                                         const ProbeCalibration& calibration = {});

// Scores every candidate and returns indices ordered by descending
// probability for attribute_id; ties keep the lower index first.
std::vector<std::size_t> brute_force_rank(const Oracle& oracle, std::span<const TokenSequence> candidates,
                                          const std::string& attribute_id);

double logistic(double x) noexcept;

}  // namespace actsteer::oracle
