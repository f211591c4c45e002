#include "pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "actsteer/error.hpp"
#include "actsteer/parallel.hpp"
#include "actsteer/rng.hpp"

namespace actsteer::cli {

namespace {

enum SeedTag : std::uint64_t { kTagProbe = 101, kTagEval = 102 };

// Fraction band [lo, hi) of an index range of length n.
std::vector<std::size_t> band(std::size_t n, double lo, double hi) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i) {
        const double f = static_cast<double>(i) / static_cast<double>(n);
        if (f >= lo && f < hi) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> parse_index_list(const std::string& spec, std::size_t bound, const char* what) {
    std::vector<std::size_t> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t value = 0;
        std::size_t used = 0;
        try {
            value = std::stoul(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (item.empty() || used != item.size()) {
            throw Error(ErrorCode::config, std::string("bad ") + what + " list '" + spec + "'");
        }
        out.push_back(value);
    }
    try {
        validate_index_list(out, bound, what);
    } catch (const Error& e) {
        throw Error(ErrorCode::config, e.what());
    }
    return out;
}

std::vector<std::size_t> non_empty(std::vector<std::size_t> v, const std::string& spec, const char* what,
                                   std::size_t n) {
    if (v.empty()) {
        throw Error(ErrorCode::config, std::string(what) + " preset '" + spec + "' selects nothing out of " +
                                           std::to_string(n));
    }
    return v;
}

}  // namespace

Session open_session(const RunConfig& config) {
    validate(config);
    auto m = config.model_kind == model::ModelKind::analytic
                 ? model::build_analytic_testbed(config.model, config.attributes.size())
                 : model::build_toy_model(config.model);
    const auto directions = model::attribute_directions(m, config.attributes.size());
    corpus::AttributeBasis basis;
    for (std::size_t i = 0; i < directions.size(); ++i) basis[config.attributes[i]] = directions[i];
    oracle::ProbeCalibration calibration;
    calibration.reference_len = (config.corpus.length_range.min + config.corpus.length_range.max) / 2;
    calibration.output_len = config.corpus.output_len;
    auto probe = oracle::calibrate_linear_probe(m, config.attributes, directions, config.calibration_strength,
                                                calibration);
    return Session{config, std::move(m), std::move(basis), std::move(probe)};
}

corpus::CorpusSpec corpus_spec(const RunConfig& config, const std::string& attribute_id) {
    corpus::CorpusSpec spec = config.corpus;
    spec.attribute_id = attribute_id;
    spec.seed = config.seed;
    return spec;
}

FilteredCorpus build_corpus(const Session& session, const std::string& attribute_id) {
    const auto spec = corpus_spec(session.config, attribute_id);
    const auto paired = corpus::generate_corpus(spec, session.basis, session.config.model.hidden_dim);
    FilteredCorpus out;
    out.requested_neutral = paired.neutral.size();
    out.requested_attribute = paired.attribute.size();
    out.neutral = corpus::filter_by_oracle(paired.neutral, session.oracle, session.model, session.config.min_confidence);
    out.attribute =
        corpus::filter_by_oracle(paired.attribute, session.oracle, session.model, session.config.min_confidence);
    return out;
}

extract::DirectionField extract_field(const Session& session, const corpus::ReferenceSet& neutral,
                                      const corpus::ReferenceSet& attribute, const std::vector<std::size_t>& layers,
                                      const std::vector<std::size_t>& steps) {
    if (neutral.empty() || attribute.empty()) {
        throw Error(ErrorCode::degenerate_field, "cannot extract a direction: " + std::to_string(neutral.size()) +
                                                     " neutral and " + std::to_string(attribute.size()) +
                                                     " attribute references");
    }
    const std::size_t threads = session.config.threads;
    const auto a = extract::capture(session.model, neutral, layers, steps, threads);
    const auto b = extract::capture(session.model, attribute, layers, steps, threads);
    auto field = extract::difference_in_means(a, b, session.config.step_mode);
    field.attribute_id = attribute.labels.front();
    return field;
}

model::GenerationRequest probe_request(const Session& session) {
    auto spec = corpus_spec(session.config, session.config.attributes.front());
    spec.seed = derive_seed(session.config.seed, kTagProbe);
    spec.m_neutral = 1;
    spec.n_attribute = 1;
    return corpus::generate_corpus(spec, session.basis, session.config.model.hidden_dim).neutral.requests.front();
}

corpus::PairedCorpus evaluation_sets(const Session& session, const std::string& attribute_id) {
    auto spec = corpus_spec(session.config, attribute_id);
    spec.seed = derive_seed(session.config.seed, kTagEval);
    spec.m_neutral = session.config.eval_count;
    spec.n_attribute = session.config.eval_count;
    return corpus::generate_corpus(spec, session.basis, session.config.model.hidden_dim);
}

std::map<std::string, double> mean_scores(const Session& session, const std::vector<model::GenerationRequest>& requests,
                                          const steer::SteeringPlan& plan,
                                          const std::vector<search::SteeringVectorSet>& vectors,
                                          std::size_t threads) {
    std::vector<oracle::OracleScore> scores(requests.size());
    parallel_for(
        requests.size(),
        [&](std::size_t i) {
            scores[i] = session.oracle.score(steer::run_plan(session.model, requests[i], plan, vectors).result.output);
        },
        threads);
    std::map<std::string, double> mean;
    for (const auto& s : scores) {
        for (const auto& [label, p] : s.probabilities) mean[label] += p;
    }
    for (auto& [label, p] : mean) p /= static_cast<double>(requests.size());
    return mean;
}

std::vector<std::size_t> resolve_layers(const std::string& spec, std::size_t num_layers) {
    const double n = static_cast<double>(num_layers);
    if (spec == "default") return steer::default_layers(num_layers);
    if (spec == "all") return steer::all_steps(num_layers);
    if (spec == "shallow") return non_empty(band(num_layers, 0.0, 7.0 / 22.0), spec, "layer", num_layers);
    if (spec == "middle") return non_empty(band(num_layers, 7.0 / 22.0, 14.0 / 22.0), spec, "layer", num_layers);
    if (spec == "deep") return non_empty(band(num_layers, 14.0 / 22.0, 1.0), spec, "layer", num_layers);
    if (spec == "spaced") {
        std::vector<std::size_t> out;
        for (double p : {0.0, 5.0, 10.0, 15.0, 20.0}) {
            const auto l = static_cast<std::size_t>(std::floor(p * n / 22.0));
            if (std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
        }
        return out;
    }
    return parse_index_list(spec, num_layers, "layer");
}

std::vector<std::size_t> resolve_steps(const std::string& spec, std::size_t num_steps) {
    if (spec == "all") return steer::all_steps(num_steps);
    if (spec == "early") return non_empty(band(num_steps, 0.0, 11.0 / 32.0), spec, "step", num_steps);
    if (spec == "middle") return non_empty(band(num_steps, 11.0 / 32.0, 22.0 / 32.0), spec, "step", num_steps);
    if (spec == "late") return non_empty(band(num_steps, 22.0 / 32.0, 1.0), spec, "step", num_steps);
    if (spec == "none") return {};
    return parse_index_list(spec, num_steps, "step");
}

std::vector<std::string> layer_presets() { return {"shallow", "middle", "deep", "spaced"}; }
std::vector<std::string> step_presets() { return {"early", "middle", "late", "all"}; }

std::vector<std::size_t> k_grid(std::size_t token_count) {
    std::vector<std::size_t> out;
    for (std::size_t p = 0; p <= 400; p += 50) {
        const double scaled = static_cast<double>(p == 0 ? 10 : p) * static_cast<double>(token_count) / 400.0;
        const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(scaled)));
        if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
    }
    return out;
}

std::vector<double> alpha_grid() { return {0.0, 0.5, 1.0, 1.5, 2.0}; }

}  // namespace actsteer::cli
