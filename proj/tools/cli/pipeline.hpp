#pragma once

// The pieces every command shares: the model, attribute basis and oracle a
// config describes, the held-out probe and evaluation requests, and the
// layer/step presets.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "actsteer/corpus.hpp"
#include "actsteer/extract.hpp"
#include "actsteer/model.hpp"
#include "actsteer/oracle.hpp"
#include "actsteer/search.hpp"
#include "actsteer/steer.hpp"
#include "config.hpp"

namespace actsteer::cli {

struct Session {
    RunConfig config;
    model::Model model;
    corpus::AttributeBasis basis;
    oracle::LinearProbeOracle oracle;
};

Session open_session(const RunConfig& config);

corpus::CorpusSpec corpus_spec(const RunConfig& config, const std::string& attribute_id);

struct FilteredCorpus {
    corpus::FilterResult neutral;
    corpus::FilterResult attribute;
    std::size_t requested_neutral = 0;
    std::size_t requested_attribute = 0;
};

FilteredCorpus build_corpus(const Session& session, const std::string& attribute_id);

// Throws ErrorCode::degenerate_field when either set is empty.
extract::DirectionField extract_field(const Session& session, const corpus::ReferenceSet& neutral,
                                      const corpus::ReferenceSet& attribute, const std::vector<std::size_t>& layers,
                                      const std::vector<std::size_t>& steps);

// A neutral request drawn from a seed no corpus uses.
model::GenerationRequest probe_request(const Session& session);

// Held-out neutral and attribute references for evaluating a plan.
corpus::PairedCorpus evaluation_sets(const Session& session, const std::string& attribute_id);

// Mean oracle probability per label over the steered outputs of every request.
std::map<std::string, double> mean_scores(const Session& session, const std::vector<model::GenerationRequest>& requests,
                                          const steer::SteeringPlan& plan,
                                          const std::vector<search::SteeringVectorSet>& vectors,
                                          std::size_t threads);

// Layer presets by fraction of depth, following a 22-layer reference stack:
// shallow [0, 7/22), middle [7/22, 14/22), deep [14/22, 1); spaced picks
// floor(p * L / 22) for p in {0, 5, 10, 15, 20}; default is
// steer::default_layers; all is every layer. A comma list is taken literally.
std::vector<std::size_t> resolve_layers(const std::string& spec, std::size_t num_layers);

// Step presets by fraction of the schedule, following a 32-step reference:
// early [0, 11/32), middle [11/32, 22/32), late [22/32, 1), all.
std::vector<std::size_t> resolve_steps(const std::string& spec, std::size_t num_steps);

std::vector<std::string> layer_presets();
std::vector<std::string> step_presets();

// {10, 50, 100, ..., 400} / 400 * T, rounded, at least 1, deduplicated.
std::vector<std::size_t> k_grid(std::size_t token_count);
std::vector<double> alpha_grid();

}  // namespace actsteer::cli
