#pragma once

// Run configuration: every field has a default, a config file overrides the
// defaults, command-line flags override the file. The effective values are
// written back out in the same format so any run can be replayed.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "actsteer/corpus.hpp"
#include "actsteer/extract.hpp"
#include "actsteer/model.hpp"
#include "actsteer/steer.hpp"

namespace actsteer::cli {

struct RunConfig {
    // [model]
    model::ModelKind model_kind = model::ModelKind::analytic;
    model::ModelConfig model;
    std::vector<std::string> attributes = {"anger", "disgust", "fear", "happiness", "sadness", "surprise"};

    // [corpus]
    corpus::CorpusSpec corpus;
    double min_confidence = 0.6;

    // [oracle]
    double calibration_strength = 3.0;  // prefix shift that should score ~0.9

    // [search]
    std::size_t k = 200;
    extract::StepMode step_mode = extract::StepMode::per_step;

    // [steer]
    steer::Mode mode = steer::Mode::convert;
    double alpha = 2.0;
    double beta = 2.5;
    std::string layers = "default";  // index list or a preset name
    std::string steps = "all";
    steer::Region region = steer::Region::reference_prefix;
    double epsilon = kDefaultEpsilon;
    std::size_t eval_count = 8;

    // [sweep]
    std::string axis = "alpha";

    // [run]
    std::filesystem::path out = "actsteer-out";
    std::uint64_t seed = 7;
    std::size_t threads = 0;
};

// Parses a file of [section] blocks holding key = value lines. Unknown
// sections or keys and malformed values throw ErrorCode::config; an unreadable
// file throws ErrorCode::io.
void apply_config_file(RunConfig& config, const std::filesystem::path& path);
void apply_config_text(RunConfig& config, std::istream& in, const std::string& origin);

// Sets one "section.key"; values are the whitespace/comma-split tokens.
void set_value(RunConfig& config, const std::string& section, const std::string& key,
               const std::vector<std::string>& values);

// The effective configuration in the file format accepted above.
std::string render_config(const RunConfig& config);

// Cross-field checks (model, corpus, attribute list).
void validate(const RunConfig& config);

std::string format_double(double v);

}  // namespace actsteer::cli
