#pragma once

// Small helpers shared by the unit tests.

#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "actsteer/error.hpp"
#include "actsteer/model.hpp"
#include "actsteer/tensor.hpp"

namespace test_support {

template <typename F>
actsteer::ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const actsteer::Error& e) {
        return e.code();
    }
    FAIL("expected an actsteer::Error");
    return actsteer::ErrorCode::io;
}

inline actsteer::TokenSequence random_sequence(std::mt19937_64& rng, std::size_t len, std::size_t hidden,
                                               double scale = 1.0) {
    std::normal_distribution<double> d(0.0, scale);
    actsteer::TokenSequence s(len, hidden);
    for (double& v : s.values()) v = d(rng);
    return s;
}

inline actsteer::model::GenerationRequest random_request(std::mt19937_64& rng, std::size_t hidden,
                                                         std::size_t ref_len, std::size_t out_len,
                                                         std::uint64_t noise_seed = 5) {
    actsteer::model::GenerationRequest r;
    r.condition_tokens = random_sequence(rng, 3, hidden);
    r.reference_tokens = random_sequence(rng, ref_len, hidden);
    r.reference_len = ref_len;
    r.output_len = out_len;
    r.noise_seed = noise_seed;
    return r;
}

inline actsteer::model::ModelConfig small_config(std::size_t layers = 4, std::size_t steps = 8,
                                                 std::size_t hidden = 16) {
    actsteer::model::ModelConfig c;
    c.num_layers = layers;
    c.num_steps = steps;
    c.hidden_dim = hidden;
    c.max_seq_len = 64;
    c.seed = 99;
    return c;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Fresh empty directory under the system temp dir, unique per process.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("actsteer-test-" + name + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace test_support
