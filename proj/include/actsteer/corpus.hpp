#pragma once

// Synthetic paired reference corpora.
//
// Sample i of the neutral set and sample i of the attribute set share one
// base draw (prefix length, reference tokens, condition tokens, noise seed);
// the attribute sample's reference tokens are additionally shifted by
// strength * basis[attribute_id] on every row. Each base draw depends only
// on (seed, i), so growing a set never changes its earlier samples.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "actsteer/model.hpp"
#include "actsteer/oracle.hpp"

namespace actsteer::corpus {

struct LengthRange {
    std::size_t min = 8;
    std::size_t max = 16;
};

struct CorpusSpec {
    std::size_t m_neutral = 24;
    std::size_t n_attribute = 24;
    std::string attribute_id = "happiness";
    double attribute_strength = 3.0;
    LengthRange length_range;         // reference prefix lengths, inclusive
    std::size_t output_len = 12;
    std::size_t condition_len = 6;
    double base_scale = 1.0;          // std-dev of the base reference tokens
    double noise_scale = 1.0;
    std::uint64_t seed = 7;

    void validate(std::size_t max_seq_len) const;
};

// Everything needed to rebuild one request bit-for-bit.
struct CorpusRecord {
    std::string set;    // "neutral" | "attribute"
    std::string label;  // oracle label for this sample
    std::size_t index = 0;
    std::size_t reference_len = 0;
    std::size_t output_len = 0;
    std::size_t condition_len = 0;
    std::uint64_t base_seed = 0;
    std::uint64_t condition_seed = 0;
    std::uint64_t noise_seed = 0;
    double base_scale = 1.0;
    double noise_scale = 1.0;
    std::vector<double> shift;  // added to every reference row

    bool operator==(const CorpusRecord&) const = default;
};

struct ReferenceSet {
    std::vector<model::GenerationRequest> requests;
    std::vector<std::string> labels;
    std::vector<CorpusRecord> records;
    CorpusSpec provenance;

    std::size_t size() const noexcept { return requests.size(); }
    bool empty() const noexcept { return requests.empty(); }
};

struct PairedCorpus {
    ReferenceSet neutral;
    ReferenceSet attribute;
};

using AttributeBasis = std::map<std::string, std::vector<double>>;

// Throws ErrorCode::unknown_attribute when spec.attribute_id is not in the basis.
PairedCorpus generate_corpus(const CorpusSpec& spec, const AttributeBasis& attribute_basis, std::size_t hidden_dim);

// Rebuilds the request a record describes.
model::GenerationRequest materialize(const CorpusRecord& record, std::size_t hidden_dim);

struct FilterResult {
    ReferenceSet survivors;
    std::vector<std::size_t> kept;  // indices into the input set, ascending
    bool empty = false;
};

// Keeps request i iff its hook-free generation scores >= min_confidence on
// its own label. Order is preserved.
FilterResult filter_by_oracle(const ReferenceSet& set, const oracle::Oracle& oracle, const model::Model& model,
                              double min_confidence);

// Line-delimited corpus file. The first line names the fields; each further
// line is one record, whitespace-separated, doubles printed round-trip exact.
void write_corpus_file(const std::filesystem::path& path, const std::vector<const ReferenceSet*>& sets);
std::vector<CorpusRecord> read_corpus_file(const std::filesystem::path& path);

// Groups records by set name and materializes them.
std::map<std::string, ReferenceSet> load_reference_sets(const std::filesystem::path& path, std::size_t hidden_dim);

inline constexpr const char* kCorpusHeader =
    "# actsteer-corpus v1: set label index reference_len output_len condition_len base_seed condition_seed "
    "noise_seed base_scale noise_scale shift[0..hidden_dim)";

}  // namespace actsteer::corpus
