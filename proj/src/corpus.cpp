#include "actsteer/corpus.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "actsteer/error.hpp"
#include "actsteer/parallel.hpp"
#include "actsteer/rng.hpp"

namespace actsteer::corpus {

namespace {

enum SeedTag : std::uint64_t { kTagBase = 11, kTagCondition = 12, kTagNoise = 13, kTagLength = 14 };

CorpusRecord base_record(const CorpusSpec& spec, std::size_t index, std::size_t hidden_dim) {
    CorpusRecord r;
    r.index = index;
    const std::size_t span = spec.length_range.max - spec.length_range.min + 1;
    r.reference_len = spec.length_range.min + derive_seed(spec.seed, kTagLength, index) % span;
    r.output_len = spec.output_len;
    r.condition_len = spec.condition_len;
    r.base_seed = derive_seed(spec.seed, kTagBase, index);
    r.condition_seed = derive_seed(spec.seed, kTagCondition, index);
    r.noise_seed = derive_seed(spec.seed, kTagNoise, index);
    r.base_scale = spec.base_scale;
    r.noise_scale = spec.noise_scale;
    r.shift.assign(hidden_dim, 0.0);
    return r;
}

ReferenceSet build_set(const CorpusSpec& spec, std::vector<CorpusRecord> records, std::size_t hidden_dim) {
    ReferenceSet set;
    set.provenance = spec;
    for (auto& r : records) {
        set.requests.push_back(materialize(r, hidden_dim));
        set.labels.push_back(r.label);
        set.records.push_back(std::move(r));
    }
    return set;
}

}  // namespace

void CorpusSpec::validate(std::size_t max_seq_len) const {
    if (m_neutral < 1 || n_attribute < 1) throw Error(ErrorCode::invalid_argument, "corpus needs M >= 1 and N >= 1");
    if (length_range.min < 1 || length_range.min > length_range.max) {
        throw Error(ErrorCode::invalid_argument, "corpus length range must satisfy 1 <= min <= max");
    }
    if (output_len < 1 || condition_len < 1) {
        throw Error(ErrorCode::invalid_argument, "corpus output_len and condition_len must be >= 1");
    }
    if (length_range.max + output_len > max_seq_len) {
        throw Error(ErrorCode::invalid_argument, "corpus sequences exceed the model's max_seq_len");
    }
    if (!std::isfinite(attribute_strength) || attribute_strength < 0.0) {
        throw Error(ErrorCode::invalid_argument, "attribute_strength must be finite and non-negative");
    }
}

model::GenerationRequest materialize(const CorpusRecord& record, std::size_t hidden_dim) {
    if (record.shift.size() != hidden_dim) {
        throw Error(ErrorCode::shape_mismatch, "corpus record shift width does not match hidden_dim");
    }
    model::GenerationRequest req;
    req.reference_tokens = TokenSequence(record.reference_len, hidden_dim);
    GaussianSource base(record.base_seed);
    for (std::size_t p = 0; p < record.reference_len; ++p) {
        auto row = req.reference_tokens.row(p);
        for (std::size_t h = 0; h < hidden_dim; ++h) row[h] = record.base_scale * base() + record.shift[h];
    }
    req.condition_tokens = TokenSequence(record.condition_len, hidden_dim);
    GaussianSource cond(record.condition_seed);
    for (double& v : req.condition_tokens.values()) v = cond();
    req.reference_len = record.reference_len;
    req.output_len = record.output_len;
    req.noise_seed = record.noise_seed;
    req.noise_scale = record.noise_scale;
    return req;
}

PairedCorpus generate_corpus(const CorpusSpec& spec, const AttributeBasis& attribute_basis, std::size_t hidden_dim) {
    const auto it = attribute_basis.find(spec.attribute_id);
    if (it == attribute_basis.end()) {
        throw Error(ErrorCode::unknown_attribute, "unknown attribute_id '" + spec.attribute_id + "'");
    }
    const auto& direction = it->second;
    if (direction.size() != hidden_dim) throw Error(ErrorCode::shape_mismatch, "attribute basis width mismatch");

    std::vector<CorpusRecord> neutral;
    for (std::size_t i = 0; i < spec.m_neutral; ++i) {
        auto r = base_record(spec, i, hidden_dim);
        r.set = "neutral";
        r.label = oracle::kNeutralLabel;
        neutral.push_back(std::move(r));
    }
    std::vector<CorpusRecord> attribute;
    for (std::size_t i = 0; i < spec.n_attribute; ++i) {
        auto r = base_record(spec, i, hidden_dim);
        r.set = "attribute";
        r.label = spec.attribute_id;
        for (std::size_t h = 0; h < hidden_dim; ++h) r.shift[h] = spec.attribute_strength * direction[h];
        attribute.push_back(std::move(r));
    }
    return {build_set(spec, std::move(neutral), hidden_dim), build_set(spec, std::move(attribute), hidden_dim)};
}

FilterResult filter_by_oracle(const ReferenceSet& set, const oracle::Oracle& oracle, const model::Model& model,
                              double min_confidence) {
    if (!(min_confidence >= 0.0 && min_confidence <= 1.0)) {
        throw Error(ErrorCode::invalid_argument, "min_confidence must be in [0, 1]");
    }
    for (const auto& label : set.labels) {
        if (!oracle.supports(label)) throw Error(ErrorCode::unknown_attribute, "oracle does not score '" + label + "'");
    }
    std::vector<double> confidence(set.size());
    parallel_for(set.size(), [&](std::size_t i) {
        confidence[i] = oracle.score(model::generate(model, set.requests[i]).output).at(set.labels[i]);
    });

    FilterResult out;
    out.survivors.provenance = set.provenance;
    for (std::size_t i = 0; i < set.size(); ++i) {
        if (confidence[i] < min_confidence) continue;
        out.kept.push_back(i);
        out.survivors.requests.push_back(set.requests[i]);
        out.survivors.labels.push_back(set.labels[i]);
        if (i < set.records.size()) out.survivors.records.push_back(set.records[i]);
    }
    out.empty = out.survivors.empty();
    return out;
}

void write_corpus_file(const std::filesystem::path& path, const std::vector<const ReferenceSet*>& sets) {
    std::ostringstream os;
    os << kCorpusHeader << '\n' << std::setprecision(17);
    for (const ReferenceSet* set : sets) {
        for (const auto& r : set->records) {
            os << r.set << ' ' << r.label << ' ' << r.index << ' ' << r.reference_len << ' ' << r.output_len << ' '
               << r.condition_len << ' ' << r.base_seed << ' ' << r.condition_seed << ' ' << r.noise_seed << ' '
               << r.base_scale << ' ' << r.noise_scale;
            for (double v : r.shift) os << ' ' << v;
            os << '\n';
        }
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::io, "cannot write corpus file " + path.string());
    f << os.str();
    if (!f) throw Error(ErrorCode::io, "failed writing corpus file " + path.string());
}

std::vector<CorpusRecord> read_corpus_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorCode::io, "cannot read corpus file " + path.string());
    std::string line;
    if (!std::getline(f, line) || line != kCorpusHeader) {
        throw Error(ErrorCode::io, "corpus file " + path.string() + " has an unexpected header line");
    }
    std::vector<CorpusRecord> records;
    std::size_t line_no = 1;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream is(line);
        CorpusRecord r;
        if (!(is >> r.set >> r.label >> r.index >> r.reference_len >> r.output_len >> r.condition_len >>
              r.base_seed >> r.condition_seed >> r.noise_seed >> r.base_scale >> r.noise_scale)) {
            throw Error(ErrorCode::io, "corpus file line " + std::to_string(line_no) + " is malformed");
        }
        double v = 0.0;
        while (is >> v) r.shift.push_back(v);
        if (!is.eof()) throw Error(ErrorCode::io, "corpus file line " + std::to_string(line_no) + " is malformed");
        records.push_back(std::move(r));
    }
    return records;
}

std::map<std::string, ReferenceSet> load_reference_sets(const std::filesystem::path& path, std::size_t hidden_dim) {
    std::map<std::string, ReferenceSet> sets;
    for (auto& r : read_corpus_file(path)) {
        auto& set = sets[r.set];
        set.requests.push_back(materialize(r, hidden_dim));
        set.labels.push_back(r.label);
        set.records.push_back(std::move(r));
    }
    return sets;
}

}  // namespace actsteer::corpus
