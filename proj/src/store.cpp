#include "actsteer/store.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include <json.hpp>

#include "actsteer/error.hpp"
#include "actsteer/hash.hpp"

namespace actsteer::store {

namespace {

class Writer {
public:
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f32(double v) {
        const float f = static_cast<float>(v);
        std::uint32_t bits = 0;
        std::memcpy(&bits, &f, 4);
        u32(bits);
    }
    void raw(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        bytes_.insert(bytes_.end(), p, p + n);
    }
    std::vector<std::uint8_t>& bytes() noexcept { return bytes_; }

private:
    void put(std::uint64_t v, int width) {
        for (int i = 0; i < width; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> bytes_;
};

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    std::uint64_t uint(int width) {
        need(static_cast<std::size_t>(width));
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(width);
        return v;
    }
    std::uint16_t u16() { return static_cast<std::uint16_t>(uint(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
    std::uint64_t u64() { return uint(8); }
    std::string string(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::size_t position() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (remaining() < n) throw Error(ErrorCode::checksum_mismatch, "checksum mismatch: file is truncated");
    }
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

std::uint32_t narrow(std::size_t v, const char* what) {
    if (v > std::numeric_limits<std::uint32_t>::max()) {
        throw Error(ErrorCode::io, std::string("header overflow: ") + what + " does not fit in 32 bits");
    }
    return static_cast<std::uint32_t>(v);
}

std::vector<std::uint32_t> narrow_all(const std::vector<std::size_t>& v, const char* what) {
    std::vector<std::uint32_t> out;
    for (auto x : v) out.push_back(narrow(x, what));
    return out;
}

std::vector<std::uint8_t> encode(Header header, const std::vector<double>& payload) {
    if (payload.size() != header.payload_floats()) {
        throw Error(ErrorCode::shape_mismatch, "payload size does not match the header dimensions");
    }
    Writer body;
    for (double v : payload) {
        if (!std::isfinite(static_cast<float>(v))) throw Error(ErrorCode::non_finite, "value not representable as float32");
        body.f32(v);
    }
    header.checksum = fnv1a(body.bytes());

    Writer w;
    w.raw(kMagic, sizeof kMagic);
    w.u16(header.version);
    w.u16(static_cast<std::uint16_t>(header.kind));
    w.u32(header.hidden_dim);
    w.u32(header.token_count);
    w.u32(narrow(header.layers.size(), "layer count"));
    w.u32(narrow(header.steps.size(), "step count"));
    for (auto l : header.layers) w.u32(l);
    for (auto s : header.steps) w.u32(s);
    w.u32(narrow(header.attribute_id.size(), "attribute_id length"));
    w.raw(header.attribute_id.data(), header.attribute_id.size());
    w.u32(header.k);
    w.u64(header.checksum);
    auto& out = w.bytes();
    out.insert(out.end(), body.bytes().begin(), body.bytes().end());
    return out;
}

Header read_header(Reader& r, const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        throw Error(ErrorCode::bad_magic, "bad magic: not an actsteer vector file");
    }
    r.string(sizeof kMagic);
    Header h;
    h.version = r.u16();
    if (h.version != kVersion) {
        throw Error(ErrorCode::unsupported_version, "unsupported version " + std::to_string(h.version) +
                                                        " (this build reads version " + std::to_string(kVersion) + ")");
    }
    const auto kind = r.u16();
    if (kind > 1) throw Error(ErrorCode::io, "unknown object kind " + std::to_string(kind));
    h.kind = static_cast<Kind>(kind);
    h.hidden_dim = r.u32();
    h.token_count = r.u32();
    const auto num_layers = r.u32();
    const auto num_steps = r.u32();
    // Both lists must fit in what is left before reading them.
    if (r.remaining() / 4 < static_cast<std::uint64_t>(num_layers) + num_steps) {
        throw Error(ErrorCode::checksum_mismatch, "checksum mismatch: file is truncated");
    }
    for (std::uint32_t i = 0; i < num_layers; ++i) h.layers.push_back(r.u32());
    for (std::uint32_t i = 0; i < num_steps; ++i) h.steps.push_back(r.u32());
    h.attribute_id = r.string(r.u32());
    h.k = r.u32();
    h.checksum = r.u64();
    return h;
}

std::vector<std::size_t> widen(const std::vector<std::uint32_t>& v) { return {v.begin(), v.end()}; }

nlohmann::ordered_json header_json(const Header& h) {
    nlohmann::ordered_json j;
    j["magic"] = std::string(kMagic, sizeof kMagic);
    j["version"] = h.version;
    j["kind"] = kind_name(h.kind);
    j["hidden_dim"] = h.hidden_dim;
    j["token_count"] = h.token_count;
    j["layer_indices"] = h.layers;
    j["step_indices"] = h.steps;
    j["attribute_id"] = h.attribute_id;
    j["k"] = h.k;
    char checksum[19];
    std::snprintf(checksum, sizeof checksum, "0x%016llx", static_cast<unsigned long long>(h.checksum));
    j["checksum"] = checksum;
    return j;
}

void save_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes,
                nlohmann::ordered_json sidecar) {
    write_atomic(path, std::string(bytes.begin(), bytes.end()));
    write_atomic(sidecar_path(path), sidecar.dump(2) + "\n");
}

}  // namespace

std::size_t Header::payload_floats() const noexcept {
    std::size_t n = layers.size() * steps.size() * hidden_dim;
    if (kind == Kind::direction_field) n *= token_count;
    return n;
}

std::string kind_name(Kind kind) {
    return kind == Kind::direction_field ? "direction_field" : "steering_vectors";
}

std::vector<std::uint8_t> serialize(const extract::DirectionField& field) {
    Header h;
    h.kind = Kind::direction_field;
    h.hidden_dim = narrow(field.hidden_dim, "hidden_dim");
    h.token_count = narrow(field.token_count, "token_count");
    h.layers = narrow_all(field.layers(), "layer index");
    h.steps = narrow_all(field.steps(), "step index");
    h.attribute_id = field.attribute_id;
    std::vector<double> payload;
    payload.reserve(h.payload_floats());
    for (const auto& cell : field.cells.cells) {
        if (cell.length() != field.token_count || cell.hidden_dim() != field.hidden_dim) {
            throw Error(ErrorCode::shape_mismatch, "direction field cell has the wrong shape");
        }
        payload.insert(payload.end(), cell.values().begin(), cell.values().end());
    }
    return encode(std::move(h), payload);
}

std::vector<std::uint8_t> serialize(const search::SteeringVectorSet& vectors) {
    Header h;
    h.kind = Kind::steering_vectors;
    h.hidden_dim = narrow(vectors.hidden_dim, "hidden_dim");
    h.token_count = narrow(vectors.token_count, "token_count");
    h.layers = narrow_all(vectors.layers(), "layer index");
    h.steps = narrow_all(vectors.steps(), "step index");
    h.attribute_id = vectors.attribute_id;
    h.k = narrow(vectors.k, "k");
    std::vector<double> payload;
    payload.reserve(h.payload_floats());
    for (const auto& cell : vectors.vectors.cells) {
        if (cell.size() != vectors.hidden_dim) throw Error(ErrorCode::shape_mismatch, "steering vector has the wrong width");
        payload.insert(payload.end(), cell.begin(), cell.end());
    }
    return encode(std::move(h), payload);
}

Header parse_header(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    return read_header(r, bytes);
}

Object deserialize(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    const Header h = read_header(r, bytes);
    const std::size_t floats = h.payload_floats();
    if (r.remaining() != floats * 4) {
        throw Error(ErrorCode::checksum_mismatch, "checksum mismatch: payload is " + std::to_string(r.remaining()) +
                                                      " bytes, header implies " + std::to_string(floats * 4));
    }
    const std::span<const std::uint8_t> payload(bytes.data() + r.position(), floats * 4);
    if (fnv1a(payload) != h.checksum) throw Error(ErrorCode::checksum_mismatch, "checksum mismatch");
    if (h.layers.empty() || h.steps.empty()) {
        throw Error(ErrorCode::empty_grid, "empty grid: file stores " + std::to_string(h.layers.size()) +
                                               " layers and " + std::to_string(h.steps.size()) + " steps");
    }

    std::vector<double> values(floats);
    for (std::size_t i = 0; i < floats; ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(payload[4 * i + b]) << (8 * b);
        float f = 0.0f;
        std::memcpy(&f, &bits, 4);
        values[i] = f;
    }

    if (h.kind == Kind::direction_field) {
        extract::DirectionField field;
        field.cells = Grid<TokenSequence>(widen(h.layers), widen(h.steps));
        field.degenerate.assign(field.cells.size(), 0);
        field.token_count = h.token_count;
        field.hidden_dim = h.hidden_dim;
        field.attribute_id = h.attribute_id;
        const std::size_t cell_size = static_cast<std::size_t>(h.token_count) * h.hidden_dim;
        for (std::size_t c = 0; c < field.cells.size(); ++c) {
            std::vector<double> v(values.begin() + static_cast<std::ptrdiff_t>(c * cell_size),
                                  values.begin() + static_cast<std::ptrdiff_t>((c + 1) * cell_size));
            field.degenerate[c] = std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
            field.cells.cells[c] = TokenSequence(h.token_count, h.hidden_dim, std::move(v));
        }
        return field;
    }

    search::SteeringVectorSet set;
    set.vectors = Grid<std::vector<double>>(widen(h.layers), widen(h.steps));
    for (std::size_t c = 0; c < set.vectors.size(); ++c) {
        set.vectors.cells[c].assign(values.begin() + static_cast<std::ptrdiff_t>(c * h.hidden_dim),
                                    values.begin() + static_cast<std::ptrdiff_t>((c + 1) * h.hidden_dim));
    }
    set.attribute_id = h.attribute_id;
    set.report.attribute_id = h.attribute_id;
    set.hidden_dim = h.hidden_dim;
    set.token_count = h.token_count;
    set.k = h.k;
    set.provenance.k = h.k;
    return set;
}

void save(const std::filesystem::path& path, const extract::DirectionField& field) {
    const auto bytes = serialize(field);
    auto j = header_json(parse_header(bytes));
    j["step_mode"] = field.step_mode == extract::StepMode::per_step ? "per_step" : "collapsed";
    j["norm_mode"] = "unit";
    std::vector<std::size_t> degenerate;
    for (std::size_t c = 0; c < field.degenerate.size(); ++c) {
        if (field.degenerate[c]) degenerate.push_back(c);
    }
    j["degenerate_cells"] = degenerate;
    save_bytes(path, bytes, std::move(j));
}

void save(const std::filesystem::path& path, const search::SteeringVectorSet& vectors) {
    const auto bytes = serialize(vectors);
    auto j = header_json(parse_header(bytes));
    char fp[19];
    std::snprintf(fp, sizeof fp, "0x%016llx", static_cast<unsigned long long>(vectors.provenance.field_fingerprint));
    j["provenance"] = {{"field_fingerprint", fp},
                       {"probe_noise_seed", vectors.provenance.probe_noise_seed},
                       {"k", vectors.provenance.k}};
    if (!vectors.report.probabilities.empty()) {
        j["report"] = {{"probabilities", vectors.report.probabilities},
                       {"top_indices", vectors.report.top_indices},
                       {"weights", vectors.report.weights}};
    }
    save_bytes(path, bytes, std::move(j));
}

Object load(const std::filesystem::path& path) { return deserialize(read_file(path)); }

extract::DirectionField load_direction_field(const std::filesystem::path& path) {
    auto obj = load(path);
    if (auto* f = std::get_if<extract::DirectionField>(&obj)) return std::move(*f);
    throw Error(ErrorCode::kind_mismatch, "kind mismatch: " + path.string() + " holds steering_vectors, "
                                          "expected direction_field");
}

search::SteeringVectorSet load_steering_vectors(const std::filesystem::path& path) {
    auto obj = load(path);
    if (auto* s = std::get_if<search::SteeringVectorSet>(&obj)) return std::move(*s);
    throw Error(ErrorCode::kind_mismatch, "kind mismatch: " + path.string() + " holds a direction_field, "
                                          "expected steering_vectors");
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
    auto p = path;
    p.replace_extension(".json");
    if (p == path) p += ".json";
    return p;
}

void write_atomic(const std::filesystem::path& path, const std::string& bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw Error(ErrorCode::io, "cannot open " + tmp.string() + " for writing");
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        f.flush();
        if (!f) throw Error(ErrorCode::io, "failed writing " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error(ErrorCode::io, "cannot move " + tmp.string() + " to " + path.string());
    }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::io, "cannot read " + path.string());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace actsteer::store
