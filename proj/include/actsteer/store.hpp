#pragma once

// Versioned little-endian binary files for direction fields and steering
// vector sets.
//
//   offset  field
//   0       magic "ACTSTEER" (8 bytes)
//   8       version u16, kind u16 (0 direction_field, 1 steering_vectors)
//   12      hidden_dim u32, token_count u32, num_layers u32, num_steps u32
//   28      layer indices u32[num_layers], step indices u32[num_steps]
//           attribute_id: u32 byte length + UTF-8 bytes
//           k u32 (0 for direction fields)
//           checksum u64: FNV-1a over the payload bytes
//           payload float32, (layer, step, token, hidden) for fields and
//           (layer, step, hidden) for vector sets
//
// Files are written to a temporary sibling and renamed into place. A JSON
// sidecar with the same basename echoes the header for humans.

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "actsteer/extract.hpp"
#include "actsteer/search.hpp"

namespace actsteer::store {

inline constexpr char kMagic[8] = {'A', 'C', 'T', 'S', 'T', 'E', 'E', 'R'};
inline constexpr std::uint16_t kVersion = 1;

enum class Kind : std::uint16_t { direction_field = 0, steering_vectors = 1 };

struct Header {
    std::uint16_t version = kVersion;
    Kind kind = Kind::direction_field;
    std::uint32_t hidden_dim = 0;
    std::uint32_t token_count = 0;
    std::vector<std::uint32_t> layers;
    std::vector<std::uint32_t> steps;
    std::string attribute_id;
    std::uint32_t k = 0;
    std::uint64_t checksum = 0;

    std::size_t payload_floats() const noexcept;
};

std::vector<std::uint8_t> serialize(const extract::DirectionField& field);
std::vector<std::uint8_t> serialize(const search::SteeringVectorSet& vectors);

using Object = std::variant<extract::DirectionField, search::SteeringVectorSet>;

// Validates magic, version, layout and checksum. Truncated or padded files
// fail the checksum; a grid with no cells fails with ErrorCode::empty_grid.
Object deserialize(const std::vector<std::uint8_t>& bytes);
Header parse_header(const std::vector<std::uint8_t>& bytes);

void save(const std::filesystem::path& path, const extract::DirectionField& field);
void save(const std::filesystem::path& path, const search::SteeringVectorSet& vectors);

Object load(const std::filesystem::path& path);
// Throw ErrorCode::kind_mismatch when the file holds the other kind.
extract::DirectionField load_direction_field(const std::filesystem::path& path);
search::SteeringVectorSet load_steering_vectors(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& path);

// Writes bytes to a temporary file next to path and renames it into place.
void write_atomic(const std::filesystem::path& path, const std::string& bytes);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

std::string kind_name(Kind kind);

}  // namespace actsteer::store
