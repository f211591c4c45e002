#include <doctest.h>

#include <cstring>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "actsteer/store.hpp"
#include "support.hpp"

using namespace actsteer;
using namespace actsteer::store;
using test_support::code_of;

namespace {

extract::DirectionField random_field(std::mt19937_64& rng, std::vector<std::size_t> layers,
                                     std::vector<std::size_t> steps, std::size_t T, std::size_t hidden) {
    extract::DirectionField f;
    f.cells = Grid<TokenSequence>(std::move(layers), std::move(steps), TokenSequence(T, hidden));
    for (auto& c : f.cells.cells) c = test_support::random_sequence(rng, T, hidden);
    f.degenerate.assign(f.cells.size(), 0);
    f.token_count = T;
    f.hidden_dim = hidden;
    f.attribute_id = "happiness";
    return f;
}

search::SteeringVectorSet random_vectors(std::mt19937_64& rng) {
    const auto f = random_field(rng, {0, 5, 10}, {2, 3}, 6, 4);
    const auto r = search::rank_probabilities({0.1, 0.5, 0.3, 0.9, 0.2, 0.4}, 3, "sadness");
    return search::build_steering_vectors(f, r, 17);
}

std::size_t payload_offset(const std::vector<std::uint8_t>& bytes) {
    const auto h = parse_header(bytes);
    return bytes.size() - h.payload_floats() * sizeof(float);
}

}  // namespace

TEST_CASE("direction field round trip") {
    std::mt19937_64 rng(1);
    auto f = random_field(rng, {0, 3}, {1, 4, 7}, 5, 6);
    f.cells.at(3, 4) = TokenSequence(5, 6);  // a degenerate cell survives the trip
    f.degenerate[4] = 1;
    const auto dir = test_support::scratch_dir("store-field");
    const auto path = dir / "field.bin";
    save(path, f);

    const auto g = load_direction_field(path);
    CHECK(g.layers() == f.layers());
    CHECK(g.steps() == f.steps());
    CHECK(g.token_count == 5);
    CHECK(g.hidden_dim == 6);
    CHECK(g.attribute_id == "happiness");
    CHECK(g.degenerate == f.degenerate);
    for (std::size_t c = 0; c < f.cells.size(); ++c) {
        for (std::size_t k = 0; k < f.cells.cells[c].size(); ++k) {
            const double a = f.cells.cells[c].values()[k];
            CHECK(g.cells.cells[c].values()[k] == static_cast<double>(static_cast<float>(a)));
        }
    }

    // canonical: save(load(save(x))) is byte-identical
    const auto path2 = dir / "field2.bin";
    save(path2, g);
    CHECK(read_file(path) == read_file(path2));

    // sidecar echoes the header
    const auto sidecar = sidecar_path(path);
    CHECK(sidecar.filename() == "field.json");
    std::ifstream in(sidecar);
    const auto j = nlohmann::json::parse(in);
    CHECK(j.at("kind") == "direction_field");
    CHECK(j.at("token_count") == 5);
    CHECK(j.at("attribute_id") == "happiness");

    // no temporary files left behind
    std::size_t files = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        (void)e;
        ++files;
    }
    CHECK(files == 4);
}

TEST_CASE("steering vector round trip") {
    std::mt19937_64 rng(2);
    const auto v = random_vectors(rng);
    const auto dir = test_support::scratch_dir("store-vectors");
    save(dir / "v.bin", v);
    const auto w = load_steering_vectors(dir / "v.bin");
    CHECK(w.layers() == v.layers());
    CHECK(w.steps() == v.steps());
    CHECK(w.k == 3);
    CHECK(w.attribute_id == "sadness");
    CHECK(w.hidden_dim == 4);
    CHECK(w.token_count == 6);
    for (std::size_t c = 0; c < v.vectors.size(); ++c)
        for (std::size_t h = 0; h < 4; ++h)
            CHECK(w.vectors.cells[c][h] == static_cast<double>(static_cast<float>(v.vectors.cells[c][h])));
    CHECK(std::holds_alternative<search::SteeringVectorSet>(load(dir / "v.bin")));
    save(dir / "w.bin", w);
    CHECK(read_file(dir / "v.bin") == read_file(dir / "w.bin"));
}

TEST_CASE("kind mismatch") {
    std::mt19937_64 rng(3);
    const auto dir = test_support::scratch_dir("store-kind");
    save(dir / "f.bin", random_field(rng, {0}, {0}, 2, 2));
    save(dir / "v.bin", random_vectors(rng));
    CHECK(code_of([&] { load_steering_vectors(dir / "f.bin"); }) == ErrorCode::kind_mismatch);
    CHECK(code_of([&] { load_direction_field(dir / "v.bin"); }) == ErrorCode::kind_mismatch);
    CHECK(code_of([&] { load(dir / "missing.bin"); }) == ErrorCode::io);
}

TEST_CASE("corrupt and malformed files") {
    std::mt19937_64 rng(4);
    const auto bytes = serialize(random_field(rng, {0, 1}, {0, 1}, 3, 4));
    CHECK_NOTHROW(deserialize(bytes));

    SUBCASE("truncation and padding") {
        for (std::size_t cut = 1; cut < 40; ++cut) {
            auto b = bytes;
            b.resize(b.size() - cut);
            const auto code = code_of([&] { deserialize(b); });
            CHECK((code == ErrorCode::checksum_mismatch || code == ErrorCode::bad_magic));
        }
        auto b = bytes;
        b.resize(b.size() - 3);
        CHECK(code_of([&] { deserialize(b); }) == ErrorCode::checksum_mismatch);
        b = bytes;
        b.push_back(0);
        CHECK(code_of([&] { deserialize(b); }) == ErrorCode::checksum_mismatch);
        CHECK(code_of([&] { deserialize({'A', 'C', 'T'}); }) == ErrorCode::bad_magic);
        CHECK(code_of([&] { deserialize({}); }) == ErrorCode::bad_magic);
    }
    SUBCASE("magic and version") {
        auto b = bytes;
        b[0] = 'X';
        CHECK(code_of([&] { deserialize(b); }) == ErrorCode::bad_magic);
        b = bytes;
        b[8] = static_cast<std::uint8_t>(kVersion + 1);
        CHECK(code_of([&] { deserialize(b); }) == ErrorCode::unsupported_version);
    }
    SUBCASE("every single-byte flip in the payload is caught") {
        const std::size_t start = payload_offset(bytes);
        for (std::size_t i = start; i < bytes.size(); ++i) {
            for (std::uint8_t mask : {0x01, 0x80, 0xff}) {
                auto b = bytes;
                b[i] ^= mask;
                CHECK(code_of([&] { deserialize(b); }) == ErrorCode::checksum_mismatch);
            }
        }
    }
    SUBCASE("random flips anywhere fail cleanly") {
        std::uniform_int_distribution<std::size_t> pos(0, bytes.size() - 1);
        std::uniform_int_distribution<int> bit(0, 7);
        for (int trial = 0; trial < 2000; ++trial) {
            auto b = bytes;
            b[pos(rng)] ^= static_cast<std::uint8_t>(1u << bit(rng));
            try {
                deserialize(b);
                // a flip inside the attribute name or checksum-neutral header bytes may still parse
            } catch (const Error&) {
            }
        }
    }
}

TEST_CASE("empty grid is written but rejected at load") {
    extract::DirectionField f;
    f.cells = Grid<TokenSequence>({0, 1}, {});
    f.token_count = 3;
    f.hidden_dim = 2;
    f.attribute_id = "x";
    const auto bytes = serialize(f);
    CHECK(parse_header(bytes).steps.empty());
    CHECK(code_of([&] { deserialize(bytes); }) == ErrorCode::empty_grid);
}

TEST_CASE("minimal file written by an independent script") {
    const auto f = load_direction_field(std::filesystem::path(ACTSTEER_FIXTURES) / "minimal_field.bin");
    CHECK(f.layers() == std::vector<std::size_t>{0});
    CHECK(f.steps() == std::vector<std::size_t>{0});
    CHECK(f.token_count == 1);
    CHECK(f.hidden_dim == 2);
    CHECK(f.attribute_id == "minimal");
    CHECK(f.at(0, 0) == TokenSequence::from_rows({{1.0, 0.0}}));
    CHECK_FALSE(f.any_degenerate());

    // and the library writes the same bytes for the same field
    CHECK(serialize(f) == read_file(std::filesystem::path(ACTSTEER_FIXTURES) / "minimal_field.bin"));
}

TEST_CASE("write_atomic replaces the target") {
    const auto dir = test_support::scratch_dir("store-atomic");
    write_atomic(dir / "a.txt", "one");
    write_atomic(dir / "a.txt", "two");
    const auto b = read_file(dir / "a.txt");
    CHECK(std::string(b.begin(), b.end()) == "two");
    CHECK(kind_name(Kind::steering_vectors) == "steering_vectors");
}
