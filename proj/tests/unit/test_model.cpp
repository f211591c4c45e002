#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "actsteer/kernels.hpp"
#include "actsteer/model.hpp"
#include "support.hpp"

using namespace actsteer;
using namespace actsteer::model;
using test_support::code_of;

namespace {

Hook add_everywhere(std::vector<double> v) {
    return {[](const HookSite&) { return true; },
            [v](const TokenSequence& x, const HookContext& ctx) {
                TokenSequence y = x;
                for (std::size_t p = 0; p < ctx.reference_len; ++p) kernels::axpy(1.0, v, y.row(p));
                return y;
            }};
}

Hook scale_all(double a) {
    return {[](const HookSite&) { return true; },
            [a](const TokenSequence& x, const HookContext&) {
                TokenSequence y = x;
                for (double& v : y.values()) v *= a;
                return y;
            }};
}

Hook identity_hook() {
    return {[](const HookSite&) { return true; }, [](const TokenSequence& x, const HookContext&) { return x; }};
}

}  // namespace

TEST_CASE("config validation") {
    ModelConfig c = test_support::small_config();
    CHECK_NOTHROW(c.validate());
    c.hidden_dim = 1;
    CHECK(code_of([&] { c.validate(); }) == ErrorCode::invalid_argument);
    c = test_support::small_config();
    c.num_layers = 0;
    CHECK(code_of([&] { build_toy_model(c); }) == ErrorCode::invalid_argument);
    c = test_support::small_config();
    c.num_steps = 0;
    CHECK(code_of([&] { build_toy_model(c); }) == ErrorCode::invalid_argument);
}

TEST_CASE("step index from time") {
    CHECK(step_index_for_time(0.0, 32) == 0);
    CHECK(step_index_for_time(0.999 / 32, 32) == 0);
    CHECK(step_index_for_time(1.0 / 32, 32) == 1);
    CHECK(step_index_for_time(0.5, 32) == 16);
    CHECK(step_index_for_time(1.0, 32) == 31);
    CHECK(step_index_for_time(1.5, 32) == 31);
    CHECK(step_index_for_time(-0.1, 32) == 0);
}

TEST_CASE("grid_sites is layer-major") {
    const std::vector<std::size_t> layers{2, 0};
    const std::vector<std::size_t> steps{1, 3};
    const auto sites = grid_sites(layers, steps);
    REQUIRE(sites.size() == 4);
    CHECK(sites[0].layer_index == 2);
    CHECK(sites[0].step_index == 1);
    CHECK(sites[1].step_index == 3);
    CHECK(sites[2].layer_index == 0);
}

TEST_CASE("toy model determinism and shapes") {
    std::mt19937_64 rng(1);
    auto cfg = test_support::small_config(3, 5, 8);
    cfg.max_seq_len = 16;
    const auto a = build_toy_model(cfg);
    const auto b = build_toy_model(cfg);
    const auto req = test_support::random_request(rng, 8, 6, 10);

    std::vector<HookSite> all;
    for (std::size_t l = 0; l < 3; ++l)
        for (std::size_t s = 0; s < 5; ++s) all.push_back({l, s});
    const auto ra = generate(a, req, {}, all);
    const auto rb = generate(b, req, {}, all);
    CHECK(ra.output == rb.output);
    CHECK(ra.output.length() == 10);
    CHECK(ra.output.hidden_dim() == 8);
    REQUIRE(ra.captured.has_value());
    CHECK(ra.captured->size() == 15);
    for (const auto& [site, t] : *ra.captured) {
        CHECK(t.hidden_dim() == 8);
        CHECK(t.length() == 16);
    }
    CHECK(*ra.captured == *rb.captured);

    // a different weight seed gives a different model
    cfg.seed += 1;
    CHECK(generate(build_toy_model(cfg), req).output != ra.output);
}

TEST_CASE("single-layer model exposes one block per step") {
    std::mt19937_64 rng(2);
    const auto m = build_toy_model(test_support::small_config(1, 4, 8));
    int calls = 0;
    std::vector<Hook> hooks{{[](const HookSite&) { return true; },
                             [&calls](const TokenSequence& x, const HookContext& ctx) {
                                 CHECK(ctx.site.layer_index == 0);
                                 ++calls;
                                 return x;
                             }}};
    generate(m, test_support::random_request(rng, 8, 4, 4), hooks);
    CHECK(calls == 4);
}

TEST_CASE("capture is absent unless requested, and exact at one site") {
    std::mt19937_64 rng(3);
    const auto m = build_toy_model(test_support::small_config(2, 32, 8));
    const auto req = test_support::random_request(rng, 8, 4, 4);
    CHECK_FALSE(generate(m, req).captured.has_value());
    const std::vector<HookSite> one{{0, 0}};
    const auto r = generate(m, req, {}, one);
    REQUIRE(r.captured.has_value());
    CHECK(r.captured->size() == 1);
    CHECK(r.captured->count(HookSite{0, 0}) == 1);
}

TEST_CASE("no-op hooks leave generation bit-identical") {
    std::mt19937_64 rng(4);
    for (const auto& m : {build_toy_model(test_support::small_config()),
                          build_analytic_testbed(test_support::small_config(), 3)}) {
        const auto req = test_support::random_request(rng, 16, 7, 9);
        const auto plain = generate(m, req).output;
        const std::vector<Hook> none{{[](const HookSite&) { return false; }, scale_all(100.0).transform}};
        CHECK(generate(m, req, none).output == plain);
        const std::vector<Hook> id{identity_hook()};
        CHECK(generate(m, req, id).output == plain);
    }
}

TEST_CASE("hooks compose in registration order") {
    std::mt19937_64 rng(5);
    const auto m = build_toy_model(test_support::small_config());
    const auto req = test_support::random_request(rng, 16, 6, 6);
    std::vector<double> v(16, 0.5);
    const std::vector<Hook> add_then_scale{add_everywhere(v), scale_all(0.5)};
    const std::vector<Hook> scale_then_add{scale_all(0.5), add_everywhere(v)};
    CHECK(generate(m, req, add_then_scale).output != generate(m, req, scale_then_add).output);

    // Direct check at a single site: a capture after both hooks is not
    // available, so observe what a third hook receives.
    TokenSequence seen_as, seen_sa, original;
    auto observer = [](TokenSequence& slot) {
        return Hook{[](const HookSite& s) { return s.layer_index == 1 && s.step_index == 0; },
                    [&slot](const TokenSequence& x, const HookContext&) {
                        slot = x;
                        return x;
                    }};
    };
    const std::vector<Hook> h1{observer(original)};
    generate(m, req, h1);
    auto only_site = [](Hook h) {
        h.matches = [](const HookSite& s) { return s.layer_index == 1 && s.step_index == 0; };
        return h;
    };
    const std::vector<Hook> h2{only_site(add_everywhere(v)), only_site(scale_all(0.5)), observer(seen_as)};
    generate(m, req, h2);
    const std::vector<Hook> h3{only_site(scale_all(0.5)), only_site(add_everywhere(v)), observer(seen_sa)};
    generate(m, req, h3);
    for (std::size_t p = 0; p < 6; ++p) {
        for (std::size_t h = 0; h < 16; ++h) {
            CHECK(seen_as(p, h) == doctest::Approx(0.5 * (original(p, h) + 0.5)));
            CHECK(seen_sa(p, h) == doctest::Approx(0.5 * original(p, h) + 0.5));
        }
    }
}

TEST_CASE("capture happens before transformation") {
    std::mt19937_64 rng(6);
    const auto m = build_toy_model(test_support::small_config());
    const auto req = test_support::random_request(rng, 16, 5, 5);
    const HookSite site{2, 3};
    TokenSequence observed;
    const std::vector<Hook> hooks{
        {[site](const HookSite& s) { return s == site; },
         [&observed](const TokenSequence& x, const HookContext&) {
             observed = x;
             TokenSequence y = x;
             for (double& v : y.values()) v += 1.0;
             return y;
         }}};
    const std::vector<HookSite> cap{site};
    const auto r = generate(m, req, hooks, cap);
    CHECK(r.captured->at(site) == observed);
}

TEST_CASE("condition_dropped bypasses every hook") {
    std::mt19937_64 rng(7);
    for (const auto& m : {build_toy_model(test_support::small_config()),
                          build_analytic_testbed(test_support::small_config(), 3)}) {
        auto req = test_support::random_request(rng, 16, 6, 6);
        req.condition_dropped = true;
        const auto plain = generate(m, req).output;
        const std::vector<Hook> hooks{add_everywhere(std::vector<double>(16, 3.0)), scale_all(-2.0)};
        CHECK(generate(m, req, hooks).output == plain);
    }
}

TEST_CASE("hook errors") {
    std::mt19937_64 rng(8);
    const auto m = build_toy_model(test_support::small_config());
    const auto req = test_support::random_request(rng, 16, 4, 4);
    const std::vector<Hook> reshape{{[](const HookSite&) { return true; },
                                     [](const TokenSequence& x, const HookContext&) {
                                         return TokenSequence(x.length() + 1, x.hidden_dim());
                                     }}};
    CHECK(code_of([&] { generate(m, req, reshape); }) == ErrorCode::hook_shape_violation);
    const std::vector<Hook> nan{{[](const HookSite&) { return true; },
                                 [](const TokenSequence& x, const HookContext&) {
                                     TokenSequence y = x;
                                     y(0, 0) = NAN;
                                     return y;
                                 }}};
    CHECK(code_of([&] { generate(m, req, nan); }) == ErrorCode::non_finite);
}

TEST_CASE("generation counter") {
    std::mt19937_64 rng(9);
    const auto m = build_toy_model(test_support::small_config());
    const auto copy = m;
    const auto req = test_support::random_request(rng, 16, 4, 4);
    const auto before = m.generation_count();
    generate(m, req);
    generate(copy, req);
    CHECK(m.generation_count() == before + 2);
}

TEST_CASE("analytic testbed construction") {
    auto cfg = test_support::small_config();
    CHECK(code_of([&] { build_analytic_testbed(cfg, 16); }) == ErrorCode::invalid_argument);
    CHECK(code_of([&] { build_analytic_testbed(cfg, 0); }) == ErrorCode::invalid_argument);
    const auto m = build_analytic_testbed(cfg, 4);
    REQUIRE(m.testbed() != nullptr);
    CHECK(m.kind() == ModelKind::analytic);
    CHECK(build_toy_model(cfg).testbed() == nullptr);
    const auto& basis = m.testbed()->attribute_basis();
    REQUIRE(basis.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(l2_norm(basis[i]) == doctest::Approx(1.0).epsilon(1e-12));
        for (std::size_t j = i + 1; j < 4; ++j) CHECK(std::abs(kernels::dot(basis[i], basis[j])) < 1e-12);
    }
    CHECK(attribute_directions(m, 4) == basis);
}

TEST_CASE("seeded attribute directions on a toy model are orthonormal") {
    const auto m = build_toy_model(test_support::small_config());
    const auto d = attribute_directions(m, 5);
    REQUIRE(d.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(l2_norm(d[i]) == doctest::Approx(1.0).epsilon(1e-12));
        for (std::size_t j = i + 1; j < 5; ++j) CHECK(std::abs(kernels::dot(d[i], d[j])) < 1e-12);
    }
    CHECK(attribute_directions(m, 5) == d);
}

TEST_CASE("testbed fixed point: zero prefix and zero noise give the neutral target") {
    std::mt19937_64 rng(10);
    const auto m = build_analytic_testbed(test_support::small_config(), 3);
    auto req = test_support::random_request(rng, 16, 6, 5);
    for (double& v : req.reference_tokens.values()) v = 0.0;
    req.noise_scale = 0.0;
    const auto out = generate(m, req).output;
    const auto target = m.testbed()->neutral_target(req);
    for (std::size_t p = 0; p < out.length(); ++p) {
        CHECK(test_support::max_abs_diff(out.row(p), target) < 1e-12);
    }
}

TEST_CASE("testbed Jacobian matches finite differences") {
    std::mt19937_64 rng(11);
    const auto m = build_analytic_testbed(test_support::small_config(), 3);
    const auto req = test_support::random_request(rng, 16, 7, 6);
    const auto base = mean_token(generate(m, req).output);
    const std::vector<std::size_t> layers{0, 2};
    const std::vector<std::size_t> steps{1, 4, 5};
    const auto J = m.testbed()->prefix_shift_jacobian(layers, steps);
    REQUIRE(J.rows() == 16);

    auto response = [&](const std::vector<double>& v) {
        const std::vector<Hook> hooks{{[&](const HookSite& s) {
                                           return std::find(layers.begin(), layers.end(), s.layer_index) !=
                                                      layers.end() &&
                                                  std::find(steps.begin(), steps.end(), s.step_index) != steps.end();
                                       },
                                       add_everywhere(v).transform}};
        auto out = mean_token(generate(m, req, hooks).output);
        kernels::axpy(-1.0, base, out);
        return out;
    };

    // column-by-column finite differences rebuild J
    for (std::size_t c = 0; c < 16; ++c) {
        std::vector<double> e(16, 0.0);
        e[c] = 1.0;
        const auto col = response(e);
        for (std::size_t r = 0; r < 16; ++r) CHECK(std::abs(col[r] - J(r, c)) < 1e-6);
    }

    std::vector<double> v(16);
    std::normal_distribution<double> d;
    for (double& x : v) x = d(rng);
    const auto expected = J.apply(v);
    CHECK(test_support::max_abs_diff(response(v), expected) < 1e-6);

    // linearity for |a| <= 4
    for (double a : {-4.0, -1.5, 0.25, 2.0, 4.0}) {
        auto av = v;
        for (double& x : av) x *= a;
        auto scaled = response(v);
        for (double& x : scaled) x *= a;
        CHECK(test_support::max_abs_diff(response(av), scaled) < 1e-6);
    }
}

TEST_CASE("testbed reference Jacobian predicts a shifted reference") {
    std::mt19937_64 rng(12);
    const auto m = build_analytic_testbed(test_support::small_config(), 3);
    auto req = test_support::random_request(rng, 16, 8, 6);
    const auto base = mean_token(generate(m, req).output);
    const auto& u = m.testbed()->attribute_basis()[1];
    for (std::size_t p = 0; p < req.reference_len; ++p) kernels::axpy(2.0, u, req.reference_tokens.row(p));
    auto shifted = mean_token(generate(m, req).output);
    kernels::axpy(-1.0, base, shifted);
    auto v = u;
    for (double& x : v) x *= 2.0;
    CHECK(test_support::max_abs_diff(shifted, m.testbed()->reference_shift_jacobian().apply(v)) < 1e-6);
}
