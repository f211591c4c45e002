#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "actsteer/kernels.hpp"

using namespace actsteer;

namespace {

std::vector<const kernels::KernelTable*> simd_tables() {
    std::vector<const kernels::KernelTable*> out;
    if (auto* t = kernels::avx2_table()) out.push_back(t);
    if (auto* t = kernels::neon_table()) out.push_back(t);
    return out;
}

std::vector<double> random_values(std::mt19937_64& rng, std::size_t n) {
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<double> v(n);
    for (double& x : v) x = d(rng);
    return v;
}

// Relative error bound for a length-n reduction in float64.
double tolerance(std::size_t n, double magnitude) { return 1e-14 * static_cast<double>(n + 1) * (magnitude + 1.0); }

}  // namespace

TEST_CASE("scalar kernels match hand-computed values") {
    const auto& k = kernels::scalar_table();
    const double a[] = {1, 2, 3};
    const double b[] = {4, -5, 6};
    CHECK(k.dot(a, b, 3) == 12.0);
    CHECK(k.sum_squares(a, 3) == 14.0);
    double y[] = {1, 1, 1};
    k.axpy(2.0, a, y, 3);
    CHECK(y[0] == 3.0);
    CHECK(y[2] == 7.0);
    k.scale(0.5, y, 3);
    CHECK(y[1] == 2.5);
    const double w[] = {1, 0, 2, 0, 1, -1};  // [[1, 0, 2], [0, 1, -1]]
    double out[2];
    k.gemv(w, a, out, 2, 3);
    CHECK(out[0] == 7.0);
    CHECK(out[1] == -1.0);
    CHECK(k.dot(a, b, 0) == 0.0);
}

TEST_CASE("SIMD kernels agree with the scalar reference on every length") {
    const auto tables = simd_tables();
    if (tables.empty()) {
        MESSAGE("no SIMD variant on this CPU; scalar only");
        return;
    }
    std::mt19937_64 rng(42);
    const auto& ref = kernels::scalar_table();
    for (const auto* t : tables) {
        CAPTURE(kernels::backend_name(t->backend));
        for (std::size_t n = 0; n <= 67; ++n) {
            CAPTURE(n);
            const auto a = random_values(rng, n);
            const auto b = random_values(rng, n);
            const double mag = std::sqrt(ref.sum_squares(a.data(), n) * ref.sum_squares(b.data(), n));
            CHECK(std::abs(t->dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <= tolerance(n, mag));
            const double ss = ref.sum_squares(a.data(), n);
            CHECK(std::abs(t->sum_squares(a.data(), n) - ss) <= tolerance(n, ss));

            auto y1 = b, y2 = b;
            ref.axpy(-0.75, a.data(), y1.data(), n);
            t->axpy(-0.75, a.data(), y2.data(), n);
            for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 1e-15 * (std::abs(y1[i]) + 1.0));

            auto s1 = a, s2 = a;
            ref.scale(1.25, s1.data(), n);
            t->scale(1.25, s2.data(), n);
            CHECK(s1 == s2);  // one multiply per element: exact

            for (std::size_t rows : {std::size_t{1}, std::size_t{3}, std::size_t{4}, std::size_t{9}}) {
                const auto w = random_values(rng, rows * n);
                std::vector<double> g1(rows), g2(rows);
                ref.gemv(w.data(), a.data(), g1.data(), rows, n);
                t->gemv(w.data(), a.data(), g2.data(), rows, n);
                for (std::size_t r = 0; r < rows; ++r) {
                    const double rm = std::sqrt(ref.sum_squares(w.data() + r * n, n)) * std::sqrt(ss);
                    CHECK(std::abs(g1[r] - g2[r]) <= tolerance(n, rm));
                }
            }
        }
    }
}

TEST_CASE("active table is one of the compiled variants") {
    const auto& a = kernels::active();
    const bool known = &a == &kernels::scalar_table() || &a == kernels::avx2_table() || &a == kernels::neon_table();
    CHECK(known);
    CHECK(&kernels::active() == &a);
    CHECK(kernels::backend_name(kernels::Backend::scalar) == "scalar");
}

TEST_CASE("span wrappers route through the active table") {
    std::vector<double> x{3, 4};
    CHECK(kernels::sum_squares(x) == 25.0);
    std::vector<double> y{1, 1};
    kernels::axpy(1.0, x, y);
    CHECK(y == std::vector<double>{4, 5});
}
