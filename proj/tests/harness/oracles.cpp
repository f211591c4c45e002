#include "oracles.hpp"

#include <cmath>

namespace harness {

namespace {

Rows interpolate(const Rows& x, std::size_t length) {
    const std::size_t n = x.size();
    const std::size_t h = x[0].size();
    Rows out(length, Vec(h, 0.0));
    if (length == 1) {
        for (const auto& row : x)
            for (std::size_t j = 0; j < h; ++j) out[0][j] += row[j] / static_cast<double>(n);
        return out;
    }
    for (std::size_t i = 0; i < length; ++i) {
        const double pos = static_cast<double>(i) * static_cast<double>(n - 1) / static_cast<double>(length - 1);
        std::size_t lo = static_cast<std::size_t>(pos);
        if (lo > n - 1) lo = n - 1;
        const std::size_t hi = lo + 1 < n ? lo + 1 : n - 1;
        const double f = pos - static_cast<double>(lo);
        for (std::size_t j = 0; j < h; ++j) out[i][j] = (1.0 - f) * x[lo][j] + f * x[hi][j];
    }
    return out;
}

Vec unit(const Vec& s) {
    double n = 0.0;
    for (double v : s) n += v * v;
    n = std::sqrt(n);
    Vec out(s.size(), 0.0);
    if (n < 1e-8) n = 1e-8;
    for (std::size_t j = 0; j < s.size(); ++j) out[j] = s[j] / n;
    return out;
}

Rows rescale(const Rows& original, Rows modified) {
    const double a = frobenius(original);
    double b = frobenius(modified);
    if (b < 1e-8) b = 1e-8;
    for (auto& row : modified)
        for (double& v : row) v *= a / b;
    return modified;
}

void erase_rows(Rows& x, const Vec& u, double beta, std::size_t region) {
    for (std::size_t t = 0; t < region; ++t) {
        double p = 0.0;
        for (std::size_t j = 0; j < u.size(); ++j) p += u[j] * x[t][j];
        for (std::size_t j = 0; j < u.size(); ++j) x[t][j] -= beta * p * u[j];
    }
}

void add_rows(Rows& x, const Vec& u, double alpha, std::size_t region) {
    for (std::size_t t = 0; t < region; ++t)
        for (std::size_t j = 0; j < u.size(); ++j) x[t][j] += alpha * u[j];
}

}  // namespace

double frobenius(const Rows& x) {
    double s = 0.0;
    for (const auto& row : x)
        for (double v : row) s += v * v;
    return std::sqrt(s);
}

DiffMeans oracle_diffmeans(const std::vector<Rows>& neutral, const std::vector<Rows>& attribute) {
    double total = 0.0;
    for (const auto& r : neutral) total += static_cast<double>(r.size());
    for (const auto& r : attribute) total += static_cast<double>(r.size());
    const double mean_len = total / static_cast<double>(neutral.size() + attribute.size());
    // Round half to even, written out.
    double fl = std::floor(mean_len);
    const double frac = mean_len - fl;
    if (frac > 0.5 || (frac == 0.5 && std::fmod(fl, 2.0) != 0.0)) fl += 1.0;
    const auto length = static_cast<std::size_t>(fl);

    const std::size_t h = neutral[0][0].size();
    DiffMeans out;
    out.token_count = length;
    out.u.assign(length, Vec(h, 0.0));
    for (const auto& r : attribute) {
        const Rows y = interpolate(r, length);
        for (std::size_t i = 0; i < length; ++i)
            for (std::size_t j = 0; j < h; ++j) out.u[i][j] += y[i][j] / static_cast<double>(attribute.size());
    }
    for (const auto& r : neutral) {
        const Rows y = interpolate(r, length);
        for (std::size_t i = 0; i < length; ++i)
            for (std::size_t j = 0; j < h; ++j) out.u[i][j] -= y[i][j] / static_cast<double>(neutral.size());
    }
    const double n = frobenius(out.u);
    if (n < 1e-12) {
        out.degenerate = true;
        for (auto& row : out.u)
            for (double& v : row) v = 0.0;
        return out;
    }
    for (auto& row : out.u)
        for (double& v : row) v /= n;
    return out;
}

std::vector<std::size_t> oracle_rank(const Vec& scores) {
    std::vector<bool> taken(scores.size(), false);
    std::vector<std::size_t> order;
    for (std::size_t round = 0; round < scores.size(); ++round) {
        std::size_t best = scores.size();
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (taken[i]) continue;
            if (best == scores.size() || scores[i] > scores[best]) best = i;
        }
        taken[best] = true;
        order.push_back(best);
    }
    return order;
}

std::vector<std::size_t> oracle_rank(const std::vector<Rows>& probe_outputs,
                                     const std::function<double(const Rows&)>& score) {
    Vec scores;
    for (const auto& out : probe_outputs) scores.push_back(score(out));
    return oracle_rank(scores);
}

Rows oracle_convert(const Rows& x, const Vec& s, double alpha, std::size_t region) {
    Rows y = x;
    add_rows(y, unit(s), alpha, region);
    return rescale(x, y);
}

Rows oracle_erase(const Rows& x, const Vec& s, double beta, std::size_t region) {
    Rows y = x;
    erase_rows(y, unit(s), beta, region);
    return rescale(x, y);
}

Rows oracle_replace(const Rows& x, const Vec& s1, const Vec& s2, double beta, double alpha, std::size_t region) {
    Rows y = x;
    erase_rows(y, unit(s1), beta, region);
    add_rows(y, unit(s2), alpha, region);
    return rescale(x, y);
}

Rows oracle_replace_composed(const Rows& x, const Vec& s1, const Vec& s2, double beta, double alpha,
                             std::size_t region) {
    return oracle_convert(oracle_erase(x, s1, beta, region), s2, alpha, region);
}

Rows oracle_probe(const Rows& x, const Rows& field, std::size_t token, std::size_t region) {
    Rows y = x;
    for (std::size_t t = 0; t < region; ++t)
        for (std::size_t j = 0; j < y[t].size(); ++j) y[t][j] += field[token][j];
    return rescale(x, y);
}

}  // namespace harness
