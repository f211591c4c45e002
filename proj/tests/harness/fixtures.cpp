#include "fixtures.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace harness {

const Rows& Case::rows(const std::string& key) const {
    for (const auto& [k, v] : entries)
        if (k == key) return v;
    throw std::runtime_error("fixture " + name + " has no entry " + key);
}

Vec Case::vec(const std::string& key) const { return rows(key).at(0); }

double Case::scalar(const std::string& key) const { return rows(key).at(0).at(0); }

bool Case::has(const std::string& key) const {
    for (const auto& [k, v] : entries)
        if (k == key) return true;
    return false;
}

std::vector<Rows> Case::set(const std::string& prefix) const {
    std::vector<Rows> out;
    while (has(prefix + "." + std::to_string(out.size()))) out.push_back(rows(prefix + "." + std::to_string(out.size())));
    return out;
}

std::string render_cases(const std::vector<Case>& cases) {
    std::ostringstream os;
    os << "# Derived test cases. Regenerate with make_fixtures; do not edit by hand.\n";
    char buf[40];
    for (const auto& c : cases) {
        os << "\ncase " << c.name << '\n';
        for (const auto& [key, rows] : c.entries) {
            os << key << ':';
            for (std::size_t r = 0; r < rows.size(); ++r) {
                if (r) os << " |";
                for (double v : rows[r]) {
                    std::snprintf(buf, sizeof buf, " %.17g", v);
                    os << buf;
                }
            }
            os << '\n';
        }
        os << "end\n";
    }
    return os.str();
}

std::vector<Case> parse_cases(const std::string& text) {
    std::vector<Case> cases;
    std::istringstream in(text);
    std::string line;
    Case* open = nullptr;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("case ", 0) == 0) {
            if (open) throw std::runtime_error("fixture case " + open->name + " is missing its end line");
            cases.push_back({line.substr(5), {}});
            open = &cases.back();
            continue;
        }
        if (line == "end") {
            open = nullptr;
            continue;
        }
        const auto colon = line.find(':');
        if (!open || colon == std::string::npos) throw std::runtime_error("bad fixture line: " + line);
        Rows rows(1);
        std::istringstream values(line.substr(colon + 1));
        std::string tok;
        while (values >> tok) {
            if (tok == "|") rows.emplace_back();
            else rows.back().push_back(std::stod(tok));
        }
        open->put(line.substr(0, colon), std::move(rows));
    }
    if (open) throw std::runtime_error("fixture case " + open->name + " is missing its end line");
    return cases;
}

std::vector<Case> load_cases(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open fixture file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_cases(ss.str());
}

const Case& find_case(const std::vector<Case>& cases, const std::string& name) {
    for (const auto& c : cases)
        if (c.name == name) return c;
    throw std::runtime_error("no fixture case " + name);
}

namespace {

Case diffmeans_case(const std::string& name, const std::vector<Rows>& neutral, const std::vector<Rows>& attribute) {
    Case c{name, {}};
    for (std::size_t i = 0; i < neutral.size(); ++i) c.put("neutral." + std::to_string(i), neutral[i]);
    for (std::size_t i = 0; i < attribute.size(); ++i) c.put("attribute." + std::to_string(i), attribute[i]);
    const auto d = oracle_diffmeans(neutral, attribute);
    c.put("token_count", static_cast<double>(d.token_count));
    c.put("degenerate", d.degenerate ? 1.0 : 0.0);
    c.put("u", d.u);
    return c;
}

}  // namespace

std::vector<Case> derived_cases() {
    std::vector<Case> cases;

    cases.push_back(diffmeans_case("diffmeans_unit_vectors", {{{1, 0}}}, {{{0, 1}}}));
    const Rows t = {{1, 2, 0}, {0, 1, -1}};
    const Rows minus_t = {{-1, -2, 0}, {0, -1, 1}};
    cases.push_back(diffmeans_case("diffmeans_neutral_cancels", {t, minus_t}, {{{2, 0, 1}, {1, 1, 0}}}));
    cases.push_back(diffmeans_case("diffmeans_identical", {{{1, 2}}}, {{{1, 2}}}));
    cases.push_back(diffmeans_case("diffmeans_resampled", {{{0, 1}, {2, 1}}, {{1, 0}, {1, 1}, {0, 3}}},
                                   {{{0.5, 0}, {1, 2}, {3, 1}}, {{1, 1}, {0, 2}, {2, 2}, {-1, 0}}}));
    cases.push_back(diffmeans_case("diffmeans_half_to_even", {{{1, 0}, {0, 1}}}, {{{0, 0}, {2, 0}, {1, 1}}}));

    {
        Case c{"convert_bisect", {}};
        const Rows x = {{3, 0}};
        c.put("x", x);
        c.put("s", Vec{0, 5});
        c.put("alpha", 3.0);
        c.put("region", 1.0);
        c.put("expected", oracle_convert(x, {0, 5}, 3.0, 1));
        cases.push_back(c);
    }
    {
        Case c{"erase_annihilate", {}};
        const Rows x = {{2, 0}, {-1, 0}};
        c.put("x", x);
        c.put("s", Vec{0.5, 0});
        c.put("beta", 1.0);
        c.put("region", 2.0);
        c.put("expected", oracle_erase(x, {0.5, 0}, 1.0, 2));
        cases.push_back(c);
    }
    {
        Case c{"erase_partial", {}};
        const Rows x = {{1, 2, 2}, {0, -1, 3}, {4, 0, 1}};
        const Vec s = {1, 1, 0};
        c.put("x", x);
        c.put("s", s);
        c.put("beta", 0.5);
        c.put("region", 2.0);
        c.put("expected", oracle_erase(x, s, 0.5, 2));
        cases.push_back(c);
    }
    {
        Case c{"replace_single_renorm", {}};
        const Rows x = {{1, 0.5, -1}, {2, 1, 0}, {0, -1, 1.5}};
        const Vec s1 = {1, 2, 0};
        const Vec s2 = {0, 1, -1};
        c.put("x", x);
        c.put("s1", s1);
        c.put("s2", s2);
        c.put("beta", 2.5);
        c.put("alpha", 2.0);
        c.put("region", 2.0);
        c.put("expected", oracle_replace(x, s1, s2, 2.5, 2.0, 2));
        c.put("composed", oracle_replace_composed(x, s1, s2, 2.5, 2.0, 2));
        cases.push_back(c);
    }
    {
        Case c{"rank_ties", {}};
        const Vec scores = {0.5, 0.9, 0.5, 0.9, 0.1, 0.5};
        c.put("scores", scores);
        Vec order;
        for (auto i : oracle_rank(scores)) order.push_back(static_cast<double>(i));
        c.put("order", order);
        cases.push_back(c);
    }
    {
        Case c{"search_three_tokens", {}};
        const Vec p = {0.2, 0.8, 0.5};
        c.put("probabilities", p);
        Vec order, weights;
        double z = 0.0;
        for (auto i : oracle_rank(p)) {
            order.push_back(static_cast<double>(i));
            z += std::exp(p[i]);
        }
        for (double i : order) weights.push_back(std::exp(p[static_cast<std::size_t>(i)]) / z);
        c.put("top_indices", order);
        c.put("weights", weights);
        cases.push_back(c);
    }
    return cases;
}

}  // namespace harness
