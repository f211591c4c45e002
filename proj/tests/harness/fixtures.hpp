#pragma once

// Text fixtures, one case per block:
//
//   case <name>
//   <key>: 1 2 3 | 4 5 6     rows separated by '|'
//   end
//
// Numbers are written with 17 significant digits so they read back exactly.

#include <map>
#include <string>
#include <vector>

#include "oracles.hpp"

namespace harness {

struct Case {
    std::string name;
    std::vector<std::pair<std::string, Rows>> entries;  // file order

    const Rows& rows(const std::string& key) const;
    Vec vec(const std::string& key) const;  // single-row entry
    double scalar(const std::string& key) const;
    bool has(const std::string& key) const;
    // All rows entries named prefix.0, prefix.1, ...
    std::vector<Rows> set(const std::string& prefix) const;

    void put(const std::string& key, Rows value) { entries.emplace_back(key, std::move(value)); }
    void put(const std::string& key, const Vec& value) { put(key, Rows{value}); }
    void put(const std::string& key, double value) { put(key, Rows{{value}}); }
};

std::string render_cases(const std::vector<Case>& cases);
std::vector<Case> parse_cases(const std::string& text);
std::vector<Case> load_cases(const std::string& path);
const Case& find_case(const std::vector<Case>& cases, const std::string& name);

// The derived cases, recomputed from the oracles.
std::vector<Case> derived_cases();

}  // namespace harness
