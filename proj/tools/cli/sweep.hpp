#pragma once

// Analysis sweeps: one steering parameter varied over a preset grid, every
// other setting taken from the run config, scored on the held-out neutral
// evaluation set.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "pipeline.hpp"

namespace actsteer::cli {

struct SweepRow {
    std::string value;                         // alpha, k, or preset name
    std::map<std::string, double> mean_probability;  // per oracle label
    std::size_t samples = 0;
};

struct SweepReport {
    std::string axis;
    std::string target;               // attribute being steered
    std::vector<std::string> labels;  // oracle labels, column order
    std::vector<SweepRow> rows;
};

// axis is one of k, layers, steps, alpha; anything else is a config error.
// Corpus and captures are shared by every point; layer and step points each
// re-run the search on their own sub-grid.
SweepReport run_sweep(const Session& session, const std::string& axis, std::ostream& log);

std::string sweep_csv(const SweepReport& report);

}  // namespace actsteer::cli
