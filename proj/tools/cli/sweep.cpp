#include "sweep.hpp"

#include <algorithm>
#include <ostream>

#include "actsteer/error.hpp"
#include "actsteer/parallel.hpp"
#include "csv.hpp"

namespace actsteer::cli {

namespace {

struct Point {
    std::string value;
    double alpha = 0.0;
    std::size_t k = 0;
    std::vector<std::size_t> layers;
    std::vector<std::size_t> steps;
};

}  // namespace

SweepReport run_sweep(const Session& session, const std::string& axis, std::ostream& log) {
    const auto& cfg = session.config;
    if (axis != "k" && axis != "layers" && axis != "steps" && axis != "alpha") {
        throw Error(ErrorCode::config, "unknown sweep axis '" + axis + "' (k, layers, steps, alpha)");
    }
    const std::string target = cfg.corpus.attribute_id;
    const auto corpus = build_corpus(session, target);
    const auto eval = evaluation_sets(session, target).neutral;
    const auto probe = probe_request(session);

    const bool per_point_grid = axis == "layers" || axis == "steps";
    const auto base_layers = resolve_layers(cfg.layers, cfg.model.num_layers);
    const auto base_steps = resolve_steps(cfg.steps, cfg.model.num_steps);
    const auto capture_layers = axis == "layers" ? steer::all_steps(cfg.model.num_layers) : base_layers;
    const auto capture_steps = axis == "steps" ? steer::all_steps(cfg.model.num_steps) : base_steps;
    const auto field = extract_field(session, corpus.neutral.survivors, corpus.attribute.survivors, capture_layers,
                                     capture_steps);
    const std::size_t k = std::min(cfg.k, field.token_count);

    std::vector<Point> points;
    if (axis == "alpha") {
        for (double a : alpha_grid()) points.push_back({format_double(a), a, k, base_layers, base_steps});
    } else if (axis == "k") {
        for (auto kk : k_grid(field.token_count)) {
            points.push_back({std::to_string(kk), cfg.alpha, kk, base_layers, base_steps});
        }
    } else if (axis == "layers") {
        for (const auto& name : layer_presets()) {
            points.push_back({name, cfg.alpha, k, resolve_layers(name, cfg.model.num_layers), base_steps});
        }
    } else {
        for (const auto& name : step_presets()) {
            points.push_back({name, cfg.alpha, k, base_layers, resolve_steps(name, cfg.model.num_steps)});
        }
    }

    search::SearchConfig search_config;
    search_config.k = k;
    search_config.probe_request = probe;
    search_config.attribute_id = target;
    search_config.threads = cfg.threads;

    // alpha and k share one probe pass; k only re-ranks its probabilities.
    search::ProbeReport shared;
    if (!per_point_grid) shared = search::run_search(session.model, field, search_config, session.oracle);

    SweepReport report;
    report.axis = axis;
    report.target = target;
    report.labels = session.oracle.labels();
    report.rows.resize(points.size());
    parallel_for(
        points.size(),
        [&](std::size_t i) {
            const auto& p = points[i];
            search::SteeringVectorSet vectors;
            if (per_point_grid) {
                const auto sub = extract::restrict(field, p.layers, p.steps);
                auto sc = search_config;
                sc.threads = 1;
                vectors = search::build_steering_vectors(sub, search::run_search(session.model, sub, sc, session.oracle),
                                                         probe.noise_seed);
            } else {
                vectors = search::build_steering_vectors(
                    field, search::rank_probabilities(shared.probabilities, p.k, target), probe.noise_seed);
            }
            steer::SteeringPlan plan;
            plan.mode = steer::Mode::convert;
            plan.strengths = {p.alpha};
            plan.layers = p.layers;
            plan.steps = p.steps;
            plan.region = cfg.region;
            plan.epsilon = cfg.epsilon;
            report.rows[i] = {p.value, mean_scores(session, eval.requests, plan, {vectors}, 1), eval.size()};
        },
        cfg.threads);

    for (const auto& row : report.rows) {
        log << "sweep " << axis << " = " << row.value << ": " << target << " "
            << format_double(row.mean_probability.at(target)) << '\n';
    }
    return report;
}

std::string sweep_csv(const SweepReport& report) {
    std::vector<std::string> header{report.axis};
    for (const auto& l : report.labels) header.push_back("p_" + l);
    header.push_back("samples");
    CsvWriter csv(header);
    for (const auto& row : report.rows) {
        std::vector<std::string> fields{row.value};
        for (const auto& l : report.labels) fields.push_back(format_double(row.mean_probability.at(l)));
        fields.push_back(std::to_string(row.samples));
        csv.row(fields);
    }
    return csv.text();
}

}  // namespace actsteer::cli
