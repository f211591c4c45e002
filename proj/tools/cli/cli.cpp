#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>

#include "actsteer/error.hpp"
#include "actsteer/kernels.hpp"
#include "actsteer/store.hpp"
#include "csv.hpp"
#include "pipeline.hpp"
#include "sweep.hpp"

namespace actsteer::cli {

namespace fs = std::filesystem;

namespace {

struct Flags {
    std::string command;
    std::optional<std::string> config, out, seed, mode, alpha, beta, k, layers, steps, region, axis, attribute, threads;
    std::vector<std::string> vectors;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

RunConfig effective_config(const Flags& flags) {
    RunConfig config;
    if (const char* env = std::getenv("ACTSTEER_OUT"); env && *env) config.out = env;
    if (flags.config) apply_config_file(config, *flags.config);
    const auto set = [&](const std::optional<std::string>& v, const char* section, const char* key, bool list = false) {
        if (v) set_value(config, section, key, list ? split_list(*v) : std::vector<std::string>{*v});
    };
    set(flags.out, "run", "out");
    set(flags.seed, "run", "seed");
    set(flags.threads, "run", "threads");
    set(flags.mode, "steer", "mode");
    set(flags.alpha, "steer", "alpha");
    set(flags.beta, "steer", "beta");
    set(flags.k, "search", "k");
    set(flags.layers, "steer", "layers", true);
    set(flags.steps, "steer", "steps", true);
    set(flags.region, "steer", "region");
    set(flags.axis, "sweep", "axis");
    set(flags.attribute, "corpus", "attribute_id");
    validate(config);
    return config;
}

void write_text(const fs::path& path, const std::string& text) { store::write_atomic(path, text); }

fs::path corpus_file(const RunConfig& c, const std::string& a) { return c.out / ("corpus_" + a + ".txt"); }
fs::path field_file(const RunConfig& c, const std::string& a) { return c.out / ("field_" + a + ".bin"); }
fs::path vectors_file(const RunConfig& c, const std::string& a) { return c.out / ("vectors_" + a + ".bin"); }

void require_attribute(const Session& s, const std::string& a) {
    if (!s.basis.contains(a)) throw Error(ErrorCode::config, "attribute '" + a + "' is not in model.attributes");
}

int cmd_corpus(const Session& s, std::ostream& out, std::ostream&) {
    const auto& attr = s.config.corpus.attribute_id;
    require_attribute(s, attr);
    const auto c = build_corpus(s, attr);
    corpus::write_corpus_file(corpus_file(s.config, attr), {&c.neutral.survivors, &c.attribute.survivors});
    out << "neutral survivors: " << c.neutral.kept.size() << " / " << c.requested_neutral << '\n'
        << "attribute survivors (" << attr << "): " << c.attribute.kept.size() << " / " << c.requested_attribute
        << '\n'
        << "wrote " << corpus_file(s.config, attr).string() << '\n';
    return kExitOk;
}

std::map<std::string, corpus::ReferenceSet> ensure_corpus(const Session& s, std::ostream& out, std::ostream& err) {
    const auto& attr = s.config.corpus.attribute_id;
    if (!fs::exists(corpus_file(s.config, attr))) {
        err << "no corpus file for " << attr << ", generating it\n";
        cmd_corpus(s, out, err);
    }
    return corpus::load_reference_sets(corpus_file(s.config, attr), s.config.model.hidden_dim);
}

int cmd_extract(const Session& s, std::ostream& out, std::ostream& err) {
    const auto& attr = s.config.corpus.attribute_id;
    require_attribute(s, attr);
    auto sets = ensure_corpus(s, out, err);
    const auto layers = resolve_layers(s.config.layers, s.config.model.num_layers);
    const auto steps = resolve_steps(s.config.steps, s.config.model.num_steps);
    auto field = extract_field(s, sets["neutral"], sets["attribute"], layers, steps);
    field.attribute_id = attr;
    store::save(field_file(s.config, attr), field);

    std::size_t degenerate = 0;
    for (auto d : field.degenerate) degenerate += d;
    out << "token_count: " << field.token_count << '\n'
        << "cells: " << field.cells.size() << " (" << layers.size() << " layers x " << steps.size() << " steps)\n"
        << "degenerate cells: " << degenerate << '\n'
        << "wrote " << field_file(s.config, attr).string() << '\n';
    if (field.all_degenerate()) {
        err << "error: every direction is degenerate (neutral and attribute captures coincide)\n";
        return kExitDegenerate;
    }
    return kExitOk;
}

int cmd_search(const Session& s, std::ostream& out, std::ostream& err) {
    const auto& attr = s.config.corpus.attribute_id;
    require_attribute(s, attr);
    if (!fs::exists(field_file(s.config, attr))) {
        err << "no direction field for " << attr << ", extracting it\n";
        if (const int rc = cmd_extract(s, out, err); rc != kExitOk) return rc;
    }
    const auto field = store::load_direction_field(field_file(s.config, attr));
    if (field.all_degenerate()) {
        err << "error: direction field is degenerate, nothing to search\n";
        return kExitDegenerate;
    }
    search::SearchConfig sc;
    sc.k = s.config.k;
    if (sc.k > field.token_count) {
        err << "warning: k = " << sc.k << " exceeds token_count " << field.token_count << ", using k = "
            << field.token_count << '\n';
        sc.k = field.token_count;
    }
    sc.probe_request = probe_request(s);
    sc.attribute_id = attr;
    sc.threads = s.config.threads;

    const auto before = s.model.generation_count();
    const auto report = search::run_search(s.model, field, sc, s.oracle);
    const auto generations = s.model.generation_count() - before;
    const auto vectors = search::build_steering_vectors(field, report, sc.probe_request.noise_seed);
    store::save(vectors_file(s.config, attr), vectors);

    std::vector<double> weight(field.token_count, 0.0);
    std::vector<std::string> rank(field.token_count);
    for (std::size_t j = 0; j < report.top_indices.size(); ++j) {
        weight[report.top_indices[j]] = report.weights[j];
        rank[report.top_indices[j]] = std::to_string(j + 1);
    }
    CsvWriter csv({"token", "probability", "rank", "weight"});
    for (std::size_t i = 0; i < field.token_count; ++i) {
        csv.row({std::to_string(i), format_double(report.probabilities[i]), rank[i], format_double(weight[i])});
    }
    const auto csv_path = s.config.out / ("search_" + attr + ".csv");
    write_text(csv_path, csv.text());

    out << "probes: " << field.token_count << " tokens, " << generations << " generations\n"
        << "k: " << sc.k << "\ntop indices:";
    for (auto i : report.top_indices) out << ' ' << i;
    out << "\nwrote " << vectors_file(s.config, attr).string() << "\nwrote " << csv_path.string() << '\n';
    return kExitOk;
}

int cmd_steer(const Session& s, const std::vector<std::string>& vector_files, std::ostream& out, std::ostream& err) {
    const auto& cfg = s.config;
    const std::size_t arity = steer::mode_arity(cfg.mode);
    std::vector<fs::path> files(vector_files.begin(), vector_files.end());
    if (cfg.mode == steer::Mode::replace && files.size() != 2) {
        throw Error(ErrorCode::config, "mode replace needs exactly two --vectors files (source, target), got " +
                                           std::to_string(files.size()));
    }
    if (files.empty()) {
        files.push_back(vectors_file(cfg, cfg.corpus.attribute_id));
        if (!fs::exists(files.back())) {
            err << "no steering vectors for " << cfg.corpus.attribute_id << ", searching for them\n";
            if (const int rc = cmd_search(s, out, err); rc != kExitOk) return rc;
        }
    }
    if (arity != 0 && files.size() != arity) {
        throw Error(ErrorCode::config, "mode " + steer::mode_name(cfg.mode) + " takes " + std::to_string(arity) +
                                           " --vectors file(s), got " + std::to_string(files.size()));
    }
    std::vector<search::SteeringVectorSet> vectors;
    for (const auto& f : files) {
        vectors.push_back(store::load_steering_vectors(f));
        require_attribute(s, vectors.back().attribute_id);
    }

    steer::SteeringPlan plan;
    plan.mode = cfg.mode;
    switch (cfg.mode) {
        case steer::Mode::convert:
            plan.strengths = {cfg.alpha};
            break;
        case steer::Mode::erase:
            plan.strengths = {cfg.beta};
            break;
        case steer::Mode::replace:
            plan.strengths = {cfg.beta, cfg.alpha};
            break;
        case steer::Mode::multi:
            plan.strengths.assign(vectors.size(), cfg.alpha);
            break;
    }
    plan.layers = resolve_layers(cfg.layers, cfg.model.num_layers);
    plan.steps = resolve_steps(cfg.steps, cfg.model.num_steps);
    plan.region = cfg.region;
    plan.epsilon = cfg.epsilon;
    steer::validate_plan(cfg.model, plan, vectors);

    // Adding an attribute is judged on neutral references; removing one on
    // references that carry the source attribute.
    const auto& source = vectors.front().attribute_id;
    const auto sets = evaluation_sets(s, source);
    const bool from_attribute = cfg.mode == steer::Mode::erase || cfg.mode == steer::Mode::replace;
    const auto& eval = from_attribute ? sets.attribute : sets.neutral;

    std::vector<steer::SteeredOutput> results(eval.size());
    for (std::size_t i = 0; i < eval.size(); ++i) results[i] = steer::run_plan(s.model, eval.requests[i], plan, vectors);

    const auto labels = s.oracle.labels();
    std::map<std::string, double> base_mean, steered_mean;
    CsvWriter csv({"sample", "label", "baseline", "steered", "delta"});
    nlohmann::ordered_json samples = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto base = s.oracle.score(results[i].baseline);
        const auto steered = s.oracle.score(results[i].result.output);
        for (const auto& l : labels) {
            const double b = base.at(l), t = steered.at(l);
            base_mean[l] += b / static_cast<double>(results.size());
            steered_mean[l] += t / static_cast<double>(results.size());
            csv.row({std::to_string(i), l, format_double(b), format_double(t), format_double(t - b)});
        }
        char hash[19];
        std::snprintf(hash, sizeof hash, "0x%016llx", static_cast<unsigned long long>(results[i].baseline_hash));
        samples.push_back({{"sample", i}, {"baseline_hash", hash}});
    }
    const auto stem = "steer_" + steer::mode_name(cfg.mode);
    write_text(cfg.out / (stem + ".csv"), csv.text());

    nlohmann::ordered_json record;
    record["mode"] = steer::mode_name(plan.mode);
    record["strengths"] = plan.strengths;
    record["layers"] = plan.layers;
    record["steps"] = plan.steps;
    record["region"] = plan.region == steer::Region::reference_prefix ? "prefix" : "full";
    record["epsilon"] = plan.epsilon;
    record["vectors"] = nlohmann::ordered_json::array();
    for (std::size_t e = 0; e < files.size(); ++e) {
        record["vectors"].push_back({{"file", files[e].string()}, {"attribute_id", vectors[e].attribute_id}});
    }
    record["evaluated_on"] = from_attribute ? "attribute:" + source : std::string("neutral");
    for (const auto& l : labels) {
        record["mean"][l] = {{"baseline", base_mean[l]}, {"steered", steered_mean[l]},
                             {"delta", steered_mean[l] - base_mean[l]}};
    }
    record["samples"] = samples;
    write_text(cfg.out / (stem + ".json"), record.dump(2) + "\n");

    out << "mode: " << steer::mode_name(plan.mode) << ", " << eval.size() << " references\n";
    for (const auto& v : vectors) {
        const auto& l = v.attribute_id;
        out << l << ": baseline " << format_double(base_mean[l]) << ", steered " << format_double(steered_mean[l])
            << ", delta " << format_double(steered_mean[l] - base_mean[l]) << '\n';
    }
    out << "wrote " << (cfg.out / (stem + ".csv")).string() << '\n';
    return kExitOk;
}

int cmd_sweep(const Session& s, std::ostream& out, std::ostream& err) {
    require_attribute(s, s.config.corpus.attribute_id);
    const auto report = run_sweep(s, s.config.axis, err);
    const auto path = s.config.out / ("sweep_" + s.config.axis + ".csv");
    write_text(path, sweep_csv(report));
    out << sweep_csv(report) << "wrote " << path.string() << '\n';
    return kExitOk;
}

int exit_code(ErrorCode code) {
    switch (code) {
        case ErrorCode::config:
            return kExitConfig;
        case ErrorCode::io:
        case ErrorCode::bad_magic:
        case ErrorCode::unsupported_version:
        case ErrorCode::checksum_mismatch:
        case ErrorCode::kind_mismatch:
        case ErrorCode::empty_grid:
            return kExitIo;
        case ErrorCode::degenerate_field:
            return kExitDegenerate;
        case ErrorCode::grid_mismatch:
            return kExitGridMismatch;
        default:
            return kExitFailure;
    }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Training-free activation steering for flow-matching DiT generators", "actsteer"};
    Flags flags;
    app.add_option("command", flags.command, "corpus | extract | search | steer | sweep")
        ->required()
        ->check(CLI::IsMember({"corpus", "extract", "search", "steer", "sweep"}));
    app.add_option("--config", flags.config, "config file ([section] key = value)");
    app.add_option("--out", flags.out, "output directory (default: $ACTSTEER_OUT or ./actsteer-out)");
    app.add_option("--seed", flags.seed, "run seed");
    app.add_option("--mode", flags.mode, "convert | erase | replace | multi");
    app.add_option("--alpha", flags.alpha, "steering strength");
    app.add_option("--beta", flags.beta, "erasing strength");
    app.add_option("--k", flags.k, "top-k tokens");
    app.add_option("--layers", flags.layers, "layer list or preset (default, all, shallow, middle, deep, spaced)");
    app.add_option("--steps", flags.steps, "step list or preset (all, early, middle, late, none)");
    app.add_option("--region", flags.region, "prefix | full");
    app.add_option("--axis", flags.axis, "sweep axis: k | layers | steps | alpha");
    app.add_option("--vectors", flags.vectors, "steering vector file (repeat for replace/multi)");
    app.add_option("--attribute", flags.attribute, "target attribute");
    app.add_option("--threads", flags.threads, "worker threads (0 = all cores)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, out, err);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        const RunConfig config = effective_config(flags);
        fs::create_directories(config.out);
        write_text(config.out / "config.ini", render_config(config));
        err << "actsteer " << flags.command << ": out " << config.out.string() << ", kernels "
            << kernels::backend_name(kernels::active().backend) << '\n';
        const Session session = open_session(config);
        if (flags.command == "corpus") return cmd_corpus(session, out, err);
        if (flags.command == "extract") return cmd_extract(session, out, err);
        if (flags.command == "search") return cmd_search(session, out, err);
        if (flags.command == "steer") return cmd_steer(session, flags.vectors, out, err);
        return cmd_sweep(session, out, err);
    } catch (const Error& e) {
        err << "error (" << error_code_name(e.code()) << "): " << e.what() << '\n';
        return exit_code(e.code());
    } catch (const fs::filesystem_error& e) {
        err << "error (io): " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

}  // namespace actsteer::cli
