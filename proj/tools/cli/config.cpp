#include "config.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "actsteer/error.hpp"

namespace actsteer::cli {

namespace {

[[noreturn]] void bad_value(const std::string& name, const std::vector<std::string>& values, const std::string& want) {
    std::string joined;
    for (const auto& v : values) joined += (joined.empty() ? "" : " ") + v;
    throw Error(ErrorCode::config, name + " = '" + joined + "': expected " + want);
}

const std::string& single(const std::string& name, const std::vector<std::string>& values, const std::string& want) {
    if (values.size() != 1) bad_value(name, values, want);
    return values.front();
}

template <typename T>
T parse_number(const std::string& name, const std::vector<std::string>& values, const std::string& want) {
    const auto& s = single(name, values, want);
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) bad_value(name, values, want);
    return v;
}

std::size_t parse_size(const std::string& n, const std::vector<std::string>& v) {
    return parse_number<std::size_t>(n, v, "a non-negative integer");
}

double parse_real(const std::string& n, const std::vector<std::string>& v) {
    const double x = parse_number<double>(n, v, "a number");
    if (!std::isfinite(x)) bad_value(n, v, "a finite number");
    return x;
}

std::string join(const std::vector<std::string>& items, const char* sep = ",") {
    std::string out;
    for (const auto& s : items) out += (out.empty() ? "" : sep) + s;
    return out;
}

struct Field {
    const char* section;
    const char* key;
    std::function<void(RunConfig&, const std::string&, const std::vector<std::string>&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field size_field(const char* section, const char* key, T RunConfig::*group, std::size_t T::*member) {
    return {section, key, [=](RunConfig& c, const std::string& n, const auto& v) { c.*group.*member = parse_size(n, v); },
            [=](const RunConfig& c) { return std::to_string(c.*group.*member); }};
}

template <typename T>
Field real_field(const char* section, const char* key, T RunConfig::*group, double T::*member) {
    return {section, key, [=](RunConfig& c, const std::string& n, const auto& v) { c.*group.*member = parse_real(n, v); },
            [=](const RunConfig& c) { return format_double(c.*group.*member); }};
}

Field top_size(const char* section, const char* key, std::size_t RunConfig::*member) {
    return {section, key, [=](RunConfig& c, const std::string& n, const auto& v) { c.*member = parse_size(n, v); },
            [=](const RunConfig& c) { return std::to_string(c.*member); }};
}

Field top_real(const char* section, const char* key, double RunConfig::*member) {
    return {section, key, [=](RunConfig& c, const std::string& n, const auto& v) { c.*member = parse_real(n, v); },
            [=](const RunConfig& c) { return format_double(c.*member); }};
}

Field top_string(const char* section, const char* key, std::string RunConfig::*member) {
    return {section, key, [=](RunConfig& c, const std::string&, const auto& v) { c.*member = join(v); },
            [=](const RunConfig& c) { return c.*member; }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        {"model", "kind",
         [](RunConfig& c, const std::string& n, const auto& v) {
             const auto& s = single(n, v, "toy or analytic");
             if (s == "toy") c.model_kind = model::ModelKind::toy;
             else if (s == "analytic") c.model_kind = model::ModelKind::analytic;
             else bad_value(n, v, "toy or analytic");
         },
         [](const RunConfig& c) { return std::string(c.model_kind == model::ModelKind::toy ? "toy" : "analytic"); }},
        size_field("model", "num_layers", &RunConfig::model, &model::ModelConfig::num_layers),
        size_field("model", "hidden_dim", &RunConfig::model, &model::ModelConfig::hidden_dim),
        size_field("model", "num_steps", &RunConfig::model, &model::ModelConfig::num_steps),
        size_field("model", "max_seq_len", &RunConfig::model, &model::ModelConfig::max_seq_len),
        {"model", "seed",
         [](RunConfig& c, const std::string& n, const auto& v) {
             c.model.seed = parse_number<std::uint64_t>(n, v, "an unsigned integer");
         },
         [](const RunConfig& c) { return std::to_string(c.model.seed); }},
        {"model", "attributes", [](RunConfig& c, const std::string&, const auto& v) { c.attributes = v; },
         [](const RunConfig& c) { return join(c.attributes); }},

        size_field("corpus", "m_neutral", &RunConfig::corpus, &corpus::CorpusSpec::m_neutral),
        size_field("corpus", "n_attribute", &RunConfig::corpus, &corpus::CorpusSpec::n_attribute),
        {"corpus", "attribute_id",
         [](RunConfig& c, const std::string& n, const auto& v) { c.corpus.attribute_id = single(n, v, "one label"); },
         [](const RunConfig& c) { return c.corpus.attribute_id; }},
        real_field("corpus", "attribute_strength", &RunConfig::corpus, &corpus::CorpusSpec::attribute_strength),
        {"corpus", "length_min",
         [](RunConfig& c, const std::string& n, const auto& v) { c.corpus.length_range.min = parse_size(n, v); },
         [](const RunConfig& c) { return std::to_string(c.corpus.length_range.min); }},
        {"corpus", "length_max",
         [](RunConfig& c, const std::string& n, const auto& v) { c.corpus.length_range.max = parse_size(n, v); },
         [](const RunConfig& c) { return std::to_string(c.corpus.length_range.max); }},
        size_field("corpus", "output_len", &RunConfig::corpus, &corpus::CorpusSpec::output_len),
        size_field("corpus", "condition_len", &RunConfig::corpus, &corpus::CorpusSpec::condition_len),
        real_field("corpus", "base_scale", &RunConfig::corpus, &corpus::CorpusSpec::base_scale),
        real_field("corpus", "noise_scale", &RunConfig::corpus, &corpus::CorpusSpec::noise_scale),
        top_real("corpus", "min_confidence", &RunConfig::min_confidence),

        top_real("oracle", "calibration_strength", &RunConfig::calibration_strength),

        top_size("search", "k", &RunConfig::k),
        {"search", "step_mode",
         [](RunConfig& c, const std::string& n, const auto& v) {
             const auto& s = single(n, v, "per_step or collapsed");
             if (s == "per_step") c.step_mode = extract::StepMode::per_step;
             else if (s == "collapsed") c.step_mode = extract::StepMode::collapsed;
             else bad_value(n, v, "per_step or collapsed");
         },
         [](const RunConfig& c) {
             return std::string(c.step_mode == extract::StepMode::per_step ? "per_step" : "collapsed");
         }},

        {"steer", "mode",
         [](RunConfig& c, const std::string& n, const auto& v) {
             c.mode = steer::parse_mode(single(n, v, "convert, erase, replace or multi"));
         },
         [](const RunConfig& c) { return steer::mode_name(c.mode); }},
        top_real("steer", "alpha", &RunConfig::alpha),
        top_real("steer", "beta", &RunConfig::beta),
        top_string("steer", "layers", &RunConfig::layers),
        top_string("steer", "steps", &RunConfig::steps),
        {"steer", "region",
         [](RunConfig& c, const std::string& n, const auto& v) {
             const auto& s = single(n, v, "prefix or full");
             if (s == "prefix") c.region = steer::Region::reference_prefix;
             else if (s == "full") c.region = steer::Region::full_sequence;
             else bad_value(n, v, "prefix or full");
         },
         [](const RunConfig& c) {
             return std::string(c.region == steer::Region::reference_prefix ? "prefix" : "full");
         }},
        top_real("steer", "epsilon", &RunConfig::epsilon),
        top_size("steer", "eval_count", &RunConfig::eval_count),

        {"sweep", "axis",
         [](RunConfig& c, const std::string& n, const auto& v) {
             const auto& s = single(n, v, "k, layers, steps or alpha");
             if (s != "k" && s != "layers" && s != "steps" && s != "alpha") bad_value(n, v, "k, layers, steps or alpha");
             c.axis = s;
         },
         [](const RunConfig& c) { return c.axis; }},

        {"run", "out", [](RunConfig& c, const std::string& n, const auto& v) { c.out = single(n, v, "one path"); },
         [](const RunConfig& c) { return c.out.string(); }},
        {"run", "seed",
         [](RunConfig& c, const std::string& n, const auto& v) {
             c.seed = parse_number<std::uint64_t>(n, v, "an unsigned integer");
         },
         [](const RunConfig& c) { return std::to_string(c.seed); }},
        top_size("run", "threads", &RunConfig::threads),
    };
    return table;
}

}  // namespace

std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

void set_value(RunConfig& config, const std::string& section, const std::string& key,
               const std::vector<std::string>& values) {
    for (const auto& f : fields()) {
        if (section == f.section && key == f.key) {
            f.set(config, section + "." + key, values);
            return;
        }
    }
    throw Error(ErrorCode::config, "unknown config key '" + section + "." + key + "'");
}

void apply_config_text(RunConfig& config, std::istream& in, const std::string& origin) {
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigINI().from_config(in);
    } catch (const CLI::Error& e) {
        throw Error(ErrorCode::config, origin + ": " + e.what());
    }
    for (const auto& item : items) {
        if (item.name == "++" || item.name == "--") continue;  // section open/close markers
        if (item.parents.size() != 1) {
            throw Error(ErrorCode::config, origin + ": key '" + item.name + "' must sit inside one [section]");
        }
        try {
            set_value(config, item.parents.front(), item.name, item.inputs);
        } catch (const Error& e) {
            throw Error(ErrorCode::config, origin + ": " + e.what());
        }
    }
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io, "cannot read config file " + path.string());
    apply_config_text(config, in, path.string());
}

std::string render_config(const RunConfig& config) {
    std::ostringstream os;
    os << "# actsteer effective configuration\n";
    std::string section;
    for (const auto& f : fields()) {
        if (section != f.section) {
            section = f.section;
            os << "\n[" << section << "]\n";
        }
        os << f.key << " = " << f.get(config) << '\n';
    }
    return os.str();
}

void validate(const RunConfig& config) {
    try {
        config.model.validate();
        config.corpus.validate(config.model.max_seq_len);
    } catch (const Error& e) {
        throw Error(ErrorCode::config, e.what());
    }
    if (config.attributes.empty()) throw Error(ErrorCode::config, "model.attributes must name at least one attribute");
    for (std::size_t i = 0; i < config.attributes.size(); ++i) {
        const auto& a = config.attributes[i];
        if (a.empty() || a == "neutral") throw Error(ErrorCode::config, "attribute label '" + a + "' is not allowed");
        for (std::size_t j = 0; j < i; ++j) {
            if (config.attributes[j] == a) throw Error(ErrorCode::config, "attribute '" + a + "' listed twice");
        }
    }
    if (config.model_kind == model::ModelKind::analytic && config.attributes.size() >= config.model.hidden_dim) {
        throw Error(ErrorCode::config, "the analytic testbed needs fewer attributes than hidden_dim");
    }
    if (config.attributes.size() > config.model.hidden_dim) {
        throw Error(ErrorCode::config, "more attributes than hidden_dim");
    }
    if (!(config.calibration_strength > 0.0)) {
        throw Error(ErrorCode::config, "oracle.calibration_strength must be positive");
    }
    if (config.k == 0) throw Error(ErrorCode::config, "search.k must be >= 1");
    if (!(config.min_confidence >= 0.0 && config.min_confidence <= 1.0)) {
        throw Error(ErrorCode::config, "corpus.min_confidence must lie in [0, 1]");
    }
    if (config.eval_count == 0) throw Error(ErrorCode::config, "steer.eval_count must be >= 1");
    if (!(config.epsilon > 0.0)) throw Error(ErrorCode::config, "steer.epsilon must be positive");
}

}  // namespace actsteer::cli
