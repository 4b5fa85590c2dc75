#include "lscbo/harness.hpp"

#include "lscbo/errors.hpp"
#include "lscbo/problems.hpp"

#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace lscbo::harness {

namespace {

using json = nlohmann::json;

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

// Drops a trailing comment, ignoring '#' inside double-quoted strings.
std::string strip_comment(std::string_view line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) {
            quoted = !quoted;
        } else if (line[i] == '#' && !quoted) {
            return std::string(line.substr(0, i));
        }
    }
    return std::string(line);
}

bool bare_key(std::string_view key) {
    return !key.empty() && std::all_of(key.begin(), key.end(), [](char ch) {
        return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-';
    });
}

// Values are a JSON-compatible subset of TOML; single-quoted literal strings are rewritten.
json parse_value(const std::string& text, Index line) {
    std::string source = text;
    if (source.size() >= 2 && source.front() == '\'' && source.back() == '\'') {
        source = json(source.substr(1, source.size() - 2)).dump();
    }
    try {
        return json::parse(source);
    } catch (const json::parse_error&) {
        throw ConfigError("line " + std::to_string(line) + ": cannot parse value '" + text + "'");
    }
}

struct Entry {
    json value;
    Index line = 0;
};

using Table = std::vector<std::pair<std::string, Entry>>;

struct Document {
    std::vector<std::pair<std::string, Table>> tables;  // in file order; "" is the root table

    Table& table(const std::string& name) {
        for (auto& [key, t] : tables) {
            if (key == name) {
                return t;
            }
        }
        tables.emplace_back(name, Table{});
        return tables.back().second;
    }
};

Document parse_document(std::string_view text) {
    Document doc;
    doc.table("");
    std::string current;
    std::istringstream lines{std::string(text)};
    std::string raw;
    Index line = 0;
    while (std::getline(lines, raw)) {
        ++line;
        const std::string content = trim(strip_comment(raw));
        if (content.empty()) {
            continue;
        }
        if (content.front() == '[') {
            if (content.back() != ']' || content.size() < 3 || content[1] == '[') {
                throw ConfigError("line " + std::to_string(line) + ": malformed table header");
            }
            current = trim(std::string_view(content).substr(1, content.size() - 2));
            std::string_view rest = current;
            while (true) {
                const auto dot = rest.find('.');
                if (!bare_key(rest.substr(0, dot))) {
                    throw ConfigError("line " + std::to_string(line) + ": malformed table name");
                }
                if (dot == std::string_view::npos) {
                    break;
                }
                rest = rest.substr(dot + 1);
            }
            for (const auto& [name, t] : doc.tables) {
                if (name == current && !t.empty()) {
                    throw ConfigError("line " + std::to_string(line) + ": table [" + current + "] defined twice");
                }
            }
            doc.table(current);
            continue;
        }
        const auto eq = content.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line) + ": expected key = value");
        }
        const std::string key = trim(std::string_view(content).substr(0, eq));
        if (!bare_key(key)) {
            throw ConfigError("line " + std::to_string(line) + ": invalid key '" + key + "'");
        }
        Table& t = doc.table(current);
        for (const auto& [existing, entry] : t) {
            if (existing == key) {
                throw ConfigError("line " + std::to_string(line) + ": duplicate key '" + key + "'");
            }
        }
        t.emplace_back(key, Entry{parse_value(trim(std::string_view(content).substr(eq + 1)), line), line});
    }
    return doc;
}

[[noreturn]] void bad(const Entry& e, const std::string& key, const std::string& what) {
    throw ConfigError("line " + std::to_string(e.line) + ": '" + key + "' " + what);
}

Index as_index(const Entry& e, const std::string& key) {
    if (!e.value.is_number_integer()) {
        bad(e, key, "must be an integer");
    }
    return e.value.get<Index>();
}

double as_double(const Entry& e, const std::string& key) {
    if (!e.value.is_number()) {
        bad(e, key, "must be a number");
    }
    return e.value.get<double>();
}

std::string as_string(const Entry& e, const std::string& key) {
    if (!e.value.is_string()) {
        bad(e, key, "must be a string");
    }
    return e.value.get<std::string>();
}

bool as_bool(const Entry& e, const std::string& key) {
    if (!e.value.is_boolean()) {
        bad(e, key, "must be true or false");
    }
    return e.value.get<bool>();
}

std::uint64_t as_seed(const json& v, const Entry& e, const std::string& key) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        bad(e, key, "must hold non-negative integers");
    }
    return v.get<std::uint64_t>();
}

reduction::KernelKind as_kernel(const Entry& e, const std::string& key) {
    try {
        return reduction::parse_kernel_kind(as_string(e, key));
    } catch (const std::invalid_argument& err) {
        bad(e, key, err.what());
    }
}

void read_experiment(ExperimentConfig& cfg, const Table& t) {
    for (const auto& [key, e] : t) {
        if (key == "problem") {
            cfg.problem = as_string(e, key);
        } else if (key == "seeds") {
            if (!e.value.is_array()) {
                bad(e, key, "must be an array");
            }
            cfg.seeds.clear();
            for (const json& v : e.value) {
                cfg.seeds.push_back(as_seed(v, e, key));
            }
        } else if (key == "seed") {
            cfg.seeds = {as_seed(e.value, e, key)};
        } else if (key == "evals" || key == "max_evals") {
            cfg.max_evals = as_index(e, key);
        } else if (key == "batch" || key == "q") {
            cfg.batch = as_index(e, key);
        } else if (key == "init" || key == "n_init") {
            cfg.n_init = as_index(e, key);
        } else if (key == "g") {
            cfg.components = as_index(e, key);
        } else if (key == "threshold") {
            cfg.threshold = as_double(e, key);
        } else if (key == "kernel") {
            cfg.kernel = as_kernel(e, key);
        } else if (key == "out") {
            cfg.out = as_string(e, key);
        } else if (key == "timing") {
            cfg.timing = as_bool(e, key);
        } else {
            bad(e, key, "is not a known experiment setting");
        }
    }
}

VariantSpec read_variant(const std::string& name, const Table& t) {
    VariantSpec v;
    v.name = name;
    bool mode_set = false;
    for (const auto& [key, e] : t) {
        if (key == "mode") {
            try {
                v.mode = optimizer::parse_mode(as_string(e, key));
            } catch (const ConfigError& err) {
                bad(e, key, err.what());
            }
            mode_set = true;
        } else if (key == "g") {
            v.components = as_index(e, key);
        } else if (key == "threshold") {
            v.threshold = as_double(e, key);
        } else if (key == "kernel") {
            v.kernel = as_kernel(e, key);
        } else if (key == "init" || key == "n_init") {
            v.n_init = as_index(e, key);
        } else {
            bad(e, key, "is not a known variant setting");
        }
    }
    if (!mode_set) {
        v.mode = optimizer::parse_mode(name);
    }
    return v;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
    const Document doc = parse_document(text);
    ExperimentConfig cfg;
    for (const auto& [name, table] : doc.tables) {
        if (name.empty() || name == "experiment") {
            read_experiment(cfg, table);
        } else if (name.starts_with("variants.")) {
            const std::string variant = name.substr(9);
            if (variant.find('.') != std::string::npos) {
                throw ConfigError("nested variant table [" + name + "] is not supported");
            }
            cfg.variants.push_back(read_variant(variant, table));
        } else if (name != "variants") {
            throw ConfigError("unknown table [" + name + "]");
        }
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file " + path.string());
    }
    std::ostringstream text;
    text << in.rdbuf();
    try {
        return parse_config(text.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void ExperimentConfig::validate() const {
    if (problem.empty()) {
        throw ConfigError("no problem given");
    }
    (void)problems::make_problem(problem);
    if (variants.empty()) {
        throw ConfigError("at least one variant is required");
    }
    if (seeds.empty()) {
        throw ConfigError("at least one seed is required");
    }
    if (out.empty()) {
        throw ConfigError("output directory is empty");
    }
    for (std::size_t i = 0; i < variants.size(); ++i) {
        const std::string& name = variants[i].name;
        if (!bare_key(name)) {
            throw ConfigError("invalid variant name '" + name + "'");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (variants[j].name == name) {
                throw ConfigError("duplicate variant '" + name + "'");
            }
        }
        resolve(variants[i], seeds.front()).validate();
    }
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (std::find(seeds.begin(), seeds.begin() + static_cast<std::ptrdiff_t>(i), seeds[i]) !=
            seeds.begin() + static_cast<std::ptrdiff_t>(i)) {
            throw ConfigError("duplicate seed " + std::to_string(seeds[i]));
        }
    }
}

optimizer::VariantConfig ExperimentConfig::resolve(const VariantSpec& variant, std::uint64_t seed) const {
    optimizer::VariantConfig c;
    c.mode = variant.mode;
    c.seed = seed;
    c.batch = batch;
    c.max_evals = max_evals;
    c.n_init = variant.n_init.value_or(n_init);
    c.kernel = variant.kernel.value_or(kernel);
    if (variant.mode != optimizer::Mode::scbo) {
        if (variant.components || variant.threshold) {
            c.components = variant.components;
            if (variant.threshold) {
                c.eigen_threshold = *variant.threshold;
            }
        } else {
            c.components = components;
            if (threshold) {
                c.eigen_threshold = *threshold;
            }
        }
    }
    return c;
}

void apply_overrides(ExperimentConfig& cfg, const Overrides& o) {
    if (o.problem) {
        cfg.problem = *o.problem;
    }
    if (!o.variants.empty()) {
        std::vector<VariantSpec> kept;
        for (const std::string& name : o.variants) {
            const auto it = std::find_if(cfg.variants.begin(), cfg.variants.end(),
                                         [&](const VariantSpec& v) { return v.name == name; });
            if (it != cfg.variants.end()) {
                kept.push_back(*it);
            } else {
                VariantSpec v;
                v.name = name;
                v.mode = optimizer::parse_mode(name);
                kept.push_back(v);
            }
        }
        cfg.variants = std::move(kept);
    }
    if (!o.seeds.empty()) {
        cfg.seeds = o.seeds;
    }
    if (o.max_evals) {
        cfg.max_evals = *o.max_evals;
    }
    if (o.batch) {
        cfg.batch = *o.batch;
    }
    if (o.n_init) {
        cfg.n_init = *o.n_init;
        for (VariantSpec& v : cfg.variants) {
            v.n_init.reset();
        }
    }
    if (o.components || o.threshold) {
        cfg.components = o.components;
        cfg.threshold = o.threshold;
        for (VariantSpec& v : cfg.variants) {
            v.components.reset();
            v.threshold.reset();
        }
    }
    if (o.kernel) {
        cfg.kernel = *o.kernel;
        for (VariantSpec& v : cfg.variants) {
            v.kernel.reset();
        }
    }
    if (o.out) {
        cfg.out = *o.out;
    }
    if (o.timing) {
        cfg.timing = *o.timing;
    }
}

}  // namespace lscbo::harness
