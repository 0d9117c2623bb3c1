#include "deltamask/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "deltamask/errors.hpp"

namespace deltamask {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& expected,
                            const std::string& got) {
    throw ConfigError("config key '" + key + "': expected " + expected + ", got '" + got + "'");
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        unsigned long long x = std::stoull(v, &used);
        if (used != v.size()) bad_value(key, "unsigned integer", v);
        return x;
    } catch (const ConfigError&) {
        throw;
    } catch (...) {
        bad_value(key, "unsigned integer", v);
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        double x = std::stod(v, &used);
        if (used != v.size()) bad_value(key, "number", v);
        return x;
    } catch (const ConfigError&) {
        throw;
    } catch (...) {
        bad_value(key, "number", v);
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    bad_value(key, "true or false", v);
}

std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) bad_value(key, "comma-separated widths", v);
        out.push_back(parse_uint(key, item));
    }
    if (out.empty()) bad_value(key, "comma-separated widths", v);
    return out;
}

void set_key(ExperimentConfig& c, const std::string& key, const std::string& value) {
    if (key == "federation.clients") c.clients = parse_uint(key, value);
    else if (key == "federation.rounds") c.rounds = parse_uint(key, value);
    else if (key == "federation.participation") c.participation = parse_double(key, value);
    else if (key == "federation.local_epochs") c.local_epochs = parse_uint(key, value);
    else if (key == "federation.lambda0") c.lambda0 = parse_double(key, value);
    else if (key == "federation.seed") c.seed = parse_uint(key, value);
    else if (key == "data.kind") {
        if (value == "blobs") c.data_kind = DataKind::Blobs;
        else if (value == "rings") c.data_kind = DataKind::Rings;
        else bad_value(key, "blobs or rings", value);
    } else if (key == "data.classes") c.classes = parse_uint(key, value);
    else if (key == "data.clusters_per_class") c.clusters_per_class = parse_uint(key, value);
    else if (key == "data.feature_dim") c.feature_dim = parse_uint(key, value);
    else if (key == "data.train_samples") c.train_samples = parse_uint(key, value);
    else if (key == "data.test_samples") c.test_samples = parse_uint(key, value);
    else if (key == "data.noise") c.noise = parse_double(key, value);
    else if (key == "data.dirichlet_alpha") c.dirichlet_alpha = parse_double(key, value);
    else if (key == "model.hidden") c.hidden = parse_size_list(key, value);
    else if (key == "model.probe_epochs") c.probe_epochs = parse_uint(key, value);
    else if (key == "model.probe_lr") c.probe_lr = parse_double(key, value);
    else if (key == "training.lr") c.lr = parse_double(key, value);
    else if (key == "training.batch_size") c.batch_size = parse_uint(key, value);
    else if (key == "training.kappa_start") c.kappa_start = parse_double(key, value);
    else if (key == "training.kappa_end") c.kappa_end = parse_double(key, value);
    else if (key == "training.kappa_mode") {
        if (value == "cosine") c.kappa_mode = KappaMode::Cosine;
        else if (value == "constant") c.kappa_mode = KappaMode::Constant;
        else bad_value(key, "cosine or constant", value);
    } else if (key == "filter.bits_per_entry") c.bits_per_entry =
        static_cast<std::uint32_t>(parse_uint(key, value));
    else if (key == "filter.arity") c.arity = static_cast<std::uint32_t>(parse_uint(key, value));
    else if (key == "output.transport") {
        if (value == "filter") c.transport = Transport::Filter;
        else if (value == "dense") c.transport = Transport::Dense;
        else if (value == "bypass") c.transport = Transport::Bypass;
        else bad_value(key, "filter, dense or bypass", value);
    } else if (key == "output.eval") {
        if (value == "sampled") c.eval_mode = EvalMode::Sampled;
        else if (value == "thresholded") c.eval_mode = EvalMode::Thresholded;
        else bad_value(key, "sampled or thresholded", value);
    } else if (key == "output.dump_updates") c.dump_updates = parse_bool(key, value);
    else if (key == "output.dump_png") c.dump_png = parse_bool(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
}

constexpr const char* kSections[] = {"federation", "data", "model", "training", "filter",
                                     "output"};

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig config;
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(lineno) + ": unterminated section");
            section = trim(line.substr(1, line.size() - 2));
            bool known = false;
            for (const char* s : kSections) known = known || section == s;
            if (!known) throw ConfigError("unknown config section '" + section + "'");
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (section.empty())
            throw ConfigError("config key '" + key + "' appears before any [section]");
        set_key(config, section + "." + key, value);
    }
    return config;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void apply_override(ExperimentConfig& config, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
    std::string key = trim(assignment.substr(0, eq));
    std::string value = trim(assignment.substr(eq + 1));
    if (key.find('.') == std::string::npos)
        throw ConfigError("override key '" + key + "' must be section-qualified");
    set_key(config, key, value);
}

std::string dump_config(const ExperimentConfig& c) {
    auto num = [](double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.10g", v);
        return std::string(buf);
    };
    std::string hidden;
    for (std::size_t i = 0; i < c.hidden.size(); ++i) {
        if (i) hidden += ',';
        hidden += std::to_string(c.hidden[i]);
    }
    std::string out;
    out += "[federation]\n";
    out += "clients = " + std::to_string(c.clients) + "\n";
    out += "rounds = " + std::to_string(c.rounds) + "\n";
    out += "participation = " + num(c.participation) + "\n";
    out += "local_epochs = " + std::to_string(c.local_epochs) + "\n";
    out += "lambda0 = " + num(c.lambda0) + "\n";
    out += "seed = " + std::to_string(c.seed) + "\n";
    out += "\n[data]\n";
    out += std::string("kind = ") + (c.data_kind == DataKind::Blobs ? "blobs" : "rings") + "\n";
    out += "classes = " + std::to_string(c.classes) + "\n";
    out += "clusters_per_class = " + std::to_string(c.clusters_per_class) + "\n";
    out += "feature_dim = " + std::to_string(c.feature_dim) + "\n";
    out += "train_samples = " + std::to_string(c.train_samples) + "\n";
    out += "test_samples = " + std::to_string(c.test_samples) + "\n";
    out += "noise = " + num(c.noise) + "\n";
    out += "dirichlet_alpha = " + num(c.dirichlet_alpha) + "\n";
    out += "\n[model]\n";
    out += "hidden = " + hidden + "\n";
    out += "probe_epochs = " + std::to_string(c.probe_epochs) + "\n";
    out += "probe_lr = " + num(c.probe_lr) + "\n";
    out += "\n[training]\n";
    out += "lr = " + num(c.lr) + "\n";
    out += "batch_size = " + std::to_string(c.batch_size) + "\n";
    out += "kappa_start = " + num(c.kappa_start) + "\n";
    out += "kappa_end = " + num(c.kappa_end) + "\n";
    out += std::string("kappa_mode = ") +
           (c.kappa_mode == KappaMode::Cosine ? "cosine" : "constant") + "\n";
    out += "\n[filter]\n";
    out += "bits_per_entry = " + std::to_string(c.bits_per_entry) + "\n";
    out += "arity = " + std::to_string(c.arity) + "\n";
    out += "\n[output]\n";
    out += std::string("transport = ") +
           (c.transport == Transport::Filter
                ? "filter"
                : (c.transport == Transport::Dense ? "dense" : "bypass")) +
           "\n";
    out += std::string("eval = ") +
           (c.eval_mode == EvalMode::Sampled ? "sampled" : "thresholded") + "\n";
    out += std::string("dump_updates = ") + (c.dump_updates ? "true" : "false") + "\n";
    out += std::string("dump_png = ") + (c.dump_png ? "true" : "false") + "\n";
    return out;
}

}  // namespace deltamask
