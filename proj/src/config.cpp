#include "syncmatrix/config.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>

#include "syncmatrix/errors.hpp"

namespace syncmatrix {

namespace {

const char* kKnownKeys[] = {
    "run.seed", "run.workers",
    "gen.latent_dim", "gen.raw_dim_audio", "gen.raw_dim_video", "gen.frames", "gen.count",
    "gen.noise_sigma", "gen.occlusion_prob", "gen.occlusion_len", "gen.smoothness",
    "gen.signal_scale",
    "encoder.context", "encoder.embed_dim", "encoder.hidden", "encoder.reference",
    "train.objective", "train.lr", "train.weight_decay", "train.batch", "train.epochs", "train.patience",
    "train.val_fraction", "train.margin",
    "eval.methods", "eval.frames", "eval.trials", "eval.clips_per_trial",
    "saliency.clip_id", "saliency.class",
    "paths.out", "paths.out_dir", "paths.dataset", "paths.encoder", "paths.classifier",
    "paths.model",
};

// per-frame-length model paths, e.g. models.encoder_15
const std::regex kModelKeyPattern("^models\\.(encoder|classifier|e2e)_[0-9]+$");

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::validate_key(const std::string& dotted) const {
    for (const char* k : kKnownKeys)
        if (dotted == k) return;
    if (std::regex_match(dotted, kModelKeyPattern)) return;
    throw ConfigError("unknown configuration key '" + dotted + "'");
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config file '" + path + "'");
    RunConfig cfg;
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty())
            throw ConfigError(path + ":" + std::to_string(lineno) + ": key outside a section");
        cfg.set(section + "." + key, value);
    }
    return cfg;
}

void RunConfig::set(const std::string& dotted, const std::string& value) {
    validate_key(dotted);
    values_[dotted] = value;
}

bool RunConfig::has(const std::string& dotted) const { return values_.count(dotted) != 0; }

std::string RunConfig::get_string(const std::string& dotted, const std::string& fallback) const {
    validate_key(dotted);
    const auto it = values_.find(dotted);
    const std::string v = it == values_.end() ? fallback : it->second;
    resolved_[dotted] = v;
    return v;
}

std::string RunConfig::require_string(const std::string& dotted) const {
    validate_key(dotted);
    const auto it = values_.find(dotted);
    if (it == values_.end()) throw ConfigError("missing required configuration key '" + dotted + "'");
    resolved_[dotted] = it->second;
    return it->second;
}

double RunConfig::get_double(const std::string& dotted, double fallback) const {
    const auto it = values_.find(dotted);
    if (it == values_.end()) {
        resolved_[dotted] = std::to_string(fallback);
        validate_key(dotted);
        return fallback;
    }
    try {
        const double v = std::stod(it->second);
        resolved_[dotted] = it->second;
        return v;
    } catch (const std::exception&) {
        throw ConfigError("bad numeric value for '" + dotted + "': " + it->second);
    }
}

std::int64_t RunConfig::get_int(const std::string& dotted, std::int64_t fallback) const {
    const auto it = values_.find(dotted);
    if (it == values_.end()) {
        resolved_[dotted] = std::to_string(fallback);
        validate_key(dotted);
        return fallback;
    }
    try {
        const std::int64_t v = std::stoll(it->second);
        resolved_[dotted] = it->second;
        return v;
    } catch (const std::exception&) {
        throw ConfigError("bad integer value for '" + dotted + "': " + it->second);
    }
}

std::size_t RunConfig::get_size(const std::string& dotted, std::size_t fallback) const {
    const std::int64_t v = get_int(dotted, static_cast<std::int64_t>(fallback));
    if (v < 0) throw ConfigError("negative value for '" + dotted + "'");
    return static_cast<std::size_t>(v);
}

std::uint64_t RunConfig::get_u64(const std::string& dotted, std::uint64_t fallback) const {
    const auto it = values_.find(dotted);
    if (it == values_.end()) {
        resolved_[dotted] = std::to_string(fallback);
        validate_key(dotted);
        return fallback;
    }
    try {
        const std::uint64_t v = std::stoull(it->second);
        resolved_[dotted] = it->second;
        return v;
    } catch (const std::exception&) {
        throw ConfigError("bad integer value for '" + dotted + "': " + it->second);
    }
}

bool RunConfig::get_bool(const std::string& dotted, bool fallback) const {
    const auto it = values_.find(dotted);
    if (it == values_.end()) {
        resolved_[dotted] = fallback ? "true" : "false";
        validate_key(dotted);
        return fallback;
    }
    std::string v = it->second;
    std::transform(v.begin(), v.end(), v.begin(), ::tolower);
    resolved_[dotted] = v;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("bad boolean value for '" + dotted + "': " + it->second);
}

std::vector<std::string> RunConfig::get_list(const std::string& dotted,
                                             const std::vector<std::string>& fallback) const {
    validate_key(dotted);
    const auto it = values_.find(dotted);
    std::string joined;
    if (it == values_.end()) {
        for (std::size_t i = 0; i < fallback.size(); ++i)
            joined += (i ? "," : "") + fallback[i];
    } else {
        joined = it->second;
    }
    resolved_[dotted] = joined;
    std::vector<std::string> out;
    std::stringstream ss(joined);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

void RunConfig::write_resolved(const std::string& path) const {
    // unread-but-set keys are still part of the effective configuration
    std::map<std::string, std::string> all = resolved_;
    for (const auto& [k, v] : values_) all.emplace(k, v);

    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    std::string section;
    for (const auto& [k, v] : all) {
        const auto dot = k.find('.');
        const std::string sec = k.substr(0, dot);
        if (sec != section) {
            if (!section.empty()) os << '\n';
            os << '[' << sec << "]\n";
            section = sec;
        }
        os << k.substr(dot + 1) << '=' << v << '\n';
    }
    if (!os) throw IoError("write failed for '" + path + "'");
}

}  // namespace syncmatrix
