#include "fedsup/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "fedsup/metrics.hpp"

namespace fedsup {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

long long parse_int(const std::string& key, const std::string& v) {
    long long out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
    return out;
}

double parse_float(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return out;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

struct KeyDescriptor {
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<std::pair<std::string, KeyDescriptor>>& key_table() {
    static const std::vector<std::pair<std::string, KeyDescriptor>> table = {
        {"run_name",
         {[](ExperimentConfig& c, const std::string& v) { c.run_name = v; },
          [](const ExperimentConfig& c) { return c.run_name; }}},
        {"mode",
         {[](ExperimentConfig& c, const std::string& v) {
              if (v == "federated") c.mode = RunMode::federated;
              else if (v == "centralized") c.mode = RunMode::centralized;
              else if (v == "standalone") c.mode = RunMode::standalone;
              else throw ConfigError("mode: expected federated|centralized|standalone, got '" + v + "'");
          },
          [](const ExperimentConfig& c) {
              switch (c.mode) {
                  case RunMode::federated: return std::string("federated");
                  case RunMode::centralized: return std::string("centralized");
                  default: return std::string("standalone");
              }
          }}},
        {"arch",
         {[](ExperimentConfig& c, const std::string& v) {
              if (v != "blink" && v != "landmark")
                  throw ConfigError("arch: expected blink|landmark, got '" + v + "'");
              c.arch = v;
          },
          [](const ExperimentConfig& c) { return c.arch; }}},
        {"aggregator",
         {[](ExperimentConfig& c, const std::string& v) {
              if (v == "uwaa") c.fed.aggregator = AggregatorKind::uwaa;
              else if (v == "fedavg") c.fed.aggregator = AggregatorKind::fedavg;
              else throw ConfigError("aggregator: expected uwaa|fedavg, got '" + v + "'");
          },
          [](const ExperimentConfig& c) {
              return std::string(c.fed.aggregator == AggregatorKind::uwaa ? "uwaa" : "fedavg");
          }}},
        {"K",
         {[](ExperimentConfig& c, const std::string& v) { c.fed.edges = static_cast<int>(parse_int("K", v)); },
          [](const ExperimentConfig& c) { return std::to_string(c.fed.edges); }}},
        {"N",
         {[](ExperimentConfig& c, const std::string& v) { c.fed.clients = static_cast<int>(parse_int("N", v)); },
          [](const ExperimentConfig& c) { return std::to_string(c.fed.clients); }}},
        {"C",
         {[](ExperimentConfig& c, const std::string& v) { c.fed.participation = parse_float("C", v); },
          [](const ExperimentConfig& c) { return format_double(c.fed.participation); }}},
        {"E",
         {[](ExperimentConfig& c, const std::string& v) { c.fed.local_epochs = static_cast<int>(parse_int("E", v)); },
          [](const ExperimentConfig& c) { return std::to_string(c.fed.local_epochs); }}},
        {"eta",
         {[](ExperimentConfig& c, const std::string& v) { c.fed.eta = static_cast<float>(parse_float("eta", v)); },
          [](const ExperimentConfig& c) { return format_double(static_cast<double>(c.fed.eta)); }}},
        {"M",
         {[](ExperimentConfig& c, const std::string& v) { c.fed.passes = static_cast<int>(parse_int("M", v)); },
          [](const ExperimentConfig& c) { return std::to_string(c.fed.passes); }}},
        {"epsilon",
         {[](ExperimentConfig& c, const std::string& v) { c.fed.epsilon = parse_float("epsilon", v); },
          [](const ExperimentConfig& c) { return format_double(c.fed.epsilon); }}},
        {"T",
         {[](ExperimentConfig& c, const std::string& v) { c.fed.max_rounds = static_cast<int>(parse_int("T", v)); },
          [](const ExperimentConfig& c) { return std::to_string(c.fed.max_rounds); }}},
        {"batch_size",
         {[](ExperimentConfig& c, const std::string& v) { c.fed.batch_size = static_cast<int>(parse_int("batch_size", v)); },
          [](const ExperimentConfig& c) { return std::to_string(c.fed.batch_size); }}},
        {"uwaa_literal",
         {[](ExperimentConfig& c, const std::string& v) { c.fed.uwaa_literal = parse_bool("uwaa_literal", v); },
          [](const ExperimentConfig& c) { return std::string(c.fed.uwaa_literal ? "true" : "false"); }}},
        {"persistent_buffers",
         {[](ExperimentConfig& c, const std::string& v) { c.fed.persistent_buffers = parse_bool("persistent_buffers", v); },
          [](const ExperimentConfig& c) { return std::string(c.fed.persistent_buffers ? "true" : "false"); }}},
        {"target_accuracy",
         {[](ExperimentConfig& c, const std::string& v) { c.fed.target_accuracy = parse_float("target_accuracy", v); },
          [](const ExperimentConfig& c) { return format_double(c.fed.target_accuracy); }}},
        {"checkpoint_every",
         {[](ExperimentConfig& c, const std::string& v) { c.fed.checkpoint_every = static_cast<int>(parse_int("checkpoint_every", v)); },
          [](const ExperimentConfig& c) { return std::to_string(c.fed.checkpoint_every); }}},
        {"dropout_conv",
         {[](ExperimentConfig& c, const std::string& v) { c.dropout_conv = static_cast<float>(parse_float("dropout_conv", v)); },
          [](const ExperimentConfig& c) { return format_double(static_cast<double>(c.dropout_conv)); }}},
        {"dropout_dense",
         {[](ExperimentConfig& c, const std::string& v) { c.dropout_dense = static_cast<float>(parse_float("dropout_dense", v)); },
          [](const ExperimentConfig& c) { return format_double(static_cast<double>(c.dropout_dense)); }}},
        {"samples",
         {[](ExperimentConfig& c, const std::string& v) { c.samples = static_cast<int>(parse_int("samples", v)); },
          [](const ExperimentConfig& c) { return std::to_string(c.samples); }}},
        {"image_h",
         {[](ExperimentConfig& c, const std::string& v) { c.image_h = static_cast<int>(parse_int("image_h", v)); },
          [](const ExperimentConfig& c) { return std::to_string(c.image_h); }}},
        {"image_w",
         {[](ExperimentConfig& c, const std::string& v) { c.image_w = static_cast<int>(parse_int("image_w", v)); },
          [](const ExperimentConfig& c) { return std::to_string(c.image_w); }}},
        {"noise_std",
         {[](ExperimentConfig& c, const std::string& v) { c.noise_std = static_cast<float>(parse_float("noise_std", v)); },
          [](const ExperimentConfig& c) { return format_double(static_cast<double>(c.noise_std)); }}},
        {"jitter_px",
         {[](ExperimentConfig& c, const std::string& v) { c.jitter_px = static_cast<int>(parse_int("jitter_px", v)); },
          [](const ExperimentConfig& c) { return std::to_string(c.jitter_px); }}},
        {"dataset_seed",
         {[](ExperimentConfig& c, const std::string& v) { c.dataset_seed = parse_u64("dataset_seed", v); },
          [](const ExperimentConfig& c) { return std::to_string(c.dataset_seed); }}},
        {"dataset_file",
         {[](ExperimentConfig& c, const std::string& v) { c.dataset_file = v; },
          [](const ExperimentConfig& c) { return c.dataset_file; }}},
        {"partition_mu",
         {[](ExperimentConfig& c, const std::string& v) { c.partition_mu = parse_float("partition_mu", v); },
          [](const ExperimentConfig& c) { return format_double(c.partition_mu); }}},
        {"partition_sigma",
         {[](ExperimentConfig& c, const std::string& v) { c.partition_sigma = parse_float("partition_sigma", v); },
          [](const ExperimentConfig& c) { return format_double(c.partition_sigma); }}},
        {"partition_seed",
         {[](ExperimentConfig& c, const std::string& v) { c.partition_seed = parse_u64("partition_seed", v); },
          [](const ExperimentConfig& c) { return std::to_string(c.partition_seed); }}},
        {"sigma_is_variance",
         {[](ExperimentConfig& c, const std::string& v) { c.sigma_is_variance = parse_bool("sigma_is_variance", v); },
          [](const ExperimentConfig& c) { return std::string(c.sigma_is_variance ? "true" : "false"); }}},
        {"eval_fraction",
         {[](ExperimentConfig& c, const std::string& v) { c.eval_fraction = parse_float("eval_fraction", v); },
          [](const ExperimentConfig& c) { return format_double(c.eval_fraction); }}},
        {"seeds",
         {[](ExperimentConfig& c, const std::string& v) {
              c.seeds.clear();
              for (const auto& item : split_list(v)) c.seeds.push_back(parse_u64("seeds", item));
          },
          [](const ExperimentConfig& c) {
              std::string out;
              for (std::size_t i = 0; i < c.seeds.size(); ++i) {
                  if (i) out += ",";
                  out += std::to_string(c.seeds[i]);
              }
              return out;
          }}},
        {"pretrain_epochs",
         {[](ExperimentConfig& c, const std::string& v) { c.pretrain_epochs = static_cast<int>(parse_int("pretrain_epochs", v)); },
          [](const ExperimentConfig& c) { return std::to_string(c.pretrain_epochs); }}},
    };
    return table;
}

const KeyDescriptor* find_key(const std::string& key) {
    for (const auto& [name, desc] : key_table())
        if (name == key) return &desc;
    return nullptr;
}

}  // namespace

void apply_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    const KeyDescriptor* desc = find_key(key);
    if (!desc) throw ConfigError("unknown config key '" + key + "'");
    desc->set(cfg, value);
}

void ExperimentConfig::validate() const {
    try {
        fed.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (run_name.empty() || run_name.find('/') != std::string::npos)
        throw ConfigError("run_name: must be a non-empty path component");
    if (seeds.empty()) throw ConfigError("seeds: at least one seed is required");
    if (!(eval_fraction >= 0.0 && eval_fraction < 1.0))
        throw ConfigError("eval_fraction: must be in [0,1)");
    if (!(dropout_conv >= 0.0f && dropout_conv < 1.0f))
        throw ConfigError("dropout_conv: must be in [0,1)");
    if (!(dropout_dense >= 0.0f && dropout_dense < 1.0f))
        throw ConfigError("dropout_dense: must be in [0,1)");
    if (pretrain_epochs < 0) throw ConfigError("pretrain_epochs: must be >= 0");
    if (!dataset_file.empty()) {
        if (!std::filesystem::exists(dataset_file))
            throw ConfigError("dataset_file: no such file: " + dataset_file);
    } else {
        if (samples < 1) throw ConfigError("samples: must be >= 1");
        if (image_h < 12 || image_w < 12)
            throw ConfigError("image_h/image_w: must be >= 12");
        if (noise_std < 0.0f) throw ConfigError("noise_std: must be >= 0");
        if (jitter_px < 0) throw ConfigError("jitter_px: must be >= 0");
    }
    if (partition_mu < 1.0) throw ConfigError("partition_mu: must be >= 1");
    if (partition_sigma < 0.0) throw ConfigError("partition_sigma: must be >= 0");
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
    ExperimentConfig cfg;
    std::stringstream ss(text);
    std::string line;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            apply_key(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    ExperimentConfig cfg;
    cfg.run_name = path.stem().string();
    ExperimentConfig parsed = parse_config_text(buf.str(), path.filename().string());
    if (parsed.run_name == "run") parsed.run_name = path.stem().string();
    return parsed;
}

std::string normalized_config(const ExperimentConfig& cfg) {
    std::string out;
    for (const auto& [name, desc] : key_table()) {
        out += name;
        out += " = ";
        out += desc.get(cfg);
        out += "\n";
    }
    return out;
}

std::map<std::string, std::string> config_key_values(const ExperimentConfig& cfg) {
    std::map<std::string, std::string> kv;
    for (const auto& [name, desc] : key_table()) kv[name] = desc.get(cfg);
    return kv;
}

SweepSpec load_sweep(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open sweep file: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();

    SweepSpec sweep;
    sweep.base.run_name = path.stem().string();
    std::string residual;
    std::stringstream ss(buf.str());
    std::string line;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        std::string stripped = line;
        const auto hash = stripped.find('#');
        if (hash != std::string::npos) stripped = stripped.substr(0, hash);
        stripped = trim(stripped);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.filename().string() + ":" + std::to_string(line_no) +
                              ": expected 'key = value'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key == "sweep_axis") {
            sweep.axis = value;
        } else if (key == "sweep_values") {
            sweep.values = split_list(value);
        } else {
            residual += stripped + "\n";
        }
    }
    ExperimentConfig parsed = parse_config_text(residual, path.filename().string());
    if (parsed.run_name == "run") parsed.run_name = path.stem().string();
    sweep.base = parsed;

    if (sweep.axis.empty()) throw ConfigError("sweep_axis: missing");
    if (sweep.values.empty()) throw ConfigError("sweep_values: missing or empty");
    if (!find_key(sweep.axis)) throw ConfigError("sweep_axis: unknown config key '" + sweep.axis + "'");
    for (const auto& v : sweep.values) {
        ExperimentConfig probe = sweep.base;
        apply_key(probe, sweep.axis, v);  // type-check every value up front
    }
    return sweep;
}

}  // namespace fedsup
