#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gspin/cli.hpp"
#include "gspin/errors.hpp"

namespace gspin {

using nlohmann::json;

namespace {

const json& schema() {
    static const json s = json::parse(R"({
      "seed": "uint",
      "graph": {"source": "string", "dim": "uint", "lo": "number|number[]", "hi": "number|number[]",
                "spacing": "number", "intensity": "number", "seed": "uint", "path": "string", "rho": "number"},
      "scale": {"alpha_star": "number", "alpha_top": "number"},
      "field": {"drift": "string", "coupling": "string", "J": "number", "noise": "string", "M": "number"},
      "plan": {"dt": "number", "T": "number", "scheme": "string", "replicas": "uint", "p": "number",
               "record_stride": "uint"},
      "initial": {"type": "string", "value": "number", "values": "number[]", "path": "string",
                  "mean": "number", "sd": "number", "lo": "number", "hi": "number"},
      "volumes": {"radii": "number[]", "sites": "uint[][]"},
      "output": {"trajectories": "bool", "samples": "bool"},
      "converge": {"betas": "number[]", "alpha": "number", "gronwall_B": "number", "gronwall_k": "number",
                   "q": "number", "trials": "uint"},
      "gibbs": {"a": {"type": "string", "J": "number", "radius": "number"},
                "V": {"type": "string", "coeffs": "number[]"},
                "eta": "uint[]",
                "chain": {"steps": "uint", "burn_in": "uint", "step_size": "number"},
                "dlr": {"eta": "uint[]", "outer_samples": "uint", "permutations": "uint"},
                "reversibility": {"t": "number", "dt": "number", "paths": "uint", "pairs": "uint[][]",
                                  "scheme": "string"}},
      "ovs": {"matrix": {"type": "string", "B": "number", "k": "number", "c": "number", "C": "number",
                         "path": "string"},
              "q": "number", "trials": "uint", "seed": "uint",
              "k_table": {"L": "number[]", "T": "number[]", "q": "number[]", "gap": "number[]"}}
    })");
    return s;
}

bool is_uint(const json& v) { return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0); }

bool array_of(const json& v, bool (*pred)(const json&)) {
    if (!v.is_array()) return false;
    for (const auto& e : v)
        if (!pred(e)) return false;
    return true;
}

bool type_matches(const json& v, const std::string& type) {
    auto number = [](const json& e) { return e.is_number() && std::isfinite(e.get<double>()); };
    if (type == "number") return number(v);
    if (type == "uint") return is_uint(v);
    if (type == "string") return v.is_string();
    if (type == "bool") return v.is_boolean();
    if (type == "number[]") return array_of(v, [](const json& e) { return e.is_number() && std::isfinite(e.get<double>()); });
    if (type == "number|number[]") return number(v) || type_matches(v, "number[]");
    if (type == "uint[]") return array_of(v, is_uint);
    if (type == "uint[][]") return array_of(v, [](const json& e) { return array_of(e, is_uint); });
    return false;
}

void check(const json& value, const json& sch, const std::string& prefix) {
    if (!value.is_object()) throw ConfigError(prefix.empty() ? "<root>" : prefix, "expected an object");
    for (const auto& [key, v] : value.items()) {
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        if (!sch.contains(key)) throw ConfigError(path, "unknown key");
        const json& expected = sch.at(key);
        if (expected.is_object())
            check(v, expected, path);
        else if (!type_matches(v, expected.get<std::string>()))
            throw ConfigError(path, "expected " + expected.get<std::string>());
    }
}

json::json_pointer pointer(const std::string& dotted) {
    std::string p = "/";
    for (char c : dotted) p += c == '.' ? '/' : c;
    return json::json_pointer(p);
}

}  // namespace

void validate_config(const json& config) { check(config, schema(), ""); }

json load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string(), "cannot open config file");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string(), std::string("not valid JSON: ") + e.what());
    }
    validate_config(j);
    return j;
}

RunConfig::RunConfig(json config, std::filesystem::path base_dir)
    : config_(std::move(config)), resolved_(config_), base_dir_(std::move(base_dir)) {
    validate_config(config_);
}

bool RunConfig::has(const std::string& path) const { return config_.contains(pointer(path)); }

json RunConfig::get(const std::string& path, const json& fallback) const {
    const auto ptr = pointer(path);
    if (config_.contains(ptr)) return config_.at(ptr);
    resolved_[ptr] = fallback;
    return fallback;
}

json RunConfig::require(const std::string& path) const {
    const auto ptr = pointer(path);
    if (!config_.contains(ptr)) throw ConfigError(path, "required key missing");
    return config_.at(ptr);
}

std::filesystem::path RunConfig::file(const std::string& path) const {
    std::filesystem::path p = require(path).get<std::string>();
    return p.is_absolute() ? p : base_dir_ / p;
}

std::uint64_t RunConfig::seed() const { return get("seed", 0).get<std::uint64_t>(); }

namespace {

Box window_from(const RunConfig& c, std::size_t dim) {
    const json lo = c.require("graph.lo"), hi = c.require("graph.hi");
    Box b;
    if (lo.is_array() != hi.is_array()) throw ConfigError("graph.hi", "lo and hi must both be scalars or arrays");
    if (lo.is_array()) {
        b.lo = lo.get<std::vector<double>>();
        b.hi = hi.get<std::vector<double>>();
    } else {
        b = Box::cube(dim, lo.get<double>(), hi.get<double>());
    }
    b.validate();
    return b;
}

}  // namespace

GraphPtr RunConfig::graph() const {
    const double rho = require("graph.rho").get<double>();
    const std::string source = get("graph.source", "lattice").get<std::string>();
    if (source == "lattice") {
        const auto dim = get("graph.dim", 1).get<std::size_t>();
        return make_graph(make_lattice(dim, get("graph.lo", -5.0).get<double>(), get("graph.hi", 5.0).get<double>(),
                                       get("graph.spacing", 1.0).get<double>()),
                          rho);
    }
    if (source == "poisson") {
        const auto dim = get("graph.dim", 1).get<std::size_t>();
        const Box w = window_from(*this, dim);
        return make_graph(sample_poisson(require("graph.intensity").get<double>(), w,
                                         get("graph.seed", seed()).get<std::uint64_t>()),
                          rho);
    }
    if (source == "file") {
        std::ifstream in(file("graph.path"));
        if (!in) throw ConfigError("graph.path", "cannot open " + file("graph.path").string());
        if (has("graph.lo")) {
            // window dimension comes from the file's header
            std::string first;
            std::getline(in, first);
            const auto dim = static_cast<std::size_t>(std::count(first.begin(), first.end(), ','));
            in.seekg(0);
            const Box w = window_from(*this, dim);
            return make_graph(read_configuration_csv(in, &w), rho);
        }
        return make_graph(read_configuration_csv(in), rho);
    }
    throw ConfigError("graph.source", "expected lattice, poisson or file");
}

ScaleInterval RunConfig::scale() const {
    ScaleInterval s{get("scale.alpha_star", 0.0).get<double>(), get("scale.alpha_top", 1.0).get<double>()};
    s.validate();
    return s;
}

CoefficientField RunConfig::field(const GraphPtr& graph) const {
    return make_field(graph, get("field.drift", "cubic").get<std::string>(),
                      get("field.coupling", "zero").get<std::string>(), get("field.J", 0.0).get<double>(),
                      get("field.noise", "additive").get<std::string>(), get("field.M", 0.0).get<double>());
}

SimPlan RunConfig::plan() const {
    SimPlan p;
    p.dt = get("plan.dt", 1e-3).get<double>();
    p.T = get("plan.T", 1.0).get<double>();
    p.scheme = parse_scheme(get("plan.scheme", "tamed_em").get<std::string>());
    p.replicas = get("plan.replicas", 100).get<std::size_t>();
    p.master_seed = seed();
    p.p = get("plan.p", 4.0).get<double>();
    p.record_stride = get("plan.record_stride", 1).get<std::size_t>();
    return p;
}

InitialCondition RunConfig::initial(const GraphPtr& graph) const {
    const std::string type = get("initial.type", "fixed").get<std::string>();
    const std::size_t n = graph->size();
    if (type == "fixed") {
        if (has("initial.values")) {
            auto v = require("initial.values").get<std::vector<double>>();
            if (v.size() != n) throw ConfigError("initial.values", "expected " + std::to_string(n) + " values");
            return InitialCondition::fixed_values(std::move(v));
        }
        return InitialCondition::fixed_values(std::vector<double>(n, get("initial.value", 0.0).get<double>()));
    }
    if (type == "file") {
        std::ifstream in(file("initial.path"));
        if (!in) throw ConfigError("initial.path", "cannot open " + file("initial.path").string());
        return InitialCondition::fixed_values(read_seq_csv(in, graph).to_dense());
    }
    if (type == "normal")
        return InitialCondition::normal(get("initial.mean", 0.0).get<double>(), get("initial.sd", 1.0).get<double>());
    if (type == "uniform")
        return InitialCondition::uniform(get("initial.lo", -1.0).get<double>(), get("initial.hi", 1.0).get<double>());
    throw ConfigError("initial.type", "expected fixed, file, normal or uniform");
}

VolumeSequence RunConfig::volumes(const GeometricGraph& graph) const {
    if (has("volumes.radii") && has("volumes.sites")) throw ConfigError("volumes", "give radii or sites, not both");
    if (has("volumes.radii")) {
        const auto r = require("volumes.radii").get<std::vector<double>>();
        return VolumeSequence::by_radius(graph, r);
    }
    if (has("volumes.sites")) {
        auto sites = require("volumes.sites").get<std::vector<std::vector<SiteId>>>();
        return VolumeSequence(std::move(sites), graph.size());
    }
    return VolumeSequence::full(graph.size());
}

}  // namespace gspin
