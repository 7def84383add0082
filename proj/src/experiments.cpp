#include "gilt/experiments.hpp"

#include "gilt/parallel.hpp"
#include "scenarios.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace gilt {

namespace {

using nlohmann::json;
using ScenarioFn = scenarios::Rows (*)(const ExperimentConfig&);

struct ScenarioEntry {
    const char* description;
    ScenarioFn fn;
};

// Alphabetical; list_scenarios and selftest iterate in this order.
const std::map<std::string, ScenarioEntry>& registry() {
    static const std::map<std::string, ScenarioEntry> reg = {
        {"bound-2.1",
         {"local-time moment bound against the concatenated-bridge comparison process",
          scenarios::bound_21}},
        {"continuity",
         {"coupled occupation-density distance decreasing along a converging operator sequence",
          scenarios::continuity}},
        {"gram-fuzz",
         {"fuzzed Gram determinant inequalities and identities", scenarios::gram_fuzz}},
        {"identity-B1",
         {"difference-basis Gram identity, worked instances plus fuzz", scenarios::identity_b1}},
        {"integrator-def",
         {"integrator quadratic bound, covariance consistency and max comparison",
          scenarios::integrator_def}},
        {"kernel-structure",
         {"kernel step/non-step split, jump points and step-span bound witness",
          scenarios::kernel_structure}},
        {"localtime-moments",
         {"path-level local-time moments against quadrature", scenarios::localtime_moments}},
        {"moments",
         {"importance-sampled moment formula against closed forms", scenarios::moments}},
        {"quadrature",
         {"standard-error scaling and rejection accounting of the simplex sampler",
          scenarios::quadrature_stability}},
        {"u-moments",
         {"level-integrated local-time moments against the increment quadrature oracle",
          scenarios::u_moments}},
    };
    return reg;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
    ExperimentConfig cfg;
    if (!j.contains("scenario") || !j["scenario"].is_string())
        throw std::invalid_argument("config: missing string field 'scenario'");
    cfg.scenario = j["scenario"].get<std::string>();
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        if (key == "scenario") continue;
        if (key == "grid_n") {
            cfg.grid_n = it.value().get<int>();
            if (cfg.grid_n < 1 || cfg.grid_n > (1 << 20))
                throw std::invalid_argument("config: grid_n out of range");
        } else if (key == "master_seed") {
            cfg.master_seed = it.value().get<std::uint64_t>();
        } else if (key == "out_dir") {
            cfg.out_dir = it.value().get<std::string>();
        } else {
            cfg.params[key] = it.value();
        }
    }
    if (!registry().count(cfg.scenario)) {
        std::string names;
        for (const auto& [name, entry] : registry()) names += (names.empty() ? "" : ", ") + name;
        throw std::invalid_argument("config: unknown scenario '" + cfg.scenario +
                                    "'; valid scenarios: " + names);
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    json j = json::parse(in);
    return from_json(j);
}

std::vector<ScenarioInfo> list_scenarios() {
    std::vector<ScenarioInfo> out;
    for (const auto& [name, entry] : registry()) out.push_back({name, entry.description});
    return out;
}

std::vector<ResultRow> run_scenario(const ExperimentConfig& config) {
    auto it = registry().find(config.scenario);
    if (it == registry().end())
        throw std::invalid_argument("run_scenario: unknown scenario " + config.scenario);
    return it->second.fn(config);
}

std::string csv_body(std::span<const ResultRow> rows) {
    std::ostringstream out;
    out << "scenario,verifies,params,estimate,std_error,oracle,pass,seed\n";
    for (const auto& r : rows) {
        out << r.scenario << ',' << r.verifies << ',' << r.params << ','
            << format_double(r.estimate) << ',' << format_double(r.std_error) << ','
            << (r.oracle ? format_double(*r.oracle) : std::string{}) << ','
            << (r.pass ? "pass" : "fail") << ',' << r.seed << '\n';
    }
    return out.str();
}

void write_csv(const std::string& path, std::span<const ResultRow> rows, double wall_seconds) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    {
        std::ofstream out(p, std::ios::binary);
        if (!out) throw std::runtime_error("write_csv: cannot open " + path);
        out << csv_body(rows);
    }
    // Timing and environment go to the sidecar so reruns keep the body stable.
    json meta;
    meta["wall_seconds"] = wall_seconds;
    meta["threads"] = parallel::max_threads();
    meta["rows"] = rows.size();
    meta["written_at_unix"] = static_cast<std::int64_t>(
        std::chrono::duration_cast<std::chrono::seconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count());
    std::ofstream meta_out(path + ".meta.json");
    meta_out << meta.dump(2) << '\n';
}

namespace {

GridFunction function_from_json(const Grid& g, const json& j) {
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
        throw std::invalid_argument("function config: expected object with string 'type'");
    std::string type = j["type"].get<std::string>();
    const int n = g.cells();
    if (type == "indicator") {
        double a = j.value("a", 0.0);
        double b = j.at("b").get<double>();
        return indicator(g, a, b);
    }
    if (type == "constant") {
        return constant_function(g, j.value("value", 1.0));
    }
    if (type == "linear") {
        double intercept = j.value("intercept", 0.0);
        double slope = j.value("slope", 1.0);
        Eigen::VectorXd c(n);
        for (int i = 0; i < n; ++i) c[i] = intercept + slope * ((i + 0.5) / n);
        return GridFunction(g, std::move(c));
    }
    if (type == "sine") {
        int k = j.value("k", 1);
        if (k < 1) throw std::invalid_argument("function config: sine needs k >= 1");
        Eigen::VectorXd c(n);
        for (int i = 0; i < n; ++i)
            c[i] = std::numbers::sqrt2 * std::sin(k * std::numbers::pi * (i + 0.5) / n);
        return GridFunction(g, std::move(c));
    }
    throw std::invalid_argument("function config: unknown type '" + type +
                                "'; valid types: constant, indicator, linear, sine");
}

std::vector<GridFunction> functions_from_json(const Grid& g, const json& j) {
    if (!j.is_array()) throw std::invalid_argument("function list config: expected an array");
    std::vector<GridFunction> out;
    for (const auto& f : j) out.push_back(function_from_json(g, f));
    return out;
}

}  // namespace

OperatorSpec operator_from_json(const Grid& g, const json& j) {
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
        throw std::invalid_argument("operator config: expected object with string 'kind'");
    std::string kind = j["kind"].get<std::string>();
    if (kind == "identity") return OperatorSpec::identity(g);
    if (kind == "scaled_identity") return OperatorSpec::scaled_identity(g, j.at("c").get<double>());
    if (kind == "complement_projection")
        return OperatorSpec::complement_projection(g, functions_from_json(g, j.at("span")));
    if (kind == "diagonal") {
        auto values = j.at("values").get<std::vector<double>>();
        return OperatorSpec::diagonal(g, functions_from_json(g, j.at("basis")), values,
                                      j.value("off_span", 1.0));
    }
    if (kind == "compose")
        return OperatorSpec::compose(operator_from_json(g, j.at("outer")),
                                     operator_from_json(g, j.at("inner")));
    if (kind == "scale")
        return OperatorSpec::scale(operator_from_json(g, j.at("of")), j.at("c").get<double>());
    throw std::invalid_argument(
        "operator config: unknown kind '" + kind +
        "'; valid kinds: compose, complement_projection, diagonal, identity, scale, scaled_identity");
}

SelftestResult selftest(std::uint64_t seed, const std::string& out_dir) {
    SelftestResult result;
    result.all_pass = true;
    auto start = std::chrono::steady_clock::now();
    for (const auto& info : list_scenarios()) {
        ExperimentConfig cfg;
        cfg.scenario = info.name;
        cfg.master_seed = seed;
        cfg.out_dir = out_dir;
        auto s0 = std::chrono::steady_clock::now();
        auto rows = run_scenario(cfg);
        double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - s0).count();
        write_csv(out_dir + "/" + info.name + ".csv", rows, wall);
        for (auto& r : rows) {
            result.all_pass = result.all_pass && r.pass;
            result.rows.push_back(std::move(r));
        }
    }
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

}  // namespace gilt
