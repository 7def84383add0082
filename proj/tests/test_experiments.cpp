#include "gilt/experiments.hpp"
#include "gilt/parallel.hpp"

#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

using namespace gilt;
using nlohmann::json;

namespace {

ExperimentConfig small_config(const std::string& scenario, json params) {
    json j = std::move(params);
    j["scenario"] = scenario;
    j["master_seed"] = 12345;
    j["grid_n"] = 256;
    return ExperimentConfig::from_json(j);
}

}  // namespace

TEST_SUITE("experiments") {

TEST_CASE("scenario list is alphabetical and contains the required names") {
    auto scenarios = list_scenarios();
    std::vector<std::string> names;
    for (const auto& s : scenarios) names.push_back(s.name);
    CHECK(std::is_sorted(names.begin(), names.end()));
    for (const char* required : {"gram-fuzz", "moments", "quadrature", "continuity", "bound-2.1",
                                 "u-moments", "identity-B1"})
        CHECK(std::count(names.begin(), names.end(), required) == 1);
}

TEST_CASE("config validation") {
    CHECK_THROWS_WITH_AS(ExperimentConfig::from_json(json{{"scenario", "nope"}}),
                         doctest::Contains("valid scenarios"), std::invalid_argument);
    CHECK_THROWS_AS(ExperimentConfig::from_json(json::array()), std::invalid_argument);
    CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"grid_n", 8}}), std::invalid_argument);

    // unknown scenario parameter is rejected before any computation
    auto cfg = small_config("gram-fuzz", json{{"bogus_knob", 3}});
    CHECK_THROWS_WITH_AS(run_scenario(cfg), doctest::Contains("valid parameters"),
                         std::invalid_argument);
}

TEST_CASE("operator factory: all kinds plus error reporting") {
    Grid g(64);
    CHECK(operator_from_json(g, json{{"kind", "identity"}}).label() == "identity");
    CHECK(operator_from_json(g, json{{"kind", "scaled_identity"}, {"c", 2.0}}).operator_norm() ==
          doctest::Approx(2.0));
    json span = json::array({json{{"type", "constant"}}});
    OperatorSpec br =
        operator_from_json(g, json{{"kind", "complement_projection"}, {"span", span}});
    CHECK(br.kernel_basis().size() == 1);
    json diag = {{"kind", "diagonal"},
                 {"basis", json::array({json{{"type", "sine"}, {"k", 1}}})},
                 {"values", json::array({0.5})}};
    CHECK(operator_from_json(g, diag).has_exact_covariance());
    json comp = {{"kind", "compose"},
                 {"outer", json{{"kind", "scaled_identity"}, {"c", 2.0}}},
                 {"inner", json{{"kind", "scaled_identity"}, {"c", 3.0}}}};
    CHECK(operator_from_json(g, comp).operator_norm() == doctest::Approx(6.0));

    CHECK_THROWS_WITH_AS(operator_from_json(g, json{{"kind", "mystery"}}),
                         doctest::Contains("valid kinds"), std::invalid_argument);
    json bad_fn = {{"kind", "complement_projection"},
                   {"span", json::array({json{{"type", "mystery"}}})}};
    CHECK_THROWS_WITH_AS(operator_from_json(g, bad_fn), doctest::Contains("valid types"),
                         std::invalid_argument);
}

TEST_CASE("csv bodies are byte-identical across reruns and thread counts") {
    auto cfg = small_config("identity-B1", json{{"instances", 300}, {"fuzz_grid_n", 16}});
    auto rows1 = run_scenario(cfg);
    int saved = parallel::max_threads();
    parallel::set_max_threads(1);
    auto rows2 = run_scenario(cfg);
    parallel::set_max_threads(4);
    auto rows3 = run_scenario(cfg);
    parallel::set_max_threads(saved);
    CHECK(csv_body(rows1) == csv_body(rows2));
    CHECK(csv_body(rows1) == csv_body(rows3));
    CHECK(csv_body(rows1).find("identity-B1") != std::string::npos);

    // different seed changes the body (the seed column at minimum)
    json j2{{"scenario", "identity-B1"}, {"master_seed", 999},
            {"instances", 300}, {"fuzz_grid_n", 16}, {"grid_n", 256}};
    auto rows4 = run_scenario(ExperimentConfig::from_json(j2));
    CHECK(csv_body(rows1) != csv_body(rows4));
}

TEST_CASE("csv writer emits body plus sidecar metadata") {
    auto cfg = small_config("identity-B1", json{{"instances", 200}, {"fuzz_grid_n", 8}});
    auto rows = run_scenario(cfg);
    std::string path = "/tmp/gilt_test_out/identity-B1.csv";
    write_csv(path, rows, 0.25);
    std::ifstream body(path);
    REQUIRE(body.good());
    std::string header;
    std::getline(body, header);
    CHECK(header == "scenario,verifies,params,estimate,std_error,oracle,pass,seed");
    std::ifstream meta(path + ".meta.json");
    REQUIRE(meta.good());
    json m = json::parse(meta);
    CHECK(m.contains("wall_seconds"));
    CHECK(m.contains("threads"));
}

TEST_CASE("scenario coverage manifest") {
    // Each verified claim must be exercised by at least one scenario; run the
    // scenario set at reduced sizes and collect the anchor slugs.
    std::map<std::string, json> cheap = {
        {"bound-2.1", {{"reps", 400}, {"p_max", 2}}},
        {"continuity", {{"reps", 200}}},
        {"gram-fuzz", {{"instances", 200}, {"fuzz_grid_n", 12}}},
        {"identity-B1", {{"instances", 200}, {"fuzz_grid_n", 12}}},
        {"integrator-def",
         {{"reps", 400}, {"instances", 20}, {"cov_grid_n", 64}, {"cov_reps", 2000}}},
        {"kernel-structure", {{"rotations", 5}, {"t_samples", 20}, {"reps", 300}}},
        {"localtime-moments", {{"reps", 300}, {"n_samples", 20000}, {"p_max", 1}}},
        {"moments", {{"n_samples", 20000}, {"p_max", 2}}},
        {"quadrature", {{"p", 2}, {"n_base", 2000}}},
        {"u-moments", {{"reps", 300}, {"q_max", 2}, {"u_grid_n", 1024}}},
    };
    std::set<std::string> slugs;
    for (const auto& [name, params] : cheap) {
        auto rows = run_scenario(small_config(name, params));
        CHECK(!rows.empty());
        for (const auto& r : rows) {
            CHECK(!r.verifies.empty());
            slugs.insert(r.verifies);
        }
    }
    for (const char* anchor :
         {"integrator-definition", "white-noise-representation", "covariance-formula",
          "mollified-local-time", "step-kernel-jumps", "bridge-process",
          "local-time-moment-bound", "integral-convergence", "det-perturbation-expansion",
          "wiener-local-time-moments", "bridge-local-time-moments", "gram-lower-bound",
          "operator-continuity", "max-comparison", "u-integrated-moments",
          "projection-identity", "difference-identity", "hadamard-bound", "step-bound-witness",
          "projection-ratio-positivity", "zero-variance-control"}) {
        INFO(anchor);
        CHECK(slugs.count(anchor) == 1);
    }
}

}  // TEST_SUITE
