#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "mfgcap/config.hpp"
#include "mfgcap/errors.hpp"

using namespace mfgcap;
using nlohmann::json;

namespace {

json minimal() {
    return json::parse(R"({
        "price": {"type": "marginal_capacity", "M": 300, "p0": 30, "p1": 27500, "r": 1, "D": 1500},
        "grid": {"T": 1, "N": 50},
        "initial": {"mu0": 1000}
    })");
}

std::string error_key(const json& doc) {
    try {
        parse_config(doc);
    } catch (const ConfigError& e) {
        return e.key();
    }
    return "<none>";
}

}  // namespace

TEST_CASE("minimal scenario gets documented defaults") {
    const RunConfig c = parse_config(minimal());
    CHECK(c.market.delta == 0.005);
    CHECK(c.market.c_i == 37.35);
    CHECK(c.grid.steps == 50);
    CHECK(c.mu0 == 1000.0);
    CHECK(!c.planner);
    CHECK(!c.demand);
    CHECK(c.training.batch == 2000);
}

TEST_CASE("errors name the offending key") {
    json d = minimal();
    d["grid"]["steps"] = 3;
    CHECK(error_key(d) == "grid.steps");

    d = minimal();
    d["bogus"] = 1;
    CHECK(error_key(d) == "bogus");

    d = minimal();
    d.erase("initial");
    CHECK(error_key(d) == "initial");

    d = minimal();
    d["training"] = {{"batch", "many"}};
    CHECK(error_key(d) == "training.batch");

    d = minimal();
    d["price"]["type"] = "auction";
    CHECK(error_key(d) == "price.type");

    d = minimal();
    d["planner"] = {{"lambda_d", -1.0}, {"S", 500.0}};
    CHECK(error_key(d).rfind("planner", 0) == 0);

    d = minimal();
    d["market"] = {{"c_a", 0.0}};
    CHECK(error_key(d).find("c_a") != std::string::npos);
}

TEST_CASE("planner scenario requires planner and demand sections") {
    const RunConfig c = parse_config(minimal());
    try {
        stackelberg_scenario(c);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.key() == "planner");
    }
    json d = minimal();
    d["market"] = {{"sigma0", 1.0}};
    d["planner"] = {{"lambda_d", 5}, {"S", 500}};
    try {
        stackelberg_scenario(parse_config(d));
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.key() == "demand");
    }
    d["demand"] = {{"type", "constant"}, {"D", 1500}};
    CHECK(stackelberg_scenario(parse_config(d)).planner.subsidy_bound == 500.0);
}

TEST_CASE("the resolved echo parses back to the same configuration") {
    json d = minimal();
    d["market"] = {{"sigma0", 1.0}};
    d["demand"] = {{"type", "mean_reverting"}, {"a", 1.0}, {"b0", 1500}, {"b1", 0}, {"b2", 0}, {"D0", 1000}};
    d["planner"] = {{"lambda_d", 5}, {"S", 500}};
    d["training"] = {{"batch", 64}, {"hidden", {8, 4}}, {"lr_milestones", json::array({json::array({0.5, 1e-4})})},
                     {"drift", "pseudocode"}, {"subsidy_formula", "undivided"}};
    d["seeds"] = {{"seed", 9}};
    const json echo = to_json(parse_config(d));
    CHECK(to_json(parse_config(echo)) == echo);
    CHECK(echo["training"]["hidden"] == json({8, 4}));
    CHECK(echo["seeds"]["seed"] == 9);
    CHECK(echo["training"]["drift"] == "pseudocode");
}

TEST_CASE("malformed and missing files are configuration errors") {
    const auto dir = std::filesystem::temp_directory_path() / "mfgcap_config_test";
    std::filesystem::create_directories(dir);
    {
        std::ofstream(dir / "bad.json") << "{ \"grid\": ";
    }
    CHECK_THROWS_AS(load_config(dir / "bad.json"), ConfigError);
    CHECK_THROWS_AS(load_config(dir / "absent.json"), ConfigError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("every preset parses") {
    const std::filesystem::path presets = MFGCAP_PRESET_DIR;
    std::size_t n = 0;
    for (const auto& entry : std::filesystem::directory_iterator(presets)) {
        if (entry.path().extension() != ".json") continue;
        CAPTURE(entry.path().string());
        const RunConfig c = load_config(entry.path());
        if (c.planner) CHECK_NOTHROW(stackelberg_scenario(c));
        else CHECK_NOTHROW(mfg_scenario(c));
        ++n;
    }
    CHECK(n >= 20);
}
