#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "drmpc/runner.hpp"
#include "drmpc/scenario.hpp"

using namespace drmpc;
using namespace drmpc::cli;

TEST_CASE("paper_like scenario carries the published parameters") {
    const auto s = paper_like_scenario();
    CHECK(s.horizon == 5);
    CHECK(s.alpha == doctest::Approx(0.95));
    CHECK(s.delta == doctest::Approx(0.01));
    CHECK(s.samples == 50);
    CHECK(s.gp_window == 20);
    CHECK(s.ts == doctest::Approx(0.01));
    CHECK(s.to == doctest::Approx(0.01));
    CHECK(s.vehicle.l_f == doctest::Approx(2.0));
    CHECK(s.vehicle.l_r == doctest::Approx(2.0));
    CHECK(s.vehicle.v_max == doctest::Approx(30.0));
    CHECK(s.vehicle.steer_max == doctest::Approx(M_PI / 6.0));
    CHECK(s.q_diag(0) == doctest::Approx(1.0));
    CHECK(s.r_diag(0) == doctest::Approx(0.01));
    CHECK(s.p_diag(0) == doctest::Approx(1.0));
    CHECK(s.obstacles.size() == 2);
    CHECK_NOTHROW(s.validate());
}

TEST_CASE("scenario json round-trips through the canonical form") {
    const auto s = paper_like_scenario();
    const auto back = parse_scenario(scenario_to_json(s));
    CHECK(back == s);
    CHECK(scenario_hash(back) == scenario_hash(s));
}

TEST_CASE("missing fields are reported by name") {
    const auto s = paper_like_scenario();
    auto text = scenario_to_json(s);
    // drop mpc.alpha
    const auto pos = text.find("\"alpha\"");
    REQUIRE(pos != std::string::npos);
    const auto end = text.find(',', pos);
    text.erase(pos, end - pos + 1);
    try {
        parse_scenario(text);
        FAIL("expected a validation error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("alpha") != std::string::npos);
    }
}

TEST_CASE("unknown keys warn but do not fail") {
    const auto s = paper_like_scenario();
    auto text = scenario_to_json(s);
    text.insert(text.find("\"name\""), "\"future_knob\": 42, ");
    CHECK_NOTHROW(parse_scenario(text));
}

TEST_CASE("scenario file i/o") {
    const auto s = paper_like_scenario();
    const std::string path = "test_scenario_roundtrip.scenario";
    write_scenario(s, path);
    const auto loaded = load_scenario(path);
    CHECK(loaded == s);
    std::remove(path.c_str());

    CHECK_THROWS_AS(load_scenario("does_not_exist.scenario"),
                    std::invalid_argument);
}

TEST_CASE("run reports an io error for unwritable output directories") {
    auto s = paper_like_scenario();
    s.max_time = 0.02;  // two stages
    s.obstacles.clear();
    RunOptions opts;
    opts.out_dir = "/proc/drmpc_forbidden";
    opts.log_level = 0;
    const auto result = run_scenario(s, opts);
    CHECK(result.exit_code == ExitIo);
}

TEST_CASE("sweep validates inputs and stamps a stable hash") {
    auto s = paper_like_scenario();
    s.max_time = 0.02;
    s.obstacles.clear();
    RunOptions opts;
    opts.log_level = 0;
    CHECK_THROWS_AS(sweep(s, {}, {1}, opts), std::invalid_argument);

    const auto result = sweep(s, {5e-5}, {1, 2}, opts);
    REQUIRE(result.cells.size() == 2);
    CHECK(result.cells[0].theta == doctest::Approx(5e-5));
    CHECK(result.cells[0].scenario_hash != result.cells[1].scenario_hash);
    // same theta and seed reproduce the same hash
    const auto again = sweep(s, {5e-5}, {1}, opts);
    CHECK(again.cells[0].scenario_hash == result.cells[0].scenario_hash);
}
