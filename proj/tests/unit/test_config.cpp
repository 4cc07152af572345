#include <filesystem>
#include <fstream>

#include "bsmd/config.hpp"
#include "bsmd/error.hpp"
#include "doctest.h"
#include "fixture.hpp"

using namespace bsmd;
using testfx::code_of;

namespace {

std::string message_of(std::string_view text) {
  try {
    parse_run_config(text);
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("defaults and sections") {
    auto rc = parse_run_config("{}");
    CHECK(rc.seed == 1);
    CHECK(rc.out_dir == "out");
    rc = parse_run_config(R"({"seed": 9, "scenario": {"population": 50},
        "network": {"latency_ms": 3}, "consensus": {"active_nodes": 4, "faulty": 1},
        "privacy": {"level": "high", "epsilon": 0.02}})");
    CHECK(rc.seed == 9);
    CHECK(rc.scenario.seed == 9);
    CHECK(rc.scenario.population == 50);
    CHECK(rc.scenario.link_latency_ms == 3);
    CHECK(rc.scenario.active_nodes == 4);
    CHECK(rc.scenario.faulty == 1);
    CHECK(rc.scenario.privacy.level == privacy::PrivacyLevel::kHigh);
    CHECK(rc.scenario.privacy.geoind_epsilon == 0.02);
  }

  TEST_CASE("round trip through canonical JSON") {
    auto rc = load_run_config(std::string(BSMD_SOURCE_DIR) + "/configs/sample_n20.json");
    CHECK(rc.seed == 7);
    CHECK(rc.scenario.population == 20);
    const std::string text = to_json(rc);
    auto back = parse_run_config(text);
    CHECK(to_json(back) == text);
    CHECK(back.scenario.mixture.components().size() == 3);
  }

  TEST_CASE("errors name the offending path") {
    CHECK(message_of(R"({"scenario": {"populaton": 5}})").find("scenario.populaton") != std::string::npos);
    CHECK(message_of(R"({"scenario": {"population": "many"}})").find("scenario.population") != std::string::npos);
    CHECK(message_of(R"({"privacy": {"level": "medium"}})").find("privacy.level") != std::string::npos);
    CHECK(message_of(R"({"bogus": 1})").find("bogus") != std::string::npos);
    CHECK(code_of([] { parse_run_config(R"({"scenario": {"population": 0}})"); }) == ErrorCode::kConfig);
    CHECK(code_of([] { parse_run_config(R"({"consensus": {"active_nodes": 3, "faulty": 1}})"); }) ==
          ErrorCode::kConfig);
    CHECK(code_of([] { parse_run_config("{not json"); }) == ErrorCode::kParse);
    CHECK(code_of([] { load_run_config("/nonexistent/cfg.json"); }) == ErrorCode::kIo);
  }
}
