#include <doctest.h>

#include <sstream>

#include "pidres/cli.hpp"
#include "pidres/http_service.hpp"
#include "test_support.hpp"

using namespace pidres;
namespace t = pidres::testing;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("ingest, resolve, crossfold and search") {
    t::TempDir dir;
    t::stage_fixture(dir / "data");
    auto cfg = t::write_config(dir.path(), dir / "data").string();
    t::write_text(dir / "meta.json", R"({"core":"mini AMPds","dictionary":[{"term":"DWE","definition":"dishwasher"}]})");

    auto ingest = run({"--config", cfg, "ingest", "--source", "lab", "--dataset", "AMPds-mini", "--metadata",
                       (dir / "meta.json").string()});
    REQUIRE(ingest.code == 0);
    CHECK(nlohmann::json::parse(ingest.out)["sensors"].size() == 3);

    auto wild = run({"--config", cfg, "resolve", "ark:/57460/AMPds-mini.DWE.V@*"});
    CHECK(wild.code == 0);
    CHECK(std::count(wild.out.begin(), wild.out.end(), '\n') == 343);

    Service service(load_config(cfg));
    auto http = service.handle("GET", "/ark:/57460/AMPds-mini.HPE+WOE.I@13350~13360", "");
    CHECK(run({"--config", cfg, "resolve", "ark:/57460/AMPds-mini.HPE+WOE.I@13350~13360"}).out == http.body);

    auto folds = run({"--config", cfg, "crossfold", "--dataset", "AMPds-mini", "--sensors", "DWE", "--measurements",
                      "V,I", "-k", "10"});
    CHECK(folds.code == 0);
    CHECK(std::count(folds.out.begin(), folds.out.end(), '\n') == 10);
    CHECK(folds.out.rfind("0\tark:/57460/AMPds-mini.DWE.V+I@_", 0) == 0);

    auto search = run({"--config", cfg, "search", "dishwasher"});
    CHECK(nlohmann::json::parse(search.out).size() == 1);

    auto info = run({"--config", cfg, "info", "ark:/57460/AMPds-mini.DWE.V@*"});
    CHECK(nlohmann::json::parse(info.out)["dataset"] == "AMPds-mini");
  }

  TEST_CASE("mint prints the id and its URL") {
    t::TempDir dir;
    auto cfg = t::write_config(dir.path(), dir / "data").string();
    auto m = run({"--config", cfg, "mint", "--target", "https://example.org/a"});
    CHECK(m.code == 0);
    CHECK(m.out == "0000 http://localhost:8080/ark:/57460/0000\n");
    CHECK(run({"--config", cfg, "resolve", "ark:/57460/0000"}).out == "https://example.org/a\n");
  }

  TEST_CASE("crawl discovers new directories") {
    t::TempDir dir;
    t::stage_fixture(dir / "data");
    auto cfg = t::write_config(dir.path(), dir / "data").string();
    auto first = run({"--config", cfg, "crawl"});
    CHECK(first.code == 0);
    CHECK(nlohmann::json::parse(first.out)["kind"] == "added");
    CHECK(run({"--config", cfg, "crawl"}).out.empty());
  }

  TEST_CASE("errors exit with status 1") {
    t::TempDir dir;
    auto cfg = t::write_config(dir.path(), dir / "data").string();
    auto missing = run({"--config", cfg, "resolve", "ark:/57460/nope.DWE.V@*"});
    CHECK(missing.code == 1);
    CHECK(missing.err.find("dataset not found") != std::string::npos);
    CHECK(run({"--config", cfg, "resolve", "ark:/57460/AMPds-mini.DWE@*"}).code == 1);
    CHECK(run({"--config", cfg, "bogus"}).code == 1);
    CHECK(run({"--config", (dir / "nope.json").string(), "search"}).code == 1);
  }
}
