#include <doctest.h>

#include <httplib.h>

#include <thread>

#include "pidres/catalog.hpp"
#include "pidres/error.hpp"
#include "test_support.hpp"

using namespace pidres;
namespace t = pidres::testing;
namespace fs = std::filesystem;

namespace {

Clock fixed_clock() {
  return [] { return std::chrono::system_clock::time_point(std::chrono::seconds(1700000000)); };
}

Catalog::Options local_options(const t::TempDir& dir) {
  Catalog::Options o;
  o.state_dir = dir / "state";
  o.sources = {{"lab", (dir / "data").string(), SourceKind::local_directory}};
  o.clock = fixed_clock();
  return o;
}

DatasetMetadata ampds_metadata() {
  DatasetMetadata m;
  m.core = "Almanac of Minutely Power dataset, reduced";
  m.domain = {"residential", "house", "csv"};
  m.dictionary = {{"DWE", "dishwasher electricity"}, {"V", "voltage"}};
  m.annotations = {{"DWE.I", "real"}};
  return m;
}

ErrorKind error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::InvariantViolation;
}

}  // namespace

TEST_SUITE("catalog") {
  TEST_CASE("sha256 known vector and hash framing") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(content_hash({{"a.csv", "xy"}, {"b.csv", "z"}}) != content_hash({{"a.csv", "x"}, {"b.csv", "yz"}}));
    CHECK(content_hash({{"a.csv", "x"}}) == content_hash({{"a.csv", "x"}}));
    CHECK(format_time(std::chrono::system_clock::time_point(std::chrono::seconds(0))) == "1970-01-01T00:00:00Z");
  }

  TEST_CASE("register types every column and persists the entry") {
    t::TempDir dir;
    t::stage_fixture(dir / "data");
    Catalog cat(local_options(dir));
    auto e = cat.register_dataset("lab", "AMPds-mini", ampds_metadata());
    CHECK(e.sensors.size() == 3);
    for (const auto& s : e.sensors) {
      CHECK(s.key_header == "TS");
      REQUIRE(s.columns.size() == 2);
      for (const auto& c : s.columns) {
        CHECK(c.type == make_type("real"));
        CHECK(c.properties.has_value());
      }
    }
    CHECK(e.find_sensor("DWE")->row_count == 342);
    CHECK(e.registered_at == "2023-11-14T22:13:20Z");
    CHECK(e.content_hash.size() == 64);
    CHECK(fs::exists(dir / "state" / "catalog" / "AMPds-mini.json"));
    CHECK(fs::exists(dir / "state" / "catalog" / "index.json"));
    CHECK(cat.record("AMPds-mini")->data->sensors.size() == 3);
  }

  TEST_CASE("annotations override inference and must name real columns") {
    t::TempDir dir;
    t::stage_fixture(dir / "data");
    Catalog cat(local_options(dir));
    auto meta = ampds_metadata();
    meta.annotations = {{"DWE.I", "lambda function"}};
    auto e = cat.register_dataset("lab", "AMPds-mini", meta);
    CHECK(e.find_sensor("DWE")->columns[1].type.basic == BasicType::calculated);
    meta.annotations = {{"DWE.Q", "real"}};
    CHECK(error_of([&] { cat.register_dataset("lab", "AMPds-mini", meta); }) == ErrorKind::InvalidArgument);
  }

  TEST_CASE("registration errors") {
    t::TempDir dir;
    t::stage_fixture(dir / "data");
    t::stage_fixture(dir / "other");
    fs::create_directories(dir / "data" / "empty");
    auto opts = local_options(dir);
    opts.sources.push_back({"mirror", (dir / "other").string(), SourceKind::local_directory});
    Catalog cat(opts);
    cat.register_dataset("lab", "AMPds-mini", {});
    CHECK(error_of([&] { cat.register_dataset("mirror", "AMPds-mini", {}); }) == ErrorKind::DuplicateDataset);
    CHECK(error_of([&] { cat.register_dataset("lab", "empty", {}); }) == ErrorKind::LoadError);
    CHECK(error_of([&] { cat.register_dataset("lab", "missing", {}); }) == ErrorKind::LoadError);
    CHECK(error_of([&] { cat.register_dataset("lab", "bad.name", {}); }) == ErrorKind::InvalidArgument);
    CHECK(error_of([&] { cat.register_dataset("nope", "x", {}); }) == ErrorKind::NotFound);
    t::write_text(dir / "data" / "broken" / "S.csv", "ts,V\n1,a\n1,b\n");
    CHECK(error_of([&] { cat.register_dataset("lab", "broken", {}); }) == ErrorKind::LoadError);
  }

  TEST_CASE("lookup and search") {
    t::TempDir dir;
    t::stage_fixture(dir / "data");
    Catalog cat(local_options(dir));
    CHECK(error_of([&] { cat.lookup("AMPds-mini"); }) == ErrorKind::NotFound);
    cat.register_dataset("lab", "AMPds-mini", ampds_metadata());
    CHECK(cat.lookup("AMPds-mini").source_id == "lab");
    CHECK(cat.search("amp").size() == 1);
    CHECK(cat.search("DISHWASHER").size() == 1);
    CHECK(cat.search("residential").size() == 1);
    CHECK(cat.search("woe").size() == 1);
    CHECK(cat.search("zzz").empty());
    CHECK(cat.search("").size() == 1);
  }

  TEST_CASE("crawl tracks additions, modifications and removals") {
    t::TempDir dir;
    auto ds = t::stage_fixture(dir / "data");
    std::vector<ChangeEvent> seen;
    auto opts = local_options(dir);
    opts.on_event = [&](const ChangeEvent& e) { seen.push_back(e); };
    Catalog cat(opts);
    cat.register_dataset("lab", "AMPds-mini", {});
    auto h0 = cat.lookup("AMPds-mini").content_hash;

    CHECK(cat.crawl().empty());

    t::write_text(ds / "DWE.csv", t::read_text(ds / "DWE.csv") + "99999,1.0,2.00\n");
    auto ev = cat.crawl();
    REQUIRE(ev.size() == 1);
    CHECK(ev[0].kind == ChangeKind::modified);
    CHECK(ev[0].old_hash == h0);
    CHECK(ev[0].new_hash == cat.lookup("AMPds-mini").content_hash);
    CHECK(cat.record("AMPds-mini")->data->find_sensor("DWE")->row_count() == 343);
    CHECK(cat.crawl().empty());

    t::stage_fixture(dir / "data", "Copy");
    ev = cat.crawl();
    REQUIRE(ev.size() == 1);
    CHECK(ev[0].kind == ChangeKind::added);
    CHECK(ev[0].dataset == "Copy");
    CHECK(cat.lookup("Copy").content_hash == h0);

    fs::remove_all(ds);
    ev = cat.crawl();
    REQUIRE(ev.size() == 1);
    CHECK(ev[0].kind == ChangeKind::removed);
    CHECK(error_of([&] { cat.record("AMPds-mini"); }) == ErrorKind::NotFound);
    CHECK(cat.crawl().empty());

    CHECK(seen.size() == 3);
    auto log = t::read_text(dir / "state" / "events.log");
    CHECK(std::count(log.begin(), log.end(), '\n') == 3);
  }

  TEST_CASE("crawl reports unloadable changes as source errors") {
    t::TempDir dir;
    auto ds = t::stage_fixture(dir / "data");
    Catalog cat(local_options(dir));
    cat.register_dataset("lab", "AMPds-mini", {});
    t::write_text(ds / "DWE.csv", "TS,V,I\n1,2,3\n1,2,3\n");
    auto ev = cat.crawl();
    REQUIRE(ev.size() == 1);
    CHECK(ev[0].kind == ChangeKind::source_error);
  }

  TEST_CASE("property: content hash changes exactly when bytes change") {
    t::TempDir dir;
    auto ds = t::stage_fixture(dir / "data");
    Catalog cat(local_options(dir));
    cat.register_dataset("lab", "AMPds-mini", {});
    std::mt19937_64 rng(4);
    const auto original = t::read_text(ds / "HPE.csv");
    for (int i = 0; i < 10; ++i) {
      const bool touch = rng() % 2 == 0;
      auto before = cat.lookup("AMPds-mini").content_hash;
      if (touch) t::write_text(ds / "HPE.csv", original + std::to_string(90000 + i) + ",1.0,1.00\n");
      auto ev = cat.crawl();
      CHECK(ev.size() == (touch ? 1u : 0u));
      CHECK((cat.lookup("AMPds-mini").content_hash != before) == touch);
    }
  }

  TEST_CASE("restart restores registered datasets without writing") {
    t::TempDir dir;
    t::stage_fixture(dir / "data");
    std::string hash;
    {
      Catalog cat(local_options(dir));
      hash = cat.register_dataset("lab", "AMPds-mini", ampds_metadata()).content_hash;
    }
    auto index_before = t::read_text(dir / "state" / "catalog" / "index.json");
    Catalog again(local_options(dir));
    CHECK(again.lookup("AMPds-mini").content_hash == hash);
    CHECK(again.lookup("AMPds-mini").metadata.dictionary.size() == 2);
    CHECK(again.record("AMPds-mini")->data->sensors.size() == 3);
    CHECK(t::read_text(dir / "state" / "catalog" / "index.json") == index_before);
    CHECK(!fs::exists(dir / "state" / "events.log"));
  }

  TEST_CASE("remote HTTP source") {
    httplib::Server server;
    server.set_mount_point("/data", (t::fixture_dir()).string());
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    t::TempDir dir;
    Catalog::Options o;
    o.state_dir = dir / "state";
    o.clock = fixed_clock();
    o.sources = {{"web", "http://127.0.0.1:" + std::to_string(port) + "/data", SourceKind::remote_http}};
    Catalog cat(o);
    CHECK(error_of([&] { cat.register_dataset("web", "AMPds-mini", {}); }) == ErrorKind::InvalidArgument);
    DatasetMetadata m;
    m.sensors = {"DWE", "WOE"};
    auto e = cat.register_dataset("web", "AMPds-mini", m);
    CHECK(e.sensors.size() == 2);

    t::TempDir local;
    t::stage_fixture(local.path());
    std::map<std::string, std::string> files{{"DWE.csv", t::read_text(local / "AMPds-mini/DWE.csv")},
                                            {"WOE.csv", t::read_text(local / "AMPds-mini/WOE.csv")}};
    CHECK(e.content_hash == content_hash(files));
    CHECK(cat.crawl().empty());

    m.sensors = {"NOPE"};
    CHECK(error_of([&] { cat.register_dataset("web", "AMPds-mini", m); }) == ErrorKind::LoadError);

    server.stop();
    th.join();
  }
}
