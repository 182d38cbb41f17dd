#include <doctest.h>

#include <random>

#include "pidres/error.hpp"
#include "pidres/timeseries_store.hpp"
#include "test_support.hpp"

using namespace pidres;
namespace t = pidres::testing;

namespace {

ErrorKind load_error(std::string_view csv) {
  try {
    SensorTable::parse_csv(csv, "S");
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected load failure");
  return ErrorKind::InvariantViolation;
}

Dataset fixture_dataset() {
  Dataset d;
  d.name = "AMPds-mini";
  for (const auto& [name, text] : t::fixture_csv()) {
    d.sensors[name] = std::make_shared<const SensorTable>(SensorTable::parse_csv(text, name));
  }
  return d;
}

}  // namespace

TEST_SUITE("timeseries_store") {
  TEST_CASE("loads lexical cells verbatim") {
    auto table = SensorTable::parse_csv("ts,V\n1,118.1\n2,119.0", "DWE");
    CHECK(table.key() == std::vector<Timestamp>{1, 2});
    REQUIRE(table.columns().size() == 1);
    CHECK(table.columns()[0].name == "V");
    CHECK(table.columns()[0].cells == std::vector<std::string>{"118.1", "119.0"});
    CHECK(table.columns()[0].type == make_type("real"));
    CHECK(table.key_header() == "ts");
  }

  TEST_CASE("re-sorts rows by key") {
    auto table = SensorTable::parse_csv("ts,V\n2,a\n1,b\n", "S");
    CHECK(table.key() == std::vector<Timestamp>{1, 2});
    CHECK(table.columns()[0].cells == std::vector<std::string>{"b", "a"});
  }

  TEST_CASE("accepts CRLF and keeps empty cells") {
    auto table = SensorTable::parse_csv("ts,V,I\r\n1,,2\r\n2,3,\r\n", "S");
    CHECK(table.columns()[0].cells == std::vector<std::string>{"", "3"});
    CHECK(table.columns()[1].cells == std::vector<std::string>{"2", ""});
  }

  TEST_CASE("quoted fields keep their commas and raw text") {
    auto table = SensorTable::parse_csv("ts,\"note\"\n1,\"a,b\"\n", "S");
    CHECK(table.columns()[0].name == "note");
    CHECK(table.columns()[0].cells == std::vector<std::string>{"\"a,b\""});
  }

  TEST_CASE("load errors") {
    CHECK(load_error("ts,V\n1,x\n1,y") == ErrorKind::DuplicateTimestamp);
    CHECK(load_error("ts,V\n1.5,x\n") == ErrorKind::NonIntegerTimestamp);
    CHECK(load_error("ts,V\nabc,x\n") == ErrorKind::NonIntegerTimestamp);
    CHECK(load_error("ts,V\n1,x,z\n") == ErrorKind::RaggedRow);
    CHECK(load_error("ts,V\n1\n") == ErrorKind::RaggedRow);
    CHECK(load_error("") == ErrorKind::EmptyFile);
    CHECK(load_error("\n\n") == ErrorKind::EmptyFile);
    CHECK(load_error("ts,V,V\n1,2,3\n") == ErrorKind::DuplicateColumn);
  }

  TEST_CASE("missing file is an IoError") {
    try {
      load_sensor_csv("/nonexistent/x.csv", "x");
      FAIL("expected IoError");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::IoError);
    }
  }

  TEST_CASE("key column typed as timestamp only for epoch-sized integers") {
    auto epoch = SensorTable::parse_csv("TS,V\n1333263600,1\n1333263660,2\n", "S");
    CHECK(epoch.key_type() == make_type("timestamp"));
    auto small = SensorTable::parse_csv("TS,V\n13332,1\n", "S");
    CHECK(small.key_type() == make_type("integer"));
  }

  TEST_CASE("fixture range selection counts 69 rows") {
    auto d = fixture_dataset();
    auto slice = select(d, parse_pid("ark:/57460/AMPds-mini.DWE.V@13332~13400"));
    std::size_t expected = 0;
    for (auto k : d.find_sensor("DWE")->key()) expected += (k >= 13332 && k <= 13400);
    CHECK(expected == 69);
    CHECK(slice.rows.size() == 69);
    CHECK(slice.header == std::vector<std::string>{"timestamp", "V"});
  }

  TEST_CASE("multi-measurement and multi-sensor headers") {
    auto d = fixture_dataset();
    auto two = select(d, parse_pid("ark:/57460/AMPds-mini.DWE.V+I@*"));
    CHECK(two.header == std::vector<std::string>{"timestamp", "V", "I"});
    CHECK(two.rows.size() == d.find_sensor("DWE")->row_count());

    auto wide = select(d, parse_pid("ark:/57460/AMPds-mini.HPE+DWE+WOE.V+I@*"));
    CHECK(wide.header ==
          std::vector<std::string>{"timestamp", "HPE.V", "HPE.I", "DWE.V", "DWE.I", "WOE.V", "WOE.I"});
  }

  TEST_CASE("excluding every key yields an empty slice with a header") {
    Dataset d;
    d.name = "X";
    d.sensors["DWE"] = std::make_shared<const SensorTable>(
        SensorTable::parse_csv("TS,V\n24300,1\n24800,2\n25500,3\n", "DWE"));
    auto slice = select(d, parse_pid("ark:/1/X.DWE.V@_24300~25500"));
    CHECK(slice.rows.empty());
    CHECK(render_csv(slice) == "timestamp,V\n");
  }

  TEST_CASE("selection errors") {
    auto d = fixture_dataset();
    auto kind = [&](std::string_view pid) {
      try {
        select(d, parse_pid(pid));
      } catch (const Error& e) {
        return e.kind();
      }
      return ErrorKind::InvariantViolation;
    };
    CHECK(kind("ark:/1/AMPds-mini.XYZ.V@*") == ErrorKind::UnknownSensor);
    CHECK(kind("ark:/1/AMPds-mini.DWE.Q@*") == ErrorKind::UnknownMeasurement);
    CHECK(kind("ark:/1/other.DWE.V@*") == ErrorKind::NotFound);
  }

  TEST_CASE("render matches the raw-text oracle on the fixture") {
    auto d = fixture_dataset();
    auto csv = t::fixture_csv();
    auto got = render_csv(select(d, parse_pid("ark:/57460/AMPds-mini.HPE+WOE.I@13350~13360+24300~24500")));
    auto want = t::oracle_csv(csv, {"HPE", "WOE"}, {"I"}, [](long long k) {
      return (k >= 13350 && k <= 13360) || (k >= 24300 && k <= 24500);
    });
    CHECK(got == want);
  }

  TEST_CASE("property: select agrees with a row-by-row filter on random tables") {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> rows(0, 200), gap(1, 4), val(0, 999), coin(0, 3);
    for (int iter = 0; iter < 150; ++iter) {
      std::map<std::string, std::string> texts;
      Dataset d;
      d.name = "R";
      for (const auto* s : {"A", "B"}) {
        std::string text = "ts,x,y\n";
        long long k = val(rng);
        for (int r = rows(rng); r > 0; --r) {
          k += gap(rng);
          text += std::to_string(k) + "," + (coin(rng) ? std::to_string(val(rng)) : "") + "," +
                  std::to_string(val(rng)) + "." + std::to_string(val(rng) % 10) + "\n";
        }
        texts[s] = text;
        d.sensors[s] = std::make_shared<const SensorTable>(SensorTable::parse_csv(text, s));
      }
      auto sel = t::random_selector(rng);
      // Shrink random bounds onto the table's key range so terms bite.
      std::vector<RangeTerm> terms;
      for (auto term : sel.terms()) {
        auto width = (term.end - term.start) % 300;
        term.start = term.start % 1200;
        term.end = term.start + width;
        terms.push_back(term);
      }
      PidQuery q{"1", "R", coin(rng) ? std::vector<std::string>{"A", "B"} : std::vector<std::string>{"B"},
                 {"y", "x"}, terms.empty() ? RangeSelector::wildcard() : RangeSelector::of(terms)};
      auto keep = [&](long long k) {
        bool any_in = false, in = false;
        for (const auto& tm : terms) {
          bool hit = tm.start <= k && k <= tm.end;
          if (tm.exclude && hit) return false;
          if (!tm.exclude) {
            any_in = true;
            in = in || hit;
          }
        }
        return !any_in || in;
      };
      auto got = render_csv(select(d, q));
      CHECK(got == t::oracle_csv(texts, q.sensors, q.measurements, keep));
      CHECK(render_csv(select(d, q)) == got);
    }
  }
}
