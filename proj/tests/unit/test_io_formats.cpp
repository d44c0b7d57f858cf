#include <filesystem>
#include <limits>

#include "doctest.h"
#include "scralloc/aggregation.hpp"
#include "scralloc/allocation.hpp"
#include "scralloc/error.hpp"
#include "scralloc/io_formats.hpp"
#include "testkit.hpp"

using namespace scralloc;
namespace fs = std::filesystem;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::IoError;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("scralloc_io_" + name);
  fs::remove_all(dir);
  return dir;
}

const char* kNested = R"({
  "name": "nested",
  "correlation": [[1, 0.25], [0.25, 1]],
  "macros": [
    {"id": "A", "correlation": [1, 0.5, 0.5, 1],
     "micros": [{"id": "a1", "scr": 3}, {"id": "a2", "scr": 4}]},
    {"id": "B", "name": "Bee", "micros": [{"id": "b1", "scr": 5}]}
  ]
})";

}  // namespace

TEST_CASE("number formatting is locale independent and round-trips") {
  CHECK(io::format_number(0.1) == "0.1");
  CHECK(io::format_number(2.0) == "2");
  CHECK(io::format_number(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(io::format_number(std::numeric_limits<double>::quiet_NaN()) == "nan");
  CHECK(std::stod(io::format_number(1.0 / 3.0)) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("tree parsing accepts nested and flat matrices") {
  const RiskTree t = io::parse_tree(kNested);
  CHECK(t.name == "nested");
  CHECK(t.macros[0].corr(0, 1) == 0.5);
  CHECK(t.macros[1].name == "Bee");
  CHECK(t.macros[1].corr == CorrelationMatrix::identity(1));
  CHECK(t.micro_scrs() == std::vector<double>{3.0, 4.0, 5.0});
  const RiskTree back = io::tree_from_json(io::tree_to_json(t));
  CHECK(back == t);
}

TEST_CASE("tree parsing errors") {
  CHECK(kind_of([] { io::parse_tree("{ \"name\": "); }) == ErrorKind::ParseError);
  try {
    io::parse_tree("{\n\"name\": \"x\",\n\"macros\": [,]\n}", "broken.json");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    CHECK(e.path().find("broken.json") != std::string::npos);
  }
  CHECK(kind_of([] { io::parse_tree(R"({"macros": [], "extra": 1})"); }) == ErrorKind::ParseError);
  CHECK(kind_of([] { io::parse_tree(R"({"macros": [{"id": "A", "micros": [{"id": "x", "scr": "big"}]}]})"); }) ==
        ErrorKind::ParseError);
  CHECK(kind_of([] {
          io::parse_tree(R"({"correlation": [[1,0],[0,1]], "macros": [{"id": "A", "micros": [{"id": "x", "scr": 1}]}]})");
        }) == ErrorKind::DimensionMismatch);
  CHECK(kind_of([] { io::parse_tree(R"({"macros": [{"id": "A", "micros": [{"id": "x", "scr": -1}]}]})"); }) ==
        ErrorKind::ParseError);
  // Multi-micro macros must state their correlation.
  CHECK_THROWS_AS(io::parse_tree(R"({"macros": [{"id": "A", "micros": [{"id": "x", "scr": 1}, {"id": "y", "scr": 1}]}]})"),
                  Error);
}

TEST_CASE("income round trip") {
  const IncomeStats inc = io::parse_income(R"({"income": [{"node": "A", "expected": 1.5, "stdev": 0.5},
                                                         {"node": "B/b1", "expected": -2}]})");
  REQUIRE(inc.entries.size() == 2);
  CHECK(inc.entries[1].node == "B/b1");
  CHECK_FALSE(inc.entries[1].stdev.has_value());
  CHECK(io::income_from_json(io::income_to_json(inc)) == inc);
  CHECK(io::parse_income(R"([{"node": "A", "expected": 1}])").entries.size() == 1);
  CHECK(kind_of([] { io::parse_income(R"([{"node": "A", "expected": 1, "stdev": -1}])"); }) == ErrorKind::ParseError);
}

TEST_CASE("scenarios and constraints round trip") {
  const auto scenarios = io::parse_scenarios(io::read_file(fs::path(SCRALLOC_DATA_DIR) / "scenarios.json"));
  CHECK(scenarios.size() == 4);
  const auto again = io::scenarios_from_json(io::scenarios_to_json(scenarios));
  REQUIRE(again.size() == scenarios.size());
  for (std::size_t i = 0; i < again.size(); ++i) {
    CHECK(again[i].id == scenarios[i].id);
    CHECK(again[i].tree == scenarios[i].tree);
    CHECK(again[i].income == scenarios[i].income);
    CHECK(again[i].premiums == scenarios[i].premiums);
    CHECK(again[i].reinsurance.tags == scenarios[i].reinsurance.tags);
  }
  try {
    io::parse_scenarios(R"({"scenarios": []})");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.message().find("at least one scenario") != std::string::npos);
  }

  const auto c = io::parse_constraints(R"({"scr_bounds": {"lower": 1, "upper": "inf", "inclusive": true},
      "premium_bounds": {"motor": {"lower": 5}}, "cv_cap": "inf", "cv_caps": {"A": 0.5},
      "reinsurance_rules": [{"key": "type", "op": "in", "values": ["qs"]},
                            {"id": "ret", "key": "retention", "op": ">=", "value": 0.5}]})");
  CHECK(c.scr.lower == 1.0);
  CHECK(std::isinf(c.scr.upper));
  CHECK(c.inclusive_scr);
  CHECK(std::isinf(*c.cv_cap));
  CHECK(c.cv_caps.at("A") == 0.5);
  REQUIRE(c.rules.size() == 2);
  CHECK(c.rules[0].id == "type in");
  CHECK(c.rules[1].op == RuleOp::GreaterEqual);
  const auto c2 = io::constraints_from_json(io::constraints_to_json(c));
  CHECK(c2.scr.lower == c.scr.lower);
  CHECK(c2.rules.size() == 2);
  CHECK(std::isinf(*c2.cv_cap));
  CHECK(kind_of([] { io::parse_constraints(R"({"reinsurance_rules": [{"key": "a", "op": "~", "value": 1}]})"); }) ==
        ErrorKind::ParseError);
}

TEST_CASE("CSV emitters and reader agree") {
  const RiskTree t = io::parse_tree(kNested);
  const auto alloc = allocate(t);
  const auto rows = io::parse_csv(io::allocation_csv(alloc));
  REQUIRE(rows.size() == 1 + 2 + 3 + 1);
  CHECK(rows[0][0] == "level");
  CHECK(rows[1][1] == "A");
  CHECK(std::stod(rows[1][3]) == doctest::Approx(alloc.macros[0].allocated).epsilon(1e-11));
  const auto agg_rows = io::parse_csv(io::aggregation_csv(aggregate_tree(t)));
  CHECK(agg_rows.back()[0] == "<total>");
  const auto quoted = io::parse_csv("# comment\na,\"b,c\",\"d\"\"e\"\n");
  REQUIRE(quoted.size() == 1);
  CHECK(quoted[0] == std::vector<std::string>{"a", "b,c", "d\"e"});
}

TEST_CASE("JSON reports carry the numbers") {
  const RiskTree t = io::parse_tree(kNested);
  const auto j = io::allocation_json(allocate(t));
  CHECK(j.dump() == io::allocation_json(allocate(t)).dump());
  CHECK(j.contains("total_scr"));
}

TEST_CASE("SVG scatter") {
  FrontierDataset data;
  data.scenario = "demo";
  data.rows = {{"A", 0.1, 0.05, 100.0}, {"B", -0.02, std::nullopt, 50.0}, {"C", 0.08, 0.2, 80.0}};
  data.total = FrontierRow{"Total", 0.07, 0.1, 230.0};
  const std::string svg = io::svg_scatter(data);
  CHECK(svg.rfind("<?xml", 0) == 0);
  CHECK(svg.find("<circle") != std::string::npos);
  CHECK(svg.find("Total") != std::string::npos);
  CHECK(svg == io::svg_scatter(data));

  FrontierDataset empty;
  empty.note = "no feasible scenario: empty risk-return dataset";
  const std::string blank = io::svg_scatter(empty);
  CHECK(blank.find("no feasible scenario") != std::string::npos);
  CHECK(blank.find("<circle") == std::string::npos);
}

TEST_CASE("report files") {
  const fs::path dir = scratch("reports");
  io::ReportBundle bundle;
  const RiskTree t = io::parse_tree(kNested);
  bundle.aggregation = aggregate_tree(t);
  bundle.allocation = allocate(t);
  const auto written = io::write_reports(bundle, dir);
  CHECK(written.size() >= 4);
  for (const auto& p : written) CHECK(fs::exists(p));
  CHECK(fs::exists(dir / "diversification.csv"));
  CHECK(io::read_file(dir / "allocation.csv") == io::allocation_csv(*bundle.allocation));
  fs::remove_all(dir);
  CHECK(kind_of([] { io::read_file("/nonexistent/nowhere.json"); }) == ErrorKind::IoError);
}

TEST_CASE("bundled data files load") {
  for (const char* name : {"two_risks.json", "nested.json", "single_micro.json", "lob_portfolio.json", "not_psd.json"}) {
    CAPTURE(name);
    CHECK_NOTHROW(io::parse_tree(io::read_file(fs::path(SCRALLOC_DATA_DIR) / name)));
  }
  const RiskTree lob = io::parse_tree(io::read_file(fs::path(SCRALLOC_DATA_DIR) / "lob_portfolio.json"));
  const RiskTree built = testkit::lob_tree();
  REQUIRE(lob.macros.size() == built.macros.size());
  for (std::size_t i = 0; i < lob.macros.size(); ++i)
    CHECK(lob.macros[i].micros[0].scr == doctest::Approx(built.macros[i].micros[0].scr).epsilon(1e-14));
}
