#include "scralloc/io_formats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "scralloc/error.hpp"

namespace scralloc::io {

namespace {

[[noreturn]] void schema_error(const std::string& pointer, const std::string& message) {
  throw Error(ErrorKind::ParseError, pointer.empty() ? "/" : pointer, message);
}

std::string child(const std::string& pointer, std::string_view key) {
  std::string out = pointer + "/";
  for (char c : key) {
    if (c == '~') {
      out += "~0";
    } else if (c == '/') {
      out += "~1";
    } else {
      out += c;
    }
  }
  return out;
}

std::string child(const std::string& pointer, std::size_t index) {
  return pointer + "/" + std::to_string(index);
}

void require_object(const Json& j, const std::string& pointer) {
  if (!j.is_object()) schema_error(pointer, "expected an object");
}

void check_keys(const Json& j, const std::string& pointer, std::initializer_list<std::string_view> allowed) {
  for (const auto& item : j.items()) {
    const std::string& key = item.key();
    if (key == "description" || key == "comment") continue;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      schema_error(child(pointer, key), "unknown field");
    }
  }
}

const Json& require(const Json& obj, std::string_view key, const std::string& pointer) {
  const auto it = obj.find(key);
  if (it == obj.end()) schema_error(child(pointer, key), "missing required field");
  return *it;
}

double to_number(const Json& j, const std::string& pointer) {
  if (!j.is_number()) schema_error(pointer, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) schema_error(pointer, "number is not finite");
  return v;
}

double number_field(const Json& obj, std::string_view key, const std::string& pointer) {
  return to_number(require(obj, key, pointer), child(pointer, key));
}

// Finite number, or null / "inf" / "-inf" for an open bound.
double bound_value(const Json& obj, std::string_view key, const std::string& pointer, double fallback) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  if (it->is_string()) {
    const std::string s = it->get<std::string>();
    if (s == "inf" || s == "+inf" || s == "Infinity") return std::numeric_limits<double>::infinity();
    if (s == "-inf" || s == "-Infinity") return -std::numeric_limits<double>::infinity();
    schema_error(child(pointer, key), "expected a number or \"inf\"");
  }
  return to_number(*it, child(pointer, key));
}

std::string string_field(const Json& obj, std::string_view key, const std::string& pointer,
                         const std::optional<std::string>& fallback = std::nullopt) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    if (fallback) return *fallback;
    schema_error(child(pointer, key), "missing required field");
  }
  if (!it->is_string()) schema_error(child(pointer, key), "expected a string");
  return it->get<std::string>();
}

const Json& array_field(const Json& obj, std::string_view key, const std::string& pointer) {
  const Json& j = require(obj, key, pointer);
  if (!j.is_array()) schema_error(child(pointer, key), "expected an array");
  return j;
}

[[noreturn]] void dimension_error(const std::string& pointer, std::size_t got, std::size_t want,
                                  std::string_view what) {
  std::ostringstream msg;
  msg << "correlation of dimension " << got << " for " << want << " " << what;
  throw Error(ErrorKind::DimensionMismatch, pointer, msg.str());
}

CorrelationMatrix correlation_from_json(const Json& obj, const std::string& pointer, std::size_t expected,
                                        std::string_view what) {
  const auto it = obj.find("correlation");
  const std::string ptr = child(pointer, "correlation");
  if (it == obj.end()) {
    if (expected == 1) return CorrelationMatrix::identity(1);
    schema_error(ptr, "missing correlation (only optional for a single entry)");
  }
  const Json& j = *it;
  if (!j.is_array()) schema_error(ptr, "expected an array");
  std::vector<double> entries;
  std::size_t dim = 0;
  if (!j.empty() && j.front().is_array()) {
    dim = j.size();
    for (std::size_t r = 0; r < dim; ++r) {
      const Json& row = j[r];
      if (!row.is_array()) schema_error(child(ptr, r), "expected a row array");
      if (row.size() != dim) {
        std::ostringstream msg;
        msg << "row has " << row.size() << " entries, matrix has " << dim << " rows";
        throw Error(ErrorKind::DimensionMismatch, child(ptr, r), msg.str());
      }
      for (std::size_t c = 0; c < dim; ++c) entries.push_back(to_number(row[c], child(child(ptr, r), c)));
    }
  } else {
    dim = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(j.size()))));
    if (dim * dim != j.size()) {
      throw Error(ErrorKind::DimensionMismatch, ptr, "flat correlation array is not square");
    }
    for (std::size_t k = 0; k < j.size(); ++k) entries.push_back(to_number(j[k], child(ptr, k)));
  }
  if (dim != expected) dimension_error(ptr, dim, expected, what);
  return CorrelationMatrix(dim, std::move(entries));
}

Json correlation_to_json(const CorrelationMatrix& corr) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < corr.dim(); ++i) {
    Json row = Json::array();
    for (double v : corr.row(i)) row.push_back(v);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string object_source(std::string_view source) { return std::string(source); }

std::size_t line_of(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

class CsvWriter {
 public:
  CsvWriter& comment(std::string_view text) {
    out_ << "# " << text << '\n';
    return *this;
  }
  CsvWriter& row(std::initializer_list<std::string> fields) {
    bool first = true;
    for (const auto& f : fields) {
      if (!first) out_ << ',';
      out_ << csv_field(f);
      first = false;
    }
    out_ << '\n';
    return *this;
  }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

std::string num(double v) { return format_number(v); }
std::string num(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

Json opt(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::string format_precision(double value, int precision) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, precision);
  return std::string(buf, res.ptr);
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string format_number(double value) { return format_precision(value, 12); }

Json parse_json(std::string_view text, std::string_view source) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    std::ostringstream msg;
    msg << "line " << line_of(text, e.byte == 0 ? 0 : e.byte - 1) << ": " << e.what();
    throw Error(ErrorKind::ParseError, object_source(source), msg.str());
  }
}

// ---------------------------------------------------------------------------
// Trees

RiskTree tree_from_json(const Json& doc, const std::string& pointer) {
  require_object(doc, pointer);
  check_keys(doc, pointer, {"name", "correlation", "macros"});
  RiskTree tree;
  tree.name = string_field(doc, "name", pointer, std::string("portfolio"));
  const Json& macros = array_field(doc, "macros", pointer);
  const std::string macros_ptr = child(pointer, "macros");
  if (macros.empty()) schema_error(macros_ptr, "at least one macro-risk");
  for (std::size_t i = 0; i < macros.size(); ++i) {
    const std::string mptr = child(macros_ptr, i);
    const Json& m = macros[i];
    require_object(m, mptr);
    check_keys(m, mptr, {"id", "name", "correlation", "micros"});
    MacroRisk macro;
    macro.id = string_field(m, "id", mptr);
    macro.name = string_field(m, "name", mptr, macro.id);
    const Json& micros = array_field(m, "micros", mptr);
    const std::string xs_ptr = child(mptr, "micros");
    if (micros.empty()) schema_error(xs_ptr, "at least one micro-risk");
    for (std::size_t x = 0; x < micros.size(); ++x) {
      const std::string xptr = child(xs_ptr, x);
      const Json& mx = micros[x];
      require_object(mx, xptr);
      check_keys(mx, xptr, {"id", "name", "scr"});
      MicroRisk micro;
      micro.id = string_field(mx, "id", xptr);
      micro.name = string_field(mx, "name", xptr, micro.id);
      micro.scr = number_field(mx, "scr", xptr);
      macro.micros.push_back(std::move(micro));
    }
    macro.corr = correlation_from_json(m, mptr, macro.micros.size(), "micro-risks");
    tree.macros.push_back(std::move(macro));
  }
  tree.corr = correlation_from_json(doc, pointer, tree.macros.size(), "macro-risks");

  const ValidationReport report = validate_tree(tree);
  for (const auto& v : report.violations) {
    if (v.severity != Severity::Error) continue;
    throw Error(v.rule == "corr.dim" ? ErrorKind::DimensionMismatch : ErrorKind::ParseError,
                pointer + "(" + v.path + ")", v.rule + ": " + v.message);
  }
  return tree;
}

Json tree_to_json(const RiskTree& tree) {
  Json doc;
  doc["name"] = tree.name;
  doc["correlation"] = correlation_to_json(tree.corr);
  Json macros = Json::array();
  for (const auto& m : tree.macros) {
    Json jm;
    jm["id"] = m.id;
    jm["name"] = m.name;
    jm["correlation"] = correlation_to_json(m.corr);
    Json micros = Json::array();
    for (const auto& x : m.micros) micros.push_back({{"id", x.id}, {"name", x.name}, {"scr", x.scr}});
    jm["micros"] = std::move(micros);
    macros.push_back(std::move(jm));
  }
  doc["macros"] = std::move(macros);
  return doc;
}

RiskTree parse_tree(std::string_view text, std::string_view source) {
  return tree_from_json(parse_json(text, source));
}

// ---------------------------------------------------------------------------
// Income

IncomeStats income_from_json(const Json& doc, const std::string& pointer) {
  const Json* list = &doc;
  std::string lptr = pointer;
  if (doc.is_object()) {
    check_keys(doc, pointer, {"income"});
    list = &array_field(doc, "income", pointer);
    lptr = child(pointer, "income");
  }
  if (!list->is_array()) schema_error(pointer, "expected an income list");
  IncomeStats income;
  for (std::size_t k = 0; k < list->size(); ++k) {
    const std::string eptr = child(lptr, k);
    const Json& e = (*list)[k];
    require_object(e, eptr);
    check_keys(e, eptr, {"node", "expected", "stdev"});
    IncomeEntry entry;
    entry.node = string_field(e, "node", eptr);
    entry.expected = number_field(e, "expected", eptr);
    if (const auto it = e.find("stdev"); it != e.end() && !it->is_null()) {
      entry.stdev = to_number(*it, child(eptr, "stdev"));
      if (*entry.stdev < 0.0) schema_error(child(eptr, "stdev"), "stdev must be >= 0");
    }
    income.entries.push_back(std::move(entry));
  }
  return income;
}

Json income_to_json(const IncomeStats& income) {
  Json list = Json::array();
  for (const auto& e : income.entries) {
    Json j{{"node", e.node}, {"expected", e.expected}};
    if (e.stdev) j["stdev"] = *e.stdev;
    list.push_back(std::move(j));
  }
  return Json{{"income", std::move(list)}};
}

IncomeStats parse_income(std::string_view text, std::string_view source) {
  return income_from_json(parse_json(text, source));
}

// ---------------------------------------------------------------------------
// Scenarios

std::vector<Scenario> scenarios_from_json(const Json& doc) {
  require_object(doc, "");
  check_keys(doc, "", {"scenarios"});
  const Json& list = array_field(doc, "scenarios", "");
  if (list.empty()) schema_error("/scenarios", "at least one scenario");
  std::vector<Scenario> out;
  for (std::size_t k = 0; k < list.size(); ++k) {
    const std::string sptr = child("/scenarios", k);
    const Json& s = list[k];
    require_object(s, sptr);
    check_keys(s, sptr, {"id", "premiums", "reinsurance", "tree", "income"});
    Scenario scenario;
    scenario.id = string_field(s, "id", sptr);
    if (const auto it = s.find("premiums"); it != s.end()) {
      require_object(*it, child(sptr, "premiums"));
      for (const auto& p : it->items()) {
        const std::string pptr = child(child(sptr, "premiums"), p.key());
        const double v = to_number(p.value(), pptr);
        if (v < 0.0) schema_error(pptr, "premium must be >= 0");
        scenario.premiums[p.key()] = v;
      }
    }
    if (const auto it = s.find("reinsurance"); it != s.end()) {
      const std::string rptr = child(sptr, "reinsurance");
      require_object(*it, rptr);
      check_keys(*it, rptr, {"tags", "params"});
      if (const auto t = it->find("tags"); t != it->end()) {
        require_object(*t, child(rptr, "tags"));
        for (const auto& tag : t->items()) {
          if (!tag.value().is_string()) schema_error(child(child(rptr, "tags"), tag.key()), "expected a string");
          scenario.reinsurance.tags[tag.key()] = tag.value().get<std::string>();
        }
      }
      if (const auto p = it->find("params"); p != it->end()) {
        require_object(*p, child(rptr, "params"));
        for (const auto& param : p->items()) {
          scenario.reinsurance.params[param.key()] =
              to_number(param.value(), child(child(rptr, "params"), param.key()));
        }
      }
    }
    scenario.tree = tree_from_json(require(s, "tree", sptr), child(sptr, "tree"));
    if (const auto it = s.find("income"); it != s.end()) {
      scenario.income = income_from_json(*it, child(sptr, "income"));
    }
    out.push_back(std::move(scenario));
  }
  return out;
}

Json scenarios_to_json(const std::vector<Scenario>& scenarios) {
  Json list = Json::array();
  for (const auto& s : scenarios) {
    Json j;
    j["id"] = s.id;
    j["premiums"] = Json::object();
    for (const auto& [lob, p] : s.premiums) j["premiums"][lob] = p;
    j["reinsurance"] = {{"tags", Json::object()}, {"params", Json::object()}};
    for (const auto& [k, v] : s.reinsurance.tags) j["reinsurance"]["tags"][k] = v;
    for (const auto& [k, v] : s.reinsurance.params) j["reinsurance"]["params"][k] = v;
    j["tree"] = tree_to_json(s.tree);
    j["income"] = income_to_json(s.income)["income"];
    list.push_back(std::move(j));
  }
  return Json{{"scenarios", std::move(list)}};
}

std::vector<Scenario> parse_scenarios(std::string_view text, std::string_view source) {
  return scenarios_from_json(parse_json(text, source));
}

// ---------------------------------------------------------------------------
// Constraints

ConstraintSet constraints_from_json(const Json& doc) {
  require_object(doc, "");
  check_keys(doc, "", {"scr_bounds", "premium_bounds", "cv_cap", "cv_caps", "reinsurance_rules"});
  constexpr double inf = std::numeric_limits<double>::infinity();
  ConstraintSet c;
  if (const auto it = doc.find("scr_bounds"); it != doc.end()) {
    require_object(*it, "/scr_bounds");
    check_keys(*it, "/scr_bounds", {"lower", "upper", "inclusive"});
    c.scr.lower = bound_value(*it, "lower", "/scr_bounds", -inf);
    c.scr.upper = bound_value(*it, "upper", "/scr_bounds", inf);
    if (const auto inc = it->find("inclusive"); inc != it->end()) {
      if (!inc->is_boolean()) schema_error("/scr_bounds/inclusive", "expected a boolean");
      c.inclusive_scr = inc->get<bool>();
    }
  }
  if (const auto it = doc.find("premium_bounds"); it != doc.end()) {
    require_object(*it, "/premium_bounds");
    for (const auto& item : it->items()) {
      const std::string ptr = child("/premium_bounds", item.key());
      require_object(item.value(), ptr);
      check_keys(item.value(), ptr, {"lower", "upper"});
      c.premiums[item.key()] = {bound_value(item.value(), "lower", ptr, -inf),
                                bound_value(item.value(), "upper", ptr, inf)};
    }
  }
  if (const auto it = doc.find("cv_cap"); it != doc.end() && !it->is_null()) {
    c.cv_cap = bound_value(doc, "cv_cap", "", inf);
  }
  if (const auto it = doc.find("cv_caps"); it != doc.end()) {
    require_object(*it, "/cv_caps");
    for (const auto& item : it->items()) c.cv_caps[item.key()] = bound_value(*it, item.key(), "/cv_caps", inf);
  }
  if (const auto it = doc.find("reinsurance_rules"); it != doc.end()) {
    if (!it->is_array()) schema_error("/reinsurance_rules", "expected an array");
    for (std::size_t k = 0; k < it->size(); ++k) {
      const std::string ptr = child("/reinsurance_rules", k);
      const Json& r = (*it)[k];
      require_object(r, ptr);
      check_keys(r, ptr, {"id", "key", "op", "value", "values"});
      ReinsuranceRule rule;
      rule.key = string_field(r, "key", ptr);
      const std::string op_text = string_field(r, "op", ptr);
      const auto op = parse_rule_op(op_text);
      if (!op) schema_error(child(ptr, "op"), "unknown operator '" + op_text + "'");
      rule.op = *op;
      rule.id = string_field(r, "id", ptr, rule.key + " " + op_text);
      if (rule.op == RuleOp::In || rule.op == RuleOp::NotIn) {
        const Json& values = array_field(r, "values", ptr);
        for (std::size_t v = 0; v < values.size(); ++v) {
          if (!values[v].is_string()) schema_error(child(child(ptr, "values"), v), "expected a string");
          rule.values.push_back(values[v].get<std::string>());
        }
      } else if (rule.op != RuleOp::Has) {
        rule.value = number_field(r, "value", ptr);
      }
      c.rules.push_back(std::move(rule));
    }
  }
  try {
    c.validate();
  } catch (const Error& e) {
    schema_error("/" + e.path(), e.message());
  }
  return c;
}

Json constraints_to_json(const ConstraintSet& c) {
  Json doc = Json::object();
  Json scr = Json::object();
  if (std::isfinite(c.scr.lower)) scr["lower"] = c.scr.lower;
  if (std::isfinite(c.scr.upper)) scr["upper"] = c.scr.upper;
  if (c.inclusive_scr) scr["inclusive"] = true;
  if (!scr.empty()) doc["scr_bounds"] = std::move(scr);
  if (!c.premiums.empty()) {
    Json premiums = Json::object();
    for (const auto& [lob, b] : c.premiums) {
      Json jb = Json::object();
      if (std::isfinite(b.lower)) jb["lower"] = b.lower;
      if (std::isfinite(b.upper)) jb["upper"] = b.upper;
      premiums[lob] = std::move(jb);
    }
    doc["premium_bounds"] = std::move(premiums);
  }
  if (c.cv_cap) doc["cv_cap"] = std::isinf(*c.cv_cap) ? Json("inf") : Json(*c.cv_cap);
  if (!c.cv_caps.empty()) {
    Json caps = Json::object();
    for (const auto& [lob, cap] : c.cv_caps) caps[lob] = std::isinf(cap) ? Json("inf") : Json(cap);
    doc["cv_caps"] = std::move(caps);
  }
  if (!c.rules.empty()) {
    Json rules = Json::array();
    for (const auto& r : c.rules) {
      Json jr{{"id", r.id}, {"key", r.key}, {"op", std::string(to_string(r.op))}};
      if (r.op == RuleOp::In || r.op == RuleOp::NotIn) {
        jr["values"] = r.values;
      } else if (r.op != RuleOp::Has) {
        jr["value"] = r.value;
      }
      rules.push_back(std::move(jr));
    }
    doc["reinsurance_rules"] = std::move(rules);
  }
  return doc;
}

ConstraintSet parse_constraints(std::string_view text, std::string_view source) {
  return constraints_from_json(parse_json(text, source));
}

// ---------------------------------------------------------------------------
// CSV

std::string aggregation_csv(const AggregationOutput& agg) {
  CsvWriter w;
  w.row({"node", "scr"});
  for (const auto& m : agg.macro_scrs) w.row({m.id, num(m.scr)});
  w.row({"<total>", num(agg.total_scr)});
  return w.str();
}

std::string allocation_csv(const AllocationResult& alloc) {
  CsvWriter w;
  w.row({"level", "node", "standalone_scr", "allocated_scr", "allocation_ratio", "diversification"});
  double standalone = 0.0;
  for (const auto& m : alloc.macros) {
    standalone += m.standalone;
    w.row({"macro", m.id, num(m.standalone), num(m.allocated), num(m.ratio), num(m.diversification())});
  }
  for (const auto& m : alloc.micros) {
    const std::optional<double> ratio =
        m.standalone > 0.0 ? std::optional<double>(m.allocated / m.standalone) : std::nullopt;
    w.row({"micro", m.path(), num(m.standalone), num(m.allocated), num(ratio), num(m.standalone - m.allocated)});
  }
  const std::optional<double> ratio =
      standalone > 0.0 ? std::optional<double>(alloc.total_scr / standalone) : std::nullopt;
  w.row({"total", "<total>", num(standalone), num(alloc.total_scr), num(ratio), num(standalone - alloc.total_scr)});
  return w.str();
}

std::string diversification_csv(const DiversificationReport& report) {
  CsvWriter w;
  w.row({"level", "node", "standalone_scr", "allocated_scr", "delta"});
  for (const auto& r : report.macros) w.row({"macro", r.path, num(r.standalone), num(r.allocated), num(r.delta)});
  for (const auto& r : report.micros) w.row({"micro", r.path, num(r.standalone), num(r.allocated), num(r.delta)});
  w.row({"total", "<total>", num(report.standalone_total), num(report.total_scr), num(report.total_diversification)});
  return w.str();
}

std::string rorac_csv(const RoracReport& report) {
  CsvWriter w;
  w.row({"node", "allocated_scr", "expected_income", "income_stdev", "expected_rorac", "stdev_rorac", "cv"});
  for (const auto& n : report.nodes) {
    w.row({n.node, num(n.allocated), num(n.expected_income), num(n.income_stdev), num(n.expected_rorac),
           num(n.stdev_rorac), num(n.cv)});
  }
  w.row({"Total", num(report.total_capital), num(report.total_income), "", num(report.expected_rorac),
         num(report.stdev_rorac), ""});
  return w.str();
}

std::string mc_csv(const McEstimate& e) {
  CsvWriter w;
  w.row({"quantity", "node", "estimate", "se"});
  w.row({"meta", "seed", std::to_string(e.seed), ""});
  w.row({"meta", "samples", std::to_string(e.sample_count), ""});
  w.row({"meta", "window_count", std::to_string(e.window_count), ""});
  w.row({"var", "<total>", num(e.var_estimate), num(e.var_se)});
  if (e.window_count > 0) w.row({"window_mean", "<total>", num(e.window_mean), num(e.window_se)});
  for (std::size_t g = 0; g < e.group_contributions.size(); ++g) {
    w.row({"contribution", e.group_labels[g], num(e.group_contributions[g]), num(e.group_se[g])});
  }
  for (std::size_t k = 0; k < e.contributions.size(); ++k) {
    w.row({"contribution", e.labels[k], num(e.contributions[k]), num(e.contribution_se[k])});
  }
  return w.str();
}

std::string comparison_csv(const ComparisonReport& report) {
  CsvWriter w;
  w.comment("seed " + std::to_string(report.seed) + ", samples " + std::to_string(report.sample_count) +
            ", window " + std::to_string(report.window_count) + (report.repaired ? ", PSD-repaired" : ""));
  w.row({"node", "closed_form", "monte_carlo", "se", "z", "flagged"});
  for (const auto& r : report.rows) {
    w.row({r.node, num(r.closed_form), num(r.monte_carlo), num(r.se), num(r.z), r.flagged ? "1" : "0"});
  }
  return w.str();
}

std::string optimization_csv(const OptimizationReport& report) {
  CsvWriter w;
  w.row({"scenario", "feasible", "selected", "total_scr", "expected_rorac", "stdev_rorac", "violations"});
  for (std::size_t i = 0; i < report.outcomes.size(); ++i) {
    const auto& o = report.outcomes[i];
    std::string violations;
    for (const auto& v : o.verdict.violations()) violations += (violations.empty() ? "" : ";") + v.id;
    w.row({o.evaluation.id, o.verdict.feasible() ? "1" : "0", report.optimum == i ? "1" : "0",
           num(o.evaluation.total_scr), num(o.evaluation.rorac.expected_rorac), num(o.evaluation.rorac.stdev_rorac),
           violations});
  }
  return w.str();
}

std::string frontier_csv(const FrontierDataset& data) {
  CsvWriter w;
  if (!data.note.empty()) w.comment(data.note);
  w.row({"lob", "expected_rorac", "stdev_rorac", "allocated_scr"});
  for (const auto& r : data.rows) w.row({r.lob, num(r.expected_rorac), num(r.stdev_rorac), num(r.allocated_scr)});
  if (data.total) {
    w.row({data.total->lob, num(data.total->expected_rorac), num(data.total->stdev_rorac),
           num(data.total->allocated_scr)});
  }
  return w.str();
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '#') {
      const auto nl = text.find('\n', i);
      i = nl == std::string_view::npos ? text.size() : nl + 1;
      continue;
    }
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    for (; i < text.size(); ++i) {
      const char c = text[i];
      if (quoted) {
        if (c == '"') {
          if (i + 1 < text.size() && text[i + 1] == '"') {
            field += '"';
            ++i;
          } else {
            quoted = false;
          }
        } else {
          field += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        row.push_back(std::move(field));
        field.clear();
      } else if (c == '\n') {
        ++i;
        break;
      } else if (c != '\r') {
        field += c;
      }
    }
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// JSON reports

Json aggregation_json(const AggregationOutput& agg) {
  Json macros = Json::array();
  for (const auto& m : agg.macro_scrs) macros.push_back({{"id", m.id}, {"scr", m.scr}});
  return Json{{"macros", std::move(macros)}, {"total_scr", agg.total_scr}};
}

Json allocation_json(const AllocationResult& alloc) {
  Json macros = Json::array();
  for (const auto& m : alloc.macros) {
    macros.push_back({{"id", m.id},
                      {"standalone_scr", m.standalone},
                      {"allocated_scr", m.allocated},
                      {"allocation_ratio", m.ratio},
                      {"diversification", m.diversification()}});
  }
  Json micros = Json::array();
  for (const auto& m : alloc.micros) {
    micros.push_back({{"path", m.path()}, {"standalone_scr", m.standalone}, {"allocated_scr", m.allocated}});
  }
  return Json{{"total_scr", alloc.total_scr}, {"macros", std::move(macros)}, {"micros", std::move(micros)}};
}

Json rorac_json(const RoracReport& report) {
  Json nodes = Json::array();
  for (const auto& n : report.nodes) {
    nodes.push_back({{"node", n.node},
                     {"allocated_scr", n.allocated},
                     {"expected_income", n.expected_income},
                     {"income_stdev", opt(n.income_stdev)},
                     {"expected_rorac", n.expected_rorac},
                     {"stdev_rorac", opt(n.stdev_rorac)},
                     {"cv", opt(n.cv)}});
  }
  return Json{{"nodes", std::move(nodes)},
              {"total_capital", report.total_capital},
              {"total_income", report.total_income},
              {"expected_rorac", report.expected_rorac},
              {"stdev_rorac", opt(report.stdev_rorac)}};
}

Json mc_json(const McEstimate& e) {
  Json contributions = Json::array();
  for (std::size_t g = 0; g < e.group_contributions.size(); ++g) {
    contributions.push_back({{"node", e.group_labels[g]}, {"estimate", e.group_contributions[g]}, {"se", e.group_se[g]}});
  }
  for (std::size_t k = 0; k < e.contributions.size(); ++k) {
    contributions.push_back({{"node", e.labels[k]}, {"estimate", e.contributions[k]}, {"se", e.contribution_se[k]}});
  }
  return Json{{"seed", e.seed},
              {"samples", e.sample_count},
              {"var", {{"estimate", e.var_estimate}, {"se", e.var_se}}},
              {"window", {{"count", e.window_count}, {"lower", e.window_lower}, {"upper", e.window_upper},
                          {"mean", e.window_mean}, {"se", e.window_se}}},
              {"contributions", std::move(contributions)}};
}

Json comparison_json(const ComparisonReport& report) {
  Json rows = Json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"node", r.node}, {"closed_form", r.closed_form}, {"monte_carlo", r.monte_carlo},
                    {"se", r.se}, {"z", r.z}, {"flagged", r.flagged}});
  }
  return Json{{"seed", report.seed}, {"samples", report.sample_count}, {"window_count", report.window_count},
              {"psd_repaired", report.repaired}, {"rows", std::move(rows)}};
}

Json optimization_json(const OptimizationReport& report) {
  Json scenarios = Json::array();
  for (const auto& o : report.outcomes) {
    Json checks = Json::array();
    for (const auto& c : o.verdict.checks) {
      checks.push_back({{"id", c.id}, {"passed", c.passed}, {"margin", c.margin}, {"detail", c.detail}});
    }
    scenarios.push_back({{"id", o.evaluation.id},
                         {"feasible", o.verdict.feasible()},
                         {"total_scr", o.evaluation.total_scr},
                         {"expected_rorac", o.evaluation.rorac.expected_rorac},
                         {"stdev_rorac", opt(o.evaluation.rorac.stdev_rorac)},
                         {"checks", std::move(checks)}});
  }
  Json frontier = Json::array();
  for (const auto& p : report.frontier) {
    frontier.push_back({{"scenario", p.scenario}, {"total_scr", p.total_scr}, {"expected_rorac", p.expected_rorac}});
  }
  const auto* best = report.selected();
  return Json{{"scenarios", std::move(scenarios)},
              {"optimum", best ? Json(best->evaluation.id) : Json(nullptr)},
              {"frontier", std::move(frontier)}};
}

Json frontier_json(const FrontierDataset& data) {
  auto row = [](const FrontierRow& r) {
    return Json{{"lob", r.lob}, {"expected_rorac", r.expected_rorac}, {"stdev_rorac", opt(r.stdev_rorac)},
                {"allocated_scr", r.allocated_scr}};
  };
  Json rows = Json::array();
  for (const auto& r : data.rows) rows.push_back(row(r));
  return Json{{"scenario", data.scenario}, {"note", data.note}, {"rows", std::move(rows)},
              {"total", data.total ? row(*data.total) : Json(nullptr)}};
}

// ---------------------------------------------------------------------------
// SVG

std::string svg_scatter(const FrontierDataset& data) {
  constexpr double width = 720.0;
  constexpr double height = 480.0;
  constexpr double left = 80.0;
  constexpr double right = 30.0;
  constexpr double top = 40.0;
  constexpr double bottom = 60.0;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  std::vector<const FrontierRow*> points;
  for (const auto& r : data.rows) points.push_back(&r);
  if (data.total) points.push_back(&*data.total);

  bool log_x = !points.empty();
  double x_min = 0.0;
  double x_max = 1.0;
  double y_min = 0.0;
  double y_max = 0.1;
  double sigma_max = 0.0;
  for (const auto* p : points) {
    if (!(p->allocated_scr > 0.0)) log_x = false;
    y_min = std::min(y_min, p->expected_rorac);
    y_max = std::max(y_max, p->expected_rorac);
    if (p->stdev_rorac) sigma_max = std::max(sigma_max, *p->stdev_rorac);
  }
  if (!points.empty()) {
    double lo = points.front()->allocated_scr;
    double hi = lo;
    for (const auto* p : points) {
      lo = std::min(lo, p->allocated_scr);
      hi = std::max(hi, p->allocated_scr);
    }
    if (log_x) {
      x_min = std::floor(std::log10(lo));
      x_max = std::ceil(std::log10(hi));
      if (x_max <= x_min) x_max = x_min + 1.0;
    } else {
      x_min = std::min(0.0, lo);
      x_max = hi > x_min ? hi * 1.1 : x_min + 1.0;
    }
  }
  const double pad = 0.1 * (y_max - y_min);
  y_max += pad;
  if (y_min < 0.0) y_min -= pad;

  auto sx = [&](double x) {
    const double v = log_x ? std::log10(x) : x;
    return left + (v - x_min) / (x_max - x_min) * plot_w;
  };
  auto sy = [&](double y) { return top + (y_max - y) / (y_max - y_min) * plot_h; };
  auto f = [](double v) { return format_precision(v, 6); };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f(width) << "\" height=\"" << f(height)
      << "\" viewBox=\"0 0 " << f(width) << ' ' << f(height) << "\">\n"
      << "<title>Risk-return profile</title>\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << f(width) << "\" height=\"" << f(height) << "\" fill=\"white\"/>\n";
  // Axes.
  svg << "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n"
      << "<line x1=\"" << f(left) << "\" y1=\"" << f(top + plot_h) << "\" x2=\"" << f(left + plot_w) << "\" y2=\""
      << f(top + plot_h) << "\"/>\n"
      << "<line x1=\"" << f(left) << "\" y1=\"" << f(top) << "\" x2=\"" << f(left) << "\" y2=\"" << f(top + plot_h)
      << "\"/>\n";
  if (y_min < 0.0) {
    svg << "<line x1=\"" << f(left) << "\" y1=\"" << f(sy(0.0)) << "\" x2=\"" << f(left + plot_w) << "\" y2=\""
        << f(sy(0.0)) << "\" stroke-dasharray=\"4 3\"/>\n";
  }
  svg << "</g>\n<g class=\"ticks\" font-family=\"sans-serif\" font-size=\"11\">\n";
  if (log_x) {
    for (double d = x_min; d <= x_max + 1e-9; d += 1.0) {
      const double x = left + (d - x_min) / (x_max - x_min) * plot_w;
      svg << "<text x=\"" << f(x) << "\" y=\"" << f(top + plot_h + 16) << "\" text-anchor=\"middle\">"
          << f(std::pow(10.0, d)) << "</text>\n";
    }
  } else {
    for (int k = 0; k <= 4; ++k) {
      const double v = x_min + (x_max - x_min) * k / 4.0;
      svg << "<text x=\"" << f(sx(v)) << "\" y=\"" << f(top + plot_h + 16) << "\" text-anchor=\"middle\">"
          << format_precision(v, 4) << "</text>\n";
    }
  }
  for (int k = 0; k <= 4; ++k) {
    const double v = y_min + (y_max - y_min) * k / 4.0;
    svg << "<text x=\"" << f(left - 6) << "\" y=\"" << f(sy(v) + 4) << "\" text-anchor=\"end\">"
        << format_precision(100.0 * v, 3) << "%</text>\n";
  }
  svg << "<text x=\"" << f(left + plot_w / 2) << "\" y=\"" << f(height - 16)
      << "\" text-anchor=\"middle\">Allocated SCR" << (log_x ? " (log scale)" : "") << "</text>\n"
      << "<text x=\"16\" y=\"" << f(top + plot_h / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << f(top + plot_h / 2) << ")\">E(RORAC)</text>\n</g>\n";

  if (!data.note.empty()) {
    svg << "<text x=\"" << f(left + plot_w / 2) << "\" y=\"" << f(top + plot_h / 2)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << xml_escape(data.note)
        << "</text>\n";
  }

  auto radius = [&](const FrontierRow& r) {
    if (!r.stdev_rorac || sigma_max <= 0.0) return 4.0;
    return 4.0 + 16.0 * *r.stdev_rorac / sigma_max;
  };
  svg << "<g class=\"lobs\" font-family=\"sans-serif\" font-size=\"10\">\n";
  for (const auto& r : data.rows) {
    const double cx = sx(r.allocated_scr);
    const double cy = sy(r.expected_rorac);
    svg << "<circle class=\"marker\" cx=\"" << f(cx) << "\" cy=\"" << f(cy) << "\" r=\"" << f(radius(r))
        << "\" fill=\"steelblue\" fill-opacity=\"0.5\" stroke=\"navy\"><title>" << xml_escape(r.lob)
        << "</title></circle>\n"
        << "<text x=\"" << f(cx + radius(r) + 2) << "\" y=\"" << f(cy + 3) << "\">" << xml_escape(r.lob)
        << "</text>\n";
  }
  svg << "</g>\n";
  if (data.total) {
    const FrontierRow& t = *data.total;
    const double s = radius(t);
    svg << "<g class=\"total\" font-family=\"sans-serif\" font-size=\"10\">\n"
        << "<rect class=\"marker total\" x=\"" << f(sx(t.allocated_scr) - s) << "\" y=\""
        << f(sy(t.expected_rorac) - s) << "\" width=\"" << f(2 * s) << "\" height=\"" << f(2 * s)
        << "\" fill=\"firebrick\" fill-opacity=\"0.5\" stroke=\"darkred\"><title>" << xml_escape(t.lob)
        << "</title></rect>\n"
        << "<text x=\"" << f(sx(t.allocated_scr) + s + 2) << "\" y=\"" << f(sy(t.expected_rorac) + 3) << "\">"
        << xml_escape(t.lob) << "</text>\n</g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

// ---------------------------------------------------------------------------
// Files

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, path.string(), "cannot open for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, path.string(), "cannot open for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorKind::IoError, path.string(), "write failed");
}

void emit_svg_scatter(const FrontierDataset& data, const std::filesystem::path& target) {
  write_file(target, svg_scatter(data));
}

std::vector<std::filesystem::path> write_reports(const ReportBundle& reports, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw Error(ErrorKind::IoError, dir.string(), "cannot create output directory");
  }
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& name, const std::string& csv, const Json& json) {
    write_file(dir / (name + ".csv"), csv);
    write_file(dir / (name + ".json"), json.dump(2) + "\n");
    written.push_back(dir / (name + ".csv"));
    written.push_back(dir / (name + ".json"));
  };
  if (reports.aggregation) emit("aggregation", aggregation_csv(*reports.aggregation), aggregation_json(*reports.aggregation));
  if (reports.allocation) {
    emit("allocation", allocation_csv(*reports.allocation), allocation_json(*reports.allocation));
    const DiversificationReport div = diversification_report(*reports.allocation);
    write_file(dir / "diversification.csv", diversification_csv(div));
    written.push_back(dir / "diversification.csv");
  }
  if (reports.rorac) emit("rorac", rorac_csv(*reports.rorac), rorac_json(*reports.rorac));
  if (reports.mc) emit("mc", mc_csv(*reports.mc), mc_json(*reports.mc));
  if (reports.comparison) emit("comparison", comparison_csv(*reports.comparison), comparison_json(*reports.comparison));
  if (reports.optimization) {
    emit("optimization", optimization_csv(*reports.optimization), optimization_json(*reports.optimization));
  }
  if (reports.frontier) {
    emit("frontier", frontier_csv(*reports.frontier), frontier_json(*reports.frontier));
    emit_svg_scatter(*reports.frontier, dir / "frontier.svg");
    written.push_back(dir / "frontier.svg");
  }
  return written;
}

}  // namespace scralloc::io
