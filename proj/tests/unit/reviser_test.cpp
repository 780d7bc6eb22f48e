#include "doctest.h"

#include "colexpand/reviser.hpp"
#include "colexpand/sampling.hpp"
#include "colexpand/text.hpp"

using namespace colexpand;

namespace {

// Builds a valid record from "token:expansion" pairs joined by '_'.
E2Record rec(const std::string& table, std::vector<std::pair<std::string, std::string>> parts) {
  E2Record r{table, ColumnName("x"), {}, {}, "", false};
  std::string raw;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) {
      raw += "_";
      r.token_sequence.delimiters.push_back("_");
    }
    raw += parts[i].first;
    r.token_sequence.tokens.push_back(parts[i].first);
    r.rules.push_back({parts[i].first, parts[i].second});
  }
  r.column = ColumnName(raw);
  assemble_expansion(r);
  return r;
}

std::vector<E2Record> dt_records() {
  return {rec("ORDERS", {{"ord", "order"}, {"dt", "date"}}), rec("ORDERS", {{"ship", "ship"}, {"dt", "date"}}),
          rec("EMPS", {{"hire", "hire"}, {"dt", "date"}}), rec("SENSORS", {{"dt", "data"}, {"src", "source"}})};
}

struct Harness {
  std::shared_ptr<MockProvider> mock = std::make_shared<MockProvider>();
  LlmGateway gateway{mock};
  PromptTemplate tmpl = TemplateSet::builtin().reviser;
  std::vector<TableGroup> groups = {{"g1", "Sales", {"ORDERS"}}, {"g2", "Sensors", {"SENSORS"}}};
  std::map<std::string, const TableSchema*> by_name;

  void reply(std::string text) {
    mock->set_responder([text](const CompletionRequest&) { return std::optional<std::string>(text); });
  }
};

}  // namespace

TEST_CASE("build_rule_index") {
  auto index = build_rule_index(dt_records());
  const auto& dt = index.entries.at("dt");
  REQUIRE(dt.size() == 2);
  CHECK(dt[0].expansion == "date");
  CHECK(dt[0].frequency == 3);
  CHECK(dt[1].expansion == "data");
  CHECK(dt[1].frequency == 1);
  CHECK(dt[1].sample_table == "SENSORS");
  CHECK(index.total_frequency("dt") == 4);
  CHECK(index.total_frequency("nope") == 0);

  auto single = build_rule_index({rec("T", {{"e", "Employee"}, {"Sal", "Salary"}})});
  for (const auto& [token, stats] : single.entries) {
    CHECK(stats.size() == 1);
    CHECK(stats[0].frequency == 1);
  }
  CHECK(single.entries.count("sal"));  // case-folded key
}

TEST_CASE("expansions differing only in case or spacing are one expansion") {
  auto index = build_rule_index({rec("A", {{"dt", "Date"}}), rec("B", {{"DT", "date"}}), rec("C", {{"dt", "day  time"}}),
                                 rec("D", {{"dt", "Day Time"}})});
  const auto& dt = index.entries.at("dt");
  REQUIRE(dt.size() == 2);
  CHECK(dt[0].frequency == 2);
  CHECK(dt[1].expansion == "day time");
}

TEST_CASE("property: frequency counts each column once") {
  // Oracle: for each (token, normalized expansion), the number of records
  // containing at least one such rule.
  SeededRng rng(5);
  const std::vector<std::string> tokens = {"dt", "cd", "no"};
  const std::map<std::string, std::vector<std::string>> options = {
      {"dt", {"date", "data"}}, {"cd", {"code", "card"}}, {"no", {"no", "north"}}};
  for (int round = 0; round < 200; ++round) {
    std::vector<E2Record> records;
    const auto n = 1 + rng.below(6);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::pair<std::string, std::string>> parts;
      std::map<std::string, std::string> chosen;  // one expansion per token within a column
      const auto len = 1 + rng.below(4);
      for (std::size_t j = 0; j < len; ++j) {
        const auto& t = tokens[rng.below(tokens.size())];
        if (!chosen.count(t)) chosen[t] = options.at(t)[rng.below(2)];
        parts.emplace_back(t, chosen[t]);
      }
      records.push_back(rec("T" + std::to_string(i), parts));
    }
    auto index = build_rule_index(records);
    for (const auto& [token, stats] : index.entries)
      for (const auto& s : stats) {
        std::size_t expected = 0;
        for (const auto& r : records) {
          bool uses = false;
          for (const auto& rule : r.rules)
            uses = uses || (text::to_lower(rule.token) == token && text::to_lower(rule.expansion) == text::to_lower(s.expansion));
          expected += uses ? 1 : 0;
        }
        CHECK(s.frequency == expected);
      }
  }
}

TEST_CASE("select_candidates") {
  auto records = dt_records();
  records.push_back(rec("E1", {{"e", "employee"}}));
  records.push_back(rec("E2", {{"e", "electronic"}}));
  records.push_back(rec("S", {{"sal", "salary"}}));
  records.push_back(rec("C1", {{"cd", "code"}}));
  records.push_back(rec("C2", {{"cd", "card"}}));
  auto index = build_rule_index(records);
  auto c = select_candidates(index);
  CHECK(c == std::vector<std::string>{"dt", "cd"});
  CHECK(select_candidates(index, 1) == std::vector<std::string>{"dt", "cd", "e"});
  CHECK(select_candidates(index, 3).empty());
}

TEST_CASE("parse_decision") {
  auto u = parse_decision("Reasoning...\nDECISION: UNIQUE | Russell");
  REQUIRE(u);
  CHECK(u->kind == Decision::Kind::unique);
  CHECK(u->expansion == "Russell");
  CHECK(parse_decision("**DECISION:** NOT UNIQUE")->kind == Decision::Kind::not_unique);
  CHECK(parse_decision("DECISION: UNIQUE | \"date\"")->expansion == "date");
  CHECK(parse_decision("DECISION: NOT UNIQUE\nDECISION: UNIQUE | date")->kind == Decision::Kind::unique);
  CHECK_FALSE(parse_decision("no decision"));
  CHECK_FALSE(parse_decision("DECISION: UNIQUE"));
  CHECK_FALSE(parse_decision("DECISION: maybe"));
}

TEST_CASE("adjudicate") {
  const auto index = build_rule_index(dt_records());
  const auto& stats = index.entries.at("dt");
  ReviserConfig cfg;

  SUBCASE("not unique") {
    Harness h;
    h.reply("The token cond is used for condition and conditional.\nDECISION: NOT UNIQUE");
    CHECK_FALSE(adjudicate("dt", stats, h.groups, h.by_name, h.gateway, cfg, h.tmpl));
  }
  SUBCASE("unique and observed") {
    Harness h;
    h.reply("DECISION: UNIQUE | Date");
    auto a = adjudicate("dt", stats, h.groups, h.by_name, h.gateway, cfg, h.tmpl);
    REQUIRE(a);
    CHECK(a->second == "date");  // the observed spelling
  }
  SUBCASE("outside the observed set is rejected") {
    Harness h;
    h.reply("DECISION: UNIQUE | datetime");
    CHECK_FALSE(adjudicate("dt", stats, h.groups, h.by_name, h.gateway, cfg, h.tmpl));
  }
  SUBCASE("malformed replies are retried once") {
    Harness h;
    int calls = 0;
    h.mock->set_responder([&](const CompletionRequest& r) -> std::optional<std::string> {
      ++calls;
      if (r.user_text.find("did not end with") == std::string::npos) return "hmm";
      return "DECISION: UNIQUE | date";
    });
    CHECK(adjudicate("dt", stats, h.groups, h.by_name, h.gateway, cfg, h.tmpl));
    CHECK(calls == 2);
  }
  SUBCASE("a dominant single rule") {
    Harness h;
    auto russ = build_rule_index({rec("R1", {{"RUSS", "Russell"}}), rec("R2", {{"RUSS", "Russell"}}),
                                  rec("R3", {{"russ", "Russ"}})});
    h.reply("RUSS should always be expanded to Russell.\nDECISION: UNIQUE | Russell");
    auto a = adjudicate("russ", russ.entries.at("russ"), h.groups, h.by_name, h.gateway, cfg, h.tmpl);
    REQUIRE(a);
    CHECK(*a == std::make_pair(std::string("russ"), std::string("Russell")));
  }
}

TEST_CASE("reviser prompt") {
  const auto index = build_rule_index(dt_records());
  TableSchema orders{"ORDERS", {ColumnName("ord_dt"), ColumnName("ship_dt")}, std::string("Customer orders.")};
  std::map<std::string, const TableSchema*> by_name = {{"ORDERS", &orders}};
  std::vector<TableGroup> groups = {{"g2", "Sensors", {"SENSORS"}}, {"g1", "Sales", {"ORDERS"}}};
  ReviserConfig cfg;
  const auto tmpl = TemplateSet::builtin().reviser;

  auto p = build_reviser_prompt("dt", index.entries.at("dt"), groups, by_name, cfg, tmpl);
  CHECK(p.user.find("- Sales\n- Sensors") != std::string::npos);
  CHECK(p.user.find("Token: dt") != std::string::npos);
  CHECK(p.user.find("\"date\" used in 3 column names, for example in table ORDERS(ord_dt, ship_dt)") !=
        std::string::npos);

  cfg.context_enabled = false;
  auto no_ctx = build_reviser_prompt("dt", index.entries.at("dt"), groups, by_name, cfg, tmpl);
  CHECK(no_ctx.user.find("Sales") == std::string::npos);
  CHECK(no_ctx.user.find("(not available)") != std::string::npos);

  cfg.context_enabled = true;
  cfg.table_names_enabled = false;
  auto no_names = build_reviser_prompt("dt", index.entries.at("dt"), groups, by_name, cfg, tmpl);
  CHECK(no_names.user.find("ORDERS") == std::string::npos);
  CHECK(no_names.user.find("described as: Customer orders.") != std::string::npos);
}

TEST_CASE("apply_unique_rules") {
  UniqueRuleSet q;
  q.rules["dt"] = "date";
  auto records = dt_records();
  auto once = apply_unique_rules(records, q);
  CHECK(once[3].rules[0].expansion == "date");
  CHECK(once[3].expansion == "date source");
  CHECK(once[0] == records[0]);
  CHECK(apply_unique_rules(once, q) == once);
  CHECK(apply_unique_rules(records, UniqueRuleSet{}) == records);
  for (const auto& r : once) CHECK(is_valid_record(r));

  auto rebuilt = build_rule_index(once);
  CHECK(rebuilt.entries.at("dt").size() == 1);
}

TEST_CASE("run_reviser") {
  Harness h;
  h.mock->set_responder([](const CompletionRequest& r) -> std::optional<std::string> {
    if (r.user_text.find("Token: dt") != std::string::npos) return "DECISION: UNIQUE | date";
    return "DECISION: NOT UNIQUE";
  });
  auto records = dt_records();
  records.push_back(rec("E1", {{"e", "employee"}}));
  records.push_back(rec("E2", {{"e", "electronic"}}));
  records.push_back(rec("C1", {{"cd", "code"}}));
  records.push_back(rec("C2", {{"cd", "card"}}));

  ReviserConfig cfg;
  auto result = run_reviser(records, h.groups, {}, h.gateway, cfg, h.tmpl);
  CHECK(result.adjudicated == std::vector<std::string>{"dt", "cd"});
  CHECK(result.unique_rules.rules == std::map<std::string, std::string>{{"dt", "date"}});
  CHECK(build_rule_index(result.records).entries.at("dt").size() == 1);
  CHECK(build_rule_index(result.records).entries.at("e").size() == 2);
  for (const auto& req : h.mock->captured()) CHECK(req.user_text.find("Token: e\n") == std::string::npos);

  cfg.max_candidates = 1;
  auto capped = run_reviser(records, h.groups, {}, h.gateway, cfg, h.tmpl);
  CHECK(capped.adjudicated == std::vector<std::string>{"dt"});
}
