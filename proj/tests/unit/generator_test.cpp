#include "doctest.h"

#include <regex>

#include "colexpand/generator.hpp"
#include "support/fake_llm.hpp"
#include "support/toy_lake.hpp"

using namespace colexpand;
using colexpand::testing::FakeKnowledge;
using colexpand::testing::FakeLlm;

namespace {

TableSchema table(const std::string& name, std::vector<std::string> cols, std::optional<std::string> summary = {}) {
  TableSchema t{name, {}, std::move(summary)};
  for (auto& c : cols) t.columns.emplace_back(c);
  return t;
}

FakeKnowledge hr_knowledge() {
  FakeKnowledge k;
  k.expansions = {{"e", "Employee"}, {"dt", "Day Time"}, {"ph", "Phone"}, {"sal", "Salary"},
                  {"russ", "Russell"}, {"cd", "Code"}};
  return k;
}

struct Harness {
  explicit Harness(FakeKnowledge k = hr_knowledge()) { mock->set_responder(FakeLlm(std::move(k))); }
  std::shared_ptr<MockProvider> mock = std::make_shared<MockProvider>();
  LlmGateway gateway{mock};
  TemplateSet templates = TemplateSet::builtin();
};

std::vector<std::size_t> batch_sizes(const std::vector<CompletionRequest>& requests) {
  static const std::regex header("Expand the following ([0-9]+) column names");
  std::vector<std::size_t> out;
  for (const auto& r : requests) {
    std::smatch m;
    if (std::regex_search(r.user_text, m, header)) out.push_back(std::stoul(m[1]));
  }
  return out;
}

}  // namespace

TEST_CASE("context and peer sampling") {
  std::map<std::string, const TableSchema*> by_name;
  std::vector<TableSchema> all;
  all.reserve(151);
  all.push_back(table("TARGET", {"a"}, "The target."));
  TableGroup group{"g1", "Topic", {"TARGET"}};
  for (int i = 0; i < 150; ++i) {
    all.push_back(table("P" + std::to_string(1000 + i), {"x"}, "Peer " + std::to_string(i) + "."));
    group.members.push_back(all.back().name);
  }
  for (const auto& t : all) by_name.emplace(t.name, &t);

  GeneratorConfig cfg;
  cfg.seed = 9;
  SUBCASE("three peers are all shown") {
    TableGroup small{"g2", "Topic", {"TARGET", "P1000", "P1001", "P1002"}};
    CHECK(sample_peers(all[0], small, cfg).size() == 3);
    auto ctx = build_context(all[0], &small, by_name, cfg);
    CHECK(ctx.find("Target table: TARGET") != std::string::npos);
    CHECK(ctx.find("- P1001: Peer 1.") != std::string::npos);
  }
  SUBCASE("q caps the sample, reproducibly") {
    auto first = sample_peers(all[0], group, cfg);
    auto second = sample_peers(all[0], group, cfg);
    CHECK(first.size() == 100);
    CHECK(first == second);
    CHECK(std::is_sorted(first.begin(), first.end()));
    CHECK(std::find(first.begin(), first.end(), "TARGET") == first.end());
    cfg.seed = 10;
    CHECK(sample_peers(all[0], group, cfg) != first);
  }
  SUBCASE("ablations") {
    cfg.context_enabled = false;
    CHECK(build_context(all[0], &group, by_name, cfg).empty());
    cfg.context_enabled = true;
    cfg.table_names_enabled = false;
    auto ctx = build_context(all[0], &group, by_name, cfg);
    CHECK(ctx.find("TARGET") == std::string::npos);
    CHECK(ctx.find("P10") == std::string::npos);
    CHECK(ctx.find("Target table summary: The target.") != std::string::npos);
    cfg.table_names_enabled = true;
    cfg.baseline = true;
    CHECK(build_context(all[0], &group, by_name, cfg).empty());
  }
}

TEST_CASE("prompt contents") {
  auto emps = table("EMPS", {"eSal"});
  GeneratorConfig cfg;
  const auto t = TemplateSet::builtin();
  auto full = build_generator_prompt(emps, emps.columns, "Target table: EMPS\n", cfg, t);
  CHECK(full.system.find("1. Expand all abbreviations in a column name.") != std::string::npos);
  CHECK(full.system.find("9. ") != std::string::npos);
  CHECK(full.system.find("TOKENS: e | DT | Ph") != std::string::npos);
  CHECK(full.user.find("Expand the following 1 column names of table EMPS:\neSal") != std::string::npos);

  cfg.rules_enabled = false;
  CHECK(build_generator_prompt(emps, emps.columns, "", cfg, t).system.find("Follow these rules") == std::string::npos);
  cfg.cot_enabled = false;
  auto direct = build_generator_prompt(emps, emps.columns, "", cfg, t);
  CHECK(direct.system.find("TOKENS:") == std::string::npos);
  CHECK(direct.system.find("eDTPh => Employee Day Time Phone") != std::string::npos);

  GeneratorConfig base;
  base.baseline = true;
  auto b = build_generator_prompt(emps, emps.columns, "", base, t);
  CHECK(b.system.find("c_name => customer name") != std::string::npos);
  CHECK(b.user.find("EMPS") == std::string::npos);
}

TEST_CASE("reply parsing") {
  auto cot = parse_cot_reply(
      "Here you go.\n**COLUMN:** eDTPh\nTOKENS: e | DT | Ph\nRULE: e -> Employee\nRULE: DT → Day  Time\n"
      "RULE: Ph -> Phone\nEXPANSION: Employee Day Time Phone\n\nCOLUMN: eDTPh\nTOKENS: x\n");
  REQUIRE(cot.count("eDTPh"));
  const auto& p = cot.at("eDTPh");
  CHECK(p.tokens == std::vector<std::string>{"e", "DT", "Ph"});
  REQUIRE(p.rules.size() == 3);
  CHECK(p.rules[1].expansion == "Day Time");
  CHECK(p.expansion == "Employee Day Time Phone");

  auto direct = parse_direct_reply("- c_name => customer  name\nnoise\nRUSS_CD => Russell Code\n");
  CHECK(direct.at("c_name") == "customer name");
  CHECK(direct.at("RUSS_CD") == "Russell Code");
}

TEST_CASE("records from reasoning blocks") {
  const ColumnName col("eDTPh");
  ParsedColumn ok{"eDTPh", {"e", "DT", "Ph"}, {{"e", "Employee"}, {"DT", "Day Time"}, {"Ph", "Phone"}}, "Employee Day Time Phone"};
  auto out = record_from_cot("EMPS", col, ok);
  REQUIRE(out.record);
  CHECK(out.record->expansion == "Employee Day Time Phone");
  CHECK(out.record->token_sequence.delimiters == std::vector<std::string>{"", ""});

  auto bad_tokens = ok;
  bad_tokens.tokens = {"e", "DTP"};
  CHECK_FALSE(record_from_cot("EMPS", col, bad_tokens).record);
  auto bad_rule = ok;
  bad_rule.rules[2].expansion = "Telephone number";  // "Ph" fits, but...
  bad_rule.rules[1].expansion = "Weekday";            // "DT" does not fit "Weekday"
  CHECK_FALSE(record_from_cot("EMPS", col, bad_rule).record);
  auto missing_rule = ok;
  missing_rule.rules.pop_back();
  CHECK_FALSE(record_from_cot("EMPS", col, missing_rule).record);
  auto bad_total = ok;
  bad_total.expansion = "Something Else";
  CHECK_FALSE(record_from_cot("EMPS", col, bad_total).record);
}

TEST_CASE("records from bare expansions") {
  auto a = record_from_direct("RUSSELL_INDEX", ColumnName("RUSS_CD"), "Russell Code");
  REQUIRE(a.record);
  CHECK(a.record->rules == std::vector<ExpansionRule>{{"RUSS", "Russell"}, {"CD", "Code"}});

  auto b = record_from_direct("EMPS", ColumnName("eSal"), "employee salary");
  REQUIRE(b.record);
  CHECK(b.record->token_sequence.tokens == std::vector<std::string>{"eSal"});
  CHECK(b.record->expansion == "employee salary");

  auto c = record_from_direct("T", ColumnName("addr_ln_2"), "address line 2");
  REQUIRE(c.record);
  CHECK(c.record->rules[2] == ExpansionRule{"2", "2"});

  CHECK_FALSE(record_from_direct("T", ColumnName("qty"), "amount").record);
  CHECK_FALSE(record_from_direct("T", ColumnName("a_b"), "apple").record);
  CHECK_FALSE(record_from_direct("T", ColumnName("a__b"), "apple banana").record);
}

TEST_CASE("expand_batch against the fake model") {
  Harness h;
  auto emps = table("EMPS", {"eDTPh", "Date", "eSal"});
  auto out = expand_batch(emps, emps.columns, "Target table: EMPS\n", GeneratorConfig{}, h.gateway, h.templates);
  REQUIRE(out.records.size() == 3);
  CHECK(out.fallback_count == 0);
  CHECK(out.records[0].token_sequence.tokens == std::vector<std::string>{"e", "DT", "Ph"});
  CHECK(out.records[0].expansion == "Employee Day Time Phone");
  CHECK(out.records[1].rules == std::vector<ExpansionRule>{{"Date", "Date"}});
  CHECK(out.records[2].expansion == "Employee Salary");

  auto russ = table("RUSSELL_INDEX", {"RUSS_CD"});
  auto r = expand_batch(russ, russ.columns, "Target table: RUSSELL_INDEX\n", GeneratorConfig{}, h.gateway, h.templates);
  CHECK(r.records[0].expansion == "Russell Code");
  CHECK(h.mock->captured().back().user_text.find("Target table: RUSSELL_INDEX") != std::string::npos);
}

TEST_CASE("failing columns are re-asked once, then fall back") {
  auto k = hr_knowledge();
  k.flaky_columns = {"eSal"};
  k.broken_columns = {"eDTPh"};
  Harness h(k);
  auto emps = table("EMPS", {"eDTPh", "eSal", "Date"});
  auto out = expand_batch(emps, emps.columns, "", GeneratorConfig{}, h.gateway, h.templates);
  CHECK(out.fallback_count == 1);
  CHECK(out.records[0].fallback);
  CHECK(out.records[0].expansion == "eDTPh");
  CHECK(out.records[1].expansion == "Employee Salary");
  CHECK_FALSE(out.records[1].fallback);

  const auto calls = h.mock->captured();
  REQUIRE(calls.size() == 2);
  CHECK(batch_sizes(calls) == std::vector<std::size_t>{3, 2});
  CHECK(calls[1].user_text.find("- eDTPh: tokens qqq do not spell") != std::string::npos);
}

TEST_CASE("direct mode builds records from bare expansions") {
  Harness h;
  auto emps = table("EMPS", {"e_Sal", "RUSS_CD"});
  GeneratorConfig cfg;
  cfg.cot_enabled = false;
  auto out = expand_batch(emps, emps.columns, "", cfg, h.gateway, h.templates);
  CHECK(out.fallback_count == 0);
  CHECK(out.records[0].expansion == "Employee Salary");
  CHECK(out.records[1].rules[0] == ExpansionRule{"RUSS", "Russell"});
}

TEST_CASE("run_generator batches p columns per call") {
  Harness h;
  std::vector<std::string> cols;
  for (int i = 0; i < 23; ++i) cols.push_back("c" + std::to_string(i) + "_cd");
  std::vector<TableSchema> schemas = {table("WIDE", cols), table("EMPS", {"eSal"})};
  auto result = run_generator(schemas, {}, GeneratorConfig{}, h.gateway, h.templates);
  CHECK(result.records.size() == 24);
  CHECK(result.records[22].column.raw() == "c22_cd");
  CHECK(result.records[23].expansion == "Employee Salary");

  auto sizes = batch_sizes(h.mock->captured());
  std::sort(sizes.begin(), sizes.end());
  CHECK(sizes == std::vector<std::size_t>{1, 3, 10, 10});
}

TEST_CASE("run_generator reports failed batches with the partial output") {
  auto mock = std::make_shared<MockProvider>();
  FakeLlm fake(hr_knowledge());
  mock->set_responder([&](const CompletionRequest& r) -> std::optional<std::string> {
    if (r.user_text.find("of table BROKEN") != std::string::npos) return std::nullopt;
    return fake(r);
  });
  LlmGateway gw(mock);
  std::vector<TableSchema> schemas = {table("EMPS", {"eSal"}), table("BROKEN", {"x"})};
  try {
    run_generator(schemas, {}, GeneratorConfig{}, gw, TemplateSet::builtin());
    FAIL("expected GeneratorError");
  } catch (const GeneratorError& e) {
    CHECK(std::string(e.what()).find("BROKEN columns 1-1") != std::string::npos);
    REQUIRE(e.partial().size() == 1);
    CHECK(e.partial()[0].table_name == "EMPS");
  }
}

TEST_CASE("generator config validation") {
  GeneratorConfig cfg;
  cfg.batch_size_p = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}
