#include "doctest.h"

#include <filesystem>

#include "fixture_backend.hpp"
#include "mockless/config.hpp"
#include "mockless/orchestrator.hpp"
#include "mockless/test_file.hpp"
#include "mockless/util.hpp"

using namespace mockless;
namespace fs = std::filesystem;

namespace {

const std::string kLlm = fixture::kFixtures + "/llm";

RunConfig counter_config(const fixture::Workspace& ws, const std::string& script) {
    RunConfig c;
    c.project_root = ws.path();
    c.cut_fqn = "com.ex.count.Counter";
    c.llm = "fake";
    c.fake_script = kLlm + "/" + script;
    c.backend = fixture::command_backend(ws.path());
    return c;
}

RunResult run_with_script(const RunConfig& c) {
    auto client = make_client(c);
    return run_loop(c, *client);
}

nlohmann::json without_times(nlohmann::json j) {
    j.erase("wall_time_s");
    for (auto& r : j["rows"]) r.erase("wall_time_s");
    return j;
}

// Every test in the final file passes when run again from scratch.
void check_only_passing(const RunResult& r, const BackendConfig& backend) {
    auto outs = compile_and_run(r.test_file, backend, 20);
    REQUIRE(outs.size() == r.manifest.final_tests.size());
    for (std::size_t i = 0; i < outs.size(); ++i) {
        CHECK(outs[i].status == TestStatus::Pass);
        CHECK(outs[i].test_name == r.manifest.final_tests[i]);
    }
}

}  // namespace

// ---- config ------------------------------------------------------------------------------

TEST_CASE("toml subset") {
    auto j = parse_toml(R"(# run settings
cut = "com.ex.Foo"   # trailing comment
n_iter = 12
target_line_coverage = 0.85
reuse_memory = true
big = 1_000
hex = 0x1F
path = 'C:\raw\path'

[llm]
kind = "fake"
note = "tab\there \"quoted\""

[backend]
compile_command = ["a", "b c", 'd']
empty = []
nums = [1, 2.5, false]

[a.b]
c = 1
)");
    CHECK(j["cut"] == "com.ex.Foo");
    CHECK(j["n_iter"] == 12);
    CHECK(j["target_line_coverage"].get<double>() == 0.85);
    CHECK(j["reuse_memory"] == true);
    CHECK(j["big"] == 1000);
    CHECK(j["hex"] == 31);
    CHECK(j["path"] == "C:\\raw\\path");
    CHECK(j["llm"]["note"] == "tab\there \"quoted\"");
    CHECK(j["backend"]["compile_command"] == nlohmann::json({"a", "b c", "d"}));
    CHECK(j["backend"]["empty"].empty());
    CHECK(j["backend"]["nums"][1].get<double>() == 2.5);
    CHECK(j["a"]["b"]["c"] == 1);

    auto bad = [](const char* text) {
        try {
            parse_toml(text, "x.toml");
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(bad("a = 1\na = 2\n") == "x.toml:2: duplicate key 'a'");
    CHECK(bad("\n\nb = \"open\n").rfind("x.toml:3:", 0) == 0);
    CHECK(bad("[t]\n[t]\n").find("defined twice") != std::string::npos);
    CHECK(bad("c = {x = 1}\n").find("inline tables") != std::string::npos);
    CHECK(bad("d = 1 2\n").find("unexpected text") != std::string::npos);
    CHECK(bad("e = nope\n").find("bad value") != std::string::npos);
    CHECK(bad("[[arr]]\n").find("arrays of tables") != std::string::npos);
}

TEST_CASE("config file over defaults, paths relative to the file") {
    auto toml = parse_toml(R"(project_root = "proj"
cut = "a.B"
n_fix = 2
patience = 2
[llm]
kind = "fake"
script = "llm/s.json"
max_output_tokens = 100
[index]
classpath = ["libs/x.jar"]
[backend]
kind = "command"
compile_command = ["javac", "{test_file}"]
per_test_timeout_s = 7
)");
    RunConfig base;
    base.n_iter = 9;
    auto c = config_from_toml(toml, "/base", base);
    CHECK(c.project_root == "/base/proj");
    CHECK(c.cut_fqn == "a.B");
    CHECK(c.n_iter == 9);  // untouched keys keep the base value
    CHECK(c.n_fix == 2);
    CHECK(c.patience == 2);
    CHECK(c.target_line_coverage == 1.0);
    CHECK(c.fake_script == "/base/llm/s.json");
    CHECK(c.params.max_output_tokens == 100);
    CHECK(c.classpath == std::vector<std::string>{"/base/libs/x.jar"});
    CHECK(c.backend.project_root == "/base/proj");
    CHECK(c.backend.compile_command == std::vector<std::string>{"javac", "{test_file}"});
    CHECK(c.backend.per_test_timeout_s == 7);

    CHECK_THROWS_AS(config_from_toml(parse_toml("n_itr = 3\n"), "/"), ConfigError);
    CHECK_THROWS_AS(config_from_toml(parse_toml("[llm]\ntemp = 3\n"), "/"), ConfigError);
    CHECK_THROWS_AS(config_from_toml(parse_toml("n_iter = \"x\"\n"), "/"), ConfigError);
}

TEST_CASE("defaults and range checks") {
    RunConfig c;
    CHECK(c.n_iter == 30);
    CHECK(c.n_fix == 5);
    CHECK(c.patience == 4);
    CHECK(c.target_line_coverage == 1.0);

    fixture::Workspace ws("counter");
    c = counter_config(ws, "counter_success.json");
    CHECK_NOTHROW(c.validate());
    auto expect_bad = [&](auto mutate) {
        auto d = c;
        mutate(d);
        CHECK_THROWS_AS(d.validate(), ConfigError);
    };
    expect_bad([](RunConfig& d) { d.n_iter = 0; });
    expect_bad([](RunConfig& d) { d.n_fix = -1; });
    expect_bad([](RunConfig& d) { d.patience = 0; });
    expect_bad([](RunConfig& d) { d.target_line_coverage = 0.0; });
    expect_bad([](RunConfig& d) { d.target_line_coverage = 1.01; });
    expect_bad([](RunConfig& d) { d.project_root = "/no/such/dir"; });
    expect_bad([](RunConfig& d) { d.cut_fqn.clear(); });
    expect_bad([](RunConfig& d) { d.fake_script = "/no/such.json"; });
    expect_bad([](RunConfig& d) { d.llm = "other"; });
    auto zero = c;
    zero.n_fix = 0;
    CHECK_NOTHROW(zero.validate());

    // a bad setup aborts before any iteration
    auto missing = c;
    missing.cut_fqn = "com.ex.count.Nope";
    auto client = make_client(missing);
    CHECK_THROWS_AS(run_loop(missing, *client), ConfigError);
    CHECK_FALSE(fs::exists(fs::path(missing.run_dir()) / "manifest.json"));

    auto http = c;
    http.llm = "http";
    http.api_key_env = "MOCKLESS_TEST_UNSET_KEY";
    CHECK_THROWS_AS(make_client(http), ConfigError);
}

// ---- skeleton ----------------------------------------------------------------------------

TEST_CASE("skeleton: placeholders per public method, compiles, never overwritten") {
    fixture::Workspace ws("counter");
    auto backend = fixture::command_backend(ws.path());
    auto index = build_index(ws.path(), {}, std::string(MOCKLESS_DATA_DIR) + "/jdk_table.tsv");
    const auto* cut = index.find("com.ex.count.Counter");
    REQUIRE(cut);
    std::vector<std::string> warnings;
    auto path = init_skeleton(*cut, backend.test_root_path(), &warnings);
    CHECK(warnings.empty());
    CHECK(path == generated_test_path(backend.test_root_path(), "com.ex.count.Counter"));
    auto src = util::read_file(path);
    CHECK(util::starts_with(src, "package com.ex.count;\n"));
    CHECK(src.find("import com.ex.count.Counter;") != std::string::npos);
    CHECK(src.find("import org.junit.jupiter.api.Test;") != std::string::npos);
    CHECK(test_method_names(src) == std::vector<std::string>{"testIncrement", "testValue", "testReset", "testAtLimit"});
    auto outs = compile_and_run(path, backend, 20);
    REQUIRE(outs.size() == 4);
    for (const auto& o : outs) CHECK(o.status == TestStatus::Pass);

    util::write_file(path, src + "// edited\n");
    CHECK(init_skeleton(*cut, backend.test_root_path()) == path);
    CHECK(util::read_file(path) == src + "// edited\n");

    ClassIndex priv;
    index_source(priv, "package z;\npublic class Quiet {\n    private void hush() {}\n}\n", ClassSource::ProjectMain, "Quiet.java");
    auto dir = ws.root / "other";
    warnings.clear();
    auto qpath = init_skeleton(*priv.find("z.Quiet"), dir.string(), &warnings);
    CHECK(warnings.size() == 1);
    CHECK(test_method_names(util::read_file(qpath)).empty());
    CHECK(method_spans(util::read_file(qpath)).empty());
}

// ---- the loop ----------------------------------------------------------------------------

TEST_CASE("instant success stops at the target after one iteration") {
    fixture::Workspace ws("counter");
    auto c = counter_config(ws, "counter_success.json");
    auto r = run_with_script(c);
    CHECK(r.manifest.termination == Termination::TargetReached);
    REQUIRE(r.manifest.rows.size() == 1);
    const auto& row = r.manifest.rows[0];
    CHECK(row.line_coverage == 1.0);
    CHECK(row.passed == 2);
    CHECK(row.failed == 0);
    CHECK(row.dep.deplc == row.dep.tlc - row.dep.dlc);
    CHECK(row.tokens_in > 0);
    CHECK(fs::exists(r.manifest_path));
    CHECK(RunManifest::load(r.manifest_path).to_json() == r.manifest.to_json());
    check_only_passing(r, c.backend);
}

TEST_CASE("permanent failure stops at the plateau") {
    for (int patience : {2, 4}) {
        CAPTURE(patience);
        fixture::Workspace ws("counter");
        auto c = counter_config(ws, "counter_failure.json");
        c.patience = patience;
        c.n_fix = 3;
        auto r = run_with_script(c);
        CHECK(r.manifest.termination == Termination::Plateau);
        REQUIRE(static_cast<int>(r.manifest.rows.size()) == patience);
        for (const auto& row : r.manifest.rows) {
            CHECK(row.line_gain == 0);
            CHECK(row.failed == 1);
            CHECK(row.max_repair_calls <= c.n_fix);
            CHECK(row.max_repair_calls == c.n_fix);
        }
        check_only_passing(r, c.backend);
        CHECK(util::read_file(r.test_file).find("startsAtFive") == std::string::npos);
    }
}

TEST_CASE("slow progress runs out of iterations") {
    fixture::Workspace ws("counter");
    auto c = counter_config(ws, "counter_slow.json");
    c.n_iter = 2;
    auto r = run_with_script(c);
    CHECK(r.manifest.termination == Termination::BudgetExhausted);
    REQUIRE(r.manifest.rows.size() == 2);
    CHECK(r.manifest.rows[0].iteration == 1);
    CHECK(r.manifest.rows[1].iteration == 2);
    CHECK(r.manifest.rows[0].line_gain > 0);
    CHECK(r.manifest.rows[1].line_gain > 0);
    CHECK(r.manifest.rows[1].covered_lines >= r.manifest.rows[0].covered_lines);
    CHECK(r.manifest.rows[1].line_coverage < 1.0);
    check_only_passing(r, c.backend);
}

TEST_CASE("same config and script give the same manifest") {
    nlohmann::json first, second;
    for (auto* out : {&first, &second}) {
        fixture::Workspace ws("counter");
        auto c = counter_config(ws, "counter_slow.json");
        c.n_iter = 3;
        *out = without_times(run_with_script(c).manifest.to_json());
    }
    CHECK(first.dump() == second.dump());
}

TEST_CASE("an existing test file is appended to") {
    fixture::Workspace ws("counter");
    auto c = counter_config(ws, "counter_success.json");
    auto path = generated_test_path((ws.root / "src/test/java").string(), c.cut_fqn);
    fs::create_directories(fs::path(path).parent_path());
    util::write_file(path,
                     "package com.ex.count;\n\nimport static org.junit.jupiter.api.Assertions.*;\n\nimport org.junit.jupiter.api.Test;\n\n"
                     "class CounterMocklessTest {\n    @Test\n    void mine() {\n        assertEquals(0, new Counter(1).value());\n    }\n\n"
                     "    @Test\n    void broken() {\n        assertEquals(1, new Counter(1).value());\n    }\n}\n");
    auto r = run_with_script(c);
    auto names = test_method_names(util::read_file(path));
    CHECK(names == std::vector<std::string>{"mine", "countsUp", "stopsAtLimit"});
    CHECK(r.manifest.baseline_line_coverage > 0.0);
    REQUIRE(r.manifest.warnings.size() == 1);
    CHECK(r.manifest.warnings[0].find("broken") != std::string::npos);
}

TEST_CASE("runtime protocol failures feed the typestate model") {
    fixture::Workspace ws("xmlwriter");
    RunConfig c;
    c.project_root = ws.path();
    c.cut_fqn = "com.ex.xml.ToXmlGenerator";
    c.llm = "fake";
    c.fake_script = kLlm + "/writer_protocol.json";
    c.backend = fixture::command_backend(ws.path());
    c.n_iter = 1;
    auto r = run_with_script(c);
    REQUIRE(r.manifest.rows.size() == 1);
    const auto& row = r.manifest.rows[0];
    CHECK(row.failed == 0);
    CHECK(row.repaired == 1);
    CHECK(row.max_repair_calls == 2);  // stage 1 then stage 2
    const auto& m = r.models.at("com.ex.xml.ToXmlGenerator");
    CHECK(m.is_blocked(kInitState, "writeStartObject"));
    CHECK(transition_probability(m, kInitState, "writeStartObject") == 0.0);
    CHECK(m.counts.at({"setNextName", "writeStartObject"}) >= 1);
    CHECK(fs::exists(fs::path(c.run_dir()) / "typestate"));
    auto text = util::read_file(r.test_file);
    CHECK(text.find("gen.setNextName(new QName(\"root\"));") != std::string::npos);
    check_only_passing(r, c.backend);
}

// ---- efficiency --------------------------------------------------------------------------

TEST_CASE("efficiency figures") {
    RunManifest m;
    m.cut_methods = 10;
    for (int i = 1; i <= 4; ++i) {
        IterationRow r;
        r.iteration = i;
        r.tokens_in = 20000;
        r.tokens_out = 5000;
        r.wall_time_s = 3.0;
        m.rows.push_back(r);
    }
    auto e = compute_efficiency(m);
    CHECK(e.tokens_per_iteration == 25000.0);
    REQUIRE(e.tokens_per_method);
    CHECK(*e.tokens_per_method == 10000.0);
    CHECK(e.time_per_iteration == 3.0);
    CHECK(*e.time_per_method == doctest::Approx(1.2));
    CHECK(e.mean_iterations == 4.0);

    RunManifest one;
    one.cut_methods = 1;
    one.rows.push_back(m.rows[0]);
    auto e1 = compute_efficiency(one);
    CHECK(e1.tokens_per_iteration == 25000.0);
    CHECK(*e1.tokens_per_method == 25000.0);
    CHECK(e1.time_per_iteration == 3.0);

    RunManifest none = m;
    none.cut_methods = 0;
    auto e0 = compute_efficiency(none);
    CHECK_FALSE(e0.tokens_per_method);
    CHECK_FALSE(e0.time_per_method);
    CHECK(e0.to_json()["tokens_per_method"].is_null());

    auto both = compute_efficiency(std::vector<RunManifest>{m, one});
    CHECK(both.mean_iterations == 2.5);
    CHECK(*both.tokens_per_method == doctest::Approx((10000.0 + 25000.0) / 2));
}
