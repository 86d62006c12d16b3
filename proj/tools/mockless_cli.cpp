// mockless: prepare / generate / metrics / inspect
//
// exit codes: 0 ok, 2 configuration error, 3 backend failure, 1 anything else

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "mockless/config.hpp"
#include "mockless/fixer_memory.hpp"
#include "mockless/metrics.hpp"
#include "mockless/orchestrator.hpp"
#include "mockless/util.hpp"

using namespace mockless;
namespace fs = std::filesystem;

namespace {

struct Flags {
    std::string config;
    std::string project, cut, cache_dir, jdk_table;
    std::vector<std::string> classpath;
    int n_iter = 0, n_fix = 0, patience = 0;
    double target = 0, temperature = 0;
    std::uint64_t seed = 0;
    std::string llm, fake_script, endpoint, model, api_key_env, backend, test_root;
    int max_output_tokens = 0, context_budget = 0, timeout = 0;
    bool reuse_memory = false;
    bool force = false;
};

void add_project_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "TOML config file; flags override it")->check(CLI::ExistingFile);
    cmd->add_option("--project", f.project, "project root");
    cmd->add_option("--cut", f.cut, "class under test (FQN)");
    cmd->add_option("--cache-dir", f.cache_dir, "cache directory (default <project>/.mockless)");
    cmd->add_option("--classpath", f.classpath, "dependency jars or class directories");
    cmd->add_option("--jdk-table", f.jdk_table, "JDK member table");
}

void add_run_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--n-iter", f.n_iter, "maximum loop iterations");
    cmd->add_option("--n-fix", f.n_fix, "repair calls per failing test");
    cmd->add_option("--patience", f.patience, "zero-gain iterations before stopping");
    cmd->add_option("--target", f.target, "target CUT line coverage in (0, 1]");
    cmd->add_option("--seed", f.seed, "seed for target selection");
    cmd->add_option("--llm", f.llm, "model client")->check(CLI::IsMember({"http", "fake"}));
    cmd->add_option("--fake-script", f.fake_script, "scripted responses for --llm fake");
    cmd->add_option("--endpoint", f.endpoint, "chat completions URL");
    cmd->add_option("--model", f.model, "model name");
    cmd->add_option("--temperature", f.temperature, "sampling temperature");
    cmd->add_option("--max-output-tokens", f.max_output_tokens, "completion limit");
    cmd->add_option("--context-budget", f.context_budget, "prompt plus completion token budget");
    cmd->add_option("--api-key-env", f.api_key_env, "environment variable holding the API key");
    cmd->add_option("--backend", f.backend, "build backend")->check(CLI::IsMember({"command", "maven"}));
    cmd->add_option("--test-root", f.test_root, "generated test source root");
    cmd->add_option("--timeout", f.timeout, "per-test timeout in seconds");
    cmd->add_flag("--reuse-memory", f.reuse_memory, "keep experience memory from earlier runs");
}

bool given(CLI::App* cmd, const std::string& name) {
    try {
        return cmd->get_option(name)->count() > 0;
    } catch (const CLI::OptionNotFound&) {
        return false;
    }
}

RunConfig build_config(CLI::App* cmd, const Flags& f) {
    RunConfig c;
    if (!f.config.empty()) {
        auto dir = fs::absolute(f.config).parent_path().string();
        c = config_from_toml(load_toml(f.config), dir);
    }
    auto abs = [](const std::string& p) { return fs::absolute(p).lexically_normal().string(); };
    if (given(cmd, "--project")) c.project_root = abs(f.project);
    if (c.project_root.empty()) c.project_root = abs(".");
    if (given(cmd, "--cut")) c.cut_fqn = f.cut;
    if (given(cmd, "--cache-dir")) c.cache_dir = abs(f.cache_dir);
    if (given(cmd, "--classpath")) {
        c.classpath.clear();
        for (const auto& e : f.classpath)
            for (const auto& p : parse_classpath(e)) c.classpath.push_back(abs(p));
    }
    if (given(cmd, "--jdk-table")) c.jdk_table = abs(f.jdk_table);
    if (given(cmd, "--n-iter")) c.n_iter = f.n_iter;
    if (given(cmd, "--n-fix")) c.n_fix = f.n_fix;
    if (given(cmd, "--patience")) c.patience = f.patience;
    if (given(cmd, "--target")) c.target_line_coverage = f.target;
    if (given(cmd, "--seed")) c.rng_seed = f.seed;
    if (given(cmd, "--llm")) c.llm = f.llm;
    if (given(cmd, "--fake-script")) c.fake_script = abs(f.fake_script);
    if (given(cmd, "--endpoint")) c.params.endpoint_url = f.endpoint;
    if (given(cmd, "--model")) c.params.model_name = f.model;
    if (given(cmd, "--temperature")) c.params.temperature = f.temperature;
    if (given(cmd, "--max-output-tokens")) c.params.max_output_tokens = f.max_output_tokens;
    if (given(cmd, "--context-budget")) c.params.context_budget_tokens = f.context_budget;
    if (given(cmd, "--api-key-env")) c.api_key_env = f.api_key_env;
    if (given(cmd, "--backend") && f.backend != c.backend.kind) {
        c.backend = f.backend == "maven" ? BackendConfig::maven(c.project_root) : BackendConfig{};
    }
    if (given(cmd, "--test-root")) c.backend.test_root = abs(f.test_root);
    if (given(cmd, "--timeout")) c.backend.per_test_timeout_s = f.timeout;
    if (given(cmd, "--reuse-memory")) c.reuse_memory = f.reuse_memory;
    c.backend.project_root = c.project_root;
    return c;
}

int cmd_prepare(CLI::App* cmd, const Flags& f) {
    auto c = build_config(cmd, f);
    auto prep = prepare(c, f.force);
    nlohmann::json out = {{"cache_dir", c.cache_path()},
                          {"classes", prep.index.entries().size()},
                          {"from_cache", prep.from_cache},
                          {"warnings", prep.index.warnings.size()}};
    if (!c.cut_fqn.empty()) {
        std::size_t slices = 0;
        for (const auto& [k, v] : prep.slices) slices += v.size();
        out["cut"] = c.cut_fqn;
        out["dependencies"] = prep.dependencies.size();
        out["typestate_models"] = prep.models.size();
        out["usage_slices"] = slices;
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_generate(CLI::App* cmd, const Flags& f) {
    auto c = build_config(cmd, f);
    c.validate();
    auto client = make_client(c);
    auto result = run_loop(c, *client);
    std::cerr << "termination: " << to_string(result.manifest.termination) << ", iterations: " << result.manifest.rows.size()
              << ", tests: " << result.manifest.final_tests.size() << "\n";
    std::cout << result.manifest_path << "\n";
    return 0;
}

struct MetricsFlags {
    std::string coverage, cut, mutation;
    std::vector<std::string> test_classes, manifests;
    long long killed = -1, total = -1;
};

int cmd_metrics(const MetricsFlags& m) {
    nlohmann::json out = nlohmann::json::object();
    if (!m.coverage.empty()) {
        if (m.cut.empty()) throw ConfigError("--coverage needs --cut");
        auto report = parse_coverage_xml(m.coverage);
        std::set<std::string> tests(m.test_classes.begin(), m.test_classes.end());
        auto dep = compute_dep_metrics(report, m.cut, tests);
        out["dep"] = dep.to_json();
        out["line_coverage"] = line_coverage(report, m.cut);
        out["branch_coverage"] = branch_coverage(report, m.cut);
        if (!dep.warning.empty()) std::cerr << "warning: " << dep.warning << "\n";
    }
    if (!m.mutation.empty()) {
        std::int64_t killed = 0, total = 0;
        auto rows = parse_mutation_csv(util::read_file(m.mutation));
        for (const auto& r : rows) {
            if (!m.cut.empty() && r.class_fqn != m.cut) continue;
            killed += r.killed;
            total += r.total;
        }
        out["mutation"] = {{"killed", killed}, {"total", total}, {"score", mutation_score(killed, total)}};
    }
    if (m.killed >= 0 || m.total >= 0) {
        try {
            out["mutation_score"] = mutation_score(m.killed, m.total);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
    if (!m.manifests.empty()) {
        std::vector<RunManifest> ms;
        for (const auto& p : m.manifests) ms.push_back(RunManifest::load(p));
        out["efficiency"] = compute_efficiency(ms).to_json();
    }
    if (out.empty()) throw ConfigError("nothing to compute; give --coverage, --mutation, --killed/--total or --manifest");
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_inspect(CLI::App* cmd, const Flags& f, const std::string& what, const std::string& cls) {
    auto c = build_config(cmd, f);
    fs::path cache(c.cache_path());
    auto need = [](const fs::path& p) {
        if (!fs::exists(p)) throw ConfigError("no cached artifact at " + p.string() + "; run `mockless prepare` first");
        return p.string();
    };
    auto cut_dir = [&] {
        if (c.cut_fqn.empty()) throw ConfigError("inspect " + what + " needs --cut");
        return cache / "cuts" / c.cut_fqn;
    };
    if (what == "index") {
        auto index = ClassIndex::load(need(cache / "index.json"));
        if (cls.empty()) {
            for (const auto& [fqn, e] : index.entries()) std::cout << fqn << "\t" << to_string(e.source) << "\t" << to_string(e.kind) << "\n";
        } else {
            const auto* e = index.find(cls);
            if (!e) throw ConfigError("class not in the index: " + cls);
            auto j = index.to_json();
            for (const auto& entry : j.at("classes"))
                if (entry.value("fqn", "") == cls) std::cout << entry.dump(2) << "\n";
        }
    } else if (what == "typestate") {
        auto models = load_models(need(cut_dir() / "typestate"));
        for (const auto& [fqn, m] : models) {
            if (!cls.empty() && fqn != cls) continue;
            std::cout << describe_protocol(m) << "\n";
        }
    } else if (what == "slices") {
        auto slices = load_slices(need(cut_dir() / "slices.json"));
        for (const auto& [fqn, list] : slices) {
            if (!cls.empty() && fqn != cls) continue;
            for (const auto& s : list) std::cout << "// " << fqn << " (" << to_string(s.origin) << ", " << s.file << ":" << s.line << ")\n" << s.render() << "\n";
        }
    } else if (what == "memory") {
        if (c.cut_fqn.empty()) throw ConfigError("inspect memory needs --cut");
        ExperienceMemory mem(need(fs::path(c.run_dir()) / "memory.jsonl"), true);
        for (const auto& r : mem.records()) std::cout << r.render() << "\n";
    } else if (what == "manifest") {
        if (c.cut_fqn.empty()) throw ConfigError("inspect manifest needs --cut");
        std::cout << RunManifest::load(need(fs::path(c.run_dir()) / "manifest.json")).to_json().dump(2) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mockless unit test generation for Java classes"};
    app.require_subcommand(1);
    Flags f;

    auto* prep = app.add_subcommand("prepare", "build the class index, typestate models and usage slices");
    add_project_flags(prep, f);
    prep->add_flag("--force", f.force, "rebuild even when the cache is current");

    auto* gen = app.add_subcommand("generate", "run the generation loop for one class");
    add_project_flags(gen, f);
    add_run_flags(gen, f);

    MetricsFlags mf;
    auto* met = app.add_subcommand("metrics", "coverage, dependency coverage, mutation score and efficiency");
    met->add_option("--coverage", mf.coverage, "JaCoCo XML report")->check(CLI::ExistingFile);
    met->add_option("--cut", mf.cut, "class under test (FQN)");
    met->add_option("--test-class", mf.test_classes, "classes excluded from TLC");
    met->add_option("--mutation", mf.mutation, "mutation CSV (class,mutants_total,mutants_killed)")->check(CLI::ExistingFile);
    met->add_option("--killed", mf.killed, "killed mutants");
    met->add_option("--total", mf.total, "total mutants");
    met->add_option("--manifest", mf.manifests, "run manifests for efficiency figures")->check(CLI::ExistingFile);

    std::string what, cls;
    auto* ins = app.add_subcommand("inspect", "dump cached artifacts");
    add_project_flags(ins, f);
    ins->add_option("what", what, "artifact")->required()->check(CLI::IsMember({"index", "typestate", "slices", "memory", "manifest"}));
    ins->add_option("--class", cls, "restrict to one class");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*prep) return cmd_prepare(prep, f);
        if (*gen) return cmd_generate(gen, f);
        if (*met) return cmd_metrics(mf);
        if (*ins) return cmd_inspect(ins, f, what, cls);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const MetricsError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const BackendError& e) {
        std::cerr << "backend failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
