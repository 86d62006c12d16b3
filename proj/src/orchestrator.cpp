#include "mockless/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <set>

#include "mockless/fixer_memory.hpp"
#include "mockless/java/parser.hpp"
#include "mockless/path_planner.hpp"
#include "mockless/test_file.hpp"
#include "mockless/util.hpp"

namespace mockless {

namespace fs = std::filesystem;

namespace {

std::string absolute_from(const std::string& base_dir, const std::string& p) {
    if (p.empty()) return p;
    fs::path path(p);
    if (path.is_absolute()) return path.lexically_normal().string();
    return (fs::path(base_dir) / path).lexically_normal().string();
}

std::string safe_name(const std::string& fqn) {
    std::string out;
    for (char c : fqn) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_') ? c : '_';
    return out;
}

std::vector<fs::path> java_files(const std::string& root, const std::string& skip_dir) {
    std::vector<fs::path> out;
    if (!fs::is_directory(root)) return out;
    auto skip = skip_dir.empty() ? fs::path() : fs::weakly_canonical(skip_dir);
    for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
        if (it->is_directory()) {
            auto name = it->path().filename().string();
            if ((!skip.empty() && fs::weakly_canonical(it->path()) == skip) || name == "target" || name == ".git")
                it.disable_recursion_pending();
            continue;
        }
        if (it->path().extension() == ".java") out.push_back(it->path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Everything the cached artifacts depend on.
std::string source_stamp(const RunConfig& c, const std::string& cut) {
    std::uint64_t h = util::fnv1a64("stamp-v1:" + cut);
    for (const auto& p : java_files(c.project_root, c.cache_path())) {
        h = util::fnv1a64(fs::relative(p, c.project_root).generic_string(), h);
        h = util::fnv1a64(util::read_file(p.string()), h);
    }
    for (const auto& e : c.classpath) {
        h = util::fnv1a64(e, h);
        std::error_code ec;
        if (fs::is_regular_file(e, ec)) {
            h = util::fnv1a64(std::to_string(fs::file_size(e, ec)), h);
            h = util::fnv1a64(std::to_string(fs::last_write_time(e, ec).time_since_epoch().count()), h);
        }
    }
    h = util::fnv1a64(util::read_file(c.jdk_table_path()), h);
    return util::hex64(h);
}

bool stamp_matches(const fs::path& file, const std::string& stamp) {
    std::error_code ec;
    return fs::exists(file, ec) && util::trim(util::read_file(file.string())) == stamp;
}

std::string capitalize(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

const ValidationOutcome* outcome_named(const std::vector<ValidationOutcome>& outs, const std::string& name) {
    for (const auto& o : outs)
        if (o.test_name == name) return &o;
    return nullptr;
}

ValidationOutcome unparseable_outcome(const std::string& what) {
    ValidationOutcome o;
    o.test_name = "?";
    o.status = TestStatus::CompileError;
    ErrorReport r;
    ErrorEntry e;
    e.message = "test method does not parse: " + what;
    r.entries.push_back(e);
    o.report = r;
    return o;
}

struct PendingBlock {
    std::string class_fqn, from, to;
    bool operator<(const PendingBlock& o) const { return std::tie(class_fqn, from, to) < std::tie(o.class_fqn, o.from, o.to); }
};

std::string shorten(std::string s, std::size_t n) {
    if (s.size() > n) s = s.substr(0, n - 3) + "...";
    return s;
}

}  // namespace

// ---- configuration ------------------------------------------------------------------------

std::string RunConfig::cache_path() const {
    return cache_dir.empty() ? (fs::path(project_root) / ".mockless").string() : cache_dir;
}

std::string RunConfig::jdk_table_path() const {
    return jdk_table.empty() ? std::string(MOCKLESS_DATA_DIR) + "/jdk_table.tsv" : jdk_table;
}

std::string RunConfig::run_dir() const { return (fs::path(cache_path()) / "runs" / safe_name(cut_fqn)).string(); }

void RunConfig::validate() const {
    if (project_root.empty() || !fs::is_directory(project_root)) throw ConfigError("project root is not a directory: '" + project_root + "'");
    if (cut_fqn.empty()) throw ConfigError("no class under test given");
    if (n_iter < 1) throw ConfigError("n_iter must be at least 1");
    if (n_fix < 0) throw ConfigError("n_fix must not be negative");
    if (patience < 1) throw ConfigError("patience must be at least 1");
    if (!(target_line_coverage > 0.0 && target_line_coverage <= 1.0)) throw ConfigError("target line coverage must be in (0, 1]");
    if (llm != "http" && llm != "fake") throw ConfigError("llm must be 'http' or 'fake', not '" + llm + "'");
    if (llm == "fake" && (fake_script.empty() || !fs::exists(fake_script)))
        throw ConfigError("fake LLM script not found: '" + fake_script + "'");
    if (backend.kind != "command" && backend.kind != "maven") throw ConfigError("unknown backend kind '" + backend.kind + "'");
    if (!fs::exists(jdk_table_path())) throw ConfigError("JDK table not found: " + jdk_table_path());
    if (params.max_output_tokens <= 0 || params.context_budget_tokens <= params.max_output_tokens)
        throw ConfigError("context budget must exceed max_output_tokens");
}

nlohmann::json RunConfig::to_json() const {
    return {{"project_root", project_root},
            {"cut", cut_fqn},
            {"n_iter", n_iter},
            {"n_fix", n_fix},
            {"patience", patience},
            {"target_line_coverage", target_line_coverage},
            {"rng_seed", rng_seed},
            {"llm", {{"kind", llm},
                     {"script", fake_script},
                     {"endpoint", params.endpoint_url},
                     {"model", params.model_name},
                     {"temperature", params.temperature},
                     {"max_output_tokens", params.max_output_tokens},
                     {"context_budget_tokens", params.context_budget_tokens},
                     {"api_key_env", api_key_env}}},
            {"backend", backend_to_json(backend)},
            {"cache_dir", cache_path()},
            {"classpath", classpath},
            {"jdk_table", jdk_table_path()},
            {"reuse_memory", reuse_memory},
            {"slices_per_dependency", slices_per_dependency}};
}

RunConfig config_from_toml(const nlohmann::json& toml, const std::string& base_dir, RunConfig c) {
    auto unknown = [](const std::string& where, const nlohmann::json& table, const std::set<std::string>& known) {
        for (auto it = table.begin(); it != table.end(); ++it)
            if (!known.count(it.key())) throw ConfigError("unknown config key '" + where + it.key() + "'");
    };
    try {
        unknown("", toml, {"project_root", "cut", "n_iter", "n_fix", "patience", "target_line_coverage", "rng_seed", "cache_dir",
                           "reuse_memory", "slices_per_dependency", "llm", "backend", "index"});
        if (toml.contains("project_root")) c.project_root = absolute_from(base_dir, toml["project_root"].get<std::string>());
        if (toml.contains("cut")) c.cut_fqn = toml["cut"].get<std::string>();
        if (toml.contains("n_iter")) c.n_iter = toml["n_iter"].get<int>();
        if (toml.contains("n_fix")) c.n_fix = toml["n_fix"].get<int>();
        if (toml.contains("patience")) c.patience = toml["patience"].get<int>();
        if (toml.contains("target_line_coverage")) c.target_line_coverage = toml["target_line_coverage"].get<double>();
        if (toml.contains("rng_seed")) c.rng_seed = toml["rng_seed"].get<std::uint64_t>();
        if (toml.contains("cache_dir")) c.cache_dir = absolute_from(base_dir, toml["cache_dir"].get<std::string>());
        if (toml.contains("reuse_memory")) c.reuse_memory = toml["reuse_memory"].get<bool>();
        if (toml.contains("slices_per_dependency")) c.slices_per_dependency = toml["slices_per_dependency"].get<std::size_t>();

        if (toml.contains("llm")) {
            const auto& l = toml["llm"];
            unknown("llm.", l, {"kind", "script", "endpoint", "model", "temperature", "max_output_tokens", "context_budget_tokens",
                                "api_key_env"});
            if (l.contains("kind")) c.llm = l["kind"].get<std::string>();
            if (l.contains("script")) c.fake_script = absolute_from(base_dir, l["script"].get<std::string>());
            if (l.contains("endpoint")) c.params.endpoint_url = l["endpoint"].get<std::string>();
            if (l.contains("model")) c.params.model_name = l["model"].get<std::string>();
            if (l.contains("temperature")) c.params.temperature = l["temperature"].get<double>();
            if (l.contains("max_output_tokens")) c.params.max_output_tokens = l["max_output_tokens"].get<int>();
            if (l.contains("context_budget_tokens")) c.params.context_budget_tokens = l["context_budget_tokens"].get<int>();
            if (l.contains("api_key_env")) c.api_key_env = l["api_key_env"].get<std::string>();
        }
        if (toml.contains("index")) {
            const auto& ix = toml["index"];
            unknown("index.", ix, {"classpath", "jdk_table"});
            if (ix.contains("classpath")) {
                std::vector<std::string> cp = ix["classpath"].is_string() ? parse_classpath(ix["classpath"].get<std::string>())
                                                                          : ix["classpath"].get<std::vector<std::string>>();
                c.classpath.clear();
                for (const auto& e : cp) c.classpath.push_back(absolute_from(base_dir, e));
            }
            if (ix.contains("jdk_table")) c.jdk_table = absolute_from(base_dir, ix["jdk_table"].get<std::string>());
        }
        if (toml.contains("backend")) {
            auto b = toml["backend"];
            unknown("backend.", b, {"kind", "test_root", "reports_dir", "coverage_report", "compile_command", "run_command",
                                    "coverage_command", "maven_executable", "per_test_timeout_s"});
            b["project_root"] = c.project_root;
            c.backend = backend_from_json(b);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    return c;
}

std::unique_ptr<LlmClient> make_client(const RunConfig& config) {
    if (config.llm == "fake") return std::make_unique<FakeLlm>(FakeLlm::load(config.fake_script));
    const char* key = std::getenv(config.api_key_env.c_str());
    if (!key || !*key) throw ConfigError("environment variable " + config.api_key_env + " holds no API key");
    if (config.params.endpoint_url.empty()) throw ConfigError("no model endpoint configured");
    return std::make_unique<HttpChatClient>(key);
}

// ---- preparation ---------------------------------------------------------------------------

Preparation prepare(const RunConfig& config, bool force) {
    if (config.project_root.empty() || !fs::is_directory(config.project_root))
        throw ConfigError("project root is not a directory: '" + config.project_root + "'");
    Preparation prep;
    fs::path cache(config.cache_path());
    fs::create_directories(cache);

    auto index_stamp = source_stamp(config, "");
    if (!force && stamp_matches(cache / "index.stamp", index_stamp) && fs::exists(cache / "index.json")) {
        prep.index = ClassIndex::load((cache / "index.json").string());
        prep.from_cache = true;
    } else {
        prep.index = build_index(config.project_root, config.classpath, config.jdk_table_path());
        prep.index.save((cache / "index.json").string());
        util::write_file((cache / "index.stamp").string(), index_stamp + "\n");
    }
    if (config.cut_fqn.empty()) return prep;

    const ClassEntry* cut = prep.index.find(config.cut_fqn);
    if (!cut) throw ConfigError("class under test not found in the project: " + config.cut_fqn);
    if (cut->source != ClassSource::ProjectMain) throw ConfigError("class under test is not a project source: " + config.cut_fqn);
    prep.dependencies = collect_dependencies(*cut, prep.index);

    fs::path dir = cache / "cuts" / safe_name(config.cut_fqn);
    auto cut_stamp = source_stamp(config, config.cut_fqn);
    if (!force && stamp_matches(dir / "stamp", cut_stamp) && fs::exists(dir / "slices.json")) {
        prep.models = load_models((dir / "typestate").string());
        prep.slices = load_slices((dir / "slices.json").string());
        return prep;
    }
    prep.from_cache = false;

    auto cut_path = fs::path(config.project_root) / cut->origin;
    std::string cut_source = util::read_file(cut_path.string());
    std::set<std::string> names{cut->simple_name};
    for (const auto& d : prep.dependencies) names.insert(util::last_component(d.fqn));
    std::vector<std::string> usages;
    for (const auto& p : java_files(config.project_root, config.cache_path())) {
        if (fs::equivalent(p, cut_path)) continue;
        auto text = util::read_file(p.string());
        if (std::any_of(names.begin(), names.end(), [&](const std::string& n) { return text.find(n) != std::string::npos; }))
            usages.push_back(std::move(text));
    }
    prep.models = build_from_source(cut_source, usages);

    std::string test_root = config.backend.test_root.empty() ? (fs::path(config.project_root) / "src/test/java").string()
                                                              : config.backend.test_root_path();
    prep.slices = mine_usages({config.project_root}, prep.dependencies, test_root);

    fs::remove_all(dir);
    fs::create_directories(dir);
    save_models(prep.models, (dir / "typestate").string());
    save_slices(prep.slices, (dir / "slices.json").string());
    util::write_file((dir / "stamp").string(), cut_stamp + "\n");
    return prep;
}

// ---- skeleton ------------------------------------------------------------------------------

std::string init_skeleton(const ClassEntry& cut, const std::string& test_root, std::vector<std::string>* warnings) {
    auto path = generated_test_path(test_root, cut.fqn);
    if (fs::exists(path)) return path;

    std::vector<std::string> names;
    std::set<std::string> used;
    for (const auto& m : cut.methods) {
        if (m.visibility != Visibility::Public) continue;
        std::string name = "test" + capitalize(m.name);
        if (used.count(name)) {
            int k = 2;
            while (used.count(name + std::to_string(k))) ++k;
            name += std::to_string(k);
        }
        used.insert(name);
        names.push_back(name);
    }
    if (names.empty() && warnings) warnings->push_back(cut.fqn + " has no public methods; the skeleton holds no placeholders");

    std::string src;
    if (!cut.package.empty()) src += "package " + cut.package + ";\n\n";
    src += "import static org.junit.jupiter.api.Assertions.*;\n\n";
    if (!cut.package.empty()) src += "import " + cut.fqn + ";\n";
    src += "import org.junit.jupiter.api.Test;\n\n";
    src += "class " + util::last_component(generated_test_class(cut.fqn)) + " {\n";
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) src += "\n";
        src += "    @Test\n    void " + names[i] + "() {\n    }\n";
    }
    src += "}\n";
    fs::create_directories(fs::path(path).parent_path());
    util::write_file(path, src);
    return path;
}

// ---- manifest ------------------------------------------------------------------------------

std::string to_string(Termination t) {
    switch (t) {
        case Termination::TargetReached: return "TARGET_REACHED";
        case Termination::Plateau: return "PLATEAU";
        case Termination::BudgetExhausted: return "BUDGET_EXHAUSTED";
    }
    return "?";
}

Termination termination_from_string(const std::string& s) {
    if (s == "TARGET_REACHED") return Termination::TargetReached;
    if (s == "PLATEAU") return Termination::Plateau;
    if (s == "BUDGET_EXHAUSTED") return Termination::BudgetExhausted;
    throw ConfigError("unknown termination reason '" + s + "'");
}

nlohmann::json IterationRow::to_json() const {
    return {{"iteration", iteration},
            {"plans", plans},
            {"candidates", candidates},
            {"passed", passed},
            {"repaired", repaired},
            {"failed", failed},
            {"repair_calls", repair_calls},
            {"max_repair_calls", max_repair_calls},
            {"covered_lines", covered_lines},
            {"line_gain", line_gain},
            {"line_coverage", line_coverage},
            {"branch_coverage", branch_coverage},
            {"dep", dep.to_json()},
            {"tokens_in", tokens_in},
            {"tokens_out", tokens_out},
            {"wall_time_s", wall_time_s},
            {"targets", targets}};
}

IterationRow IterationRow::from_json(const nlohmann::json& j) {
    IterationRow r;
    r.iteration = j.at("iteration").get<int>();
    r.plans = j.value("plans", 0);
    r.candidates = j.value("candidates", 0);
    r.passed = j.value("passed", 0);
    r.repaired = j.value("repaired", 0);
    r.failed = j.value("failed", 0);
    r.repair_calls = j.value("repair_calls", 0);
    r.max_repair_calls = j.value("max_repair_calls", 0);
    r.covered_lines = j.value("covered_lines", std::int64_t{0});
    r.line_gain = j.value("line_gain", std::int64_t{0});
    r.line_coverage = j.value("line_coverage", 0.0);
    r.branch_coverage = j.value("branch_coverage", 0.0);
    if (j.contains("dep")) {
        r.dep.dlc = j["dep"].value("dlc", std::int64_t{0});
        r.dep.tlc = j["dep"].value("tlc", std::int64_t{0});
        r.dep.deplc = j["dep"].value("deplc", std::int64_t{0});
    }
    r.tokens_in = j.value("tokens_in", std::int64_t{0});
    r.tokens_out = j.value("tokens_out", std::int64_t{0});
    r.wall_time_s = j.value("wall_time_s", 0.0);
    r.targets = j.value("targets", std::vector<std::string>{});
    return r;
}

nlohmann::json RunManifest::to_json() const {
    auto rs = nlohmann::json::array();
    for (const auto& r : rows) rs.push_back(r.to_json());
    return {{"cut", cut_fqn},
            {"test_file", test_file},
            {"cut_methods", cut_methods},
            {"baseline_line_coverage", baseline_line_coverage},
            {"rows", rs},
            {"termination_reason", to_string(termination)},
            {"final_tests", final_tests},
            {"warnings", warnings},
            {"wall_time_s", wall_time_s}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
    RunManifest m;
    try {
        m.cut_fqn = j.at("cut").get<std::string>();
        m.test_file = j.value("test_file", "");
        m.cut_methods = j.value("cut_methods", 0);
        m.baseline_line_coverage = j.value("baseline_line_coverage", 0.0);
        for (const auto& r : j.at("rows")) m.rows.push_back(IterationRow::from_json(r));
        m.termination = termination_from_string(j.at("termination_reason").get<std::string>());
        m.final_tests = j.value("final_tests", std::vector<std::string>{});
        m.warnings = j.value("warnings", std::vector<std::string>{});
        m.wall_time_s = j.value("wall_time_s", 0.0);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad manifest: ") + e.what());
    }
    return m;
}

RunManifest RunManifest::load(const std::string& path) {
    try {
        return from_json(nlohmann::json::parse(util::read_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("bad manifest " + path + ": " + e.what());
    }
}

// ---- the loop ------------------------------------------------------------------------------

namespace {

class Loop {
public:
    Loop(RunConfig cfg, LlmClient& client) : cfg_(std::move(cfg)), client_(client) {}

    RunResult run();

private:
    struct Attempt {
        ValidationOutcome outcome;
        std::string source;  // file text that was validated
        std::string name;
    };

    void setup();
    void baseline();
    CoverageReport measure();
    LineCoverage line_map(const CoverageReport& r) const;
    std::string usage_patterns() const;
    Attempt validate_in_file(const std::string& base, const std::string& method, const std::vector<std::string>& imports);
    void note_outcome(const Attempt& a);
    void process_candidate(const ParsedTestArtifact& art, IterationRow& row, int iteration);
    void apply_model_updates();
    void finish_file();
    void write_manifest() const;

    RunConfig cfg_;
    LlmClient& client_;
    Preparation prep_;
    const ClassEntry* cut_ = nullptr;
    std::string cut_source_;
    std::string test_file_;
    std::string test_class_;
    std::set<std::string> test_classes_;
    std::map<std::string, std::vector<PathSpec>> paths_;
    std::unique_ptr<LlmGateway> gateway_;
    std::unique_ptr<ExperienceMemory> memory_;
    std::map<std::string, std::vector<UsageSlice>> passing_slices_;
    std::set<PendingBlock> pending_blocks_;
    std::vector<std::pair<std::string, std::vector<std::string>>> pending_reinforce_;
    RunManifest manifest_;
    std::string manifest_path_;
};

void Loop::setup() {
    if (cfg_.backend.project_root.empty()) cfg_.backend.project_root = cfg_.project_root;
    if (cfg_.backend.kind == "maven" && cfg_.backend.compile_command.empty())
        cfg_.backend = BackendConfig::maven(cfg_.project_root, cfg_.backend.maven_executable);
    cfg_.validate();
    check_backend(cfg_.backend);

    prep_ = prepare(cfg_);
    cut_ = prep_.index.find(cfg_.cut_fqn);
    cut_source_ = util::read_file((fs::path(cfg_.project_root) / cut_->origin).string());

    for (const auto& c : build_cfgs(cut_source_)) {
        auto paths = enumerate_paths(c);
        auto& bucket = paths_[c.method_id.key()];
        bucket.insert(bucket.end(), paths.begin(), paths.end());
    }

    fs::create_directories(cfg_.run_dir());
    manifest_path_ = (fs::path(cfg_.run_dir()) / "manifest.json").string();
    gateway_ = std::make_unique<LlmGateway>(client_, cfg_.params, (fs::path(cfg_.run_dir()) / "llm_log.jsonl").string());
    memory_ = std::make_unique<ExperienceMemory>((fs::path(cfg_.run_dir()) / "memory.jsonl").string(), cfg_.reuse_memory);

    test_file_ = init_skeleton(*cut_, cfg_.backend.test_root_path(), &manifest_.warnings);
    test_class_ = generated_test_class(cut_->fqn);
    test_classes_.insert(test_class_);
    for (const auto& [fqn, e] : prep_.index.entries())
        if (e.source == ClassSource::ProjectTest) test_classes_.insert(fqn);

    manifest_.cut_fqn = cfg_.cut_fqn;
    manifest_.test_file = fs::relative(test_file_, cfg_.project_root).generic_string();
    manifest_.cut_methods = static_cast<int>(cut_->methods.size());
}

// Existing tests that do not pass are dropped so that the file only holds
// passing tests from the start.
void Loop::baseline() {
    auto outs = compile_and_run(test_file_, cfg_.backend, cfg_.backend.per_test_timeout_s);
    std::string src = util::read_file(test_file_);
    bool removed = false;
    for (const auto& o : outs) {
        if (o.status == TestStatus::Pass) continue;
        manifest_.warnings.push_back("existing test " + o.test_name + " does not pass (" + to_string(o.status) + "); removed");
        src = remove_method(src, o.test_name);
        removed = true;
    }
    if (!removed) return;
    util::write_file(test_file_, src);
    for (const auto& o : compile_and_run(test_file_, cfg_.backend, cfg_.backend.per_test_timeout_s))
        if (o.status != TestStatus::Pass) throw ConfigError("existing test file does not compile without its failing tests: " + test_file_);
}

CoverageReport Loop::measure() { return parse_coverage_xml(measure_coverage(test_file_, cfg_.backend)); }

LineCoverage Loop::line_map(const CoverageReport& r) const {
    LineCoverage lc;
    auto it = r.per_class.find(cfg_.cut_fqn);
    if (it == r.per_class.end()) return lc;
    for (int l : it->second.line_missed) lc[l] = false;
    for (int l : it->second.line_covered) lc[l] = true;
    return lc;
}

std::string Loop::usage_patterns() const {
    std::string out;
    std::vector<std::string> fqns;
    for (const auto& d : prep_.dependencies) fqns.push_back(d.fqn);
    fqns.push_back(cfg_.cut_fqn);
    for (const auto& fqn : fqns) {
        std::vector<UsageSlice> pool;
        if (auto it = prep_.slices.find(fqn); it != prep_.slices.end()) pool = it->second;
        if (auto it = passing_slices_.find(fqn); it != passing_slices_.end()) pool.insert(pool.end(), it->second.begin(), it->second.end());
        auto top = dedup_and_rank(std::move(pool), cfg_.slices_per_dependency);
        if (top.empty()) continue;
        out += "// " + fqn + "\n" + render_prompt_snippets(top);
    }
    return out;
}

Loop::Attempt Loop::validate_in_file(const std::string& base, const std::string& method, const std::vector<std::string>& imports) {
    Attempt a;
    try {
        a.source = append_method(add_imports(base, imports), method, &a.name);
    } catch (const java::ParseError& e) {
        a.outcome = unparseable_outcome(e.what());
        return a;
    }
    util::write_file(test_file_, a.source);
    auto outs = compile_and_run(test_file_, cfg_.backend, cfg_.backend.per_test_timeout_s, {a.name});
    if (const auto* o = outcome_named(outs, a.name)) {
        a.outcome = *o;
    } else {
        a.outcome = unparseable_outcome("no outcome for " + a.name);
        a.outcome.test_name = a.name;
    }
    if (a.outcome.status != TestStatus::Pass) util::write_file(test_file_, base);
    note_outcome(a);
    return a;
}

// Typestate feedback, applied once the iteration is over.
void Loop::note_outcome(const Attempt& a) {
    const auto& o = a.outcome;
    if (o.status == TestStatus::Pass) {
        auto parsed = java::parse_compilation_unit(a.source);
        std::vector<std::string> imports;
        for (const auto& imp : parsed.unit.imports)
            if (!imp.is_static) imports.push_back(imp.name + (imp.wildcard ? ".*" : ""));
        for (const auto& rc : o.call_sequences)
            if (const auto* m = find_model(prep_.models, rc.type_name, parsed.unit.package, imports))
                pending_reinforce_.emplace_back(m->class_fqn, rc.calls);
        return;
    }
    if (o.status != TestStatus::RuntimeFailure || !o.report) return;
    for (const auto& e : o.report->entries) {
        if (auto t = failing_transition(e, o.call_sequences, prep_.models, a.source)) {
            pending_blocks_.insert({t->class_fqn, t->from, t->to});
            break;
        }
    }
}

void Loop::process_candidate(const ParsedTestArtifact& art, IterationRow& row, int iteration) {
    const std::string base = util::read_file(test_file_);
    auto first = validate_in_file(base, art.body, art.imports);
    std::string kept;
    if (first.outcome.status == TestStatus::Pass) {
        ++row.passed;
        kept = art.body;
    } else {
        RepairEnv env;
        env.gateway = gateway_.get();
        env.index = &prep_.index;
        env.models = &prep_.models;
        env.memory = memory_.get();
        env.ctx = FixContext{cfg_.cut_fqn, util::number_lines(cut_source_), base};
        env.n_fix = cfg_.n_fix;
        env.iteration = iteration;
        env.validate = [&](const std::string& method, const std::vector<std::string>& imports) {
            return validate_in_file(base, method, imports).outcome;
        };
        TestRepair r;
        try {
            r = repair_test(art.body, art.imports, *first.outcome.report, env);
        } catch (const LlmUnavailable& e) {
            manifest_.warnings.push_back("iteration " + std::to_string(iteration) + ": repair skipped, model unavailable: " + e.what());
            util::write_file(test_file_, base);
            r.unfixable = true;
        }
        row.repair_calls += r.model_calls;
        row.max_repair_calls = std::max(row.max_repair_calls, r.model_calls);
        if (r.fixed_method) {
            ++row.repaired;
            kept = *r.fixed_method;
        } else {
            ++row.failed;
            const auto& e = first.outcome.report->entries.front();
            std::string reason = to_string(first.outcome.status) + ": " +
                                 shorten(util::trim(e.symbol_or_exception + " " + e.message), 160);
            memory_->record_anti_pattern(art.body, reason, iteration, ErrorSignature::from_report(*first.outcome.report));
            return;
        }
    }
    memory_->record_gold(kept, iteration);
    auto current = util::read_file(test_file_);
    std::vector<std::string> fqns;
    for (const auto& d : prep_.dependencies) fqns.push_back(d.fqn);
    fqns.push_back(cfg_.cut_fqn);
    for (const auto& fqn : fqns) {
        auto slices = slices_from_source(current, test_file_, fqn, SliceOrigin::PassingTest);
        auto& pool = passing_slices_[fqn];
        pool.insert(pool.end(), slices.begin(), slices.end());
        pool = dedup_and_rank(std::move(pool), 16);
    }
}

void Loop::apply_model_updates() {
    for (const auto& b : pending_blocks_) {
        auto it = prep_.models.find(b.class_fqn);
        if (it != prep_.models.end()) block_transition(it->second, b.from, b.to);
    }
    for (const auto& [fqn, calls] : pending_reinforce_) {
        auto it = prep_.models.find(fqn);
        if (it != prep_.models.end()) reinforce(it->second, calls);
    }
    pending_blocks_.clear();
    pending_reinforce_.clear();
}

void Loop::finish_file() {
    auto outs = compile_and_run(test_file_, cfg_.backend, cfg_.backend.per_test_timeout_s);
    std::string src = util::read_file(test_file_);
    bool changed = false;
    for (const auto& o : outs) {
        if (o.status == TestStatus::Pass) {
            manifest_.final_tests.push_back(o.test_name);
            continue;
        }
        manifest_.warnings.push_back("test " + o.test_name + " failed the final run (" + to_string(o.status) + "); removed");
        src = remove_method(src, o.test_name);
        changed = true;
    }
    if (changed) util::write_file(test_file_, src);
}

void Loop::write_manifest() const { util::write_file(manifest_path_, manifest_.to_json().dump(2) + "\n"); }

RunResult Loop::run() {
    using clock = std::chrono::steady_clock;
    auto started = clock::now();
    setup();
    baseline();
    auto prev = measure();
    auto cut_lines = [&](const CoverageReport& r) -> std::int64_t {
        auto it = r.per_class.find(cfg_.cut_fqn);
        return it == r.per_class.end() ? 0 : static_cast<std::int64_t>(it->second.line_covered.size());
    };
    manifest_.baseline_line_coverage = line_coverage(prev, cfg_.cut_fqn);

    int zero_gain = 0;
    bool decided = false;
    if (manifest_.baseline_line_coverage >= cfg_.target_line_coverage) {
        manifest_.termination = Termination::TargetReached;
        decided = true;
    }
    const std::string numbered = util::number_lines(cut_source_);
    for (int it = 1; it <= cfg_.n_iter && !decided; ++it) {
        auto t0 = clock::now();
        auto tin = gateway_->tokens_in(), tout = gateway_->tokens_out();
        IterationRow row;
        row.iteration = it;

        auto lc = line_map(prev);
        auto targets = select_targets(paths_, lc, cfg_.rng_seed + static_cast<std::uint64_t>(it));
        for (const auto& t : targets) row.targets.push_back(t.method_id.key());
        std::string uncovered = render_paths(targets);
        if (targets.empty()) {
            std::vector<std::string> missed;
            for (const auto& [l, cov] : lc)
                if (!cov) missed.push_back(std::to_string(l));
            uncovered = missed.empty() ? "(no uncovered lines reported)" : "Uncovered lines: " + util::join(missed, ", ");
        }

        std::string current = util::read_file(test_file_);
        std::vector<ParsedTestArtifact> candidates;
        try {
            auto plan = gateway_->call(TemplateId::Planner, {{"cut_name", cfg_.cut_fqn},
                                                             {"uncovered_paths", uncovered},
                                                             {"cut_source_numbered", numbered},
                                                             {"current_test_file", current}});
            std::string plans;
            for (const auto& a : plan.parsed.artifacts) {
                if (a.kind != ArtifactKind::Plan) continue;
                ++row.plans;
                plans += "Plan " + std::to_string(row.plans) + ":\n" + util::trim(a.body) + "\n\n";
            }
            if (plans.empty()) plans = uncovered;
            auto gen = gateway_->call(TemplateId::Generator, {{"cut_name", cfg_.cut_fqn},
                                                              {"cut_source_numbered", numbered},
                                                              {"current_test_file", current},
                                                              {"test_plans", plans},
                                                              {"usage_patterns", usage_patterns()},
                                                              {"negative_guidance", memory_->negative_guidance()}});
            for (const auto& a : gen.parsed.artifacts)
                if (a.kind == ArtifactKind::TestMethod) candidates.push_back(a);
        } catch (const LlmUnavailable& e) {
            manifest_.warnings.push_back("iteration " + std::to_string(it) + ": model unavailable: " + e.what());
        } catch (const PromptError& e) {
            manifest_.warnings.push_back("iteration " + std::to_string(it) + ": " + e.what());
        }

        row.candidates = static_cast<int>(candidates.size());
        for (const auto& c : candidates) process_candidate(c, row, it);
        apply_model_updates();

        auto curr = measure();
        row.covered_lines = cut_lines(curr);
        row.line_gain = std::max<std::int64_t>(0, row.covered_lines - cut_lines(prev));
        row.line_coverage = line_coverage(curr, cfg_.cut_fqn);
        row.branch_coverage = branch_coverage(curr, cfg_.cut_fqn);
        row.dep = compute_dep_metrics(curr, cfg_.cut_fqn, test_classes_);
        row.tokens_in = gateway_->tokens_in() - tin;
        row.tokens_out = gateway_->tokens_out() - tout;
        row.wall_time_s = std::chrono::duration<double>(clock::now() - t0).count();
        manifest_.rows.push_back(row);
        prev = std::move(curr);

        zero_gain = row.line_gain > 0 ? 0 : zero_gain + 1;
        if (row.line_coverage >= cfg_.target_line_coverage) {
            manifest_.termination = Termination::TargetReached;
            decided = true;
        } else if (zero_gain >= cfg_.patience) {
            manifest_.termination = Termination::Plateau;
            decided = true;
        }
        write_manifest();
    }
    if (!decided) manifest_.termination = Termination::BudgetExhausted;

    finish_file();
    manifest_.wall_time_s = std::chrono::duration<double>(clock::now() - started).count();
    write_manifest();
    auto ts_dir = fs::path(cfg_.run_dir()) / "typestate";
    fs::remove_all(ts_dir);
    save_models(prep_.models, ts_dir.string());
    return {test_file_, manifest_path_, manifest_, prep_.models};
}

}  // namespace

RunResult run_loop(const RunConfig& config, LlmClient& client) { return Loop(config, client).run(); }

// ---- efficiency ----------------------------------------------------------------------------

nlohmann::json Efficiency::to_json() const {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    return {{"tokens_per_method", opt(tokens_per_method)},
            {"tokens_per_iteration", tokens_per_iteration},
            {"time_per_method", opt(time_per_method)},
            {"time_per_iteration", time_per_iteration},
            {"mean_iterations", mean_iterations}};
}

Efficiency compute_efficiency(const RunManifest& m) {
    double tokens = 0.0, time = 0.0;
    for (const auto& r : m.rows) {
        tokens += static_cast<double>(r.tokens_in + r.tokens_out);
        time += r.wall_time_s;
    }
    Efficiency e;
    auto n = static_cast<double>(m.rows.size());
    e.mean_iterations = n;
    if (n > 0) {
        e.tokens_per_iteration = tokens / n;
        e.time_per_iteration = time / n;
    }
    if (m.cut_methods > 0) {
        e.tokens_per_method = tokens / m.cut_methods;
        e.time_per_method = time / m.cut_methods;
    }
    return e;
}

Efficiency compute_efficiency(const std::vector<RunManifest>& manifests) {
    Efficiency out;
    if (manifests.empty()) return out;
    double tpm = 0, sec_pm = 0;
    int with_methods = 0;
    for (const auto& m : manifests) {
        auto e = compute_efficiency(m);
        out.tokens_per_iteration += e.tokens_per_iteration;
        out.time_per_iteration += e.time_per_iteration;
        out.mean_iterations += e.mean_iterations;
        if (e.tokens_per_method) {
            tpm += *e.tokens_per_method;
            sec_pm += *e.time_per_method;
            ++with_methods;
        }
    }
    auto n = static_cast<double>(manifests.size());
    out.tokens_per_iteration /= n;
    out.time_per_iteration /= n;
    out.mean_iterations /= n;
    if (with_methods > 0) {
        out.tokens_per_method = tpm / with_methods;
        out.time_per_method = sec_pm / with_methods;
    }
    return out;
}

}  // namespace mockless
