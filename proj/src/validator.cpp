#include "mockless/validator.hpp"

#include <algorithm>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <filesystem>
#include <regex>
#include <sstream>

#include "mockless/llm_gateway.hpp"
#include "mockless/process.hpp"
#include "mockless/util.hpp"

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace mockless {

namespace {

std::string resolve(const std::string& root, const std::string& p) {
    if (p.empty() || fs::path(p).is_absolute()) return p;
    return (fs::path(root) / p).lexically_normal().string();
}

std::string tail(const std::string& text, std::size_t n = 600) {
    auto t = util::trim(text);
    return t.size() <= n ? t : "..." + t.substr(t.size() - n);
}

struct Placeholders {
    std::map<std::string, std::string> values;
    std::vector<std::string> apply(const std::vector<std::string>& argv) const {
        std::vector<std::string> out;
        for (auto a : argv) {
            for (const auto& [k, v] : values) a = util::replace_all(std::move(a), "{" + k + "}", v);
            out.push_back(std::move(a));
        }
        return out;
    }
};

bool mentions(const std::vector<std::string>& argv, const std::string& key) {
    return std::any_of(argv.begin(), argv.end(), [&](const std::string& a) { return a.find("{" + key + "}") != std::string::npos; });
}

std::string symbol_name(const std::string& symbol_line) {
    // "method writeNothing()" / "class Foo" / "variable x" / "method m(int)"
    auto body = util::trim(symbol_line);
    auto sp = body.find(' ');
    if (sp != std::string::npos) body = util::trim(body.substr(sp + 1));
    auto paren = body.find('(');
    if (paren != std::string::npos) body.resize(paren);
    return util::trim(body);
}

struct Frame {
    std::string cls, method, file;
    int line = 0;
    std::string text;
};

std::vector<Frame> stack_frames(const std::string& trace) {
    static const std::regex frame_re(R"(at\s+([\w.$]+)\.([\w$<>]+)\(([^:)]*)(?::(\d+))?\))");
    std::vector<Frame> out;
    for (const auto& line : util::split_lines(trace)) {
        std::smatch m;
        if (!std::regex_search(line, m, frame_re)) continue;
        out.push_back({m[1], m[2], m[3], m[4].matched ? std::stoi(m[4]) : 0, util::trim(line)});
    }
    return out;
}

std::string package_of(std::string_view source) {
    static const std::regex re(R"(^\s*package\s+([\w.]+)\s*;)");
    for (const auto& line : util::split_lines(source)) {
        std::smatch m;
        if (std::regex_search(line, m, re)) return m[1];
        if (line.find("class ") != std::string::npos) break;
    }
    return "";
}

// [first, last] source lines of each test method, by name.
std::map<std::string, std::pair<int, int>> test_line_ranges(const std::string& source) {
    static const std::regex name_re(R"(\bvoid\s+(\w+)\s*\()");
    std::map<std::string, std::pair<int, int>> out;
    std::size_t from = 0;
    for (const auto& m : extract_test_methods(source)) {
        auto pos = source.find(m, from);
        if (pos == std::string::npos) continue;
        from = pos + m.size();
        std::smatch nm;
        if (!std::regex_search(m, nm, name_re)) continue;
        int first = 1 + static_cast<int>(std::count(source.begin(), source.begin() + static_cast<long>(pos), '\n'));
        int last = first + static_cast<int>(std::count(m.begin(), m.end(), '\n'));
        out[nm[1]] = {first, last};
    }
    return out;
}

std::vector<SurefireCase> read_reports(const std::string& dir, const std::string& test_class) {
    std::vector<SurefireCase> cases;
    if (dir.empty() || !fs::is_directory(dir)) return cases;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        auto name = e.path().filename().string();
        if (util::starts_with(name, "TEST-" + test_class) && util::ends_with(name, ".xml")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        auto parsed = parse_surefire_xml(util::read_file(f.string()), test_class);
        cases.insert(cases.end(), parsed.begin(), parsed.end());
    }
    return cases;
}

void clear_reports(const std::string& dir, const std::string& test_class) {
    if (dir.empty() || !fs::is_directory(dir)) return;
    for (const auto& e : fs::directory_iterator(dir)) {
        auto name = e.path().filename().string();
        if (util::starts_with(name, "TEST-" + test_class) && util::ends_with(name, ".xml")) fs::remove(e.path());
    }
}

ValidationOutcome runtime_outcome(const std::string& name, TestStatus status, ErrorEntry e) {
    ValidationOutcome o;
    o.test_name = name;
    o.status = status;
    e.test_name = name;
    o.report = ErrorReport{ErrorPhase::Runtime, {std::move(e)}};
    return o;
}

void read_case(const pt::ptree& tc, const std::string& test_class, std::vector<SurefireCase>& out) {
    SurefireCase c;
    c.name = tc.get<std::string>("<xmlattr>.name", "");
    c.classname = tc.get<std::string>("<xmlattr>.classname", "");
    for (const auto& [tag, child] : tc) {
        if (tag == "skipped") c.skipped = true;
        if (tag != "failure" && tag != "error") continue;
        c.passed = false;
        auto& e = c.error;
        e.test_name = c.name;
        e.message = child.get<std::string>("<xmlattr>.message", "");
        e.symbol_or_exception = child.get<std::string>("<xmlattr>.type", "");
        std::string trace = child.get_value<std::string>();
        if (e.symbol_or_exception.empty()) {
            auto first = util::trim(util::split_lines(trace).empty() ? "" : util::split_lines(trace)[0]);
            e.symbol_or_exception = util::trim(first.substr(0, first.find(':')));
        }
        auto frames = stack_frames(trace);
        if (!frames.empty()) e.throwing_class = frames.front().cls;
        for (const auto& f : frames) {
            if (f.cls == test_class || util::starts_with(f.cls, test_class + "$")) {
                e.stack_top_frame = f.text;
                e.file = f.file;
                e.line = f.line;
                break;
            }
        }
        break;
    }
    out.push_back(std::move(c));
}

void read_suite(const pt::ptree& node, const std::string& test_class, std::vector<SurefireCase>& out) {
    for (const auto& [tag, child] : node) {
        if (tag == "testcase") read_case(child, test_class, out);
        else if (tag == "testsuite" || tag == "testsuites") read_suite(child, test_class, out);
    }
}

}  // namespace

std::string to_string(TestStatus s) {
    switch (s) {
        case TestStatus::Pass: return "PASS";
        case TestStatus::CompileError: return "COMPILE_ERROR";
        case TestStatus::RuntimeFailure: return "RUNTIME_FAILURE";
        case TestStatus::Timeout: return "TIMEOUT";
    }
    return "?";
}

std::string to_string(ErrorPhase p) { return p == ErrorPhase::Compile ? "COMPILE" : "RUNTIME"; }

nlohmann::json ErrorEntry::to_json() const {
    return {{"file", file},       {"line", line},           {"message", message},
            {"symbol_or_exception", symbol_or_exception},   {"stack_top_frame", stack_top_frame},
            {"test_name", test_name}, {"throwing_class", throwing_class}};
}

std::string ErrorReport::render() const {
    std::string out;
    for (const auto& e : entries) {
        std::string where = e.file.empty() ? "" : e.file + (e.line ? ":" + std::to_string(e.line) : "") + ": ";
        if (phase == ErrorPhase::Compile) {
            out += where + "error: " + e.message;
            if (!e.symbol_or_exception.empty()) out += " [symbol: " + e.symbol_or_exception + "]";
        } else {
            out += (e.test_name.empty() ? "" : e.test_name + ": ") + e.symbol_or_exception +
                   (e.message.empty() ? "" : ": " + e.message);
            if (!e.stack_top_frame.empty()) out += " (" + e.stack_top_frame + ")";
        }
        out += "\n";
    }
    return out;
}

nlohmann::json ErrorReport::to_json() const {
    nlohmann::json j{{"phase", to_string(phase)}, {"entries", nlohmann::json::array()}};
    for (const auto& e : entries) j["entries"].push_back(e.to_json());
    return j;
}

nlohmann::json ValidationOutcome::to_json() const {
    nlohmann::json j{{"test_name", test_name}, {"status", to_string(status)}};
    j["report"] = report ? report->to_json() : nlohmann::json();
    return j;
}

BackendConfig BackendConfig::maven(const std::string& project_root, const std::string& mvn) {
    BackendConfig c;
    c.kind = "maven";
    c.project_root = project_root;
    c.maven_executable = mvn;
    c.test_root = "src/test/java";
    c.reports_dir = "target/surefire-reports";
    c.coverage_report = "target/site/jacoco/jacoco.xml";
    std::vector<std::string> base = {mvn, "-q", "-B", "-f", "{project_root}/pom.xml"};
    c.compile_command = base;
    c.compile_command.push_back("test-compile");
    c.run_command = base;
    for (const char* a : {"surefire:test", "-Dtest={test_class}#{test_method}", "-DfailIfNoTests=false",
                          "-Dsurefire.failIfNoSpecifiedTests=false"})
        c.run_command.emplace_back(a);
    c.coverage_command = base;
    for (const char* a : {"org.jacoco:jacoco-maven-plugin:prepare-agent", "test", "-Dtest={test_class}",
                          "-DfailIfNoTests=false", "-Dmaven.test.failure.ignore=true",
                          "org.jacoco:jacoco-maven-plugin:report"})
        c.coverage_command.emplace_back(a);
    return c;
}

std::string BackendConfig::test_root_path() const { return resolve(project_root, test_root.empty() ? "src/test/java" : test_root); }
std::string BackendConfig::reports_path() const { return resolve(project_root, reports_dir); }
std::string BackendConfig::coverage_path() const { return resolve(project_root, coverage_report); }

void check_backend(const BackendConfig& config) {
    if (config.kind != "command" && config.kind != "maven") throw ConfigError("unknown build backend '" + config.kind + "'");
    if (config.project_root.empty() || !fs::is_directory(config.project_root))
        throw ConfigError("project root does not exist: " + config.project_root);
    if (config.kind == "maven" && !find_executable(config.maven_executable))
        throw ConfigError("maven backend selected but '" + config.maven_executable + "' is not on PATH");
    if (config.compile_command.empty() || config.run_command.empty())
        throw ConfigError("backend needs both a compile and a run command");
    for (const auto* cmd : {&config.compile_command, &config.run_command, &config.coverage_command}) {
        if (cmd->empty()) continue;
        if (!find_executable(cmd->front())) throw ConfigError("build backend executable not found: " + cmd->front());
    }
    if (config.per_test_timeout_s <= 0) throw ConfigError("per-test timeout must be positive");
}

std::string generated_test_class(const std::string& cut_fqn) { return cut_fqn + "MocklessTest"; }

std::string generated_test_path(const std::string& test_root, const std::string& cut_fqn) {
    fs::path p(test_root);
    auto pkg = util::strip_last_component(cut_fqn);
    if (!pkg.empty()) p /= util::replace_all(pkg, ".", "/");
    p /= util::last_component(cut_fqn) + "MocklessTest.java";
    return p.string();
}

std::vector<ErrorEntry> parse_compiler_output(std::string_view stderr_text) {
    static const std::regex javac_re(R"(^(.*\.java):(\d+): error: (.*)$)");
    static const std::regex maven_re(R"(^\[ERROR\]\s+(.*\.java):\[(\d+)(?:,\d+)?\]\s+(.*)$)");
    static const std::regex symbol_re(R"(^(?:\[ERROR\])?\s*symbol\s*:\s*(.+)$)");
    std::vector<ErrorEntry> out;
    std::set<std::tuple<std::string, int, std::string>> seen;
    bool keep_last = false;
    for (const auto& line : util::split_lines(stderr_text)) {
        std::smatch m;
        if (std::regex_match(line, m, javac_re) || std::regex_match(line, m, maven_re)) {
            ErrorEntry e;
            e.file = m[1];
            e.line = std::stoi(m[2]);
            e.message = util::trim(m[3].str());
            keep_last = seen.insert({fs::path(e.file).filename().string(), e.line, e.message}).second;
            if (keep_last) out.push_back(std::move(e));
            continue;
        }
        if (keep_last && !out.empty() && out.back().symbol_or_exception.empty() && std::regex_match(line, m, symbol_re))
            out.back().symbol_or_exception = symbol_name(m[1]);
    }
    return out;
}

std::vector<SurefireCase> parse_surefire_xml(std::string_view xml, const std::string& test_class) {
    pt::ptree tree;
    try {
        std::istringstream in{std::string(xml)};
        pt::read_xml(in, tree, pt::xml_parser::no_comments);
    } catch (const pt::xml_parser_error& e) {
        throw BackendError("malformed test report: " + e.message());
    }
    std::vector<SurefireCase> out;
    read_suite(tree, test_class, out);
    return out;
}

ErrorReport parse_diagnostics(std::string_view raw_compiler_output, const std::vector<std::string>& report_files,
                              const std::string& test_class) {
    ErrorReport r;
    r.entries = parse_compiler_output(raw_compiler_output);
    if (!r.entries.empty()) return r;
    r.phase = ErrorPhase::Runtime;
    for (const auto& f : report_files) {
        std::string text;
        try {
            text = util::read_file(f);
        } catch (const std::exception& e) {
            throw BackendError("cannot read test report " + f + ": " + e.what());
        }
        for (auto& c : parse_surefire_xml(text, test_class))
            if (!c.passed) r.entries.push_back(std::move(c.error));
    }
    return r;
}

std::vector<std::string> test_method_names(std::string_view test_source) {
    static const std::regex name_re(R"(\bvoid\s+(\w+)\s*\()");
    std::vector<std::string> out;
    for (const auto& m : extract_test_methods(test_source)) {
        std::smatch nm;
        if (std::regex_search(m, nm, name_re)) out.push_back(nm[1]);
    }
    return out;
}

std::vector<ValidationOutcome> compile_and_run(const std::string& test_file, const BackendConfig& config,
                                               int per_test_timeout_s, const std::vector<std::string>& only) {
    check_backend(config);
    std::string source = util::read_file(test_file);
    auto names = test_method_names(source);
    if (!only.empty())
        names.erase(std::remove_if(names.begin(), names.end(),
                                   [&](const std::string& n) { return std::find(only.begin(), only.end(), n) == only.end(); }),
                    names.end());
    auto pkg = package_of(source);
    auto stem = fs::path(test_file).stem().string();
    std::string test_class = pkg.empty() ? stem : pkg + "." + stem;

    Placeholders ph;
    ph.values = {{"project_root", config.project_root}, {"test_root", config.test_root_path()},
                 {"test_file", fs::absolute(test_file).string()}, {"test_class", test_class},
                 {"reports_dir", config.reports_path()}, {"coverage_report", config.coverage_path()}};

    std::vector<ReceiverCalls> sequences;
    try {
        sequences = receiver_sequences(source);
    } catch (const std::exception&) {
        // unparseable files still get compiled so the compiler can say why
    }
    auto seqs_for = [&](const std::string& name) {
        std::vector<ReceiverCalls> out;
        for (const auto& s : sequences)
            if (s.test_method == name) out.push_back(s);
        return out;
    };

    std::vector<ValidationOutcome> outcomes;
    auto timeout = std::chrono::seconds(per_test_timeout_s);
    auto compile = run_process(ph.apply(config.compile_command), config.project_root, timeout * 10);
    if (compile.exit_code == 127 && compile.out.empty()) throw BackendError("cannot run compile command: " + tail(compile.err));
    if (compile.timed_out || compile.exit_code != 0) {
        auto entries = parse_compiler_output(compile.err + "\n" + compile.out);
        if (entries.empty()) {
            ErrorEntry e;
            e.file = test_file;
            e.message = compile.timed_out ? "compilation timed out" : "compilation failed: " + tail(compile.err + compile.out);
            entries.push_back(e);
        }
        auto ranges = test_line_ranges(source);
        auto file_name = fs::path(test_file).filename().string();
        for (const auto& name : names) {
            ValidationOutcome o;
            o.test_name = name;
            o.status = TestStatus::CompileError;
            ErrorReport r;
            auto range = ranges.count(name) ? ranges[name] : std::pair<int, int>{0, -1};
            for (const auto& e : entries)
                if (fs::path(e.file).filename() == file_name && e.line >= range.first && e.line <= range.second)
                    r.entries.push_back(e);
            if (r.entries.empty()) r.entries = entries;  // errors outside this test still block it
            for (auto& e : r.entries) e.test_name = name;
            o.report = std::move(r);
            o.call_sequences = seqs_for(name);
            outcomes.push_back(std::move(o));
        }
        return outcomes;
    }

    auto reports = config.reports_path();
    auto finish = [&](const std::string& name, const ProcessResult& run, const std::vector<SurefireCase>& cases) {
        auto it = std::find_if(cases.begin(), cases.end(), [&](const SurefireCase& c) { return c.name == name; });
        ValidationOutcome o;
        if (it != cases.end() && it->passed) {
            o.test_name = name;
            o.status = TestStatus::Pass;
        } else if (it != cases.end()) {
            o = runtime_outcome(name, TestStatus::RuntimeFailure, it->error);
        } else if (run.timed_out) {
            ErrorEntry e;
            e.symbol_or_exception = "timeout";
            e.message = "test did not finish within " + std::to_string(per_test_timeout_s) + " s";
            o = runtime_outcome(name, TestStatus::Timeout, e);
        } else {
            ErrorEntry e;
            e.message = "no result in the test report (exit code " + std::to_string(run.exit_code) + "): " + tail(run.err + run.out, 300);
            o = runtime_outcome(name, TestStatus::RuntimeFailure, e);
        }
        o.call_sequences = seqs_for(name);
        outcomes.push_back(std::move(o));
    };

    if (mentions(config.run_command, "test_method")) {
        for (const auto& name : names) {
            clear_reports(reports, test_class);
            auto p = ph;
            p.values["test_method"] = name;
            auto run = run_process(p.apply(config.run_command), config.project_root, timeout);
            if (run.exit_code == 127 && run.out.empty() && !run.timed_out && run.err.find("cannot run") != std::string::npos)
                throw BackendError("cannot run test command: " + tail(run.err));
            finish(name, run, run.timed_out ? std::vector<SurefireCase>{} : read_reports(reports, test_class));
        }
    } else {
        clear_reports(reports, test_class);
        auto run = run_process(ph.apply(config.run_command), config.project_root,
                               timeout * static_cast<long>(std::max<std::size_t>(1, names.size())));
        auto cases = read_reports(reports, test_class);
        for (const auto& name : names) finish(name, run, cases);
    }
    return outcomes;
}

std::string measure_coverage(const std::string& test_file, const BackendConfig& config) {
    if (config.coverage_command.empty()) throw ConfigError("backend has no coverage command");
    std::string source = util::read_file(test_file);
    auto pkg = package_of(source);
    auto stem = fs::path(test_file).stem().string();
    Placeholders ph;
    ph.values = {{"project_root", config.project_root}, {"test_root", config.test_root_path()},
                 {"test_file", fs::absolute(test_file).string()}, {"test_class", pkg.empty() ? stem : pkg + "." + stem},
                 {"reports_dir", config.reports_path()}, {"coverage_report", config.coverage_path()}};
    auto n = std::max<std::size_t>(1, test_method_names(source).size());
    auto timeout = std::chrono::seconds(config.per_test_timeout_s) * static_cast<long>(n + 10);
    auto path = config.coverage_path();
    if (fs::exists(path)) fs::remove(path);
    auto run = run_process(ph.apply(config.coverage_command), config.project_root, timeout);
    if (run.timed_out) throw BackendError("coverage run timed out");
    if (!fs::exists(path))
        throw BackendError("coverage run wrote no report at " + path + " (exit " + std::to_string(run.exit_code) + "): " + tail(run.err));
    return path;
}

BackendConfig backend_from_json(const nlohmann::json& j) {
    std::string kind = j.value("kind", "command");
    std::string root = j.value("project_root", "");
    BackendConfig c = kind == "maven" ? BackendConfig::maven(root, j.value("maven_executable", "mvn")) : BackendConfig{};
    c.kind = kind;
    c.project_root = root;
    auto str = [&](const char* key, std::string& field) {
        if (j.contains(key)) field = j.at(key).get<std::string>();
    };
    auto vec = [&](const char* key, std::vector<std::string>& field) {
        if (j.contains(key)) field = j.at(key).get<std::vector<std::string>>();
    };
    str("test_root", c.test_root);
    str("reports_dir", c.reports_dir);
    str("coverage_report", c.coverage_report);
    vec("compile_command", c.compile_command);
    vec("run_command", c.run_command);
    vec("coverage_command", c.coverage_command);
    if (j.contains("per_test_timeout_s")) c.per_test_timeout_s = j.at("per_test_timeout_s").get<int>();
    return c;
}

nlohmann::json backend_to_json(const BackendConfig& c) {
    return {{"kind", c.kind},
            {"project_root", c.project_root},
            {"test_root", c.test_root},
            {"reports_dir", c.reports_dir},
            {"coverage_report", c.coverage_report},
            {"compile_command", c.compile_command},
            {"run_command", c.run_command},
            {"coverage_command", c.coverage_command},
            {"maven_executable", c.maven_executable},
            {"per_test_timeout_s", c.per_test_timeout_s}};
}

}  // namespace mockless
