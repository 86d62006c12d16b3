#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mockless/typestate.hpp"

namespace mockless {

enum class TestStatus { Pass, CompileError, RuntimeFailure, Timeout };
enum class ErrorPhase { Compile, Runtime };
std::string to_string(TestStatus s);
std::string to_string(ErrorPhase p);

struct ErrorEntry {
    std::string file;
    int line = 0;
    std::string message;
    /// Compile: the unresolved symbol name. Runtime: the exception class FQN.
    std::string symbol_or_exception;
    /// Topmost stack frame inside the generated test class, if any.
    std::string stack_top_frame;
    std::string test_name;
    /// Class of the topmost frame of the trace (where the exception was raised).
    std::string throwing_class;
    nlohmann::json to_json() const;
};

struct ErrorReport {
    ErrorPhase phase = ErrorPhase::Compile;
    std::vector<ErrorEntry> entries;
    /// One line per entry, for prompts.
    std::string render() const;
    nlohmann::json to_json() const;
};

struct ValidationOutcome {
    std::string test_name;
    TestStatus status = TestStatus::Pass;
    std::optional<ErrorReport> report;  // empty exactly when status is Pass
    std::vector<ReceiverCalls> call_sequences;
    nlohmann::json to_json() const;
};

/// How to build and run one generated test class. Command vectors may use
/// {project_root} {test_root} {test_file} {test_class} {test_method}
/// {reports_dir} {coverage_report}. With {test_method} in run_command every
/// test runs in its own process; without it the class runs once.
struct BackendConfig {
    std::string kind = "command";  // "command" or "maven"
    std::string project_root;
    std::string test_root;       // relative to project_root unless absolute
    std::string reports_dir;     // Surefire-style XML
    std::string coverage_report; // JaCoCo XML written by coverage_command
    std::vector<std::string> compile_command;
    std::vector<std::string> run_command;
    std::vector<std::string> coverage_command;
    std::string maven_executable = "mvn";
    int per_test_timeout_s = 60;

    /// Fills unset fields with the Maven defaults (test-compile, surefire:test
    /// with -Dtest=Class#method, jacoco report under target/site/jacoco).
    static BackendConfig maven(const std::string& project_root, const std::string& mvn = "mvn");
    std::string test_root_path() const;
    std::string reports_path() const;
    std::string coverage_path() const;
};

/// Throws ConfigError when the backend's executables are not available.
void check_backend(const BackendConfig& config);

/// `<test-root>/<cut-package dirs>/<CutSimpleName>MocklessTest.java`.
std::string generated_test_path(const std::string& test_root, const std::string& cut_fqn);
std::string generated_test_class(const std::string& cut_fqn);

/// javac-style stderr (`File.java:12: error: msg`, Maven `[ERROR] File.java:[12,5] msg`).
std::vector<ErrorEntry> parse_compiler_output(std::string_view stderr_text);

struct SurefireCase {
    std::string name;
    std::string classname;
    bool passed = true;
    bool skipped = false;
    ErrorEntry error;  // meaningful when !passed
};

/// Parses one Surefire XML report. `test_class` selects the stack frame kept in
/// stack_top_frame.
std::vector<SurefireCase> parse_surefire_xml(std::string_view xml, const std::string& test_class);

/// Structured report from compiler output plus Surefire files. Compile entries
/// win: with any, phase is Compile.
ErrorReport parse_diagnostics(std::string_view raw_compiler_output, const std::vector<std::string>& report_files,
                              const std::string& test_class);

/// Names of the @Test methods in a test source, in order.
std::vector<std::string> test_method_names(std::string_view test_source);

/// Compiles the file, runs each test and returns one outcome per @Test method.
/// A non-empty `only` restricts running (not compiling) to those methods.
/// Throws ConfigError for a missing backend and BackendError when the build
/// tool itself cannot be run.
std::vector<ValidationOutcome> compile_and_run(const std::string& test_file, const BackendConfig& config,
                                               int per_test_timeout_s, const std::vector<std::string>& only = {});

/// Runs the coverage command and returns the report path. Throws BackendError
/// if the command fails or writes no report.
std::string measure_coverage(const std::string& test_file, const BackendConfig& config);

BackendConfig backend_from_json(const nlohmann::json& j);
nlohmann::json backend_to_json(const BackendConfig& c);

}  // namespace mockless
