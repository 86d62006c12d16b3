#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mockless/class_index.hpp"
#include "mockless/llm_gateway.hpp"
#include "mockless/metrics.hpp"
#include "mockless/typestate.hpp"
#include "mockless/usage_miner.hpp"
#include "mockless/validator.hpp"

namespace mockless {

struct RunConfig {
    std::string project_root;
    std::string cut_fqn;
    GenerationParams params;
    int n_iter = 30;
    int n_fix = 5;
    /// Consecutive zero-gain iterations before stopping.
    int patience = 4;
    double target_line_coverage = 1.0;
    std::uint64_t rng_seed = 0;

    /// "http" or "fake" (scripted responses from fake_script).
    std::string llm = "http";
    std::string fake_script;
    std::string api_key_env = "MOCKLESS_API_KEY";

    BackendConfig backend;
    /// Defaults to <project_root>/.mockless.
    std::string cache_dir;
    std::vector<std::string> classpath;
    /// Defaults to the bundled table.
    std::string jdk_table;
    bool reuse_memory = false;
    std::size_t slices_per_dependency = 2;

    /// Throws ConfigError on out-of-range values or missing paths.
    void validate() const;
    std::string cache_path() const;
    std::string jdk_table_path() const;
    /// <cache>/runs/<cut_fqn>
    std::string run_dir() const;
    nlohmann::json to_json() const;
};

/// Applies the keys of a parsed config file on top of `base`. Relative paths
/// are taken from `base_dir`. Unknown keys are a ConfigError.
RunConfig config_from_toml(const nlohmann::json& toml, const std::string& base_dir, RunConfig base = {});

/// Model client for the configuration. The HTTP client reads its key from the
/// environment variable named by api_key_env (missing key: ConfigError).
std::unique_ptr<LlmClient> make_client(const RunConfig& config);

// ---- preparation ---------------------------------------------------------------------------

struct Preparation {
    ClassIndex index;
    /// Empty unless a CUT was given.
    TypestateMap models;
    std::vector<DependencyRef> dependencies;
    std::map<std::string, std::vector<UsageSlice>> slices;
    bool from_cache = false;
};

/// Builds the index (and, with a CUT, typestate models and usage slices) or
/// loads them from the cache when the project sources are unchanged.
Preparation prepare(const RunConfig& config, bool force = false);

// ---- the loop ------------------------------------------------------------------------------

/// Writes <test_root>/<pkg>/<Cut>MocklessTest.java with the package, imports
/// for the CUT and JUnit, and one empty @Test per public CUT method. An
/// existing file is left alone. Returns the path.
std::string init_skeleton(const ClassEntry& cut, const std::string& test_root, std::vector<std::string>* warnings = nullptr);

enum class Termination { TargetReached, Plateau, BudgetExhausted };
std::string to_string(Termination t);
Termination termination_from_string(const std::string& s);

struct IterationRow {
    int iteration = 0;
    int plans = 0;
    int candidates = 0;
    int passed = 0;     // passed on first validation
    int repaired = 0;   // passed after repair
    int failed = 0;     // dropped
    int repair_calls = 0;
    int max_repair_calls = 0;  // most model calls spent on one failing test
    std::int64_t covered_lines = 0;
    std::int64_t line_gain = 0;
    double line_coverage = 0.0;
    double branch_coverage = 0.0;
    DepMetrics dep;
    std::int64_t tokens_in = 0;
    std::int64_t tokens_out = 0;
    double wall_time_s = 0.0;
    std::vector<std::string> targets;
    nlohmann::json to_json() const;
    static IterationRow from_json(const nlohmann::json& j);
};

struct RunManifest {
    std::string cut_fqn;
    std::string test_file;  // relative to the project root
    int cut_methods = 0;
    double baseline_line_coverage = 0.0;
    std::vector<IterationRow> rows;
    Termination termination = Termination::BudgetExhausted;
    std::vector<std::string> final_tests;
    std::vector<std::string> warnings;
    double wall_time_s = 0.0;

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
    static RunManifest load(const std::string& path);
};

struct RunResult {
    std::string test_file;
    std::string manifest_path;
    RunManifest manifest;
    /// Typestate models after the run's feedback; also saved under run_dir()/typestate.
    TypestateMap models;
};

/// Plan, generate, validate and fix until the target is reached, line
/// coverage stops improving for `patience` iterations, or n_iter runs out.
/// Throws ConfigError before the first iteration for a bad setup and
/// BackendError when the build backend fails.
RunResult run_loop(const RunConfig& config, LlmClient& client);

struct Efficiency {
    std::optional<double> tokens_per_method;  // unset for a CUT without methods
    double tokens_per_iteration = 0.0;
    std::optional<double> time_per_method;
    double time_per_iteration = 0.0;
    double mean_iterations = 0.0;
    nlohmann::json to_json() const;
};

Efficiency compute_efficiency(const RunManifest& manifest);
/// Averages over runs (one per CUT).
Efficiency compute_efficiency(const std::vector<RunManifest>& manifests);

}  // namespace mockless
