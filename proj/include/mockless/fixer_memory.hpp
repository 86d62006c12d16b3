#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mockless/class_index.hpp"
#include "mockless/llm_gateway.hpp"
#include "mockless/typestate.hpp"
#include "mockless/validator.hpp"

namespace mockless {

// ---- experience memory -----------------------------------------------------------------

enum class MemoryKind { GoldTest, FixRecipe, AntiPattern, Unfixable };
std::string to_string(MemoryKind k);
MemoryKind memory_kind_from_string(const std::string& s);

/// (phase, exception or compiler code, normalized message tokens). Tokens are
/// lowercase; identifiers become "<id>" and numbers "<n>".
struct ErrorSignature {
    std::string phase;
    std::string code;
    std::vector<std::string> tokens;  // sorted, unique

    static ErrorSignature from_report(const ErrorReport& report);
    static ErrorSignature from_tokens(std::string phase, std::string code, std::vector<std::string> tokens);
    bool empty() const { return tokens.empty() && code.empty(); }
    nlohmann::json to_json() const;
    static ErrorSignature from_json(const nlohmann::json& j);
    bool operator==(const ErrorSignature& o) const;
};

/// |a ∩ b| / |a ∪ b| over token sets; 0 when both are empty.
double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b);

struct MemoryRecord {
    MemoryKind kind = MemoryKind::FixRecipe;
    ErrorSignature signature;
    std::string summary;
    std::string diff;
    int iteration = 0;
    /// Structural hash of the @Test body; 0 when not applicable.
    std::uint64_t hash = 0;

    nlohmann::json to_json() const;
    static MemoryRecord from_json(const nlohmann::json& j);
    std::string render() const;
};

struct MemoryHit {
    MemoryRecord record;
    double similarity = 0.0;
};

/// Structural hash of the body of the first method in `test_method`, with
/// locals alpha-renamed. Falls back to a raw text hash for unparseable input.
std::uint64_t test_body_hash(std::string_view test_method);

/// Line diff, "-"/"+" prefixed, unchanged lines with "  ".
std::string line_diff(std::string_view before, std::string_view after);

/// Append-only store, optionally mirrored to a JSON-lines file.
class ExperienceMemory {
public:
    ExperienceMemory() = default;
    /// Records go to `path` as they are added. With `reuse`, records already
    /// in the file are loaded first; otherwise the file is truncated.
    explicit ExperienceMemory(std::string path, bool reuse = false);

    const std::vector<MemoryRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    void add(MemoryRecord r);

    void record_gold(std::string_view test, int iteration);
    /// FIX_RECIPE with the before/after diff.
    void record_success(std::string_view failing_test, std::string_view fixed_test, const ErrorReport& report, int iteration);
    void record_anti_pattern(std::string_view test, const std::string& reason, int iteration,
                             const ErrorSignature& signature = {});
    void record_unfixable(std::string_view test, const ErrorReport& report, int iteration);

    /// Records of the given kinds ranked by signature Jaccard similarity
    /// (ties: most recent first). Zero-similarity records are left out.
    std::vector<MemoryHit> retrieve(const ErrorSignature& query, std::size_t top_n = 1,
                                    const std::vector<MemoryKind>& kinds = {MemoryKind::FixRecipe}) const;
    /// ANTI_PATTERN records with the same body hash as `test`.
    std::vector<MemoryRecord> anti_patterns_matching(std::string_view test) const;
    /// Summaries of all anti-patterns, newest first, for negative guidance.
    std::string negative_guidance(std::size_t limit = 5) const;

private:
    std::string path_;
    std::vector<MemoryRecord> records_;
};

/// For a runtime failure raised by the receiver's class, the transition that
/// was executing: (previous call or INIT, failing call) on the receiver whose
/// calls reach the failure line. Returns nothing when no receiver qualifies.
struct FailingTransition {
    std::string class_fqn;
    std::string receiver;
    std::string from;
    std::string to;
};
std::optional<FailingTransition> failing_transition(const ErrorEntry& entry, const std::vector<ReceiverCalls>& sequences,
                                                    const TypestateMap& models, const std::string& test_source);

// ---- constraints and repair ---------------------------------------------------------

struct ConstraintReport {
    std::vector<SymbolViolation> symbol_violations;
    std::vector<ProtocolViolation> protocol_violations;
    std::vector<MemoryHit> memory_hits;
    std::vector<MemoryRecord> anti_pattern_hits;

    bool empty() const {
        return symbol_violations.empty() && protocol_violations.empty() && memory_hits.empty() && anti_pattern_hits.empty();
    }
    /// Slot texts for FIXER_II.
    std::string symbol_text() const;
    std::string typestate_text(const TypestateMap& models) const;
    std::string memory_text() const;
};

struct ConstraintOptions {
    SymbolCheckOptions symbols;
    /// Memory records below this similarity are not reported.
    double min_memory_similarity = 0.5;
    std::size_t memory_top_n = 1;
};

/// Unions symbol checks, typestate checks and memory retrieval for a
/// compilation unit holding the fix. `signature` is the failure being fixed.
ConstraintReport check_constraints(std::string_view fix_unit, const ClassIndex& index, const TypestateMap& models,
                                   const ExperienceMemory& memory, const ErrorSignature& signature,
                                   const ConstraintOptions& options = {});

/// Mechanical rewrite: each violation with a candidate takes the top one;
/// statements whose violation has no candidate are deleted. Import lines are
/// rewritten or dropped. Needed imports for substituted types are added.
std::string apply_deterministic_symbol_repairs(std::string_view source, const std::vector<SymbolViolation>& violations,
                                               const ClassIndex& index);

/// Inserts the calls repair_sequence asks for before each violating call.
/// Arguments are copied from an existing call of the same method in the unit;
/// a repair with no such call to copy from is skipped.
std::string apply_protocol_repairs(std::string_view source, const std::vector<ProtocolViolation>& violations,
                                   const TypestateMap& models);

// ---- the two stages ---------------------------------------------------------------------

struct FixContext {
    std::string cut_name;
    std::string cut_source_numbered;
    std::string current_test_file;
};

/// FIXER_I: the failing test and its diagnostics only.
std::optional<ParsedTestArtifact> fix_stage1(const std::string& failing_test, const ErrorReport& report, LlmGateway& gateway,
                                             const FixContext& ctx);

/// FIXER_II with the constraint slots. Artifacts without a justification are
/// rejected. `report` must be non-empty.
std::optional<ParsedTestArtifact> fix_stage2(const std::string& fix, const ConstraintReport& report, const std::string& diagnostics,
                                             LlmGateway& gateway, const FixContext& ctx, const TypestateMap& models);

/// Everything the repair loop needs besides the test itself.
struct RepairEnv {
    LlmGateway* gateway = nullptr;
    const ClassIndex* index = nullptr;
    const TypestateMap* models = nullptr;
    ExperienceMemory* memory = nullptr;
    FixContext ctx;
    int n_fix = 5;
    int iteration = 0;
    ConstraintOptions constraints;
    /// Validates one candidate method (with its imports) in the test file.
    std::function<ValidationOutcome(const std::string& method, const std::vector<std::string>& imports)> validate;
};

/// One candidate that reached the validator.
struct GateRecord {
    std::string method;
    bool constraints_clean = false;
    bool stage2 = false;
    std::string justification;
};

struct TestRepair {
    std::optional<std::string> fixed_method;
    std::vector<std::string> imports;
    int model_calls = 0;
    int stage1_calls = 0;
    int stage2_calls = 0;
    std::vector<GateRecord> gate;
    bool unfixable = false;
};

/// Repairs one failing test within n_fix model calls. Stage 2 runs at most
/// once per stage-1 attempt. A failing test that exhausts the budget becomes
/// an UNFIXABLE record.
TestRepair repair_test(const std::string& failing_method, const std::vector<std::string>& imports,
                         const ErrorReport& report, RepairEnv& env);

}  // namespace mockless
