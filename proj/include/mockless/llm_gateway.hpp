#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mockless/util.hpp"

namespace mockless {

enum class TemplateId { Planner, Generator, FixerI, FixerII };
std::string to_string(TemplateId t);
/// Accepts "PLANNER", "GENERATOR", "FIXER_I", "FIXER_II". Throws ConfigError.
TemplateId template_from_string(std::string_view name);

struct SlotSpec {
    std::string name;
    bool mandatory = true;
};

struct PromptTemplate {
    TemplateId id;
    std::vector<SlotSpec> slots;
    std::string text;  // {{slot}} placeholders
    bool has_slot(std::string_view name) const;
};

const PromptTemplate& prompt_template(TemplateId id);

using SlotValues = std::map<std::string, std::string>;

class PromptError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Fills the template. Unknown slots and missing mandatory slots throw
/// PromptError; absent optional slots render as "(none)".
std::string render_prompt(TemplateId id, const SlotValues& slots);

struct GenerationParams {
    double temperature = 0.2;
    int max_output_tokens = 4096;
    int context_budget_tokens = 16384;
    std::string model_name;
    std::string endpoint_url;
};

/// chars / 4, plus a 10% margin, rounded up.
std::int64_t estimate_tokens(std::string_view text);

struct FittedPrompt {
    std::string text;
    std::int64_t token_estimate = 0;
    std::vector<std::string> truncated_slots;
};

/// Renders and, when the estimate plus max_output_tokens exceeds the context
/// budget, trims usage_patterns first, then the tail of current_test_file.
/// Other slots are never cut. Throws PromptError when that is not enough.
FittedPrompt fit_prompt(TemplateId id, SlotValues slots, const GenerationParams& params);

// ---- model clients -----------------------------------------------------------------------

struct Completion {
    std::string text;
    std::int64_t tokens_in = 0;
    std::int64_t tokens_out = 0;
    int attempts = 1;
};

/// Every retry was used up. The caller skips to the next candidate.
class LlmUnavailable : public BackendError {
public:
    using BackendError::BackendError;
};

struct PromptKey {
    TemplateId template_id = TemplateId::Planner;
    std::string fingerprint;
};

class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual Completion complete(const std::string& prompt, const PromptKey& key, const GenerationParams& params) = 0;
};

struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds initial_backoff{500};
    double multiplier = 2.0;
};

/// Chat-completions JSON over HTTP(S): one user message, no tools, no streaming.
class HttpChatClient : public LlmClient {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    HttpChatClient(std::string api_key, RetryPolicy retry = {}, Sleeper sleeper = {});
    Completion complete(const std::string& prompt, const PromptKey& key, const GenerationParams& params) override;

private:
    std::string api_key_;
    RetryPolicy retry_;
    Sleeper sleep_;
};

/// Scripted double keyed by prompt fingerprint. Each key holds a list of
/// responses served in order; the last one repeats. A "*" fingerprint is the
/// per-template fallback. Not thread-safe.
class FakeLlm : public LlmClient {
public:
    FakeLlm() = default;
    static FakeLlm from_json(const nlohmann::json& j);
    static FakeLlm load(const std::string& path);

    void script(TemplateId t, const std::string& fingerprint, std::vector<std::string> responses);
    Completion complete(const std::string& prompt, const PromptKey& key, const GenerationParams& params) override;
    std::size_t calls() const { return calls_; }

private:
    std::map<std::pair<TemplateId, std::string>, std::vector<std::string>> table_;
    std::map<std::pair<TemplateId, std::string>, std::size_t> served_;
    std::size_t calls_ = 0;
};

/// Slots whose digests enter the fingerprint, per template.
const std::vector<std::string>& fingerprint_slots(TemplateId id);
std::string prompt_fingerprint(TemplateId id, const SlotValues& slots);

// ---- response parsing --------------------------------------------------------------------

enum class ArtifactKind { Plan, TestMethod, Fix };
std::string to_string(ArtifactKind k);

struct ParsedTestArtifact {
    ArtifactKind kind = ArtifactKind::TestMethod;
    std::string body;
    std::vector<std::string> imports;
    std::string explanation;
    std::string justification;
};

struct ParseOutcome {
    std::vector<ParsedTestArtifact> artifacts;
    std::optional<std::string> failure;  // set when nothing usable came back
};

/// Pulls fenced blocks out of a response. Java blocks are split into one
/// artifact per @Test method; `import` lines are collected separately.
/// PLANNER responses yield one PLAN per ```plan block. FIXER_II artifacts
/// without a "Justification:" section are rejected.
ParseOutcome parse_response(TemplateId id, std::string_view raw);

/// Source text of each @Test method in `code` (annotations included).
std::vector<std::string> extract_test_methods(std::string_view code);

// ---- gateway -----------------------------------------------------------------------------

struct ExchangeRecord {
    TemplateId template_id = TemplateId::Planner;
    std::string fingerprint;
    std::int64_t tokens_in = 0;
    std::int64_t tokens_out = 0;
    int attempts = 0;
    bool ok = false;
    std::vector<std::string> truncated_slots;
    std::string prompt;
    std::string response;
    std::string error;
    nlohmann::json to_json() const;
};

/// Renders, fits, calls and logs. Not thread-safe; one per CUT loop.
class LlmGateway {
public:
    LlmGateway(LlmClient& client, GenerationParams params, std::string log_path = {});

    struct Result {
        std::string response;
        ParseOutcome parsed;
        ExchangeRecord record;
    };
    /// Throws LlmUnavailable when the client gives up and PromptError when the
    /// prompt cannot fit.
    Result call(TemplateId id, const SlotValues& slots);

    const std::vector<ExchangeRecord>& log() const { return log_; }
    std::int64_t tokens_in() const;
    std::int64_t tokens_out() const;
    const GenerationParams& params() const { return params_; }

private:
    void append(const ExchangeRecord& r);

    LlmClient& client_;
    GenerationParams params_;
    std::string log_path_;
    std::vector<ExchangeRecord> log_;
};

/// Replaces anything that looks like a bearer token or API key with "***".
std::string redact_secrets(std::string text);

}  // namespace mockless
