#include "mockless/llm_gateway.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <thread>

#include "httplib.h"
#include "mockless/java/lexer.hpp"

namespace mockless {

namespace {

const char* kPlannerText = R"(You are planning unit tests for the Java class {{cut_name}}.
Tests must exercise real objects. Do not use Mockito or any other mocking library.

Uncovered paths selected for this round:
{{uncovered_paths}}

Class under test (line-numbered):
{{cut_source_numbered}}

Current test file:
{{current_test_file}}

Write between 2 and 6 test plans. Each plan targets behavior on the paths above
that the current test file does not reach. For every plan give the target method,
the testing strategy, the setup steps (which real objects to build and how), and
a short note on which lines it should cover. Put each plan in its own fenced
block tagged `plan`.
)";

const char* kGeneratorText = R"(You are writing JUnit tests for the Java class {{cut_name}}.
Use real dependencies. Do not use Mockito or any other mocking library.

Class under test (line-numbered):
{{cut_source_numbered}}

Current test file:
{{current_test_file}}

Test plans:
{{test_plans}}

How this project builds and uses the dependencies (copy these patterns when you need such objects):
{{usage_patterns}}

Structures that failed before and must not be repeated:
{{negative_guidance}}

For each plan write exactly one @Test method. Reply with one ```java block per
method. Put any imports the method needs at the top of its block as `import`
lines. After the code, add a line starting with "Explanation:" that briefly
says what each test checks.
)";

const char* kFixerIText = R"(A generated JUnit test for {{cut_name}} does not pass.

Class under test (line-numbered):
{{cut_source_numbered}}

Current test file:
{{current_test_file}}

Failing test:
{{failing_test}}

Diagnostics:
{{diagnostics}}

Repair the failing test using the diagnostics. Reply with the revised @Test
method in one ```java block, with any needed `import` lines at the top of the
block, then a line starting with "Explanation:" describing the change.
)";

const char* kFixerIIText = R"(A repaired JUnit test for {{cut_name}} still breaks project constraints.

Class under test (line-numbered):
{{cut_source_numbered}}

Test to revise:
{{failing_test}}

Original diagnostics:
{{diagnostics}}

Symbol check (classes, methods, constructors or imports that do not exist or are ambiguous):
{{symbol_check}}

Typestate check (invalid call orders, required method sequences, blocked transitions):
{{typestate_check}}

Experience memory (earlier successful repairs and known anti-patterns):
{{experience_memory}}

Rewrite the test so that it satisfies every constraint above and fixes the
original failure. Reply with the revised @Test method in one ```java block, with
any needed `import` lines at the top of the block. Then write a section that
starts with "Justification:" explaining, constraint by constraint, why the
revised test is valid and why the original failure is resolved.
)";

std::vector<PromptTemplate> build_templates() {
    return {
        {TemplateId::Planner,
         {{"cut_name"}, {"uncovered_paths"}, {"cut_source_numbered"}, {"current_test_file"}},
         kPlannerText},
        {TemplateId::Generator,
         {{"cut_name"},
          {"cut_source_numbered"},
          {"current_test_file"},
          {"test_plans"},
          {"usage_patterns", false},
          {"negative_guidance", false}},
         kGeneratorText},
        {TemplateId::FixerI,
         {{"cut_name"}, {"cut_source_numbered"}, {"current_test_file"}, {"failing_test"}, {"diagnostics"}},
         kFixerIText},
        {TemplateId::FixerII,
         {{"cut_name"},
          {"cut_source_numbered"},
          {"failing_test"},
          {"diagnostics"},
          {"symbol_check", false},
          {"typestate_check", false},
          {"experience_memory", false}},
         kFixerIIText},
    };
}

const std::string kOmitted = "(omitted to fit the context budget)";

bool fits(std::int64_t estimate, const GenerationParams& p) {
    return estimate + p.max_output_tokens <= p.context_budget_tokens;
}

// Removes the last fenced snippet (or, without fences, the last line).
bool shrink_patterns(std::string& text) {
    if (text.empty() || text == kOmitted) return false;
    auto pos = text.rfind("```java");
    if (pos != std::string::npos && pos > 0) {
        text = util::trim(text.substr(0, pos));
        return true;
    }
    text = kOmitted;
    return true;
}

bool shrink_tail(std::string& text) {
    const std::string marker = "// ... (truncated)";
    auto lines = util::split_lines(text);
    if (!lines.empty() && lines.back() == marker) lines.pop_back();
    if (lines.empty()) return false;
    std::size_t drop = std::max<std::size_t>(1, lines.size() / 10);
    lines.resize(lines.size() - std::min(drop, lines.size()));
    lines.push_back(marker);
    text = util::join(lines, "\n");
    return true;
}

struct UrlParts {
    std::string base;
    std::string path;
};

UrlParts split_url(const std::string& url) {
    static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) throw ConfigError("endpoint URL is not http(s)://host[:port]/path: " + url);
    UrlParts u{m[1], m[2].matched ? m[2].str() : std::string("/v1/chat/completions")};
    return u;
}

bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

struct Fence {
    std::string info;
    std::string body;
};

void split_fences(std::string_view raw, std::vector<Fence>& fences, std::vector<std::string>& prose) {
    bool in = false;
    Fence cur;
    for (const auto& line : util::split_lines(raw)) {
        auto t = util::trim(line);
        if (util::starts_with(t, "```")) {
            if (!in) {
                cur = Fence{util::to_lower(util::trim(t.substr(3))), ""};
                in = true;
            } else {
                fences.push_back(cur);
                in = false;
            }
            continue;
        }
        if (in) cur.body += line + "\n";
        else prose.push_back(line);
    }
    if (in && !util::trim(cur.body).empty()) fences.push_back(cur);
}

// "Justification:" style headers in free text.
std::string section(const std::vector<std::string>& prose, const std::string& header) {
    static const std::regex any_header(R"(^\s*(#+\s*)?\**\s*([A-Za-z][A-Za-z ]{2,30})\s*\**\s*:)");
    std::regex want("^\\s*(#+\\s*)?\\**\\s*" + header + "\\s*\\**\\s*:?\\s*\\**(.*)$", std::regex::icase);
    std::string out;
    bool on = false;
    for (const auto& line : prose) {
        std::smatch m;
        if (std::regex_match(line, m, want)) {
            on = true;
            out += m[2].str() + "\n";
            continue;
        }
        if (on && std::regex_search(line, m, any_header)) {
            auto name = util::to_lower(util::trim(m[2].str()));
            if (name == "explanation" || name == "justification" || name == "imports" || name == "plan") break;
        }
        if (on) out += line + "\n";
    }
    return util::trim(out);
}

bool is_java_fence(const Fence& f) {
    return f.info.empty() || f.info == "java" || f.body.find("@Test") != std::string::npos;
}

}  // namespace

std::string to_string(TemplateId t) {
    switch (t) {
        case TemplateId::Planner: return "PLANNER";
        case TemplateId::Generator: return "GENERATOR";
        case TemplateId::FixerI: return "FIXER_I";
        case TemplateId::FixerII: return "FIXER_II";
    }
    return "?";
}

TemplateId template_from_string(std::string_view name) {
    for (auto t : {TemplateId::Planner, TemplateId::Generator, TemplateId::FixerI, TemplateId::FixerII})
        if (to_string(t) == name) return t;
    throw ConfigError("unknown prompt template: " + std::string(name));
}

std::string to_string(ArtifactKind k) {
    switch (k) {
        case ArtifactKind::Plan: return "PLAN";
        case ArtifactKind::TestMethod: return "TEST_METHOD";
        case ArtifactKind::Fix: return "FIX";
    }
    return "?";
}

bool PromptTemplate::has_slot(std::string_view name) const {
    return std::any_of(slots.begin(), slots.end(), [&](const SlotSpec& s) { return s.name == name; });
}

const PromptTemplate& prompt_template(TemplateId id) {
    static const std::vector<PromptTemplate> all = build_templates();
    return all[static_cast<std::size_t>(id)];
}

std::string render_prompt(TemplateId id, const SlotValues& slots) {
    const auto& tpl = prompt_template(id);
    for (const auto& [name, value] : slots)
        if (!tpl.has_slot(name)) throw PromptError("template " + to_string(id) + " has no slot '" + name + "'");
    std::string out = tpl.text;
    for (const auto& s : tpl.slots) {
        auto it = slots.find(s.name);
        std::string value;
        if (it != slots.end()) value = it->second;
        else if (s.mandatory) throw PromptError("template " + to_string(id) + " needs slot '" + s.name + "'");
        if (util::trim(value).empty()) value = it != slots.end() && s.mandatory ? "(empty)" : "(none)";
        out = util::replace_all(std::move(out), "{{" + s.name + "}}", value);
    }
    return out;
}

std::int64_t estimate_tokens(std::string_view text) {
    // ceil(n / 4 * 1.1) in integers; the double form rounds 400 chars up to 111
    return static_cast<std::int64_t>((text.size() * 11 + 39) / 40);
}

FittedPrompt fit_prompt(TemplateId id, SlotValues slots, const GenerationParams& params) {
    FittedPrompt fp;
    fp.text = render_prompt(id, slots);
    fp.token_estimate = estimate_tokens(fp.text);
    auto note = [&](const std::string& slot) {
        if (std::find(fp.truncated_slots.begin(), fp.truncated_slots.end(), slot) == fp.truncated_slots.end())
            fp.truncated_slots.push_back(slot);
    };
    for (const std::string slot : {"usage_patterns", "current_test_file"}) {
        auto it = slots.find(slot);
        if (it == slots.end()) continue;
        while (!fits(fp.token_estimate, params)) {
            bool changed = slot == "usage_patterns" ? shrink_patterns(it->second) : shrink_tail(it->second);
            if (!changed) break;
            note(slot);
            fp.text = render_prompt(id, slots);
            fp.token_estimate = estimate_tokens(fp.text);
        }
    }
    if (!fits(fp.token_estimate, params))
        throw PromptError(to_string(id) + " prompt needs ~" + std::to_string(fp.token_estimate) + " tokens plus " +
                          std::to_string(params.max_output_tokens) + " for output, over the budget of " +
                          std::to_string(params.context_budget_tokens));
    return fp;
}

// ---- fingerprints ------------------------------------------------------------------------

const std::vector<std::string>& fingerprint_slots(TemplateId id) {
    static const std::map<TemplateId, std::vector<std::string>> slots = {
        {TemplateId::Planner, {"cut_name", "uncovered_paths"}},
        {TemplateId::Generator, {"cut_name", "test_plans"}},
        {TemplateId::FixerI, {"cut_name", "failing_test", "diagnostics"}},
        {TemplateId::FixerII, {"cut_name", "failing_test", "symbol_check", "typestate_check"}},
    };
    return slots.at(id);
}

std::string prompt_fingerprint(TemplateId id, const SlotValues& slots) {
    std::uint64_t h = util::fnv1a64(to_string(id));
    for (const auto& name : fingerprint_slots(id)) {
        auto it = slots.find(name);
        std::string digest = it == slots.end() ? "-" : util::hex64(util::fnv1a64(util::trim(it->second)));
        h = util::fnv1a64(name + "=" + digest + "\x1f", h);
    }
    return util::hex64(h);
}

// ---- HTTP client -------------------------------------------------------------------------

HttpChatClient::HttpChatClient(std::string api_key, RetryPolicy retry, Sleeper sleeper)
    : api_key_(std::move(api_key)), retry_(retry), sleep_(std::move(sleeper)) {
    if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

Completion HttpChatClient::complete(const std::string& prompt, const PromptKey&, const GenerationParams& params) {
    if (params.endpoint_url.empty()) throw ConfigError("no model endpoint configured");
    auto url = split_url(params.endpoint_url);
    nlohmann::json body{{"model", params.model_name},
                        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
                        {"temperature", params.temperature},
                        {"max_tokens", params.max_output_tokens},
                        {"stream", false}};
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    std::string last_error;
    auto backoff = retry_.initial_backoff;
    for (int attempt = 1; attempt <= retry_.max_retries + 1; ++attempt) {
        httplib::Client cli(url.base);
        cli.set_connection_timeout(10);
        cli.set_read_timeout(600);
        auto res = cli.Post(url.path, headers, body.dump(), "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
        } else if (res->status == 200) {
            nlohmann::json reply;
            try {
                reply = nlohmann::json::parse(res->body);
            } catch (const std::exception& e) {
                throw BackendError(std::string("model endpoint returned invalid JSON: ") + e.what());
            }
            Completion c;
            c.attempts = attempt;
            try {
                c.text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
            } catch (const std::exception&) {
                throw BackendError("model reply has no choices[0].message.content");
            }
            auto usage = reply.value("usage", nlohmann::json::object());
            c.tokens_in = usage.value("prompt_tokens", estimate_tokens(prompt));
            c.tokens_out = usage.value("completion_tokens", estimate_tokens(c.text));
            return c;
        } else if (transient_status(res->status)) {
            last_error = "HTTP " + std::to_string(res->status);
        } else {
            throw BackendError("model endpoint rejected the request: HTTP " + std::to_string(res->status) + " " +
                               redact_secrets(res->body.substr(0, 300)));
        }
        if (attempt <= retry_.max_retries) {
            sleep_(backoff);
            backoff = std::chrono::milliseconds(static_cast<std::int64_t>(static_cast<double>(backoff.count()) * retry_.multiplier));
        }
    }
    throw LlmUnavailable("model endpoint unavailable after " + std::to_string(retry_.max_retries + 1) +
                         " attempts: " + last_error);
}

// ---- fake --------------------------------------------------------------------------------

void FakeLlm::script(TemplateId t, const std::string& fingerprint, std::vector<std::string> responses) {
    table_[{t, fingerprint}] = std::move(responses);
}

FakeLlm FakeLlm::from_json(const nlohmann::json& j) {
    FakeLlm f;
    for (const auto& e : j.at("entries")) {
        std::vector<std::string> responses;
        if (e.contains("response")) responses.push_back(e.at("response").get<std::string>());
        for (const auto& r : e.value("responses", nlohmann::json::array())) responses.push_back(r.get<std::string>());
        if (responses.empty()) throw ConfigError("fake LLM entry without responses");
        f.script(template_from_string(e.at("template").get<std::string>()), e.value("fingerprint", "*"), std::move(responses));
    }
    return f;
}

FakeLlm FakeLlm::load(const std::string& path) {
    try {
        return from_json(nlohmann::json::parse(util::read_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad fake LLM script " + path + ": " + e.what());
    }
}

Completion FakeLlm::complete(const std::string& prompt, const PromptKey& key, const GenerationParams&) {
    ++calls_;
    auto k = std::make_pair(key.template_id, key.fingerprint);
    auto it = table_.find(k);
    if (it == table_.end()) {
        k.second = "*";
        it = table_.find(k);
    }
    if (it == table_.end())
        throw LlmUnavailable("fake LLM has no response for " + to_string(key.template_id) + " " + key.fingerprint);
    auto& n = served_[k];
    Completion c;
    c.text = it->second[std::min(n, it->second.size() - 1)];
    ++n;
    c.tokens_in = estimate_tokens(prompt);
    c.tokens_out = estimate_tokens(c.text);
    return c;
}

// ---- parsing -----------------------------------------------------------------------------

std::vector<std::string> extract_test_methods(std::string_view code) {
    std::vector<std::string> out;
    std::vector<java::Token> toks;
    try {
        toks = java::tokenize(code);
    } catch (const java::ParseError&) {
        return out;
    }
    auto text = [&](std::size_t i) -> const std::string& { return toks[i].text; };
    std::size_t i = 0;
    while (i < toks.size() && toks[i].kind != java::TokenKind::End) {
        if (!(text(i) == "@" && toks[i + 1].kind == java::TokenKind::Identifier && text(i + 1) != "interface")) {
            ++i;
            continue;
        }
        // One run of annotations; remember whether @Test is among them.
        std::size_t run_start = i;
        bool has_test = false;
        while (text(i) == "@" && toks[i + 1].kind == java::TokenKind::Identifier && text(i + 1) != "interface") {
            ++i;
            std::string last = text(i++);
            while (text(i) == "." && toks[i + 1].kind == java::TokenKind::Identifier) {
                last = text(i + 1);
                i += 2;
            }
            if (last == "Test") has_test = true;
            if (text(i) == "(") {
                int depth = 0;
                do {
                    if (text(i) == "(") ++depth;
                    else if (text(i) == ")") --depth;
                    ++i;
                } while (depth > 0 && toks[i].kind != java::TokenKind::End);
            }
        }
        if (!has_test) continue;
        int parens = 0;
        while (toks[i].kind != java::TokenKind::End && !(parens == 0 && (text(i) == "{" || text(i) == ";"))) {
            if (text(i) == "(") ++parens;
            else if (text(i) == ")") --parens;
            ++i;
        }
        if (toks[i].kind == java::TokenKind::End || text(i) == ";") continue;
        int depth = 0;
        std::size_t close = i;
        for (; toks[close].kind != java::TokenKind::End; ++close) {
            if (text(close) == "{") ++depth;
            else if (text(close) == "}" && --depth == 0) break;
        }
        std::size_t end_off = toks[close].kind == java::TokenKind::End ? code.size() : toks[close].offset + 1;
        out.push_back(std::string(code.substr(toks[run_start].offset, end_off - toks[run_start].offset)));
        i = close;
    }
    return out;
}

ParseOutcome parse_response(TemplateId id, std::string_view raw) {
    ParseOutcome po;
    std::vector<Fence> fences;
    std::vector<std::string> prose;
    split_fences(raw, fences, prose);
    std::string explanation = section(prose, "Explanation");
    if (explanation.empty()) explanation = util::trim(util::join(prose, "\n"));

    if (id == TemplateId::Planner) {
        for (const auto& f : fences) {
            if (f.info == "java" || util::trim(f.body).empty()) continue;
            ParsedTestArtifact a;
            a.kind = ArtifactKind::Plan;
            a.body = util::trim(f.body);
            po.artifacts.push_back(std::move(a));
        }
        if (po.artifacts.empty()) po.failure = "planner response has no plan blocks";
        return po;
    }

    static const std::regex import_re(R"(^\s*import\s+(static\s+)?([\w.]+(\.\*)?)\s*;\s*$)");
    static const std::regex package_re(R"(^\s*package\s+[\w.]+\s*;\s*$)");
    std::vector<std::string> shared_imports;
    std::vector<std::pair<std::string, std::vector<std::string>>> methods;
    for (const auto& f : fences) {
        if (!is_java_fence(f)) continue;
        std::vector<std::string> imports;
        std::string code;
        for (const auto& line : util::split_lines(f.body)) {
            std::smatch m;
            if (std::regex_match(line, m, import_re)) {
                imports.push_back((m[1].matched ? "static " : "") + m[2].str());
            } else if (!std::regex_match(line, package_re)) {
                code += line + "\n";
            }
        }
        auto found = extract_test_methods(code);
        if (found.empty()) shared_imports.insert(shared_imports.end(), imports.begin(), imports.end());
        for (auto& body : found) methods.emplace_back(std::move(body), imports);
    }
    ArtifactKind kind = id == TemplateId::Generator ? ArtifactKind::TestMethod : ArtifactKind::Fix;
    std::string justification = id == TemplateId::FixerII ? section(prose, "Justification") : "";
    for (auto& [body, imports] : methods) {
        ParsedTestArtifact a;
        a.kind = kind;
        a.body = std::move(body);
        a.imports = imports;
        for (const auto& s : shared_imports)
            if (std::find(a.imports.begin(), a.imports.end(), s) == a.imports.end()) a.imports.push_back(s);
        a.explanation = explanation;
        a.justification = justification;
        po.artifacts.push_back(std::move(a));
    }
    if (po.artifacts.empty()) {
        po.failure = fences.empty() ? "response is prose only" : "no @Test method in the response";
    } else if (id == TemplateId::FixerII && justification.empty()) {
        po.artifacts.clear();
        po.failure = "constraint-checked fix has no justification";
    } else if (id != TemplateId::Generator && po.artifacts.size() > 1) {
        po.artifacts.resize(1);  // a fix revises one test
    }
    return po;
}

// ---- gateway -----------------------------------------------------------------------------

std::string redact_secrets(std::string text) {
    static const std::regex bearer(R"((Bearer\s+)[A-Za-z0-9._\-]+)");
    static const std::regex key(R"(\bsk-[A-Za-z0-9_\-]{8,})");
    text = std::regex_replace(text, bearer, "$1***");
    return std::regex_replace(text, key, "***");
}

nlohmann::json ExchangeRecord::to_json() const {
    return {{"template", to_string(template_id)},
            {"fingerprint", fingerprint},
            {"tokens_in", tokens_in},
            {"tokens_out", tokens_out},
            {"attempts", attempts},
            {"ok", ok},
            {"truncated_slots", truncated_slots},
            {"prompt", redact_secrets(prompt)},
            {"response", redact_secrets(response)},
            {"error", error}};
}

LlmGateway::LlmGateway(LlmClient& client, GenerationParams params, std::string log_path)
    : client_(client), params_(std::move(params)), log_path_(std::move(log_path)) {}

void LlmGateway::append(const ExchangeRecord& r) {
    log_.push_back(r);
    if (log_path_.empty()) return;
    std::ofstream out(log_path_, std::ios::app);
    out << r.to_json().dump() << "\n";
}

LlmGateway::Result LlmGateway::call(TemplateId id, const SlotValues& slots) {
    Result res;
    auto& rec = res.record;
    rec.template_id = id;
    rec.fingerprint = prompt_fingerprint(id, slots);
    auto fitted = fit_prompt(id, slots, params_);
    rec.prompt = fitted.text;
    rec.truncated_slots = fitted.truncated_slots;
    try {
        auto c = client_.complete(fitted.text, PromptKey{id, rec.fingerprint}, params_);
        rec.attempts = c.attempts;
        rec.tokens_in = c.tokens_in;
        rec.tokens_out = c.tokens_out;
        rec.response = c.text;
        rec.ok = true;
        res.response = std::move(c.text);
    } catch (const BackendError& e) {
        rec.error = e.what();
        rec.attempts = 0;
        append(rec);
        throw;
    }
    res.parsed = parse_response(id, res.response);
    if (res.parsed.failure) rec.error = *res.parsed.failure;
    append(rec);
    return res;
}

std::int64_t LlmGateway::tokens_in() const {
    std::int64_t n = 0;
    for (const auto& r : log_) n += r.tokens_in;
    return n;
}

std::int64_t LlmGateway::tokens_out() const {
    std::int64_t n = 0;
    for (const auto& r : log_) n += r.tokens_out;
    return n;
}

}  // namespace mockless
