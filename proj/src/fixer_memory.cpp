#include "mockless/fixer_memory.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <regex>
#include <set>

#include "mockless/java/parser.hpp"
#include "mockless/test_file.hpp"
#include "mockless/usage_miner.hpp"
#include "mockless/util.hpp"

namespace mockless {

namespace {

// A leading capital alone is an ordinary sentence word ("No", "Cannot").
bool is_identifier_like(const std::string& w) {
    for (std::size_t i = 0; i < w.size(); ++i) {
        auto c = static_cast<unsigned char>(w[i]);
        if ((i > 0 && std::isupper(c)) || std::isdigit(c) || c == '_' || c == '$') return true;
    }
    return false;
}

std::vector<std::string> normalize_words(const std::string& text, const std::string& symbol) {
    static const std::regex word_re(R"([A-Za-z_$][A-Za-z0-9_$]*|[0-9]+)");
    std::vector<std::string> out;
    auto sym_tail = util::to_lower(util::last_component(symbol));
    for (auto it = std::sregex_iterator(text.begin(), text.end(), word_re); it != std::sregex_iterator(); ++it) {
        std::string w = it->str();
        if (std::isdigit(static_cast<unsigned char>(w[0]))) out.emplace_back("<n>");
        else if (is_identifier_like(w) || (!sym_tail.empty() && util::to_lower(w) == sym_tail)) out.emplace_back("<id>");
        else out.push_back(util::to_lower(w));
    }
    return out;
}

std::vector<std::string> sorted_unique(std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

std::string package_of_source(std::string_view source) {
    static const std::regex pkg_re(R"(^\s*package\s+([\w.]+)\s*;)");
    for (const auto& line : util::split_lines(source)) {
        std::smatch m;
        if (std::regex_search(line, m, pkg_re)) return m[1];
    }
    return {};
}

// Innermost non-block statement whose token span holds token `idx`, searched
// over every method body of the unit.
const java::Stmt* statement_at(const java::ParsedUnit& pu, std::size_t idx, const java::MethodDecl** owner) {
    const java::Stmt* best = nullptr;
    std::function<void(const java::TypeDecl&)> visit = [&](const java::TypeDecl& t) {
        for (const auto& m : t.methods) {
            if (!m.body) continue;
            for (const java::Stmt* s : java::flatten_statements(*m.body)) {
                if (s->kind == java::StmtKind::Block) continue;
                if (s->tok_begin <= idx && idx < s->tok_end &&
                    (!best || s->tok_end - s->tok_begin < best->tok_end - best->tok_begin)) {
                    best = s;
                    if (owner) *owner = &m;
                }
            }
        }
        for (const auto& n : t.nested) visit(*n);
    };
    for (const auto& t : pu.unit.types) visit(*t);
    return best;
}

std::size_t token_at(const std::vector<java::Token>& toks, int line, int column) {
    for (std::size_t i = 0; i < toks.size(); ++i)
        if (toks[i].line == line && toks[i].column == column) return i;
    return std::string::npos;
}

// End (exclusive) of a dotted name starting at token i.
std::size_t dotted_end(const std::vector<java::Token>& toks, std::size_t i) {
    std::size_t j = i + 1;
    while (j + 1 < toks.size() && toks[j].text == "." && toks[j + 1].kind == java::TokenKind::Identifier) j += 2;
    return j;
}

bool needs_import(const std::string& fqn, const std::string& package) {
    auto pkg = util::strip_last_component(fqn);
    return !pkg.empty() && pkg != package && pkg != "java.lang";
}

struct Edit {
    std::size_t begin, end;
    std::string text;
};

std::pair<std::size_t, std::size_t> whole_lines(std::string_view s, std::size_t begin, std::size_t end) {
    std::size_t b = begin;
    while (b > 0 && s[b - 1] != '\n') --b;
    if (!util::trim(s.substr(b, begin - b)).empty()) b = begin;
    std::size_t e = end;
    while (e < s.size() && (s[e] == ' ' || s[e] == '\t')) ++e;
    if (e < s.size() && s[e] == '\n') ++e;
    else e = end;
    return {b, e};
}

std::string apply_edits(std::string source, std::vector<Edit> edits) {
    // Later starts first; an edit that overlaps an already applied one is dropped.
    std::sort(edits.begin(), edits.end(), [](const Edit& a, const Edit& b) {
        if (a.begin != b.begin) return a.begin > b.begin;
        return a.end > b.end;
    });
    std::size_t floor = std::string::npos;
    for (const auto& e : edits) {
        if (floor != std::string::npos && e.end > floor) continue;
        source.replace(e.begin, e.end - e.begin, e.text);
        floor = e.begin;
    }
    return source;
}

// Locals declared by a statement.
std::set<std::string> declared(const java::Stmt& s) {
    std::set<std::string> out;
    if (s.kind == java::StmtKind::LocalVar)
        for (const auto& v : s.vars) out.insert(v.name);
    return out;
}

bool mentions_any(const std::vector<java::Token>& toks, const java::Stmt& s, const std::set<std::string>& names) {
    for (std::size_t i = s.tok_begin; i < s.tok_end && i < toks.size(); ++i)
        if (toks[i].kind == java::TokenKind::Identifier && names.count(toks[i].text) && (i == 0 || toks[i - 1].text != "."))
            return true;
    return false;
}

}  // namespace

// ---- signatures and records ---------------------------------------------------------------

std::string to_string(MemoryKind k) {
    switch (k) {
        case MemoryKind::GoldTest: return "GOLD_TEST";
        case MemoryKind::FixRecipe: return "FIX_RECIPE";
        case MemoryKind::AntiPattern: return "ANTI_PATTERN";
        case MemoryKind::Unfixable: return "UNFIXABLE";
    }
    return "?";
}

MemoryKind memory_kind_from_string(const std::string& s) {
    if (s == "GOLD_TEST") return MemoryKind::GoldTest;
    if (s == "FIX_RECIPE") return MemoryKind::FixRecipe;
    if (s == "ANTI_PATTERN") return MemoryKind::AntiPattern;
    if (s == "UNFIXABLE") return MemoryKind::Unfixable;
    throw std::invalid_argument("unknown memory record kind '" + s + "'");
}

ErrorSignature ErrorSignature::from_report(const ErrorReport& report) {
    ErrorSignature sig;
    sig.phase = util::to_lower(to_string(report.phase));
    if (report.entries.empty()) return sig;
    const auto& e = report.entries.front();
    std::vector<std::string> words = normalize_words(e.message, e.symbol_or_exception);
    if (report.phase == ErrorPhase::Runtime) {
        sig.code = util::to_lower(e.symbol_or_exception);
        if (!e.symbol_or_exception.empty()) words.push_back(util::to_lower(util::last_component(e.symbol_or_exception)));
    } else {
        sig.code = util::join(normalize_words(e.message, e.symbol_or_exception), " ");
    }
    sig.tokens = sorted_unique(std::move(words));
    return sig;
}

ErrorSignature ErrorSignature::from_tokens(std::string phase, std::string code, std::vector<std::string> tokens) {
    ErrorSignature s;
    s.phase = std::move(phase);
    s.code = std::move(code);
    for (auto& t : tokens) t = util::to_lower(t);
    s.tokens = sorted_unique(std::move(tokens));
    return s;
}

nlohmann::json ErrorSignature::to_json() const { return {{"phase", phase}, {"code", code}, {"tokens", tokens}}; }

ErrorSignature ErrorSignature::from_json(const nlohmann::json& j) {
    return from_tokens(j.value("phase", ""), j.value("code", ""), j.value("tokens", std::vector<std::string>{}));
}

bool ErrorSignature::operator==(const ErrorSignature& o) const {
    return phase == o.phase && code == o.code && tokens == o.tokens;
}

double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    if (sa.empty() && sb.empty()) return 0.0;
    std::size_t inter = 0;
    for (const auto& x : sa) inter += sb.count(x);
    return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

nlohmann::json MemoryRecord::to_json() const {
    return {{"kind", to_string(kind)}, {"signature", signature.to_json()}, {"summary", summary},
            {"diff", diff}, {"iteration", iteration}, {"hash", util::hex64(hash)}};
}

MemoryRecord MemoryRecord::from_json(const nlohmann::json& j) {
    MemoryRecord r;
    r.kind = memory_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("signature")) r.signature = ErrorSignature::from_json(j.at("signature"));
    r.summary = j.value("summary", "");
    r.diff = j.value("diff", "");
    r.iteration = j.value("iteration", 0);
    r.hash = std::stoull(j.value("hash", std::string("0")), nullptr, 16);
    return r;
}

std::string MemoryRecord::render() const {
    std::string out = "[" + to_string(kind) + "] " + summary + "\n";
    if (!signature.empty()) out += "error: " + signature.phase + " " + signature.code + "\n";
    if (!diff.empty()) out += "change:\n" + diff;
    if (!out.empty() && out.back() != '\n') out += "\n";
    return out;
}

std::uint64_t test_body_hash(std::string_view test_method) {
    try {
        auto pm = java::parse_method(test_method);
        if (pm.method.body) {
            const auto& b = *pm.method.body;
            // tokens strictly inside the braces
            if (b.tok_end >= b.tok_begin + 2) {
                std::size_t from = pm.tokens[b.tok_begin].offset + 1;
                std::size_t to = pm.tokens[b.tok_end - 1].offset;
                return structural_hash(std::vector<std::string>{std::string(test_method.substr(from, to - from))});
            }
        }
    } catch (const java::ParseError&) {
    }
    return util::fnv1a64(test_method);
}

std::string line_diff(std::string_view before, std::string_view after) {
    auto a = util::split_lines(before), b = util::split_lines(after);
    std::size_t n = a.size(), m = b.size();
    std::vector<std::vector<int>> lcs(n + 1, std::vector<int>(m + 1, 0));
    for (std::size_t i = n; i-- > 0;)
        for (std::size_t j = m; j-- > 0;)
            lcs[i][j] = a[i] == b[j] ? lcs[i + 1][j + 1] + 1 : std::max(lcs[i + 1][j], lcs[i][j + 1]);
    std::string out;
    std::size_t i = 0, j = 0;
    while (i < n || j < m) {
        if (i < n && j < m && a[i] == b[j]) {
            out += "  " + a[i] + "\n";
            ++i, ++j;
        } else if (j < m && (i == n || lcs[i][j + 1] >= lcs[i + 1][j])) {
            out += "+ " + b[j++] + "\n";
        } else {
            out += "- " + a[i++] + "\n";
        }
    }
    return out;
}

// ---- store ----------------------------------------------------------------------------------

ExperienceMemory::ExperienceMemory(std::string path, bool reuse) : path_(std::move(path)) {
    if (path_.empty()) return;
    if (reuse) {
        std::ifstream in(path_);
        std::string line;
        int n = 0;
        while (std::getline(in, line)) {
            ++n;
            if (util::trim(line).empty()) continue;
            try {
                records_.push_back(MemoryRecord::from_json(nlohmann::json::parse(line)));
            } catch (const std::exception& e) {
                throw ConfigError("memory file " + path_ + " line " + std::to_string(n) + ": " + e.what());
            }
        }
    } else {
        util::write_file(path_, "");
    }
}

void ExperienceMemory::add(MemoryRecord r) {
    if (r.kind == MemoryKind::FixRecipe && r.diff.empty()) throw std::invalid_argument("FIX_RECIPE records need a diff");
    if (!path_.empty()) {
        std::ofstream out(path_, std::ios::app);
        out << r.to_json().dump() << "\n";
    }
    records_.push_back(std::move(r));
}

void ExperienceMemory::record_gold(std::string_view test, int iteration) {
    MemoryRecord r;
    r.kind = MemoryKind::GoldTest;
    r.iteration = iteration;
    r.hash = test_body_hash(test);
    r.summary = "passing test " + method_name(test);
    r.diff = std::string(test);
    add(std::move(r));
}

void ExperienceMemory::record_success(std::string_view failing_test, std::string_view fixed_test, const ErrorReport& report,
                                      int iteration) {
    MemoryRecord r;
    r.kind = MemoryKind::FixRecipe;
    r.signature = ErrorSignature::from_report(report);
    r.iteration = iteration;
    r.hash = test_body_hash(fixed_test);
    std::string first = report.entries.empty() ? std::string("failure") : report.entries.front().message;
    r.summary = "fixed " + util::to_lower(to_string(report.phase)) + " error: " + first;
    r.diff = line_diff(failing_test, fixed_test);
    add(std::move(r));
}

void ExperienceMemory::record_anti_pattern(std::string_view test, const std::string& reason, int iteration,
                                           const ErrorSignature& signature) {
    MemoryRecord r;
    r.kind = MemoryKind::AntiPattern;
    r.signature = signature;
    r.iteration = iteration;
    r.hash = test_body_hash(test);
    r.summary = reason;
    add(std::move(r));
}

void ExperienceMemory::record_unfixable(std::string_view test, const ErrorReport& report, int iteration) {
    MemoryRecord r;
    r.kind = MemoryKind::Unfixable;
    r.signature = ErrorSignature::from_report(report);
    r.iteration = iteration;
    r.hash = test_body_hash(test);
    std::string first = report.entries.empty() ? std::string("failure") : report.entries.front().message;
    r.summary = "unfixable: " + first;
    add(std::move(r));
}

std::vector<MemoryHit> ExperienceMemory::retrieve(const ErrorSignature& query, std::size_t top_n,
                                                  const std::vector<MemoryKind>& kinds) const {
    std::vector<std::pair<std::size_t, double>> scored;
    for (std::size_t i = 0; i < records_.size(); ++i) {
        if (std::find(kinds.begin(), kinds.end(), records_[i].kind) == kinds.end()) continue;
        double s = jaccard(query.tokens, records_[i].signature.tokens);
        if (s > 0.0) scored.emplace_back(i, s);
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first > b.first;
    });
    std::vector<MemoryHit> out;
    for (std::size_t k = 0; k < scored.size() && k < top_n; ++k) out.push_back({records_[scored[k].first], scored[k].second});
    return out;
}

std::vector<MemoryRecord> ExperienceMemory::anti_patterns_matching(std::string_view test) const {
    std::vector<MemoryRecord> out;
    auto h = test_body_hash(test);
    for (const auto& r : records_)
        if (r.kind == MemoryKind::AntiPattern && r.hash == h) out.push_back(r);
    return out;
}

std::string ExperienceMemory::negative_guidance(std::size_t limit) const {
    std::string out;
    std::size_t n = 0;
    for (auto it = records_.rbegin(); it != records_.rend() && n < limit; ++it) {
        if (it->kind != MemoryKind::AntiPattern) continue;
        out += "- " + it->summary + "\n";
        ++n;
    }
    return out;
}

std::optional<FailingTransition> failing_transition(const ErrorEntry& entry, const std::vector<ReceiverCalls>& sequences,
                                                    const TypestateMap& models, const std::string& test_source) {
    auto package = package_of_source(test_source);
    std::vector<std::string> imports;
    for (const auto& imp : imports_of(test_source))
        if (!util::starts_with(imp, "static ")) imports.push_back(imp);
    std::optional<FailingTransition> best;
    int best_line = -1;
    for (const auto& seq : sequences) {
        if (!entry.test_name.empty() && seq.test_method != entry.test_name) continue;
        const auto* model = find_model(models, seq.type_name, package, imports);
        if (!model || !is_state_related_failure(entry.symbol_or_exception, entry.throwing_class, model->class_fqn)) continue;
        int last = -1;
        for (std::size_t i = 0; i < seq.calls.size(); ++i)
            if (entry.line <= 0 || seq.lines[i] <= entry.line) last = static_cast<int>(i);
        if (last < 0) continue;
        int line = seq.lines[static_cast<std::size_t>(last)];
        if (line <= best_line) continue;
        best_line = line;
        FailingTransition t;
        t.class_fqn = model->class_fqn;
        t.receiver = seq.receiver;
        t.to = seq.calls[static_cast<std::size_t>(last)];
        t.from = last == 0 ? kInitState : seq.calls[static_cast<std::size_t>(last - 1)];
        best = t;
    }
    return best;
}

// ---- constraints ----------------------------------------------------------------------------

std::string ConstraintReport::symbol_text() const {
    std::string out;
    for (const auto& v : symbol_violations) {
        out += "- " + v.describe();
        if (v.candidates.empty()) out += " -> no valid alternative; the statement is removed";
        else out += " -> use " + v.candidates.front().name;
        out += "\n";
    }
    return out;
}

std::string ConstraintReport::typestate_text(const TypestateMap& models) const {
    std::string out;
    std::set<std::string> described;
    for (const auto& v : protocol_violations) {
        out += "- " + v.describe() + "\n";
        if (described.insert(v.class_fqn).second)
            if (auto it = models.find(v.class_fqn); it != models.end()) out += describe_protocol(it->second);
    }
    if (!out.empty() && out.back() != '\n') out += "\n";
    return out;
}

std::string ConstraintReport::memory_text() const {
    std::string out;
    for (const auto& h : memory_hits) out += h.record.render();
    for (const auto& a : anti_pattern_hits) out += "Avoid (seen before): " + a.summary + "\n";
    return out;
}

ConstraintReport check_constraints(std::string_view fix_unit, const ClassIndex& index, const TypestateMap& models,
                                   const ExperienceMemory& memory, const ErrorSignature& signature,
                                   const ConstraintOptions& options) {
    ConstraintReport r;
    r.symbol_violations = validate_symbols(index, fix_unit, options.symbols);
    try {
        r.protocol_violations = check_sequence(models, fix_unit);
    } catch (const java::ParseError&) {
        // the symbol check already reports the parse failure
    }
    if (!signature.empty())
        for (auto& h : memory.retrieve(signature, options.memory_top_n))
            if (h.similarity >= options.min_memory_similarity) r.memory_hits.push_back(std::move(h));
    for (const auto& m : extract_test_methods(fix_unit))
        for (auto& a : memory.anti_patterns_matching(m)) r.anti_pattern_hits.push_back(std::move(a));
    return r;
}

std::string apply_deterministic_symbol_repairs(std::string_view source, const std::vector<SymbolViolation>& violations,
                                               const ClassIndex& index) {
    (void)index;  // candidates already come from the index
    std::optional<java::ParsedUnit> pu;
    try {
        pu = java::parse_compilation_unit(source);
    } catch (const java::ParseError&) {
        return std::string(source);
    }
    const auto& toks = pu->tokens;
    const std::string package = pu->unit.package;
    std::vector<Edit> edits;
    std::vector<std::string> new_imports;
    std::set<const java::Stmt*> deleted;
    auto lines = util::split_lines(source);

    auto delete_statement = [&](std::size_t tok) {
        const java::MethodDecl* owner = nullptr;
        const java::Stmt* s = statement_at(*pu, tok, &owner);
        if (!s || deleted.count(s)) return;
        deleted.insert(s);
        // uses of locals the statement declared go too
        auto names = declared(*s);
        if (!names.empty() && owner && owner->body) {
            for (const java::Stmt* later : java::flatten_statements(*owner->body)) {
                if (later->kind == java::StmtKind::Block || later->tok_begin < s->tok_end || deleted.count(later)) continue;
                if (!later->children.empty() || later->body || later->then_branch) continue;
                if (!mentions_any(toks, *later, names)) continue;
                deleted.insert(later);
                auto more = declared(*later);
                names.insert(more.begin(), more.end());
            }
        }
    };

    for (const auto& v : violations) {
        // import lines
        if (v.kind == SymbolViolationKind::MissingOrAmbiguousImport && v.column == 1 && v.line >= 1 &&
            v.line <= static_cast<int>(lines.size()) && util::starts_with(util::trim(lines[v.line - 1]), "import ")) {
            std::size_t b = 0;
            for (int i = 1; i < v.line; ++i) b = source.find('\n', b) + 1;
            std::size_t e = source.find('\n', b);
            e = e == std::string::npos ? source.size() : e + 1;
            std::string text;
            if (!v.candidates.empty() && !util::ends_with(v.offending_symbol, ".*")) {
                bool is_static = util::trim(lines[v.line - 1]).find("import static ") == 0;
                std::string target = v.candidates.front().name;
                if (is_static) target = "static " + target + "." + util::last_component(v.offending_symbol);
                text = (is_static ? "import " : "import ") + target + ";\n";
                if (util::starts_with(target, "static ")) text = "import static " + target.substr(7) + ";\n";
            }
            edits.push_back({b, e, text});
            continue;
        }
        std::size_t at = token_at(toks, v.line, v.column);
        if (at == std::string::npos) continue;

        switch (v.kind) {
            case SymbolViolationKind::UnknownMethod: {
                std::size_t t = at;
                if (toks[t].text != v.offending_symbol) {
                    t = std::string::npos;
                    for (std::size_t i = 0; i + 1 < toks.size(); ++i)
                        if (toks[i].line == v.line && toks[i].text == v.offending_symbol && toks[i + 1].text == "(") t = i;
                }
                if (t == std::string::npos) break;
                if (v.candidates.empty()) delete_statement(t);
                else edits.push_back({toks[t].offset, toks[t].offset + toks[t].text.size(), v.candidates.front().name});
                break;
            }
            case SymbolViolationKind::AbstractInstantiation:
            case SymbolViolationKind::UnresolvedType: {
                if (v.candidates.empty()) {
                    delete_statement(at);
                    break;
                }
                const std::string& fqn = v.candidates.front().name;
                std::size_t end = dotted_end(toks, at);
                edits.push_back({toks[at].offset, toks[end - 1].offset + toks[end - 1].text.size(), util::last_component(fqn)});
                if (needs_import(fqn, package)) new_imports.push_back(fqn);
                break;
            }
            case SymbolViolationKind::MissingOrAmbiguousImport:
                if (v.candidates.empty()) delete_statement(at);
                else if (needs_import(v.candidates.front().name, package)) new_imports.push_back(v.candidates.front().name);
                break;
            case SymbolViolationKind::BadConstructor:
                if (v.candidates.empty()) delete_statement(at);
                break;
        }
    }
    for (const java::Stmt* s : deleted) {
        auto [b, e] = whole_lines(source, toks[s->tok_begin].offset,
                                  toks[s->tok_end - 1].offset + toks[s->tok_end - 1].text.size());
        edits.push_back({b, e, ""});
    }
    auto out = apply_edits(std::string(source), std::move(edits));
    return new_imports.empty() ? out : add_imports(out, new_imports);
}

std::string apply_protocol_repairs(std::string_view source, const std::vector<ProtocolViolation>& violations,
                                   const TypestateMap& models) {
    std::vector<java::Token> toks;
    try {
        toks = java::tokenize(source);
    } catch (const java::ParseError&) {
        return std::string(source);
    }
    auto sequences = receiver_sequences(source);
    // argument text of an existing `recv.method(...)` call, preferring the same receiver
    auto find_args = [&](const std::string& receiver, const std::string& method) -> std::optional<std::string> {
        std::optional<std::string> any;
        for (std::size_t i = 0; i + 3 < toks.size(); ++i) {
            if (toks[i + 1].text != "." || toks[i + 2].text != method || toks[i + 3].text != "(") continue;
            int depth = 0;
            std::size_t j = i + 3;
            for (; j < toks.size(); ++j) {
                if (toks[j].text == "(") ++depth;
                else if (toks[j].text == ")" && --depth == 0) break;
            }
            if (j >= toks.size()) continue;
            std::string args(source.substr(toks[i + 3].offset + 1, toks[j].offset - toks[i + 3].offset - 1));
            if (toks[i].text == receiver) return args;
            if (!any) any = args;
        }
        return any;
    };

    std::vector<Edit> edits;
    for (const auto& v : violations) {
        auto mit = models.find(v.class_fqn);
        if (mit == models.end()) continue;
        const ReceiverCalls* seq = nullptr;
        for (const auto& s : sequences)
            if (s.receiver == v.receiver && s.test_method == v.test_method) seq = &s;
        if (!seq) continue;
        auto fixed = repair_sequence(mit->second, seq->calls, v);
        if (!fixed.feasible || fixed.sequence.size() <= seq->calls.size()) continue;
        std::size_t inserted = fixed.sequence.size() - seq->calls.size();
        std::string block;
        bool ok = true;
        // the statement holding the violating call decides the indentation
        std::size_t line_begin = 0;
        for (int i = 1; i < v.line; ++i) line_begin = source.find('\n', line_begin) + 1;
        std::size_t indent_end = line_begin;
        while (indent_end < source.size() && (source[indent_end] == ' ' || source[indent_end] == '\t')) ++indent_end;
        std::string indent(source.substr(line_begin, indent_end - line_begin));
        for (std::size_t k = 0; k < inserted; ++k) {
            const auto& call = fixed.sequence[v.position + k];
            auto args = find_args(v.receiver, call);
            if (!args) {
                ok = false;
                break;
            }
            block += indent + v.receiver + "." + call + "(" + *args + ");\n";
        }
        if (ok) edits.push_back({line_begin, line_begin, block});
    }
    return apply_edits(std::string(source), std::move(edits));
}

// ---- stages ---------------------------------------------------------------------------------

std::optional<ParsedTestArtifact> fix_stage1(const std::string& failing_test, const ErrorReport& report, LlmGateway& gateway,
                                             const FixContext& ctx) {
    SlotValues slots{{"cut_name", ctx.cut_name},
                     {"cut_source_numbered", ctx.cut_source_numbered},
                     {"current_test_file", ctx.current_test_file},
                     {"failing_test", failing_test},
                     {"diagnostics", report.render()}};
    auto result = gateway.call(TemplateId::FixerI, slots);
    if (result.parsed.artifacts.empty()) return std::nullopt;
    return result.parsed.artifacts.front();
}

std::optional<ParsedTestArtifact> fix_stage2(const std::string& fix, const ConstraintReport& report, const std::string& diagnostics,
                                             LlmGateway& gateway, const FixContext& ctx, const TypestateMap& models) {
    if (report.empty()) throw std::invalid_argument("stage 2 needs a non-empty constraint report");
    SlotValues slots{{"cut_name", ctx.cut_name},
                     {"cut_source_numbered", ctx.cut_source_numbered},
                     {"failing_test", fix},
                     {"diagnostics", diagnostics}};
    if (auto s = report.symbol_text(); !s.empty()) slots["symbol_check"] = s;
    if (auto s = report.typestate_text(models); !s.empty()) slots["typestate_check"] = s;
    if (auto s = report.memory_text(); !s.empty()) slots["experience_memory"] = s;
    auto result = gateway.call(TemplateId::FixerII, slots);
    if (result.parsed.artifacts.empty()) return std::nullopt;
    auto art = result.parsed.artifacts.front();
    if (util::trim(art.justification).empty()) return std::nullopt;
    return art;
}

TestRepair repair_test(const std::string& failing_method, const std::vector<std::string>& imports, const ErrorReport& report,
                         RepairEnv& env) {
    if (!env.gateway || !env.index || !env.models || !env.memory || !env.validate)
        throw std::invalid_argument("repair_test: incomplete environment");
    TestRepair out;
    std::string current = failing_method;
    std::vector<std::string> current_imports = imports;
    ErrorReport current_report = report;
    const auto signature = ErrorSignature::from_report(report);

    while (out.model_calls < env.n_fix) {
        ++out.model_calls;
        ++out.stage1_calls;
        auto art = fix_stage1(current, current_report, *env.gateway, env.ctx);
        if (!art) continue;

        std::string candidate = art->body;
        std::vector<std::string> cand_imports = current_imports;
        cand_imports.insert(cand_imports.end(), art->imports.begin(), art->imports.end());

        GateRecord gate;
        std::string unit;
        try {
            unit = standalone_unit(env.ctx.current_test_file, candidate, cand_imports);
        } catch (const java::ParseError&) {
            unit.clear();
        }
        ConstraintReport constraints;
        if (!unit.empty())
            constraints = check_constraints(unit, *env.index, *env.models, *env.memory, signature, env.constraints);
        if (unit.empty() || !constraints.empty()) {
            // no budget left for the constrained regeneration: the fix cannot pass the gate
            if (out.model_calls >= env.n_fix) break;
            std::string proposal = candidate;
            if (!unit.empty()) {
                auto repaired = apply_deterministic_symbol_repairs(unit, constraints.symbol_violations, *env.index);
                repaired = apply_protocol_repairs(repaired, constraints.protocol_violations, *env.models);
                auto methods = extract_test_methods(repaired);
                if (!methods.empty()) proposal = methods.front();
            } else {
                constraints.symbol_violations.push_back({SymbolViolationKind::UnresolvedType, 0, 0, "unparseable fix", "", {}});
            }
            ++out.model_calls;
            ++out.stage2_calls;
            auto art2 = fix_stage2(proposal, constraints, current_report.render(), *env.gateway, env.ctx, *env.models);
            if (!art2) continue;
            candidate = art2->body;
            cand_imports.insert(cand_imports.end(), art2->imports.begin(), art2->imports.end());
            gate.stage2 = true;
            gate.justification = art2->justification;
        } else {
            gate.constraints_clean = true;
        }
        gate.method = candidate;
        out.gate.push_back(gate);

        auto outcome = env.validate(candidate, cand_imports);
        if (outcome.status == TestStatus::Pass) {
            env.memory->record_success(current, candidate, current_report, env.iteration);
            out.fixed_method = candidate;
            out.imports = cand_imports;
            return out;
        }
        if (outcome.report) current_report = *outcome.report;
        current = candidate;
        current_imports = cand_imports;
    }
    out.unfixable = true;
    env.memory->record_unfixable(failing_method, current_report, env.iteration);
    return out;
}

}  // namespace mockless
