#include "mockless/usage_miner.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <set>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "mockless/java/parser.hpp"
#include "mockless/util.hpp"

namespace fs = std::filesystem;

namespace mockless {

std::string to_string(DiscoveredVia v) {
    switch (v) {
        case DiscoveredVia::ConstructorParam: return "CONSTRUCTOR_PARAM";
        case DiscoveredVia::MethodParam: return "METHOD_PARAM";
        case DiscoveredVia::FieldType: return "FIELD_TYPE";
        case DiscoveredVia::ReturnType: return "RETURN_TYPE";
    }
    return "?";
}

std::string to_string(SliceOrigin o) {
    switch (o) {
        case SliceOrigin::PassingTest: return "PASSING_TEST";
        case SliceOrigin::Production: return "PRODUCTION";
        case SliceOrigin::TestSource: return "TEST_SOURCE";
    }
    return "?";
}

int origin_tier(SliceOrigin o) {
    switch (o) {
        case SliceOrigin::PassingTest: return 0;
        case SliceOrigin::Production: return 1;
        case SliceOrigin::TestSource: return 2;
    }
    return 3;
}

namespace {

SliceOrigin origin_from_string(const std::string& s) {
    if (s == "PASSING_TEST") return SliceOrigin::PassingTest;
    if (s == "TEST_SOURCE") return SliceOrigin::TestSource;
    return SliceOrigin::Production;
}

// "java.util.List<java.lang.String>[]" -> "java.util.List"
std::string bare_type(std::string t) {
    if (auto lt = t.find('<'); lt != std::string::npos) t.erase(lt, t.rfind('>') == std::string::npos ? std::string::npos : t.rfind('>') - lt + 1);
    while (util::ends_with(t, "[]")) t.resize(t.size() - 2);
    if (util::ends_with(t, "...")) t.resize(t.size() - 3);
    return util::trim(t);
}

bool is_value_type(const std::string& fqn) {
    static const std::unordered_set<std::string> v = {
        "void", "boolean", "byte", "char", "short", "int", "long", "float", "double",
        "java.lang.String", "java.lang.Object", "java.lang.Boolean", "java.lang.Byte", "java.lang.Character",
        "java.lang.Short", "java.lang.Integer", "java.lang.Long", "java.lang.Float", "java.lang.Double",
        "String", "Object", "Boolean", "Byte", "Character", "Short", "Integer", "Long", "Float", "Double"};
    return v.count(fqn) != 0;
}

bool starts_upper(std::string_view s) { return !s.empty() && std::isupper(static_cast<unsigned char>(s[0])); }

}  // namespace

std::vector<DependencyRef> collect_dependencies(const ClassEntry& cut, const ClassIndex& index) {
    std::vector<DependencyRef> out;
    std::set<std::string> seen;
    auto consider = [&](const std::string& raw, DiscoveredVia via) {
        std::string t = bare_type(raw);
        if (t.empty() || is_value_type(t) || t == cut.fqn || !index.find(t)) return;
        if (!seen.insert(t).second) return;
        out.push_back({t, via});
    };
    for (const auto& c : cut.constructors)
        for (const auto& p : c.param_types) consider(p, DiscoveredVia::ConstructorParam);
    for (const auto& m : cut.methods)
        if (m.visibility == Visibility::Public)
            for (const auto& p : m.param_types) consider(p, DiscoveredVia::MethodParam);
    for (const auto& f : cut.fields) consider(f.type, DiscoveredVia::FieldType);
    for (const auto& m : cut.methods)
        if (m.visibility == Visibility::Public) consider(m.return_type, DiscoveredVia::ReturnType);
    return out;
}

std::optional<std::string> documented_default(std::string_view written_type) {
    std::string t = util::trim(written_type);
    if (auto lt = t.find('<'); lt != std::string::npos) t = t.substr(0, lt) + (util::ends_with(t, "[]") ? t.substr(t.rfind('>') + 1) : "");
    int dims = 0;
    while (util::ends_with(t, "[]")) {
        t.resize(t.size() - 2);
        ++dims;
    }
    if (util::ends_with(t, "...")) {
        t.resize(t.size() - 3);
        ++dims;
    }
    std::string simple = util::last_component(t);
    static const std::unordered_map<std::string, std::string> table = {
        {"boolean", "false"}, {"Boolean", "false"},
        {"byte", "(byte) 0"}, {"Byte", "(byte) 0"},
        {"short", "(short) 0"}, {"Short", "(short) 0"},
        {"int", "0"}, {"Integer", "0"},
        {"long", "0L"}, {"Long", "0L"},
        {"float", "0.0f"}, {"Float", "0.0f"},
        {"double", "0.0"}, {"Double", "0.0"},
        {"char", "'a'"}, {"Character", "'a'"},
        {"String", "\"\""}, {"CharSequence", "\"\""},
        {"OutputStream", "new java.io.ByteArrayOutputStream()"},
        {"ByteArrayOutputStream", "new java.io.ByteArrayOutputStream()"},
        {"Writer", "new java.io.StringWriter()"},
        {"StringWriter", "new java.io.StringWriter()"},
        {"InputStream", "new java.io.ByteArrayInputStream(new byte[0])"},
        {"ByteArrayInputStream", "new java.io.ByteArrayInputStream(new byte[0])"},
        {"Reader", "new java.io.StringReader(\"\")"},
        {"StringReader", "new java.io.StringReader(\"\")"},
        {"List", "new java.util.ArrayList<>()"}, {"ArrayList", "new java.util.ArrayList<>()"},
        {"Collection", "new java.util.ArrayList<>()"}, {"Iterable", "new java.util.ArrayList<>()"},
        {"Set", "new java.util.HashSet<>()"}, {"HashSet", "new java.util.HashSet<>()"},
        {"Map", "new java.util.HashMap<>()"}, {"HashMap", "new java.util.HashMap<>()"},
    };
    auto it = table.find(simple);
    if (it == table.end()) return std::nullopt;
    if (dims == 0) return it->second;
    // Arrays only for element types with a plain spelling.
    static const std::unordered_set<std::string> plain = {"boolean", "byte", "short", "int", "long", "float", "double",
                                                          "char", "String", "Boolean", "Byte", "Short", "Integer",
                                                          "Long", "Float", "Double", "Character"};
    if (!plain.count(simple)) return std::nullopt;
    std::string out = "new " + simple + "[0]";
    for (int i = 1; i < dims; ++i) out += "[]";
    return out;
}

bool type_matches(std::string_view written_raw, const std::string& fqn, const std::string& package,
                  const std::vector<std::string>& imports) {
    std::string written = bare_type(std::string(written_raw));
    if (written.empty() || fqn.empty()) return false;
    if (written.find('.') != std::string::npos) return written == fqn || util::ends_with(fqn, "." + written);
    if (written != util::last_component(fqn)) return false;
    std::string owner_pkg = util::strip_last_component(fqn);
    for (const auto& imp : imports) {
        if (util::ends_with(imp, ".*")) continue;
        if (util::last_component(imp) == written) return imp == fqn;  // an explicit import decides
    }
    if (owner_pkg == package || owner_pkg == "java.lang") return true;
    for (const auto& imp : imports)
        if (util::ends_with(imp, ".*") && imp.substr(0, imp.size() - 2) == owner_pkg) return true;
    return false;
}

// ---- parsed context --------------------------------------------------------------------------

namespace {

struct MethodScope {
    const java::Stmt* body = nullptr;
    const std::vector<java::Param>* params = nullptr;
    const java::TypeDecl* owner = nullptr;
    int line = 0;
    int end_line = 0;
};

struct FileContext {
    std::optional<java::ParsedUnit> unit;
    std::optional<java::ParsedMethod> method;
    std::vector<java::Token> snippet_tokens;
    java::Stmt snippet_block;

    const std::vector<java::Token>* tokens = nullptr;
    std::string package;
    std::vector<std::string> imports;         // explicit and "pkg.*"
    std::vector<std::string> static_imports;  // "a.B.m" or "a.B.*"
    std::vector<MethodScope> methods;
};

void collect_methods(const java::TypeDecl& decl, std::vector<MethodScope>& out) {
    for (const auto& m : decl.methods)
        if (m.body) out.push_back({m.body.get(), &m.params, &decl, m.line, m.end_line});
    for (const auto& n : decl.nested) collect_methods(*n, out);
}

// Full compilation unit, else one method, else a statement list.
std::unique_ptr<FileContext> load_context(std::string_view source) {
    auto ctx = std::make_unique<FileContext>();
    try {
        ctx->unit = java::parse_compilation_unit(source);
        ctx->tokens = &ctx->unit->tokens;
        ctx->package = ctx->unit->unit.package;
        for (const auto& imp : ctx->unit->unit.imports) {
            std::string name = imp.wildcard ? imp.name + ".*" : imp.name;
            (imp.is_static ? ctx->static_imports : ctx->imports).push_back(name);
        }
        for (const auto& t : ctx->unit->unit.types) collect_methods(*t, ctx->methods);
        return ctx;
    } catch (const java::ParseError&) {
    }
    try {
        ctx->method = java::parse_method(source);
        ctx->tokens = &ctx->method->tokens;
        const auto& m = ctx->method->method;
        if (m.body) ctx->methods.push_back({m.body.get(), &m.params, nullptr, m.line, m.end_line});
        return ctx;
    } catch (const java::ParseError&) {
    }
    try {
        auto parsed = java::parse_statements(source);
        ctx->snippet_tokens = std::move(parsed.tokens);
        ctx->tokens = &ctx->snippet_tokens;
        ctx->snippet_block.kind = java::StmtKind::Block;
        int last = 1;
        for (auto& s : parsed.statements) {
            last = std::max(last, s->end_line);
            ctx->snippet_block.children.push_back(std::move(s));
        }
        ctx->methods.push_back({&ctx->snippet_block, nullptr, nullptr, 1, last});
        return ctx;
    } catch (const java::ParseError&) {
    }
    return nullptr;
}

const MethodScope* enclosing_method(const FileContext& ctx, int line) {
    const MethodScope* best = nullptr;
    for (const auto& m : ctx.methods)
        if (m.line <= line && line <= m.end_line && (!best || m.end_line - m.line < best->end_line - best->line)) best = &m;
    return best;
}

// ---- call sites -----------------------------------------------------------------------------

void sites_in_method(const MethodScope& scope, const FileContext& ctx, const std::string& file, const std::string& fqn,
                     std::vector<CallSite>& out) {
    std::set<std::string> typed;  // names whose declared type is the dependency
    if (scope.owner)
        for (const auto& f : scope.owner->fields)
            if (type_matches(f.type.name, fqn, ctx.package, ctx.imports))
                for (const auto& v : f.vars) typed.insert(v.name);
    if (scope.params)
        for (const auto& p : *scope.params)
            if (!p.type.array_dims && type_matches(p.type.name, fqn, ctx.package, ctx.imports)) typed.insert(p.name);

    std::unordered_set<const java::Expr*> declared_inits;
    java::walk_stmt(*scope.body, [&](const java::Stmt& s) {
        if (s.kind != java::StmtKind::LocalVar || s.var_type.array_dims) return;
        bool match = type_matches(s.var_type.name, fqn, ctx.package, ctx.imports);
        for (const auto& v : s.vars) {
            if (s.var_type.name == "var" && v.init && v.init->kind == java::ExprKind::New && !v.init->type.array_dims)
                match = type_matches(v.init->type.name, fqn, ctx.package, ctx.imports);
            if (!match) continue;
            typed.insert(v.name);
            if (v.init) declared_inits.insert(v.init.get());
            out.push_back({file, v.line ? v.line : s.line, s.var_type.column, SiteKind::Declaration, v.name, fqn});
        }
    });
    java::walk_stmt(*scope.body, {}, [&](const java::Expr& e) {
        if (e.kind == java::ExprKind::New && !e.type.array_dims && !declared_inits.count(&e) &&
            type_matches(e.type.name, fqn, ctx.package, ctx.imports)) {
            out.push_back({file, e.line, e.column, SiteKind::Construction, "", fqn});
        } else if (e.kind == java::ExprKind::Call && e.target && e.target->kind == java::ExprKind::Name &&
                   typed.count(e.target->text)) {
            out.push_back({file, e.line, e.column, SiteKind::Receiver, e.target->text, fqn});
        }
    });
}

std::vector<CallSite> sites_in_context(const FileContext& ctx, const std::string& file, const std::string& fqn) {
    std::vector<CallSite> out;
    for (const auto& m : ctx.methods) sites_in_method(m, ctx, file, fqn, out);
    std::sort(out.begin(), out.end(), [](const CallSite& a, const CallSite& b) {
        return std::tie(a.file, a.line, a.column, a.variable) < std::tie(b.file, b.line, b.column, b.variable);
    });
    return out;
}

// ---- slicing --------------------------------------------------------------------------------

struct Def {
    std::string name;
    const java::Stmt* stmt = nullptr;
    const java::Expr* value = nullptr;
    std::size_t order = 0;  // token index of the defining statement
    int line = 0;
    bool from_declaration = false;  // LocalVar with a single declarator
    std::string type_text;
};

struct NameUse {
    std::string name;
    bool qualifier = false;  // root of a dotted target (may be a package)
};

struct Uses {
    std::vector<NameUse> names;
    std::vector<std::string> unqualified_calls;
    bool uses_this = false;
};

void collect_uses(const java::Expr& e, const std::set<std::string>& bound, Uses& out, bool qualifier = false);

void collect_block_uses(const java::Stmt& block, std::set<std::string> bound, Uses& out) {
    java::walk_stmt(block, [&](const java::Stmt& s) {
        for (const auto& v : s.vars) bound.insert(v.name);
        for (const auto& c : s.catches) bound.insert(c.var);
    });
    java::walk_stmt(block, [&](const java::Stmt& s) {
        auto visit = [&](const std::unique_ptr<java::Expr>& e) {
            if (e) collect_uses(*e, bound, out);
        };
        for (const auto& v : s.vars) visit(v.init);
        visit(s.expr);
        for (const auto& u : s.updates) visit(u);
    });
}

void collect_uses(const java::Expr& e, const std::set<std::string>& bound, Uses& out, bool qualifier) {
    using K = java::ExprKind;
    switch (e.kind) {
        case K::Name:
            if (!bound.count(e.text)) out.names.push_back({e.text, qualifier});
            return;
        case K::This:
        case K::Super:
            out.uses_this = true;
            return;
        case K::FieldAccess:
            if (e.target && e.target->kind == K::This) {
                if (!bound.count(e.text)) out.names.push_back({e.text, false});
                return;
            }
            if (e.target) collect_uses(*e.target, bound, out, true);
            return;
        case K::Call:
            if (e.target) collect_uses(*e.target, bound, out, true);
            else out.unqualified_calls.push_back(e.text);
            for (const auto& a : e.args) collect_uses(*a, bound, out);
            return;
        case K::MethodRef:
            if (e.target) collect_uses(*e.target, bound, out, true);
            return;
        case K::Lambda: {
            auto inner = bound;
            inner.insert(e.lambda_params.begin(), e.lambda_params.end());
            for (const auto& a : e.args) collect_uses(*a, inner, out);
            if (e.lambda_block) collect_block_uses(*e.lambda_block, inner, out);
            return;
        }
        case K::InstanceOf: {
            for (const auto& a : e.args) collect_uses(*a, bound, out);
            return;
        }
        default:
            if (e.target) collect_uses(*e.target, bound, out, e.kind == K::New);
            for (const auto& a : e.args) collect_uses(*a, bound, out);
            if (e.switch_stmt) collect_block_uses(*e.switch_stmt, bound, out);
            return;
    }
}

std::string render_range(const std::vector<java::Token>& tokens, std::size_t b, std::size_t e,
                         const std::map<std::string, std::string>& subs) {
    std::vector<java::Token> out;
    for (std::size_t i = b; i < e && i < tokens.size(); ++i) {
        const auto& t = tokens[i];
        if (t.kind == java::TokenKind::Identifier && subs.count(t.text)) {
            bool after_dot = i > b && tokens[i - 1].text == ".";
            bool this_dot = after_dot && i >= b + 2 && tokens[i - 2].text == "this";
            bool before_paren = i + 1 < e && tokens[i + 1].text == "(";
            if ((!after_dot || this_dot) && !before_paren) {
                if (this_dot) out.resize(out.size() - 2);
                java::Token r = t;
                r.text = subs.at(t.text);
                if (this_dot) r.space_before = tokens[i - 2].space_before;
                out.push_back(r);
                continue;
            }
        }
        out.push_back(t);
    }
    return java::render_tokens(out, 0, out.size());
}

std::size_t find_identifier(const std::vector<java::Token>& tokens, std::size_t b, std::size_t e, const std::string& name) {
    for (std::size_t i = b; i < e && i < tokens.size(); ++i)
        if (tokens[i].kind == java::TokenKind::Identifier && tokens[i].text == name) return i;
    return e;
}

std::string lower_first(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
    return s;
}

std::optional<UsageSlice> slice_in_context(const CallSite& site, const FileContext& ctx, SliceOrigin origin) {
    const MethodScope* scope = enclosing_method(ctx, site.line);
    if (!scope) return std::nullopt;
    const auto& tokens = *ctx.tokens;

    std::map<std::string, java::TypeRef> outside;  // params shadow fields
    if (scope->owner)
        for (const auto& f : scope->owner->fields)
            for (const auto& v : f.vars) outside[v.name] = f.type;
    if (scope->params)
        for (const auto& p : *scope->params) {
            auto t = p.type;
            if (p.varargs) t.array_dims += 1;
            outside[p.name] = t;
        }

    std::vector<Def> defs;
    std::map<std::string, std::string> declared_type_text;
    for (const java::Stmt* s : java::flatten_statements(*scope->body)) {
        if (s->kind == java::StmtKind::LocalVar) {
            if (s->vars.empty()) continue;
            std::size_t name_at = find_identifier(tokens, s->tok_begin, s->tok_end, s->vars.front().name);
            std::string type_text = java::render_tokens(tokens, s->tok_begin, name_at);
            for (const auto& v : s->vars) {
                declared_type_text[v.name] = type_text;
                defs.push_back({v.name, s, v.init.get(), s->tok_begin, s->line, s->vars.size() == 1, type_text});
            }
        } else if (s->kind == java::StmtKind::ForEach) {
            for (const auto& v : s->vars) defs.push_back({v.name, s, nullptr, s->tok_begin, s->line, false, ""});
        } else if (s->kind == java::StmtKind::Expression && s->expr && s->expr->kind == java::ExprKind::Assign &&
                   s->expr->text == "=" && s->expr->args.size() == 2 && s->expr->args[0]->kind == java::ExprKind::Name) {
            const auto& name = s->expr->args[0]->text;
            auto tt = declared_type_text.find(name);
            if (tt == declared_type_text.end()) continue;  // assigns a field or parameter
            defs.push_back({name, s, s->expr->args[1].get(), s->tok_begin, s->line, false, tt->second});
        }
    }
    auto def_before = [&](const std::string& name, std::size_t order) -> const Def* {
        const Def* best = nullptr;
        for (const auto& d : defs)
            if (d.name == name && d.order < order && (!best || d.order > best->order)) best = &d;
        return best;
    };

    // Definition of the variable of interest.
    Def synthetic;
    const Def* root = nullptr;
    if (site.kind == SiteKind::Construction) {
        const java::Expr* found = nullptr;
        java::walk_stmt(*scope->body, {}, [&](const java::Expr& e) {
            if (!found && e.kind == java::ExprKind::New && e.line == site.line && e.column == site.column) found = &e;
        });
        if (!found) return std::nullopt;
        std::string name = lower_first(util::last_component(found->type.name));
        std::set<std::string> taken;
        for (const auto& d : defs) taken.insert(d.name);
        for (const auto& [n, t] : outside) taken.insert(n);
        std::string base = name;
        for (int i = 2; taken.count(name) || java::is_keyword(name); ++i) name = base + std::to_string(i);
        synthetic = {name, nullptr, found, found->tok_begin, found->line, false, found->type.name};
        root = &synthetic;
    } else {
        for (const auto& d : defs) {
            if (d.name != site.variable || !d.value) continue;
            bool ok = site.kind == SiteKind::Declaration ? d.line == site.line : d.line <= site.line;
            if (ok && (!root || d.order > root->order)) root = &d;
        }
        if (!root) return std::nullopt;
    }

    std::set<std::string> static_names;
    bool static_wildcard = false;
    for (const auto& s : ctx.static_imports) {
        if (util::ends_with(s, ".*")) static_wildcard = true;
        else static_names.insert(util::last_component(s));
    }

    std::vector<const Def*> chosen;
    std::set<const Def*> seen{root};
    std::map<std::string, std::string> subs;
    std::set<std::string> used_static;
    std::vector<const Def*> work{root};
    while (!work.empty()) {
        const Def* d = work.back();
        work.pop_back();
        if (!d->value) return std::nullopt;
        chosen.push_back(d);
        if (chosen.size() > kMaxSliceStatements) return std::nullopt;
        Uses uses;
        collect_uses(*d->value, {}, uses);
        if (uses.uses_this) return std::nullopt;
        for (const auto& c : uses.unqualified_calls) {
            if (static_names.count(c)) used_static.insert(c);
            else if (!static_wildcard) return std::nullopt;  // helper method of the enclosing class
        }
        for (const auto& u : uses.names) {
            if (const Def* dep = def_before(u.name, d->order)) {
                if (seen.insert(dep).second) work.push_back(dep);
                continue;
            }
            if (auto it = outside.find(u.name); it != outside.end()) {
                auto dflt = documented_default(it->second.erased());
                if (!dflt) return std::nullopt;
                subs[u.name] = *dflt;
                continue;
            }
            if (starts_upper(u.name) || u.qualifier || static_names.count(u.name)) {
                if (static_names.count(u.name)) used_static.insert(u.name);
                continue;
            }
            return std::nullopt;
        }
    }
    std::sort(chosen.begin(), chosen.end(), [](const Def* a, const Def* b) { return a->order < b->order; });

    UsageSlice slice;
    slice.dependency_fqn = site.dependency_fqn;
    slice.origin = origin;
    slice.file = site.file;
    slice.line = site.line;
    std::set<std::string> declared;
    std::set<std::string> idents;
    for (const Def* d : chosen) {
        std::string text;
        if (d->from_declaration && !declared.count(d->name)) {
            text = render_range(tokens, d->stmt->tok_begin, d->stmt->tok_end, subs);
        } else {
            std::string value = render_range(tokens, d->value->tok_begin, d->value->tok_end, subs);
            text = declared.count(d->name) ? d->name + " = " + value + ";" : d->type_text + " " + d->name + " = " + value + ";";
            if (d == &synthetic)
                for (std::size_t i = d->value->tok_begin; i < d->value->tok_end; ++i)
                    if (tokens[i].kind == java::TokenKind::Identifier) idents.insert(tokens[i].text);
        }
        declared.insert(d->name);
        if (d->stmt)
            for (std::size_t i = d->stmt->tok_begin; i < d->stmt->tok_end; ++i)
                if (tokens[i].kind == java::TokenKind::Identifier && (i == 0 || tokens[i - 1].text != ".")) idents.insert(tokens[i].text);
        slice.statements.push_back(text);
    }
    if (root == &synthetic) idents.insert(util::last_component(synthetic.type_text));

    std::set<std::string> imports;
    bool unmatched_type = false;
    for (const auto& id : idents) {
        if (subs.count(id) || declared.count(id)) continue;
        bool hit = false;
        for (const auto& imp : ctx.imports)
            if (!util::ends_with(imp, ".*") && util::last_component(imp) == id) {
                imports.insert(imp);
                hit = true;
            }
        if (!hit && starts_upper(id)) unmatched_type = true;
    }
    if (unmatched_type)
        for (const auto& imp : ctx.imports)
            if (util::ends_with(imp, ".*")) imports.insert(imp);
    for (const auto& s : ctx.static_imports)
        if (used_static.count(util::last_component(s)) || (util::ends_with(s, ".*") && !used_static.empty())) imports.insert("static " + s);
    slice.imports.assign(imports.begin(), imports.end());
    slice.structural_hash = structural_hash(slice.statements);
    return slice;
}

}  // namespace

std::vector<CallSite> find_call_sites_in_source(std::string_view source, const std::string& file,
                                                const std::string& dependency_fqn) {
    auto ctx = load_context(source);
    if (!ctx) return {};
    return sites_in_context(*ctx, file, dependency_fqn);
}

namespace {

std::vector<std::string> java_files(const std::vector<std::string>& roots) {
    std::vector<std::string> files;
    for (const auto& root : roots) {
        std::error_code ec;
        if (fs::is_regular_file(root, ec)) {
            files.push_back(fs::path(root).generic_string());
            continue;
        }
        if (!fs::is_directory(root, ec)) continue;
        fs::recursive_directory_iterator it(root, fs::directory_options::skip_permission_denied, ec), end;
        for (; it != end; it.increment(ec)) {
            if (ec) break;
            auto name = it->path().filename().string();
            if (it->is_directory(ec)) {
                if (name == "target" || name == "build" || name == "node_modules" || util::starts_with(name, ".")) it.disable_recursion_pending();
                continue;
            }
            if (it->path().extension() == ".java") files.push_back(it->path().generic_string());
        }
    }
    std::sort(files.begin(), files.end());
    files.erase(std::unique(files.begin(), files.end()), files.end());
    return files;
}

}  // namespace

std::vector<CallSite> find_call_sites(const std::vector<std::string>& roots, const DependencyRef& dep) {
    std::vector<CallSite> out;
    for (const auto& f : java_files(roots)) {
        std::string text;
        try {
            text = util::read_file(f);
        } catch (const std::exception&) {
            continue;
        }
        auto sites = find_call_sites_in_source(text, f, dep.fqn);
        out.insert(out.end(), sites.begin(), sites.end());
    }
    std::sort(out.begin(), out.end(), [](const CallSite& a, const CallSite& b) {
        return std::tie(a.file, a.line, a.column, a.variable) < std::tie(b.file, b.line, b.column, b.variable);
    });
    return out;
}

std::optional<UsageSlice> backward_slice(const CallSite& site, std::string_view source, SliceOrigin origin) {
    auto ctx = load_context(source);
    if (!ctx) return std::nullopt;
    return slice_in_context(site, *ctx, origin);
}

std::uint64_t structural_hash(const std::vector<std::string>& statements) {
    std::string joined = util::join(statements, "\n");
    std::vector<java::Token> tokens;
    try {
        tokens = java::tokenize(joined);
    } catch (const java::ParseError&) {
        return util::fnv1a64(joined);
    }
    std::map<std::string, std::string> rename;
    try {
        auto parsed = java::parse_statements(joined);
        for (const auto& s : parsed.statements)
            for (const java::Stmt* f : java::flatten_statements(*s))
                if (f->kind == java::StmtKind::LocalVar)
                    for (const auto& v : f->vars)
                        if (!rename.count(v.name)) rename.emplace(v.name, "v" + std::to_string(rename.size() + 1));
    } catch (const java::ParseError&) {
        // Not a statement list: hash the raw tokens.
    }
    std::uint64_t h = util::fnv1a64("");
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto& t = tokens[i];
        if (t.kind == java::TokenKind::End) break;
        std::string text = t.text;
        if (t.kind == java::TokenKind::Identifier && (i == 0 || tokens[i - 1].text != "."))
            if (auto it = rename.find(text); it != rename.end()) text = it->second;
        h = util::fnv1a64(text, h);
        h = util::fnv1a64("\x1f", h);
    }
    return h;
}

std::string UsageSlice::render() const {
    std::string out = "// imports: " + (imports.empty() ? std::string("none") : util::join(imports, ", "));
    for (const auto& s : statements) out += "\n" + s;
    return out;
}

std::vector<UsageSlice> dedup_and_rank(std::vector<UsageSlice> slices, std::size_t k) {
    for (auto& s : slices) s.structural_hash = structural_hash(s.statements);
    std::vector<std::string> rendered;
    rendered.reserve(slices.size());
    for (const auto& s : slices) rendered.push_back(s.render());
    std::vector<std::size_t> idx(slices.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const auto& x = slices[a];
        const auto& y = slices[b];
        return std::make_tuple(origin_tier(x.origin), x.statements.size(), std::cref(rendered[a]), std::cref(x.file), x.line) <
               std::make_tuple(origin_tier(y.origin), y.statements.size(), std::cref(rendered[b]), std::cref(y.file), y.line);
    });
    std::vector<UsageSlice> out;
    std::set<std::uint64_t> seen;
    for (auto i : idx) {
        if (out.size() >= k) break;
        if (!seen.insert(slices[i].structural_hash).second) continue;
        out.push_back(slices[i]);
    }
    return out;
}

SliceOrigin classify_origin(const std::string& file, const std::string& test_root) {
    std::string f = fs::path(file).generic_string();
    std::string root = fs::path(test_root).generic_string();
    while (!root.empty() && root.back() == '/') root.pop_back();
    if (!root.empty() && (util::starts_with(f, root + "/") || f.find("/" + root + "/") != std::string::npos))
        return SliceOrigin::PassingTest;
    if (f.find("src/test/") != std::string::npos) return SliceOrigin::TestSource;
    return SliceOrigin::Production;
}

std::vector<UsageSlice> slices_from_source(std::string_view source, const std::string& file,
                                           const std::string& dependency_fqn, SliceOrigin origin) {
    std::vector<UsageSlice> out;
    auto ctx = load_context(source);
    if (!ctx) return out;
    for (const auto& site : sites_in_context(*ctx, file, dependency_fqn))
        if (auto s = slice_in_context(site, *ctx, origin)) out.push_back(std::move(*s));
    return out;
}

std::map<std::string, std::vector<UsageSlice>> mine_usages(const std::vector<std::string>& roots,
                                                           const std::vector<DependencyRef>& deps,
                                                           const std::string& test_root) {
    std::map<std::string, std::vector<UsageSlice>> out;
    for (const auto& d : deps) out[d.fqn];
    for (const auto& f : java_files(roots)) {
        std::string text;
        try {
            text = util::read_file(f);
        } catch (const std::exception&) {
            continue;
        }
        auto ctx = load_context(text);
        if (!ctx) continue;
        auto origin = classify_origin(f, test_root);
        for (const auto& d : deps) {
            // cheap prefilter: the simple name must occur in the file
            if (text.find(util::last_component(d.fqn)) == std::string::npos) continue;
            for (const auto& site : sites_in_context(*ctx, f, d.fqn))
                if (auto s = slice_in_context(site, *ctx, origin)) out[d.fqn].push_back(std::move(*s));
        }
    }
    return out;
}

std::string render_prompt_snippets(const std::vector<UsageSlice>& snippets) {
    std::string out;
    for (const auto& s : snippets) out += "```java\n" + s.render() + "\n```\n";
    return out;
}

nlohmann::json UsageSlice::to_json() const {
    return {{"dependency_fqn", dependency_fqn}, {"statements", statements}, {"imports", imports},
            {"origin", to_string(origin)}, {"call_site", {{"file", file}, {"line", line}}},
            {"structural_hash", util::hex64(structural_hash)}};
}

UsageSlice UsageSlice::from_json(const nlohmann::json& j) {
    UsageSlice s;
    s.dependency_fqn = j.at("dependency_fqn").get<std::string>();
    s.statements = j.at("statements").get<std::vector<std::string>>();
    s.imports = j.at("imports").get<std::vector<std::string>>();
    s.origin = origin_from_string(j.at("origin").get<std::string>());
    s.file = j.at("call_site").at("file").get<std::string>();
    s.line = j.at("call_site").at("line").get<int>();
    s.structural_hash = mockless::structural_hash(s.statements);
    return s;
}

void save_slices(const std::map<std::string, std::vector<UsageSlice>>& slices, const std::string& path) {
    nlohmann::json j;
    j["schema_version"] = 1;
    nlohmann::json by = nlohmann::json::object();
    for (const auto& [fqn, list] : slices) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& s : list) a.push_back(s.to_json());
        by[fqn] = a;
    }
    j["slices"] = by;
    util::write_file(path, j.dump(1));
}

std::map<std::string, std::vector<UsageSlice>> load_slices(const std::string& path) {
    auto j = nlohmann::json::parse(util::read_file(path));
    if (j.value("schema_version", 0) != 1) throw std::runtime_error("slices: unsupported schema_version");
    std::map<std::string, std::vector<UsageSlice>> out;
    for (const auto& [fqn, list] : j.at("slices").items())
        for (const auto& s : list) out[fqn].push_back(UsageSlice::from_json(s));
    return out;
}

}  // namespace mockless
