#include "mockless/class_index.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "mockless/archive.hpp"
#include "mockless/java/parser.hpp"
#include "mockless/util.hpp"

namespace fs = std::filesystem;

namespace mockless {

// ---- enum names ----------------------------------------------------------------------

std::string to_string(ClassSource s) {
    switch (s) {
        case ClassSource::ProjectMain: return "PROJECT_MAIN";
        case ClassSource::ProjectTest: return "PROJECT_TEST";
        case ClassSource::DependencyJar: return "DEPENDENCY_JAR";
        case ClassSource::Jdk: return "JDK";
    }
    return "?";
}

std::string to_string(ClassKind k) {
    switch (k) {
        case ClassKind::Class: return "CLASS";
        case ClassKind::Interface: return "INTERFACE";
        case ClassKind::AbstractClass: return "ABSTRACT_CLASS";
        case ClassKind::Enum: return "ENUM";
        case ClassKind::Record: return "RECORD";
        case ClassKind::Annotation: return "ANNOTATION";
    }
    return "?";
}

std::string to_string(Visibility v) {
    switch (v) {
        case Visibility::Public: return "PUBLIC";
        case Visibility::Protected: return "PROTECTED";
        case Visibility::PackagePrivate: return "PACKAGE_PRIVATE";
        case Visibility::Private: return "PRIVATE_NESTED";
    }
    return "?";
}

std::string to_string(SymbolViolationKind k) {
    switch (k) {
        case SymbolViolationKind::UnresolvedType: return "UNRESOLVED_TYPE";
        case SymbolViolationKind::UnknownMethod: return "UNKNOWN_METHOD";
        case SymbolViolationKind::BadConstructor: return "BAD_CONSTRUCTOR_ARITY_OR_TYPES";
        case SymbolViolationKind::AbstractInstantiation: return "ABSTRACT_INSTANTIATION";
        case SymbolViolationKind::MissingOrAmbiguousImport: return "MISSING_OR_AMBIGUOUS_IMPORT";
    }
    return "?";
}

namespace {

template <typename E>
E enum_from(const std::string& text, std::initializer_list<E> values) {
    for (E v : values)
        if (to_string(v) == text) return v;
    throw std::runtime_error("unknown enum value " + text);
}

const std::unordered_set<std::string>& primitive_names() {
    static const std::unordered_set<std::string> s = {"boolean", "byte", "char", "short", "int", "long", "float", "double", "void"};
    return s;
}

bool is_primitive(std::string_view t) { return primitive_names().count(std::string(t)) != 0; }

std::string strip_dims(std::string_view t, int& dims) {
    dims = 0;
    std::string s(t);
    while (util::ends_with(s, "[]")) {
        s.resize(s.size() - 2);
        ++dims;
    }
    return s;
}

std::string add_dims(std::string s, int dims) {
    for (int i = 0; i < dims; ++i) s += "[]";
    return s;
}

// Package = leading lower-case segments of a dotted name.
std::string package_of_dotted(std::string_view fqn) {
    auto parts = util::split(fqn, '.');
    std::vector<std::string> pkg;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!parts[i].empty() && std::isupper(static_cast<unsigned char>(parts[i][0]))) break;
        pkg.push_back(parts[i]);
    }
    return util::join(pkg, ".");
}

Visibility visibility_from_modifiers(const std::vector<std::string>& mods, bool implicit_public) {
    auto has = [&](const char* m) { return std::find(mods.begin(), mods.end(), m) != mods.end(); };
    if (has("public") || implicit_public) return Visibility::Public;
    if (has("protected")) return Visibility::Protected;
    if (has("private")) return Visibility::Private;
    return Visibility::PackagePrivate;
}

Visibility visibility_from_access(std::uint16_t acc) {
    if (acc & archive::kAccPublic) return Visibility::Public;
    if (acc & archive::kAccProtected) return Visibility::Protected;
    if (acc & archive::kAccPrivate) return Visibility::Private;
    return Visibility::PackagePrivate;
}

// Object members every reference type has.
const std::vector<MemberSignature>& object_methods() {
    static const std::vector<MemberSignature> m = [] {
        std::vector<MemberSignature> v;
        auto add = [&](const char* n, std::vector<std::string> p, const char* r) {
            MemberSignature s;
            s.name = n;
            s.param_types = std::move(p);
            s.return_type = r;
            v.push_back(std::move(s));
        };
        add("equals", {"java.lang.Object"}, "boolean");
        add("hashCode", {}, "int");
        add("toString", {}, "java.lang.String");
        add("getClass", {}, "java.lang.Class");
        add("notify", {}, "void");
        add("notifyAll", {}, "void");
        add("wait", {}, "void");
        add("wait", {"long"}, "void");
        add("wait", {"long", "int"}, "void");
        return v;
    }();
    return m;
}

}  // namespace

// ---- MemberSignature / context ---------------------------------------------------------

bool MemberSignature::accepts_arity(std::size_t n) const {
    if (varargs && !param_types.empty()) return n + 1 >= param_types.size();
    return n == param_types.size();
}

std::string MemberSignature::render() const {
    std::string s = name + "(" + util::join(param_types, ", ") + ")";
    if (!return_type.empty()) s += ": " + return_type;
    return s;
}

ResolutionContext ResolutionContext::for_class(const std::string& fqn, std::vector<std::string> imports) {
    ResolutionContext ctx;
    ctx.cut_fqn = fqn;
    ctx.cut_package = package_of_dotted(fqn);
    ctx.cut_imports = std::move(imports);
    return ctx;
}

std::string SymbolViolation::describe() const {
    std::ostringstream os;
    os << to_string(kind) << " at " << line << ":" << column << ": " << offending_symbol;
    if (!owner.empty()) os << " (in " << owner << ")";
    if (candidates.empty()) {
        os << "; no safe replacement";
    } else {
        os << "; candidates:";
        for (const auto& c : candidates) os << " " << (c.member ? c.member->render() : c.name);
    }
    return os.str();
}

// ---- ClassIndex ---------------------------------------------------------------------------

void ClassIndex::add(ClassEntry entry) {
    auto existing = entries_.find(entry.fqn);
    if (existing != entries_.end()) {
        for (auto& [key, set] : by_simple_) set.erase(entry.fqn);
    }
    // Simple keys: every suffix of the nesting chain ("Inner", "Outer.Inner").
    std::string rest = entry.package.empty() ? entry.fqn : entry.fqn.substr(entry.package.size() + 1);
    auto parts = util::split(rest, '.');
    for (std::size_t i = 0; i < parts.size(); ++i) {
        std::vector<std::string> tail(parts.begin() + static_cast<long>(i), parts.end());
        by_simple_[util::join(tail, ".")].insert(entry.fqn);
    }
    packages_.insert(entry.package);
    std::string key = entry.fqn;
    entries_[key] = std::move(entry);
}

const ClassEntry* ClassIndex::find(std::string_view fqn) const {
    auto it = entries_.find(std::string(fqn));
    return it == entries_.end() ? nullptr : &it->second;
}

std::vector<const ClassEntry*> ClassIndex::by_simple_name(std::string_view simple) const {
    std::vector<const ClassEntry*> out;
    auto it = by_simple_.find(simple);
    if (it == by_simple_.end()) return out;
    for (const auto& fqn : it->second) out.push_back(&entries_.at(fqn));
    return out;
}

bool ClassIndex::has_package(std::string_view package) const { return packages_.count(package) != 0; }

std::vector<std::string> ClassIndex::simple_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : by_simple_)
        if (!v.empty()) out.push_back(k);
    return out;
}

std::set<std::string> ClassIndex::supertype_closure(const std::string& fqn, bool* complete) const {
    std::set<std::string> seen;
    std::vector<std::string> stack{fqn};
    if (complete) *complete = true;
    while (!stack.empty()) {
        std::string cur = stack.back();
        stack.pop_back();
        if (!seen.insert(cur).second) continue;
        const ClassEntry* e = find(cur);
        if (!e) {
            if (complete && cur != "java.lang.Object") *complete = false;
            continue;
        }
        for (const auto& s : e->supertypes) stack.push_back(s);
    }
    return seen;
}

bool ClassIndex::is_subtype(const std::string& sub, const std::string& super) const {
    if (sub == super || super == "java.lang.Object") return true;
    return supertype_closure(sub).count(super) != 0;
}

std::vector<MemberSignature> ClassIndex::methods_named(const std::string& fqn, std::string_view name) const {
    std::vector<MemberSignature> out;
    for (const auto& m : all_methods(fqn))
        if (m.name == name) out.push_back(m);
    return out;
}

std::vector<MemberSignature> ClassIndex::all_methods(const std::string& fqn) const {
    std::vector<MemberSignature> out;
    for (const auto& t : supertype_closure(fqn)) {
        if (const ClassEntry* e = find(t)) out.insert(out.end(), e->methods.begin(), e->methods.end());
    }
    out.insert(out.end(), object_methods().begin(), object_methods().end());
    return out;
}

std::optional<FieldInfo> ClassIndex::field_named(const std::string& fqn, std::string_view name) const {
    for (const auto& t : supertype_closure(fqn)) {
        if (const ClassEntry* e = find(t)) {
            for (const auto& f : e->fields)
                if (f.name == name) return f;
        }
    }
    return std::nullopt;
}

namespace {

nlohmann::json member_to_json(const MemberSignature& m) {
    return {{"name", m.name},
            {"params", m.param_types},
            {"return", m.return_type},
            {"visibility", to_string(m.visibility)},
            {"static", m.is_static},
            {"abstract", m.is_abstract},
            {"varargs", m.varargs}};
}

MemberSignature member_from_json(const nlohmann::json& j) {
    MemberSignature m;
    m.name = j.at("name").get<std::string>();
    m.param_types = j.at("params").get<std::vector<std::string>>();
    m.return_type = j.at("return").get<std::string>();
    m.visibility = enum_from<Visibility>(j.at("visibility").get<std::string>(),
                                         {Visibility::Public, Visibility::Protected, Visibility::PackagePrivate, Visibility::Private});
    m.is_static = j.at("static").get<bool>();
    m.is_abstract = j.at("abstract").get<bool>();
    m.varargs = j.value("varargs", false);
    return m;
}

}  // namespace

nlohmann::json ClassIndex::to_json() const {
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& [fqn, e] : entries_) {
        nlohmann::json ctors = nlohmann::json::array(), methods = nlohmann::json::array(), fields = nlohmann::json::array();
        for (const auto& c : e.constructors) ctors.push_back(member_to_json(c));
        for (const auto& m : e.methods) methods.push_back(member_to_json(m));
        for (const auto& f : e.fields)
            fields.push_back({{"name", f.name}, {"type", f.type}, {"visibility", to_string(f.visibility)}, {"static", f.is_static}});
        classes.push_back({{"fqn", e.fqn},
                           {"simple_name", e.simple_name},
                           {"package", e.package},
                           {"source", to_string(e.source)},
                           {"kind", to_string(e.kind)},
                           {"visibility", to_string(e.visibility)},
                           {"constructors", ctors},
                           {"methods", methods},
                           {"fields", fields},
                           {"declared_imports", e.declared_imports},
                           {"supertypes", e.supertypes},
                           {"outer", e.outer},
                           {"origin", e.origin}});
    }
    return {{"schema_version", kSchemaVersion}, {"classes", classes}};
}

ClassIndex ClassIndex::from_json(const nlohmann::json& j) {
    if (!j.contains("schema_version")) throw std::runtime_error("classindex: missing schema_version");
    if (j.at("schema_version").get<int>() != kSchemaVersion)
        throw std::runtime_error("classindex: unsupported schema_version " + j.at("schema_version").dump());
    ClassIndex index;
    for (const auto& c : j.at("classes")) {
        ClassEntry e;
        e.fqn = c.at("fqn").get<std::string>();
        e.simple_name = c.at("simple_name").get<std::string>();
        e.package = c.at("package").get<std::string>();
        e.source = enum_from<ClassSource>(c.at("source").get<std::string>(),
                                          {ClassSource::ProjectMain, ClassSource::ProjectTest, ClassSource::DependencyJar, ClassSource::Jdk});
        e.kind = enum_from<ClassKind>(c.at("kind").get<std::string>(),
                                      {ClassKind::Class, ClassKind::Interface, ClassKind::AbstractClass, ClassKind::Enum,
                                       ClassKind::Record, ClassKind::Annotation});
        e.visibility = enum_from<Visibility>(c.at("visibility").get<std::string>(),
                                             {Visibility::Public, Visibility::Protected, Visibility::PackagePrivate, Visibility::Private});
        for (const auto& m : c.at("constructors")) e.constructors.push_back(member_from_json(m));
        for (const auto& m : c.at("methods")) e.methods.push_back(member_from_json(m));
        for (const auto& f : c.at("fields")) {
            FieldInfo fi;
            fi.name = f.at("name").get<std::string>();
            fi.type = f.at("type").get<std::string>();
            fi.visibility = enum_from<Visibility>(f.at("visibility").get<std::string>(),
                                                  {Visibility::Public, Visibility::Protected, Visibility::PackagePrivate, Visibility::Private});
            fi.is_static = f.at("static").get<bool>();
            e.fields.push_back(std::move(fi));
        }
        e.declared_imports = c.at("declared_imports").get<std::vector<std::string>>();
        e.supertypes = c.at("supertypes").get<std::vector<std::string>>();
        e.outer = c.value("outer", "");
        e.origin = c.value("origin", "");
        index.add(std::move(e));
    }
    return index;
}

std::string ClassIndex::serialize() const { return to_json().dump(1) + "\n"; }

void ClassIndex::save(const std::string& path) const { util::write_file(path, serialize()); }

ClassIndex ClassIndex::load(const std::string& path) {
    return from_json(nlohmann::json::parse(util::read_file(path)));
}

// ---- classpath and JDK table ----------------------------------------------------------

std::vector<std::string> parse_classpath(std::string_view text) {
    std::vector<std::string> out;
    for (const auto& line : util::split_lines(text)) {
        for (const auto& piece : util::split(line, ':')) {
            std::string p = util::trim(piece);
            if (p.empty() || util::starts_with(p, "[INFO]")) continue;
            out.push_back(p);
        }
    }
    return out;
}

namespace {

MemberSignature parse_table_member(const std::string& item, const std::string& simple, const std::string& fqn,
                                   bool interface_kind, bool& is_ctor) {
    std::string rest = item;
    MemberSignature m;
    bool is_default = false;
    for (;;) {
        if (util::starts_with(rest, "static ")) {
            m.is_static = true;
            rest = util::trim(rest.substr(7));
        } else if (util::starts_with(rest, "abstract ")) {
            m.is_abstract = true;
            rest = util::trim(rest.substr(9));
        } else if (util::starts_with(rest, "default ")) {
            is_default = true;
            rest = util::trim(rest.substr(8));
        } else if (util::starts_with(rest, "protected ")) {
            m.visibility = Visibility::Protected;
            rest = util::trim(rest.substr(10));
        } else {
            break;
        }
    }
    auto open = rest.find('(');
    auto close = rest.find(')', open);
    if (open == std::string::npos || close == std::string::npos) throw std::runtime_error("bad JDK table member: " + item);
    m.name = util::trim(rest.substr(0, open));
    for (auto& p : util::split(rest.substr(open + 1, close - open - 1), ',')) {
        std::string t = util::trim(p);
        if (t.empty()) continue;
        if (util::ends_with(t, "...")) {
            m.varargs = true;
            t = t.substr(0, t.size() - 3) + "[]";
        }
        m.param_types.push_back(t);
    }
    is_ctor = m.name == "<init>";
    if (is_ctor) {
        m.name = simple;
        m.return_type = fqn;
    } else {
        auto colon = rest.find(':', close);
        m.return_type = colon == std::string::npos ? "void" : util::trim(rest.substr(colon + 1));
        if (interface_kind && !m.is_static && !is_default) m.is_abstract = true;
    }
    return m;
}

}  // namespace

std::vector<ClassEntry> parse_jdk_table(std::string_view text) {
    std::vector<ClassEntry> out;
    int lineno = 0;
    for (const auto& raw : util::split_lines(text)) {
        ++lineno;
        std::string line = util::trim(raw);
        if (line.empty() || line[0] == '#') continue;
        auto tab = line.find('\t');
        std::string binary = util::trim(line.substr(0, tab));
        std::string members = tab == std::string::npos ? "" : line.substr(tab + 1);
        ClassEntry e;
        e.source = ClassSource::Jdk;
        auto dollar = binary.find('$');
        e.package = util::strip_last_component(dollar == std::string::npos ? binary : binary.substr(0, dollar));
        e.fqn = util::replace_all(binary, "$", ".");
        e.simple_name = util::last_component(e.fqn);
        if (dollar != std::string::npos) e.outer = util::strip_last_component(e.fqn);
        e.origin = "jdk-table:" + std::to_string(lineno);
        std::vector<std::string> items;
        for (auto& it : util::split(members, ';')) {
            std::string t = util::trim(it);
            if (!t.empty()) items.push_back(t);
        }
        // Kind markers come first so interface methods default to abstract.
        for (const auto& it : items) {
            if (it == "@interface") e.kind = ClassKind::Interface;
            else if (it == "@abstract") e.kind = ClassKind::AbstractClass;
            else if (it == "@enum") e.kind = ClassKind::Enum;
            else if (it == "@record") e.kind = ClassKind::Record;
            else if (it == "@annotation") e.kind = ClassKind::Annotation;
        }
        for (const auto& it : items) {
            if (it[0] == '@') {
                if (util::starts_with(it, "@extends ") || util::starts_with(it, "@implements ")) {
                    for (auto& s : util::split(it.substr(it.find(' ') + 1), ',')) e.supertypes.push_back(util::trim(s));
                }
                continue;
            }
            if (util::starts_with(it, "field ")) {
                FieldInfo f;
                std::string rest = util::trim(it.substr(6));
                if (util::starts_with(rest, "static ")) {
                    f.is_static = true;
                    rest = util::trim(rest.substr(7));
                }
                auto colon = rest.find(':');
                f.name = util::trim(rest.substr(0, colon));
                f.type = colon == std::string::npos ? "java.lang.Object" : util::trim(rest.substr(colon + 1));
                e.fields.push_back(std::move(f));
                continue;
            }
            bool is_ctor = false;
            auto m = parse_table_member(it, e.simple_name, e.fqn, e.kind == ClassKind::Interface, is_ctor);
            (is_ctor ? e.constructors : e.methods).push_back(std::move(m));
        }
        if (e.kind == ClassKind::Interface) e.constructors.clear();
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<ClassEntry> load_jdk_table(const std::string& path) {
    if (!fs::is_regular_file(path)) throw ConfigError("JDK table not found: " + path);
    return parse_jdk_table(util::read_file(path));
}

// ---- source indexing ------------------------------------------------------------------------

namespace {

struct FileScope {
    std::string package;
    std::unordered_map<std::string, std::string> single_imports;  // simple -> fqn
    std::vector<std::string> wildcard_imports;                    // package or class prefixes
    std::unordered_map<std::string, std::string> declared;        // simple or Outer.Inner -> fqn
};

using KnownFn = std::function<bool(const std::string&)>;

std::string resolve_in_scope(const std::string& written, const FileScope& scope, const KnownFn& known) {
    int dims = 0;
    std::string name = strip_dims(written, dims);
    if (name.empty() || is_primitive(name)) return add_dims(name, dims);
    std::string head = name, tail;
    auto dot = name.find('.');
    if (dot != std::string::npos) {
        head = name.substr(0, dot);
        tail = name.substr(dot);
        if (known(name)) return add_dims(name, dims);
    }
    auto attempt = [&](const std::string& fqn) -> std::optional<std::string> {
        if (known(fqn + tail)) return fqn + tail;
        return std::nullopt;
    };
    if (auto it = scope.single_imports.find(head); it != scope.single_imports.end()) {
        if (auto r = attempt(it->second)) return add_dims(*r, dims);
        return add_dims(it->second + tail, dims);
    }
    if (auto it = scope.declared.find(head); it != scope.declared.end()) {
        if (auto r = attempt(it->second)) return add_dims(*r, dims);
    }
    if (!scope.package.empty()) {
        if (auto r = attempt(scope.package + "." + head)) return add_dims(*r, dims);
    } else if (auto r = attempt(head)) {
        return add_dims(*r, dims);
    }
    for (const auto& w : scope.wildcard_imports) {
        if (auto r = attempt(w + "." + head)) return add_dims(*r, dims);
    }
    if (auto r = attempt("java.lang." + head)) return add_dims(*r, dims);
    return add_dims(name, dims);
}

void collect_declared(const java::TypeDecl& decl, const std::string& fqn, const std::string& key_prefix,
                      std::unordered_map<std::string, std::string>& out) {
    out[decl.name] = fqn;
    if (!key_prefix.empty()) out[key_prefix + "." + decl.name] = fqn;
    std::string prefix = key_prefix.empty() ? decl.name : key_prefix + "." + decl.name;
    for (const auto& n : decl.nested) collect_declared(*n, fqn + "." + n->name, prefix, out);
}

FileScope make_scope(const java::CompilationUnit& cu) {
    FileScope scope;
    scope.package = cu.package;
    for (const auto& imp : cu.imports) {
        if (imp.is_static) continue;
        if (imp.wildcard) scope.wildcard_imports.push_back(imp.name);
        else scope.single_imports[util::last_component(imp.name)] = imp.name;
    }
    for (const auto& t : cu.types) {
        std::string fqn = cu.package.empty() ? t->name : cu.package + "." + t->name;
        collect_declared(*t, fqn, "", scope.declared);
    }
    return scope;
}

std::string erased(const java::TypeRef& t) { return t.erased(); }

void entries_from_decl(const java::TypeDecl& decl, const std::string& fqn, const std::string& outer, bool parent_is_interface,
                       const java::CompilationUnit& cu, const FileScope& scope, const KnownFn& known, ClassSource origin,
                       const std::string& origin_path, std::vector<ClassEntry>& out) {
    ClassEntry e;
    e.fqn = fqn;
    e.simple_name = decl.name;
    e.package = cu.package;
    e.source = origin;
    e.outer = outer;
    e.origin = origin_path;
    e.visibility = visibility_from_modifiers(decl.modifiers, parent_is_interface);
    switch (decl.kind) {
        case java::TypeKind::Interface: e.kind = ClassKind::Interface; break;
        case java::TypeKind::Annotation: e.kind = ClassKind::Annotation; break;
        case java::TypeKind::Enum: e.kind = ClassKind::Enum; break;
        case java::TypeKind::Record: e.kind = ClassKind::Record; break;
        case java::TypeKind::Class: e.kind = decl.has_modifier("abstract") ? ClassKind::AbstractClass : ClassKind::Class; break;
    }
    for (const auto& imp : cu.imports) {
        std::string name = (imp.is_static ? "static " : "") + imp.name + (imp.wildcard ? ".*" : "");
        e.declared_imports.push_back(name);
    }
    auto res = [&](const java::TypeRef& t) { return resolve_in_scope(erased(t), scope, known); };
    for (const auto& s : decl.extends) e.supertypes.push_back(res(s));
    for (const auto& s : decl.implements) e.supertypes.push_back(res(s));
    if (decl.kind == java::TypeKind::Enum && known("java.lang.Enum")) e.supertypes.push_back("java.lang.Enum");
    if (decl.kind == java::TypeKind::Record && known("java.lang.Record")) e.supertypes.push_back("java.lang.Record");

    bool iface = decl.kind == java::TypeKind::Interface || decl.kind == java::TypeKind::Annotation;
    for (const auto& f : decl.fields) {
        Visibility v = visibility_from_modifiers(f.modifiers, iface);
        if (v == Visibility::Private) continue;
        for (const auto& var : f.vars) {
            FieldInfo fi;
            fi.name = var.name;
            java::TypeRef t = f.type;
            t.array_dims += var.extra_dims;
            fi.type = res(t);
            fi.visibility = v;
            fi.is_static = iface || f.has_modifier("static");
            e.fields.push_back(std::move(fi));
        }
    }
    for (const auto& c : decl.enum_constants) e.fields.push_back({c, fqn, Visibility::Public, true});

    for (const auto& m : decl.methods) {
        Visibility v = visibility_from_modifiers(m.modifiers, iface);
        if (v == Visibility::Private) continue;
        MemberSignature sig;
        sig.name = m.is_constructor ? decl.name : m.name;
        for (const auto& p : m.params) {
            sig.param_types.push_back(res(p.type));
            sig.varargs = p.varargs;
        }
        sig.visibility = v;
        sig.is_static = m.has_modifier("static");
        sig.is_abstract = m.has_modifier("abstract");
        if (m.is_constructor) {
            sig.return_type = fqn;
            e.constructors.push_back(std::move(sig));
        } else {
            sig.return_type = res(m.return_type);
            e.methods.push_back(std::move(sig));
        }
    }
    if (decl.kind == java::TypeKind::Record) {
        bool has_canonical = std::any_of(e.constructors.begin(), e.constructors.end(),
                                         [&](const MemberSignature& c) { return c.arity() == decl.record_components.size(); });
        MemberSignature canonical;
        canonical.name = decl.name;
        canonical.return_type = fqn;
        canonical.visibility = e.visibility == Visibility::Private ? Visibility::PackagePrivate : e.visibility;
        for (const auto& p : decl.record_components) {
            canonical.param_types.push_back(res(p.type));
            MemberSignature accessor;
            accessor.name = p.name;
            accessor.return_type = res(p.type);
            e.methods.push_back(std::move(accessor));
        }
        if (!has_canonical) e.constructors.insert(e.constructors.begin(), std::move(canonical));
    }
    bool any_ctor_declared = std::any_of(decl.methods.begin(), decl.methods.end(), [](const java::MethodDecl& m) { return m.is_constructor; });
    if ((decl.kind == java::TypeKind::Class) && !any_ctor_declared) {
        MemberSignature implicit;
        implicit.name = decl.name;
        implicit.return_type = fqn;
        implicit.visibility = e.visibility == Visibility::Private ? Visibility::PackagePrivate : e.visibility;
        e.constructors.push_back(std::move(implicit));
    }
    if (decl.kind == java::TypeKind::Enum) {
        e.constructors.clear();  // enums are never instantiated with `new`
        MemberSignature values;
        values.name = "values";
        values.return_type = fqn + "[]";
        values.is_static = true;
        MemberSignature value_of;
        value_of.name = "valueOf";
        value_of.param_types = {"java.lang.String"};
        value_of.return_type = fqn;
        value_of.is_static = true;
        e.methods.push_back(values);
        e.methods.push_back(value_of);
        if (!known("java.lang.Enum")) {
            MemberSignature name, ordinal;
            name.name = "name";
            name.return_type = "java.lang.String";
            ordinal.name = "ordinal";
            ordinal.return_type = "int";
            e.methods.push_back(name);
            e.methods.push_back(ordinal);
        }
    }
    if (iface) e.constructors.clear();
    out.push_back(std::move(e));
    for (const auto& n : decl.nested)
        entries_from_decl(*n, fqn + "." + n->name, fqn, iface, cu, scope, known, origin, origin_path, out);
}

std::vector<ClassEntry> entries_from_unit(const java::CompilationUnit& cu, ClassSource origin, const std::string& origin_path,
                                          const KnownFn& known) {
    FileScope scope = make_scope(cu);
    std::vector<ClassEntry> out;
    for (const auto& t : cu.types) {
        std::string fqn = cu.package.empty() ? t->name : cu.package + "." + t->name;
        entries_from_decl(*t, fqn, "", false, cu, scope, known, origin, origin_path, out);
    }
    return out;
}

void declared_fqns(const java::CompilationUnit& cu, std::unordered_set<std::string>& out) {
    std::function<void(const java::TypeDecl&, const std::string&)> rec = [&](const java::TypeDecl& d, const std::string& fqn) {
        out.insert(fqn);
        for (const auto& n : d.nested) rec(*n, fqn + "." + n->name);
    };
    for (const auto& t : cu.types) rec(*t, cu.package.empty() ? t->name : cu.package + "." + t->name);
}

std::optional<ClassEntry> entry_from_class_file(const archive::ClassFileInfo& info, const std::string& origin) {
    if (info.is_anonymous_or_local) return std::nullopt;
    auto dollar_parts = util::split(info.binary_name, '$');
    for (std::size_t i = 1; i < dollar_parts.size(); ++i)
        if (dollar_parts[i].empty() || std::isdigit(static_cast<unsigned char>(dollar_parts[i][0]))) return std::nullopt;
    if (util::ends_with(info.binary_name, "module-info") || util::ends_with(info.binary_name, "package-info")) return std::nullopt;
    ClassEntry e;
    e.fqn = info.fqn;
    e.simple_name = util::last_component(info.fqn);
    e.package = util::strip_last_component(dollar_parts.front());
    e.source = ClassSource::DependencyJar;
    e.origin = origin;
    if (dollar_parts.size() > 1) e.outer = util::strip_last_component(info.fqn);
    e.visibility = visibility_from_access(info.access);
    if (info.access & archive::kAccAnnotation) e.kind = ClassKind::Annotation;
    else if (info.access & archive::kAccInterface) e.kind = ClassKind::Interface;
    else if (info.access & archive::kAccEnum) e.kind = ClassKind::Enum;
    else if (info.super_name == "java.lang.Record") e.kind = ClassKind::Record;
    else if (info.access & archive::kAccAbstract) e.kind = ClassKind::AbstractClass;
    else e.kind = ClassKind::Class;
    if (!info.super_name.empty() && info.super_name != "java.lang.Object") e.supertypes.push_back(info.super_name);
    for (const auto& i : info.interfaces) e.supertypes.push_back(i);
    for (const auto& f : info.fields) {
        if (f.access & (archive::kAccPrivate | archive::kAccSynthetic)) continue;
        e.fields.push_back({f.name, f.return_type, visibility_from_access(f.access), (f.access & archive::kAccStatic) != 0});
    }
    for (const auto& m : info.methods) {
        if (m.access & (archive::kAccPrivate | archive::kAccSynthetic | archive::kAccBridge)) continue;
        if (m.name == "<clinit>") continue;
        MemberSignature sig;
        sig.param_types = m.param_types;
        sig.visibility = visibility_from_access(m.access);
        sig.is_static = (m.access & archive::kAccStatic) != 0;
        sig.is_abstract = (m.access & archive::kAccAbstract) != 0;
        sig.varargs = (m.access & 0x0080) != 0;
        if (m.name == "<init>") {
            if (e.kind == ClassKind::Interface || e.kind == ClassKind::Enum) continue;
            sig.name = e.simple_name;
            sig.return_type = e.fqn;
            e.constructors.push_back(std::move(sig));
        } else {
            sig.name = m.name;
            sig.return_type = m.return_type;
            e.methods.push_back(std::move(sig));
        }
    }
    return e;
}

bool skip_directory(const fs::path& p) {
    auto name = p.filename().string();
    return name == "target" || name == "build" || name == "node_modules" || (!name.empty() && name[0] == '.');
}

std::vector<fs::path> sorted_files(const fs::path& root, const std::vector<std::string>& extensions) {
    std::vector<fs::path> out;
    std::error_code ec;
    if (!fs::is_directory(root, ec)) return out;
    fs::recursive_directory_iterator it(root, fs::directory_options::skip_permission_denied, ec), end;
    for (; it != end; it.increment(ec)) {
        if (ec) break;
        if (it->is_directory(ec) && skip_directory(it->path())) {
            it.disable_recursion_pending();
            continue;
        }
        if (!it->is_regular_file(ec)) continue;
        auto ext = it->path().extension().string();
        if (std::find(extensions.begin(), extensions.end(), ext) != extensions.end()) out.push_back(it->path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

ClassSource classify_source(const fs::path& relative) {
    std::string p = relative.generic_string();
    if (p.find("src/test/") != std::string::npos || util::starts_with(p, "test/")) return ClassSource::ProjectTest;
    return ClassSource::ProjectMain;
}

}  // namespace

void index_source(ClassIndex& index, std::string_view source, ClassSource origin, const std::string& origin_path) {
    auto parsed = java::parse_compilation_unit(source);
    std::unordered_set<std::string> local;
    declared_fqns(parsed.unit, local);
    KnownFn known = [&](const std::string& fqn) { return local.count(fqn) || index.find(fqn); };
    for (auto& e : entries_from_unit(parsed.unit, origin, origin_path, known)) index.add(std::move(e));
}

void index_classpath_entry(ClassIndex& index, const std::string& entry) {
    std::vector<std::pair<std::string, std::string>> sources;  // origin, text
    auto add_class = [&](const std::vector<std::uint8_t>& bytes, const std::string& origin) {
        try {
            if (auto e = entry_from_class_file(archive::parse_class_file(bytes), origin)) {
                if (!index.find(e->fqn)) index.add(std::move(*e));
            }
        } catch (const std::exception& ex) {
            index.warnings.push_back(origin + ": " + ex.what());
        }
    };
    if (fs::is_directory(entry)) {
        for (const auto& p : sorted_files(entry, {".class", ".java"})) {
            std::string rel = fs::relative(p, entry).generic_string();
            std::string data = util::read_file(p.string());
            if (p.extension() == ".class") add_class(std::vector<std::uint8_t>(data.begin(), data.end()), entry + "!" + rel);
            else sources.emplace_back(entry + "!" + rel, data);
        }
    } else {
        auto entries = archive::read_zip(entry);
        std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
        for (const auto& z : entries) {
            std::string origin = fs::path(entry).filename().string() + "!" + z.name;
            if (util::ends_with(z.name, ".class")) add_class(z.data, origin);
            else if (util::ends_with(z.name, ".java")) sources.emplace_back(origin, std::string(z.data.begin(), z.data.end()));
        }
    }
    // Companion sources only contribute classes the compiled metadata lacks.
    for (const auto& [origin, text] : sources) {
        try {
            auto parsed = java::parse_compilation_unit(text);
            std::unordered_set<std::string> local;
            declared_fqns(parsed.unit, local);
            KnownFn known = [&](const std::string& fqn) { return local.count(fqn) || index.find(fqn); };
            for (auto& e : entries_from_unit(parsed.unit, ClassSource::DependencyJar, origin, known)) {
                if (e.visibility == Visibility::Private) continue;
                if (!index.find(e.fqn)) index.add(std::move(e));
            }
        } catch (const std::exception& ex) {
            index.warnings.push_back(origin + ": " + ex.what());
        }
    }
}

ClassIndex build_index(const std::string& project_root, const std::vector<std::string>& dependency_classpath,
                       const std::string& jdk_table) {
    ClassIndex index;
    for (auto& e : load_jdk_table(jdk_table)) index.add(std::move(e));
    for (const auto& entry : dependency_classpath) {
        try {
            index_classpath_entry(index, entry);
        } catch (const std::exception& ex) {
            index.warnings.push_back(entry + ": " + ex.what());
        }
    }

    struct Pending {
        java::ParsedUnit parsed;
        ClassSource origin;
        std::string rel;
    };
    std::vector<Pending> units;
    std::unordered_set<std::string> project_types;
    for (const auto& p : sorted_files(project_root, {".java"})) {
        std::string rel = fs::relative(p, project_root).generic_string();
        try {
            Pending u{java::parse_compilation_unit(util::read_file(p.string())), classify_source(fs::relative(p, project_root)), rel};
            declared_fqns(u.parsed.unit, project_types);
            units.push_back(std::move(u));
        } catch (const std::exception& ex) {
            index.warnings.push_back(rel + ": skipped: " + ex.what());
        }
    }
    KnownFn known = [&](const std::string& fqn) { return project_types.count(fqn) || index.find(fqn); };
    std::vector<ClassEntry> project_entries;
    for (const auto& u : units) {
        for (auto& e : entries_from_unit(u.parsed.unit, u.origin, u.rel, known)) project_entries.push_back(std::move(e));
    }
    for (auto& e : project_entries) index.add(std::move(e));
    for (const auto& w : index.warnings) std::cerr << "warning: " << w << "\n";
    return index;
}

// ---- resolution ----------------------------------------------------------------------------

int package_proximity(std::string_view a, std::string_view b) {
    if (a.empty() || b.empty()) return 0;
    auto pa = util::split(a, '.'), pb = util::split(b, '.');
    int n = 0;
    while (static_cast<std::size_t>(n) < pa.size() && static_cast<std::size_t>(n) < pb.size() && pa[n] == pb[n]) ++n;
    return n;
}

namespace {

std::string top_level_of(const ClassEntry& e) {
    std::string rest = e.package.empty() ? e.fqn : e.fqn.substr(e.package.size() + 1);
    std::string top = rest.substr(0, rest.find('.'));
    return e.package.empty() ? top : e.package + "." + top;
}

bool class_visible(const ClassEntry& e, const ResolutionContext& ctx) {
    switch (e.visibility) {
        case Visibility::Public: return true;
        case Visibility::Protected:
        case Visibility::PackagePrivate: return e.package == ctx.cut_package;
        case Visibility::Private:  // only from inside the same top-level class
            return !ctx.cut_fqn.empty() && (ctx.cut_fqn == top_level_of(e) || util::starts_with(ctx.cut_fqn, top_level_of(e) + "."));
    }
    return false;
}

int source_priority(ClassSource s) {
    switch (s) {
        case ClassSource::ProjectMain:
        case ClassSource::ProjectTest: return 2;
        case ClassSource::DependencyJar: return 1;
        case ClassSource::Jdk: return 0;
    }
    return 0;
}

struct RankKey {
    bool imported;
    bool project_local;
    int proximity;
    int priority;
    std::string fqn;
};

RankKey rank_key(const ClassEntry& e, const ResolutionContext& ctx) {
    bool imported = std::find(ctx.cut_imports.begin(), ctx.cut_imports.end(), e.fqn) != ctx.cut_imports.end();
    bool local = e.source == ClassSource::ProjectMain || e.source == ClassSource::ProjectTest;
    return {imported, local, package_proximity(e.package, ctx.cut_package), source_priority(e.source), e.fqn};
}

bool rank_before(const RankKey& a, const RankKey& b) {
    if (a.imported != b.imported) return a.imported;
    if (a.project_local != b.project_local) return a.project_local;
    if (a.proximity != b.proximity) return a.proximity > b.proximity;
    if (a.priority != b.priority) return a.priority > b.priority;
    return a.fqn < b.fqn;
}

}  // namespace

std::vector<std::string> resolve_simple_name(const ClassIndex& index, std::string_view simple_name, const ResolutionContext& ctx) {
    std::vector<RankKey> keys;
    for (const ClassEntry* e : index.by_simple_name(simple_name)) {
        if (class_visible(*e, ctx)) keys.push_back(rank_key(*e, ctx));
    }
    std::sort(keys.begin(), keys.end(), rank_before);
    std::vector<std::string> out;
    for (auto& k : keys) out.push_back(std::move(k.fqn));
    return out;
}

std::vector<std::string> concrete_implementations(const ClassIndex& index, const std::string& abstract_fqn, const ResolutionContext& ctx) {
    if (!index.find(abstract_fqn)) throw std::invalid_argument("concrete_implementations: unknown type " + abstract_fqn);
    std::map<std::string, std::vector<std::string>> subtypes;
    for (const auto& [fqn, e] : index.entries())
        for (const auto& s : e.supertypes) subtypes[s].push_back(fqn);
    std::set<std::string> seen;
    std::vector<std::string> stack{abstract_fqn};
    std::vector<const ClassEntry*> found;
    while (!stack.empty()) {
        std::string cur = stack.back();
        stack.pop_back();
        for (const auto& sub : subtypes[cur]) {
            if (!seen.insert(sub).second) continue;
            stack.push_back(sub);
            const ClassEntry* e = index.find(sub);
            if (e && (e->kind == ClassKind::Class || e->kind == ClassKind::Enum || e->kind == ClassKind::Record) && class_visible(*e, ctx))
                found.push_back(e);
        }
    }
    std::sort(found.begin(), found.end(), [&](const ClassEntry* a, const ClassEntry* b) {
        int pa = package_proximity(a->package, ctx.cut_package), pb = package_proximity(b->package, ctx.cut_package);
        if (pa != pb) return pa > pb;
        return a->fqn < b->fqn;
    });
    std::vector<std::string> out;
    for (const auto* e : found) out.push_back(e->fqn);
    return out;
}

// ---- symbol validation --------------------------------------------------------------------

namespace {

const std::unordered_map<std::string, std::string>& boxes() {
    static const std::unordered_map<std::string, std::string> m = {
        {"int", "java.lang.Integer"}, {"long", "java.lang.Long"},     {"double", "java.lang.Double"},
        {"float", "java.lang.Float"}, {"boolean", "java.lang.Boolean"}, {"char", "java.lang.Character"},
        {"byte", "java.lang.Byte"},   {"short", "java.lang.Short"}};
    return m;
}

int numeric_rank(const std::string& t) {
    static const std::unordered_map<std::string, int> r = {{"byte", 1}, {"short", 2}, {"char", 2}, {"int", 3}, {"long", 4}, {"float", 5}, {"double", 6}};
    auto it = r.find(t);
    return it == r.end() ? 0 : it->second;
}

bool looks_like_type_name(const std::string& name) {
    if (name.empty() || !std::isupper(static_cast<unsigned char>(name[0]))) return false;
    return std::any_of(name.begin(), name.end(), [](char c) { return std::islower(static_cast<unsigned char>(c)); });
}

class SymbolChecker {
public:
    SymbolChecker(const ClassIndex& index, const SymbolCheckOptions& options, const java::ParsedUnit& parsed)
        : index_(index), opts_(options), parsed_(parsed), cu_(parsed.unit) {
        ctx_.cut_package = cu_.package;
        for (const auto& imp : cu_.imports)
            if (!imp.is_static && !imp.wildcard) ctx_.cut_imports.push_back(imp.name);
        for (const auto& t : cu_.types) {
            std::string fqn = cu_.package.empty() ? t->name : cu_.package + "." + t->name;
            collect_declared(*t, fqn, "", local_types_);
        }
    }

    std::vector<SymbolViolation> run() {
        check_imports();
        for (const auto& t : cu_.types) check_type_decl(*t);
        std::sort(out_.begin(), out_.end(), [](const SymbolViolation& a, const SymbolViolation& b) {
            if (a.line != b.line) return a.line < b.line;
            if (a.column != b.column) return a.column < b.column;
            return static_cast<int>(a.kind) < static_cast<int>(b.kind);
        });
        out_.erase(std::unique(out_.begin(), out_.end(),
                               [](const SymbolViolation& a, const SymbolViolation& b) {
                                   return a.line == b.line && a.column == b.column && a.kind == b.kind && a.offending_symbol == b.offending_symbol;
                               }),
                   out_.end());
        return out_;
    }

private:
    // Result of resolving a type name: FQN when known, `trusted` when it belongs
    // to excluded test infrastructure, `local` when declared in the test itself.
    struct TypeInfo {
        std::string fqn;
        bool trusted = false;
        bool local = false;
        bool ok = false;
    };

    const ClassIndex& index_;
    const SymbolCheckOptions& opts_;
    const java::ParsedUnit& parsed_;
    const java::CompilationUnit& cu_;
    ResolutionContext ctx_;
    std::unordered_map<std::string, std::string> local_types_;
    std::vector<SymbolViolation> out_;
    // Variable name -> declared type spelling (per method).
    std::unordered_map<std::string, std::string> vars_;
    std::unordered_map<std::string, std::string> fields_;

    bool trusted(const std::string& fqn) const {
        for (const auto& p : opts_.trusted_prefixes)
            if (util::starts_with(fqn, p)) return true;
        return false;
    }

    bool known_qualified(const std::string& fqn) const { return index_.find(fqn) != nullptr || trusted(fqn); }

    void report(SymbolViolationKind kind, int line, int col, std::string symbol, std::vector<SymbolCandidate> cands, std::string owner = {}) {
        SymbolViolation v;
        v.kind = kind;
        v.line = line;
        v.column = col;
        v.offending_symbol = std::move(symbol);
        v.candidates = std::move(cands);
        v.owner = std::move(owner);
        out_.push_back(std::move(v));
    }

    std::vector<SymbolCandidate> type_candidates(const std::string& simple) const {
        std::vector<SymbolCandidate> out;
        for (const auto& fqn : resolve_simple_name(index_, simple, ctx_)) out.push_back({fqn, std::nullopt, 1.0});
        return out;
    }

    // Similar simple names, each expanded through the resolver ranking.
    std::vector<SymbolCandidate> similar_types(const std::string& simple) const {
        std::vector<std::pair<double, std::string>> scored;
        for (const auto& key : index_.simple_keys()) {
            if (key.find('.') != std::string::npos) continue;
            double s = util::normalized_similarity(simple, key);
            if (s >= opts_.similarity_threshold) scored.emplace_back(s, key);
        }
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        std::vector<SymbolCandidate> out;
        for (const auto& [score, key] : scored)
            for (const auto& fqn : resolve_simple_name(index_, key, ctx_)) out.push_back({fqn, std::nullopt, score});
        return out;
    }

    void check_imports() {
        for (const auto& imp : cu_.imports) {
            if (trusted(imp.name + ".")) continue;
            if (imp.wildcard) {
                if (imp.is_static) {
                    if (!known_qualified(imp.name))
                        report(SymbolViolationKind::MissingOrAmbiguousImport, imp.line, 1, imp.name + ".*", type_candidates(util::last_component(imp.name)));
                } else if (!index_.has_package(imp.name) && !index_.find(imp.name)) {
                    report(SymbolViolationKind::MissingOrAmbiguousImport, imp.line, 1, imp.name + ".*", {});
                }
                continue;
            }
            std::string cls = imp.is_static ? util::strip_last_component(imp.name) : imp.name;
            if (known_qualified(cls)) continue;
            auto cands = type_candidates(util::last_component(cls));
            if (cands.empty()) cands = similar_types(util::last_component(cls));
            report(SymbolViolationKind::MissingOrAmbiguousImport, imp.line, 1, imp.name, std::move(cands));
        }
    }

    // Resolves a written type name; reports a violation when it cannot be
    // resolved and `report_at_line` is non-zero.
    TypeInfo resolve_type(const std::string& written, int line, int col, bool do_report = true) {
        int dims = 0;
        std::string name = strip_dims(written, dims);
        TypeInfo info;
        if (name.empty() || is_primitive(name) || name == "var" || name == "?") {
            info.ok = true;
            info.fqn = name;
            info.local = true;
            return info;
        }
        if (name.size() == 1 && std::isupper(static_cast<unsigned char>(name[0]))) {  // type variable
            info.ok = true;
            info.local = true;
            return info;
        }
        std::string head = name, tail;
        if (auto dot = name.find('.'); dot != std::string::npos) {
            head = name.substr(0, dot);
            tail = name.substr(dot);
        }
        auto finish = [&](const std::string& fqn) {
            info.fqn = fqn;
            info.trusted = trusted(fqn);
            info.ok = true;
            return info;
        };
        // Fully qualified spelling.
        if (!tail.empty() && !std::isupper(static_cast<unsigned char>(head[0]))) {
            if (known_qualified(name)) return finish(name);
            std::string qual = name;
            while (!qual.empty()) {  // a.b.Outer.Inner where a.b.Outer is known
                qual = util::strip_last_component(qual);
                if (index_.find(qual) && index_.find(name)) return finish(name);
            }
            if (do_report) report(SymbolViolationKind::UnresolvedType, line, col, name, similar_types(util::last_component(name)));
            return info;
        }
        if (auto it = local_types_.find(head); it != local_types_.end()) {
            info.ok = true;
            info.local = true;
            info.fqn = it->second + tail;
            return info;
        }
        for (const auto& imp : cu_.imports) {
            if (imp.is_static || imp.wildcard) continue;
            if (util::last_component(imp.name) == head) {
                if (trusted(imp.name)) return finish(imp.name + tail);
                if (index_.find(imp.name + tail)) return finish(imp.name + tail);
                if (index_.find(imp.name)) return finish(imp.name + tail);
                info.ok = true;  // the broken import itself is already reported
                info.local = true;
                return info;
            }
        }
        std::vector<std::string> tries;
        tries.push_back(cu_.package.empty() ? head : cu_.package + "." + head);
        for (const auto& imp : cu_.imports)
            if (imp.wildcard && !imp.is_static) tries.push_back(imp.name + "." + head);
        tries.push_back("java.lang." + head);
        for (const auto& t : tries) {
            if (index_.find(t + tail)) return finish(t + tail);
            if (trusted(t)) return finish(t + tail);
        }
        for (const auto& imp : cu_.imports) {
            if (imp.wildcard && !imp.is_static && trusted(imp.name + ".")) {
                // Unknown name under a trusted wildcard: assume it comes from there.
                info.ok = true;
                info.trusted = true;
                info.fqn = imp.name + "." + head + tail;
                return info;
            }
        }
        if (do_report) {
            auto cands = type_candidates(head);
            if (!cands.empty()) report(SymbolViolationKind::MissingOrAmbiguousImport, line, col, head, std::move(cands));
            else report(SymbolViolationKind::UnresolvedType, line, col, name, similar_types(head));
        }
        return info;
    }

    void check_typeref(const java::TypeRef& t) {
        if (t.empty()) return;
        resolve_type(t.name, t.line, t.column);
        for (const auto& a : t.args) check_typeref(a);
    }

    void check_type_decl(const java::TypeDecl& decl) {
        for (const auto& s : decl.extends) check_typeref(s);
        for (const auto& s : decl.implements) check_typeref(s);
        fields_.clear();
        for (const auto& f : decl.fields) {
            check_typeref(f.type);
            for (const auto& v : f.vars) fields_[v.name] = f.type.erased();
        }
        for (const auto& f : decl.fields)
            for (const auto& v : f.vars)
                if (v.init) check_expr_tree(*v.init);
        for (const auto& m : decl.methods) {
            vars_.clear();
            if (!m.is_constructor) check_typeref(m.return_type);
            for (const auto& p : m.params) {
                check_typeref(p.type);
                vars_[p.name] = p.type.erased();
            }
            for (const auto& t : m.throws) check_typeref(t);
            if (m.body) check_body(*m.body);
        }
        for (const auto& n : decl.nested) check_type_decl(*n);
    }

    void check_body(const java::Stmt& body) {
        // Declarations first so that every use sees its variable's type.
        java::walk_stmt(body, [&](const java::Stmt& s) {
            if (s.kind == java::StmtKind::LocalVar || s.kind == java::StmtKind::ForEach) {
                for (const auto& v : s.vars) {
                    std::string t = s.var_type.erased();
                    if (t == "var" && v.init) t = infer(*v.init);
                    for (int i = 0; i < v.extra_dims; ++i) t += "[]";
                    vars_.emplace(v.name, t);
                }
            }
            for (const auto& c : s.catches)
                vars_.emplace(c.var, c.types.size() == 1 ? c.types[0].erased() : std::string("java.lang.Exception"));
        }, [&](const java::Expr& e) {
            if (e.kind == java::ExprKind::Lambda)
                for (const auto& p : e.lambda_params) vars_.emplace(p, "");
            if (e.kind == java::ExprKind::InstanceOf && !e.text.empty()) vars_.emplace(e.text, e.type.erased());
        });
        java::walk_stmt(body, [&](const java::Stmt& s) {
            if (s.kind == java::StmtKind::LocalVar || s.kind == java::StmtKind::ForEach) {
                if (s.var_type.name != "var") check_typeref(s.var_type);
            }
            for (const auto& c : s.catches)
                for (const auto& t : c.types) check_typeref(t);
        }, [&](const java::Expr& e) { check_expr(e); }, true);
    }

    void check_expr_tree(const java::Expr& root) {
        java::walk_expr(root, [&](const java::Expr& e) { check_expr(e); });
    }

    // Static type of a variable name, or empty when unknown.
    std::optional<std::string> var_type(const std::string& name) const {
        if (auto it = vars_.find(name); it != vars_.end()) return it->second;
        if (auto it = fields_.find(name); it != fields_.end()) return it->second;
        return std::nullopt;
    }

    // Best-effort static type of an expression as a resolved FQN (or primitive),
    // empty when unknown. Never reports.
    std::string infer(const java::Expr& e) {
        using java::ExprKind;
        switch (e.kind) {
            case ExprKind::Literal: {
                const std::string& t = e.text;
                if (t == "null") return "null";
                if (t == "true" || t == "false") return "boolean";
                if (t[0] == '"') return "java.lang.String";
                if (t[0] == '\'') return "char";
                char last = static_cast<char>(std::tolower(static_cast<unsigned char>(t.back())));
                if (last == 'l') return "long";
                if (last == 'f') return "float";
                if (last == 'd' || (t.find('.') != std::string::npos && !util::starts_with(t, "0x")) ||
                    ((t.find('e') != std::string::npos || t.find('E') != std::string::npos) && !util::starts_with(t, "0x")))
                    return "double";
                return "int";
            }
            case ExprKind::Name: {
                if (auto t = var_type(e.text)) {
                    if (t->empty()) return {};
                    auto info = resolve_type(*t, 0, 0, false);
                    return info.ok ? info.fqn : std::string();
                }
                return {};
            }
            case ExprKind::New: {
                auto info = resolve_type(e.type.name, 0, 0, false);
                return info.ok ? info.fqn : std::string();
            }
            case ExprKind::Cast: {
                auto info = resolve_type(e.type.erased(), 0, 0, false);
                return info.ok ? info.fqn : std::string();
            }
            case ExprKind::Call: {
                std::string owner = receiver_type(e, false);
                if (owner.empty() || !index_.find(owner)) return {};
                for (const auto& m : index_.methods_named(owner, e.text))
                    if (m.accepts_arity(e.args.size())) return m.return_type;
                return {};
            }
            default:
                return {};
        }
    }

    // Type that owns the method of call `e`: the receiver's static type or the
    // class of a static call. Empty when unknown.
    std::string receiver_type(const java::Expr& call, bool do_report) {
        if (!call.target) return {};
        const java::Expr& t = *call.target;
        using java::ExprKind;
        if (t.kind == ExprKind::Name) {
            if (auto vt = var_type(t.text)) {
                if (vt->empty()) return {};
                auto info = resolve_type(*vt, 0, 0, false);
                return info.ok && !info.trusted && !info.local ? info.fqn : std::string();
            }
            if (looks_like_type_name(t.text)) {
                auto info = resolve_type(t.text, t.line, t.column, do_report);
                return info.ok && !info.trusted && !info.local ? info.fqn : std::string();
            }
            return {};
        }
        if (t.kind == ExprKind::FieldAccess) {
            std::string dotted = java::dotted_name(t);
            if (dotted.empty()) return {};
            std::string root = dotted.substr(0, dotted.find('.'));
            if (var_type(root)) return {};
            std::string last = util::last_component(dotted);
            if (!looks_like_type_name(last)) return {};  // e.g. System.out
            auto info = resolve_type(dotted, t.line, t.column, do_report);
            return info.ok && !info.trusted && !info.local ? info.fqn : std::string();
        }
        if (t.kind == ExprKind::New || t.kind == ExprKind::Call || t.kind == ExprKind::Cast) {
            std::string ty = infer(t);
            if (ty.empty() || is_primitive(ty) || trusted(ty)) return {};
            return ty;
        }
        return {};
    }

    // Position of the method-name token of a call.
    std::pair<int, int> call_name_position(const java::Expr& call) const {
        std::size_t from = call.target ? call.target->tok_end : call.tok_begin;
        for (std::size_t i = from; i < call.tok_end && i < parsed_.tokens.size(); ++i) {
            const auto& tok = parsed_.tokens[i];
            if (tok.kind == java::TokenKind::Identifier && tok.text == call.text) return {tok.line, tok.column};
        }
        return {call.line, call.column};
    }

    bool accessible(Visibility v, const ClassEntry& owner) const {
        switch (v) {
            case Visibility::Public: return true;
            case Visibility::Protected:
            case Visibility::PackagePrivate: return owner.package == cu_.package;
            case Visibility::Private: return false;
        }
        return false;
    }

    bool assignable(const std::string& arg, const std::string& param) const {
        if (arg.empty() || param.empty()) return true;
        if (arg == param) return true;
        int pd = 0, ad = 0;
        std::string pbase = strip_dims(param, pd), abase = strip_dims(arg, ad);
        if (arg == "null") return !is_primitive(param);
        if (param == "java.lang.Object" && !is_primitive(arg)) return true;
        if (pd != ad) return pbase == "java.lang.Object" && pd < ad;
        if (pd > 0) return assignable(abase, pbase);
        if (is_primitive(param) && is_primitive(arg)) {
            if (param == "boolean" || arg == "boolean") return param == arg;
            if (arg == "int" && (param == "byte" || param == "short" || param == "char")) return true;  // constants
            return numeric_rank(arg) <= numeric_rank(param) && !(param == "char" && arg != "char");
        }
        if (is_primitive(arg)) {
            auto it = boxes().find(arg);
            return it != boxes().end() && (it->second == param || param == "java.lang.Number" || param == "java.lang.Object" ||
                                           !index_.find(param));
        }
        if (is_primitive(param)) {
            auto it = boxes().find(param);
            return it != boxes().end() && it->second == arg;
        }
        // Generic type variables and types the index cannot judge are accepted.
        if (param.find('.') == std::string::npos || !index_.find(param) || !index_.find(arg)) return true;
        return index_.is_subtype(arg, param);
    }

    void check_new(const java::Expr& e) {
        auto info = resolve_type(e.type.name, e.type.line, e.type.column);
        for (const auto& a : e.type.args) check_typeref(a);
        if (!info.ok || info.trusted || info.local) return;
        const ClassEntry* cls = index_.find(info.fqn);
        if (!cls) return;
        bool empty_anon = e.anon_body && e.anon_body->methods.empty() && e.anon_body->fields.empty();
        if (cls->is_abstract_type()) {
            if (e.anon_body && !empty_anon) return;  // a real anonymous implementation
            std::vector<SymbolCandidate> cands;
            for (const auto& fqn : concrete_implementations(index_, cls->fqn, ctx_)) cands.push_back({fqn, std::nullopt, 1.0});
            report(SymbolViolationKind::AbstractInstantiation, e.type.line, e.type.column, cls->simple_name, std::move(cands), cls->fqn);
            return;
        }
        if (cls->kind == ClassKind::Enum) return;
        std::vector<std::string> arg_types;
        for (const auto& a : e.args) arg_types.push_back(infer(*a));
        std::vector<MemberSignature> ctors;
        for (const auto& c : cls->constructors)
            if (accessible(c.visibility, *cls)) ctors.push_back(c);
        for (const auto& c : ctors) {
            if (!c.accepts_arity(arg_types.size())) continue;
            bool ok = true;
            for (std::size_t i = 0; i < arg_types.size() && ok; ++i) {
                std::string p = i < c.param_types.size() ? c.param_types[i] : c.param_types.back();
                if (c.varargs && i + 1 >= c.param_types.size() && !assignable(arg_types[i], p)) {
                    int d = 0;
                    p = strip_dims(p, d);
                    p = add_dims(p, d - 1);
                }
                ok = assignable(arg_types[i], p);
            }
            if (ok) return;
        }
        std::sort(ctors.begin(), ctors.end(), [&](const MemberSignature& a, const MemberSignature& b) {
            auto da = std::abs(static_cast<long>(a.arity()) - static_cast<long>(arg_types.size()));
            auto db = std::abs(static_cast<long>(b.arity()) - static_cast<long>(arg_types.size()));
            if (da != db) return da < db;
            return a.render() < b.render();
        });
        std::vector<SymbolCandidate> cands;
        for (const auto& c : ctors) cands.push_back({c.name, c, 1.0});
        report(SymbolViolationKind::BadConstructor, e.type.line, e.type.column,
               "new " + cls->simple_name + "/" + std::to_string(arg_types.size()), std::move(cands), cls->fqn);
    }

    void check_call(const java::Expr& e) {
        if (!e.target) return;  // local helper or static import
        std::string owner = receiver_type(e, true);
        if (owner.empty()) return;
        const ClassEntry* cls = index_.find(owner);
        if (!cls) return;
        bool complete = true;
        index_.supertype_closure(owner, &complete);
        if (!complete) return;  // an unindexed supertype may declare it
        auto methods = index_.all_methods(owner);
        for (const auto& m : methods) {
            if (m.name == e.text && m.accepts_arity(e.args.size()) && accessible(m.visibility, *cls)) return;
        }
        std::vector<SymbolCandidate> cands;
        std::set<std::string> seen;
        for (const auto& m : methods) {
            if (!m.accepts_arity(e.args.size()) || !accessible(m.visibility, *cls) || m.name == e.text) continue;
            double s = util::normalized_similarity(e.text, m.name);
            if (s < opts_.similarity_threshold || !seen.insert(m.name).second) continue;
            cands.push_back({m.name, m, s});
        }
        std::sort(cands.begin(), cands.end(), [](const SymbolCandidate& a, const SymbolCandidate& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.name < b.name;
        });
        auto [line, col] = call_name_position(e);
        report(SymbolViolationKind::UnknownMethod, line, col, e.text, std::move(cands), owner);
    }

    void check_expr(const java::Expr& e) {
        using java::ExprKind;
        switch (e.kind) {
            case ExprKind::New: check_new(e); break;
            case ExprKind::NewArray:
            case ExprKind::Cast:
            case ExprKind::InstanceOf:
            case ExprKind::ClassLiteral: check_typeref(e.type); break;
            case ExprKind::Call: check_call(e); break;
            case ExprKind::FieldAccess: {
                // Type-qualified static field access such as Color.RED.
                if (e.target && e.target->kind == ExprKind::Name && !var_type(e.target->text) && looks_like_type_name(e.target->text))
                    resolve_type(e.target->text, e.target->line, e.target->column);
                break;
            }
            default: break;
        }
    }
};

}  // namespace

std::vector<SymbolViolation> validate_symbols(const ClassIndex& index, std::string_view test_source, const SymbolCheckOptions& options) {
    java::ParsedUnit parsed;
    try {
        parsed = java::parse_compilation_unit(test_source);
    } catch (const java::ParseError& e) {
        SymbolViolation v;
        v.kind = SymbolViolationKind::UnresolvedType;
        v.line = e.line();
        v.column = e.column();
        v.offending_symbol = std::string("<parse error> ") + e.what();
        return {v};
    }
    SymbolChecker checker(index, options, parsed);
    return checker.run();
}

}  // namespace mockless
