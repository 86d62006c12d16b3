#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace mockless {

enum class ClassSource { ProjectMain, ProjectTest, DependencyJar, Jdk };
enum class ClassKind { Class, Interface, AbstractClass, Enum, Record, Annotation };
enum class Visibility { Public, Protected, PackagePrivate, Private };

std::string to_string(ClassSource s);
std::string to_string(ClassKind k);
std::string to_string(Visibility v);

struct MemberSignature {
    std::string name;
    std::vector<std::string> param_types;
    std::string return_type = "void";
    Visibility visibility = Visibility::Public;
    bool is_static = false;
    bool is_abstract = false;
    bool varargs = false;

    std::size_t arity() const { return param_types.size(); }
    /// True when a call with `n` arguments can bind to this member.
    bool accepts_arity(std::size_t n) const;
    std::string render() const;  // name(T1, T2): R
    bool operator==(const MemberSignature&) const = default;
};

struct FieldInfo {
    std::string name;
    std::string type;
    Visibility visibility = Visibility::Public;
    bool is_static = false;
    bool operator==(const FieldInfo&) const = default;
};

struct ClassEntry {
    std::string fqn;
    std::string simple_name;
    std::string package;
    ClassSource source = ClassSource::ProjectMain;
    ClassKind kind = ClassKind::Class;
    std::vector<MemberSignature> constructors;
    std::vector<MemberSignature> methods;
    std::vector<FieldInfo> fields;
    std::vector<std::string> declared_imports;
    /// Private means a private nested class.
    Visibility visibility = Visibility::Public;
    /// Direct supertypes (superclass first, then interfaces), FQN where resolvable.
    std::vector<std::string> supertypes;
    /// Enclosing class FQN for nested classes.
    std::string outer;
    /// Source path or archive entry the entry was built from (relative to its root).
    std::string origin;

    bool is_abstract_type() const { return kind == ClassKind::Interface || kind == ClassKind::AbstractClass || kind == ClassKind::Annotation; }
    bool operator==(const ClassEntry&) const = default;
};

struct ResolutionContext {
    std::string cut_fqn;
    std::string cut_package;
    std::vector<std::string> cut_imports;

    /// Derives the package from `fqn` assuming lower-case package segments.
    static ResolutionContext for_class(const std::string& fqn, std::vector<std::string> imports = {});
};

/// Project-wide catalog of visible classes and members. Immutable once built;
/// concurrent readers are safe.
class ClassIndex {
public:
    static constexpr int kSchemaVersion = 1;

    void add(ClassEntry entry);  // replaces an entry with the same FQN

    const ClassEntry* find(std::string_view fqn) const;
    /// Entries registered under a simple key ("Inner" or "Outer.Inner").
    std::vector<const ClassEntry*> by_simple_name(std::string_view simple) const;
    const std::map<std::string, ClassEntry>& entries() const { return entries_; }
    std::size_t simple_key_count() const { return by_simple_.size(); }
    bool has_package(std::string_view package) const;
    std::vector<std::string> simple_keys() const;

    /// Reflexive-transitive supertypes reachable through indexed declarations.
    /// `complete` is cleared when some supertype is not indexed.
    std::set<std::string> supertype_closure(const std::string& fqn, bool* complete = nullptr) const;
    bool is_subtype(const std::string& sub, const std::string& super) const;

    /// Methods named `name` declared by `fqn` or any indexed supertype.
    std::vector<MemberSignature> methods_named(const std::string& fqn, std::string_view name) const;
    std::vector<MemberSignature> all_methods(const std::string& fqn) const;
    std::optional<FieldInfo> field_named(const std::string& fqn, std::string_view name) const;

    nlohmann::json to_json() const;
    static ClassIndex from_json(const nlohmann::json& j);
    /// Canonical serialized form; byte-identical for identical contents.
    std::string serialize() const;
    void save(const std::string& path) const;
    static ClassIndex load(const std::string& path);

    /// Non-fatal problems met while building (unreadable files, skipped entries).
    std::vector<std::string> warnings;

private:
    std::map<std::string, ClassEntry> entries_;
    std::map<std::string, std::set<std::string>, std::less<>> by_simple_;
    std::set<std::string, std::less<>> packages_;
};

/// Splits a dependency classpath given one entry per line or joined by the
/// platform path separator (the output of `mvn dependency:build-classpath`).
std::vector<std::string> parse_classpath(std::string_view text);

/// Loads the static JDK table (`fqn<TAB>member;member;...`). Throws ConfigError
/// when the file is missing.
std::vector<ClassEntry> load_jdk_table(const std::string& path);
/// Parses JDK table text.
std::vector<ClassEntry> parse_jdk_table(std::string_view text);

/// Catalogs project main/test sources, dependency archives (class files or
/// companion sources) and the JDK table. Unreadable sources are skipped with
/// a warning; a missing JDK table is a ConfigError.
ClassIndex build_index(const std::string& project_root, const std::vector<std::string>& dependency_classpath,
                       const std::string& jdk_table);

/// Adds the classes declared in one Java source to `index`.
void index_source(ClassIndex& index, std::string_view source, ClassSource origin, const std::string& origin_path);
/// Reads the classes of one archive or class directory into `index`.
void index_classpath_entry(ClassIndex& index, const std::string& entry);

/// Visible candidates for `simple_name`, best first. Ordering is strictly
/// tiered: explicit import, project-local, shared package prefix length,
/// source priority, then FQN.
std::vector<std::string> resolve_simple_name(const ClassIndex& index, std::string_view simple_name,
                                             const ResolutionContext& ctx);

/// Length of the shared dot-separated prefix of two package names.
int package_proximity(std::string_view a, std::string_view b);

/// Non-abstract indexed subtypes of `abstract_fqn`, nearest package first.
/// Throws std::invalid_argument when `abstract_fqn` is not indexed.
std::vector<std::string> concrete_implementations(const ClassIndex& index, const std::string& abstract_fqn,
                                                  const ResolutionContext& ctx);

// ---- symbol validation ----------------------------------------------------------------

enum class SymbolViolationKind { UnresolvedType, UnknownMethod, BadConstructor, AbstractInstantiation, MissingOrAmbiguousImport };
std::string to_string(SymbolViolationKind k);

struct SymbolCandidate {
    std::string name;  // FQN for types, member name for methods/constructors
    std::optional<MemberSignature> member;
    double score = 0.0;
};

struct SymbolViolation {
    SymbolViolationKind kind = SymbolViolationKind::UnresolvedType;
    int line = 0;
    int column = 0;
    std::string offending_symbol;
    /// Owning class of the offending member, when known.
    std::string owner;
    std::vector<SymbolCandidate> candidates;  // best first; empty = remove
    std::string describe() const;
};

struct SymbolCheckOptions {
    /// Package prefixes treated as externally provided test infrastructure and
    /// not validated (JUnit and common assertion libraries).
    std::vector<std::string> trusted_prefixes = {"org.junit.", "junit.framework.", "org.hamcrest.", "org.assertj.", "org.opentest4j."};
    double similarity_threshold = 0.5;
};

/// Checks every type, method call and constructor call in a test compilation
/// unit against the index. A source that does not parse yields one
/// UnresolvedType violation at the failure location.
std::vector<SymbolViolation> validate_symbols(const ClassIndex& index, std::string_view test_source,
                                              const SymbolCheckOptions& options = {});

}  // namespace mockless
