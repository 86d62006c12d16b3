#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mockless/class_index.hpp"

namespace mockless {

enum class DiscoveredVia { ConstructorParam, MethodParam, FieldType, ReturnType };
std::string to_string(DiscoveredVia v);

struct DependencyRef {
    std::string fqn;
    DiscoveredVia discovered_via = DiscoveredVia::ConstructorParam;
};

/// Dependency classes named in the CUT's constructors, public methods, fields
/// and return types, in that discovery order. Value types (primitives, boxed,
/// String, Object), the CUT itself and types missing from `index` are left out.
std::vector<DependencyRef> collect_dependencies(const ClassEntry& cut, const ClassIndex& index);

enum class SliceOrigin { PassingTest, Production, TestSource };
std::string to_string(SliceOrigin o);
int origin_tier(SliceOrigin o);  // 0 is best

enum class SiteKind { Declaration, Construction, Receiver };

struct CallSite {
    std::string file;
    int line = 0;
    int column = 0;
    SiteKind kind = SiteKind::Declaration;
    /// Local holding the dependency; empty for a bare `new D(...)` expression.
    std::string variable;
    std::string dependency_fqn;
};

struct UsageSlice {
    std::string dependency_fqn;
    std::vector<std::string> statements;
    std::vector<std::string> imports;
    SliceOrigin origin = SliceOrigin::Production;
    std::string file;
    int line = 0;
    std::uint64_t structural_hash = 0;

    /// `// imports: a.B, c.D` header followed by one statement per line.
    std::string render() const;
    nlohmann::json to_json() const;
    static UsageSlice from_json(const nlohmann::json& j);
};

/// Replacement expression for a parameter or field of the given written type,
/// if one is documented. Fully qualified so it needs no import:
///   primitives and boxed types -> 0 / 0L / 0.0 / 0.0f / false / 'a'
///   String, CharSequence       -> ""
///   OutputStream               -> new java.io.ByteArrayOutputStream()
///   Writer                     -> new java.io.StringWriter()
///   InputStream                -> new java.io.ByteArrayInputStream(new byte[0])
///   Reader                     -> new java.io.StringReader("")
///   List, Collection, Iterable -> new java.util.ArrayList<>()
///   Set / Map                  -> new java.util.HashSet<>() / new java.util.HashMap<>()
///   arrays of the above        -> new T[0]
/// (ByteArray*, StringWriter, ArrayList, ... map to the same expressions.)
std::optional<std::string> documented_default(std::string_view written_type);

/// True when `written` (as spelled in a file with `package` and `imports`)
/// can denote `fqn`.
bool type_matches(std::string_view written, const std::string& fqn, const std::string& package,
                  const std::vector<std::string>& imports);

/// Sites in one source where `dependency_fqn` is declared, constructed or used
/// as a receiver. Unparseable sources yield nothing.
std::vector<CallSite> find_call_sites_in_source(std::string_view source, const std::string& file,
                                                const std::string& dependency_fqn);

/// All sites under the given directories (recursively, `.java` files), sorted
/// by (file, line, column).
std::vector<CallSite> find_call_sites(const std::vector<std::string>& roots, const DependencyRef& dep);

/// Maximum statements in one slice; longer chains are rejected.
inline constexpr std::size_t kMaxSliceStatements = 12;

/// Intraprocedural backward def-use closure from the site's variable.
/// `source` is the enclosing file (a bare method or statement list also
/// works, without imports). Returns nothing when the chain needs a parameter
/// or field without a documented default, an unknown name, or more than
/// kMaxSliceStatements statements.
std::optional<UsageSlice> backward_slice(const CallSite& site, std::string_view source,
                                         SliceOrigin origin = SliceOrigin::Production);

/// FNV-1a over the slice's tokens with locals renamed v1..vn in definition
/// order. Literals, method and type names are kept verbatim.
std::uint64_t structural_hash(const std::vector<std::string>& statements);
inline std::uint64_t structural_hash(const UsageSlice& s) { return structural_hash(s.statements); }

/// Collapses equal hashes and orders by origin tier, statement count, then
/// rendered text. Returns at most k slices.
std::vector<UsageSlice> dedup_and_rank(std::vector<UsageSlice> slices, std::size_t k);

/// Origin of a source file: under `test_root` -> PassingTest, any other
/// `src/test/` path -> TestSource, else Production.
SliceOrigin classify_origin(const std::string& file, const std::string& test_root);

/// Slices for every site of every dependency under `roots`, keyed by FQN.
std::map<std::string, std::vector<UsageSlice>> mine_usages(const std::vector<std::string>& roots,
                                                           const std::vector<DependencyRef>& deps,
                                                           const std::string& test_root);

/// Slices mined from one source (e.g. a generated test that now passes).
std::vector<UsageSlice> slices_from_source(std::string_view source, const std::string& file,
                                           const std::string& dependency_fqn, SliceOrigin origin);

/// Fenced Java blocks for the generator prompt, one per snippet.
std::string render_prompt_snippets(const std::vector<UsageSlice>& snippets);

void save_slices(const std::map<std::string, std::vector<UsageSlice>>& slices, const std::string& path);
std::map<std::string, std::vector<UsageSlice>> load_slices(const std::string& path);

}  // namespace mockless
