#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace mockless {

namespace java {
struct MethodDecl;
}

struct MethodId {
    std::string class_fqn;
    std::string name;
    int arity = 0;

    std::string key() const;  // Class#name/arity
    bool operator<(const MethodId& o) const { return key() < o.key(); }
    bool operator==(const MethodId& o) const { return key() == o.key(); }
};

enum class EdgeLabel { True, False, Case, Default, Exception, Fallthrough };
std::string to_string(EdgeLabel l);

struct CfgNode {
    int id = 0;
    std::vector<int> lines;  // sorted, unique
    int first_line() const { return lines.empty() ? 0 : lines.front(); }
    int last_line() const { return lines.empty() ? 0 : lines.back(); }
};

struct CfgEdge {
    int from = 0;
    int to = 0;
    EdgeLabel label = EdgeLabel::Fallthrough;
    std::string case_value;  // for Case
};

struct MethodCFG {
    MethodId method_id;
    std::vector<CfgNode> nodes;
    std::vector<CfgEdge> edges;
    int entry = 0;
    int exit = -1;  // -1 when no path leaves the method

    /// Distinct successors in edge order.
    std::vector<int> successors(int node) const;
    bool has_edge(int from, int to) const;
    /// Edges to a node that is still on the DFS stack from the entry.
    std::set<std::pair<int, int>> back_edges() const;
    nlohmann::json to_json() const;
};

struct PathSpec {
    MethodId method_id;
    std::vector<int> node_sequence;
    std::set<int> line_set;
    double covered_fraction = 0.0;
    nlohmann::json to_json() const;
};

/// CFG of a single method or constructor declaration. Throws
/// java::ParseError when the text is not a method.
MethodCFG build_cfg(std::string_view method_source, const std::string& class_fqn = "", int first_line = 1);
MethodCFG build_cfg(const java::MethodDecl& method, const std::string& class_fqn);

/// CFGs of every method and constructor with a body in a compilation unit,
/// nested classes included.
std::vector<MethodCFG> build_cfgs(std::string_view class_source);

/// Entry-to-exit paths, depth first. Each loop header may be re-entered
/// through back edges at most `loop_bound` times per path. When there are more
/// than `max_paths`, the ones with the largest line sets are kept (ties by
/// node sequence). Enumeration itself stops after kEnumerationCap paths.
inline constexpr std::size_t kEnumerationCap = 100000;
std::vector<PathSpec> enumerate_paths(const MethodCFG& cfg, int loop_bound = 1, std::size_t max_paths = 64);

/// Line -> covered flag for the CUT's executable lines.
using LineCoverage = std::map<int, bool>;

inline constexpr std::size_t kTargetPaths = 4;

struct SelectionLog {
    std::vector<std::string> exploitation_methods;
    std::vector<std::string> exploration_methods;
    std::size_t dropped = 0;  // candidates cut by the K limit
};

/// Two paths with most uncovered lines from each of the two most-uncovered
/// methods, then one path from each of two seeded-random other methods,
/// truncated to kTargetPaths keeping exploitation first. Empty when nothing
/// is left uncovered.
std::vector<PathSpec> select_targets(const std::map<std::string, std::vector<PathSpec>>& paths_by_method,
                                     const LineCoverage& coverage, std::uint64_t rng_seed, SelectionLog* log = nullptr);

/// Lines in `line_set` that `coverage` marks as not covered.
std::size_t uncovered_count(const std::set<int>& line_set, const LineCoverage& coverage);

/// "1. Foo#bar/1: lines 3-5, 9 (40% covered)" per path.
std::string render_paths(const std::vector<PathSpec>& paths);

}  // namespace mockless
