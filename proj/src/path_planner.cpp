#include "mockless/path_planner.hpp"

#include <algorithm>
#include <functional>
#include <random>
#include <sstream>
#include <utility>

#include "mockless/java/parser.hpp"
#include "mockless/util.hpp"

namespace mockless {

std::string MethodId::key() const { return class_fqn + "#" + name + "/" + std::to_string(arity); }

std::string to_string(EdgeLabel l) {
    switch (l) {
        case EdgeLabel::True: return "TRUE";
        case EdgeLabel::False: return "FALSE";
        case EdgeLabel::Case: return "CASE";
        case EdgeLabel::Default: return "DEFAULT";
        case EdgeLabel::Exception: return "EXCEPTION";
        case EdgeLabel::Fallthrough: return "FALLTHROUGH";
    }
    return "?";
}

std::vector<int> MethodCFG::successors(int node) const {
    std::vector<int> out;
    for (const auto& e : edges)
        if (e.from == node && std::find(out.begin(), out.end(), e.to) == out.end()) out.push_back(e.to);
    return out;
}

bool MethodCFG::has_edge(int from, int to) const {
    return std::any_of(edges.begin(), edges.end(), [&](const CfgEdge& e) { return e.from == from && e.to == to; });
}

std::set<std::pair<int, int>> MethodCFG::back_edges() const {
    std::set<std::pair<int, int>> out;
    if (nodes.empty()) return out;
    std::vector<int> color(nodes.size(), 0);  // 0 white, 1 on stack, 2 done
    std::vector<std::vector<int>> succ(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) succ[i] = successors(static_cast<int>(i));
    std::vector<std::pair<int, std::size_t>> stack{{entry, 0}};
    color[static_cast<std::size_t>(entry)] = 1;
    while (!stack.empty()) {
        auto& [u, next] = stack.back();
        if (next < succ[static_cast<std::size_t>(u)].size()) {
            int v = succ[static_cast<std::size_t>(u)][next++];
            if (color[static_cast<std::size_t>(v)] == 1) out.insert({u, v});
            else if (color[static_cast<std::size_t>(v)] == 0) {
                color[static_cast<std::size_t>(v)] = 1;
                stack.push_back({v, 0});
            }
        } else {
            color[static_cast<std::size_t>(u)] = 2;
            stack.pop_back();
        }
    }
    return out;
}

nlohmann::json MethodCFG::to_json() const {
    nlohmann::json j;
    j["method"] = method_id.key();
    j["entry"] = entry;
    j["exit"] = exit;
    for (const auto& n : nodes) j["nodes"].push_back({{"id", n.id}, {"lines", n.lines}});
    for (const auto& e : edges) {
        nlohmann::json je{{"from", e.from}, {"to", e.to}, {"label", to_string(e.label)}};
        if (e.label == EdgeLabel::Case) je["value"] = e.case_value;
        j["edges"].push_back(je);
    }
    return j;
}

nlohmann::json PathSpec::to_json() const {
    return {{"method", method_id.key()}, {"nodes", node_sequence}, {"lines", line_set}, {"covered_fraction", covered_fraction}};
}

// ---- construction -----------------------------------------------------------------------------

namespace {

using java::Stmt;
using java::StmtKind;

struct Pending {
    int from;
    EdgeLabel label;
    std::string value;
};

// Control reaching the current point: an open block to append to, and/or
// edges waiting for the next block.
struct Flow {
    int open = -1;
    std::vector<Pending> pending;
    bool live() const { return open != -1 || !pending.empty(); }
};

struct JumpTarget {
    std::string label;
    bool is_loop = false;
    std::vector<Pending> breaks;
    std::vector<Pending> continues;
};

class Builder {
public:
    explicit Builder(MethodId id) {
        cfg_.method_id = std::move(id);
        cfg_.entry = new_node();
        exit_ = new_node();
    }

    MethodCFG build(const Stmt* body) {
        Flow f{cfg_.entry, {}};
        if (body) f = stmt(*body, f);
        connect(close(f), exit_);
        prune();
        return std::move(cfg_);
    }

private:
    MethodCFG cfg_;
    int exit_ = 1;
    std::vector<JumpTarget> targets_;
    std::string loop_label_;

    int new_node() {
        int id = static_cast<int>(cfg_.nodes.size());
        cfg_.nodes.push_back({id, {}});
        return id;
    }

    void edge(int from, int to, EdgeLabel label, const std::string& value = {}) {
        for (const auto& e : cfg_.edges)
            if (e.from == from && e.to == to && e.label == label && e.case_value == value) return;
        cfg_.edges.push_back({from, to, label, value});
    }

    void connect(const std::vector<Pending>& ps, int to) {
        for (const auto& p : ps) edge(p.from, to, p.label, p.value);
    }

    void add_lines(int node, int first, int last) {
        if (first <= 0) return;
        auto& lines = cfg_.nodes[static_cast<std::size_t>(node)].lines;
        for (int l = first; l <= std::max(first, last); ++l) lines.push_back(l);
    }

    int ensure_block(Flow& f) {
        if (f.open != -1) return f.open;
        int b = new_node();
        connect(f.pending, b);
        f.pending.clear();
        f.open = b;
        return b;
    }

    static std::vector<Pending> close(const Flow& f) {
        auto out = f.pending;
        if (f.open != -1) out.push_back({f.open, EdgeLabel::Fallthrough, {}});
        return out;
    }

    // A fresh block all current control flows into (loop headers, try entries).
    int join_block(const Flow& f) {
        if (f.open != -1 && f.pending.empty() && f.open != cfg_.entry &&
            cfg_.nodes[static_cast<std::size_t>(f.open)].lines.empty())
            return f.open;
        int b = new_node();
        connect(close(f), b);
        return b;
    }

    static std::vector<Pending> concat(std::vector<Pending> a, const std::vector<Pending>& b) {
        a.insert(a.end(), b.begin(), b.end());
        return a;
    }

    static bool is_true_literal(const java::Expr* e) { return e && e->kind == java::ExprKind::Literal && e->text == "true"; }

    JumpTarget* find_target(const std::string& label, bool need_loop) {
        for (auto it = targets_.rbegin(); it != targets_.rend(); ++it) {
            if (!label.empty()) {
                if (it->label == label) return &*it;
            } else if (!need_loop || it->is_loop) {
                return &*it;
            }
        }
        return nullptr;
    }

    Flow simple(const Stmt& s, Flow f) {
        int b = ensure_block(f);
        add_lines(b, s.line, s.end_line);
        return f;
    }

    Flow loop(const Stmt& s, Flow f) {
        std::string label = std::exchange(loop_label_, {});
        if (s.kind == StmtKind::For)
            for (const auto& init : s.children) f = stmt(*init, f);

        if (s.kind == StmtKind::DoWhile) {
            int top = join_block(f);
            targets_.push_back({label, true, {}, {}});
            Flow body = stmt(*s.body, Flow{top, {}});
            JumpTarget t = std::move(targets_.back());
            targets_.pop_back();
            int cond = new_node();
            add_lines(cond, s.end_line ? s.end_line : s.line, s.end_line ? s.end_line : s.line);
            connect(concat(close(body), t.continues), cond);
            edge(cond, top, EdgeLabel::True);
            std::vector<Pending> out = t.breaks;
            if (!is_true_literal(s.expr.get())) out.insert(out.begin(), {cond, EdgeLabel::False, {}});
            return Flow{-1, out};
        }

        int header = join_block(f);
        add_lines(header, s.line, s.line);
        targets_.push_back({label, true, {}, {}});
        Flow body = stmt(*s.body, Flow{-1, {{header, EdgeLabel::True, {}}}});
        JumpTarget t = std::move(targets_.back());
        targets_.pop_back();
        auto latch = concat(close(body), t.continues);
        if (s.kind == StmtKind::For && !s.updates.empty()) {
            int upd = new_node();
            for (const auto& u : s.updates) add_lines(upd, u->line, u->line);
            connect(latch, upd);
            edge(upd, header, EdgeLabel::Fallthrough);
        } else {
            connect(latch, header);
        }
        bool infinite = (s.kind == StmtKind::For && !s.expr) || (s.kind == StmtKind::While && is_true_literal(s.expr.get()));
        std::vector<Pending> out = t.breaks;
        if (!infinite) out.insert(out.begin(), {header, EdgeLabel::False, {}});
        return Flow{-1, out};
    }

    Flow switch_stmt(const Stmt& s, Flow f) {
        int sel = ensure_block(f);
        add_lines(sel, s.line, s.line);
        targets_.push_back({std::exchange(loop_label_, {}), false, {}, {}});
        std::vector<Pending> after;
        Flow prev;
        bool has_default = false;
        for (const auto& c : s.cases) {
            Flow cf{-1, close(prev)};
            if (c.is_default) {
                has_default = true;
                cf.pending.push_back({sel, EdgeLabel::Default, {}});
            }
            for (const auto& l : c.labels) {
                std::string v = l->kind == java::ExprKind::Name || l->kind == java::ExprKind::Literal ? l->text : java::dotted_name(*l);
                cf.pending.push_back({sel, EdgeLabel::Case, v.empty() ? "?" : v});
            }
            if (!c.body.empty()) {
                int b = ensure_block(cf);
                add_lines(b, c.line, c.line);
            }
            for (const auto& st : c.body) {
                if (!cf.live()) break;
                cf = stmt(*st, cf);
            }
            if (c.arrow) {
                after = concat(after, close(cf));
                prev = Flow{};
            } else {
                prev = cf;
            }
        }
        JumpTarget t = std::move(targets_.back());
        targets_.pop_back();
        after = concat(after, close(prev));
        after = concat(after, t.breaks);
        if (!has_default) after.push_back({sel, EdgeLabel::Default, {}});
        return Flow{-1, after};
    }

    Flow try_stmt(const Stmt& s, Flow f) {
        int t = join_block(f);
        add_lines(t, s.line, s.line);
        Flow tf{t, {}};
        for (const auto& r : s.children) tf = stmt(*r, tf);
        if (s.body) tf = stmt(*s.body, tf);
        auto ends = close(tf);
        for (const auto& c : s.catches) {
            int cb = new_node();
            edge(t, cb, EdgeLabel::Exception, util::join([&] {
                     std::vector<std::string> names;
                     for (const auto& ty : c.types) names.push_back(ty.name);
                     return names;
                 }(), "|"));
            add_lines(cb, c.line, c.line);
            Flow cf{cb, {}};
            if (c.body) cf = stmt(*c.body, cf);
            ends = concat(ends, close(cf));
        }
        Flow out{-1, ends};
        if (s.finally_block) out = stmt(*s.finally_block, out);
        return out;
    }

    Flow stmt(const Stmt& s, Flow f) {
        if (!f.live()) return f;  // unreachable code is dropped
        switch (s.kind) {
            case StmtKind::Block:
                for (const auto& c : s.children) {
                    if (!f.live()) break;
                    f = stmt(*c, f);
                }
                return f;
            case StmtKind::Empty:
                return f;
            case StmtKind::Return: {
                int b = ensure_block(f);
                add_lines(b, s.line, s.end_line);
                edge(b, exit_, EdgeLabel::Fallthrough);
                return Flow{};
            }
            case StmtKind::Throw: {
                int b = ensure_block(f);
                add_lines(b, s.line, s.end_line);
                edge(b, exit_, EdgeLabel::Exception);
                return Flow{};
            }
            case StmtKind::If: {
                int b = ensure_block(f);
                add_lines(b, s.line, s.line);
                Flow tf = s.then_branch ? stmt(*s.then_branch, Flow{-1, {{b, EdgeLabel::True, {}}}}) : Flow{-1, {{b, EdgeLabel::True, {}}}};
                Flow ef{-1, {{b, EdgeLabel::False, {}}}};
                if (s.else_branch) ef = stmt(*s.else_branch, ef);
                return Flow{-1, concat(close(tf), close(ef))};
            }
            case StmtKind::While:
            case StmtKind::DoWhile:
            case StmtKind::For:
            case StmtKind::ForEach:
                return loop(s, f);
            case StmtKind::Switch:
                return switch_stmt(s, f);
            case StmtKind::Try:
                return try_stmt(s, f);
            case StmtKind::Break:
            case StmtKind::Continue: {
                int b = ensure_block(f);
                add_lines(b, s.line, s.line);
                bool is_break = s.kind == StmtKind::Break;
                if (JumpTarget* t = find_target(s.label, !is_break))
                    (is_break ? t->breaks : t->continues).push_back({b, EdgeLabel::Fallthrough, {}});
                return Flow{};
            }
            case StmtKind::Labeled: {
                if (s.body && (s.body->kind == StmtKind::While || s.body->kind == StmtKind::DoWhile ||
                               s.body->kind == StmtKind::For || s.body->kind == StmtKind::ForEach || s.body->kind == StmtKind::Switch)) {
                    loop_label_ = s.label;
                    return stmt(*s.body, f);
                }
                targets_.push_back({s.label, false, {}, {}});
                Flow out = s.body ? stmt(*s.body, f) : f;
                JumpTarget t = std::move(targets_.back());
                targets_.pop_back();
                return Flow{-1, concat(close(out), t.breaks)};
            }
            case StmtKind::Synchronized: {
                int b = ensure_block(f);
                add_lines(b, s.line, s.line);
                return s.body ? stmt(*s.body, f) : f;
            }
            default:
                return simple(s, f);
        }
    }

    // Keeps nodes reachable from the entry, renumbered in creation order.
    void prune() {
        std::vector<int> seen(cfg_.nodes.size(), 0);
        std::vector<int> stack{cfg_.entry};
        seen[static_cast<std::size_t>(cfg_.entry)] = 1;
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (const auto& e : cfg_.edges)
                if (e.from == u && !seen[static_cast<std::size_t>(e.to)]) {
                    seen[static_cast<std::size_t>(e.to)] = 1;
                    stack.push_back(e.to);
                }
        }
        std::vector<int> remap(cfg_.nodes.size(), -1);
        std::vector<CfgNode> nodes;
        for (std::size_t i = 0; i < cfg_.nodes.size(); ++i) {
            if (!seen[i]) continue;
            remap[i] = static_cast<int>(nodes.size());
            CfgNode n = cfg_.nodes[i];
            n.id = remap[i];
            std::sort(n.lines.begin(), n.lines.end());
            n.lines.erase(std::unique(n.lines.begin(), n.lines.end()), n.lines.end());
            nodes.push_back(std::move(n));
        }
        std::vector<CfgEdge> edges;
        for (auto e : cfg_.edges) {
            if (remap[static_cast<std::size_t>(e.from)] < 0) continue;
            e.from = remap[static_cast<std::size_t>(e.from)];
            e.to = remap[static_cast<std::size_t>(e.to)];
            edges.push_back(e);
        }
        cfg_.nodes = std::move(nodes);
        cfg_.edges = std::move(edges);
        cfg_.entry = remap[static_cast<std::size_t>(cfg_.entry)];
        cfg_.exit = remap[static_cast<std::size_t>(exit_)];
    }
};

MethodId id_of(const java::MethodDecl& m, const std::string& class_fqn) {
    return {class_fqn, m.is_constructor ? "<init>" : m.name, static_cast<int>(m.params.size())};
}

void collect_cfgs(const java::TypeDecl& decl, const std::string& fqn, std::vector<MethodCFG>& out) {
    for (const auto& m : decl.methods)
        if (m.body) out.push_back(build_cfg(m, fqn));
    for (const auto& n : decl.nested) collect_cfgs(*n, fqn + "." + n->name, out);
}

}  // namespace

MethodCFG build_cfg(const java::MethodDecl& method, const std::string& class_fqn) {
    Builder b(id_of(method, class_fqn));
    return b.build(method.body.get());
}

MethodCFG build_cfg(std::string_view method_source, const std::string& class_fqn, int first_line) {
    auto parsed = java::parse_method(method_source, first_line);
    return build_cfg(parsed.method, class_fqn);
}

std::vector<MethodCFG> build_cfgs(std::string_view class_source) {
    auto parsed = java::parse_compilation_unit(class_source);
    std::vector<MethodCFG> out;
    for (const auto& t : parsed.unit.types) {
        std::string fqn = parsed.unit.package.empty() ? t->name : parsed.unit.package + "." + t->name;
        collect_cfgs(*t, fqn, out);
    }
    return out;
}

// ---- paths ------------------------------------------------------------------------------------

std::vector<PathSpec> enumerate_paths(const MethodCFG& cfg, int loop_bound, std::size_t max_paths) {
    if (loop_bound < 0) throw std::invalid_argument("loop_bound must be >= 0");
    std::vector<std::vector<int>> found;
    if (cfg.exit < 0 || cfg.nodes.empty()) return {};
    auto back = cfg.back_edges();
    std::vector<std::vector<int>> succ(cfg.nodes.size());
    for (std::size_t i = 0; i < cfg.nodes.size(); ++i) succ[i] = cfg.successors(static_cast<int>(i));
    std::vector<int> reentries(cfg.nodes.size(), 0);
    std::vector<int> path{cfg.entry};

    std::function<void(int)> dfs = [&](int u) {
        if (found.size() >= kEnumerationCap) return;
        if (u == cfg.exit) {
            found.push_back(path);
            return;
        }
        for (int v : succ[static_cast<std::size_t>(u)]) {
            bool is_back = back.count({u, v}) != 0;
            if (is_back && reentries[static_cast<std::size_t>(v)] >= loop_bound) continue;
            if (is_back) ++reentries[static_cast<std::size_t>(v)];
            path.push_back(v);
            dfs(v);
            path.pop_back();
            if (is_back) --reentries[static_cast<std::size_t>(v)];
        }
    };
    dfs(cfg.entry);

    std::vector<PathSpec> out;
    out.reserve(found.size());
    for (auto& seq : found) {
        PathSpec p;
        p.method_id = cfg.method_id;
        for (int n : seq)
            for (int l : cfg.nodes[static_cast<std::size_t>(n)].lines) p.line_set.insert(l);
        p.node_sequence = std::move(seq);
        out.push_back(std::move(p));
    }
    std::stable_sort(out.begin(), out.end(), [](const PathSpec& a, const PathSpec& b) {
        if (a.line_set.size() != b.line_set.size()) return a.line_set.size() > b.line_set.size();
        return a.node_sequence < b.node_sequence;
    });
    if (out.size() > max_paths) out.resize(max_paths);
    return out;
}

std::size_t uncovered_count(const std::set<int>& line_set, const LineCoverage& coverage) {
    std::size_t n = 0;
    for (int l : line_set)
        if (auto it = coverage.find(l); it != coverage.end() && !it->second) ++n;
    return n;
}

namespace {

double covered_fraction(const std::set<int>& line_set, const LineCoverage& coverage) {
    if (line_set.empty()) return 0.0;
    std::size_t covered = 0;
    for (int l : line_set)
        if (auto it = coverage.find(l); it != coverage.end() && it->second) ++covered;
    return static_cast<double>(covered) / static_cast<double>(line_set.size());
}

// Paths of one method with at least one uncovered line, best first.
std::vector<PathSpec> ranked_paths(const std::vector<PathSpec>& paths, const LineCoverage& coverage) {
    std::vector<std::pair<std::size_t, const PathSpec*>> scored;
    for (const auto& p : paths)
        if (auto u = uncovered_count(p.line_set, coverage); u > 0) scored.push_back({u, &p});
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        if (a.second->line_set.size() != b.second->line_set.size()) return a.second->line_set.size() > b.second->line_set.size();
        return a.second->node_sequence < b.second->node_sequence;
    });
    std::vector<PathSpec> out;
    for (const auto& [u, p] : scored) {
        PathSpec c = *p;
        c.covered_fraction = covered_fraction(c.line_set, coverage);
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace

std::vector<PathSpec> select_targets(const std::map<std::string, std::vector<PathSpec>>& paths_by_method,
                                     const LineCoverage& coverage, std::uint64_t rng_seed, SelectionLog* log) {
    struct Candidate {
        std::string method;
        std::size_t uncovered;
        std::vector<PathSpec> paths;
    };
    std::vector<Candidate> cands;
    for (const auto& [method, paths] : paths_by_method) {
        std::set<int> lines;
        for (const auto& p : paths) lines.insert(p.line_set.begin(), p.line_set.end());
        auto u = uncovered_count(lines, coverage);
        if (u == 0) continue;
        auto ranked = ranked_paths(paths, coverage);
        if (!ranked.empty()) cands.push_back({method, u, std::move(ranked)});
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        if (a.uncovered != b.uncovered) return a.uncovered > b.uncovered;
        return a.method < b.method;
    });

    std::vector<PathSpec> picked;
    SelectionLog local;
    std::size_t top = std::min<std::size_t>(2, cands.size());
    for (std::size_t i = 0; i < top; ++i) {
        local.exploitation_methods.push_back(cands[i].method);
        for (std::size_t j = 0; j < std::min<std::size_t>(2, cands[i].paths.size()); ++j) picked.push_back(cands[i].paths[j]);
    }

    // Seeded Fisher-Yates over the remaining methods (sorted by name so the
    // draw depends only on the seed and the method set).
    std::vector<const Candidate*> rest;
    for (std::size_t i = top; i < cands.size(); ++i) rest.push_back(&cands[i]);
    std::sort(rest.begin(), rest.end(), [](const Candidate* a, const Candidate* b) { return a->method < b->method; });
    std::mt19937_64 rng(rng_seed);
    for (std::size_t i = 0; i < rest.size() && i < 2; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng() % (rest.size() - i));
        std::swap(rest[i], rest[j]);
        local.exploration_methods.push_back(rest[i]->method);
        picked.push_back(rest[i]->paths.front());
    }

    if (picked.size() > kTargetPaths) {
        local.dropped = picked.size() - kTargetPaths;
        picked.resize(kTargetPaths);
    }
    if (log) *log = std::move(local);
    return picked;
}

namespace {

std::string line_ranges(const std::set<int>& lines) {
    std::vector<std::string> parts;
    auto it = lines.begin();
    while (it != lines.end()) {
        int start = *it, end = *it;
        for (++it; it != lines.end() && *it == end + 1; ++it) end = *it;
        parts.push_back(start == end ? std::to_string(start) : std::to_string(start) + "-" + std::to_string(end));
    }
    return util::join(parts, ", ");
}

}  // namespace

std::string render_paths(const std::vector<PathSpec>& paths) {
    std::ostringstream os;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        const auto& p = paths[i];
        os << (i + 1) << ". " << p.method_id.key() << ": lines " << line_ranges(p.line_set) << " ("
           << static_cast<int>(p.covered_fraction * 100.0 + 0.5) << "% covered)\n";
    }
    return os.str();
}

}  // namespace mockless
