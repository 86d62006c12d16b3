#include "mockless/typestate.hpp"

#include <algorithm>
#include <deque>
#include <filesystem>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "mockless/java/parser.hpp"
#include "mockless/util.hpp"

namespace fs = std::filesystem;

namespace mockless {

std::set<std::string> TypestateModel::candidate_successors(const std::string& m) const {
    std::set<std::string> out;
    for (auto it = edges.lower_bound({m, std::string()}); it != edges.end() && it->first == m; ++it) out.insert(it->second);
    for (auto it = blocked.lower_bound({m, std::string()}); it != blocked.end() && it->first == m; ++it) out.insert(it->second);
    return out;
}

nlohmann::json TypestateModel::to_json() const {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["class"] = class_fqn;
    j["states"] = states;
    auto pairs = [](const std::set<Transition>& s) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& [x, y] : s) a.push_back({x, y});
        return a;
    };
    j["edges"] = pairs(edges);
    j["blocked"] = pairs(blocked);
    nlohmann::json c = nlohmann::json::array();
    for (const auto& [t, n] : counts) c.push_back({t.first, t.second, n});
    j["counts"] = c;
    nlohmann::json req = nlohmann::json::object();
    for (const auto& [m, preds] : required_predecessors) req[m] = preds;
    j["required_predecessors"] = req;
    return j;
}

TypestateModel TypestateModel::from_json(const nlohmann::json& j) {
    if (j.value("schema_version", 0) != kSchemaVersion) throw std::runtime_error("typestate model: unsupported schema_version");
    TypestateModel m;
    m.class_fqn = j.at("class").get<std::string>();
    m.states = j.at("states").get<std::set<std::string>>();
    m.states.insert(kInitState);
    for (const auto& e : j.at("edges")) m.edges.insert({e.at(0).get<std::string>(), e.at(1).get<std::string>()});
    for (const auto& e : j.at("blocked")) m.blocked.insert({e.at(0).get<std::string>(), e.at(1).get<std::string>()});
    for (const auto& c : j.at("counts")) m.counts[{c.at(0).get<std::string>(), c.at(1).get<std::string>()}] = c.at(2).get<std::int64_t>();
    if (j.contains("required_predecessors"))
        for (const auto& [k, v] : j.at("required_predecessors").items()) m.required_predecessors[k] = v.get<std::set<std::string>>();
    return m;
}

// ---- probabilities ---------------------------------------------------------------------

Fraction transition_probability_exact(const TypestateModel& model, const std::string& m, const std::string& next) {
    if (!model.states.count(m)) throw std::invalid_argument("unknown typestate state: " + m);
    auto cands = model.candidate_successors(m);
    if (!cands.count(next) || model.is_blocked(m, next)) return {0, 1};
    std::int64_t open = 0;
    for (const auto& c : cands)
        if (!model.is_blocked(m, c)) ++open;
    return {1, open};
}

double transition_probability(const TypestateModel& model, const std::string& m, const std::string& next) {
    return transition_probability_exact(model, m, next).value();
}

std::string to_string(ProtocolReason r) { return r == ProtocolReason::BlockedEdge ? "BLOCKED_EDGE" : "ZERO_PROBABILITY"; }

std::string ProtocolViolation::describe() const {
    std::ostringstream os;
    os << to_string(reason) << ": " << receiver << "." << to_call << "() at call #" << position << " (line " << line
       << ") follows " << (from_state == kInitState ? "object creation" : from_state + "()");
    if (!required_predecessors.empty()) os << "; call one of [" << util::join(required_predecessors, ", ") << "] first";
    return os.str();
}

std::optional<ProtocolViolation> first_violation(const TypestateModel& model, const std::vector<std::string>& calls) {
    std::string state = kInitState;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < calls.size(); ++i) {
        const std::string& call = calls[i];
        if (!model.states.count(call) || call == kInitState) continue;
        std::optional<ProtocolReason> reason;
        if (model.is_blocked(state, call)) {
            reason = ProtocolReason::BlockedEdge;
        } else if (auto req = model.required_predecessors.find(call); req != model.required_predecessors.end()) {
            bool satisfied = std::any_of(req->second.begin(), req->second.end(), [&](const std::string& p) { return seen.count(p) != 0; });
            if (!satisfied && transition_probability_exact(model, state, call).num == 0) reason = ProtocolReason::ZeroProbability;
        }
        if (reason) {
            ProtocolViolation v;
            v.class_fqn = model.class_fqn;
            v.position = i;
            v.from_state = state;
            v.to_call = call;
            v.reason = *reason;
            if (auto req = model.required_predecessors.find(call); req != model.required_predecessors.end()) {
                v.required_predecessors.assign(req->second.begin(), req->second.end());
            } else {
                for (const auto& [a, b] : model.edges)
                    if (b == call && a != kInitState && !model.is_blocked(a, b)) v.required_predecessors.push_back(a);
            }
            return v;
        }
        seen.insert(call);
        state = call;
    }
    return std::nullopt;
}

// ---- receiver extraction ----------------------------------------------------------------

namespace {

struct FileInfo {
    std::string package;
    std::vector<std::string> imports;
};

struct ReceiverCall {
    std::string receiver;
    std::string method;
    int line;
    std::size_t order;
};

bool is_value_type(const std::string& t) {
    static const std::unordered_set<std::string> v = {"boolean", "byte", "char", "short", "int", "long", "float", "double",
                                                      "String", "java.lang.String", "Integer", "Long", "Double", "Boolean",
                                                      "Object", "var", ""};
    return v.count(t) != 0 || util::ends_with(t, "[]");
}

// Receiver name for a call target: `x` or `this.x`.
std::string receiver_name(const java::Expr& target) {
    if (target.kind == java::ExprKind::Name) return target.text;
    if (target.kind == java::ExprKind::FieldAccess && target.target && target.target->kind == java::ExprKind::This) return target.text;
    return {};
}

// Calls on named receivers in evaluation order (arguments before the call).
std::vector<ReceiverCall> receiver_calls(const java::Stmt& body) {
    std::vector<ReceiverCall> out;
    java::walk_stmt(body, {}, [&](const java::Expr& e) {
        if (e.kind != java::ExprKind::Call || !e.target) return;
        std::string r = receiver_name(*e.target);
        if (!r.empty()) out.push_back({r, e.text, e.line, e.tok_end});
    });
    std::stable_sort(out.begin(), out.end(), [](const ReceiverCall& a, const ReceiverCall& b) { return a.order < b.order; });
    return out;
}

// Declared types visible in one method: fields, params, locals (var uses `new T`).
std::unordered_map<std::string, std::string> declared_types(const java::TypeDecl* owner, const java::MethodDecl* method,
                                                            const java::Stmt& body) {
    std::unordered_map<std::string, std::string> types;
    if (owner)
        for (const auto& f : owner->fields)
            for (const auto& v : f.vars) types[v.name] = f.type.name;
    if (method)
        for (const auto& p : method->params) types[p.name] = p.type.array_dims ? p.type.erased() : p.type.name;
    java::walk_stmt(body, [&](const java::Stmt& s) {
        if (s.kind != java::StmtKind::LocalVar && s.kind != java::StmtKind::ForEach) return;
        for (const auto& v : s.vars) {
            std::string t = s.var_type.array_dims ? s.var_type.erased() : s.var_type.name;
            if (t == "var" && v.init && v.init->kind == java::ExprKind::New) t = v.init->type.name;
            types[v.name] = t;
        }
    });
    return types;
}

struct MethodSequences {
    std::string method;
    std::vector<ReceiverCalls> receivers;
};

std::vector<ReceiverCalls> sequences_for_body(const std::string& method_name, const java::TypeDecl* owner,
                                              const java::MethodDecl* method, const java::Stmt& body) {
    auto types = declared_types(owner, method, body);
    std::vector<ReceiverCalls> out;
    std::unordered_map<std::string, std::size_t> slot;
    for (const auto& c : receiver_calls(body)) {
        auto t = types.find(c.receiver);
        if (t == types.end()) continue;
        auto it = slot.find(c.receiver);
        if (it == slot.end()) {
            it = slot.emplace(c.receiver, out.size()).first;
            out.push_back({method_name, c.receiver, t->second, {}, {}});
        }
        out[it->second].calls.push_back(c.method);
        out[it->second].lines.push_back(c.line);
    }
    return out;
}

void collect_unit_sequences(const java::TypeDecl& decl, std::vector<ReceiverCalls>& out) {
    for (const auto& m : decl.methods) {
        if (!m.body) continue;
        auto seqs = sequences_for_body(m.name, &decl, &m, *m.body);
        out.insert(out.end(), seqs.begin(), seqs.end());
    }
    for (const auto& n : decl.nested) collect_unit_sequences(*n, out);
}

// Parses a compilation unit, falling back to a bare statement list.
std::vector<ReceiverCalls> sequences_of(std::string_view source, FileInfo* info) {
    std::vector<ReceiverCalls> out;
    try {
        auto parsed = java::parse_compilation_unit(source);
        if (info) {
            info->package = parsed.unit.package;
            for (const auto& imp : parsed.unit.imports)
                if (!imp.is_static) info->imports.push_back(imp.wildcard ? imp.name + ".*" : imp.name);
        }
        for (const auto& t : parsed.unit.types) collect_unit_sequences(*t, out);
        return out;
    } catch (const java::ParseError&) {
        auto parsed = java::parse_statements(source);  // throws if this fails too
        java::Stmt block;
        block.kind = java::StmtKind::Block;
        for (auto& s : parsed.statements) block.children.push_back(std::move(s));
        return sequences_for_body("<snippet>", nullptr, nullptr, block);
    }
}

std::string resolve_written(const std::string& written, const FileInfo& info, const std::map<std::string, std::string>& known_simple) {
    if (written.find('.') != std::string::npos) return written;
    for (const auto& imp : info.imports)
        if (util::last_component(imp) == written && !util::ends_with(imp, ".*")) return imp;
    if (auto it = known_simple.find(written); it != known_simple.end()) return it->second;
    return info.package.empty() ? written : info.package + "." + written;
}

// ---- guard analysis ------------------------------------------------------------------------

struct Guard {
    std::string method;
    std::string field;
    std::string op;
    std::string literal;
};

std::string field_ref(const java::Expr& e, const std::set<std::string>& fields) {
    if (e.kind == java::ExprKind::Name && fields.count(e.text)) return e.text;
    if (e.kind == java::ExprKind::FieldAccess && e.target && e.target->kind == java::ExprKind::This && fields.count(e.text)) return e.text;
    return {};
}

bool throws_immediately(const java::Stmt& s) {
    if (s.kind == java::StmtKind::Throw) return true;
    return s.kind == java::StmtKind::Block && !s.children.empty() && s.children.front()->kind == java::StmtKind::Throw;
}

void analyse_guards(const java::TypeDecl& decl, TypestateModel& model) {
    std::set<std::string> fields;
    for (const auto& f : decl.fields)
        for (const auto& v : f.vars) fields.insert(v.name);
    std::vector<Guard> guards;
    for (const auto& m : decl.methods) {
        if (m.is_constructor || !m.body || m.has_modifier("private")) continue;
        java::walk_stmt(*m.body, [&](const java::Stmt& s) {
            if (s.kind != java::StmtKind::If || !s.expr || !s.then_branch || !throws_immediately(*s.then_branch)) return;
            const java::Expr& c = *s.expr;
            if (c.kind != java::ExprKind::Binary || (c.text != "==" && c.text != "!=") || c.args.size() != 2) return;
            for (int side = 0; side < 2; ++side) {
                std::string f = field_ref(*c.args[side], fields);
                const java::Expr& other = *c.args[1 - side];
                if (!f.empty() && other.kind == java::ExprKind::Literal) {
                    guards.push_back({m.name, f, c.text, other.text});
                    break;
                }
            }
        });
    }
    for (const auto& g : guards) {
        std::set<std::string> setters;
        for (const auto& m : decl.methods) {
            // Constructors establish state before any call and are not protocol steps.
            if (m.is_constructor || !m.body || m.name == g.method || !m.has_modifier("public")) continue;
            bool qualifies = false;
            java::walk_stmt(*m.body, {}, [&](const java::Expr& e) {
                if (e.kind != java::ExprKind::Assign || e.text != "=" || e.args.size() != 2) return;
                if (field_ref(*e.args[0], fields) != g.field) return;
                const java::Expr& rhs = *e.args[1];
                bool same_literal = rhs.kind == java::ExprKind::Literal && rhs.text == g.literal;
                if (g.op == "==" ? !same_literal : same_literal) qualifies = true;
            });
            if (qualifies) setters.insert(m.name);
        }
        if (setters.empty()) continue;
        model.blocked.insert({kInitState, g.method});
        model.states.insert(g.method);
        model.states.insert(setters.begin(), setters.end());
        model.required_predecessors[g.method].insert(setters.begin(), setters.end());
    }
}

void add_public_methods(const java::TypeDecl& decl, TypestateModel& model) {
    for (const auto& m : decl.methods)
        if (!m.is_constructor && m.has_modifier("public") && !m.has_modifier("static")) model.states.insert(m.name);
}

void observe(TypestateModel& model, const std::vector<std::string>& calls) {
    std::string prev = kInitState;
    for (const auto& c : calls) {
        model.states.insert(c);
        model.edges.insert({prev, c});
        prev = c;
    }
}

}  // namespace

std::vector<ReceiverCalls> receiver_sequences(std::string_view test_source) { return sequences_of(test_source, nullptr); }

TypestateMap build_from_source(std::string_view cut_source, const std::vector<std::string>& dependency_usages,
                               std::vector<std::string>* warnings) {
    TypestateMap models;
    auto parsed = java::parse_compilation_unit(cut_source);
    std::map<std::string, std::string> known_simple;
    std::function<void(const java::TypeDecl&, const std::string&)> declare = [&](const java::TypeDecl& d, const std::string& fqn) {
        known_simple[d.name] = fqn;
        TypestateModel& m = models[fqn];
        m.class_fqn = fqn;
        add_public_methods(d, m);
        analyse_guards(d, m);
        for (const auto& n : d.nested) declare(*n, fqn + "." + n->name);
    };
    for (const auto& t : parsed.unit.types) declare(*t, parsed.unit.package.empty() ? t->name : parsed.unit.package + "." + t->name);

    auto absorb = [&](std::string_view source, bool is_cut) {
        FileInfo info;
        auto seqs = sequences_of(source, &info);
        if (is_cut) info.package = parsed.unit.package;
        for (const auto& rc : seqs) {
            if (is_value_type(rc.type_name)) continue;
            std::string fqn = resolve_written(rc.type_name, info, known_simple);
            TypestateModel& m = models[fqn];
            m.class_fqn = fqn;
            observe(m, rc.calls);
        }
    };
    absorb(cut_source, true);
    for (std::size_t i = 0; i < dependency_usages.size(); ++i) {
        try {
            absorb(dependency_usages[i], false);
        } catch (const std::exception& e) {
            if (warnings) warnings->push_back("usage #" + std::to_string(i) + " skipped: " + e.what());
        }
    }
    return models;
}

const TypestateModel* find_model(const TypestateMap& models, const std::string& written, const std::string& package,
                                 const std::vector<std::string>& imports) {
    if (written.find('.') != std::string::npos) {
        auto it = models.find(written);
        return it == models.end() ? nullptr : &it->second;
    }
    std::vector<const TypestateModel*> matches;
    for (const auto& [fqn, m] : models)
        if (util::last_component(fqn) == written) matches.push_back(&m);
    if (matches.empty()) return nullptr;
    for (const auto* m : matches) {
        std::string pkg = util::strip_last_component(m->class_fqn);
        for (const auto& imp : imports)
            if (imp == m->class_fqn || imp == pkg + ".*") return m;
    }
    for (const auto* m : matches)
        if (util::strip_last_component(m->class_fqn) == package) return m;
    return matches.size() == 1 ? matches.front() : nullptr;
}

std::vector<ProtocolViolation> check_sequence(const TypestateMap& models, std::string_view test_source) {
    FileInfo info;
    std::vector<ProtocolViolation> out;
    std::vector<ReceiverCalls> seqs;
    try {
        seqs = sequences_of(test_source, &info);
    } catch (const java::ParseError&) {
        return out;
    }
    for (const auto& rc : seqs) {
        const TypestateModel* model = find_model(models, rc.type_name, info.package, info.imports);
        if (!model) continue;
        if (auto v = first_violation(*model, rc.calls)) {
            v->receiver = rc.receiver;
            v->test_method = rc.test_method;
            v->line = rc.lines[v->position];
            out.push_back(std::move(*v));
        }
    }
    return out;
}

// ---- repair and updates -----------------------------------------------------------------

namespace {

// Shortest path of positive-probability edges from `from` to `to`; returns
// the intermediate states (excluding both ends).
std::optional<std::vector<std::string>> bfs_path(const TypestateModel& model, const std::string& from, const std::string& to, int depth_cap) {
    std::map<std::string, std::string> parent;
    std::deque<std::pair<std::string, int>> queue{{from, 0}};
    parent[from] = "";
    while (!queue.empty()) {
        auto [cur, depth] = queue.front();
        queue.pop_front();
        for (const auto& next : model.candidate_successors(cur)) {
            if (model.is_blocked(cur, next)) continue;
            if (next == to) {
                std::vector<std::string> path;
                for (std::string at = cur; at != from; at = parent[at]) path.push_back(at);
                std::reverse(path.begin(), path.end());
                return path;
            }
            if (parent.count(next) || depth + 1 > depth_cap || next == kInitState) continue;
            parent[next] = cur;
            queue.push_back({next, depth + 1});
        }
    }
    return std::nullopt;
}

}  // namespace

RepairResult repair_sequence(const TypestateModel& model, const std::vector<std::string>& sequence,
                             const ProtocolViolation& violation, int depth_cap) {
    RepairResult result{sequence, true};
    std::optional<ProtocolViolation> v = violation;
    // Each round fixes one violation and moves strictly forward; bound the work anyway.
    for (std::size_t round = 0; v && round < sequence.size() * 2 + 4; ++round) {
        if (v->position >= result.sequence.size()) break;
        auto path = bfs_path(model, v->from_state, v->to_call, depth_cap);
        if (!path) return {sequence, false};
        std::vector<std::string> next(result.sequence.begin(), result.sequence.begin() + static_cast<long>(v->position));
        next.insert(next.end(), path->begin(), path->end());
        next.insert(next.end(), result.sequence.begin() + static_cast<long>(v->position), result.sequence.end());
        auto after = first_violation(model, next);
        if (after && after->position <= v->position + path->size() && after->to_call == v->to_call) return {sequence, false};
        result.sequence = std::move(next);
        v = after;
    }
    if (v) return {sequence, false};
    return result;
}

void reinforce(TypestateModel& model, const std::vector<std::string>& passing_sequence) {
    std::string prev = kInitState;
    for (const auto& call : passing_sequence) {
        if (call == kInitState) continue;
        model.states.insert(call);
        model.edges.insert({prev, call});
        ++model.counts[{prev, call}];
        prev = call;
    }
}

void block_transition(TypestateModel& model, const std::string& m, const std::string& next) {
    model.states.insert(m);
    model.states.insert(next);
    model.blocked.insert({m, next});
}

bool is_state_related_failure(std::string_view exception_type, std::string_view throwing_class, std::string_view receiver_class) {
    std::string simple = util::last_component(exception_type);
    if (simple != "IllegalStateException" && simple != "NullPointerException") return false;
    if (throwing_class.empty() || receiver_class.empty()) return false;
    std::string t(throwing_class), r(receiver_class);
    return t == r || util::starts_with(t, r + ".") || util::starts_with(t, r + "$") ||
           util::last_component(t) == util::last_component(r);
}

std::string describe_protocol(const TypestateModel& model) {
    std::ostringstream os;
    os << "Call-order protocol for " << model.class_fqn << ":\n";
    for (const auto& [m, preds] : model.required_predecessors)
        os << "- " << m << "() requires a prior call to one of: " << util::join(std::vector<std::string>(preds.begin(), preds.end()), ", ") << "\n";
    for (const auto& [a, b] : model.blocked)
        if (!model.required_predecessors.count(b) || a != kInitState)
            os << "- never call " << b << "() " << (a == kInitState ? "first" : "right after " + a + "()") << "\n";
    std::vector<std::string> seen;
    for (const auto& [a, b] : model.edges)
        if (!model.is_blocked(a, b)) seen.push_back((a == kInitState ? std::string("<new>") : a) + " -> " + b);
    if (!seen.empty()) os << "- observed orders: " << util::join(seen, "; ") << "\n";
    return os.str();
}

void save_models(const TypestateMap& models, const std::string& dir) {
    fs::create_directories(dir);
    for (const auto& [fqn, m] : models) util::write_file((fs::path(dir) / (fqn + ".json")).string(), m.to_json().dump(1) + "\n");
}

TypestateMap load_models(const std::string& dir) {
    TypestateMap out;
    if (!fs::is_directory(dir)) return out;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& p : files) {
        auto m = TypestateModel::from_json(nlohmann::json::parse(util::read_file(p.string())));
        out[m.class_fqn] = std::move(m);
    }
    return out;
}

}  // namespace mockless
