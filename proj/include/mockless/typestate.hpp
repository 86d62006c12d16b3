#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace mockless {

inline const std::string kInitState = "__INIT__";

using Transition = std::pair<std::string, std::string>;

/// Exact rational used for transition probabilities.
struct Fraction {
    std::int64_t num = 0;
    std::int64_t den = 1;
    double value() const { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }
    bool operator==(const Fraction& o) const { return num * o.den == o.num * den; }
};

/// Per-class Markov chain over method calls with a blocked-transition set.
struct TypestateModel {
    static constexpr int kSchemaVersion = 1;

    std::string class_fqn;
    std::set<std::string> states{kInitState};
    std::set<Transition> edges;
    std::set<Transition> blocked;
    std::map<Transition, std::int64_t> counts;
    /// Guard-derived: methods that must run (any one of them) before the key.
    std::map<std::string, std::set<std::string>> required_predecessors;

    /// Recorded candidate successors of `m` (observed or blocked).
    std::set<std::string> candidate_successors(const std::string& m) const;
    bool is_blocked(const std::string& m, const std::string& next) const { return blocked.count({m, next}) != 0; }

    nlohmann::json to_json() const;
    static TypestateModel from_json(const nlohmann::json& j);
};

using TypestateMap = std::map<std::string, TypestateModel>;

/// Builds models from the class under test and from sources that use it or
/// its dependencies. Unparseable usages are skipped and reported in `warnings`.
TypestateMap build_from_source(std::string_view cut_source, const std::vector<std::string>& dependency_usages,
                               std::vector<std::string>* warnings = nullptr);

/// P(m -> next) = 1[(m,next) not blocked] / |{m'' : (m,m'') not blocked}| over
/// recorded candidate successors; 0 when `next` is not a candidate.
/// Throws std::invalid_argument when `m` is not a state of the model.
Fraction transition_probability_exact(const TypestateModel& model, const std::string& m, const std::string& next);
double transition_probability(const TypestateModel& model, const std::string& m, const std::string& next);

enum class ProtocolReason { ZeroProbability, BlockedEdge };
std::string to_string(ProtocolReason r);

struct ProtocolViolation {
    std::string receiver;
    std::string class_fqn;
    std::string test_method;
    std::size_t position = 0;  // index in the receiver's call sequence
    std::string from_state;
    std::string to_call;
    ProtocolReason reason = ProtocolReason::ZeroProbability;
    std::vector<std::string> required_predecessors;
    int line = 0;
    std::string describe() const;
};

/// First violation in one call sequence (calls that are not states of the
/// model are skipped), or nothing.
std::optional<ProtocolViolation> first_violation(const TypestateModel& model, const std::vector<std::string>& calls);

/// Receiver call sequences of one test method, grouped by local variable.
struct ReceiverCalls {
    std::string test_method;
    std::string receiver;
    std::string type_name;  // as written
    std::vector<std::string> calls;
    std::vector<int> lines;
};

/// Extracts per-receiver call sequences from every method of a test source.
std::vector<ReceiverCalls> receiver_sequences(std::string_view test_source);

/// Per test method and receiver whose static type has a model, the first
/// violating call. Receivers of unmodeled types are ignored.
std::vector<ProtocolViolation> check_sequence(const TypestateMap& models, std::string_view test_source);

struct RepairResult {
    std::vector<std::string> sequence;
    bool feasible = true;
};

/// Inserts the shortest positive-probability path (BFS, at most `depth_cap`
/// inserted calls) before each violating call until the sequence is clean.
RepairResult repair_sequence(const TypestateModel& model, const std::vector<std::string>& sequence,
                             const ProtocolViolation& violation, int depth_cap = 4);

/// Counts the consecutive pairs of a passing sequence (starting from INIT) and
/// adds unseen pairs as edges.
void reinforce(TypestateModel& model, const std::vector<std::string>& passing_sequence);
/// Adds (m, next) to the blocked set. Idempotent.
void block_transition(TypestateModel& model, const std::string& m, const std::string& next);

/// Runtime failures that feed block_transition: IllegalStateException or
/// NullPointerException raised inside the receiver's class.
bool is_state_related_failure(std::string_view exception_type, std::string_view throwing_class, std::string_view receiver_class);

/// Short protocol summary for prompts.
std::string describe_protocol(const TypestateModel& model);

/// Finds the model for a type spelled `written` in a file with `package` and
/// `imports`; nullptr when none matches.
const TypestateModel* find_model(const TypestateMap& models, const std::string& written, const std::string& package,
                                 const std::vector<std::string>& imports);

void save_models(const TypestateMap& models, const std::string& dir);
TypestateMap load_models(const std::string& dir);

}  // namespace mockless
