#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace mockless {

struct ClassCoverage {
    std::set<int> line_covered;
    std::set<int> line_missed;
    std::int64_t branch_covered = 0;
    std::int64_t branch_total = 0;
};

/// JaCoCo lines live under <sourcefile>; each source file is credited to the
/// top-level class named after it (package + file stem).
struct CoverageReport {
    std::string module_id;
    std::map<std::string, ClassCoverage> per_class;
};

class MetricsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Throws MetricsError (message names the file) on unreadable or malformed XML.
CoverageReport parse_coverage_xml(const std::string& report_file);
CoverageReport parse_coverage_xml_text(std::string_view xml, const std::string& name = "<memory>");

struct DepMetrics {
    std::int64_t dlc = 0;
    std::int64_t tlc = 0;
    std::int64_t deplc = 0;
    std::string warning;  // set when the CUT is missing from the report
    nlohmann::json to_json() const;
};

/// DLC = covered lines of the CUT; TLC = covered lines of every production
/// class (those not listed in `test_classes`); DepLC = TLC - DLC.
DepMetrics compute_dep_metrics(const CoverageReport& report, const std::string& cut_fqn,
                               const std::set<std::string>& test_classes = {});

/// killed / total. Throws std::invalid_argument unless 0 <= killed <= total
/// and total > 0.
double mutation_score(std::int64_t killed, std::int64_t total);

struct MutationRow {
    std::string class_fqn;
    std::int64_t total = 0;
    std::int64_t killed = 0;
};

/// CSV with header `class,mutants_total,mutants_killed`.
std::vector<MutationRow> parse_mutation_csv(std::string_view csv);

/// Line and branch ratio of one class; 0 when it has no lines/branches.
double line_coverage(const CoverageReport& report, const std::string& fqn);
double branch_coverage(const CoverageReport& report, const std::string& fqn);

struct CoverageDelta {
    std::int64_t line_gain = 0;    // CUT lines covered now but not before
    std::int64_t branch_gain = 0;  // increase in covered CUT branches, floored at 0
    bool improved() const { return line_gain > 0 || branch_gain > 0; }
};

CoverageDelta coverage_delta(const CoverageReport& prev, const CoverageReport& curr, const std::string& cut_fqn);

}  // namespace mockless
