#include "mockless/metrics.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <sstream>
#include <stdexcept>

#include "mockless/util.hpp"

namespace pt = boost::property_tree;

namespace mockless {

namespace {

std::string attr(const pt::ptree& node, const char* name) { return node.get<std::string>(std::string("<xmlattr>.") + name, ""); }

std::int64_t attr_int(const pt::ptree& node, const char* name) {
    auto s = attr(node, name);
    if (s.empty()) return 0;
    try {
        return std::stoll(s);
    } catch (const std::exception&) {
        throw MetricsError(std::string("bad integer attribute ") + name + "=\"" + s + "\"");
    }
}

void read_package(const pt::ptree& pkg, CoverageReport& out) {
    std::string pkg_name = util::replace_all(attr(pkg, "name"), "/", ".");
    for (const auto& [tag, child] : pkg) {
        if (tag == "class") {
            // Register classes even when their lines are reported elsewhere.
            std::string name = util::replace_all(attr(child, "name"), "/", ".");
            auto dollar = name.find('$');
            if (dollar != std::string::npos) name.resize(dollar);
            if (!name.empty()) out.per_class[name];
        } else if (tag == "sourcefile") {
            std::string file = attr(child, "name");
            std::string stem = file.substr(0, file.rfind('.'));
            std::string fqn = pkg_name.empty() ? stem : pkg_name + "." + stem;
            auto& cls = out.per_class[fqn];
            for (const auto& [ltag, line] : child) {
                if (ltag != "line") continue;
                int nr = static_cast<int>(attr_int(line, "nr"));
                std::int64_t ci = attr_int(line, "ci"), mi = attr_int(line, "mi");
                std::int64_t cb = attr_int(line, "cb"), mb = attr_int(line, "mb");
                if (ci > 0) {
                    cls.line_covered.insert(nr);
                    cls.line_missed.erase(nr);
                } else if (mi > 0 && !cls.line_covered.count(nr)) {
                    cls.line_missed.insert(nr);
                }
                cls.branch_covered += cb;
                cls.branch_total += cb + mb;
            }
        }
    }
}

void read_group(const pt::ptree& node, CoverageReport& out) {
    for (const auto& [tag, child] : node) {
        if (tag == "package") read_package(child, out);
        else if (tag == "group") read_group(child, out);
    }
}

}  // namespace

CoverageReport parse_coverage_xml_text(std::string_view xml, const std::string& name) {
    pt::ptree tree;
    try {
        std::istringstream in{std::string(xml)};
        pt::read_xml(in, tree, pt::xml_parser::no_comments);
    } catch (const pt::xml_parser_error& e) {
        throw MetricsError("malformed coverage report " + name + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    auto report = tree.get_child_optional("report");
    if (!report) throw MetricsError("coverage report " + name + " has no <report> root");
    CoverageReport out;
    out.module_id = attr(*report, "name");
    try {
        read_group(*report, out);
    } catch (const MetricsError& e) {
        throw MetricsError("coverage report " + name + ": " + e.what());
    }
    return out;
}

CoverageReport parse_coverage_xml(const std::string& report_file) {
    std::string text;
    try {
        text = util::read_file(report_file);
    } catch (const std::exception& e) {
        throw MetricsError("cannot read coverage report " + report_file + ": " + e.what());
    }
    return parse_coverage_xml_text(text, report_file);
}

nlohmann::json DepMetrics::to_json() const {
    nlohmann::json j{{"dlc", dlc}, {"tlc", tlc}, {"deplc", deplc}};
    if (!warning.empty()) j["warning"] = warning;
    return j;
}

DepMetrics compute_dep_metrics(const CoverageReport& report, const std::string& cut_fqn,
                               const std::set<std::string>& test_classes) {
    DepMetrics m;
    if (auto it = report.per_class.find(cut_fqn); it != report.per_class.end())
        m.dlc = static_cast<std::int64_t>(it->second.line_covered.size());
    else
        m.warning = "class under test " + cut_fqn + " not present in coverage report";
    for (const auto& [fqn, cls] : report.per_class)
        if (!test_classes.count(fqn) || fqn == cut_fqn) m.tlc += static_cast<std::int64_t>(cls.line_covered.size());
    m.deplc = m.tlc - m.dlc;
    return m;
}

double mutation_score(std::int64_t killed, std::int64_t total) {
    if (total <= 0 || killed < 0 || killed > total)
        throw std::invalid_argument("mutation_score needs 0 <= killed <= total and total > 0");
    return static_cast<double>(killed) / static_cast<double>(total);
}

std::vector<MutationRow> parse_mutation_csv(std::string_view csv) {
    std::vector<MutationRow> rows;
    auto lines = util::split_lines(csv);
    bool header = true;
    for (const auto& raw : lines) {
        auto line = util::trim(raw);
        if (line.empty()) continue;
        auto cols = util::split(line, ',', true);
        if (header) {
            header = false;
            if (cols.size() >= 3 && util::trim(cols[0]) == "class") continue;
        }
        if (cols.size() < 3) throw MetricsError("mutation CSV row needs 3 columns: " + line);
        MutationRow r;
        r.class_fqn = util::trim(cols[0]);
        try {
            r.total = std::stoll(util::trim(cols[1]));
            r.killed = std::stoll(util::trim(cols[2]));
        } catch (const std::exception&) {
            throw MetricsError("mutation CSV row has non-numeric counts: " + line);
        }
        if (r.killed < 0 || r.killed > r.total) throw MetricsError("mutation CSV row has killed > total: " + line);
        rows.push_back(r);
    }
    return rows;
}

double line_coverage(const CoverageReport& report, const std::string& fqn) {
    auto it = report.per_class.find(fqn);
    if (it == report.per_class.end()) return 0.0;
    auto total = it->second.line_covered.size() + it->second.line_missed.size();
    return total ? static_cast<double>(it->second.line_covered.size()) / static_cast<double>(total) : 0.0;
}

double branch_coverage(const CoverageReport& report, const std::string& fqn) {
    auto it = report.per_class.find(fqn);
    if (it == report.per_class.end() || it->second.branch_total == 0) return 0.0;
    return static_cast<double>(it->second.branch_covered) / static_cast<double>(it->second.branch_total);
}

CoverageDelta coverage_delta(const CoverageReport& prev, const CoverageReport& curr, const std::string& cut_fqn) {
    CoverageDelta d;
    auto c = curr.per_class.find(cut_fqn);
    if (c == curr.per_class.end()) return d;
    auto p = prev.per_class.find(cut_fqn);
    for (int l : c->second.line_covered)
        if (p == prev.per_class.end() || !p->second.line_covered.count(l)) ++d.line_gain;
    std::int64_t before = p == prev.per_class.end() ? 0 : p->second.branch_covered;
    d.branch_gain = std::max<std::int64_t>(0, c->second.branch_covered - before);
    return d;
}

}  // namespace mockless
