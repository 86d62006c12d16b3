#include "doctest.h"

#include <random>
#include <regex>

#include "mockless/metrics.hpp"
#include "mockless/util.hpp"

using namespace mockless;

namespace {

const std::string kFixtures = MOCKLESS_FIXTURES;

// Independent tally straight from the XML text: per <sourcefile>, lines with ci > 0.
std::map<std::string, std::int64_t> tally_covered(const std::string& xml) {
    std::map<std::string, std::int64_t> out;
    std::regex pkg_re(R"re(<package name="([^"]*)")re");
    std::regex file_re(R"re(<sourcefile name="([^"]*)\.java")re");
    std::regex line_re(R"re(<line nr="\d+" mi="\d+" ci="(\d+)")re");
    std::string pkg, cls;
    for (const auto& line : util::split_lines(xml)) {
        std::smatch m;
        if (std::regex_search(line, m, pkg_re)) pkg = util::replace_all(m[1], "/", ".");
        if (std::regex_search(line, m, file_re)) cls = pkg + "." + m[1].str();
        if (std::regex_search(line, m, line_re) && std::stoll(m[1]) > 0) ++out[cls];
    }
    return out;
}

std::string synthetic(const std::vector<std::tuple<std::string, std::string, std::vector<std::pair<int, int>>>>& classes) {
    std::string x = "<?xml version=\"1.0\"?>\n<report name=\"m\">\n";
    for (const auto& [pkg, name, lines] : classes) {
        x += "<package name=\"" + pkg + "\">\n<class name=\"" + pkg + "/" + name + "\" sourcefilename=\"" + name + ".java\"/>\n";
        x += "<sourcefile name=\"" + name + ".java\">\n";
        for (const auto& [nr, ci] : lines)
            x += "<line nr=\"" + std::to_string(nr) + "\" mi=\"" + std::to_string(ci ? 0 : 2) + "\" ci=\"" + std::to_string(ci) + "\" mb=\"0\" cb=\"0\"/>\n";
        x += "</sourcefile>\n</package>\n";
    }
    return x + "</report>\n";
}

}  // namespace

TEST_CASE("synthetic report parses exactly") {
    auto r = parse_coverage_xml_text(synthetic({{"p", "A", {{1, 3}, {2, 1}, {3, 0}}}}));
    REQUIRE(r.per_class.count("p.A"));
    CHECK(r.per_class["p.A"].line_covered == std::set<int>{1, 2});
    CHECK(r.per_class["p.A"].line_missed == std::set<int>{3});
    CHECK(r.module_id == "m");

    auto two = parse_coverage_xml_text(synthetic({{"p", "A", {{1, 1}}}, {"p", "B", {{4, 0}}}}));
    CHECK(two.per_class.size() == 2);
    CHECK(two.per_class.count("p.B"));
}

TEST_CASE("malformed report names the file") {
    auto path = kFixtures + "/jacoco/does_not_exist.xml";
    CHECK_THROWS_WITH_AS(parse_coverage_xml(path), doctest::Contains("does_not_exist.xml"), MetricsError);
    CHECK_THROWS_WITH_AS(parse_coverage_xml_text("<report><package name='p'>", "broken.xml"), doctest::Contains("broken.xml"), MetricsError);
    CHECK_THROWS_AS(parse_coverage_xml_text("<other/>", "x.xml"), MetricsError);
}

TEST_CASE("dependency coverage identity on the module fixture") {
    auto path = kFixtures + "/jacoco/module.xml";
    auto report = parse_coverage_xml(path);
    auto tally = tally_covered(util::read_file(path));
    CHECK(report.module_id == "xml-module");
    std::int64_t total = 0;
    for (const auto& [cls, n] : tally) {
        CHECK(static_cast<std::int64_t>(report.per_class.at(cls).line_covered.size()) == n);
        total += n;
    }
    auto m = compute_dep_metrics(report, "com.ex.xml.ToXmlGenerator");
    CHECK(m.dlc == tally["com.ex.xml.ToXmlGenerator"]);
    CHECK(m.tlc == total);
    CHECK(m.deplc == m.tlc - m.dlc);
    CHECK(m.dlc == 8);
    CHECK(m.tlc == 8 + 2 + 4);
    CHECK(m.warning.empty());
    CHECK(report.per_class.at("com.ex.xml.ToXmlGenerator").branch_total == 4);
    CHECK(branch_coverage(report, "com.ex.xml.ToXmlGenerator") == doctest::Approx(0.25));
    CHECK(line_coverage(report, "com.ex.xml.IOContext") == doctest::Approx(2.0 / 3.0));

    // test classes are not production lines
    auto excl = compute_dep_metrics(report, "com.ex.xml.ToXmlGenerator", {"com.ex.xml.IOContext"});
    CHECK(excl.tlc == 12);
    CHECK(excl.deplc == 4);

    auto missing = compute_dep_metrics(report, "com.ex.Nope");
    CHECK(missing.dlc == 0);
    CHECK_FALSE(missing.warning.empty());
}

TEST_CASE("dependency lines: 60 CUT + 40 dependency") {
    std::vector<std::pair<int, int>> cut, dep;
    for (int i = 1; i <= 60; ++i) cut.push_back({i, 1});
    for (int i = 1; i <= 40; ++i) dep.push_back({i, 1});
    auto r = parse_coverage_xml_text(synthetic({{"p", "Cut", cut}, {"q", "Dep", dep}}));
    auto m = compute_dep_metrics(r, "p.Cut");
    CHECK(m.dlc == 60);
    CHECK(m.tlc == 100);
    CHECK(m.deplc == 40);

    auto only = parse_coverage_xml_text(synthetic({{"p", "Cut", cut}, {"q", "Dep", {{1, 0}, {2, 0}}}}));
    CHECK(compute_dep_metrics(only, "p.Cut").deplc == 0);
}

TEST_CASE("identity and order independence (property)") {
    std::mt19937_64 rng(4);
    for (int round = 0; round < 100; ++round) {
        std::vector<std::tuple<std::string, std::string, std::vector<std::pair<int, int>>>> classes;
        int n = 1 + static_cast<int>(rng() % 5);
        std::int64_t expected_total = 0;
        for (int c = 0; c < n; ++c) {
            std::vector<std::pair<int, int>> lines;
            int len = static_cast<int>(rng() % 20);
            for (int l = 1; l <= len; ++l) {
                int ci = rng() % 2 ? static_cast<int>(1 + rng() % 5) : 0;
                expected_total += ci > 0;
                lines.push_back({l, ci});
            }
            classes.push_back({"p" + std::to_string(c % 2), "C" + std::to_string(c), lines});
        }
        auto a = parse_coverage_xml_text(synthetic(classes));
        std::shuffle(classes.begin(), classes.end(), rng);
        auto b = parse_coverage_xml_text(synthetic(classes));
        std::string cut = "p0.C0";
        auto ma = compute_dep_metrics(a, cut);
        auto mb = compute_dep_metrics(b, cut);
        CHECK(ma.dlc == mb.dlc);
        CHECK(ma.tlc == mb.tlc);
        CHECK(ma.tlc == expected_total);
        CHECK(ma.deplc == ma.tlc - ma.dlc);
        CHECK(ma.dlc >= 0);
        CHECK(ma.dlc <= ma.tlc);
        for (const auto& [fqn, cls] : a.per_class)
            for (int l : cls.line_covered) CHECK_FALSE(cls.line_missed.count(l));
        auto d = coverage_delta(a, a, cut);
        CHECK(d.line_gain == 0);
        CHECK(d.branch_gain == 0);
        CHECK_FALSE(d.improved());
    }
}

TEST_CASE("mutation score") {
    // The published Cli cell reads "57.23 (90/173)"; 90/173 is 0.5202. The
    // percentage matches 99 killed, and the baseline cell "43.93 (72/173)"
    // likewise matches 76. Check the arithmetic, not the printed pair.
    CHECK(std::abs(mutation_score(90, 173) - 90.0 / 173.0) < 1e-15);
    CHECK(std::abs(mutation_score(90, 173) - 0.5202) < 0.0001);
    CHECK(std::abs(mutation_score(99, 173) - 0.5723) < 0.0001);
    CHECK(std::abs(mutation_score(76, 173) - 0.4393) < 0.0001);
    CHECK(mutation_score(0, 7) == 0.0);
    CHECK(mutation_score(7, 7) == 1.0);
    CHECK_THROWS_AS(mutation_score(1, 0), std::invalid_argument);
    CHECK_THROWS_AS(mutation_score(8, 7), std::invalid_argument);

    auto rows = parse_mutation_csv("class,mutants_total,mutants_killed\ncom.ex.Cli,173,90\ncom.ex.Other, 10 , 0\n");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].class_fqn == "com.ex.Cli");
    CHECK(rows[0].killed == 90);
    CHECK(rows[0].total == 173);
    CHECK(rows[1].total == 10);
    CHECK_THROWS_AS(parse_mutation_csv("class,mutants_total,mutants_killed\nA,3,4\n"), MetricsError);
}

TEST_CASE("coverage delta counts new CUT lines and branches") {
    auto prev = parse_coverage_xml_text(synthetic({{"p", "Cut", {{1, 1}, {2, 0}, {3, 0}}}}));
    auto curr = parse_coverage_xml_text(synthetic({{"p", "Cut", {{1, 1}, {2, 1}, {3, 1}}}}));
    auto d = coverage_delta(prev, curr, "p.Cut");
    CHECK(d.line_gain == 2);
    CHECK(d.improved());
    auto back = coverage_delta(curr, prev, "p.Cut");
    CHECK(back.line_gain == 0);
    CHECK(back.branch_gain == 0);
}
