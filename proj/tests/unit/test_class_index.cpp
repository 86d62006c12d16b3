#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "mockless/class_index.hpp"
#include "mockless/util.hpp"

using namespace mockless;
namespace fs = std::filesystem;

namespace {

const std::string kFixtures = MOCKLESS_FIXTURES;
const std::string kShapes = kFixtures + "/projects/shapes";
const std::string kJar = kFixtures + "/jars/libparser.jar";
const std::string kJdk = std::string(MOCKLESS_DATA_DIR) + "/jdk_table.tsv";

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("mockless_ci_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    void write(const std::string& rel, const std::string& text) const { util::write_file((path / rel).string(), text); }
};

// Plain full-matrix edit distance, kept separate from the library's version.
double oracle_similarity(const std::string& a, const std::string& b) {
    std::vector<std::vector<int>> d(a.size() + 1, std::vector<int>(b.size() + 1));
    for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = static_cast<int>(i);
    for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = static_cast<int>(j);
    for (std::size_t i = 1; i <= a.size(); ++i)
        for (std::size_t j = 1; j <= b.size(); ++j)
            d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::size_t m = std::max(a.size(), b.size());
    return m == 0 ? 1.0 : 1.0 - static_cast<double>(d[a.size()][b.size()]) / static_cast<double>(m);
}

ClassIndex shapes_index() { return build_index(kShapes, {kJar}, kJdk); }

std::string dump(const std::vector<SymbolViolation>& vs) {
    std::string s;
    for (const auto& v : vs) s += v.describe() + "\n";
    return s;
}

}  // namespace

TEST_CASE("minimal fixture: one project class and a stub JDK table") {
    TempDir dir;
    dir.write("src/main/java/com/ex/Foo.java", "package com.ex;\npublic class Foo { public void run() {} }\n");
    dir.write("jdk.tsv", "java.lang.String\t<init>();length():int\n");
    auto index = build_index(dir.path.string(), {}, (dir.path / "jdk.tsv").string());
    CHECK(index.simple_key_count() == 2);
    REQUIRE(index.find("com.ex.Foo"));
    CHECK(index.find("com.ex.Foo")->source == ClassSource::ProjectMain);
    CHECK(index.find("java.lang.String")->source == ClassSource::Jdk);
    // implicit default constructor
    REQUIRE(index.find("com.ex.Foo")->constructors.size() == 1);
    CHECK(index.find("com.ex.Foo")->constructors[0].return_type == "com.ex.Foo");
}

TEST_CASE("main and test trees are classified separately") {
    TempDir dir;
    dir.write("src/main/java/p/A.java", "package p; public class A {}");
    dir.write("src/test/java/p/ATest.java", "package p; class ATest { A a = new A(); }");
    dir.write("src/main/java/p/Broken.java", "package p; public class Broken {");
    dir.write("jdk.tsv", "");
    auto index = build_index(dir.path.string(), {}, (dir.path / "jdk.tsv").string());
    CHECK(index.find("p.A")->source == ClassSource::ProjectMain);
    CHECK(index.find("p.ATest")->source == ClassSource::ProjectTest);
    CHECK(index.find("p.Broken") == nullptr);
    CHECK(index.warnings.size() == 1);
}

TEST_CASE("missing JDK table is a configuration error") {
    CHECK_THROWS_AS(build_index(kShapes, {}, "/nonexistent/jdk.tsv"), ConfigError);
}

TEST_CASE("dependency archive listing matches the independent listing") {
    ClassIndex index;
    for (auto& e : load_jdk_table(kJdk)) index.add(e);
    index_classpath_entry(index, kJar);
    auto expected = nlohmann::json::parse(util::read_file(kFixtures + "/jars/libparser.listing.json"));
    std::set<std::string> expected_fqns, got_fqns;
    for (auto& [fqn, api] : expected.items()) {
        expected_fqns.insert(fqn);
        CAPTURE(fqn);
        const ClassEntry* e = index.find(fqn);
        REQUIRE(e);
        CHECK(e->source == ClassSource::DependencyJar);
        CHECK(to_string(e->kind) == api["kind"].get<std::string>());
        CHECK(to_string(e->visibility) == api["visibility"].get<std::string>());
        std::set<std::vector<std::string>> want_ctors, got_ctors;
        for (const auto& c : api["constructors"]) want_ctors.insert(c.get<std::vector<std::string>>());
        for (const auto& c : e->constructors) {
            got_ctors.insert(c.param_types);
            CHECK(c.name == e->simple_name);
            CHECK(c.return_type == e->fqn);
        }
        CHECK(want_ctors == got_ctors);
        std::set<std::string> want_methods, got_methods;
        for (const auto& m : api["methods"]) want_methods.insert(m.get<std::string>());
        for (const auto& m : e->methods) got_methods.insert(m.name + "(" + util::join(m.param_types, ",") + ")");
        CHECK(want_methods == got_methods);
    }
    for (const auto& [fqn, e] : index.entries())
        if (e.source == ClassSource::DependencyJar) got_fqns.insert(fqn);
    CHECK(got_fqns == expected_fqns);
    const auto* parser = index.find("org.lib.Parser");
    auto all = parser->methods;
    auto varargs = std::find_if(all.begin(), all.end(), [](const MemberSignature& m) { return m.name == "parseAll"; });
    REQUIRE(varargs != all.end());
    CHECK(varargs->varargs);
    CHECK(varargs->accepts_arity(3));
    CHECK(index.by_simple_name("Parser.Options").size() == 1);
    CHECK(index.by_simple_name("Options").size() == 1);
}

TEST_CASE("classpath text accepts newline and separator forms") {
    CHECK(parse_classpath("a.jar:b.jar\nc.jar\n\n") == std::vector<std::string>{"a.jar", "b.jar", "c.jar"});
}

TEST_CASE("homonym ranking prefers project-local candidates") {
    ClassIndex index;
    index_source(index, "package com.google.adk.tools;\npublic class Annotations { public @interface Schema { } }\n",
                 ClassSource::ProjectMain, "Annotations.java");
    index_source(index, "package com.google.genai.types;\npublic class Schema { }\n", ClassSource::DependencyJar, "genai.jar");
    auto ctx = ResolutionContext::for_class("com.google.adk.agents.LlmAgent");
    CHECK(ctx.cut_package == "com.google.adk.agents");
    auto ranked = resolve_simple_name(index, "Schema", ctx);
    REQUIRE(ranked.size() == 2);
    CHECK(ranked[0] == "com.google.adk.tools.Annotations.Schema");
    CHECK(ranked[1] == "com.google.genai.types.Schema");

    SUBCASE("explicit import dominates") {
        ctx.cut_imports = {"com.google.genai.types.Schema"};
        CHECK(resolve_simple_name(index, "Schema", ctx).front() == "com.google.genai.types.Schema");
    }
    SUBCASE("unknown name is an empty result") { CHECK(resolve_simple_name(index, "Nope", ctx).empty()); }
}

TEST_CASE("equal-score JDK candidates are ordered by FQN") {
    ClassIndex index;
    for (auto& e : parse_jdk_table("java.util.List\t@interface\njava.awt.List\tadd(java.lang.String):void\n")) index.add(e);
    auto ranked = resolve_simple_name(index, "List", ResolutionContext::for_class("org.x.Y"));
    CHECK(ranked == std::vector<std::string>{"java.awt.List", "java.util.List"});
    CHECK(index.find("java.util.List")->constructors.empty());
}

TEST_CASE("ranking tiers are strict (property)") {
    // Random candidate pools; the oracle compares feature tuples directly.
    std::mt19937_64 rng(7);
    const std::vector<std::string> packages = {"a", "a.b", "a.b.c", "a.c", "x.y", "a.b.d"};
    const std::vector<ClassSource> sources = {ClassSource::ProjectMain, ClassSource::DependencyJar, ClassSource::Jdk};
    for (int round = 0; round < 200; ++round) {
        ClassIndex index;
        std::vector<std::string> fqns;
        int n = 2 + static_cast<int>(rng() % 5);
        for (int i = 0; i < n; ++i) {
            ClassEntry e;
            e.package = packages[rng() % packages.size()];
            e.simple_name = "T";
            e.fqn = e.package + ".T";
            if (index.find(e.fqn)) continue;
            e.source = sources[rng() % sources.size()];
            fqns.push_back(e.fqn);
            index.add(e);
        }
        ResolutionContext ctx;
        ctx.cut_package = packages[rng() % packages.size()];
        if (rng() % 2) ctx.cut_imports.push_back(fqns[rng() % fqns.size()]);
        auto key = [&](const std::string& fqn) {
            const ClassEntry* e = index.find(fqn);
            bool imported = std::count(ctx.cut_imports.begin(), ctx.cut_imports.end(), fqn) > 0;
            int pri = e->source == ClassSource::ProjectMain ? 2 : e->source == ClassSource::DependencyJar ? 1 : 0;
            std::size_t shared = 0;
            auto pa = util::split(e->package, '.'), pb = util::split(ctx.cut_package, '.');
            while (shared < pa.size() && shared < pb.size() && pa[shared] == pb[shared]) ++shared;
            return std::make_tuple(!imported, pri != 2, -static_cast<int>(shared), -pri, fqn);
        };
        std::vector<std::string> expected = fqns;
        std::sort(expected.begin(), expected.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
        CHECK(resolve_simple_name(index, "T", ctx) == expected);
    }
}

TEST_CASE("every indexed class resolves from its own simple name (property)") {
    auto index = shapes_index();
    for (const auto& [fqn, e] : index.entries()) {
        std::string top = e.outer.empty() ? fqn : e.outer;
        while (index.find(top) && !index.find(top)->outer.empty()) top = index.find(top)->outer;
        ResolutionContext ctx = ResolutionContext::for_class(top);
        ctx.cut_package = e.package;
        auto ranked = resolve_simple_name(index, e.simple_name, ctx);
        CAPTURE(fqn);
        CHECK(std::find(ranked.begin(), ranked.end(), fqn) != ranked.end());
        CHECK(util::ends_with(fqn, e.simple_name));
        if (e.kind == ClassKind::Interface) CHECK(e.constructors.empty());
    }
}

TEST_CASE("index serialization is deterministic and round-trips") {
    auto a = shapes_index().serialize();
    auto b = shapes_index().serialize();
    CHECK(a == b);
    TempDir dir;
    auto path = (dir.path / "classindex.json").string();
    shapes_index().save(path);
    CHECK(ClassIndex::load(path).serialize() == a);
    auto j = nlohmann::json::parse(a);
    CHECK(j["schema_version"] == ClassIndex::kSchemaVersion);
    j.erase("schema_version");
    CHECK_THROWS(ClassIndex::from_json(j));
}

TEST_CASE("unknown method candidate matches the edit-distance oracle") {
    ClassIndex index;
    index_source(index, R"(package com.ex;
public class Foo {
    public void writeName() {}
    public void writeNumber(int n) {}
    public void writeStartObject() {}
    public void flush() {}
    public int size() { return 0; }
})", ClassSource::ProjectMain, "Foo.java");
    const char* test = R"(package com.ex;
class FooTest {
    void t() {
        Foo foo = new Foo();
        foo.writeNothing();
    }
})";
    auto vs = validate_symbols(index, test);
    REQUIRE(vs.size() == 1);
    CHECK(vs[0].kind == SymbolViolationKind::UnknownMethod);
    CHECK(vs[0].offending_symbol == "writeNothing");
    CHECK(vs[0].line == 5);
    CHECK(vs[0].column == 13);
    REQUIRE_FALSE(vs[0].candidates.empty());

    // Oracle: best zero-arity method name at or above 0.5.
    std::string best;
    double best_score = -1;
    for (const auto& m : index.all_methods("com.ex.Foo")) {
        if (m.arity() != 0) continue;
        double s = oracle_similarity("writeNothing", m.name);
        if (s >= 0.5 && (s > best_score || (s == best_score && m.name < best))) {
            best = m.name;
            best_score = s;
        }
    }
    CHECK(best == "writeName");
    CHECK(vs[0].candidates[0].name == best);
    CHECK(vs[0].candidates[0].score == doctest::Approx(best_score));
    for (std::size_t i = 1; i < vs[0].candidates.size(); ++i) CHECK(vs[0].candidates[i - 1].score >= vs[0].candidates[i].score);
    // writeNumber has the wrong arity and must not be offered
    for (const auto& c : vs[0].candidates) CHECK(c.name != "writeNumber");

    auto far = validate_symbols(index, "package com.ex; class T { void t() { new Foo().zzzzzzzzzzzz(); } }");
    REQUIRE(far.size() == 1);
    CHECK(far[0].candidates.empty());
}

TEST_CASE("abstract instantiation is reported with concrete implementations") {
    auto index = shapes_index();
    const char* test = R"(package com.ex.shapes;
class ShapeTest {
    void t() {
        Shape s = new Shape() {};
        Shape t = new Shape();
        Shape ok = new Shape() { public double area() { return 1; } public String name() { return "x"; } };
    }
})";
    auto vs = validate_symbols(index, test);
    INFO(dump(vs));
    REQUIRE(vs.size() == 2);
    for (const auto& v : vs) {
        CHECK(v.kind == SymbolViolationKind::AbstractInstantiation);
        REQUIRE(v.candidates.size() == 2);
        CHECK(v.candidates[0].name == "com.ex.shapes.Circle");
        CHECK(v.candidates[1].name == "com.ex.other.Square");
    }
    CHECK(vs[0].line == 4);
    CHECK(vs[1].line == 5);
}

TEST_CASE("concrete implementations: proximity, empty and unknown") {
    auto index = shapes_index();
    auto ctx = ResolutionContext::for_class("com.ex.shapes.ShapeTest");
    CHECK(concrete_implementations(index, "com.ex.shapes.Shape", ctx) ==
          std::vector<std::string>{"com.ex.shapes.Circle", "com.ex.other.Square"});
    CHECK(concrete_implementations(index, "org.lib.AbstractNode", ctx).empty());
    CHECK_THROWS_AS(concrete_implementations(index, "no.such.Type", ctx), std::invalid_argument);
}

TEST_CASE("diamond hierarchy closure matches brute force") {
    ClassIndex index;
    index_source(index, R"(package d;
public interface I {}
)", ClassSource::ProjectMain, "I.java");
    index_source(index, "package d; public interface J extends I {}", ClassSource::ProjectMain, "J.java");
    index_source(index, "package d; public abstract class A implements I {}", ClassSource::ProjectMain, "A.java");
    index_source(index, "package d; public class C extends A implements J {}", ClassSource::ProjectMain, "C.java");
    index_source(index, "package d; public class D extends C {}", ClassSource::ProjectMain, "D.java");
    index_source(index, "package d; public abstract class E extends D {}", ClassSource::ProjectMain, "E.java");
    index_source(index, "package d; public class Z {}", ClassSource::ProjectMain, "Z.java");

    // Brute force: iterate reachability to a fixed point over declared supertypes.
    std::vector<std::string> names;
    for (const auto& [fqn, e] : index.entries()) names.push_back(fqn);
    std::map<std::string, std::set<std::string>> reach;
    for (const auto& n : names) reach[n] = {n};
    for (bool changed = true; changed;) {
        changed = false;
        for (const auto& n : names)
            for (const auto& s : index.find(n)->supertypes)
                for (const auto& t : std::set<std::string>(reach[s].begin(), reach[s].end()))
                    if (index.find(s) && reach[n].insert(t).second) changed = true;
        for (const auto& n : names)
            for (const auto& s : index.find(n)->supertypes)
                if (reach[n].insert(s).second) changed = true;
    }
    auto ctx = ResolutionContext::for_class("d.T");
    for (const auto& target : names) {
        std::vector<std::string> expected;
        for (const auto& n : names) {
            const auto* e = index.find(n);
            if (n != target && reach[n].count(target) && !e->is_abstract_type()) expected.push_back(n);
        }
        CAPTURE(target);
        CHECK(concrete_implementations(index, target, ctx) == expected);
        for (const auto& n : names) CHECK(index.is_subtype(n, target) == (reach[n].count(target) > 0));
    }
    CHECK(concrete_implementations(index, "d.I", ctx) == std::vector<std::string>{"d.C", "d.D"});
}

TEST_CASE("constructor arity and type consistency") {
    auto index = shapes_index();
    const char* test = R"(package com.ex.shapes;
class CircleTest {
    void t() {
        Circle a = new Circle(2);
        Circle b = new Circle(2.5);
        Circle c = new Circle();
        Circle d = new Circle("x");
        Foo f = new Foo(new java.io.StringWriter());
        Foo g = new Foo();
    }
})";
    auto vs = validate_symbols(index, test);
    INFO(dump(vs));
    REQUIRE(vs.size() == 2);
    CHECK(vs[0].kind == SymbolViolationKind::BadConstructor);
    CHECK(vs[0].line == 6);
    CHECK(vs[1].line == 7);
    REQUIRE(vs[0].candidates.size() == 1);
    CHECK(vs[0].candidates[0].member->param_types == std::vector<std::string>{"double"});

    // the package-private Foo() is invisible from another package
    auto other = validate_symbols(index, "package com.ex.other; import com.ex.shapes.Foo; class T { void t() { new Foo(); } }");
    REQUIRE(other.size() == 1);
    CHECK(other[0].kind == SymbolViolationKind::BadConstructor);
}

TEST_CASE("imports and unresolved types") {
    auto index = shapes_index();
    const char* test = R"(package com.ex.other;

import com.ex.shapes.Fooo;
import org.junit.jupiter.api.Test;
import static org.junit.jupiter.api.Assertions.*;

class T {
    @Test
    void t() {
        List<String> xs = new java.util.ArrayList<>();
        Circle c = null;
        Widget w = null;
        assertEquals(1, 1);
    }
})";
    auto vs = validate_symbols(index, test);
    INFO(dump(vs));
    REQUIRE(vs.size() == 4);
    CHECK(vs[0].kind == SymbolViolationKind::MissingOrAmbiguousImport);
    CHECK(vs[0].offending_symbol == "com.ex.shapes.Fooo");
    CHECK(vs[0].candidates.at(0).name == "com.ex.shapes.Foo");
    CHECK(vs[1].kind == SymbolViolationKind::MissingOrAmbiguousImport);
    CHECK(vs[1].offending_symbol == "List");
    CHECK(vs[1].candidates.at(0).name == "java.util.List");
    CHECK(vs[2].offending_symbol == "Circle");
    CHECK(vs[2].candidates.at(0).name == "com.ex.shapes.Circle");
    CHECK(vs[3].kind == SymbolViolationKind::UnresolvedType);
    CHECK(vs[3].offending_symbol == "Widget");
}

TEST_CASE("protected members follow package visibility") {
    auto index = shapes_index();
    auto same = validate_symbols(index, "package com.ex.shapes; class T { void t(Foo f) { f.reset(); } }");
    CHECK(same.empty());
    auto other = validate_symbols(index, "package com.ex.other; import com.ex.shapes.Foo; class T { void t(Foo f) { f.reset(); } }");
    REQUIRE(other.size() == 1);
    CHECK(other[0].kind == SymbolViolationKind::UnknownMethod);
}

TEST_CASE("nested, enum and static references") {
    auto index = shapes_index();
    const char* test = R"(package com.ex.shapes;
class T {
    void t() {
        Foo f = new Foo.Builder().indent(2).build();
        Foo.Mode m = Foo.Mode.PRETTY;
        Foo.Mode[] all = Foo.Mode.values();
        String s = m.name();
        f.writeNames(java.util.List.of("a"));
        int n = "abc".length() + Math.max(1, 2);
        StringBuilder sb = new StringBuilder().append(n);
        System.out.println(sb.toString());
    }
})";
    auto vs = validate_symbols(index, test);
    INFO(dump(vs));
    CHECK(vs.empty());
}

TEST_CASE("calls on types with unindexed supertypes are not judged") {
    ClassIndex index;
    index_source(index, "package q; public class Sub extends com.unknown.Base { public void own() {} }", ClassSource::ProjectMain, "Sub.java");
    auto vs = validate_symbols(index, "package q; class T { void t(Sub s) { s.inherited(); s.own(); } }");
    CHECK(vs.empty());
}

TEST_CASE("a source that does not parse yields one violation") {
    auto index = shapes_index();
    auto vs = validate_symbols(index, "package a; class T { void t() { int x = ; } }");
    REQUIRE(vs.size() == 1);
    CHECK(vs[0].kind == SymbolViolationKind::UnresolvedType);
    CHECK(vs[0].line == 1);
}

TEST_CASE("sources made of indexed symbols with recorded arities are clean (property)") {
    auto index = shapes_index();
    auto ctx = ResolutionContext::for_class("com.ex.shapes.GenTest");
    // Public concrete project and dependency classes with at least one public constructor.
    std::vector<const ClassEntry*> pool;
    for (const auto& [fqn, e] : index.entries()) {
        if (e.source == ClassSource::Jdk || e.is_abstract_type() || e.visibility != Visibility::Public) continue;
        if (std::any_of(e.constructors.begin(), e.constructors.end(), [](const MemberSignature& c) { return c.visibility == Visibility::Public; }))
            pool.push_back(&e);
    }
    REQUIRE(pool.size() >= 4);
    auto literal = [](const std::string& t) -> std::string {
        if (t == "int" || t == "long" || t == "short" || t == "byte") return "1";
        if (t == "double" || t == "float") return "1.5";
        if (t == "boolean") return "true";
        if (t == "char") return "'c'";
        if (t == "java.lang.String") return "\"s\"";
        return "null";
    };
    std::mt19937_64 rng(11);
    for (int round = 0; round < 60; ++round) {
        std::string body;
        int vars = 1 + static_cast<int>(rng() % 4);
        for (int v = 0; v < vars; ++v) {
            const ClassEntry* e = pool[rng() % pool.size()];
            std::vector<const MemberSignature*> ctors;
            for (const auto& c : e->constructors)
                if (c.visibility == Visibility::Public) ctors.push_back(&c);
            const auto* ctor = ctors[rng() % ctors.size()];
            std::vector<std::string> args;
            for (const auto& p : ctor->param_types) args.push_back(literal(p));
            std::string name = "v" + std::to_string(v);
            body += "        " + e->fqn + " " + name + " = new " + e->fqn + "(" + util::join(args, ", ") + ");\n";
            std::vector<const MemberSignature*> methods;
            for (const auto& m : e->methods)
                if (m.visibility == Visibility::Public && !m.varargs) methods.push_back(&m);
            for (int c = 0; c < 3 && !methods.empty(); ++c) {
                const auto* m = methods[rng() % methods.size()];
                std::vector<std::string> margs;
                for (const auto& p : m->param_types) margs.push_back(literal(p));
                body += "        " + name + "." + m->name + "(" + util::join(margs, ", ") + ");\n";
            }
        }
        std::string src = "package com.ex.shapes;\n\nclass GenTest {\n    void t() {\n" + body + "    }\n}\n";
        auto vs = validate_symbols(index, src);
        CAPTURE(src);
        INFO(dump(vs));
        CHECK(vs.empty());
    }
    (void)ctx;
}
