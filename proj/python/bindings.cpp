#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mockless/class_index.hpp"
#include "mockless/config.hpp"
#include "mockless/metrics.hpp"
#include "mockless/orchestrator.hpp"
#include "mockless/path_planner.hpp"
#include "mockless/typestate.hpp"
#include "mockless/usage_miner.hpp"
#include "mockless/util.hpp"

namespace py = pybind11;
using namespace mockless;

namespace {

py::dict violation_dict(const ProtocolViolation& v) {
    py::dict d;
    d["receiver"] = v.receiver;
    d["class_fqn"] = v.class_fqn;
    d["test_method"] = v.test_method;
    d["position"] = v.position;
    d["from_state"] = v.from_state;
    d["to_call"] = v.to_call;
    d["reason"] = to_string(v.reason);
    d["required_predecessors"] = v.required_predecessors;
    d["line"] = v.line;
    d["text"] = v.describe();
    return d;
}

py::dict symbol_dict(const SymbolViolation& v) {
    py::dict d;
    d["kind"] = to_string(v.kind);
    d["line"] = v.line;
    d["column"] = v.column;
    d["symbol"] = v.offending_symbol;
    d["owner"] = v.owner;
    std::vector<std::string> names;
    for (const auto& c : v.candidates) names.push_back(c.name);
    d["candidates"] = names;
    d["text"] = v.describe();
    return d;
}

}  // namespace

PYBIND11_MODULE(_mockless, m) {
    m.doc() = "Mockless test generation core";

    static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
    static py::exception<BackendError> backend_error(m, "BackendError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ConfigError& e) {
            config_error(e.what());
        } catch (const BackendError& e) {
            backend_error(e.what());
        } catch (const MetricsError& e) {
            config_error(e.what());
        }
    });

    // metrics
    m.def("mutation_score", &mutation_score, py::arg("killed"), py::arg("total"));
    m.def(
        "dep_metrics",
        [](const std::string& report, const std::string& cut, const std::set<std::string>& test_classes) {
            auto r = compute_dep_metrics(parse_coverage_xml(report), cut, test_classes);
            return py::make_tuple(r.dlc, r.tlc, r.deplc);
        },
        py::arg("report"), py::arg("cut"), py::arg("test_classes") = std::set<std::string>{},
        "(dlc, tlc, deplc) from a JaCoCo XML file");
    m.def(
        "line_coverage",
        [](const std::string& report, const std::string& cut) { return line_coverage(parse_coverage_xml(report), cut); },
        py::arg("report"), py::arg("cut"));

    // config
    m.def("_parse_toml", [](const std::string& text) { return parse_toml(text).dump(); }, py::arg("text"));

    // usage mining
    m.def("structural_hash", py::overload_cast<const std::vector<std::string>&>(&structural_hash), py::arg("statements"));

    // path planning
    m.def(
        "enumerate_paths",
        [](const std::string& method_source, int loop_bound, std::size_t max_paths) {
            std::vector<std::vector<int>> out;
            for (const auto& p : enumerate_paths(build_cfg(method_source), loop_bound, max_paths))
                out.emplace_back(p.line_set.begin(), p.line_set.end());
            return out;
        },
        py::arg("method_source"), py::arg("loop_bound") = 1, py::arg("max_paths") = 64, "line sets of the method's paths");

    // class index
    py::class_<ClassIndex>(m, "ClassIndex")
        .def_static("build", &build_index, py::arg("project_root"), py::arg("classpath"), py::arg("jdk_table"))
        .def_static("load", &ClassIndex::load, py::arg("path"))
        .def("save", &ClassIndex::save, py::arg("path"))
        .def("serialize", &ClassIndex::serialize)
        .def("__len__", [](const ClassIndex& i) { return i.entries().size(); })
        .def("__contains__", [](const ClassIndex& i, const std::string& fqn) { return i.find(fqn) != nullptr; })
        .def("classes", [](const ClassIndex& i) {
            std::vector<std::string> out;
            for (const auto& [fqn, e] : i.entries()) out.push_back(fqn);
            return out;
        })
        .def(
            "resolve",
            [](const ClassIndex& i, const std::string& simple, const std::string& cut, const std::vector<std::string>& imports) {
                return resolve_simple_name(i, simple, ResolutionContext::for_class(cut, imports));
            },
            py::arg("simple_name"), py::arg("cut_fqn"), py::arg("imports") = std::vector<std::string>{})
        .def(
            "validate_symbols",
            [](const ClassIndex& i, const std::string& source) {
                py::list out;
                for (const auto& v : validate_symbols(i, source)) out.append(symbol_dict(v));
                return out;
            },
            py::arg("test_source"));

    // typestate
    py::class_<TypestateModel>(m, "TypestateModel")
        .def_readonly("class_fqn", &TypestateModel::class_fqn)
        .def_property_readonly("states", [](const TypestateModel& t) { return t.states; })
        .def_property_readonly("blocked", [](const TypestateModel& t) { return t.blocked; })
        .def("probability", &transition_probability, py::arg("m"), py::arg("next"))
        .def("block", [](TypestateModel& t, const std::string& a, const std::string& b) { block_transition(t, a, b); })
        .def("reinforce", [](TypestateModel& t, const std::vector<std::string>& seq) { reinforce(t, seq); })
        .def("describe", &describe_protocol)
        .def("_to_json", [](const TypestateModel& t) { return t.to_json().dump(); })
        .def_static("_from_json", [](const std::string& s) { return TypestateModel::from_json(nlohmann::json::parse(s)); });
    m.attr("INIT_STATE") = kInitState;
    m.def(
        "build_models",
        [](const std::string& cut_source, const std::vector<std::string>& usages) {
            return build_from_source(cut_source, usages);
        },
        py::arg("cut_source"), py::arg("usages") = std::vector<std::string>{});
    m.def(
        "check_sequence",
        [](const TypestateMap& models, const std::string& source) {
            py::list out;
            for (const auto& v : check_sequence(models, source)) out.append(violation_dict(v));
            return out;
        },
        py::arg("models"), py::arg("test_source"));

    // the loop
    m.def(
        "_generate",
        [](const std::string& config_path, const std::string& jdk_table) {
            auto dir = std::filesystem::absolute(config_path).parent_path().string();
            auto c = config_from_toml(load_toml(config_path), dir);
            if (c.jdk_table.empty()) c.jdk_table = jdk_table;
            if (c.backend.project_root.empty()) c.backend.project_root = c.project_root;
            c.validate();
            auto client = make_client(c);
            RunResult r;
            {
                py::gil_scoped_release release;
                r = run_loop(c, *client);
            }
            return py::make_tuple(r.manifest_path, r.manifest.to_json().dump());
        },
        py::arg("config_path"), py::arg("jdk_table"));
    m.def(
        "_efficiency",
        [](const std::vector<std::string>& manifests) {
            std::vector<RunManifest> ms;
            for (const auto& s : manifests) ms.push_back(RunManifest::from_json(nlohmann::json::parse(s)));
            return compute_efficiency(ms).to_json().dump();
        },
        py::arg("manifests"));
}
