#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "mfpc/bench.hpp"
#include "mfpc/classifier.hpp"
#include "mfpc/cli.hpp"
#include "mfpc/learner.hpp"
#include "mfpc/metrics.hpp"

namespace py = pybind11;
using namespace mfpc;

namespace {

struct PyRuleset {
  std::shared_ptr<const Ruleset> rs;
};

struct PyEngine {
  std::shared_ptr<const Engine> engine;
};

Packet to_packet(const std::vector<std::uint64_t>& values) {
  if (values.size() != kNumFields) throw py::value_error("a packet needs 12 field values");
  Packet p;
  for (std::size_t f = 0; f < kNumFields; ++f) {
    if (values[f] > field_spec(f).max_value())
      throw py::value_error("value out of range for " + std::string(field_spec(f).name));
    p.values[f] = values[f];
  }
  return p;
}

std::vector<std::string> names(const FieldList& fields) {
  std::vector<std::string> out;
  for (auto f : fields) out.emplace_back(field_spec(f).name);
  return out;
}

FieldList field_list(const std::vector<std::string>& names) {
  FieldList out;
  for (const auto& n : names) {
    const auto f = field_index(n);
    if (!f) throw py::value_error("unknown field '" + n + "'");
    out.push_back(*f);
  }
  return out;
}

Scheme scheme_of(const std::string& s) {
  const auto scheme = parse_scheme(s);
  if (!scheme || *scheme == Scheme::Custom) throw py::value_error("scheme must be sd, di, variance, random1 or random2");
  return *scheme;
}

py::dict plan_dict(const DecompositionPlan& plan) {
  py::dict d;
  d["scheme"] = std::string(to_string(plan.scheme));
  d["subset_a"] = names(plan.subset_a);
  d["subset_b"] = names(plan.subset_b);
  d["residual"] = names(plan.residual);
  py::list ranking;
  for (const auto& e : plan.ranking) ranking.append(py::make_tuple(field_spec(e.field_index).name, e.rank, e.value));
  d["ranking"] = ranking;
  return d;
}

py::dict tree_dict(const DecisionTree& t) {
  const auto s = t.stats();
  py::dict d;
  d["fields"] = names(t.subset());
  d["depth"] = s.depth;
  d["nodes"] = s.node_count;
  d["bytes_total"] = s.bytes_total;
  d["max_leaf_size"] = s.max_leaf_size;
  return d;
}

}  // namespace

PYBIND11_MODULE(_mfpc, m) {
  m.doc() = "Many-field packet classification: field decomposition, decision trees, learned builders";
  m.attr("__version__") = kVersion;

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);

  py::class_<PyRuleset>(m, "Ruleset")
      .def("__len__", [](const PyRuleset& r) { return r.rs->size(); })
      .def("serialize", [](const PyRuleset& r) { return serialize_native(*r.rs); })
      .def("rule", [](const PyRuleset& r, std::size_t i) {
        if (i >= r.rs->size()) throw py::index_error();
        return format_rule((*r.rs)[i]);
      });

  m.def("parse_ruleset", [](const std::string& text, const std::string& format) {
        const auto f = parse_format_name(format);
        if (!f) throw py::value_error("format must be native or classbench5");
        return PyRuleset{std::make_shared<const Ruleset>(parse_ruleset(text, *f))};
      }, py::arg("text"), py::arg("format") = "native");
  m.def("load_ruleset", [](const std::string& path) { return PyRuleset{std::make_shared<const Ruleset>(load_ruleset(path))}; });
  m.def("generate_synthetic", [](std::uint64_t seed, std::size_t n) {
        return PyRuleset{std::make_shared<const Ruleset>(generate_synthetic(seed, n))};
      }, py::arg("seed"), py::arg("n"));
  m.def("generate_trace", [](const PyRuleset& r, std::uint64_t seed, std::size_t n) {
        py::list out;
        for (const auto& lp : generate_trace(*r.rs, seed, n)) {
          std::vector<std::uint64_t> v(lp.packet.values.begin(), lp.packet.values.end());
          out.append(py::make_tuple(v, lp.expected ? py::cast(*lp.expected) : py::none()));
        }
        return out;
      }, py::arg("ruleset"), py::arg("seed"), py::arg("n"));
  m.def("oracle_classify", [](const PyRuleset& r, const std::vector<std::uint64_t>& packet) {
    return oracle_classify(*r.rs, to_packet(packet));
  });
  m.def("field_names", []() { return names(all_fields()); });

  m.def("standard_deviation", [](const std::vector<double>& v) { return standard_deviation(v); });
  m.def("variance", [](const std::vector<double>& v) { return variance(v); });
  m.def("diversity_index", [](const std::vector<std::uint64_t>& v, unsigned width) {
        return diversity_index({0, v, width});
      }, py::arg("values"), py::arg("width") = 16);
  m.def("field_stats", [](const PyRuleset& r) {
    py::list out;
    for (const auto& s : compute_stats(*r.rs)) {
      py::dict d;
      d["field"] = std::string(field_spec(s.field_index).name);
      d["sd"] = s.sd;
      d["variance"] = s.variance;
      d["di"] = s.di;
      out.append(d);
    }
    return out;
  });
  m.def("plan", [](const PyRuleset& r, const std::string& scheme) { return plan_dict(plan_for(*r.rs, scheme_of(scheme))); },
        py::arg("ruleset"), py::arg("scheme") = "sd");

  py::class_<PyEngine>(m, "Engine")
      .def("classify", [](const PyEngine& e, const std::vector<std::uint64_t>& packet) {
        const auto r = classify(*e.engine, to_packet(packet));
        py::dict d;
        d["rule"] = r.rule ? py::cast(*r.rule) : py::none();
        d["action"] = r.action ? py::cast(*r.action) : py::none();
        d["accesses_a"] = r.accesses_a;
        d["accesses_b"] = r.accesses_b;
        return d;
      })
      .def("classify_many", [](const PyEngine& e, const std::vector<std::vector<std::uint64_t>>& packets, unsigned workers) {
        std::vector<Packet> ps;
        ps.reserve(packets.size());
        for (const auto& p : packets) ps.push_back(to_packet(p));
        std::vector<std::optional<RuleId>> out;
        {
          py::gil_scoped_release release;
          for (const auto& r : classify_all(*e.engine, ps, workers)) out.push_back(r.rule);
        }
        return out;
      }, py::arg("packets"), py::arg("workers") = 1)
      .def_property_readonly("plan", [](const PyEngine& e) { return plan_dict(e.engine->plan); })
      .def_property_readonly("tree_a", [](const PyEngine& e) { return tree_dict(e.engine->tree_a); })
      .def_property_readonly("tree_b", [](const PyEngine& e) { return tree_dict(e.engine->tree_b); })
      .def_property_readonly("worst_case_accesses", [](const PyEngine& e) { return worst_case_accesses(*e.engine); })
      .def_property_readonly("bytes_total", [](const PyEngine& e) { return engine_memory(*e.engine).bytes_total; })
      .def("serialize", [](const PyEngine& e) { return serialize_engine(*e.engine); })
      .def("save", [](const PyEngine& e, const std::string& path) { save_engine(path, *e.engine); });

  m.def("build_engine", [](const PyRuleset& r, const std::string& scheme, std::size_t leaf_threshold,
                           const std::string& builder) {
        EngineConfig cfg;
        cfg.leaf_threshold = leaf_threshold;
        const auto spec = parse_builder(builder);
        if (!spec) throw py::value_error("builder must be baseline or policy:<checkpoint>");
        std::optional<PolicyBundle> bundle;
        if (spec->kind == BuilderSpec::Kind::Policy) bundle = load_bundle(spec->checkpoint);
        const auto s = scheme_of(scheme);
        py::gil_scoped_release release;
        return PyEngine{
            std::make_shared<const Engine>(build_engine(r.rs, plan_for(*r.rs, s), cfg, bundle ? &*bundle : nullptr))};
      }, py::arg("ruleset"), py::arg("scheme") = "sd", py::arg("leaf_threshold") = 16, py::arg("builder") = "baseline");
  m.def("load_engine", [](const std::string& path) { return PyEngine{std::make_shared<const Engine>(load_engine(path))}; });
  m.def("deserialize_engine", [](const std::string& text) {
    return PyEngine{std::make_shared<const Engine>(deserialize_engine(text))};
  });

  m.def("bench_csv", [](const std::vector<std::pair<std::string, PyRuleset>>& rulesets, std::uint64_t seed) {
        std::vector<NamedRuleset> in;
        for (const auto& [name, r] : rulesets) in.push_back({name, r.rs, {}});
        BenchConfig cfg;
        cfg.seed = seed;
        py::gil_scoped_release release;
        const auto rows = run_bench(in, cfg);
        return std::make_pair(table_csv(rows), report(rows));
      }, py::arg("rulesets"), py::arg("seed") = 1);

  m.def("train", [](const PyRuleset& r, const std::vector<std::string>& fields, const py::dict& overrides) {
        AppConfig app;
        app.workers = 1;
        for (const auto& [k, v] : overrides) app.set(py::str(k), py::str(v));
        const auto cfg = app.train_config();
        auto proj = std::make_shared<const Ruleset>(project(*r.rs, field_list(fields)));
        TrainReport rep;
        {
          py::gil_scoped_release release;
          rep = train(proj, cfg);
        }
        py::dict d;
        d["iterations"] = rep.iterations.size();
        d["timesteps"] = rep.iterations.empty() ? 0 : rep.iterations.back().timesteps;
        d["best_objective"] = rep.best_objective;
        d["best_depth"] = rep.best_tree ? rep.best_tree->stats().depth : 0;
        d["curve"] = curve_csv(rep.iterations);
        return d;
      }, py::arg("ruleset"), py::arg("fields"), py::arg("config") = py::dict());

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::vector<std::string> all{"mfpc"};
    all.insert(all.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : all) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = 0;
    {
      py::gil_scoped_release release;
      code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  });
}
