#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ngmpn/error.hpp"
#include "ngmpn/estimate.hpp"
#include "ngmpn/modelzoo.hpp"
#include "ngmpn/ngm.hpp"
#include "ngmpn/petri.hpp"
#include "ngmpn/sim.hpp"

namespace py = pybind11;
using namespace ngmpn;
using Dict = std::map<std::string, double>;

namespace {

py::object to_py(const nlohmann::json& j) {
  switch (j.type()) {
    case nlohmann::json::value_t::null:
      return py::none();
    case nlohmann::json::value_t::boolean:
      return py::bool_(j.get<bool>());
    case nlohmann::json::value_t::number_integer:
      return py::int_(j.get<std::int64_t>());
    case nlohmann::json::value_t::number_unsigned:
      return py::int_(j.get<std::uint64_t>());
    case nlohmann::json::value_t::number_float:
      return py::float_(j.get<double>());
    case nlohmann::json::value_t::string:
      return py::str(j.get<std::string>());
    case nlohmann::json::value_t::array: {
      py::list out;
      for (const auto& v : j) out.append(to_py(v));
      return std::move(out);
    }
    default: {
      py::dict out;
      for (const auto& [k, v] : j.items()) out[py::str(k)] = to_py(v);
      return std::move(out);
    }
  }
}

Bindings bindings_of(const Dict& d) {
  Bindings b;
  for (const auto& [k, v] : d) b.set(k, v);
  return b;
}

std::vector<DfePin> pins_of(const PetriModel& m, const std::map<std::string, std::string>& pins) {
  std::vector<DfePin> out;
  for (const auto& [place, value] : pins) {
    auto idx = m.place_index(place);
    if (!idx) throw ModelError("unknown place '" + place + "' in pin");
    out.push_back({*idx, parse_expr(value)});
  }
  return out;
}

py::dict trajectory_dict(const Trajectory& t) {
  py::dict d;
  d["places"] = t.places;
  d["times"] = t.times;
  d["markings"] = t.markings;
  d["clipping_events"] = t.clipping_events;
  d["firings"] = t.firings;
  d["rng_seed"] = t.rng_seed;
  d["rng_algorithm"] = t.rng_algorithm;
  return d;
}

}  // namespace

PYBIND11_MODULE(_ngmpn, mod) {
  mod.doc() = "Next-generation-matrix R0 for epidemic Petri nets";

  auto error = py::register_exception<Error>(mod, "Error");
  py::register_exception<ParseError>(mod, "ParseError", error);
  py::register_exception<UnboundSymbol>(mod, "UnboundSymbol", error);
  py::register_exception<DivisionByZero>(mod, "DivisionByZero", error);
  py::register_exception<DomainError>(mod, "DomainError", error);
  py::register_exception<ModelError>(mod, "ModelError", error);
  py::register_exception<NumericError>(mod, "NumericError", error);

  py::class_<PetriModel>(mod, "Model")
      .def_readonly("name", &PetriModel::name)
      .def_property_readonly("kind", [](const PetriModel& m) { return to_string(m.kind); })
      .def_property_readonly("places", &PetriModel::place_names)
      .def_property_readonly("infected",
                             [](const PetriModel& m) {
                               std::vector<std::string> out;
                               for (auto i : m.infected_places()) out.push_back(m.places[i].name);
                               return out;
                             })
      .def_property_readonly("transitions",
                             [](const PetriModel& m) {
                               std::vector<std::string> out;
                               for (const auto& t : m.transitions) out.push_back(t.name);
                               return out;
                             })
      .def_property_readonly("params", [](const PetriModel& m) { return m.params.values(); })
      .def_property_readonly("initial_marking", &PetriModel::initial_marking)
      .def("__repr__", [](const PetriModel& m) {
        return "<ngmpn.Model '" + m.name + "' " + to_string(m.kind) + ", " + std::to_string(m.places.size()) +
               " places>";
      });

  mod.def("parse_model", [](const std::string& text) { return parse_model(text); }, py::arg("text"));
  mod.def("load_model", &load_model, py::arg("path"));
  mod.def("builtin", [](const std::string& id) { return builtin(id).model; }, py::arg("id"));
  mod.def("builtin_ids", &builtin_ids);

  mod.def(
      "validate",
      [](const PetriModel& m, const Dict& params) {
        py::list out;
        for (const auto& f : check_assumptions(m, merged_params(m, bindings_of(params)))) out.append(to_py(to_json(f)));
        return out;
      },
      py::arg("model"), py::arg("params") = Dict{});

  mod.def(
      "ngm_r0",
      [](const PetriModel& m, const Dict& params, const std::map<std::string, std::string>& pins) {
        NgmOptions opts;
        opts.pins = pins_of(m, pins);
        NgmResult r;
        {
          py::gil_scoped_release release;
          r = ngm_r0(m, merged_params(m, bindings_of(params)), opts);
        }
        return to_py(to_json(r, m));
      },
      py::arg("model"), py::arg("params") = Dict{}, py::arg("pins") = std::map<std::string, std::string>{});

  mod.def(
      "r0",
      [](const PetriModel& m, const Dict& params) { return ngm_r0(m, merged_params(m, bindings_of(params))).r0; },
      py::arg("model"), py::arg("params") = Dict{});

  mod.def(
      "simulate",
      [](const PetriModel& m, const Dict& params, double t_end, double dt, std::optional<std::uint64_t> seed,
         double sample) {
        Bindings p = merged_params(m, bindings_of(params));
        Trajectory t;
        {
          py::gil_scoped_release release;
          if (m.kind == NetKind::Spn) {
            t = run_spn(m, p, t_end, seed.value_or(1), sample);
          } else {
            auto every = static_cast<std::size_t>(std::max(1.0, std::round(sample / dt)));
            t = run_vapn(m, p, t_end, dt, every);
          }
        }
        return trajectory_dict(t);
      },
      py::arg("model"), py::arg("params") = Dict{}, py::arg("t_end") = 100.0, py::arg("dt") = 0.1,
      py::arg("seed") = std::nullopt, py::arg("sample") = 1.0);

  mod.def(
      "attack_rate_r0",
      [](const std::vector<double>& susceptible, double n, double initial_infected) {
        Trajectory t;
        t.places = {"S"};
        for (std::size_t i = 0; i < susceptible.size(); ++i) {
          t.times.push_back(static_cast<double>(i));
          t.markings.push_back({susceptible[i]});
        }
        auto r = attack_rate_r0(t, "S", n, initial_infected);
        py::dict d;
        d["r0_hat"] = r.r0_hat;
        d["attack_rate"] = r.attack_rate;
        d["s0"] = r.s0;
        d["s_inf"] = r.s_inf;
        d["no_outbreak"] = r.no_outbreak;
        return d;
      },
      py::arg("susceptible"), py::arg("n"), py::arg("initial_infected") = 0.0);

  mod.def(
      "sweep",
      [](const std::string& id, const std::vector<std::string>& grid, std::optional<double> dt, unsigned jobs) {
        const auto& z = builtin(id);
        SweepConfig cfg = sweep_config(z);
        if (dt) cfg.dt = *dt;
        cfg.jobs = jobs;
        std::vector<GridAxis> axes;
        if (grid.empty() && z.sweep)
          for (const auto& g : z.sweep->grid) axes.push_back(parse_grid_axis(g));
        for (const auto& g : grid) axes.push_back(parse_grid_axis(g));
        SweepReport rep;
        {
          py::gil_scoped_release release;
          rep = sweep(z.model, axes, cfg);
        }
        py::list rows;
        for (const auto& r : rep.rows) {
          py::dict d;
          for (std::size_t i = 0; i < rep.params.size(); ++i) d[py::str(rep.params[i])] = r.point[i];
          d["r0_alg"] = r.r0_alg;
          d["r0_hat"] = r.r0_hat;
          d["rel_err"] = r.rel_err;
          d["error"] = r.error;
          rows.append(d);
        }
        py::dict out = to_py(sweep_summary(rep, cfg));
        out["rows"] = rows;
        return out;
      },
      py::arg("builtin"), py::arg("grid") = std::vector<std::string>{}, py::arg("dt") = std::nullopt,
      py::arg("jobs") = 1u);
}
