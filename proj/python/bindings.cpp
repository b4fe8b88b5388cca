#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "calagent/eval.hpp"
#include "calagent/service.hpp"
#include "calagent/supervisor.hpp"
#include "calagent/temporal.hpp"

namespace py = pybind11;
using namespace calagent;

namespace {

py::object to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_py(const py::handle& obj) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

std::shared_ptr<const ReferenceClock> make_clock(const std::string& now, const std::string& tz) {
  const auto t = parse_rfc3339(now);
  if (!t) throw Error(ErrorCode::InvalidArgument, "now must be RFC 3339: " + now);
  return std::make_shared<FixedClock>(*t, TimeZone::load(tz));
}

Instant instant_arg(const std::string& text) {
  const auto t = parse_rfc3339(text);
  if (!t) throw Error(ErrorCode::InvalidArgument, "expected RFC 3339, got '" + text + "'");
  return *t;
}

}  // namespace

PYBIND11_MODULE(_calagent, m) {
  m.doc() = "Bindings for the calagent core library";

  static py::exception<Error> error_type(m, "CalagentError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = py::handle(error_type.ptr())(std::string(to_string(e.code())), std::string(e.what()));
      PyErr_SetObject(error_type.ptr(), inst.ptr());
    }
  });

  m.def(
      "parse_temporal",
      [](const std::string& text, const std::string& now, const std::string& tz) {
        const auto clock = make_clock(now, tz);
        const auto r = parse_temporal(text, *clock);
        nlohmann::json out{{"start", format_in_zone(r.start, clock->zone())},
                           {"end", r.end ? nlohmann::json(format_in_zone(*r.end, clock->zone())) : nlohmann::json()},
                           {"grain", std::string(to_string(r.grain))},
                           {"zone", r.zone}};
        return to_py(out);
      },
      py::arg("text"), py::arg("now"), py::arg("tz") = "UTC");

  m.def(
      "decide",
      [](const py::list& transcript, const std::string& now, const std::string& tz) {
        const auto clock = make_clock(now, tz);
        GraphState state;
        for (const auto& item : transcript) {
          const auto msg = from_py(item);
          state.transcript.push_back(Message{msg.at("role"), msg.at("content"), clock->now()});
        }
        const Supervisor sup(std::make_shared<DeterministicNlu>(), clock);
        const auto d = sup.decide(state);
        return to_py(nlohmann::json::parse(to_wire(d.decision)));
      },
      py::arg("transcript"), py::arg("now"), py::arg("tz") = "UTC",
      "Routing decision of the deterministic supervisor for a transcript of {role, content} dicts.");

  m.def(
      "normalize_state", [](const std::string& text) { return serialize(deserialize(text)); }, py::arg("text"),
      "Parses and re-serializes a GraphState document.");

  m.def(
      "run_eval",
      [](const std::string& corpus, const std::string& now, const std::string& tz) {
        EvalOptions opts;
        opts.fixed_now = now;
        opts.time_zone = tz;
        EvalReport report;
        {
          py::gil_scoped_release release;
          report = run_corpus(load_corpus(corpus), opts);
        }
        auto out = to_json(report);
        out["markdown"] = render_markdown(report);
        return to_py(out);
      },
      py::arg("corpus"), py::arg("now") = "2025-04-28T13:00:00Z", py::arg("tz") = "America/New_York");

  py::class_<AssistantService, std::shared_ptr<AssistantService>>(m, "Service")
      .def(py::init([](const py::dict& config) {
             ServiceConfig c = config_from_json(from_py(config));
             if (!config.contains("background_tasks")) c.background_tasks = false;
             c.validate();
             return std::make_shared<AssistantService>(c);
           }),
           py::arg("config") = py::dict())
      .def("create_session", [](AssistantService& s) { return to_py(to_json(s.create_session())); })
      .def(
          "post_message",
          [](AssistantService& s, const std::string& id, const std::string& text) {
            TurnResult t;
            {
              py::gil_scoped_release release;
              t = s.post_message(id, text);
            }
            return to_py(to_json(t));
          },
          py::arg("session_id"), py::arg("text"))
      .def("get_session",
           [](AssistantService& s, const std::string& id) -> py::object {
             auto r = s.get_session(id);
             return r ? to_py(to_json(*r)) : py::none();
           })
      .def("delete_session", &AssistantService::delete_session)
      .def(
          "list_events",
          [](AssistantService& s, const std::string& start, const std::string& end) {
            nlohmann::json out = nlohmann::json::array();
            for (const auto& e : s.list_events(instant_arg(start), instant_arg(end))) out.push_back(to_json(e));
            return to_py(out);
          },
          py::arg("start"), py::arg("end"))
      .def("metrics", [](const AssistantService& s) { return to_py(to_json(s.metrics())); })
      .def("healthy", &AssistantService::healthy)
      .def("kill_instance", &AssistantService::kill_instance)
      .def("revive_instance", &AssistantService::revive_instance);
}
