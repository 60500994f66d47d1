#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "evmarl/cli.hpp"
#include "evmarl/config.hpp"
#include "evmarl/core.hpp"
#include "evmarl/evidential.hpp"
#include "evmarl/io.hpp"
#include "evmarl/marlcc.hpp"
#include "evmarl/metrics.hpp"
#include "evmarl/plot.hpp"
#include "evmarl/training.hpp"

namespace py = pybind11;
using namespace evmarl;

namespace {

using Pair = std::pair<double, double>;

Interval iv(const Pair& p) { return {p.first, p.second}; }
Pair tup(const Interval& i) { return {i.start, i.end}; }

std::vector<Interval> ivs(const std::vector<Pair>& ps) {
  std::vector<Interval> out;
  for (const auto& p : ps) out.push_back(iv(p));
  return out;
}

RunConfig parse_config(const std::string& json_text) {
  return json_text.empty() ? default_config() : config_from_json(nlohmann::json::parse(json_text));
}

}  // namespace

PYBIND11_MODULE(_evmarl, m) {
  m.doc() = "Evidential multi-agent moment localization";

  m.def("tiou", [](const Pair& a, const Pair& b) { return tiou(iv(a), iv(b)); }, py::arg("a"), py::arg("b"));
  m.def("boundary_distance", &boundary_distance, py::arg("boundary"), py::arg("gt_boundary"));
  m.def("rel_loc_class", [](const Pair& region, const Pair& gt, double f0) {
    return rel_loc_class(iv(region), iv(gt), f0).joint_index;
  }, py::arg("region"), py::arg("gt"), py::arg("f0") = 0.12);
  m.def("conflict", [](const Pair& a, const Pair& b) { return conflict(iv(a), iv(b)); }, py::arg("a"),
        py::arg("b"));
  m.def("eta", [](const std::vector<Pair>& finals) { return eta(ivs(finals)); }, py::arg("finals"));
  m.def("detect_oos", [](const std::vector<Pair>& finals, double h) {
    const auto d = detect_oos(ivs(finals), h);
    return py::make_tuple(d.eta, d.verdict == Verdict::Oos);
  }, py::arg("finals"), py::arg("h"));

  m.def("scanner_window", [](int t, double step, double f0) { return tup(scanner_window(t, step, f0)); },
        py::arg("t"), py::arg("step_size") = 0.1, py::arg("f0") = 0.12);

  m.def("make_evidence", [](const std::vector<double>& e) {
    const Evidence ev = make_evidence(e);
    py::dict d;
    d["evidence"] = ev.e;
    d["alpha"] = ev.alpha;
    d["strength"] = ev.strength;
    d["uncertainty"] = ev.uncertainty;
    return d;
  }, py::arg("evidence"));
  m.def("evidential_loss", [](const std::vector<double>& e, int cls) { return evidential_loss(make_evidence(e), cls); },
        py::arg("evidence"), py::arg("true_class"));
  m.def("dirichlet_log_density", [](const std::vector<double>& p, const std::vector<double>& alpha) {
    return dirichlet_log_density(p, alpha);
  }, py::arg("p"), py::arg("alpha"));

  m.def("f_dis", &f_dis, py::arg("x"), py::arg("d_t"), py::arg("d_next"), py::arg("theta"));

  m.def("acc_at", [](const std::vector<double>& tious, double threshold) { return acc_at_tious(tious, threshold); },
        py::arg("tious"), py::arg("threshold"));
  m.def("oos_metrics", [](const std::vector<std::pair<bool, bool>>& decisions) {
    const auto s = oos_metrics(decisions);
    return py::make_tuple(s.accuracy, s.f1);
  }, py::arg("decisions"));
  m.def("recall_at_k", [](const std::vector<std::vector<std::string>>& rankings, const std::vector<std::string>& truth,
                          int k) { return recall_at_k(rankings, truth, k); },
        py::arg("rankings"), py::arg("truth"), py::arg("k"));
  m.def("calibrate_threshold", [](const std::vector<double>& etas, const std::vector<bool>& labels,
                                  const std::string& objective) {
    auto flags = std::make_unique<bool[]>(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) flags[i] = labels[i];
    const auto c = calibrate_threshold(etas, std::span<const bool>(flags.get(), labels.size()),
                                       oos_objective_from_string(objective));
    return py::make_tuple(c.h, c.score, c.degenerate);
  }, py::arg("etas"), py::arg("is_oos"), py::arg("objective") = "f1");

  m.def("default_config_json", [] { return config_to_json(default_config()).dump(); });
  m.def("normalize_config_json", [](const std::string& text) { return config_to_json(parse_config(text)).dump(); },
        py::arg("config_json"));
  m.def("generate_dataset_jsonl", [](const std::string& config_json) {
    const RunConfig cfg = parse_config(config_json);
    const Dataset ds = generate_dataset(cfg.data);
    py::dict d;
    d["train"] = episodes_to_jsonl(ds.train);
    d["val"] = episodes_to_jsonl(ds.val);
    d["test"] = episodes_to_jsonl(ds.test);
    return d;
  }, py::arg("config_json") = "");

  m.def("render_2dstb", [](const std::vector<std::tuple<std::string, std::vector<Pair>>>& traces,
                           const std::optional<Pair>& gt) {
    std::vector<PlotTrace> pts;
    for (const auto& [label, outputs] : traces) {
      PlotTrace p;
      p.label = label;
      p.outputs = ivs(outputs);
      if (p.outputs.empty()) throw std::invalid_argument("trace " + label + " has no steps");
      p.final = p.outputs.back();
      pts.push_back(std::move(p));
    }
    return render_2dstb(pts, gt ? std::optional<Interval>(iv(*gt)) : std::nullopt);
  }, py::arg("traces"), py::arg("gt") = py::none());

  m.def("run_cli", [](const std::vector<std::string>& args) {
    py::gil_scoped_release release;
    return run_cli(args);
  }, py::arg("args"));
}
