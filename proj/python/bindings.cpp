// Python bindings for the dcot core: metrics, templates, voting, selection and the CLI.
#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dcot/cli.hpp"
#include "dcot/ensemble.hpp"
#include "dcot/experiments.hpp"
#include "dcot/metrics.hpp"
#include "dcot/template.hpp"

namespace py = pybind11;
using namespace dcot;

namespace {

std::vector<Option> to_options(const std::vector<std::pair<std::string, std::string>>& pairs) {
    std::vector<Option> out;
    for (const auto& [label, body] : pairs) out.push_back({label, body});
    return out;
}

std::optional<std::vector<Option>> maybe_options(
    const std::optional<std::vector<std::pair<std::string, std::string>>>& pairs) {
    if (!pairs) return std::nullopt;
    return to_options(*pairs);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "DCoT toolkit core";

    py::register_exception<metrics::ExtractionError>(m, "ExtractionError", PyExc_ValueError);
    py::register_exception<ensemble::EnsembleError>(m, "EnsembleError", PyExc_RuntimeError);

    m.def(
        "normalize", [](std::string_view s) { return metrics::normalize(s).normalized; }, py::arg("text"),
        "SQuAD-style normalization; numbers are canonicalized.");
    m.def(
        "squad_scores",
        [](std::string_view pred, std::string_view gold) {
            auto s = metrics::squad_scores(pred, gold);
            return py::make_tuple(s.em, s.f1);
        },
        py::arg("prediction"), py::arg("gold"), "(exact match, token F1)");
    m.def(
        "macro_f1",
        [](const std::vector<std::string>& preds, const std::vector<std::string>& golds,
           const std::vector<std::string>& labels) { return metrics::macro_f1(preds, golds, labels).value; },
        py::arg("predictions"), py::arg("golds"), py::arg("labels"));
    m.def("extract_number", &metrics::extract_number, py::arg("text"));
    m.def(
        "extract_choice",
        [](std::string_view answer, const std::vector<std::pair<std::string, std::string>>& options) {
            auto o = to_options(options);
            return metrics::extract_choice(answer, o);
        },
        py::arg("answer"), py::arg("options"), "options as [(label, body), ...]");

    m.def(
        "render_dcot_prompt",
        [](std::string question, std::optional<std::vector<std::pair<std::string, std::string>>> options,
           std::optional<std::string> context, int k) {
            return templates::render_dcot_prompt({std::move(question), maybe_options(options), std::move(context), k});
        },
        py::arg("question"), py::arg("options") = py::none(), py::arg("context") = py::none(), py::arg("k") = 1);
    m.def(
        "render_cot_prompt",
        [](std::string_view question, std::optional<std::vector<std::pair<std::string, std::string>>> options,
           std::optional<std::string> context) {
            return templates::render_cot_prompt(question, maybe_options(options), context);
        },
        py::arg("question"), py::arg("options") = py::none(), py::arg("context") = py::none());
    m.def(
        "render_dcot_target",
        [](std::vector<std::string> cots, std::string final_answer) {
            return templates::render_dcot_target({std::move(cots), std::move(final_answer)});
        },
        py::arg("cots"), py::arg("final_answer"));
    m.def(
        "parse_dcot_response",
        [](std::string_view text) {
            auto p = templates::parse_dcot_response(text);
            py::dict d;
            d["cots"] = p.cots;
            d["final_answer"] = p.final_answer;
            d["warnings"] = p.warnings;
            return d;
        },
        py::arg("text"), "dict with cots, final_answer (or None) and warnings");

    m.def(
        "majority_vote", [](const std::vector<std::string>& a) { return ensemble::majority_vote(a); },
        py::arg("answers"));
    m.def(
        "classify_pattern",
        [](const std::vector<std::optional<std::string>>& chains, std::optional<std::string> final_answer,
           const std::string& gold) { return experiments::classify_pattern(chains, final_answer, gold).row(); },
        py::arg("chain_answers"), py::arg("final_answer"), py::arg("gold"), "e.g. 'AAB → B (o)'");
    m.def(
        "select_best_k", [](const std::map<int, double>& means) { return experiments::select_best_k(means); },
        py::arg("seed_means"));
    m.def(
        "summarize",
        [](const std::vector<double>& values) {
            auto s = experiments::summarize(values);
            return py::make_tuple(s.mean, s.stddev, experiments::format_cell(s));
        },
        py::arg("values"), "(mean, sample std or None, formatted cell)");

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = cli::run_cli(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the dcot command line; returns (exit code, stdout, stderr).");
}
