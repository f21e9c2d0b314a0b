#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>

#include "hdinf/data.hpp"
#include "hdinf/debias.hpp"
#include "hdinf/error.hpp"
#include "hdinf/glm_family.hpp"
#include "hdinf/inference.hpp"
#include "hdinf/lasso.hpp"
#include "hdinf/simulate.hpp"

#define STRINGIFY(x) #x
#define MACRO_STRINGIFY(x) STRINGIFY(x)

namespace py = pybind11;
using namespace hdinf;

namespace {

GlmFamily family_arg(const std::string& name) { return parse_family(name); }

std::vector<double> default_grid(const Dataset& d, GlmFamily f, int n_lambda, double ratio) {
    return lambda_path(lambda_max(d, f), n_lambda, ratio);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Debiased lasso inference for generalized linear models";

    auto base = py::register_exception<Error>(m, "HdinfError", PyExc_RuntimeError);
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<DataError>(m, "DataError", base.ptr());
    auto numerical = py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
    py::register_exception<SingularHessianError>(m, "SingularHessianError", numerical.ptr());
    py::register_exception<ConvergenceError>(m, "ConvergenceError", numerical.ptr());

    py::class_<ColumnScale>(m, "ColumnScale")
        .def_readonly("center", &ColumnScale::center)
        .def_readonly("scale", &ColumnScale::scale);

    py::class_<Dataset>(m, "Dataset")
        .def(py::init([](const Vector& y, const Matrix& x, std::vector<std::string> names) {
                 return make_dataset(y, x, std::move(names));
             }),
             py::arg("y"), py::arg("x"), py::arg("names") = std::vector<std::string>{},
             "Response and covariates; the intercept column is prepended.")
        .def_readonly("y", &Dataset::y)
        .def_readonly("X", &Dataset::X)
        .def_readonly("col_names", &Dataset::col_names)
        .def_readonly("standardized", &Dataset::standardized)
        .def_property_readonly("n", &Dataset::n)
        .def_property_readonly("p", &Dataset::p);

    py::class_<CoefMap>(m, "CoefMap")
        .def("transform", &CoefMap::transform)
        .def("to_original", &CoefMap::to_original)
        .def("to_standardized", &CoefMap::to_standardized);

    m.def("standardize", &standardize, py::arg("data"),
          "Centers and scales the covariates; returns (dataset, coef_map).");
    m.def("identity_map", &identity_map, py::arg("data"));
    m.def(
        "load_csv",
        [](const std::string& path, const std::string& response, std::vector<std::string> drop) {
            return load_csv(path, CsvOptions{response, std::move(drop)});
        },
        py::arg("path"), py::arg("response"), py::arg("drop") = std::vector<std::string>{});

    py::class_<LassoFit>(m, "LassoFit")
        .def_readonly("xi_hat", &LassoFit::xi_hat)
        .def_readonly("lambda_", &LassoFit::lambda)
        .def_readonly("n_iter", &LassoFit::n_iter)
        .def_readonly("kkt_residual", &LassoFit::kkt_residual)
        .def_readonly("converged", &LassoFit::converged)
        .def_readonly("objective", &LassoFit::objective)
        .def_readonly("objective_trace", &LassoFit::objective_trace);

    py::class_<CvResult>(m, "CvResult")
        .def_readonly("lambda_grid", &CvResult::lambda_grid)
        .def_readonly("mean_deviance", &CvResult::mean_deviance)
        .def_readonly("se_deviance", &CvResult::se_deviance)
        .def_readonly("lambda_min", &CvResult::lambda_min)
        .def_readonly("fold_assignment", &CvResult::fold_assignment);

    m.def(
        "lambda_max", [](const Dataset& d, const std::string& f) { return lambda_max(d, family_arg(f)); },
        py::arg("data"), py::arg("family"));
    m.def("lambda_path", &lambda_path, py::arg("lmax"), py::arg("n_lambda") = 100, py::arg("ratio") = 1e-4);
    m.def(
        "fit_lasso",
        [](const Dataset& d, const std::string& f, double lambda) { return fit_lasso(d, family_arg(f), lambda); },
        py::arg("data"), py::arg("family"), py::arg("lambda_"), py::call_guard<py::gil_scoped_release>());
    m.def(
        "cross_validate",
        [](const Dataset& d, const std::string& f, int n_folds, std::optional<std::vector<double>> grid,
           std::uint64_t seed, int workers) {
            const GlmFamily fam = family_arg(f);
            const std::vector<double> g = grid ? *grid : default_grid(d, fam, 100, 1e-4);
            return cross_validate(d, fam, n_folds, g, seed, {}, workers);
        },
        py::arg("data"), py::arg("family"), py::arg("n_folds") = 10, py::arg("grid") = py::none(),
        py::arg("seed") = 1, py::arg("workers") = 1, py::call_guard<py::gil_scoped_release>());

    py::class_<DebiasedFit>(m, "DebiasedFit")
        .def_readonly("b_hat", &DebiasedFit::b_hat)
        .def_readonly("theta_hat", &DebiasedFit::theta_hat)
        .def_readonly("variance", &DebiasedFit::variance)
        .def_readonly("mu", &DebiasedFit::mu)
        .def_readonly("n", &DebiasedFit::n)
        .def_readonly("xi_init", &DebiasedFit::xi_init)
        .def_readonly("lambda_", &DebiasedFit::lambda)
        .def_readonly("condition_estimate", &DebiasedFit::condition_estimate)
        .def_property_readonly("method", &DebiasedFit::method_tag);

    m.def(
        "refine_debias",
        [](const Dataset& d, const std::string& f, const LassoFit& fit) {
            return refine_debias(d, family_arg(f), fit);
        },
        py::arg("data"), py::arg("family"), py::arg("fit"));
    m.def(
        "qp_debias",
        [](const Dataset& d, const std::string& f, const LassoFit& fit, double mu) {
            return qp_debias_fit(d, family_arg(f), fit, mu);
        },
        py::arg("data"), py::arg("family"), py::arg("fit"), py::arg("mu"),
        py::call_guard<py::gil_scoped_release>());
    m.def(
        "orig_debias",
        [](const Dataset& d, const std::string& f, const LassoFit& fit, std::uint64_t seed, int workers) {
            const GlmFamily fam = family_arg(f);
            NodewiseOptions options;
            options.workers = workers;
            const NodewiseResult nw = nodewise_theta(d, fam, fit, seed, options);
            return orig_debias(d, fam, fit, nw.theta);
        },
        py::arg("data"), py::arg("family"), py::arg("fit"), py::arg("seed") = 1, py::arg("workers") = 1,
        py::call_guard<py::gil_scoped_release>());
    m.def("to_original_scale", &to_original_scale, py::arg("fit"), py::arg("coef_map"));

    py::class_<CiResult>(m, "CiResult")
        .def_readonly("estimate", &CiResult::estimate)
        .def_readonly("se", &CiResult::se)
        .def_readonly("lower", &CiResult::lower)
        .def_readonly("upper", &CiResult::upper)
        .def_readonly("level", &CiResult::level);

    py::class_<RegionResult>(m, "RegionResult")
        .def_readonly("center", &RegionResult::center)
        .def_readonly("shape", &RegionResult::shape)
        .def_readonly("threshold", &RegionResult::threshold)
        .def_readonly("level", &RegionResult::level)
        .def("contains", &RegionResult::contains);

    py::class_<WaldTestResult>(m, "WaldTestResult")
        .def_readonly("z", &WaldTestResult::z)
        .def_readonly("p_value", &WaldTestResult::p_value);

    m.def("wald_ci", py::overload_cast<const DebiasedFit&, Index, double>(&wald_ci), py::arg("fit"),
          py::arg("j"), py::arg("level") = 0.95);
    m.def("contrast_ci", py::overload_cast<const DebiasedFit&, const Vector&, double>(&wald_ci),
          py::arg("fit"), py::arg("alpha"), py::arg("level") = 0.95);
    m.def("confidence_region", &confidence_region, py::arg("fit"), py::arg("contrasts"),
          py::arg("level") = 0.95);
    m.def("wald_test", &wald_test, py::arg("fit"), py::arg("alpha"), py::arg("null_value") = 0.0);

    m.def(
        "simulate",
        [](Index n, Index p, const std::string& family, const std::string& structure, double rho,
           std::vector<double> beta1_grid, int n_replicates, std::vector<std::string> methods,
           std::uint64_t seed, int workers) {
            SimConfig c;
            c.n = n;
            c.p = p;
            c.family = family_arg(family);
            c.structure.kind = structure == "ar1"  ? CovarianceKind::ar1
                               : structure == "cs" ? CovarianceKind::cs
                               : structure == "identity"
                                   ? CovarianceKind::identity
                                   : throw DomainError("unknown covariance structure: " + structure);
            c.structure.rho = rho;
            c.beta1_grid = std::move(beta1_grid);
            c.n_replicates = n_replicates;
            c.methods.clear();
            for (const auto& tag : methods) c.methods.push_back(SimMethod::parse(tag));
            c.seed = seed;
            SimSummary s;
            {
                py::gil_scoped_release release;
                s = run_replicates(c, workers);
            }
            py::list rows;
            for (const auto& r : s.rows) {
                py::dict row;
                row["beta1"] = r.beta1;
                row["method"] = r.method;
                row["bias"] = r.mean_bias;
                row["coverage"] = r.coverage;
                row["emp_se"] = r.empirical_se ? py::cast(*r.empirical_se) : py::none();
                row["model_se"] = r.model_se;
                row["n_failed"] = r.n_failed;
                rows.append(row);
            }
            return rows;
        },
        py::arg("n"), py::arg("p"), py::arg("family") = "binomial", py::arg("structure") = "ar1",
        py::arg("rho") = 0.7, py::arg("beta1_grid") = std::vector<double>{0.0}, py::arg("n_replicates") = 200,
        py::arg("methods") = std::vector<std::string>{"ORIG-DS", "REF-DS"}, py::arg("seed") = 1,
        py::arg("workers") = 1, "Coverage simulation; returns one dict per (beta1, method) cell.");

#ifdef VERSION_INFO
    m.attr("__version__") = MACRO_STRINGIFY(VERSION_INFO);
#else
    m.attr("__version__") = "dev";
#endif
}
