#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "hdinf/csv.hpp"
#include "hdinf/data.hpp"
#include "hdinf/debias.hpp"
#include "hdinf/error.hpp"
#include "hdinf/inference.hpp"
#include "hdinf/lasso.hpp"

#ifndef HDINF_VERSION
#define HDINF_VERSION "0.0.0"
#endif

namespace hdinf::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << text;
}

json load_json(const fs::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw DomainError("invalid JSON in '" + path.string() + "': " + e.what());
    }
}

json vector_json(const Vector& v) {
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) rows.push_back(vector_json(m.row(i).transpose()));
    return rows;
}

Vector json_vector(const json& j, const char* what) {
    if (!j.is_array()) throw DomainError(std::string("'") + what + "' must be an array of numbers");
    Vector v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
    return v;
}

Matrix json_matrix(const json& j, Index k, const char* what) {
    if (!j.is_array() || static_cast<Index>(j.size()) != k) {
        throw DomainError(std::string("'") + what + "' must be a square matrix matching b_hat");
    }
    Matrix m(k, k);
    for (Index i = 0; i < k; ++i) {
        const Vector row = json_vector(j[static_cast<std::size_t>(i)], what);
        if (row.size() != k) throw DomainError(std::string("'") + what + "' has a ragged row");
        m.row(i) = row.transpose();
    }
    return m;
}

std::string version_string() {
    return std::string("hdinf ") + HDINF_VERSION + " (output schema " + std::to_string(kSchemaVersion) + ")";
}

/// Applies `key` from the config file when the flag was not given.
template <class T>
void merge(const CLI::Option* flag, const json& cfg, const char* key, T& target) {
    if (flag != nullptr && flag->count() > 0) return;
    if (cfg.contains(key)) target = cfg.at(key).get<T>();
}

void reject_unknown(const json& cfg, std::initializer_list<const char*> allowed, const char* where) {
    if (!cfg.is_object()) throw DomainError(std::string(where) + " config must be a JSON object");
    for (const auto& [key, value] : cfg.items()) {
        const bool ok = std::any_of(allowed.begin(), allowed.end(),
                                    [&](const char* a) { return key == a; });
        if (!ok) throw DomainError(std::string("unknown ") + where + " config key '" + key + "'");
    }
}

json manifest(const std::string& command, const json& resolved, std::uint64_t seed,
              const std::string& input_hash, Clock::time_point start) {
    json m;
    m["subcommand"] = command;
    m["config"] = resolved;
    m["seed"] = seed;
    m["version"] = HDINF_VERSION;
    m["schema"] = kSchemaVersion;
    m["input_hash"] = input_hash;
    m["duration_seconds"] = std::chrono::duration<double>(Clock::now() - start).count();
    return m;
}

// ---------------------------------------------------------------------------
// fit / debias

struct ModelOptions {
    std::string data;
    std::string response;
    std::vector<std::string> drop;
    bool no_standardize = false;
    std::string family = "gaussian";
    std::optional<double> lambda;
    int cv = 10;
    int n_lambda = 100;
    double lambda_ratio = 1e-4;
    std::uint64_t seed = 1;
    std::string out;
    std::string config;
    // debias only
    std::string method = "ref";
    double mu = 0.0;
    int nodewise_cv = 5;
    double level = 0.95;
};

struct ModelFlags {
    CLI::Option* data = nullptr;
    CLI::Option* response = nullptr;
    CLI::Option* drop = nullptr;
    CLI::Option* no_standardize = nullptr;
    CLI::Option* family = nullptr;
    CLI::Option* lambda = nullptr;
    CLI::Option* cv = nullptr;
    CLI::Option* n_lambda = nullptr;
    CLI::Option* lambda_ratio = nullptr;
    CLI::Option* seed = nullptr;
    CLI::Option* out = nullptr;
    CLI::Option* method = nullptr;
    CLI::Option* mu = nullptr;
    CLI::Option* nodewise_cv = nullptr;
    CLI::Option* level = nullptr;
};

ModelFlags add_model_flags(CLI::App* sub, ModelOptions& o, bool debias) {
    ModelFlags f;
    f.data = sub->add_option("--data", o.data, "CSV file with a header row");
    f.response = sub->add_option("--response", o.response, "Response column name");
    f.drop = sub->add_option("--drop", o.drop, "Columns to ignore")->delimiter(',');
    f.no_standardize = sub->add_flag("--no-standardize", o.no_standardize,
                                     "Fit on the raw covariate scale");
    f.family = sub->add_option("--family", o.family, "gaussian, binomial or poisson");
    f.lambda = sub->add_option("--lambda", o.lambda, "Fixed penalty (skips cross-validation)");
    f.cv = sub->add_option("--cv", o.cv, "Cross-validation folds for lambda");
    f.n_lambda = sub->add_option("--n-lambda", o.n_lambda, "Length of the lambda grid");
    f.lambda_ratio = sub->add_option("--lambda-ratio", o.lambda_ratio, "Smallest/largest lambda");
    f.seed = sub->add_option("--seed", o.seed, "Seed for fold assignment");
    f.out = sub->add_option("--out", o.out, "Output JSON file (default: standard output)");
    sub->add_option("--config", o.config, "JSON file with defaults for these options");
    if (debias) {
        f.method = sub->add_option("--method", o.method, "ref, orig or qp")
                       ->check(CLI::IsMember({"ref", "orig", "qp"}));
        f.mu = sub->add_option("--mu", o.mu, "Constraint level for --method qp");
        f.nodewise_cv = sub->add_option("--nodewise-cv", o.nodewise_cv,
                                        "Folds for node-wise lambdas (--method orig)");
        f.level = sub->add_option("--level", o.level, "Confidence level of the reported table");
    }
    return f;
}

void resolve_model_options(ModelOptions& o, const ModelFlags& f, bool debias) {
    if (!o.config.empty()) {
        const json cfg = load_json(o.config);
        if (debias) {
            reject_unknown(cfg,
                           {"data", "response", "drop", "standardize", "family", "lambda", "cv",
                            "n_lambda", "lambda_ratio", "seed", "out", "method", "mu",
                            "nodewise_cv", "level"},
                           "debias");
        } else {
            reject_unknown(cfg,
                           {"data", "response", "drop", "standardize", "family", "lambda", "cv",
                            "n_lambda", "lambda_ratio", "seed", "out"},
                           "fit");
        }
        merge(f.data, cfg, "data", o.data);
        merge(f.response, cfg, "response", o.response);
        merge(f.drop, cfg, "drop", o.drop);
        if (f.no_standardize->count() == 0 && cfg.contains("standardize")) {
            o.no_standardize = !cfg.at("standardize").get<bool>();
        }
        merge(f.family, cfg, "family", o.family);
        if (f.lambda->count() == 0 && cfg.contains("lambda")) o.lambda = cfg.at("lambda").get<double>();
        merge(f.cv, cfg, "cv", o.cv);
        merge(f.n_lambda, cfg, "n_lambda", o.n_lambda);
        merge(f.lambda_ratio, cfg, "lambda_ratio", o.lambda_ratio);
        merge(f.seed, cfg, "seed", o.seed);
        merge(f.out, cfg, "out", o.out);
        if (debias) {
            merge(f.method, cfg, "method", o.method);
            merge(f.mu, cfg, "mu", o.mu);
            merge(f.nodewise_cv, cfg, "nodewise_cv", o.nodewise_cv);
            merge(f.level, cfg, "level", o.level);
        }
    }
    if (o.data.empty()) throw DomainError("missing required option --data");
    if (o.response.empty()) throw DomainError("missing required option --response");
    if (o.cv < 2) throw DomainError("--cv must be at least 2");
    if (debias && o.method != "ref" && o.method != "orig" && o.method != "qp") {
        throw DomainError("--method must be one of ref, orig, qp");
    }
    if (debias && !(o.level > 0.0 && o.level < 1.0)) throw DomainError("--level must lie in (0, 1)");
}

json resolved_json(const ModelOptions& o, bool debias) {
    json j;
    j["data"] = o.data;
    j["response"] = o.response;
    j["drop"] = o.drop;
    j["standardize"] = !o.no_standardize;
    j["family"] = o.family;
    j["lambda"] = o.lambda ? json(*o.lambda) : json(nullptr);
    j["cv"] = o.cv;
    j["n_lambda"] = o.n_lambda;
    j["lambda_ratio"] = o.lambda_ratio;
    j["seed"] = o.seed;
    if (debias) {
        j["method"] = o.method;
        j["mu"] = o.mu;
        j["nodewise_cv"] = o.nodewise_cv;
        j["level"] = o.level;
    }
    return j;
}

struct PreparedFit {
    Dataset raw;
    Dataset data;  ///< the scale the model is fitted on
    CoefMap map;
    GlmFamily family = gaussian_family;
    LassoFit fit;
    std::optional<CvResult> cv;
    std::string input_hash;
};

PreparedFit prepare(const ModelOptions& o) {
    PreparedFit p;
    p.family = parse_family(o.family);
    const std::string text = read_file(o.data);
    p.input_hash = content_hash(text);
    p.raw = parse_csv_dataset(text, CsvOptions{o.response, o.drop});
    validate_response(p.raw, p.family);
    if (o.no_standardize) {
        p.data = p.raw;
        p.map = identity_map(p.raw);
    } else {
        std::tie(p.data, p.map) = standardize(p.raw);
    }

    if (o.lambda) {
        p.fit = fit_lasso(p.data, p.family, *o.lambda);
    } else {
        const auto grid = lambda_path(lambda_max(p.data, p.family), o.n_lambda, o.lambda_ratio);
        p.cv = cross_validate(p.data, p.family, o.cv, grid, o.seed);
        const auto stop = std::find(grid.begin(), grid.end(), p.cv->lambda_min);
        const std::size_t count = static_cast<std::size_t>(stop - grid.begin()) + 1;
        auto fits = fit_lasso_path(p.data, p.family, std::span<const double>(grid.data(), count));
        p.fit = std::move(fits.back());
    }
    if (!p.fit.converged) {
        throw ConvergenceError("lasso did not converge at lambda = " + csv::format_double(p.fit.lambda),
                               p.fit.xi_hat);
    }
    return p;
}

json cv_json(const CvResult& cv, int folds) {
    json j;
    j["folds"] = folds;
    j["lambda_min"] = cv.lambda_min;
    j["lambda_grid"] = cv.lambda_grid;
    j["mean_deviance"] = cv.mean_deviance;
    j["se_deviance"] = cv.se_deviance;
    return j;
}

void emit(const std::string& path, const json& j, std::ostream& out) {
    if (path.empty()) {
        out << j.dump(2) << '\n';
    } else {
        write_file(path, j.dump(2) + "\n");
    }
}

int cmd_fit(const ModelOptions& o, std::ostream& out) {
    const auto start = Clock::now();
    const PreparedFit p = prepare(o);
    const Vector xi = p.map.to_original(p.fit.xi_hat);

    json j;
    j["command"] = "fit";
    j["schema"] = kSchemaVersion;
    j["family"] = p.family.name();
    j["lambda"] = p.fit.lambda;
    j["lambda_source"] = o.lambda ? "user" : "cv";
    j["n"] = p.data.n();
    j["p"] = p.data.p();
    j["names"] = p.data.col_names;
    j["xi_hat"] = vector_json(xi);
    json coefs = json::array();
    for (Index k = 0; k < xi.size(); ++k) {
        coefs.push_back({{"name", p.data.col_names[static_cast<std::size_t>(k)]}, {"estimate", xi(k)}});
    }
    j["coefficients"] = coefs;
    j["diagnostics"] = {{"kkt_residual", p.fit.kkt_residual},
                        {"iterations", p.fit.n_iter},
                        {"converged", p.fit.converged},
                        {"objective", p.fit.objective}};
    if (p.cv) j["cv"] = cv_json(*p.cv, o.cv);
    j["manifest"] = manifest("fit", resolved_json(o, false), o.seed, p.input_hash, start);
    emit(o.out, j, out);
    return kOk;
}

json ci_row(const std::string& name, const CiResult& ci, double p_value) {
    return {{"coef", name}, {"est", ci.estimate}, {"se", ci.se},
            {"lower", ci.lower}, {"upper", ci.upper}, {"p", p_value}};
}

int cmd_debias(const ModelOptions& o, std::ostream& out) {
    const auto start = Clock::now();
    const PreparedFit p = prepare(o);

    DebiasedFit db;
    json extra;
    if (o.method == "ref") {
        db = refine_debias(p.data, p.family, p.fit);
    } else if (o.method == "qp") {
        db = qp_debias_fit(p.data, p.family, p.fit, o.mu);
    } else {
        NodewiseOptions nw;
        nw.n_folds = o.nodewise_cv;
        nw.workers = std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
        const NodewiseResult theta = nodewise_theta(p.data, p.family, p.fit, o.seed, nw);
        db = orig_debias(p.data, p.family, p.fit, theta.theta);
        extra["nodewise_lambdas"] = vector_json(theta.lambdas);
    }
    db = to_original_scale(db, p.map);

    json j;
    j["command"] = "debias";
    j["schema"] = kSchemaVersion;
    j["family"] = p.family.name();
    j["method"] = db.method_tag();
    j["mu"] = db.mu;
    j["lambda"] = p.fit.lambda;
    j["lambda_source"] = o.lambda ? "user" : "cv";
    j["n"] = db.n;
    j["p"] = p.data.p();
    j["level"] = o.level;
    j["names"] = p.data.col_names;
    j["b_hat"] = vector_json(db.b_hat);
    j["xi_init"] = vector_json(db.xi_init);
    j["variance"] = matrix_json(db.variance);
    Vector se(db.b_hat.size());
    json table = json::array();
    for (Index k = 0; k < db.b_hat.size(); ++k) {
        const CiResult ci = wald_ci(db, k, o.level);
        se(k) = ci.se;
        const WaldTestResult t = wald_test(db, Vector::Unit(db.b_hat.size(), k), 0.0);
        table.push_back(ci_row(p.data.col_names[static_cast<std::size_t>(k)], ci, t.p_value));
    }
    j["se"] = vector_json(se);
    j["table"] = table;
    j["diagnostics"] = {{"kkt_residual", p.fit.kkt_residual},
                        {"condition_estimate", db.condition_estimate},
                        {"lasso_iterations", p.fit.n_iter}};
    if (p.cv) j["cv"] = cv_json(*p.cv, o.cv);
    for (const auto& [k, v] : extra.items()) j[k] = v;
    j["manifest"] = manifest("debias", resolved_json(o, true), o.seed, p.input_hash, start);
    emit(o.out, j, out);
    return kOk;
}

// ---------------------------------------------------------------------------
// ci

struct CiOptions {
    std::string fit;
    std::string contrast;
    std::string coef;
    double level = 0.95;
    std::string out;
};

struct LoadedFit {
    DebiasedFit fit;
    std::vector<std::string> names;
};

LoadedFit load_fit(const std::string& path) {
    const json j = load_json(path);
    for (const char* key : {"b_hat", "variance", "n"}) {
        if (!j.contains(key)) {
            throw DomainError("'" + path + "' lacks '" + key + "'; pass the output of the debias command");
        }
    }
    LoadedFit l;
    l.fit.b_hat = json_vector(j.at("b_hat"), "b_hat");
    const Index k = l.fit.b_hat.size();
    l.fit.variance = json_matrix(j.at("variance"), k, "variance");
    l.fit.theta_hat = l.fit.variance;
    l.fit.n = j.at("n").get<Index>();
    if (l.fit.n < 1) throw DomainError("'n' must be positive");
    l.fit.xi_init = j.contains("xi_init") ? json_vector(j.at("xi_init"), "xi_init") : l.fit.b_hat;
    if (j.contains("names")) {
        l.names = j.at("names").get<std::vector<std::string>>();
    } else {
        for (Index c = 0; c < k; ++c) l.names.push_back(c == 0 ? "(Intercept)" : "x" + std::to_string(c));
    }
    if (static_cast<Index>(l.names.size()) != k) throw DomainError("'names' does not match b_hat");
    return l;
}

Vector parse_contrast(const std::string& arg, Index k) {
    std::string row = arg;
    if (fs::is_regular_file(arg)) {
        const auto rows = csv::parse(read_file(arg));
        if (rows.empty()) throw DomainError("contrast file '" + arg + "' is empty");
        // A header row is allowed; take the last row as the contrast.
        const auto& last = rows.back();
        std::ostringstream joined;
        for (std::size_t c = 0; c < last.size(); ++c) joined << (c ? "," : "") << last[c];
        row = joined.str();
    }
    const auto cells = csv::parse(row);
    if (cells.size() != 1) throw DomainError("--contrast must be a single CSV row");
    if (static_cast<Index>(cells[0].size()) != k) {
        throw DomainError("--contrast has " + std::to_string(cells[0].size()) + " entries; expected " +
                          std::to_string(k));
    }
    Vector alpha(k);
    for (Index c = 0; c < k; ++c) {
        const std::string& cell = cells[0][static_cast<std::size_t>(c)];
        char* end = nullptr;
        alpha(c) = std::strtod(cell.c_str(), &end);
        if (cell.empty() || end != cell.c_str() + cell.size()) {
            throw DomainError("--contrast entry '" + cell + "' is not a number");
        }
    }
    return alpha;
}

Index parse_coef(const std::string& arg, const std::vector<std::string>& names) {
    const auto it = std::find(names.begin(), names.end(), arg);
    if (it != names.end()) return static_cast<Index>(it - names.begin());
    char* end = nullptr;
    const long idx = std::strtol(arg.c_str(), &end, 10);
    if (!arg.empty() && end == arg.c_str() + arg.size() && idx >= 0 &&
        idx < static_cast<long>(names.size())) {
        return static_cast<Index>(idx);
    }
    throw DomainError("--coef '" + arg + "' is neither a coefficient name nor an index");
}

void write_ci_line(std::ostream& os, const std::string& name, const CiResult& ci, double p) {
    os << csv::escape(name) << ',' << csv::format_double(ci.estimate) << ','
       << csv::format_double(ci.se) << ',' << csv::format_double(ci.lower) << ','
       << csv::format_double(ci.upper) << ',' << csv::format_double(p) << '\n';
}

int cmd_ci(const CiOptions& o, std::ostream& out) {
    if (o.fit.empty()) throw DomainError("missing required option --fit");
    if (!o.contrast.empty() && !o.coef.empty()) throw DomainError("--contrast and --coef are exclusive");
    const LoadedFit l = load_fit(o.fit);
    const Index k = l.fit.b_hat.size();
    std::ostringstream table;
    table << "coef,est,se,lower,upper,p\n";
    if (!o.contrast.empty()) {
        const Vector alpha = parse_contrast(o.contrast, k);
        const CiResult ci = wald_ci(l.fit, alpha, o.level);
        write_ci_line(table, "contrast", ci, wald_test(l.fit, alpha, 0.0).p_value);
    } else if (!o.coef.empty()) {
        const Index j = parse_coef(o.coef, l.names);
        const CiResult ci = wald_ci(l.fit, j, o.level);
        write_ci_line(table, l.names[static_cast<std::size_t>(j)], ci,
                      wald_test(l.fit, Vector::Unit(k, j), 0.0).p_value);
    } else {
        for (Index j = 0; j < k; ++j) {
            const CiResult ci = wald_ci(l.fit, j, o.level);
            write_ci_line(table, l.names[static_cast<std::size_t>(j)], ci,
                          wald_test(l.fit, Vector::Unit(k, j), 0.0).p_value);
        }
    }
    if (o.out.empty()) {
        out << table.str();
    } else {
        write_file(o.out, table.str());
    }
    return kOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimOptions {
    std::string config;
    std::string out;
    int workers = 0;
    std::uint64_t seed = 0;
    int replicates = 0;
};

int cmd_simulate(const SimOptions& o, const CLI::Option* seed_flag, const CLI::Option* reps_flag,
                 std::ostream& out) {
    const auto start = Clock::now();
    if (o.config.empty()) throw DomainError("missing required option --config");
    if (o.out.empty()) throw DomainError("missing required option --out");
    const std::string text = read_file(o.config);
    json cfg;
    try {
        cfg = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DomainError("invalid JSON in '" + o.config + "': " + e.what());
    }
    // A manifest from an earlier run can be passed back in as the config.
    if (cfg.is_object() && cfg.contains("subcommand") && cfg.contains("config")) cfg = cfg.at("config");

    std::optional<std::vector<double>> mu_grid;
    if (cfg.is_object() && cfg.contains("mu_grid")) {
        mu_grid = cfg.at("mu_grid").get<std::vector<double>>();
        cfg.erase("mu_grid");
    }
    SimConfig config = sim_config_from_json(cfg);
    if (seed_flag->count() > 0) config.seed = o.seed;
    if (reps_flag->count() > 0) config.n_replicates = o.replicates;
    config.validate();
    const int workers = o.workers > 0 ? o.workers
                                      : std::max(1, static_cast<int>(std::thread::hardware_concurrency()));

    const fs::path dir(o.out);
    fs::create_directories(dir);
    std::ostringstream summary_csv, replicates_csv;
    json resolved = sim_config_to_json(config);
    if (mu_grid) {
        resolved["mu_grid"] = *mu_grid;
        const MuSweepResult sweep = mu_sweep(config, *mu_grid, workers);
        std::ostringstream sweep_csv;
        write_mu_sweep_csv(sweep, sweep_csv);
        write_file(dir / "mu_sweep.csv", sweep_csv.str());
        write_summary_csv(sweep.summary, summary_csv);
        write_replicates_csv(sweep.summary, replicates_csv);
    } else {
        const SimSummary summary = run_replicates(config, workers);
        write_summary_csv(summary, summary_csv);
        write_replicates_csv(summary, replicates_csv);
    }
    write_file(dir / "summary.csv", summary_csv.str());
    write_file(dir / "replicates.csv", replicates_csv.str());

    json m = manifest("simulate", resolved, config.seed, content_hash(text), start);
    m["workers"] = workers;
    m["signal_positions"] = std::vector<Index>(std::begin(kDefaultSignalIndices),
                                               std::end(kDefaultSignalIndices));
    m["per_replicate_standardization"] = config.standardize;
    m["outputs"] = mu_grid ? json{"summary.csv", "replicates.csv", "mu_sweep.csv"}
                           : json{"summary.csv", "replicates.csv"};
    write_file(dir / "manifest.json", m.dump(2) + "\n");
    out << summary_csv.str();
    return kOk;
}

void write_error(std::ostream& err, const std::string& kind, const std::string& message, int code) {
    json e;
    e["error"] = {{"kind", kind}, {"message", message}, {"exit_code", code}};
    err << e.dump() << '\n';
}

std::string structure_name(CovarianceKind k) {
    switch (k) {
    case CovarianceKind::identity: return "identity";
    case CovarianceKind::ar1: return "ar1";
    case CovarianceKind::cs: return "cs";
    }
    return "identity";
}

}  // namespace

std::string content_hash(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (const char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

SimConfig sim_config_from_json(const json& j) {
    reject_unknown(j,
                   {"n", "p", "structure", "truncation", "family", "xi0", "beta1_grid", "n_replicates",
                    "methods", "level", "seed", "cv_folds", "nodewise_folds", "n_lambda",
                    "lambda_ratio", "standardize", "target"},
                   "simulate");
    SimConfig c;
    merge(nullptr, j, "n", c.n);
    merge(nullptr, j, "p", c.p);
    if (j.contains("structure")) {
        const json& s = j.at("structure");
        const std::string kind = s.is_string() ? s.get<std::string>() : s.at("kind").get<std::string>();
        if (kind == "identity") {
            c.structure = {CovarianceKind::identity, 0.0};
        } else if (kind == "ar1" || kind == "cs") {
            if (!s.is_object() || !s.contains("rho")) throw DomainError("structure '" + kind + "' needs rho");
            c.structure = {kind == "ar1" ? CovarianceKind::ar1 : CovarianceKind::cs, s.at("rho").get<double>()};
        } else {
            throw DomainError("unknown covariance structure '" + kind + "'");
        }
    }
    merge(nullptr, j, "truncation", c.truncation);
    if (j.contains("family")) c.family = parse_family(j.at("family").get<std::string>());
    if (j.contains("xi0") && !j.at("xi0").is_null()) c.xi0 = json_vector(j.at("xi0"), "xi0");
    if (j.contains("beta1_grid")) {
        const json& g = j.at("beta1_grid");
        if (g.is_object()) {
            const double from = g.at("from").get<double>();
            const double to = g.at("to").get<double>();
            const int count = g.at("count").get<int>();
            if (count < 1) throw DomainError("beta1_grid count must be positive");
            c.beta1_grid.clear();
            for (int k = 0; k < count; ++k) {
                c.beta1_grid.push_back(count == 1 ? from : from + (to - from) * k / (count - 1));
            }
        } else {
            c.beta1_grid = g.get<std::vector<double>>();
        }
    }
    merge(nullptr, j, "n_replicates", c.n_replicates);
    if (j.contains("methods")) {
        c.methods.clear();
        for (const auto& m : j.at("methods")) c.methods.push_back(SimMethod::parse(m.get<std::string>()));
    }
    merge(nullptr, j, "level", c.level);
    merge(nullptr, j, "seed", c.seed);
    merge(nullptr, j, "cv_folds", c.cv_folds);
    merge(nullptr, j, "nodewise_folds", c.nodewise_folds);
    merge(nullptr, j, "n_lambda", c.n_lambda);
    merge(nullptr, j, "lambda_ratio", c.lambda_ratio);
    merge(nullptr, j, "standardize", c.standardize);
    merge(nullptr, j, "target", c.target);
    return c;
}

json sim_config_to_json(const SimConfig& c) {
    json j;
    j["n"] = c.n;
    j["p"] = c.p;
    j["structure"] = {{"kind", structure_name(c.structure.kind)}, {"rho", c.structure.rho}};
    j["truncation"] = c.truncation;
    j["family"] = c.family.name();
    j["xi0"] = c.xi0.size() > 0 ? vector_json(c.xi0) : json(nullptr);
    j["beta1_grid"] = c.beta1_grid;
    j["n_replicates"] = c.n_replicates;
    json methods = json::array();
    for (const auto& m : c.methods) methods.push_back(m.tag());
    j["methods"] = methods;
    j["level"] = c.level;
    j["seed"] = c.seed;
    j["cv_folds"] = c.cv_folds;
    j["nodewise_folds"] = c.nodewise_folds;
    j["n_lambda"] = c.n_lambda;
    j["lambda_ratio"] = c.lambda_ratio;
    j["standardize"] = c.standardize;
    j["target"] = c.target;
    return j;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Estimation and inference for high-dimensional GLMs", "hdinf"};
    app.require_subcommand(0, 1);
    bool show_version = false;
    app.add_flag("--version", show_version, "Print the version and exit");

    ModelOptions fit_opts, debias_opts;
    auto* fit = app.add_subcommand("fit", "Fit an l1-penalized GLM");
    const ModelFlags fit_flags = add_model_flags(fit, fit_opts, false);
    auto* debias = app.add_subcommand("debias", "De-biased lasso estimates with standard errors");
    const ModelFlags debias_flags = add_model_flags(debias, debias_opts, true);

    CiOptions ci_opts;
    auto* ci = app.add_subcommand("ci", "Wald intervals from a debias output file");
    ci->add_option("--fit", ci_opts.fit, "JSON written by the debias command");
    ci->add_option("--contrast", ci_opts.contrast, "Contrast as one CSV row (or a CSV file)");
    ci->add_option("--coef", ci_opts.coef, "Coefficient name or index");
    ci->add_option("--level", ci_opts.level, "Confidence level");
    ci->add_option("--out", ci_opts.out, "Output CSV file (default: standard output)");

    SimOptions sim_opts;
    auto* sim = app.add_subcommand("simulate", "Run a Monte-Carlo coverage study");
    sim->add_option("--config", sim_opts.config, "Simulation config JSON");
    sim->add_option("--out", sim_opts.out, "Output directory");
    sim->add_option("--workers", sim_opts.workers, "Worker threads (default: logical cores)");
    const CLI::Option* seed_flag = sim->add_option("--seed", sim_opts.seed, "Override the config seed");
    const CLI::Option* reps_flag =
        sim->add_option("--replicates", sim_opts.replicates, "Override the replicate count");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << app.help();
        write_error(err, "usage", e.what(), kUsage);
        return kUsage;
    }

    if (show_version) {
        out << version_string() << '\n';
        return kOk;
    }

    try {
        if (fit->parsed()) {
            resolve_model_options(fit_opts, fit_flags, false);
            return cmd_fit(fit_opts, out);
        }
        if (debias->parsed()) {
            resolve_model_options(debias_opts, debias_flags, true);
            return cmd_debias(debias_opts, out);
        }
        if (ci->parsed()) return cmd_ci(ci_opts, out);
        if (sim->parsed()) return cmd_simulate(sim_opts, seed_flag, reps_flag, out);
        err << app.help();
        write_error(err, "usage", "a subcommand is required: fit, debias, ci or simulate", kUsage);
        return kUsage;
    } catch (const NumericalError& e) {
        write_error(err, e.kind(), e.what(), kNumerical);
        return kNumerical;
    } catch (const Error& e) {
        write_error(err, e.kind(), e.what(), kUsage);
        return kUsage;
    } catch (const json::exception& e) {
        write_error(err, "config_error", e.what(), kUsage);
        return kUsage;
    } catch (const fs::filesystem_error& e) {
        write_error(err, "io_error", e.what(), kUsage);
        return kUsage;
    }
}

}  // namespace hdinf::cli
