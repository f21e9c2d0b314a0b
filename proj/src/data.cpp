#include "hdinf/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <unordered_map>

#include "hdinf/csv.hpp"
#include "hdinf/error.hpp"

namespace hdinf {
namespace {

std::optional<double> parse_number(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

bool is_missing(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s.empty() || s == "NA" || s == "NaN" || s == "nan";
}

}  // namespace

Dataset make_dataset(Vector y, const Matrix& covariates, std::vector<std::string> names) {
    if (y.size() != covariates.rows()) {
        throw DataError("response has " + std::to_string(y.size()) + " rows but design has " +
                        std::to_string(covariates.rows()));
    }
    if (names.empty()) {
        for (Index j = 0; j < covariates.cols(); ++j) names.push_back("x" + std::to_string(j + 1));
    }
    if (static_cast<Index>(names.size()) != covariates.cols()) {
        throw DataError("column name count does not match the number of covariates");
    }
    Dataset d;
    d.y = std::move(y);
    d.X.resize(covariates.rows(), covariates.cols() + 1);
    d.X.col(0).setOnes();
    d.X.rightCols(covariates.cols()) = covariates;
    d.col_names.reserve(names.size() + 1);
    d.col_names.emplace_back("(Intercept)");
    for (auto& name : names) d.col_names.push_back(std::move(name));
    d.standardization.assign(static_cast<std::size_t>(d.X.cols()), ColumnScale{});
    validate(d);
    return d;
}

void validate(const Dataset& d) {
    if (d.n() < 2) throw DataError("need at least 2 observations");
    if (d.p() < 1) throw DataError("need at least 1 covariate");
    if (d.y.size() != d.n()) throw DataError("response length does not match design rows");
    if (static_cast<Index>(d.col_names.size()) != d.X.cols()) {
        throw DataError("column name count does not match design columns");
    }
    if (!d.y.allFinite()) throw DataError("response contains non-finite values");
    for (Index j = 0; j < d.X.cols(); ++j) {
        const auto col = d.X.col(j);
        if (!col.allFinite()) {
            throw DataError("column '" + d.col_names[j] + "' contains non-finite values");
        }
        if (j == 0) {
            if ((col.array() != 1.0).any()) throw DataError("first design column must be all ones");
        } else if ((col.array() == col(0)).all()) {
            throw DataError("column '" + d.col_names[j] + "' is constant");
        }
    }
}

void validate_response(const Dataset& d, GlmFamily family) {
    for (Index i = 0; i < d.n(); ++i) {
        const double y = d.y(i);
        if (family.kind() == FamilyKind::binomial && y != 0.0 && y != 1.0) {
            throw DataError("binomial response must be 0 or 1 (row " + std::to_string(i + 1) +
                            " has " + std::to_string(y) + ")");
        }
        if (family.kind() == FamilyKind::poisson && y < 0.0) {
            throw DataError("poisson response must be non-negative (row " +
                            std::to_string(i + 1) + ")");
        }
    }
}

CoefMap::CoefMap(std::vector<ColumnScale> columns) : columns_(std::move(columns)) {}

Matrix CoefMap::transform() const {
    const Index k = size();
    Matrix t = Matrix::Zero(k, k);
    t(0, 0) = 1.0;
    for (Index j = 1; j < k; ++j) {
        const auto& c = columns_[static_cast<std::size_t>(j)];
        t(j, j) = 1.0 / c.scale;
        t(0, j) = -c.center / c.scale;
    }
    return t;
}

Vector CoefMap::to_original(const Vector& xi_std) const {
    Vector out = xi_std;
    for (Index j = 1; j < size(); ++j) {
        const auto& c = columns_[static_cast<std::size_t>(j)];
        out(j) = xi_std(j) / c.scale;
        out(0) -= out(j) * c.center;
    }
    return out;
}

Vector CoefMap::to_standardized(const Vector& xi_orig) const {
    Vector out = xi_orig;
    for (Index j = 1; j < size(); ++j) {
        const auto& c = columns_[static_cast<std::size_t>(j)];
        out(j) = xi_orig(j) * c.scale;
        out(0) += xi_orig(j) * c.center;
    }
    return out;
}

Matrix CoefMap::covariance_to_original(const Matrix& v_std) const {
    const Matrix t = transform();
    return t * v_std * t.transpose();
}

Vector CoefMap::contrast_to_standardized(const Vector& alpha_orig) const {
    return transform().transpose() * alpha_orig;
}

std::pair<Dataset, CoefMap> standardize(const Dataset& d) {
    Dataset out = d;
    const double n = static_cast<double>(d.n());
    std::vector<ColumnScale> scales(static_cast<std::size_t>(d.X.cols()));
    for (Index j = 1; j < d.X.cols(); ++j) {
        auto col = out.X.col(j);
        const double center = col.mean();
        col.array() -= center;
        const double sd = std::sqrt(col.squaredNorm() / n);
        if (!(sd > 0.0) || sd <= 1e-12 * std::max(1.0, std::abs(center))) {
            throw DataError("column '" + d.col_names[j] + "' has zero variance");
        }
        col /= sd;
        // Compose with any earlier standardization so the map always points
        // at the raw input scale.
        const auto& prev = d.standardization[static_cast<std::size_t>(j)];
        scales[static_cast<std::size_t>(j)] = {prev.center + prev.scale * center, prev.scale * sd};
    }
    out.standardization = scales;
    out.standardized = true;
    return {std::move(out), CoefMap(std::move(scales))};
}

CoefMap identity_map(const Dataset& d) {
    return CoefMap(d.standardization);
}

Dataset parse_csv_dataset(std::string_view text, const CsvOptions& options) {
    auto rows = csv::parse(text);
    rows.erase(std::remove_if(rows.begin(), rows.end(),
                              [](const csv::Row& r) { return r.size() == 1 && r[0].empty(); }),
               rows.end());
    if (rows.empty()) throw DataError("csv: missing header row");
    const csv::Row header = rows.front();
    const std::size_t width = header.size();
    const std::size_t n_rows = rows.size() - 1;

    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != width) {
            throw DataError("csv: row " + std::to_string(r + 1) + " has " +
                            std::to_string(rows[r].size()) + " fields, header has " +
                            std::to_string(width));
        }
    }

    auto find_col = [&](const std::string& name) -> std::size_t {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw DataError("csv: no column named '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    if (options.response_col.empty()) throw DomainError("response column name is empty");
    const std::size_t response = find_col(options.response_col);
    std::vector<bool> keep(width, true);
    keep[response] = false;
    for (const auto& name : options.drop_cols) keep[find_col(name)] = false;

    for (std::size_t r = 1; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            if ((keep[c] || c == response) && is_missing(rows[r][c])) {
                throw DataError("csv: missing value at row " + std::to_string(r + 1) +
                                ", column '" + header[c] + "'");
            }
        }
    }

    Vector y(static_cast<Index>(n_rows));
    for (std::size_t r = 0; r < n_rows; ++r) {
        const auto v = parse_number(rows[r + 1][response]);
        if (!v) {
            throw DataError("csv: non-numeric response '" + rows[r + 1][response] + "' at row " +
                            std::to_string(r + 2));
        }
        y(static_cast<Index>(r)) = *v;
    }

    std::vector<std::vector<double>> columns;
    std::vector<std::string> names;
    for (std::size_t c = 0; c < width; ++c) {
        if (!keep[c]) continue;
        std::vector<double> values(n_rows);
        bool numeric = true;
        for (std::size_t r = 0; r < n_rows && numeric; ++r) {
            const auto v = parse_number(rows[r + 1][c]);
            if (v) values[r] = *v; else numeric = false;
        }
        if (numeric) {
            columns.push_back(std::move(values));
            names.push_back(header[c]);
            continue;
        }
        // Categorical: levels in order of first appearance, the first is the reference.
        std::vector<std::string> levels;
        std::unordered_map<std::string, std::size_t> level_index;
        std::vector<std::size_t> codes(n_rows);
        for (std::size_t r = 0; r < n_rows; ++r) {
            const std::string& cell = rows[r + 1][c];
            auto [it, inserted] = level_index.try_emplace(cell, levels.size());
            if (inserted) levels.push_back(cell);
            codes[r] = it->second;
        }
        for (std::size_t level = 1; level < levels.size(); ++level) {
            std::vector<double> dummy(n_rows);
            for (std::size_t r = 0; r < n_rows; ++r) dummy[r] = codes[r] == level ? 1.0 : 0.0;
            columns.push_back(std::move(dummy));
            names.push_back(header[c] + "=" + levels[level]);
        }
    }

    Matrix covariates(static_cast<Index>(n_rows), static_cast<Index>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) {
        for (std::size_t r = 0; r < n_rows; ++r) {
            covariates(static_cast<Index>(r), static_cast<Index>(j)) = columns[j][r];
        }
    }
    return make_dataset(std::move(y), covariates, std::move(names));
}

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv_dataset(buf.str(), options);
}

}  // namespace hdinf
