#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "hdinf/glm_family.hpp"
#include "hdinf/types.hpp"

namespace hdinf {

/// Affine transform applied to one design column: x_std = (x - center) / scale.
struct ColumnScale {
    double center = 0.0;
    double scale = 1.0;
};

/// Response plus an n x (p+1) design whose first column is the intercept.
///
/// Construct through make_dataset, load_csv or standardize; all of them
/// validate. The struct is a plain value afterwards and is never mutated by
/// the library.
struct Dataset {
    Vector y;
    Matrix X;
    std::vector<std::string> col_names;
    std::vector<ColumnScale> standardization;
    bool standardized = false;

    Index n() const noexcept { return X.rows(); }
    /// Number of covariates, excluding the intercept.
    Index p() const noexcept { return X.cols() - 1; }
};

/// Prepends the intercept column to `covariates` and validates the result.
/// Empty `names` produces x1..xp.
Dataset make_dataset(Vector y, const Matrix& covariates, std::vector<std::string> names = {});

/// Throws DataError if the dataset violates its invariants.
void validate(const Dataset& d);

/// Checks the response against the family support (binomial: {0,1};
/// poisson: non-negative).
void validate_response(const Dataset& d, GlmFamily family);

/// Maps coefficients from the standardized parameterization back to the
/// original covariate scale: xi_orig = T * xi_std.
class CoefMap {
public:
    CoefMap() = default;
    explicit CoefMap(std::vector<ColumnScale> columns);

    Index size() const noexcept { return static_cast<Index>(columns_.size()); }
    const std::vector<ColumnScale>& columns() const noexcept { return columns_; }

    /// The (p+1) x (p+1) matrix T.
    Matrix transform() const;

    Vector to_original(const Vector& xi_std) const;
    /// Inverse of to_original.
    Vector to_standardized(const Vector& xi_orig) const;
    /// T V T^T, for covariance-like matrices.
    Matrix covariance_to_original(const Matrix& v_std) const;
    /// A contrast alpha on the original scale acts as T^T alpha on the
    /// standardized scale.
    Vector contrast_to_standardized(const Vector& alpha_orig) const;

private:
    std::vector<ColumnScale> columns_;
};

/// Centers every non-intercept column and scales it to unit population SD.
/// Throws DataError naming any zero-variance column.
std::pair<Dataset, CoefMap> standardize(const Dataset& d);

/// Identity map of the right size, for unstandardized fits.
CoefMap identity_map(const Dataset& d);

struct CsvOptions {
    std::string response_col;
    std::vector<std::string> drop_cols;
};

/// Loads an RFC-4180 CSV with a header row. Non-numeric columns are expanded
/// into k-1 dummy columns against the first level seen in file order; the
/// dummy for level L of column c is named "c=L".
Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options);

/// Same as load_csv but from in-memory text.
Dataset parse_csv_dataset(std::string_view text, const CsvOptions& options);

}  // namespace hdinf
