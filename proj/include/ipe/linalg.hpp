#pragma once

// Least-squares core: Householder QR with column pivoting, OLS, and
// just/over-identified TSLS with heteroskedasticity-robust (HC1) errors.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ipe::linalg {

// Dense n x k regressor matrix with labelled columns. Columns are stored
// contiguously since every consumer (QR, residualization) walks columns.
class DesignMatrix {
public:
    DesignMatrix() = default;
    explicit DesignMatrix(std::size_t rows) : rows_(rows) {}
    // `row_major` holds rows*labels.size() values.
    DesignMatrix(std::size_t rows, std::span<const double> row_major, std::vector<std::string> labels);

    void add_column(std::string label, std::vector<double> values);
    void append(const DesignMatrix& other);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return columns_.size(); }
    double operator()(std::size_t i, std::size_t j) const { return columns_[j][i]; }
    const std::vector<double>& column(std::size_t j) const { return columns_[j]; }
    const std::string& label(std::size_t j) const { return labels_[j]; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    std::vector<double> row_major() const;

    // n >= k >= 1 and every entry finite; throws ipe::Error otherwise.
    void validate() const;

private:
    std::size_t rows_ = 0;
    std::vector<std::vector<double>> columns_;
    std::vector<std::string> labels_;
};

// Compact Householder QR of X P = Q R. Reflector j lives below the diagonal
// of work[j] with an implicit unit leading entry.
class PivotedQR {
public:
    explicit PivotedQR(const DesignMatrix& x, double rank_tolerance = 1e-10);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return work_.size(); }
    std::size_t rank() const noexcept { return rank_; }
    bool full_rank() const noexcept { return rank_ == work_.size(); }
    // Original column indices in pivot order; entries past rank() were dropped.
    const std::vector<std::size_t>& permutation() const noexcept { return perm_; }
    std::vector<std::size_t> dropped_columns() const;
    double r(std::size_t i, std::size_t j) const { return work_[j][i]; }
    double tau(std::size_t j) const { return tau_[j]; }

    // Q' y, in place.
    void apply_qt(std::vector<double>& y) const;
    // Least-squares coefficients in original column order (requires full rank).
    std::vector<double> solve(std::span<const double> y) const;
    // (X'X)^{-1} in original column order (requires full rank), row-major k*k.
    std::vector<double> gram_inverse() const;

private:
    std::size_t rows_ = 0;
    std::size_t rank_ = 0;
    std::vector<std::vector<double>> work_;
    std::vector<double> tau_;
    std::vector<std::size_t> perm_;
};

struct OlsFit {
    std::vector<std::string> labels;
    std::vector<double> coefficients;
    std::vector<double> residuals;
};

// Throws RankDeficient naming the dropped columns when numerical rank < k.
OlsFit ols(const DesignMatrix& x, std::span<const double> y);

// Residuals of y after projecting on the span of the retained pivot columns.
std::vector<double> residualize(const PivotedQR& qr, std::span<const double> y);

struct TSLSFit {
    std::size_t n = 0;
    std::vector<std::string> exog_labels;
    std::vector<std::string> instrument_labels;
    // First stage: endog on [exog, instruments].
    std::vector<double> first_stage_exog;  // pi_0
    std::vector<double> pi;                // instrument coefficients
    double first_stage_f = 0.0;            // partial F of the instruments
    // Second stage: y on [exog, fitted endog].
    double gamma = 0.0;
    std::vector<double> gamma_exog;
    double se_gamma = 0.0;
    std::vector<double> se_gamma_exog;
    std::vector<double> fitted_endog;
    std::vector<double> structural_residuals;  // y - exog*gamma_exog - endog*gamma
};

TSLSFit tsls(std::span<const double> y, std::span<const double> endog,
             const DesignMatrix& exog, const DesignMatrix& instruments);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

}  // namespace ipe::linalg
