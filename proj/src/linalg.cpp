#include "ipe/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ipe/error.hpp"

namespace ipe::linalg {

namespace {

constexpr const char* kModule = "linalg";

double subcolumn_norm(const std::vector<double>& col, std::size_t from) {
    // Scaled accumulation avoids overflow on large-magnitude columns.
    double scale = 0.0;
    for (std::size_t i = from; i < col.size(); ++i) scale = std::max(scale, std::abs(col[i]));
    if (scale == 0.0) return 0.0;
    double ss = 0.0;
    for (std::size_t i = from; i < col.size(); ++i) {
        const double t = col[i] / scale;
        ss += t * t;
    }
    return scale * std::sqrt(ss);
}

std::string join_labels(const DesignMatrix& x, const std::vector<std::size_t>& idx) {
    std::string out;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (k) out += ", ";
        out += x.label(idx[k]);
    }
    return out;
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

DesignMatrix::DesignMatrix(std::size_t rows, std::span<const double> row_major,
                           std::vector<std::string> labels)
    : rows_(rows), labels_(std::move(labels)) {
    const std::size_t k = labels_.size();
    if (row_major.size() != rows * k) {
        throw Error(ErrorCode::Dimension, kModule, "design matrix values do not match rows x labels");
    }
    columns_.assign(k, std::vector<double>(rows));
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < k; ++j) columns_[j][i] = row_major[i * k + j];
}

void DesignMatrix::add_column(std::string label, std::vector<double> values) {
    if (values.size() != rows_) {
        throw Error(ErrorCode::Dimension, kModule,
                    "column '" + label + "' has " + std::to_string(values.size()) + " rows, expected " +
                        std::to_string(rows_));
    }
    labels_.push_back(std::move(label));
    columns_.push_back(std::move(values));
}

void DesignMatrix::append(const DesignMatrix& other) {
    for (std::size_t j = 0; j < other.cols(); ++j) add_column(other.label(j), other.column(j));
}

std::vector<double> DesignMatrix::row_major() const {
    std::vector<double> out(rows_ * cols());
    for (std::size_t j = 0; j < cols(); ++j)
        for (std::size_t i = 0; i < rows_; ++i) out[i * cols() + j] = columns_[j][i];
    return out;
}

void DesignMatrix::validate() const {
    if (cols() == 0) throw Error(ErrorCode::Dimension, kModule, "design matrix has no columns");
    if (rows_ < cols()) {
        throw Error(ErrorCode::Dimension, kModule,
                    "design matrix has fewer rows (" + std::to_string(rows_) + ") than columns (" +
                        std::to_string(cols()) + ")");
    }
    for (std::size_t j = 0; j < cols(); ++j) {
        for (std::size_t i = 0; i < rows_; ++i) {
            if (!std::isfinite(columns_[j][i])) {
                throw Error(ErrorCode::Domain, kModule,
                            "non-finite value in column '" + labels_[j] + "' at row " + std::to_string(i));
            }
        }
    }
}

PivotedQR::PivotedQR(const DesignMatrix& x, double rank_tolerance) : rows_(x.rows()) {
    const std::size_t k = x.cols();
    work_.reserve(k);
    for (std::size_t j = 0; j < k; ++j) work_.push_back(x.column(j));
    perm_.resize(k);
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    tau_.assign(k, 0.0);

    const std::size_t steps = std::min(rows_, k);
    double leading = 0.0;
    rank_ = 0;
    for (std::size_t step = 0; step < steps; ++step) {
        std::size_t best = step;
        double best_norm = -1.0;
        for (std::size_t j = step; j < k; ++j) {
            const double nrm = subcolumn_norm(work_[j], step);
            if (nrm > best_norm) {
                best_norm = nrm;
                best = j;
            }
        }
        if (step == 0) leading = best_norm;
        if (best_norm <= rank_tolerance * leading || best_norm == 0.0) break;
        std::swap(work_[step], work_[best]);
        std::swap(perm_[step], perm_[best]);

        auto& col = work_[step];
        const double x0 = col[step];
        const double beta = x0 >= 0.0 ? -best_norm : best_norm;
        const double tau = (beta - x0) / beta;
        const double scale = 1.0 / (x0 - beta);
        for (std::size_t i = step + 1; i < rows_; ++i) col[i] *= scale;
        col[step] = beta;
        tau_[step] = tau;

        for (std::size_t j = step + 1; j < k; ++j) {
            auto& a = work_[j];
            double w = a[step];
            for (std::size_t i = step + 1; i < rows_; ++i) w += col[i] * a[i];
            w *= tau;
            a[step] -= w;
            for (std::size_t i = step + 1; i < rows_; ++i) a[i] -= w * col[i];
        }
        ++rank_;
    }
}

std::vector<std::size_t> PivotedQR::dropped_columns() const {
    std::vector<std::size_t> out(perm_.begin() + static_cast<std::ptrdiff_t>(rank_), perm_.end());
    std::sort(out.begin(), out.end());
    return out;
}

void PivotedQR::apply_qt(std::vector<double>& y) const {
    for (std::size_t step = 0; step < rank_; ++step) {
        const auto& v = work_[step];
        double w = y[step];
        for (std::size_t i = step + 1; i < rows_; ++i) w += v[i] * y[i];
        w *= tau_[step];
        y[step] -= w;
        for (std::size_t i = step + 1; i < rows_; ++i) y[i] -= w * v[i];
    }
}

std::vector<double> PivotedQR::solve(std::span<const double> y) const {
    if (!full_rank()) throw Error(ErrorCode::RankDeficient, kModule, "solve on rank-deficient factorization");
    std::vector<double> qty(y.begin(), y.end());
    apply_qt(qty);
    const std::size_t k = cols();
    std::vector<double> z(k, 0.0);
    for (std::size_t ii = k; ii-- > 0;) {
        double s = qty[ii];
        for (std::size_t j = ii + 1; j < k; ++j) s -= work_[j][ii] * z[j];
        z[ii] = s / work_[ii][ii];
    }
    std::vector<double> coef(k);
    for (std::size_t p = 0; p < k; ++p) coef[perm_[p]] = z[p];
    return coef;
}

std::vector<double> PivotedQR::gram_inverse() const {
    if (!full_rank()) throw Error(ErrorCode::RankDeficient, kModule, "inverse of rank-deficient factorization");
    const std::size_t k = cols();
    // Rinv is upper triangular; (R'R)^{-1} = Rinv Rinv'.
    std::vector<double> rinv(k * k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        rinv[j * k + j] = 1.0 / work_[j][j];
        for (std::size_t ii = j; ii-- > 0;) {
            double s = 0.0;
            for (std::size_t m = ii + 1; m <= j; ++m) s += work_[m][ii] * rinv[m * k + j];
            rinv[ii * k + j] = -s / work_[ii][ii];
        }
    }
    std::vector<double> out(k * k, 0.0);
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
            double s = 0.0;
            for (std::size_t m = std::max(a, b); m < k; ++m) s += rinv[a * k + m] * rinv[b * k + m];
            out[perm_[a] * k + perm_[b]] = s;
        }
    }
    return out;
}

std::vector<double> residualize(const PivotedQR& qr, std::span<const double> y) {
    // Residual = Q (0, (Q'y)_{r:}): zero the leading block and apply Q.
    std::vector<double> r(y.begin(), y.end());
    qr.apply_qt(r);
    for (std::size_t i = 0; i < qr.rank(); ++i) r[i] = 0.0;
    // Apply Q = H_0 H_1 ... H_{r-1}: reflectors in reverse order.
    for (std::size_t step = qr.rank(); step-- > 0;) {
        double w = r[step];
        for (std::size_t i = step + 1; i < qr.rows(); ++i) w += qr.r(i, step) * r[i];
        w *= qr.tau(step);
        r[step] -= w;
        for (std::size_t i = step + 1; i < qr.rows(); ++i) r[i] -= w * qr.r(i, step);
    }
    return r;
}

OlsFit ols(const DesignMatrix& x, std::span<const double> y) {
    x.validate();
    if (y.size() != x.rows()) {
        throw Error(ErrorCode::Dimension, kModule, "response length does not match design rows");
    }
    const PivotedQR qr(x);
    if (!qr.full_rank()) {
        throw Error(ErrorCode::RankDeficient, kModule,
                    "design matrix is rank deficient; dropped columns: " + join_labels(x, qr.dropped_columns()));
    }
    OlsFit fit;
    fit.labels = x.labels();
    fit.coefficients = qr.solve(y);
    fit.residuals.assign(y.begin(), y.end());
    for (std::size_t j = 0; j < x.cols(); ++j) {
        const double b = fit.coefficients[j];
        const auto& col = x.column(j);
        for (std::size_t i = 0; i < x.rows(); ++i) fit.residuals[i] -= b * col[i];
    }
    return fit;
}

TSLSFit tsls(std::span<const double> y, std::span<const double> endog, const DesignMatrix& exog,
             const DesignMatrix& instruments) {
    const std::size_t n = exog.rows();
    if (y.size() != n || endog.size() != n || instruments.rows() != n) {
        throw Error(ErrorCode::Dimension, kModule, "tsls inputs have mismatched row counts");
    }
    if (instruments.cols() == 0) {
        throw Error(ErrorCode::Precondition, kModule, "tsls requires at least one instrument");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(y[i]) || !std::isfinite(endog[i])) {
            throw Error(ErrorCode::Domain, kModule, "non-finite outcome or endogenous value at row " + std::to_string(i));
        }
    }
    exog.validate();
    instruments.validate();

    const PivotedQR exog_qr(exog);
    if (!exog_qr.full_rank()) {
        throw Error(ErrorCode::RankDeficient, kModule,
                    "exogenous controls are rank deficient; dropped columns: " +
                        join_labels(exog, exog_qr.dropped_columns()));
    }

    DesignMatrix z = exog;
    z.append(instruments);
    z.validate();
    const PivotedQR z_qr(z);
    if (!z_qr.full_rank()) {
        bool all_null = true;
        for (std::size_t j = 0; j < instruments.cols() && all_null; ++j) {
            const auto& col = instruments.column(j);
            const double scale = norm2(col);
            if (scale == 0.0) continue;
            all_null = norm2(residualize(exog_qr, col)) <= 1e-10 * scale;
        }
        if (all_null) {
            throw Error(ErrorCode::WeakFirstStage, kModule,
                        "instruments carry no variation beyond the exogenous controls (zero first stage)");
        }
        throw Error(ErrorCode::RankDeficient, kModule,
                    "first-stage design is rank deficient; dropped columns: " + join_labels(z, z_qr.dropped_columns()));
    }

    TSLSFit fit;
    fit.n = n;
    fit.exog_labels = exog.labels();
    fit.instrument_labels = instruments.labels();
    const auto first = z_qr.solve(endog);
    const std::size_t kw = exog.cols();
    fit.first_stage_exog.assign(first.begin(), first.begin() + static_cast<std::ptrdiff_t>(kw));
    fit.pi.assign(first.begin() + static_cast<std::ptrdiff_t>(kw), first.end());

    fit.fitted_endog.assign(n, 0.0);
    for (std::size_t j = 0; j < z.cols(); ++j) {
        const auto& col = z.column(j);
        for (std::size_t i = 0; i < n; ++i) fit.fitted_endog[i] += first[j] * col[i];
    }

    // Relevance: the part of the fitted endogenous variable not explained by
    // the controls must be nonzero.
    const auto endog_tilde = residualize(exog_qr, endog);
    const auto fitted_tilde = residualize(exog_qr, fit.fitted_endog);
    const double endog_scale = norm2(endog_tilde);
    if (endog_scale <= 1e-12 * std::max(norm2(endog), 1e-300) || norm2(fitted_tilde) <= 1e-8 * endog_scale) {
        throw Error(ErrorCode::WeakFirstStage, kModule,
                    "first stage has no identifying variation: fitted posterior feature is collinear with controls");
    }

    // Partial F of the instruments (homoskedastic form, reported as a strength
    // diagnostic only).
    const double rss_restricted = dot(endog_tilde, endog_tilde);
    auto first_resid = std::vector<double>(endog.begin(), endog.end());
    for (std::size_t i = 0; i < n; ++i) first_resid[i] -= fit.fitted_endog[i];
    const double rss_full = dot(first_resid, first_resid);
    const double q = static_cast<double>(instruments.cols());
    const double dof = static_cast<double>(n) - static_cast<double>(z.cols());
    fit.first_stage_f = (rss_full > 0.0 && dof > 0.0) ? ((rss_restricted - rss_full) / q) / (rss_full / dof)
                                                       : std::numeric_limits<double>::infinity();

    DesignMatrix second = exog;
    second.add_column("fitted_endog", fit.fitted_endog);
    const PivotedQR second_qr(second);
    if (!second_qr.full_rank()) {
        throw Error(ErrorCode::WeakFirstStage, kModule, "second-stage design is rank deficient");
    }
    const auto coef = second_qr.solve(y);
    fit.gamma_exog.assign(coef.begin(), coef.begin() + static_cast<std::ptrdiff_t>(kw));
    fit.gamma = coef[kw];

    fit.structural_residuals.assign(y.begin(), y.end());
    for (std::size_t j = 0; j < kw; ++j) {
        const auto& col = exog.column(j);
        for (std::size_t i = 0; i < n; ++i) fit.structural_residuals[i] -= coef[j] * col[i];
    }
    for (std::size_t i = 0; i < n; ++i) fit.structural_residuals[i] -= fit.gamma * endog[i];

    // HC1 sandwich: A (sum u_i^2 xhat_i xhat_i') A with A = (Xhat'Xhat)^{-1}.
    const std::size_t k = second.cols();
    const auto bread = second_qr.gram_inverse();
    std::vector<double> meat(k * k, 0.0);
    std::vector<double> row(k);
    for (std::size_t i = 0; i < n; ++i) {
        const double u2 = fit.structural_residuals[i] * fit.structural_residuals[i];
        for (std::size_t j = 0; j < k; ++j) row[j] = second.column(j)[i];
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = a; b < k; ++b) meat[a * k + b] += u2 * row[a] * row[b];
    }
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < a; ++b) meat[a * k + b] = meat[b * k + a];
    std::vector<double> tmp(k * k, 0.0), cov(k * k, 0.0);
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b)
            for (std::size_t m = 0; m < k; ++m) tmp[a * k + b] += bread[a * k + m] * meat[m * k + b];
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b)
            for (std::size_t m = 0; m < k; ++m) cov[a * k + b] += tmp[a * k + m] * bread[m * k + b];
    const double hc1 = n > k ? static_cast<double>(n) / static_cast<double>(n - k) : 1.0;
    fit.se_gamma_exog.resize(kw);
    for (std::size_t j = 0; j < kw; ++j) fit.se_gamma_exog[j] = std::sqrt(std::max(0.0, hc1 * cov[j * k + j]));
    fit.se_gamma = std::sqrt(std::max(0.0, hc1 * cov[kw * k + kw]));
    return fit;
}

}  // namespace ipe::linalg
