#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "cgc/errors.hpp"
#include "cgc/matrix.hpp"
#include "cgc/tensor.hpp"

namespace cgc {

// The five norms selectable as the similarity measure of the generation
// loss. Order matches the ablation table: 1-norm, 2-norm, inf, nuclear, F.
// Cost: One/Inf/Frobenius are O(mn) scans; Two and Nuclear run an SVD
// (cubic-ish in the smaller dimension), so they dominate the generation
// step when selected.
enum class NormKind { One, Two, Inf, Nuclear, Frobenius };

inline const char* norm_name(NormKind k) {
    switch (k) {
        case NormKind::One: return "one";
        case NormKind::Two: return "two";
        case NormKind::Inf: return "inf";
        case NormKind::Nuclear: return "nuclear";
        case NormKind::Frobenius: return "fro";
    }
    return "?";
}

inline NormKind norm_from_name(const std::string& s) {
    if (s == "one") return NormKind::One;
    if (s == "two") return NormKind::Two;
    if (s == "inf") return NormKind::Inf;
    if (s == "nuclear") return NormKind::Nuclear;
    if (s == "fro") return NormKind::Frobenius;
    throw ConfigError("unknown norm '" + s + "' (expected one|two|inf|nuclear|fro)");
}

inline std::vector<NormKind> all_norm_kinds() {
    return {NormKind::One, NormKind::Two, NormKind::Inf, NormKind::Nuclear, NormKind::Frobenius};
}

struct SvdResult {
    std::vector<double> singular_values; // descending
    Matrix u;                            // m x r
    Matrix v;                            // n x r
};

namespace detail {

// One-sided Jacobi SVD: orthogonalize column pairs of a working copy by
// plane rotations until all pairs are numerically orthogonal. Singular
// values are the resulting column norms. Matrices here are at most a few
// hundred rows, so the O(n^2) sweeps are cheap.
inline SvdResult jacobi_svd_tall(const Matrix& a) {
    const std::size_t m = a.rows(), n = a.cols();
    Matrix b = a;
    Matrix v = Matrix::identity(n);
    const double tol = 1e-14;
    const int max_sweeps = 60;

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    alpha += b(i, p) * b(i, p);
                    beta += b(i, q) * b(i, q);
                    gamma += b(i, p) * b(i, q);
                }
                if (std::abs(gamma) <= tol * std::sqrt(alpha * beta) || gamma == 0.0) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const double bp = b(i, p), bq = b(i, q);
                    b(i, p) = c * bp - s * bq;
                    b(i, q) = s * bp + c * bq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vp = v(i, p), vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        }
        if (!rotated) break;
    }

    std::vector<double> sigma(n);
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += b(i, j) * b(i, j);
        sigma[j] = std::sqrt(s);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&sigma](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

    SvdResult r;
    r.singular_values.resize(n);
    r.u = Matrix(m, n);
    r.v = Matrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = order[k];
        r.singular_values[k] = sigma[j];
        if (sigma[j] > 0.0)
            for (std::size_t i = 0; i < m; ++i) r.u(i, k) = b(i, j) / sigma[j];
        for (std::size_t i = 0; i < n; ++i) r.v(i, k) = v(i, j);
        // Deterministic sign: largest-|entry| of each right vector positive.
        std::size_t imax = 0;
        for (std::size_t i = 1; i < n; ++i)
            if (std::abs(r.v(i, k)) > std::abs(r.v(imax, k))) imax = i;
        if (r.v(imax, k) < 0.0) {
            for (std::size_t i = 0; i < n; ++i) r.v(i, k) = -r.v(i, k);
            for (std::size_t i = 0; i < m; ++i) r.u(i, k) = -r.u(i, k);
        }
    }
    return r;
}

} // namespace detail

inline SvdResult jacobi_svd(const Matrix& a) {
    if (a.empty()) throw ShapeError("jacobi_svd: empty matrix");
    if (a.rows() >= a.cols()) return detail::jacobi_svd_tall(a);
    SvdResult t = detail::jacobi_svd_tall(transpose(a));
    std::swap(t.u, t.v);
    return t;
}

// ---- value-level norms --------------------------------------------------

struct NormValue {
    double value = 0.0;
    Matrix subgradient; // d(norm)/d(m), the convention documented per kind
};

// Value and subgradient of the selected norm. Subgradient conventions:
// 1/inf norms route sign(m) to the lowest-index achieving column/row;
// 2/nuclear use u1*v1^T and U_r*V_r^T from the SVD; Frobenius uses
// m/||m||_F with 0 at the origin.
inline NormValue norm_value(const Matrix& m, NormKind kind) {
    if (m.empty()) throw ShapeError("norm: empty matrix");
    NormValue out;
    out.subgradient = Matrix(m.rows(), m.cols());
    switch (kind) {
        case NormKind::One: {
            std::size_t best = 0;
            double best_sum = -1.0;
            for (std::size_t j = 0; j < m.cols(); ++j) {
                double s = 0.0;
                for (std::size_t i = 0; i < m.rows(); ++i) s += std::abs(m(i, j));
                if (s > best_sum) { best_sum = s; best = j; }
            }
            out.value = best_sum;
            for (std::size_t i = 0; i < m.rows(); ++i) {
                const double x = m(i, best);
                out.subgradient(i, best) = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
            }
            break;
        }
        case NormKind::Inf: {
            std::size_t best = 0;
            double best_sum = -1.0;
            for (std::size_t i = 0; i < m.rows(); ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < m.cols(); ++j) s += std::abs(m(i, j));
                if (s > best_sum) { best_sum = s; best = i; }
            }
            out.value = best_sum;
            for (std::size_t j = 0; j < m.cols(); ++j) {
                const double x = m(best, j);
                out.subgradient(best, j) = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
            }
            break;
        }
        case NormKind::Frobenius: {
            out.value = frobenius(m);
            if (out.value > 0.0) out.subgradient = m * (1.0 / out.value);
            break;
        }
        case NormKind::Two: {
            SvdResult svd = jacobi_svd(m);
            out.value = svd.singular_values.empty() ? 0.0 : svd.singular_values.front();
            if (out.value > 0.0)
                for (std::size_t i = 0; i < m.rows(); ++i)
                    for (std::size_t j = 0; j < m.cols(); ++j)
                        out.subgradient(i, j) = svd.u(i, 0) * svd.v(j, 0);
            break;
        }
        case NormKind::Nuclear: {
            SvdResult svd = jacobi_svd(m);
            const double rank_tol = 1e-12;
            for (std::size_t k = 0; k < svd.singular_values.size(); ++k) {
                if (svd.singular_values[k] <= rank_tol) continue;
                out.value += svd.singular_values[k];
                for (std::size_t i = 0; i < m.rows(); ++i)
                    for (std::size_t j = 0; j < m.cols(); ++j)
                        out.subgradient(i, j) += svd.u(i, k) * svd.v(j, k);
            }
            break;
        }
    }
    return out;
}

// Norm as a scalar node on the tape.
inline Tensor norm(const Tensor& m, NormKind kind) {
    NormValue nv = norm_value(m.value(), kind);
    Tape* t = m.tape();
    const std::size_t im = m.index();
    const Matrix sub = std::move(nv.subgradient);
    return t->record(Matrix{{nv.value}}, m.requires_grad(),
                     [im, sub](Tape& tp, Tape::Node& n) {
                         tp.accumulate(im, sub * n.adjoint(0, 0));
                     });
}

// Largest singular value by power iteration on m^T m. Deterministic: the
// start vector comes from the given seed. Zero matrices return 0.
inline double spectral_norm_power_iteration(const Matrix& m, int iters, double tol,
                                            std::uint64_t seed = 12345) {
    if (m.empty()) throw ShapeError("spectral_norm_power_iteration: empty matrix");
    if (iters < 1) throw ShapeError("spectral_norm_power_iteration: iters must be >= 1");

    Rng rng = make_rng(seed, 0x5eedULL);
    Matrix v = random_normal(m.cols(), 1, 0.0, 1.0, rng);
    double vn = frobenius(v);
    if (vn == 0.0) { v(0, 0) = 1.0; vn = 1.0; }
    v *= 1.0 / vn;

    const Matrix mt = transpose(m);
    double sigma = 0.0;
    for (int it = 0; it < iters; ++it) {
        Matrix mv = matmul(m, v);
        const double s = frobenius(mv);
        if (s == 0.0) return 0.0;
        Matrix w = matmul(mt, mv);
        const double wn = frobenius(w);
        if (wn == 0.0) return s;
        v = w * (1.0 / wn);
        if (std::abs(s - sigma) <= tol * std::max(1.0, s)) return s;
        sigma = s;
    }
    return sigma;
}

} // namespace cgc
