// Homogeneous self-dual embedding interior-point method for
//
//     minimize c^T x   s.t.  A x = b,  G x + s = h,  s in K
//
// where K is a nonnegative orthant followed by second-order cones. Zero-cone
// rows of a ConicProgram become the equality block A; the remaining rows form
// G. Iterates (x, y, z, s, tau, kappa) follow the Mehrotra predictor-corrector
// scheme with Nesterov-Todd scaling, and each iteration factors the
// quasi-definite KKT matrix
//
//     [ eps I   A^T    G^T        ]
//     [ A      -eps I  0          ]
//     [ G       0     -W^2 - eps I ]
//
// once with a sparse LDL^T, solving three right-hand sides with iterative
// refinement against the unregularized system.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/OrderingMethods>

#include "drmcvar/conic.hpp"
#include "drmcvar/error.hpp"

namespace drmcvar {
namespace {

using Vec = Eigen::VectorXd;
using Index = Eigen::Index;
using SpMat = Eigen::SparseMatrix<double>;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double inf_norm(const Vec& v) {
    return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
}

// Nonnegative orthant of size `lp` followed by second-order cones.
class ConeProduct {
public:
    ConeProduct(Index lp, std::vector<Index> soc) : lp_(lp), soc_(std::move(soc)) {
        Index off = lp_;
        for (auto d : soc_) {
            soc_offset_.push_back(off);
            off += d;
        }
        size_ = off;
    }

    Index size() const { return size_; }
    Index lp() const { return lp_; }
    std::size_t num_soc() const { return soc_.size(); }
    Index soc_offset(std::size_t k) const { return soc_offset_[k]; }
    Index soc_size(std::size_t k) const { return soc_[k]; }
    double degree() const { return static_cast<double>(lp_ + static_cast<Index>(soc_.size())); }

    Vec identity() const {
        Vec e = Vec::Zero(size_);
        e.head(lp_).setOnes();
        for (std::size_t k = 0; k < soc_.size(); ++k) e[soc_offset_[k]] = 1.0;
        return e;
    }

    // Smallest t such that u + t e is in the cone (negative when u is interior).
    double interior_shift(const Vec& u) const {
        double t = -std::numeric_limits<double>::infinity();
        if (lp_ > 0) t = -u.head(lp_).minCoeff();
        for (std::size_t k = 0; k < soc_.size(); ++k) {
            const Index o = soc_offset_[k];
            t = std::max(t, u.segment(o + 1, soc_[k] - 1).norm() - u[o]);
        }
        return t;
    }

    Vec shift_into_interior(const Vec& u) const {
        if (size_ == 0) return u;
        const double t = interior_shift(u);
        if (t < 0.0) return u;
        return u + (1.0 + t) * identity();
    }

    // Jordan product.
    Vec product(const Vec& u, const Vec& v) const {
        Vec w(size_);
        w.head(lp_) = u.head(lp_).cwiseProduct(v.head(lp_));
        for (std::size_t k = 0; k < soc_.size(); ++k) {
            const Index o = soc_offset_[k], d = soc_[k];
            w[o] = u.segment(o, d).dot(v.segment(o, d));
            w.segment(o + 1, d - 1) = u[o] * v.segment(o + 1, d - 1) + v[o] * u.segment(o + 1, d - 1);
        }
        return w;
    }

    // Solves lambda o u = v for u.
    Vec divide(const Vec& lambda, const Vec& v) const {
        Vec u(size_);
        u.head(lp_) = v.head(lp_).cwiseQuotient(lambda.head(lp_));
        for (std::size_t k = 0; k < soc_.size(); ++k) {
            const Index o = soc_offset_[k], d = soc_[k];
            const double l0 = lambda[o];
            const auto l1 = lambda.segment(o + 1, d - 1);
            const double det = (l0 - l1.norm()) * (l0 + l1.norm());
            const double u0 = (l0 * v[o] - l1.dot(v.segment(o + 1, d - 1))) / det;
            u[o] = u0;
            u.segment(o + 1, d - 1) = (v.segment(o + 1, d - 1) - u0 * l1) / l0;
        }
        return u;
    }

    // Largest a >= 0 keeping x + a d in the cone (x interior); +inf if unbounded.
    double max_step(const Vec& x, const Vec& d) const {
        double step = std::numeric_limits<double>::infinity();
        for (Index i = 0; i < lp_; ++i) {
            if (d[i] < 0.0) step = std::min(step, -x[i] / d[i]);
        }
        for (std::size_t k = 0; k < soc_.size(); ++k) {
            const Index o = soc_offset_[k], n = soc_[k];
            const auto x1 = x.segment(o + 1, n - 1);
            const auto d1 = d.segment(o + 1, n - 1);
            // f(a) = a2 a^2 + 2 b a + c is det(x + a d).
            const double a2 = d[o] * d[o] - d1.squaredNorm();
            const double b = x[o] * d[o] - x1.dot(d1);
            const double c = (x[o] - x1.norm()) * (x[o] + x1.norm());
            const double disc = b * b - a2 * c;
            if (a2 > 0.0 && (b >= 0.0 || disc < 0.0)) continue;  // never leaves the cone
            if (a2 == 0.0 && b >= 0.0) continue;
            const double root = c / (-b + std::sqrt(std::max(disc, 0.0)));
            if (root >= 0.0) step = std::min(step, root);
        }
        return step;
    }

private:
    Index lp_;
    std::vector<Index> soc_;
    std::vector<Index> soc_offset_;
    Index size_ = 0;
};

// Nesterov-Todd scaling W (symmetric) with W z = W^{-1} s = lambda.
struct Scaling {
    Vec lp_w;                 // diagonal of W on the orthant
    std::vector<double> eta;  // per second-order cone
    std::vector<Vec> wbar;    // normalized scaling point, det(wbar) = 1
    Vec lambda;

    static Scaling identity(const ConeProduct& k) {
        Scaling w;
        w.lp_w = Vec::Ones(k.lp());
        for (std::size_t i = 0; i < k.num_soc(); ++i) {
            w.eta.push_back(1.0);
            Vec e = Vec::Zero(k.soc_size(i));
            e[0] = 1.0;
            w.wbar.push_back(e);
        }
        return w;
    }

    // Returns false if s or z has left the interior.
    bool update(const ConeProduct& k, const Vec& s, const Vec& z) {
        const Index lp = k.lp();
        if (lp > 0 && (s.head(lp).minCoeff() <= 0.0 || z.head(lp).minCoeff() <= 0.0)) return false;
        lp_w = s.head(lp).cwiseQuotient(z.head(lp)).cwiseSqrt();
        eta.assign(k.num_soc(), 1.0);
        wbar.assign(k.num_soc(), Vec());
        for (std::size_t i = 0; i < k.num_soc(); ++i) {
            const Index o = k.soc_offset(i), d = k.soc_size(i);
            const Vec si = s.segment(o, d), zi = z.segment(o, d);
            const double sn = si.tail(d - 1).norm(), zn = zi.tail(d - 1).norm();
            const double sdet = (si[0] - sn) * (si[0] + sn);
            const double zdet = (zi[0] - zn) * (zi[0] + zn);
            if (!(si[0] > sn) || !(zi[0] > zn) || !(sdet > 0.0) || !(zdet > 0.0)) return false;
            const Vec sbar = si / std::sqrt(sdet);
            const Vec zbar = zi / std::sqrt(zdet);
            const double gamma = std::sqrt(0.5 * (1.0 + sbar.dot(zbar)));
            Vec w(d);
            w[0] = (sbar[0] + zbar[0]) / (2.0 * gamma);
            w.tail(d - 1) = (sbar.tail(d - 1) - zbar.tail(d - 1)) / (2.0 * gamma);
            wbar[i] = std::move(w);
            eta[i] = std::pow(sdet / zdet, 0.25);
        }
        lambda = apply(k, z);
        return lambda.allFinite();
    }

    Vec apply(const ConeProduct& k, const Vec& v) const {
        Vec out(v.size());
        out.head(k.lp()) = lp_w.cwiseProduct(v.head(k.lp()));
        for (std::size_t i = 0; i < k.num_soc(); ++i) {
            const Index o = k.soc_offset(i), d = k.soc_size(i);
            const Vec& w = wbar[i];
            const auto w1 = w.tail(d - 1);
            const auto v1 = v.segment(o + 1, d - 1);
            const double w1v1 = w1.dot(v1);
            out[o] = eta[i] * (w[0] * v[o] + w1v1);
            out.segment(o + 1, d - 1) = eta[i] * (v1 + (v[o] + w1v1 / (1.0 + w[0])) * w1);
        }
        return out;
    }

    Vec apply_inverse(const ConeProduct& k, const Vec& v) const {
        Vec out(v.size());
        out.head(k.lp()) = v.head(k.lp()).cwiseQuotient(lp_w);
        for (std::size_t i = 0; i < k.num_soc(); ++i) {
            const Index o = k.soc_offset(i), d = k.soc_size(i);
            const Vec& w = wbar[i];
            const auto w1 = w.tail(d - 1);
            const auto v1 = v.segment(o + 1, d - 1);
            const double w1v1 = w1.dot(v1);
            out[o] = (w[0] * v[o] - w1v1) / eta[i];
            out.segment(o + 1, d - 1) = (v1 + (-v[o] + w1v1 / (1.0 + w[0])) * w1) / eta[i];
        }
        return out;
    }

    // W^2 v, using W^2 = eta^2 (2 wbar wbar^T - J) on each cone.
    Vec apply_squared(const ConeProduct& k, const Vec& v) const {
        Vec out(v.size());
        out.head(k.lp()) = lp_w.cwiseAbs2().cwiseProduct(v.head(k.lp()));
        for (std::size_t i = 0; i < k.num_soc(); ++i) {
            const Index o = k.soc_offset(i), d = k.soc_size(i);
            const auto vi = v.segment(o, d);
            Vec r = 2.0 * wbar[i].dot(vi) * wbar[i];
            r[0] -= vi[0];
            r.tail(d - 1) += vi.tail(d - 1);
            out.segment(o, d) = eta[i] * eta[i] * r;
        }
        return out;
    }
};

// LDL^T factorization of a symmetric quasi-definite matrix with a fixed
// sparsity pattern. Fill-reducing AMD order, elimination tree, up-looking
// numeric phase. Pivots whose sign disagrees with the expected one (or that
// are nearly zero) are replaced by +-dynamic_reg; callers recover accuracy
// with iterative refinement.
class QuasiDefiniteLdl {
public:
    static constexpr double pivot_threshold = 1e-13;
    static constexpr double dynamic_reg = 1e-6;

    // `rows`/`cols` list the lower-triangle entries (row >= col) in the order
    // values will later be supplied; `sign` is +1 or -1 per pivot.
    void analyze(Index n, const std::vector<Index>& rows, const std::vector<Index>& cols,
                 const std::vector<int>& sign) {
        n_ = n;
        SpMat pattern(n, n);
        {
            std::vector<Eigen::Triplet<double>> t;
            t.reserve(rows.size());
            for (std::size_t e = 0; e < rows.size(); ++e) t.emplace_back(rows[e], cols[e], 1.0);
            pattern.setFromTriplets(t.begin(), t.end());
        }
        Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> pinv;
        Eigen::AMDOrdering<int> amd;
        amd(pattern.selfadjointView<Eigen::Lower>(), pinv);
        const Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> perm = pinv.inverse();
        new_of_old_.assign(perm.indices().data(), perm.indices().data() + n);
        sign_.assign(static_cast<std::size_t>(n), 1);
        for (Index i = 0; i < n; ++i) sign_[static_cast<std::size_t>(new_of_old_[i])] = sign[static_cast<std::size_t>(i)];

        // Upper-triangular CSC of the permuted matrix; duplicates share a slot.
        struct Item {
            Index col, row;
            std::size_t entry;
        };
        std::vector<Item> items(rows.size());
        for (std::size_t e = 0; e < rows.size(); ++e) {
            const Index a = new_of_old_[static_cast<std::size_t>(rows[e])];
            const Index b = new_of_old_[static_cast<std::size_t>(cols[e])];
            items[e] = {std::max(a, b), std::min(a, b), e};
        }
        std::sort(items.begin(), items.end(), [](const Item& x, const Item& y) {
            return x.col != y.col ? x.col < y.col : x.row < y.row;
        });
        ap_.assign(static_cast<std::size_t>(n) + 1, 0);
        ai_.clear();
        slot_.assign(rows.size(), 0);
        for (std::size_t k = 0; k < items.size(); ++k) {
            const bool fresh = k == 0 || items[k].col != items[k - 1].col || items[k].row != items[k - 1].row;
            if (fresh) {
                ai_.push_back(items[k].row);
                ++ap_[static_cast<std::size_t>(items[k].col) + 1];
            }
            slot_[items[k].entry] = ai_.size() - 1;
        }
        for (std::size_t j = 0; j < static_cast<std::size_t>(n); ++j) ap_[j + 1] += ap_[j];
        ax_.assign(ai_.size(), 0.0);

        // Elimination tree and column counts of L.
        etree_.assign(static_cast<std::size_t>(n), -1);
        std::vector<Index> lnz(static_cast<std::size_t>(n), 0), work(static_cast<std::size_t>(n), -1);
        for (Index j = 0; j < n; ++j) {
            work[static_cast<std::size_t>(j)] = j;
            for (Index p = ap_[static_cast<std::size_t>(j)]; p < ap_[static_cast<std::size_t>(j) + 1]; ++p) {
                Index i = ai_[static_cast<std::size_t>(p)];
                while (work[static_cast<std::size_t>(i)] != j) {
                    if (etree_[static_cast<std::size_t>(i)] == -1) etree_[static_cast<std::size_t>(i)] = j;
                    ++lnz[static_cast<std::size_t>(i)];
                    work[static_cast<std::size_t>(i)] = j;
                    i = etree_[static_cast<std::size_t>(i)];
                }
            }
        }
        lp_.assign(static_cast<std::size_t>(n) + 1, 0);
        for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) lp_[i + 1] = lp_[i] + lnz[i];
        li_.assign(static_cast<std::size_t>(lp_.back()), 0);
        lx_.assign(static_cast<std::size_t>(lp_.back()), 0.0);
        d_.assign(static_cast<std::size_t>(n), 0.0);
        dinv_.assign(static_cast<std::size_t>(n), 0.0);
    }

    // Returns false on a non-finite pivot.
    bool factor(const std::vector<double>& values) {
        std::fill(ax_.begin(), ax_.end(), 0.0);
        for (std::size_t e = 0; e < values.size(); ++e) ax_[slot_[e]] += values[e];
        const auto n = static_cast<std::size_t>(n_);
        std::vector<double> y(n, 0.0);
        std::vector<char> used(n, 0);
        std::vector<Index> yidx(n), buffer(n), next(lp_.begin(), lp_.end() - 1);
        regularized_ = 0;
        for (std::size_t k = 0; k < n; ++k) {
            d_[k] = 0.0;
            std::size_t nnz = 0;
            for (Index p = ap_[k]; p < ap_[k + 1]; ++p) {
                const auto b = static_cast<std::size_t>(ai_[static_cast<std::size_t>(p)]);
                if (b == k) {
                    d_[k] = ax_[static_cast<std::size_t>(p)];
                    continue;
                }
                y[b] = ax_[static_cast<std::size_t>(p)];
                if (used[b]) continue;
                used[b] = 1;
                std::size_t len = 0;
                buffer[len++] = static_cast<Index>(b);
                Index i = etree_[b];
                while (i != -1 && static_cast<std::size_t>(i) < k && !used[static_cast<std::size_t>(i)]) {
                    used[static_cast<std::size_t>(i)] = 1;
                    buffer[len++] = i;
                    i = etree_[static_cast<std::size_t>(i)];
                }
                while (len > 0) yidx[nnz++] = buffer[--len];
            }
            for (std::size_t t = nnz; t-- > 0;) {
                const auto c = static_cast<std::size_t>(yidx[t]);
                const double yc = y[c];
                const auto end = static_cast<std::size_t>(next[c]);
                for (auto j = static_cast<std::size_t>(lp_[c]); j < end; ++j) {
                    y[static_cast<std::size_t>(li_[j])] -= lx_[j] * yc;
                }
                li_[end] = static_cast<Index>(k);
                lx_[end] = yc * dinv_[c];
                d_[k] -= yc * lx_[end];
                ++next[c];
                y[c] = 0.0;
                used[c] = 0;
            }
            if (!std::isfinite(d_[k])) return false;
            if (sign_[k] * d_[k] <= pivot_threshold) {
                d_[k] = sign_[k] * dynamic_reg;
                ++regularized_;
            }
            dinv_[k] = 1.0 / d_[k];
        }
        return true;
    }

    Vec solve(const Vec& rhs) const {
        const auto n = static_cast<std::size_t>(n_);
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) x[static_cast<std::size_t>(new_of_old_[i])] = rhs[static_cast<Index>(i)];
        for (std::size_t i = 0; i < n; ++i) {
            for (auto j = static_cast<std::size_t>(lp_[i]); j < static_cast<std::size_t>(lp_[i + 1]); ++j) {
                x[static_cast<std::size_t>(li_[j])] -= lx_[j] * x[i];
            }
        }
        for (std::size_t i = 0; i < n; ++i) x[i] *= dinv_[i];
        for (std::size_t i = n; i-- > 0;) {
            for (auto j = static_cast<std::size_t>(lp_[i]); j < static_cast<std::size_t>(lp_[i + 1]); ++j) {
                x[i] -= lx_[j] * x[static_cast<std::size_t>(li_[j])];
            }
        }
        Vec out(n_);
        for (std::size_t i = 0; i < n; ++i) out[static_cast<Index>(i)] = x[static_cast<std::size_t>(new_of_old_[i])];
        return out;
    }

    int regularized_pivots() const { return regularized_; }

private:
    Index n_ = 0;
    std::vector<Index> new_of_old_;
    std::vector<int> sign_;
    std::vector<Index> ap_, ai_;
    std::vector<std::size_t> slot_;
    std::vector<double> ax_;
    std::vector<Index> etree_, lp_, li_;
    std::vector<double> lx_, d_, dinv_;
    int regularized_ = 0;
};

// Quasi-definite KKT system with a fixed pattern.
class KktSystem {
public:
    KktSystem(const SpMat& a, const SpMat& g, const ConeProduct& cones, double reg, int refine)
        : a_(a), g_(g), at_(a.transpose()), gt_(g.transpose()), cones_(cones), reg_(reg),
          refine_(refine) {
        n_ = a.cols();
        p_ = a.rows();
        m_ = g.rows();
    }

    Index dim() const { return n_ + p_ + m_; }

    bool factor(const Scaling& w) {
        scaling_ = &w;
        rows_.clear();
        cols_.clear();
        values_.clear();
        auto add = [&](Index r, Index c, double v) {
            rows_.push_back(r);
            cols_.push_back(c);
            values_.push_back(v);
        };
        for (Index i = 0; i < n_; ++i) add(i, i, reg_);
        for (Index j = 0; j < a_.outerSize(); ++j) {
            for (SpMat::InnerIterator it(a_, j); it; ++it) add(n_ + it.row(), j, it.value());
        }
        for (Index i = 0; i < p_; ++i) add(n_ + i, n_ + i, -reg_);
        for (Index j = 0; j < g_.outerSize(); ++j) {
            for (SpMat::InnerIterator it(g_, j); it; ++it) add(n_ + p_ + it.row(), j, it.value());
        }
        const Index z0 = n_ + p_;
        for (Index i = 0; i < cones_.lp(); ++i) add(z0 + i, z0 + i, -(w.lp_w[i] * w.lp_w[i]) - reg_);
        for (std::size_t k = 0; k < cones_.num_soc(); ++k) {
            const Index o = z0 + cones_.soc_offset(k), d = cones_.soc_size(k);
            const Vec& wb = w.wbar[k];
            const double e2 = w.eta[k] * w.eta[k];
            for (Index j = 0; j < d; ++j) {
                for (Index i = j; i < d; ++i) {
                    double v = 2.0 * wb[i] * wb[j];
                    if (i == j) v += (i == 0 ? -1.0 : 1.0);
                    v *= -e2;
                    if (i == j) v -= reg_;
                    add(o + i, o + j, v);
                }
            }
        }
        if (!analyzed_) {
            std::vector<int> sign(static_cast<std::size_t>(dim()), -1);
            std::fill(sign.begin(), sign.begin() + n_, 1);
            ldl_.analyze(dim(), rows_, cols_, sign);
            analyzed_ = true;
        }
        return ldl_.factor(values_);
    }

    // Unregularized K v.
    Vec multiply(const Vec& v) const {
        Vec out(dim());
        const auto vx = v.head(n_);
        const auto vy = v.segment(n_, p_);
        const Vec vz = v.tail(m_);
        out.head(n_) = at_ * vy + gt_ * vz;
        out.segment(n_, p_) = a_ * vx;
        out.tail(m_) = g_ * vx - scaling_->apply_squared(cones_, vz);
        return out;
    }

    Vec solve(const Vec& rhs) const { return refine(rhs, ldl_.solve(rhs)); }

    // Iterative refinement of the guess x against the unregularized matrix.
    Vec refine(const Vec& rhs, Vec x) const {
        const double target = 1e-12 + 1e-13 * inf_norm(rhs);
        Vec r = rhs - multiply(x);
        double err = inf_norm(r);
        for (int k = 0; k < refine_ && err > target; ++k) {
            const Vec trial = x + ldl_.solve(r);
            Vec trial_r = rhs - multiply(trial);
            const double trial_err = inf_norm(trial_r);
            // Stop once a correction no longer pays for itself.
            if (!(trial_err < err)) break;
            const bool stalled = trial_err > 0.2 * err;
            x = trial;
            r = std::move(trial_r);
            err = trial_err;
            if (stalled) break;
        }
        return x;
    }

private:
    const SpMat& a_;
    const SpMat& g_;
    SpMat at_, gt_;
    const ConeProduct& cones_;
    double reg_;
    int refine_;
    Index n_ = 0, p_ = 0, m_ = 0;
    std::vector<Index> rows_, cols_;
    std::vector<double> values_;
    QuasiDefiniteLdl ldl_;
    bool analyzed_ = false;
    const Scaling* scaling_ = nullptr;
};

// Row partition of a ConicProgram into equality rows and cone rows.
struct Partition {
    SpMat a, g;
    Vec b, h;
    std::vector<Index> eq_rows;   // program row of each equality row
    std::vector<Index> cone_rows; // program row of each G row
    std::vector<Index> soc_sizes;
    Index lp = 0;
    // Rows dropped by presolve (empty rows that are trivially satisfied).
    std::vector<Index> dropped;
    // First empty row that cannot be satisfied, with its certificate multiplier.
    Index infeasible_row = -1;
    double infeasible_multiplier = 0.0;
};

Partition partition(const ConicProgram& prog) {
    Partition p;
    const Index n = static_cast<Index>(prog.num_variables());
    std::vector<Index> row_nnz(prog.num_rows(), 0);
    for (Index r = 0; r < prog.constraints.outerSize(); ++r) {
        for (SparseRows::InnerIterator it(prog.constraints, r); it; ++it) {
            if (it.value() != 0.0) ++row_nnz[static_cast<std::size_t>(r)];
        }
    }

    std::vector<Index> lp_rows, soc_rows;
    Index off = 0;
    for (const auto& c : prog.cones) {
        const Index k = static_cast<Index>(c.size);
        for (Index r = off; r < off + k; ++r) {
            const bool empty = row_nnz[static_cast<std::size_t>(r)] == 0;
            const double b = prog.rhs[r];
            if (c.kind == ConeKind::zero) {
                if (!empty) {
                    p.eq_rows.push_back(r);
                } else if (b == 0.0) {
                    p.dropped.push_back(r);
                } else if (p.infeasible_row < 0) {
                    p.infeasible_row = r;
                    p.infeasible_multiplier = -1.0 / b;
                }
            } else if (c.kind == ConeKind::nonnegative) {
                if (!empty) {
                    lp_rows.push_back(r);
                } else if (b >= 0.0) {
                    p.dropped.push_back(r);
                } else if (p.infeasible_row < 0) {
                    p.infeasible_row = r;
                    p.infeasible_multiplier = -1.0 / b;
                }
            }
        }
        if (c.kind == ConeKind::second_order) {
            for (Index r = off; r < off + k; ++r) soc_rows.push_back(r);
            p.soc_sizes.push_back(k);
        }
        off += k;
    }
    p.lp = static_cast<Index>(lp_rows.size());
    p.cone_rows = lp_rows;
    p.cone_rows.insert(p.cone_rows.end(), soc_rows.begin(), soc_rows.end());

    auto extract = [&](const std::vector<Index>& rows, SpMat& out, Vec& rhs) {
        std::vector<Eigen::Triplet<double>> t;
        rhs.resize(static_cast<Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            rhs[static_cast<Index>(i)] = prog.rhs[rows[i]];
            for (SparseRows::InnerIterator it(prog.constraints, rows[i]); it; ++it) {
                if (it.value() != 0.0) t.emplace_back(static_cast<Index>(i), it.col(), it.value());
            }
        }
        out.resize(static_cast<Index>(rows.size()), n);
        out.setFromTriplets(t.begin(), t.end());
    };
    extract(p.eq_rows, p.a, p.b);
    extract(p.cone_rows, p.g, p.h);
    return p;
}

// Ruiz equilibration of [A; G]. The scaled data are E_A A D and E_G G D,
// with a single factor per second-order cone so every cone is preserved.
// Solutions map back as x = D xs, y = E_A ys, z = E_G zs, s = ss / E_G.
struct Equilibration {
    Vec col;
    Vec eq_row;
    Vec cone_row;
};

Equilibration equilibrate(Partition& part, const ConeProduct& cones, int passes) {
    const Index n = part.a.cols(), p = part.a.rows(), m = part.g.rows();
    Equilibration e{Vec::Ones(n), Vec::Ones(p), Vec::Ones(m)};
    auto factor = [](double v) { return v > 1e-12 ? 1.0 / std::sqrt(v) : 1.0; };
    for (int pass = 0; pass < passes; ++pass) {
        Vec cmax = Vec::Zero(n), amax = Vec::Zero(p), gmax = Vec::Zero(m);
        for (Index j = 0; j < n; ++j) {
            for (SpMat::InnerIterator it(part.a, j); it; ++it) {
                const double v = std::abs(it.value());
                cmax[j] = std::max(cmax[j], v);
                amax[it.row()] = std::max(amax[it.row()], v);
            }
            for (SpMat::InnerIterator it(part.g, j); it; ++it) {
                const double v = std::abs(it.value());
                cmax[j] = std::max(cmax[j], v);
                gmax[it.row()] = std::max(gmax[it.row()], v);
            }
        }
        for (std::size_t k = 0; k < cones.num_soc(); ++k) {
            auto block = gmax.segment(cones.soc_offset(k), cones.soc_size(k));
            block.setConstant(block.maxCoeff());
        }
        const Vec fc = cmax.unaryExpr(factor);
        const Vec fa = amax.unaryExpr(factor);
        const Vec fg = gmax.unaryExpr(factor);
        for (Index j = 0; j < n; ++j) {
            for (SpMat::InnerIterator it(part.a, j); it; ++it) it.valueRef() *= fa[it.row()] * fc[j];
            for (SpMat::InnerIterator it(part.g, j); it; ++it) it.valueRef() *= fg[it.row()] * fc[j];
        }
        e.col.array() *= fc.array();
        e.eq_row.array() *= fa.array();
        e.cone_row.array() *= fg.array();
    }
    part.b.array() *= e.eq_row.array();
    part.h.array() *= e.cone_row.array();
    return e;
}

} // namespace

SolverResult solve(const ConicProgram& program, const SolverSettings& settings,
                   const IterationCallback& on_iteration) {
    settings.validate();
    program.validate();

    const Index n = static_cast<Index>(program.num_variables());
    const Index rows = static_cast<Index>(program.num_rows());
    Partition part = partition(program);
    const ConeProduct cones(part.lp, part.soc_sizes);
    const Index p = part.a.rows();
    const Index m = part.g.rows();

    SolverResult result;
    result.primal = Vec::Zero(n);
    result.dual = Vec::Zero(rows);
    result.slack = Vec::Zero(rows);

    if (part.infeasible_row >= 0) {
        result.status = SolveStatus::infeasible;
        result.dual[part.infeasible_row] = part.infeasible_multiplier;
        result.certificate_residual = 0.0;
        result.diagnostics = "row " + std::to_string(part.infeasible_row) +
                             " has no coefficients and an unsatisfiable right-hand side";
        result.primal_objective = kNaN;
        result.dual_objective = kNaN;
        return result;
    }

    const Equilibration eq = equilibrate(part, cones, 10);
    const Vec c = eq.col.cwiseProduct(program.objective);
    const Vec& b = part.b;
    const Vec& h = part.h;

    // Unscaled (x, y, z, s) divided by `scale`, scattered to program row order.
    auto store = [&](const Vec& x, const Vec& y, const Vec& z, const Vec& s, double scale) {
        result.primal = eq.col.cwiseProduct(x) / scale;
        result.dual.setZero();
        result.slack.setZero();
        for (Index i = 0; i < p; ++i) {
            result.dual[part.eq_rows[static_cast<std::size_t>(i)]] = eq.eq_row[i] * y[i] / scale;
        }
        for (Index i = 0; i < m; ++i) {
            const Index r = part.cone_rows[static_cast<std::size_t>(i)];
            result.dual[r] = eq.cone_row[i] * z[i] / scale;
            result.slack[r] = s[i] / eq.cone_row[i] / scale;
        }
        for (Index r : part.dropped) result.slack[r] = program.rhs[r];
    };

    KktSystem kkt(part.a, part.g, cones, settings.static_regularization, settings.refinement_steps);
    Scaling w = Scaling::identity(cones);

    auto breakdown = [&](std::string why, int iter) {
        result.status = SolveStatus::max_iter;
        result.iterations = iter;
        result.diagnostics = std::move(why);
        return result;
    };

    if (!kkt.factor(w)) return breakdown("KKT factorization failed at initialization", 0);

    // Initial point: least-squares primal and dual points shifted into the cone.
    Vec x, y, z, s;
    {
        Vec rhs = Vec::Zero(kkt.dim());
        rhs.segment(n, p) = b;
        rhs.tail(m) = h;
        const Vec sol = kkt.solve(rhs);
        x = sol.head(n);
        s = cones.shift_into_interior(-sol.tail(m));
    }
    {
        Vec rhs = Vec::Zero(kkt.dim());
        rhs.head(n) = -c;
        const Vec sol = kkt.solve(rhs);
        y = sol.segment(n, p);
        z = cones.shift_into_interior(sol.tail(m));
    }
    double tau = 1.0, kappa = 1.0;

    const double feastol = settings.feasibility_tolerance;
    const double gaptol = settings.gap_tolerance;
    const double degree = cones.degree();
    double last_step = 0.0, last_sigma = 0.0;

    for (int iter = 0;; ++iter) {
        // Residuals of the embedding.
        const Vec rx = part.a.transpose() * y + part.g.transpose() * z + c * tau;
        const Vec ry = -(part.a * x) + b * tau;
        const Vec rz = -(part.g * x) + h * tau - s;
        const double ctx = c.dot(x);
        const double bty = b.dot(y) + h.dot(z);
        const double rtau = -ctx - bty - kappa;

        // Progress is measured on the original (unscaled) data.
        IterationInfo info;
        info.iteration = iter;
        info.primal_objective = ctx / tau;
        info.dual_objective = -bty / tau;
        info.primal_residual =
            std::max(inf_norm(ry.cwiseQuotient(eq.eq_row)), inf_norm(rz.cwiseQuotient(eq.cone_row))) / tau;
        info.dual_residual = inf_norm(rx.cwiseQuotient(eq.col)) / tau;
        info.gap = std::abs(s.dot(z)) / (tau * tau);
        info.tau = tau;
        info.kappa = kappa;
        info.step = last_step;
        info.sigma = last_sigma;
        if (on_iteration) on_iteration(info);

        result.iterations = iter;
        if (!std::isfinite(info.primal_residual) || !std::isfinite(info.dual_residual) ||
            !std::isfinite(info.gap)) {
            return breakdown("non-finite iterate", iter);
        }

        if (info.primal_residual <= feastol && info.dual_residual <= feastol && info.gap <= gaptol) {
            result.status = SolveStatus::optimal;
            store(x, y, z, s, tau);
            result.primal_objective = program.objective.dot(result.primal);
            result.dual_objective = -program.rhs.dot(result.dual);
            result.residuals = check_kkt(program, result);
            return result;
        }

        // Certificates of infeasibility.
        if (bty < 0.0) {
            const Vec aty = part.a.transpose() * y + part.g.transpose() * z;
            const double pinf = inf_norm(aty.cwiseQuotient(eq.col)) / -bty;
            if (pinf <= feastol) {
                result.status = SolveStatus::infeasible;
                store(x, y, z, s, -bty);
                result.primal.setZero();
                result.slack.setZero();
                result.certificate_residual = pinf;
                result.primal_objective = kNaN;
                result.dual_objective = kNaN;
                result.residuals = check_kkt(program, result);
                return result;
            }
        }
        if (ctx < 0.0) {
            const Vec ax = part.a * x;
            const Vec gxs = part.g * x + s;
            const double dinf =
                std::max(inf_norm(ax.cwiseQuotient(eq.eq_row)), inf_norm(gxs.cwiseQuotient(eq.cone_row))) / -ctx;
            if (dinf <= feastol) {
                result.status = SolveStatus::unbounded;
                store(x, y, z, s, -ctx);
                result.dual.setZero();
                result.certificate_residual = dinf;
                result.primal_objective = -std::numeric_limits<double>::infinity();
                result.dual_objective = kNaN;
                result.residuals = check_kkt(program, result);
                return result;
            }
        }

        if (iter >= settings.max_iterations) {
            result.status = SolveStatus::max_iter;
            store(x, y, z, s, tau);
            result.primal_objective = info.primal_objective;
            result.dual_objective = info.dual_objective;
            result.residuals = check_kkt(program, result);
            std::ostringstream msg;
            msg << "iteration limit reached (pres " << info.primal_residual << ", dres "
                << info.dual_residual << ", gap " << info.gap << ")";
            result.diagnostics = msg.str();
            return result;
        }

        // Scaling and factorization for this iteration.
        if (!w.update(cones, s, z)) return breakdown("iterate left the cone interior", iter);
        if (!kkt.factor(w)) return breakdown("KKT factorization failed", iter);

        const double mu = (s.dot(z) + tau * kappa) / (degree + 1.0);
        const Vec& lambda = w.lambda;

        Vec rhs1(kkt.dim());
        rhs1 << -c, b, h;
        const Vec u1 = kkt.solve(rhs1);
        const double g1 = c.dot(u1.head(n)) + b.dot(u1.segment(n, p)) + h.dot(u1.tail(m));

        // Search direction for complementarity targets xi_s (cone) and
        // xi_tau, with residuals weighted by (1 - sigma).
        struct Direction {
            Vec dx, dy, dz, ds_scaled, dz_scaled;
            double dtau, dkappa;
        };
        auto direction = [&](const Vec& xi_s, double xi_tau, double sigma) -> Direction {
            const double f = 1.0 - sigma;
            const Vec lam_div = cones.divide(lambda, xi_s);
            Vec rhs0(kkt.dim());
            rhs0 << -f * rx, f * ry, f * rz - w.apply(cones, lam_div);
            const Vec u0 = kkt.solve(rhs0);
            const double g0 = c.dot(u0.head(n)) + b.dot(u0.segment(n, p)) + h.dot(u0.tail(m));
            Direction d;
            d.dtau = (g0 + xi_tau / tau - f * rtau) / (kappa / tau - g1);
            // Refining against the combined right-hand side removes the
            // cancellation error of u0 + dtau u1 when the KKT matrix is nearly singular.
            const Vec u = kkt.refine(rhs0 + d.dtau * rhs1, u0 + d.dtau * u1);
            d.dx = u.head(n);
            d.dy = u.segment(n, p);
            d.dz = u.tail(m);
            d.dz_scaled = w.apply(cones, d.dz);
            d.ds_scaled = lam_div - d.dz_scaled;
            d.dkappa = (xi_tau - kappa * d.dtau) / tau;
            return d;
        };
        auto step_to_boundary = [&](const Direction& d) {
            double a = std::min(cones.max_step(lambda, d.ds_scaled), cones.max_step(lambda, d.dz_scaled));
            if (d.dtau < 0.0) a = std::min(a, -tau / d.dtau);
            if (d.dkappa < 0.0) a = std::min(a, -kappa / d.dkappa);
            return a;
        };

        // Predictor.
        const Vec e = cones.identity();
        const Direction aff = direction(-cones.product(lambda, lambda), -tau * kappa, 0.0);
        const double a_aff = std::min(1.0, step_to_boundary(aff));
        const double sigma = std::clamp(std::pow(1.0 - a_aff, 3), 0.0, 1.0);

        // Corrector.
        const Vec xi_s = -cones.product(lambda, lambda) -
                         cones.product(aff.ds_scaled, aff.dz_scaled) + sigma * mu * e;
        const double xi_tau = -tau * kappa - aff.dtau * aff.dkappa + sigma * mu;
        const Direction d = direction(xi_s, xi_tau, sigma);
        const double step = std::min(1.0, settings.step_fraction * step_to_boundary(d));
        if (!std::isfinite(step) || !d.dx.allFinite() || !d.dz.allFinite()) {
            return breakdown("non-finite search direction", iter);
        }
        if (step < 1e-12) {
            store(x, y, z, s, tau);
            result.residuals = check_kkt(program, result);
            std::ostringstream msg;
            msg << "step length underflow (pres " << info.primal_residual << ", dres "
                << info.dual_residual << ", gap " << info.gap << ")";
            return breakdown(msg.str(), iter);
        }

        x += step * d.dx;
        y += step * d.dy;
        z += step * d.dz;
        s += step * w.apply(cones, d.ds_scaled);
        tau += step * d.dtau;
        kappa += step * d.dkappa;
        last_step = step;
        last_sigma = sigma;
    }
}

} // namespace drmcvar
