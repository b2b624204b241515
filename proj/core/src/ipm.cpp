#include "pairflow/ipm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "pairflow/error.hpp"
#include "pairflow/ldlt.hpp"
#include "random.hpp"

namespace pairflow {

void IpmConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw InfeasibleConfig(std::string("IpmConfig: ") + what);
  };
  require(std::isfinite(lambda_reg) && lambda_reg >= 0.0, "lambda_reg must be >= 0");
  require(mu0 > 0.0, "mu0 must be > 0");
  require(sigma > 0.0 && sigma < 1.0, "sigma must lie in (0, 1)");
  require(mu_min > 0.0 && mu_min <= mu0, "mu_min must lie in (0, mu0]");
  require(tol_kkt > 0.0, "tol_kkt must be > 0");
  require(tol_orth > 0.0, "tol_orth must be > 0");
  require(max_outer > 0, "max_outer must be > 0");
  require(max_newton > 0, "max_newton must be > 0");
  require(ftb_tau > 0.0 && ftb_tau < 1.0, "ftb_tau must lie in (0, 1)");
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kKappaEpsilon = 10.0;    // inner tolerance is kKappaEpsilon * mu
constexpr double kKappaSigma = 1e10;      // dual safeguard band
constexpr double kArmijo = 1e-4;
constexpr int kMaxHalvings = 30;
constexpr double kShiftStart = 1e-8;
constexpr double kShiftCap = 1e20;
constexpr double kConstraintShift = 1e-8;
constexpr double kPenaltyRho = 0.1;
constexpr int kMaxSoc = 4;

Eigen::Index sz(Index n) { return static_cast<Eigen::Index>(n); }

void check_problem(const FactorPair& w, const VolumeMatrix& v, const PairGraph& g) {
  if (w.n() != v.n() || g.n() != v.n()) {
    throw DimensionMismatch("factor, volume and mask dimensions disagree");
  }
  for (Index i = 0; i < v.n(); ++i) {
    for (Index j = i + 1; j < v.n(); ++j) {
      if (v(i, j) > 0.0 && !g.has_edge(i, j)) {
        throw InconsistentInput("observed volume outside the mask at (" + std::to_string(i) +
                                ", " + std::to_string(j) + ")");
      }
    }
  }
}

// Adds factor * (gradient, Hessian) of sum_{i != j} mask_ij (K*_ij - target_ij)^2
// term by term: for each ordered cell the residual
//   A = w1_i w1_j - w2_i w2_j - target_ij
// and the indicator-weighted factor vector
//   B = w1_j e(w1_i) + w1_i e(w1_j) - w2_j e(w2_i) - w2_i e(w2_j).
void accumulate_cell_terms(const FactorPair& w, const MatrixXd& mask, const MatrixXd& target,
                           double factor, VectorXd* grad, MatrixXd* hess) {
  const Eigen::Index n = w.w1.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double gij = mask(i, j);
      if (gij == 0.0) continue;
      const double a = w.w1(i) * w.w1(j) - w.w2(i) * w.w2(j) - target(i, j);
      const std::array<Eigen::Index, 4> idx{i, j, n + i, n + j};
      const std::array<double, 4> b{w.w1(j), w.w1(i), -w.w2(j), -w.w2(i)};
      const double c = 2.0 * factor * gij;
      if (grad != nullptr) {
        for (int k = 0; k < 4; ++k) (*grad)(idx[k]) += c * a * b[k];
      }
      if (hess != nullptr) {
        for (int k = 0; k < 4; ++k) {
          for (int m = 0; m < 4; ++m) (*hess)(idx[k], idx[m]) += c * b[k] * b[m];
        }
        (*hess)(i, j) += c * a;
        (*hess)(j, i) += c * a;
        (*hess)(n + i, n + j) -= c * a;
        (*hess)(n + j, n + i) -= c * a;
      }
    }
  }
}

struct MaskPair {
  MatrixXd observed;    // G
  MatrixXd unobserved;  // 1 - G off the diagonal
};

MaskPair make_masks(const PairGraph& g) {
  const Eigen::Index n = sz(g.n());
  MaskPair m{MatrixXd::Zero(n, n), MatrixXd::Zero(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      if (g.has_edge(static_cast<Index>(i), static_cast<Index>(j))) {
        m.observed(i, j) = 1.0;
      } else {
        m.unobserved(i, j) = 1.0;
      }
    }
  }
  return m;
}

// Sparse row of the inequality Jacobian (at most four nonzeros).
struct SparseRow {
  int nnz = 0;
  std::array<Eigen::Index, 4> idx{};
  std::array<double, 4> val{};

  double dot(const VectorXd& x) const {
    double acc = 0.0;
    for (int k = 0; k < nnz; ++k) acc += val[k] * x(idx[k]);
    return acc;
  }
};

std::vector<SparseRow> inequality_rows(const FactorPair& w) {
  const Eigen::Index n = w.w1.size();
  std::vector<SparseRow> rows;
  rows.reserve(inequality_count(static_cast<Index>(n)));
  for (Eigen::Index k = 0; k < n; ++k) {
    SparseRow r;
    r.nnz = 1;
    r.idx[0] = k;
    r.val[0] = -1.0;
    rows.push_back(r);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      SparseRow r;
      r.nnz = 4;
      r.idx = {i, j, n + i, n + j};
      r.val = {-w.w1(j), -w.w1(i), w.w2(j), w.w2(i)};
      rows.push_back(r);
    }
  }
  return rows;
}

VectorXd jh_times(const std::vector<SparseRow>& rows, const VectorXd& x) {
  VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t p = 0; p < rows.size(); ++p) out(static_cast<Eigen::Index>(p)) = rows[p].dot(x);
  return out;
}

VectorXd jh_transpose_times(const std::vector<SparseRow>& rows, const VectorXd& y, Eigen::Index dim) {
  VectorXd out = VectorXd::Zero(dim);
  for (std::size_t p = 0; p < rows.size(); ++p) {
    const double yp = y(static_cast<Eigen::Index>(p));
    for (int k = 0; k < rows[p].nnz; ++k) out(rows[p].idx[k]) += rows[p].val[k] * yp;
  }
  return out;
}

VectorXd objective_gradient(const FactorPair& w, const VolumeMatrix& v, const MaskPair& masks,
                            double lambda_reg) {
  VectorXd grad = VectorXd::Zero(2 * w.w1.size());
  accumulate_cell_terms(w, masks.observed, v.values(), 1.0, &grad, nullptr);
  if (lambda_reg != 0.0) {
    const MatrixXd zero = MatrixXd::Zero(w.w1.size(), w.w1.size());
    accumulate_cell_terms(w, masks.unobserved, zero, lambda_reg, &grad, nullptr);
  }
  return grad;
}

MatrixXd objective_hessian(const FactorPair& w, const VolumeMatrix& v, const MaskPair& masks,
                           double lambda_reg) {
  const Eigen::Index dim = 2 * w.w1.size();
  MatrixXd hess = MatrixXd::Zero(dim, dim);
  accumulate_cell_terms(w, masks.observed, v.values(), 1.0, nullptr, &hess);
  if (lambda_reg != 0.0) {
    const MatrixXd zero = MatrixXd::Zero(w.w1.size(), w.w1.size());
    accumulate_cell_terms(w, masks.unobserved, zero, lambda_reg, nullptr, &hess);
  }
  // Accumulation order can leave the two triangles a rounding apart.
  MatrixXd sym = 0.5 * (hess + hess.transpose());
  return sym;
}

double objective_value(const FactorPair& w, const VolumeMatrix& v, const MaskPair& masks,
                       double lambda_reg) {
  const Eigen::Index n = w.w1.size();
  double fit = 0.0;
  double reg = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double k = w.w1(i) * w.w1(j) - w.w2(i) * w.w2(j);
      if (masks.observed(i, j) != 0.0) {
        const double r = k - v(static_cast<Index>(i), static_cast<Index>(j));
        fit += r * r;
      } else {
        reg += k * k;
      }
    }
  }
  return fit + lambda_reg * reg;
}

VectorXd inequality_values(const FactorPair& w) {
  const Eigen::Index n = w.w1.size();
  VectorXd h(static_cast<Eigen::Index>(inequality_count(static_cast<Index>(n))));
  Eigen::Index p = 0;
  for (Eigen::Index k = 0; k < n; ++k) h(p++) = -w.w1(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) h(p++) = -(w.w1(i) * w.w1(j) - w.w2(i) * w.w2(j));
  }
  return h;
}

VectorXd equality_gradient(const FactorPair& w) {
  VectorXd jg(2 * w.w1.size());
  jg << w.w2, w.w1;
  return jg;
}

MatrixXd lagrangian_hessian_impl(const IpmState& st, const VolumeMatrix& v, const MaskPair& masks,
                                 double lambda_reg) {
  const Eigen::Index n = st.w.w1.size();
  MatrixXd w = objective_hessian(st.w, v, masks, lambda_reg);
  for (Eigen::Index k = 0; k < n; ++k) {
    w(k, n + k) += st.alpha;
    w(n + k, k) += st.alpha;
  }
  // h = -K*_ij has curvature -1 on (w1_i, w1_j) and +1 on (w2_i, w2_j).
  Eigen::Index p = n;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j, ++p) {
      const double b = st.beta(p);
      w(i, j) -= b;
      w(j, i) -= b;
      w(n + i, n + j) += b;
      w(n + j, n + i) += b;
    }
  }
  return w;
}

struct FullRhs {
  VectorXd r1;  // x block
  VectorXd r2;  // s block
  double r3 = 0.0;
  VectorXd r4;  // beta block
};

double rhs_norm(const FullRhs& r) {
  return std::sqrt(r.r1.squaredNorm() + r.r2.squaredNorm() + r.r3 * r.r3 + r.r4.squaredNorm());
}

// Factorization of the condensed saddle system
//   [ W + dI + Jh^T S^-1 B Jh   jg  ] [dx]
//   [ jg^T                      -dc ] [da]
class CondensedKkt {
 public:
  CondensedKkt(MatrixXd w, std::vector<SparseRow> rows, VectorXd sigma, VectorXd jg)
      : w_(std::move(w)), rows_(std::move(rows)), sigma_(std::move(sigma)), jg_(std::move(jg)) {
    const Eigen::Index dim = w_.rows();
    hc0_ = w_;
    for (std::size_t p = 0; p < rows_.size(); ++p) {
      const SparseRow& r = rows_[p];
      const double s = sigma_(static_cast<Eigen::Index>(p));
      for (int a = 0; a < r.nnz; ++a) {
        for (int b = 0; b < r.nnz; ++b) hc0_(r.idx[a], r.idx[b]) += s * r.val[a] * r.val[b];
      }
    }
    factorize(dim);
  }

  double shift() const { return shift_; }
  double constraint_shift() const { return cshift_; }
  bool used_cholesky() const { return use_llt_; }

  NewtonDirection solve(const FullRhs& rhs) const {
    NewtonDirection d = solve_once(rhs);
    const double norm = rhs_norm(rhs);
    double rel = norm > 0.0 ? rhs_norm(residual(d, rhs)) / norm : 0.0;
    for (int it = 0; it < 3 && rel > 1e-13; ++it) {
      const NewtonDirection corr = solve_once(residual(d, rhs));
      d.dw += corr.dw;
      d.ds += corr.ds;
      d.dalpha += corr.dalpha;
      d.dbeta += corr.dbeta;
      rel = rhs_norm(residual(d, rhs)) / norm;
    }
    d.hessian_shift = shift_;
    d.constraint_shift = cshift_;
    d.used_cholesky = use_llt_;
    d.relative_residual = rel;
    return d;
  }

 private:
  void factorize(Eigen::Index dim) {
    for (;;) {
      MatrixXd hc = hc0_;
      hc.diagonal().array() += shift_;
      Eigen::LLT<MatrixXd> llt(hc);
      if (llt.info() == Eigen::Success) {
        const VectorXd b = llt.solve(jg_);
        const double schur = jg_.dot(b);
        if (schur + cshift_ <= 1e-14 * std::max(1.0, jg_.squaredNorm())) {
          if (cshift_ == 0.0) {
            cshift_ = kConstraintShift;
            continue;
          }
        } else {
          llt_ = std::move(llt);
          hinv_jg_ = b;
          schur_ = schur + cshift_;
          use_llt_ = true;
          return;
        }
      }
      MatrixXd saddle(dim + 1, dim + 1);
      saddle.topLeftCorner(dim, dim) = hc;
      saddle.block(0, dim, dim, 1) = jg_;
      saddle.block(dim, 0, 1, dim) = jg_.transpose();
      saddle(dim, dim) = -cshift_;
      ldlt_.compute(saddle);
      const Inertia in = ldlt_.inertia();
      if (in.positive == dim && in.negative == 1 && in.zero == 0) {
        use_llt_ = false;
        return;
      }
      if (in.zero > 0 && cshift_ == 0.0) {
        cshift_ = kConstraintShift;
        continue;
      }
      shift_ = shift_ == 0.0 ? kShiftStart : shift_ * 10.0;
      if (shift_ > kShiftCap) {
        throw DegenerateSystem("KKT matrix has wrong inertia after maximal Hessian shift", shift_);
      }
    }
  }

  NewtonDirection solve_once(const FullRhs& r) const {
    const Eigen::Index dim = w_.rows();
    const VectorXd reduced_s = r.r2 - sigma_.cwiseProduct(r.r4);
    const VectorXd rx = r.r1 - jh_transpose_times(rows_, reduced_s, dim);
    NewtonDirection d;
    if (use_llt_) {
      const VectorXd a = llt_.solve(rx);
      d.dalpha = (jg_.dot(a) - r.r3) / schur_;
      d.dw = a - hinv_jg_ * d.dalpha;
    } else {
      VectorXd full(dim + 1);
      full << rx, r.r3;
      const VectorXd sol = ldlt_.solve(full);
      d.dw = sol.head(dim);
      d.dalpha = sol(dim);
    }
    d.ds = r.r4 - jh_times(rows_, d.dw);
    d.dbeta = r.r2 - sigma_.cwiseProduct(d.ds);
    return d;
  }

  // rhs - K d for the full (uncondensed) block system.
  FullRhs residual(const NewtonDirection& d, const FullRhs& rhs) const {
    FullRhs out;
    out.r1 = rhs.r1 - (w_ * d.dw + shift_ * d.dw + jg_ * d.dalpha +
                       jh_transpose_times(rows_, d.dbeta, w_.rows()));
    out.r2 = rhs.r2 - (sigma_.cwiseProduct(d.ds) + d.dbeta);
    out.r3 = rhs.r3 - (jg_.dot(d.dw) - cshift_ * d.dalpha);
    out.r4 = rhs.r4 - (jh_times(rows_, d.dw) + d.ds);
    return out;
  }

  MatrixXd w_;
  std::vector<SparseRow> rows_;
  VectorXd sigma_;
  VectorXd jg_;
  MatrixXd hc0_;
  double shift_ = 0.0;
  double cshift_ = 0.0;
  bool use_llt_ = false;
  Eigen::LLT<MatrixXd> llt_;
  VectorXd hinv_jg_;
  double schur_ = 0.0;
  SymmetricIndefiniteLdlt ldlt_;
};

struct Residuals {
  VectorXd grad_f;
  VectorXd r_x;
  VectorXd h;
  double g = 0.0;
  std::vector<SparseRow> rows;
  VectorXd jg;
};

Residuals residuals(const IpmState& st, const VolumeMatrix& v, const MaskPair& masks, double lambda_reg) {
  Residuals r;
  r.grad_f = objective_gradient(st.w, v, masks, lambda_reg);
  r.rows = inequality_rows(st.w);
  r.jg = equality_gradient(st.w);
  r.h = inequality_values(st.w);
  r.g = st.w.w1.dot(st.w.w2);
  r.r_x = r.grad_f + st.alpha * r.jg + jh_transpose_times(r.rows, st.beta, r.grad_f.size());
  return r;
}

double kkt_error(const IpmState& st, const Residuals& r, double mu) {
  double e = r.r_x.cwiseAbs().maxCoeff();
  e = std::max(e, ((st.s.cwiseProduct(st.beta)).array() - mu).abs().maxCoeff());
  e = std::max(e, std::abs(r.g));
  e = std::max(e, (r.h + st.s).cwiseAbs().maxCoeff());
  return e / std::max(1.0, r.grad_f.cwiseAbs().maxCoeff());
}

FullRhs newton_rhs(const IpmState& st, const Residuals& r) {
  FullRhs rhs;
  rhs.r1 = -r.r_x;
  rhs.r2 = -(st.beta - st.mu * st.s.cwiseInverse());
  rhs.r3 = -r.g;
  rhs.r4 = -(r.h + st.s);
  return rhs;
}

CondensedKkt factorize_kkt(const IpmState& st, const VolumeMatrix& v, const MaskPair& masks,
                           double lambda_reg, const Residuals& r) {
  return CondensedKkt(lagrangian_hessian_impl(st, v, masks, lambda_reg), r.rows,
                      st.beta.cwiseQuotient(st.s), r.jg);
}

void check_interior(const IpmState& st) {
  const Index n = st.w.n();
  const auto m = static_cast<Eigen::Index>(inequality_count(n));
  if (st.s.size() != m || st.beta.size() != m) {
    throw DimensionMismatch("IpmState: slack or multiplier length disagrees with N + N(N-1)/2");
  }
  if (!(st.s.array() > 0.0).all() || !(st.beta.array() > 0.0).all()) {
    throw ValidationError("IpmState: slacks and multipliers must be strictly positive");
  }
}

double max_step_to_boundary(const VectorXd& x, const VectorXd& dx, double tau) {
  double t = 1.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (dx(i) < 0.0) t = std::min(t, -tau * x(i) / dx(i));
  }
  return t;
}

// Uniform in [-1, 1) from the top 53 bits, independent of the standard
// library's distribution implementation.
IpmState initial_state(const VolumeMatrix& v, const IpmConfig& cfg) {
  const Eigen::Index n = sz(v.n());
  IpmState st;
  st.mu = cfg.mu0;
  st.w = FactorPair(v.n());
  const VectorXd rows = v.row_sums();
  const double total = rows.sum();
  if (total > 0.0) {
    VectorXd u = (rows / total).cwiseSqrt();
    st.w.w1 = u * std::sqrt(v.values().norm());
  }
  std::mt19937_64 rng(cfg.seed);
  for (Eigen::Index i = 0; i < n; ++i) st.w.w2(i) = 1e-3 * detail::uniform_pm1(rng);
  const double w1sq = st.w.w1.squaredNorm();
  if (w1sq > 0.0) st.w.w2 -= (st.w.w1.dot(st.w.w2) / w1sq) * st.w.w1;

  const VectorXd h = inequality_values(st.w);
  st.s = (-h).cwiseMax(1e-2);
  st.beta = cfg.mu0 * st.s.cwiseInverse();
  st.alpha = 0.0;
  return st;
}

double merit(const FactorPair& w, const VectorXd& s, const VolumeMatrix& v, const MaskPair& masks,
             double lambda_reg, double mu, double nu) {
  const double viol = std::abs(w.w1.dot(w.w2)) + (inequality_values(w) + s).lpNorm<1>();
  return objective_value(w, v, masks, lambda_reg) - mu * s.array().log().sum() + nu * viol;
}

}  // namespace

// ---------------------------------------------------------------------------

double eval_objective(const FactorPair& w, const VolumeMatrix& v, const PairGraph& g, double lambda_reg) {
  check_problem(w, v, g);
  // Written through the masked norm so the two pieces read as in the model.
  const MatrixXd k = v.n() >= 2 ? reconstruct_k(w) : MatrixXd::Zero(sz(v.n()), sz(v.n()));
  PairGraph complement = PairGraph::complete(g.n());
  for (const auto& [i, j] : g.edges()) complement.remove_edge(i, j);
  return masked_sq_frobenius(k - v.values(), g) + lambda_reg * masked_sq_frobenius(k, complement);
}

ConstraintValues eval_constraints(const FactorPair& w) {
  return {w.w1.dot(w.w2), inequality_values(w)};
}

Eigen::VectorXd eval_jacobian(const FactorPair& w, const VolumeMatrix& v, const PairGraph& g,
                              double lambda_reg) {
  check_problem(w, v, g);
  return objective_gradient(w, v, make_masks(g), lambda_reg);
}

Eigen::MatrixXd eval_hessian(const FactorPair& w, const VolumeMatrix& v, const PairGraph& g,
                             double lambda_reg) {
  check_problem(w, v, g);
  return objective_hessian(w, v, make_masks(g), lambda_reg);
}

ConstraintJacobians constraint_jacobians(const FactorPair& w) {
  const Eigen::Index dim = 2 * w.w1.size();
  const auto rows = inequality_rows(w);
  ConstraintJacobians out;
  out.jg = equality_gradient(w);
  out.jh = MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t p = 0; p < rows.size(); ++p) {
    for (int k = 0; k < rows[p].nnz; ++k) {
      out.jh(static_cast<Eigen::Index>(p), rows[p].idx[k]) += rows[p].val[k];
    }
  }
  return out;
}

Eigen::MatrixXd lagrangian_hessian(const IpmState& state, const VolumeMatrix& v, const PairGraph& g,
                                   double lambda_reg) {
  check_problem(state.w, v, g);
  check_interior(state);
  return lagrangian_hessian_impl(state, v, make_masks(g), lambda_reg);
}

NewtonDirection assemble_and_solve_kkt(const IpmState& state, const VolumeMatrix& v,
                                       const PairGraph& g, double lambda_reg) {
  check_problem(state.w, v, g);
  check_interior(state);
  const MaskPair masks = make_masks(g);
  const Residuals r = residuals(state, v, masks, lambda_reg);
  return factorize_kkt(state, v, masks, lambda_reg, r).solve(newton_rhs(state, r));
}

Estimate estimate(const VolumeMatrix& v_in, const PairGraph& g, const IpmConfig& cfg) {
  cfg.validate();
  if (v_in.n() < 2) throw InvalidProblem("estimate: need at least two assets");
  check_problem(FactorPair(v_in.n()), v_in, g);

  // Work on volumes normalized to a unit maximum; factors scale by sqrt.
  const double vmax = v_in.values().maxCoeff();
  const double scale = vmax > 0.0 ? vmax : 1.0;
  const VolumeMatrix v(v_in.values() / scale);
  const MaskPair masks = make_masks(g);
  const double lambda = cfg.lambda_reg;

  IpmReport report;
  report.lambda_reg = lambda;
  report.volume_scale = scale;

  IpmState st = initial_state(v, cfg);
  IpmState best = st;
  double best_error = std::numeric_limits<double>::infinity();
  double nu = 1.0;
  double final_error = std::numeric_limits<double>::infinity();
  bool done = false;

  for (int outer = 0; outer < cfg.max_outer && !done; ++outer) {
    report.outer_iters = outer + 1;
    const bool last_barrier = st.mu <= cfg.mu_min;
    for (int it = 0;; ++it) {
      Residuals r = residuals(st, v, masks, lambda);
      const double err = kkt_error(st, r, st.mu);
      const double err0 = kkt_error(st, r, 0.0);
      if (err0 < best_error) {
        best_error = err0;
        best = st;
      }
      final_error = err;
      if (last_barrier ? err <= cfg.tol_kkt : err <= kKappaEpsilon * st.mu) {
        done = last_barrier;
        break;
      }
      if (it >= cfg.max_newton) {
        if (last_barrier) done = true;
        break;
      }

      const CondensedKkt kkt = factorize_kkt(st, v, masks, lambda, r);
      const FullRhs rhs = newton_rhs(st, r);
      NewtonDirection d = kkt.solve(rhs);
      report.max_hessian_shift = std::max(report.max_hessian_shift, d.hessian_shift);
      ++report.newton_iters;

      const double tp_max = max_step_to_boundary(st.s, d.ds, cfg.ftb_tau);

      // l1 merit: objective - mu sum log s + nu (|g| + ||h + s||_1).
      const double viol = std::abs(r.g) + (r.h + st.s).lpNorm<1>();
      const double barrier_slope = r.grad_f.dot(d.dw) - st.mu * d.ds.cwiseQuotient(st.s).sum();
      if (viol > 0.0) {
        MatrixXd wl = lagrangian_hessian_impl(st, v, masks, lambda);
        wl.diagonal().array() += d.hessian_shift;
        const double curv = d.dw.dot(wl * d.dw) +
                            d.ds.dot(st.beta.cwiseQuotient(st.s).cwiseProduct(d.ds));
        const double needed =
            (barrier_slope + 0.5 * std::max(0.0, curv)) / ((1.0 - kPenaltyRho) * viol);
        if (nu < needed) nu = needed + 1.0;
      }
      const double slope = std::min(barrier_slope - nu * viol, 0.0);
      const double m0 = merit(st.w, st.s, v, masks, lambda, st.mu, nu);
      const VectorXd x0 = st.w.stacked();

      double t = tp_max;
      bool accepted = false;
      FactorPair trial_w = FactorPair::from_stacked(x0 + t * d.dw);
      VectorXd trial_s = st.s + t * d.ds;
      double m1 = merit(trial_w, trial_s, v, masks, lambda, st.mu, nu);
      if (m1 <= m0 + kArmijo * t * slope) {
        accepted = true;
      } else if (t == 1.0) {
        // Second-order correction: re-solve with the constraint values seen at
        // the rejected trial point to undo the curvature of g and h.
        FullRhs soc = rhs;
        double cg = r.g;
        VectorXd ch = r.h + st.s;
        for (int k = 0; k < kMaxSoc && !accepted; ++k) {
          cg = cg + trial_w.w1.dot(trial_w.w2);
          ch = ch + inequality_values(trial_w) + trial_s;
          soc.r3 = -cg;
          soc.r4 = -ch;
          const NewtonDirection dc = kkt.solve(soc);
          const double tc = max_step_to_boundary(st.s, dc.ds, cfg.ftb_tau);
          trial_w = FactorPair::from_stacked(x0 + tc * dc.dw);
          trial_s = st.s + tc * dc.ds;
          const double mc = merit(trial_w, trial_s, v, masks, lambda, st.mu, nu);
          if (mc <= m0 + kArmijo * slope) {
            accepted = true;
            m1 = mc;
            t = tc;
            d.dw = dc.dw;
            d.ds = dc.ds;
            d.dalpha = dc.dalpha;
            d.dbeta = dc.dbeta;
          } else if (tc < 1.0) {
            break;
          }
        }
      }
      if (!accepted) {
        t = tp_max;
        for (int k = 1; k <= kMaxHalvings; ++k) {
          t *= 0.5;
          trial_w = FactorPair::from_stacked(x0 + t * d.dw);
          trial_s = st.s + t * d.ds;
          m1 = merit(trial_w, trial_s, v, masks, lambda, st.mu, nu);
          if (m1 <= m0 + kArmijo * t * slope) {
            accepted = true;
            break;
          }
        }
      }
      if (!accepted) {
        // No acceptable step along this direction at this barrier value.
        if (last_barrier) done = true;
        break;
      }
      const double td_max = max_step_to_boundary(st.beta, d.dbeta, cfg.ftb_tau);

      st.w = std::move(trial_w);
      st.s = std::move(trial_s);
      st.alpha += t * d.dalpha;
      st.beta += td_max * d.dbeta;
      for (Eigen::Index i = 0; i < st.beta.size(); ++i) {
        const double c = st.mu / st.s(i);
        st.beta(i) = std::clamp(st.beta(i), c / kKappaSigma, c * kKappaSigma);
      }

      IpmIteration rec;
      rec.outer = outer;
      rec.mu = st.mu;
      rec.objective = objective_value(st.w, v, masks, lambda) * scale * scale;
      rec.residual = kkt_error(st, residuals(st, v, masks, lambda), st.mu);
      rec.merit_before = m0;
      rec.merit_after = m1;
      rec.step = t;
      rec.hessian_shift = d.hessian_shift;
      report.history.push_back(rec);
    }
    if (!done) st.mu = std::max(cfg.mu_min, cfg.sigma * st.mu);
  }

  const double orth_raw = std::abs(st.w.w1.dot(st.w.w2));
  report.converged = st.mu <= cfg.mu_min && final_error <= cfg.tol_kkt && orth_raw <= cfg.tol_orth;
  if (!report.converged) st = best;
  report.final_kkt_residual = report.converged ? final_error : best_error;

  // Project onto w1 >= 0 and w1 . w2 = 0 exactly.
  FactorPair w = st.w;
  w.w1 = w.w1.cwiseMax(0.0);
  const double w1sq = w.w1.squaredNorm();
  if (w1sq > 0.0) w.w2 -= (w.w1.dot(w.w2) / w1sq) * w.w1;
  report.final_orth = std::abs(w.w1.dot(w.w2));

  const double root = std::sqrt(scale);
  w.w1 *= root;
  w.w2 *= root;
  report.objective = eval_objective(w, v_in, g, lambda);
  return {std::move(w), std::move(report)};
}

}  // namespace pairflow
