#include "v2g/qp.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>

namespace v2g {

const char* to_string(QpStatus status) {
  switch (status) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::Infeasible: return "infeasible";
    case QpStatus::Unbounded: return "unbounded";
    case QpStatus::IterationLimit: return "iteration-limit";
    case QpStatus::NumericalFailure: return "numerical-failure";
  }
  return "?";
}

namespace {

using Vec = Eigen::VectorXd;
using Triplets = std::vector<Eigen::Triplet<double>>;

constexpr double kFixTol = 1e-12;
constexpr double kUnboundedNorm = 1e12;
constexpr int kPolishRounds = 8;

double inf_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

// The free part of a problem after substituting fixed columns and dropping
// rows that no longer involve any free column.
struct Reduced {
  int n = 0, me = 0, mi = 0;
  std::vector<int> cols;    // reduced -> full column
  std::vector<int> col_of;  // full -> reduced, -1 if fixed
  std::vector<int> eq_rows, ineq_rows;
  Vec x_full;  // fixed values, free entries filled at the end
  SparseMatrix q, a, g;
  Vec c, b, h, l, u;
  double constant = 0.0;
  bool infeasible = false;
  // Index lists of finite bounds within the reduced columns.
  std::vector<int> lo_idx, up_idx;
};

// Rows whose best-case activity already meets the right-hand side admit a
// single completion: every column sits at the bound that minimizes (or, for
// the upper side of an equality, maximizes) the activity. Fixing those
// columns up front removes faces without interior, on which interior-point
// iterates stall.
void fix_forcing_rows(const MiqpProblem& p, Vec& lower, Vec& upper) {
  using RowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
  const RowMatrix ineq(p.a_ineq), eq(p.a_eq);
  auto activity = [&](const RowMatrix& m, int row, double sign) {
    double act = 0.0;
    for (RowMatrix::InnerIterator it(m, row); it; ++it) {
      const double a = sign * it.value();
      const double bound = a > 0.0 ? lower[it.col()] : upper[it.col()];
      if (!std::isfinite(bound)) return -std::numeric_limits<double>::infinity();
      act += a * bound;
    }
    return act;
  };
  auto pin = [&](const RowMatrix& m, int row, double sign) {
    bool changed = false;
    for (RowMatrix::InnerIterator it(m, row); it; ++it) {
      const int j = it.col();
      if (upper[j] - lower[j] <= kFixTol * (1.0 + std::abs(lower[j]))) continue;
      const double v = sign * it.value() > 0.0 ? lower[j] : upper[j];
      lower[j] = upper[j] = v;
      changed = true;
    }
    return changed;
  };
  for (int pass = 0; pass < 8; ++pass) {
    bool changed = false;
    for (int i = 0; i < ineq.rows(); ++i) {
      const double b = p.b_ineq[i];
      if (activity(ineq, i, 1.0) >= b - kFixTol * (1.0 + std::abs(b))) changed |= pin(ineq, i, 1.0);
    }
    for (int i = 0; i < eq.rows(); ++i) {
      const double b = p.b_eq[i];
      if (activity(eq, i, 1.0) >= b - kFixTol * (1.0 + std::abs(b))) changed |= pin(eq, i, 1.0);
      else if (activity(eq, i, -1.0) >= -b - kFixTol * (1.0 + std::abs(b))) changed |= pin(eq, i, -1.0);
    }
    if (!changed) break;
  }
}

Reduced reduce(const MiqpProblem& p, const Vec& lower_in, const Vec& upper_in, double feas_tol) {
  Reduced r;
  Vec lower = lower_in, upper = upper_in;
  fix_forcing_rows(p, lower, upper);
  const int n = p.num_vars();
  r.col_of.assign(n, -1);
  r.x_full = Vec::Zero(n);
  for (int j = 0; j < n; ++j) {
    const double lo = lower[j], hi = upper[j];
    if (lo > hi + feas_tol * (1.0 + std::abs(lo))) {
      r.infeasible = true;
      return r;
    }
    if (hi - lo <= kFixTol * (1.0 + std::abs(lo))) {
      r.x_full[j] = std::isfinite(lo) ? 0.5 * (lo + hi) : hi;
    } else {
      r.col_of[j] = static_cast<int>(r.cols.size());
      r.cols.push_back(j);
    }
  }
  r.n = static_cast<int>(r.cols.size());

  const Vec qx = p.q * r.x_full;
  r.constant = p.constant + p.c.dot(r.x_full) + 0.5 * r.x_full.dot(qx);
  r.c.resize(r.n);
  r.l.resize(r.n);
  r.u.resize(r.n);
  for (int k = 0; k < r.n; ++k) {
    const int j = r.cols[k];
    r.c[k] = p.c[j] + qx[j];
    r.l[k] = lower[j];
    r.u[k] = upper[j];
    if (std::isfinite(r.l[k])) r.lo_idx.push_back(k);
    if (std::isfinite(r.u[k])) r.up_idx.push_back(k);
  }

  Triplets tq;
  for (int k = 0; k < r.n; ++k)
    for (SparseMatrix::InnerIterator it(p.q, r.cols[k]); it; ++it) {
      const int row = r.col_of[it.row()];
      if (row >= 0) tq.emplace_back(row, k, it.value());
    }
  r.q.resize(r.n, r.n);
  r.q.setFromTriplets(tq.begin(), tq.end());

  auto reduce_rows = [&](const SparseMatrix& a, const Vec& rhs, bool equality, SparseMatrix& out,
                         Vec& out_rhs, std::vector<int>& kept) {
    const Vec shift = a * r.x_full;
    std::vector<int> count(a.rows(), 0);
    for (int k = 0; k < r.n; ++k)
      for (SparseMatrix::InnerIterator it(a, r.cols[k]); it; ++it) ++count[it.row()];
    std::vector<int> row_of(a.rows(), -1);
    for (int i = 0; i < a.rows(); ++i) {
      const double v = rhs[i] - shift[i];
      if (count[i] == 0) {
        const double tol = feas_tol * (1.0 + std::abs(rhs[i]));
        if (equality ? std::abs(v) > tol : v < -tol) r.infeasible = true;
        continue;
      }
      row_of[i] = static_cast<int>(kept.size());
      kept.push_back(i);
    }
    out_rhs.resize(static_cast<int>(kept.size()));
    for (std::size_t k = 0; k < kept.size(); ++k) out_rhs[static_cast<int>(k)] = rhs[kept[k]] - shift[kept[k]];
    Triplets t;
    for (int k = 0; k < r.n; ++k)
      for (SparseMatrix::InnerIterator it(a, r.cols[k]); it; ++it)
        if (row_of[it.row()] >= 0) t.emplace_back(row_of[it.row()], k, it.value());
    out.resize(static_cast<int>(kept.size()), r.n);
    out.setFromTriplets(t.begin(), t.end());
  };
  reduce_rows(p.a_eq, p.b_eq, true, r.a, r.b, r.eq_rows);
  reduce_rows(p.a_ineq, p.b_ineq, false, r.g, r.h, r.ineq_rows);
  r.me = static_cast<int>(r.eq_rows.size());
  r.mi = static_cast<int>(r.ineq_rows.size());
  return r;
}

// Symmetric quasi-definite system
//   [ H + diag(dx)   A'      G'     ]
//   [ A              -dy     0      ]
//   [ G              0       -dz    ]
// stored as its lower triangle with explicit diagonal entries. `reg` records
// the regularization added on top of the true matrix so refinement can
// iterate against the unregularized operator.
class KktSystem {
 public:
  KktSystem(const SparseMatrix& h, const SparseMatrix& a, const SparseMatrix& g)
      : n_(static_cast<int>(h.rows())), me_(static_cast<int>(a.rows())), mi_(static_cast<int>(g.rows())) {
    const int dim = n_ + me_ + mi_;
    Triplets t;
    t.reserve(h.nonZeros() + a.nonZeros() + g.nonZeros() + dim);
    for (int i = 0; i < dim; ++i) t.emplace_back(i, i, 0.0);
    for (int k = 0; k < h.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(h, k); it; ++it)
        if (it.row() >= it.col()) t.emplace_back(it.row(), it.col(), it.value());
    for (int k = 0; k < a.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(a, k); it; ++it) t.emplace_back(n_ + it.row(), it.col(), it.value());
    for (int k = 0; k < g.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(g, k); it; ++it)
        t.emplace_back(n_ + me_ + it.row(), it.col(), it.value());
    k_.resize(dim, dim);
    k_.setFromTriplets(t.begin(), t.end());
    k_.makeCompressed();
    base_diag_.resize(dim);
    for (int i = 0; i < dim; ++i) base_diag_[i] = k_.valuePtr()[k_.outerIndexPtr()[i]];
    reg_ = Vec::Zero(dim);
    ldlt_.analyzePattern(k_);
  }

  int dim() const { return n_ + me_ + mi_; }

  // diag = base + extra; reg is the part of `extra` that is regularization.
  bool factorize(const Vec& extra, const Vec& reg) {
    for (int i = 0; i < dim(); ++i) k_.valuePtr()[k_.outerIndexPtr()[i]] = base_diag_[i] + extra[i];
    reg_ = reg;
    ldlt_.factorize(k_);
    return ldlt_.info() == Eigen::Success;
  }

  Vec apply_true(const Vec& v) const {
    Vec out = k_.selfadjointView<Eigen::Lower>() * v;
    out -= reg_.cwiseProduct(v);
    return out;
  }

  Vec solve(const Vec& rhs, int refinements) const {
    Vec sol = ldlt_.solve(rhs);
    const double scale = 1.0 + inf_norm(rhs);
    for (int k = 0; k < refinements; ++k) {
      const Vec res = rhs - apply_true(sol);
      if (inf_norm(res) <= 1e-15 * scale) break;
      sol += ldlt_.solve(res);
    }
    return sol;
  }

 private:
  int n_, me_, mi_;
  SparseMatrix k_;
  Vec base_diag_;
  Vec reg_;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
};

struct IpmPoint {
  Vec x, y, s, z, wl, zl, wu, zu;
};

struct Residuals {
  Vec rd, re, ri, rl, ru;
  double pres = 0.0, dres = 0.0, mu = 0.0;
};

struct Scales {
  double primal = 1.0;
  double dual = 1.0;
};

Scales scales_of(const Reduced& r) {
  Scales sc;
  double m = std::max(inf_norm(r.b), inf_norm(r.h));
  for (int k : r.lo_idx) m = std::max(m, std::abs(r.l[k]));
  for (int k : r.up_idx) m = std::max(m, std::abs(r.u[k]));
  sc.primal = 1.0 + m;
  sc.dual = 1.0 + inf_norm(r.c);
  return sc;
}

Residuals residuals(const Reduced& r, const IpmPoint& p) {
  Residuals res;
  res.rd = r.q * p.x + r.c;
  if (r.me > 0) res.rd += r.a.transpose() * p.y;
  if (r.mi > 0) res.rd += r.g.transpose() * p.z;
  for (std::size_t k = 0; k < r.lo_idx.size(); ++k) res.rd[r.lo_idx[k]] -= p.zl[k];
  for (std::size_t k = 0; k < r.up_idx.size(); ++k) res.rd[r.up_idx[k]] += p.zu[k];
  res.re = r.me > 0 ? Vec(r.a * p.x - r.b) : Vec();
  res.ri = r.mi > 0 ? Vec(r.g * p.x + p.s - r.h) : Vec();
  res.rl.resize(static_cast<int>(r.lo_idx.size()));
  for (std::size_t k = 0; k < r.lo_idx.size(); ++k)
    res.rl[k] = p.x[r.lo_idx[k]] - p.wl[k] - r.l[r.lo_idx[k]];
  res.ru.resize(static_cast<int>(r.up_idx.size()));
  for (std::size_t k = 0; k < r.up_idx.size(); ++k)
    res.ru[k] = p.x[r.up_idx[k]] + p.wu[k] - r.u[r.up_idx[k]];
  res.pres = std::max({inf_norm(res.re), inf_norm(res.ri), inf_norm(res.rl), inf_norm(res.ru)});
  res.dres = inf_norm(res.rd);
  const double comp = p.s.dot(p.z) + p.wl.dot(p.zl) + p.wu.dot(p.zu);
  const auto nc = p.s.size() + p.wl.size() + p.wu.size();
  res.mu = nc > 0 ? comp / static_cast<double>(nc) : 0.0;
  return res;
}

double step_to_boundary(const Vec& v, const Vec& dv) {
  double alpha = 1.0;
  for (int i = 0; i < v.size(); ++i)
    if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
  return alpha;
}

// Farkas-type certificate: duals y, z >= 0, zl >= 0, zu >= 0 with
// A'y + G'z - zl + zu ~ 0 and b'y + h'z - l'zl + u'zu < 0 prove that no
// point satisfies the constraints. The threshold accounts for the residual
// times the largest attainable |x| so that an approximate certificate is
// still a proof.
bool certifies_infeasibility(const Reduced& r, const IpmPoint& p) {
  const double nu = std::max({inf_norm(p.y), inf_norm(p.z), inf_norm(p.zl), inf_norm(p.zu)});
  if (nu < 1e6) return false;
  Vec ray = Vec::Zero(r.n);
  if (r.me > 0) ray += r.a.transpose() * (p.y / nu);
  if (r.mi > 0) ray += r.g.transpose() * (p.z / nu);
  double value = (r.me > 0 ? r.b.dot(p.y) : 0.0) + (r.mi > 0 ? r.h.dot(p.z) : 0.0);
  for (std::size_t k = 0; k < r.lo_idx.size(); ++k) {
    ray[r.lo_idx[k]] -= p.zl[k] / nu;
    value -= r.l[r.lo_idx[k]] * p.zl[k];
  }
  for (std::size_t k = 0; k < r.up_idx.size(); ++k) {
    ray[r.up_idx[k]] += p.zu[k] / nu;
    value += r.u[r.up_idx[k]] * p.zu[k];
  }
  value /= nu;
  // Largest |x| over the box; unbounded columns make the test inconclusive.
  double x_bound = 0.0;
  for (int k = 0; k < r.n; ++k) {
    const double m = std::max(std::abs(r.l[k]), std::abs(r.u[k]));
    if (!std::isfinite(m)) return false;
    x_bound += m;
  }
  return value < -(ray.cwiseAbs().maxCoeff() * x_bound + 1e-9);
}

struct IpmResult {
  QpStatus status = QpStatus::NumericalFailure;
  IpmPoint point;
  Residuals res;
  int iterations = 0;
};

IpmResult run_ipm(const Reduced& r, const QpSettings& st) {
  IpmResult out;
  const int n = r.n, me = r.me, mi = r.mi;
  const int nl = static_cast<int>(r.lo_idx.size());
  const int nu = static_cast<int>(r.up_idx.size());
  const Scales sc = scales_of(r);

  IpmPoint& p = out.point;
  p.x = Vec::Zero(n);
  for (int k = 0; k < n; ++k) {
    const bool hl = std::isfinite(r.l[k]), hu = std::isfinite(r.u[k]);
    if (hl && hu) p.x[k] = 0.5 * (r.l[k] + r.u[k]);
    else if (hl) p.x[k] = r.l[k] + 1.0;
    else if (hu) p.x[k] = r.u[k] - 1.0;
  }
  p.y = Vec::Zero(me);
  p.s = mi > 0 ? Vec((r.h - r.g * p.x).cwiseMax(1.0)) : Vec();
  p.z = Vec::Ones(mi);
  p.wl.resize(nl);
  p.wu.resize(nu);
  // The start is strictly inside the box, so the bound slacks are exact and
  // their residuals stay zero; a mismatch here can later pin a tiny slack
  // against a residual it is not allowed to cross.
  for (int k = 0; k < nl; ++k) p.wl[k] = p.x[r.lo_idx[k]] - r.l[r.lo_idx[k]];
  for (int k = 0; k < nu; ++k) p.wu[k] = r.u[r.up_idx[k]] - p.x[r.up_idx[k]];
  p.zl = Vec::Ones(nl);
  p.zu = Vec::Ones(nu);

  KktSystem kkt(r.q, r.a, r.g);
  const int dim = kkt.dim();
  Vec qdiag = r.q.diagonal();
  double rho = 1e-9, delta = 1e-9;
  int stalled = 0;

  for (int it = 0; it <= st.max_iterations; ++it) {
    out.res = residuals(r, p);
    const Residuals& res = out.res;
    out.iterations = it;
    const double pobj = 0.5 * p.x.dot(r.q * p.x) + r.c.dot(p.x);
    const double total_comp = res.mu * static_cast<double>(mi + nl + nu);
    if (res.pres <= st.ipm_tolerance * sc.primal && res.dres <= st.ipm_tolerance * sc.dual &&
        total_comp <= st.ipm_tolerance * (1.0 + std::abs(pobj))) {
      out.status = QpStatus::Optimal;
      return out;
    }
    if (inf_norm(p.x) > kUnboundedNorm) {
      out.status = QpStatus::Unbounded;
      return out;
    }
    if (certifies_infeasibility(r, p)) {
      out.status = QpStatus::Infeasible;
      return out;
    }
    if (it == st.max_iterations) break;

    Vec extra(dim), reg(dim);
    for (int k = 0; k < n; ++k) {
      extra[k] = rho;
      reg[k] = rho;
    }
    for (int k = 0; k < nl; ++k) extra[r.lo_idx[k]] += p.zl[k] / p.wl[k];
    for (int k = 0; k < nu; ++k) extra[r.up_idx[k]] += p.zu[k] / p.wu[k];
    for (int k = 0; k < me; ++k) {
      extra[n + k] = -delta;
      reg[n + k] = -delta;
    }
    for (int k = 0; k < mi; ++k) {
      extra[n + me + k] = -(p.s[k] / p.z[k] + delta);
      reg[n + me + k] = -delta;
    }
    bool factored = kkt.factorize(extra, reg);
    for (int attempt = 0; !factored && attempt < 4; ++attempt) {
      rho *= 100.0;
      delta *= 100.0;
      for (int k = 0; k < n; ++k) {
        extra[k] += rho;
        reg[k] += rho;
      }
      for (int k = n; k < dim; ++k) {
        extra[k] -= delta;
        reg[k] -= delta;
      }
      factored = kkt.factorize(extra, reg);
    }
    if (!factored) {
      out.status = QpStatus::NumericalFailure;
      return out;
    }

    struct Direction {
      Vec dx, dy, ds, dz, dwl, dzl, dwu, dzu;
    };
    auto direction = [&](const Vec& r_sz, const Vec& r_l2, const Vec& r_u2) {
      Vec rhs(dim);
      rhs.head(n) = -res.rd;
      for (int k = 0; k < nl; ++k)
        rhs[r.lo_idx[k]] += (r_l2[k] - p.zl[k] * res.rl[k]) / p.wl[k];
      for (int k = 0; k < nu; ++k)
        rhs[r.up_idx[k]] -= (r_u2[k] + p.zu[k] * res.ru[k]) / p.wu[k];
      if (me > 0) rhs.segment(n, me) = -res.re;
      for (int k = 0; k < mi; ++k) rhs[n + me + k] = -res.ri[k] - r_sz[k] / p.z[k];
      const Vec sol = kkt.solve(rhs, 3);
      Direction d;
      d.dx = sol.head(n);
      d.dy = sol.segment(n, me);
      d.dz = sol.segment(n + me, mi);
      d.ds = mi > 0 ? Vec(-res.ri - r.g * d.dx) : Vec();
      d.dwl.resize(nl);
      d.dzl.resize(nl);
      for (int k = 0; k < nl; ++k) {
        d.dwl[k] = d.dx[r.lo_idx[k]] + res.rl[k];
        d.dzl[k] = (r_l2[k] - p.zl[k] * d.dwl[k]) / p.wl[k];
      }
      d.dwu.resize(nu);
      d.dzu.resize(nu);
      for (int k = 0; k < nu; ++k) {
        d.dwu[k] = -res.ru[k] - d.dx[r.up_idx[k]];
        d.dzu[k] = (r_u2[k] - p.zu[k] * d.dwu[k]) / p.wu[k];
      }
      return d;
    };
    auto max_step = [&](const Direction& d) {
      double a = 1.0;
      a = std::min(a, step_to_boundary(p.s, d.ds));
      a = std::min(a, step_to_boundary(p.z, d.dz));
      a = std::min(a, step_to_boundary(p.wl, d.dwl));
      a = std::min(a, step_to_boundary(p.zl, d.dzl));
      a = std::min(a, step_to_boundary(p.wu, d.dwu));
      a = std::min(a, step_to_boundary(p.zu, d.dzu));
      return a;
    };

    const Vec sz = p.s.cwiseProduct(p.z);
    const Vec wzl = p.wl.cwiseProduct(p.zl);
    const Vec wzu = p.wu.cwiseProduct(p.zu);
    const Direction aff = direction(-sz, -wzl, -wzu);
    const double a_aff = max_step(aff);
    const int nc = mi + nl + nu;
    double sigma = 0.0;
    if (nc > 0) {
      const double mu_aff =
          ((p.s + a_aff * aff.ds).dot(p.z + a_aff * aff.dz) + (p.wl + a_aff * aff.dwl).dot(p.zl + a_aff * aff.dzl) +
           (p.wu + a_aff * aff.dwu).dot(p.zu + a_aff * aff.dzu)) /
          nc;
      sigma = std::pow(std::max(mu_aff, 0.0) / std::max(res.mu, 1e-300), 3.0);
      sigma = std::min(sigma, 1.0);
    }
    const double target = sigma * res.mu;
    const Vec rsz = (Vec::Constant(mi, target) - sz - aff.ds.cwiseProduct(aff.dz));
    const Vec rl2 = (Vec::Constant(nl, target) - wzl - aff.dwl.cwiseProduct(aff.dzl));
    const Vec ru2 = (Vec::Constant(nu, target) - wzu - aff.dwu.cwiseProduct(aff.dzu));
    Direction d = direction(rsz, rl2, ru2);
    double alpha = std::min(1.0, 0.995 * max_step(d));
    if (alpha < 0.1 * a_aff) {
      // The second-order correction can point straight into a nearly tight
      // pair and stall the iteration; a centred first-order step cannot.
      const double centred = std::max(sigma, 0.1) * res.mu;
      Direction plain = direction(Vec::Constant(mi, centred) - sz, Vec::Constant(nl, centred) - wzl,
                                  Vec::Constant(nu, centred) - wzu);
      const double alpha_plain = std::min(1.0, 0.995 * max_step(plain));
      if (alpha_plain > alpha) {
        d = std::move(plain);
        alpha = alpha_plain;
      }
    }

    // Steps that no longer move mean the iterates are wedged against a
    // degenerate face; the active-set polish takes over from here.
    stalled = alpha < 1e-10 ? stalled + 1 : 0;
    if (stalled >= 5) break;
    p.x += alpha * d.dx;
    p.y += alpha * d.dy;
    p.s += alpha * d.ds;
    p.z += alpha * d.dz;
    p.wl += alpha * d.dwl;
    p.zl += alpha * d.dzl;
    p.wu += alpha * d.dwu;
    p.zu += alpha * d.dzu;
    // Guard against underflow to exact zero in slack/dual pairs.
    auto floor_pos = [](Vec& v) {
      for (int i = 0; i < v.size(); ++i) v[i] = std::max(v[i], 1e-300);
    };
    floor_pos(p.s);
    floor_pos(p.z);
    floor_pos(p.wl);
    floor_pos(p.zl);
    floor_pos(p.wu);
    floor_pos(p.zu);
  }
  out.status = QpStatus::IterationLimit;
  return out;
}

// Active set in reduced indices.
struct LocalActive {
  std::vector<signed char> ineq;   // per reduced ineq row
  std::vector<signed char> bounds;  // per reduced column
};

LocalActive active_from_ipm(const Reduced& r, const IpmPoint& p) {
  LocalActive a;
  a.ineq.assign(r.mi, 0);
  a.bounds.assign(r.n, 0);
  for (int k = 0; k < r.mi; ++k) a.ineq[k] = p.z[k] > p.s[k] ? 1 : 0;
  std::vector<double> lo_strength(r.n, 0.0), up_strength(r.n, 0.0);
  for (std::size_t k = 0; k < r.lo_idx.size(); ++k)
    if (p.zl[k] > p.wl[k]) lo_strength[r.lo_idx[k]] = p.zl[k] - p.wl[k];
  for (std::size_t k = 0; k < r.up_idx.size(); ++k)
    if (p.zu[k] > p.wu[k]) up_strength[r.up_idx[k]] = p.zu[k] - p.wu[k];
  for (int k = 0; k < r.n; ++k) {
    if (lo_strength[k] > 0.0 && lo_strength[k] >= up_strength[k]) a.bounds[k] = -1;
    else if (up_strength[k] > 0.0) a.bounds[k] = 1;
  }
  return a;
}

LocalActive active_from_warm(const Reduced& r, const ActiveSet& warm) {
  LocalActive a;
  a.ineq.assign(r.mi, 0);
  a.bounds.assign(r.n, 0);
  for (int k = 0; k < r.mi; ++k) {
    const int row = r.ineq_rows[k];
    if (row < static_cast<int>(warm.ineq.size())) a.ineq[k] = warm.ineq[row];
  }
  for (int k = 0; k < r.n; ++k) {
    const int col = r.cols[k];
    if (col < static_cast<int>(warm.bounds.size())) a.bounds[k] = warm.bounds[col];
    if (a.bounds[k] < 0 && !std::isfinite(r.l[k])) a.bounds[k] = 0;
    if (a.bounds[k] > 0 && !std::isfinite(r.u[k])) a.bounds[k] = 0;
  }
  return a;
}

struct PolishResult {
  bool ok = false;
  Vec x, y, z, bound_duals;
  double pres = 0.0, dres = 0.0;
  LocalActive next;  // corrected active set after a failed check
};

// Solves the equality-constrained QP defined by an active set and accepts the
// answer only if it is primal feasible, dual feasible and stationary.
PolishResult polish(const Reduced& r, const LocalActive& act, const Vec* x_ref, const Scales& sc) {
  PolishResult out;
  const int n = r.n;
  std::vector<int> free_cols, free_of(n, -1);
  Vec x = Vec::Zero(n);
  for (int k = 0; k < n; ++k) {
    if (act.bounds[k] < 0) x[k] = r.l[k];
    else if (act.bounds[k] > 0) x[k] = r.u[k];
    else {
      free_of[k] = static_cast<int>(free_cols.size());
      free_cols.push_back(k);
    }
  }
  std::vector<int> act_rows, act_of(r.mi, -1);
  for (int k = 0; k < r.mi; ++k)
    if (act.ineq[k]) {
      act_of[k] = static_cast<int>(act_rows.size());
      act_rows.push_back(k);
    }
  const int nf = static_cast<int>(free_cols.size());
  const int ma = static_cast<int>(act_rows.size());

  Triplets tq, ta, tg;
  for (int k = 0; k < nf; ++k)
    for (SparseMatrix::InnerIterator it(r.q, free_cols[k]); it; ++it)
      if (free_of[it.row()] >= 0) tq.emplace_back(free_of[it.row()], k, it.value());
  for (int k = 0; k < nf; ++k)
    for (SparseMatrix::InnerIterator it(r.a, free_cols[k]); it; ++it) ta.emplace_back(it.row(), k, it.value());
  for (int k = 0; k < nf; ++k)
    for (SparseMatrix::InnerIterator it(r.g, free_cols[k]); it; ++it)
      if (act_of[it.row()] >= 0) tg.emplace_back(act_of[it.row()], k, it.value());
  SparseMatrix qf(nf, nf), af(r.me, nf), gf(ma, nf);
  qf.setFromTriplets(tq.begin(), tq.end());
  af.setFromTriplets(ta.begin(), ta.end());
  gf.setFromTriplets(tg.begin(), tg.end());

  // Right-hand side with the bound-fixed columns moved over.
  const Vec qx = r.q * x;
  const Vec ax = r.me > 0 ? Vec(r.a * x) : Vec();
  const Vec gx = r.mi > 0 ? Vec(r.g * x) : Vec();
  const int dim = nf + r.me + ma;
  Vec rhs(dim);
  for (int k = 0; k < nf; ++k) rhs[k] = -r.c[free_cols[k]] - qx[free_cols[k]];
  for (int k = 0; k < r.me; ++k) rhs[nf + k] = r.b[k] - ax[k];
  for (int k = 0; k < ma; ++k) rhs[nf + r.me + k] = r.h[act_rows[k]] - gx[act_rows[k]];

  const double eps = 1e-9;
  KktSystem kkt(qf, af, gf);
  Vec extra(dim), reg(dim);
  extra.head(nf).setConstant(eps);
  extra.tail(r.me + ma).setConstant(-eps);
  reg = extra;
  if (!kkt.factorize(extra, reg)) return out;
  // Proximal start keeps directions of zero curvature at the reference point.
  Vec shifted = rhs;
  if (x_ref != nullptr)
    for (int k = 0; k < nf; ++k) shifted[k] += eps * (*x_ref)[free_cols[k]];
  Vec sol = kkt.solve(shifted, 0);
  for (int k = 0; k < 20; ++k) {
    const Vec res = rhs - kkt.apply_true(sol);
    if (inf_norm(res) <= 1e-14 * (1.0 + inf_norm(rhs))) break;
    sol += kkt.solve(res, 0);
  }
  for (int k = 0; k < nf; ++k) x[free_cols[k]] = sol[k];
  const Vec y = sol.segment(nf, r.me);
  Vec z = Vec::Zero(r.mi);
  for (int k = 0; k < ma; ++k) z[act_rows[k]] = sol[nf + r.me + k];

  // Verification.
  const double tol_p = 1e-9 * sc.primal;
  const double tol_d = 1e-9 * sc.dual;
  Vec rd = r.q * x + r.c;
  if (r.me > 0) rd += r.a.transpose() * y;
  if (r.mi > 0) rd += r.g.transpose() * z;
  Vec bound_duals = Vec::Zero(n);
  double dres = 0.0;
  bool ok = true;
  // Each failed check also records the active-set change that addresses it,
  // so the caller can try again on a corrected set.
  out.next = act;
  for (int k = 0; k < n; ++k) {
    if (act.bounds[k] == 0) {
      dres = std::max(dres, std::abs(rd[k]));
      if (x[k] < r.l[k] - tol_p) {
        ok = false;
        out.next.bounds[k] = -1;
      } else if (x[k] > r.u[k] + tol_p) {
        ok = false;
        out.next.bounds[k] = 1;
      }
    } else if (act.bounds[k] < 0) {
      // rd - zl = 0 with zl >= 0
      if (rd[k] < -tol_d) {
        ok = false;
        out.next.bounds[k] = 0;
      }
      bound_duals[k] = -std::max(rd[k], 0.0);
    } else {
      // rd + zu = 0 with zu >= 0
      if (rd[k] > tol_d) {
        ok = false;
        out.next.bounds[k] = 0;
      }
      bound_duals[k] = std::max(-rd[k], 0.0);
    }
  }
  if (dres > tol_d) ok = false;
  for (int k = 0; k < ma; ++k)
    if (z[act_rows[k]] < -tol_d) {
      ok = false;
      out.next.ineq[act_rows[k]] = 0;
    }
  double pres = 0.0;
  if (r.me > 0) pres = std::max(pres, inf_norm(r.a * x - r.b));
  if (r.mi > 0) {
    const Vec over = r.g * x - r.h;
    for (int k = 0; k < r.mi; ++k)
      if (over[k] > tol_p) {
        pres = std::max(pres, over[k]);
        out.next.ineq[k] = 1;
      }
  }
  if (pres > tol_p) ok = false;
  if (!ok) return out;

  for (int k = 0; k < n; ++k) x[k] = std::clamp(x[k], r.l[k], r.u[k]);
  out.ok = true;
  out.x = x;
  out.y = y;
  out.z = z.cwiseMax(0.0);
  out.bound_duals = bound_duals;
  out.pres = pres;
  out.dres = dres;
  return out;
}

QpSolution assemble(const MiqpProblem& p, const Reduced& r, const Vec& x, const Vec& y, const Vec& z,
                    const Vec& bound_duals, const LocalActive& act) {
  QpSolution sol;
  sol.x = r.x_full;
  for (int k = 0; k < r.n; ++k) sol.x[r.cols[k]] = x[k];
  sol.objective = p.objective(sol.x);
  sol.eq_duals = Vec::Zero(p.num_eq());
  sol.ineq_duals = Vec::Zero(p.num_ineq());
  sol.bound_duals = Vec::Zero(p.num_vars());
  for (int k = 0; k < r.me; ++k) sol.eq_duals[r.eq_rows[k]] = y[k];
  for (int k = 0; k < r.mi; ++k) sol.ineq_duals[r.ineq_rows[k]] = z[k];
  for (int k = 0; k < r.n; ++k) sol.bound_duals[r.cols[k]] = bound_duals[k];
  // Fixed columns carry whatever multiplier closes stationarity.
  Vec rd = p.q * sol.x + p.c;
  if (p.num_eq() > 0) rd += p.a_eq.transpose() * sol.eq_duals;
  if (p.num_ineq() > 0) rd += p.a_ineq.transpose() * sol.ineq_duals;
  for (int j = 0; j < p.num_vars(); ++j)
    if (r.col_of[j] < 0) sol.bound_duals[j] = -rd[j];
  sol.active.ineq.assign(p.num_ineq(), 0);
  sol.active.bounds.assign(p.num_vars(), 0);
  for (int k = 0; k < r.mi; ++k) sol.active.ineq[r.ineq_rows[k]] = act.ineq[k];
  for (int k = 0; k < r.n; ++k) sol.active.bounds[r.cols[k]] = act.bounds[k];
  sol.active.point = sol.x;
  return sol;
}

}  // namespace

QpSolution solve_qp(const MiqpProblem& problem, const Vec& lower, const Vec& upper, const QpSettings& settings,
                    const ActiveSet* warm_start) {
  const Reduced r = reduce(problem, lower, upper, settings.feasibility_tolerance);
  if (r.infeasible) {
    QpSolution sol;
    sol.status = QpStatus::Infeasible;
    return sol;
  }
  const Scales sc = scales_of(r);

  if (warm_start != nullptr && !warm_start->empty()) {
    const LocalActive act = active_from_warm(r, *warm_start);
    Vec ref;
    if (warm_start->point.size() == problem.num_vars()) {
      ref.resize(r.n);
      for (int k = 0; k < r.n; ++k) ref[k] = warm_start->point[r.cols[k]];
    }
    const PolishResult pr = polish(r, act, ref.size() ? &ref : nullptr, sc);
    if (pr.ok) {
      QpSolution sol = assemble(problem, r, pr.x, pr.y, pr.z, pr.bound_duals, act);
      sol.status = QpStatus::Optimal;
      sol.polished = true;
      sol.warm_started = true;
      sol.primal_residual = pr.pres;
      sol.dual_residual = pr.dres;
      return sol;
    }
  }

  if (r.n == 0) {
    // Everything fixed and all rows satisfied.
    QpSolution sol = assemble(problem, r, Vec(), Vec::Zero(r.me), Vec::Zero(r.mi), Vec(), LocalActive{});
    sol.status = QpStatus::Optimal;
    return sol;
  }

  const IpmResult ipm = run_ipm(r, settings);
  if (ipm.status == QpStatus::Infeasible || ipm.status == QpStatus::Unbounded ||
      ipm.status == QpStatus::NumericalFailure) {
    QpSolution sol;
    sol.status = ipm.status;
    sol.iterations = ipm.iterations;
    return sol;
  }
  LocalActive act = active_from_ipm(r, ipm.point);
  // At degenerate vertices the complementarity pairs do not tell which side
  // is active; a few rounds of sign-based corrections usually settle it.
  for (int round = 0; settings.polish && round < kPolishRounds; ++round) {
    const PolishResult pr = polish(r, act, &ipm.point.x, sc);
    if (pr.ok) {
      QpSolution sol = assemble(problem, r, pr.x, pr.y, pr.z, pr.bound_duals, act);
      sol.status = QpStatus::Optimal;
      sol.polished = true;
      sol.iterations = ipm.iterations;
      sol.primal_residual = pr.pres;
      sol.dual_residual = pr.dres;
      return sol;
    }
    if (pr.next.bounds.empty() || (pr.next.bounds == act.bounds && pr.next.ineq == act.ineq)) break;
    act = pr.next;
  }
  const auto& res = ipm.res;
  const double total_comp = res.mu * static_cast<double>(r.mi + r.lo_idx.size() + r.up_idx.size());
  const double obj_scale = 1.0 + std::abs(0.5 * ipm.point.x.dot(r.q * ipm.point.x) + r.c.dot(ipm.point.x));
  const bool good = res.pres <= settings.feasibility_tolerance && res.dres <= settings.feasibility_tolerance &&
                    total_comp <= settings.feasibility_tolerance * obj_scale;
  Vec bd = Vec::Zero(r.n);
  for (std::size_t k = 0; k < r.lo_idx.size(); ++k) bd[r.lo_idx[k]] -= ipm.point.zl[k];
  for (std::size_t k = 0; k < r.up_idx.size(); ++k) bd[r.up_idx[k]] += ipm.point.zu[k];
  Vec x = ipm.point.x;
  for (int k = 0; k < r.n; ++k) x[k] = std::clamp(x[k], r.l[k], r.u[k]);
  QpSolution sol = assemble(problem, r, x, ipm.point.y, ipm.point.z, bd, act);
  sol.iterations = ipm.iterations;
  sol.primal_residual = res.pres;
  sol.dual_residual = res.dres;
  sol.complementarity = res.mu;
  sol.status = (ipm.status == QpStatus::Optimal || good) ? QpStatus::Optimal : ipm.status;
  return sol;
}

QpSolution solve_qp(const MiqpProblem& problem, const QpSettings& settings) {
  return solve_qp(problem, problem.lower, problem.upper, settings, nullptr);
}

}  // namespace v2g
