#pragma once

// Small unconstrained minimizers in the spirit of R's optim(): BFGS with
// backtracking line search (analytic or central-difference gradients) and
// Nelder-Mead with restarts. All problems here have fewer than ~15 parameters.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace factorcop::optim {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Objective = std::function<double(const Vector&)>;
using Gradient = std::function<Vector(const Vector&)>;

struct Options {
  double rel_tol = 1e-8;   // relative change in objective
  double grad_tol = 1e-6;  // max |gradient| component
  int max_iter = 0;        // 0 means 500 * dim
  double fd_step = 1e-6;
};

struct Result {
  Vector x;
  double value = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string message;
};

inline Vector fd_gradient(const Objective& f, const Vector& x, double h = 1e-6, int* evals = nullptr) {
  Vector g(x.size());
  Vector xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + step;
    const double fp = f(xp);
    xp[i] = x[i] - step;
    const double fm = f(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * step);
  }
  if (evals) *evals += 2 * static_cast<int>(x.size());
  return g;
}

/// Jacobian of a vector-valued map by central differences; step is relative.
template <class F>
Matrix fd_jacobian(F&& fn, const Vector& x, double rel_step = 1e-5) {
  Vector f0 = fn(x);
  Matrix jac(f0.size(), x.size());
  Vector xp = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double step = rel_step * std::max(std::abs(x[j]), 1e-2);
    xp[j] = x[j] + step;
    const Vector fp = fn(xp);
    xp[j] = x[j] - step;
    const Vector fm = fn(xp);
    xp[j] = x[j];
    jac.col(j) = (fp - fm) / (2.0 * step);
  }
  return jac;
}

/// Symmetrized Hessian from a gradient function.
inline Matrix fd_hessian(const Gradient& g, const Vector& x, double rel_step = 1e-5) {
  Matrix h = fd_jacobian(g, x, rel_step);
  return 0.5 * (h + h.transpose());
}

/// Hessian from function values only (four-point mixed differences).
inline Matrix fd_hessian(const Objective& f, const Vector& x, double rel_step = 1e-4) {
  const Eigen::Index n = x.size();
  Matrix h(n, n);
  Vector step(n);
  for (Eigen::Index i = 0; i < n; ++i) step[i] = rel_step * std::max(std::abs(x[i]), 1e-1);
  const double f0 = f(x);
  Vector xp = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    xp[i] = x[i] + step[i];
    const double fp = f(xp);
    xp[i] = x[i] - step[i];
    const double fm = f(xp);
    xp[i] = x[i];
    h(i, i) = (fp - 2.0 * f0 + fm) / (step[i] * step[i]);
    for (Eigen::Index j = 0; j < i; ++j) {
      auto at = [&](double si, double sj) {
        Vector y = x;
        y[i] += si;
        y[j] += sj;
        return f(y);
      };
      const double v = (at(step[i], step[j]) - at(step[i], -step[j]) - at(-step[i], step[j]) +
                        at(-step[i], -step[j])) /
                       (4.0 * step[i] * step[j]);
      h(i, j) = h(j, i) = v;
    }
  }
  return h;
}

inline Result bfgs(const Objective& f, Vector x0, const Options& opt = {}, const Gradient& grad = {}) {
  const Eigen::Index n = x0.size();
  const int max_iter = opt.max_iter > 0 ? opt.max_iter : 500 * static_cast<int>(std::max<Eigen::Index>(n, 1));
  Result r;
  int evals = 0;
  auto value = [&](const Vector& x) {
    ++evals;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  auto gradient = [&](const Vector& x) -> Vector {
    if (grad) return grad(x);
    return fd_gradient(f, x, opt.fd_step, &evals);
  };

  Vector x = std::move(x0);
  double fx = value(x);
  if (!std::isfinite(fx)) {
    r.x = x;
    r.value = fx;
    r.evaluations = evals;
    r.message = "objective not finite at the starting point";
    return r;
  }
  Vector g = gradient(x);
  Matrix hinv = Matrix::Identity(n, n);
  int iter = 0;
  int stalls = 0;
  for (; iter < max_iter; ++iter) {
    if (g.cwiseAbs().maxCoeff() < opt.grad_tol) {
      r.converged = true;
      r.message = "gradient tolerance reached";
      break;
    }
    Vector dir = -hinv * g;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      hinv.setIdentity();
      dir = -g;
      slope = -g.squaredNorm();
    }
    double step = 1.0;
    // Keep the first trial step from jumping absurdly far on flat objectives.
    const double dnorm = dir.cwiseAbs().maxCoeff();
    if (dnorm > 10.0) step = 10.0 / dnorm;
    Vector xn;
    double fn = fx;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      xn = x + step * dir;
      fn = value(xn);
      if (fn <= fx + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (hinv.isIdentity(0.0)) {
        r.converged = g.cwiseAbs().maxCoeff() < 1e3 * opt.grad_tol;
        r.message = "line search failed";
        break;
      }
      hinv.setIdentity();
      if (++stalls > 3) {
        r.message = "line search failed repeatedly";
        break;
      }
      continue;
    }
    const Vector gn = gradient(xn);
    const Vector s = xn - x;
    const Vector y = gn - g;
    const double sy = s.dot(y);
    const double change = std::abs(fx - fn);
    x = xn;
    g = gn;
    const double fprev = fx;
    fx = fn;
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Matrix eye = Matrix::Identity(n, n);
      hinv = (eye - rho * s * y.transpose()) * hinv * (eye - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    if (change <= opt.rel_tol * (std::abs(fprev) + opt.rel_tol)) {
      r.converged = true;
      r.message = "relative tolerance reached";
      ++iter;
      break;
    }
  }
  if (iter >= max_iter && !r.converged) r.message = "iteration limit reached";
  r.x = x;
  r.value = fx;
  r.iterations = iter;
  r.evaluations = evals;
  return r;
}

inline Result nelder_mead(const Objective& f, Vector x0, const Options& opt = {}, double initial_step = 0.1,
                          int restarts = 2) {
  const Eigen::Index n = x0.size();
  const int max_iter = opt.max_iter > 0 ? opt.max_iter : 500 * static_cast<int>(std::max<Eigen::Index>(n, 1));
  Result r;
  int evals = 0;
  auto value = [&](const Vector& x) {
    ++evals;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  Vector best = std::move(x0);
  double fbest = value(best);
  int total_iter = 0;
  for (int round = 0; round <= restarts; ++round) {
    std::vector<Vector> simplex(n + 1, best);
    std::vector<double> fv(n + 1, fbest);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = initial_step * std::max(1.0, std::abs(best[i]));
      simplex[i + 1][i] += d;
      fv[i + 1] = value(simplex[i + 1]);
    }
    std::vector<std::size_t> order(n + 1);
    bool done = false;
    for (int it = 0; it < max_iter; ++it, ++total_iter) {
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
      const double flo = fv[order.front()], fhi = fv[order.back()];
      if (std::abs(fhi - flo) <= opt.rel_tol * (std::abs(flo) + opt.rel_tol)) {
        done = true;
        break;
      }
      Vector centroid = Vector::Zero(n);
      for (std::size_t k = 0; k < static_cast<std::size_t>(n); ++k) centroid += simplex[order[k]];
      centroid /= static_cast<double>(n);
      const std::size_t worst = order.back();
      const Vector xr = centroid + (centroid - simplex[worst]);
      const double fr = value(xr);
      if (fr < flo) {
        const Vector xe = centroid + 2.0 * (centroid - simplex[worst]);
        const double fe = value(xe);
        if (fe < fr) {
          simplex[worst] = xe;
          fv[worst] = fe;
        } else {
          simplex[worst] = xr;
          fv[worst] = fr;
        }
      } else if (fr < fv[order[n - 1]]) {
        simplex[worst] = xr;
        fv[worst] = fr;
      } else {
        const bool outside = fr < fhi;
        const Vector xc = outside ? Vector(centroid + 0.5 * (xr - centroid))
                                  : Vector(centroid + 0.5 * (simplex[worst] - centroid));
        const double fc = value(xc);
        if (fc < std::min(fr, fhi)) {
          simplex[worst] = xc;
          fv[worst] = fc;
        } else {
          const Vector& xl = simplex[order.front()];
          for (std::size_t k = 1; k <= static_cast<std::size_t>(n); ++k) {
            Vector& xk = simplex[order[k]];
            xk = xl + 0.5 * (xk - xl);
            fv[order[k]] = value(xk);
          }
        }
      }
    }
    const auto it = std::min_element(fv.begin(), fv.end());
    const double fnew = *it;
    const Vector xnew = simplex[static_cast<std::size_t>(it - fv.begin())];
    const bool improved = fnew < fbest - opt.rel_tol * (std::abs(fbest) + opt.rel_tol);
    if (fnew <= fbest) {
      fbest = fnew;
      best = xnew;
    }
    r.converged = done;
    if (!improved && round > 0) break;
  }
  r.x = best;
  r.value = fbest;
  r.iterations = total_iter;
  r.evaluations = evals;
  r.message = r.converged ? "simplex collapsed" : "iteration limit reached";
  return r;
}

/// BFGS first; falls back to Nelder-Mead polished by a second BFGS if the
/// first run did not converge.
inline Result minimize(const Objective& f, const Vector& x0, const Options& opt = {}, const Gradient& grad = {}) {
  Result r = bfgs(f, x0, opt, grad);
  if (r.converged && std::isfinite(r.value)) return r;
  Result nm = nelder_mead(f, r.value < f(x0) ? r.x : x0, opt);
  Result polish = bfgs(f, nm.x, opt, grad);
  const Result& best = polish.value <= nm.value ? polish : nm;
  Result out = best.value <= r.value ? best : r;
  out.evaluations = r.evaluations + nm.evaluations + polish.evaluations;
  out.iterations = r.iterations + nm.iterations + polish.iterations;
  out.converged = polish.converged || nm.converged;
  return out;
}

}  // namespace factorcop::optim
