#include "oal/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace oal {

SymMatrix::SymMatrix(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw ShapeError("SymMatrix: expected a non-empty square matrix, got " +
                     std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
  if (!a.allFinite()) {
    throw DomainError("SymMatrix: entries must be finite");
  }
  m_ = 0.5 * (a + a.transpose());
}

SymMatrix SymMatrix::identity(int dim) {
  return SymMatrix(Matrix::Identity(dim, dim));
}

SymMatrix SymMatrix::diagonal(const Vector& diag) {
  return SymMatrix(Matrix(diag.asDiagonal()));
}

EigDecomposition eig_sym(const SymMatrix& sym) {
  const int n = sym.dim();
  Matrix a = sym.mat();
  Matrix v = Matrix::Identity(n, n);

  const double scale = std::max(a.cwiseAbs().maxCoeff(), 1.0);
  const double tol = 1e-15 * scale;
  const int max_sweeps = 100;

  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n - 1; ++p)
      for (int q = p + 1; q < n; ++q) off = std::max(off, std::abs(a(p, q)));
    if (off <= tol) break;

    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= tol * 1e-2) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        // smaller root of t^2 + 2*theta*t - 1 = 0
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (int i = 0; i < n; ++i) {
          const double aip = a(i, p), aiq = a(i, q);
          a(i, p) = c * aip - s * aiq;
          a(i, q) = s * aip + c * aiq;
        }
        for (int i = 0; i < n; ++i) {
          const double api = a(p, i), aqi = a(q, i);
          a(p, i) = c * api - s * aqi;
          a(q, i) = s * api + c * aqi;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (int i = 0; i < n; ++i) {
          const double vip = v(i, p), viq = v(i, q);
          v(i, p) = c * vip - s * viq;
          v(i, q) = s * vip + c * viq;
        }
      }
    }
  }
  if (sweep == max_sweeps) {
    throw NumericError(
        "eig_sym: Jacobi sweeps did not converge after 100 sweeps; matrix may "
        "be badly conditioned (max |entry| = " +
        std::to_string(scale) + ")");
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return a(i, i) > a(j, j); });

  EigDecomposition out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (int i = 0; i < n; ++i) {
    out.eigenvalues(i) = a(order[i], order[i]);
    out.eigenvectors.col(i) = v.col(order[i]);
  }
  return out;
}

bool is_spd(const EigDecomposition& eig) {
  const double lmax = eig.eigenvalues(0);
  const double lmin = eig.eigenvalues(eig.eigenvalues.size() - 1);
  return lmax > 0 && lmin > kSpdRelTol * lmax;
}

double spd_inverse_trace(const SymMatrix& a) {
  const EigDecomposition eig = eig_sym(a);
  if (!is_spd(eig)) {
    throw RankError("spd_inverse_trace: matrix is singular or indefinite "
                    "(lambda_min = " +
                    std::to_string(eig.eigenvalues(eig.eigenvalues.size() - 1)) +
                    ", lambda_max = " + std::to_string(eig.eigenvalues(0)) + ")");
  }
  return eig.eigenvalues.cwiseInverse().sum();
}

double log_gamma(double x) {
  if (!(x > 0)) throw DomainError("log_gamma: argument must be positive");
  // Stirling series is accurate for large arguments; shift smaller ones up.
  double shift = 0.0;
  while (x < 8.0) {
    shift += std::log(x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Asymptotic series coefficients B_{2n} / (2n (2n-1)).
  const double series =
      inv * (1.0 / 12.0 +
             inv2 * (-1.0 / 360.0 +
                     inv2 * (1.0 / 1260.0 +
                             inv2 * (-1.0 / 1680.0 + inv2 * (1.0 / 1188.0)))));
  constexpr double half_log_two_pi = 0.91893853320467274178;
  return (x - 0.5) * std::log(x) - x + half_log_two_pi + series - shift;
}

namespace {

// Lower incomplete gamma by power series, valid for x < a + 1.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-16) {
      return sum * std::exp(-x + a * std::log(x) - log_gamma(a));
    }
  }
  throw NumericError("gamma_p: series did not converge");
}

// Upper incomplete gamma by Lentz continued fraction, valid for x >= a + 1.
double gamma_q_cf(double a, double x) {
  const double tiny = std::numeric_limits<double>::min() / 1e-30;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) {
      return h * std::exp(-x + a * std::log(x) - log_gamma(a));
    }
  }
  throw NumericError("gamma_p: continued fraction did not converge");
}

}  // namespace

double gamma_p(double a, double x) {
  if (!(a > 0) || x < 0) throw DomainError("gamma_p: require a > 0, x >= 0");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_cf(a, x);
}

double chi2_cdf(int dof, double x) {
  if (dof < 1) throw DomainError("chi2_cdf: dof must be positive");
  if (x <= 0.0) return 0.0;
  return gamma_p(0.5 * dof, 0.5 * x);
}

namespace {

// Bracketed bisection with Newton refinement. `cdf` must be nondecreasing,
// `pdf` its derivative. Bracket [lo, hi] must contain the root.
template <typename Cdf, typename Pdf>
double invert_cdf(const Cdf& cdf, const Pdf& pdf, double p, double lo,
                  double hi) {
  constexpr double tol = 1e-10;
  constexpr int max_iter = 200;
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < max_iter; ++it) {
    const double f = cdf(x) - p;
    if (f > 0)
      hi = x;
    else
      lo = x;
    if (hi - lo < tol) return 0.5 * (lo + hi);
    const double dens = pdf(x);
    double next = dens > 0 ? x - f / dens : lo - 1.0;  // force bisection
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) < tol && std::abs(f) < tol) return next;
    x = next;
  }
  return x;
}

}  // namespace

double chi2_quantile(int dof, double p) {
  if (dof < 1) throw DomainError("chi2_quantile: dof must be positive");
  if (p < 0.0 || p >= 1.0) {
    throw DomainError("chi2_quantile: p must lie in [0, 1)");
  }
  if (p == 0.0) return 0.0;

  double hi = std::max(2.0 * dof, 16.0);
  while (chi2_cdf(dof, hi) < p) hi *= 2.0;
  const double a = 0.5 * dof;
  const double log_norm = -a * std::log(2.0) - log_gamma(a);
  auto pdf = [&](double x) {
    return x > 0 ? std::exp(log_norm + (a - 1.0) * std::log(x) - 0.5 * x) : 0.0;
  };
  auto cdf = [&](double x) { return chi2_cdf(dof, x); };
  return invert_cdf(cdf, pdf, p, 0.0, hi);
}

double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("normal_quantile: p must lie in (0, 1)");
  }
  // Enforce odd symmetry exactly.
  if (p == 0.5) return 0.0;
  if (p < 0.5) return -normal_quantile(1.0 - p);

  double hi = 2.0;
  while (normal_cdf(hi) < p) hi += 2.0;
  constexpr double inv_sqrt_two_pi = 0.39894228040143267794;
  auto pdf = [](double x) {
    return inv_sqrt_two_pi * std::exp(-0.5 * x * x);
  };
  return invert_cdf(normal_cdf, pdf, p, 0.0, hi);
}

}  // namespace oal
