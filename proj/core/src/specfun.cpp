#include "linprobit/specfun.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "linprobit/errors.hpp"

namespace linprobit {

namespace {

constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;
constexpr double kHalfLog2Pi = 0.918938533204672741780329736406;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Gauss-Legendre half-rules (negative abscissae) used by the Genz BVN code.
constexpr std::array<double, 3> kGl6X = {-0.9324695142031522, -0.6612093864662647, -0.2386191860831970};
constexpr std::array<double, 3> kGl6W = {0.1713244923791705, 0.3607615730481384, 0.4679139345726904};
constexpr std::array<double, 6> kGl12X = {-0.9815606342467191, -0.9041172563704750, -0.7699026741943050,
                                          -0.5873179542866171, -0.3678314989981802, -0.1252334085114692};
constexpr std::array<double, 6> kGl12W = {0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                                          0.2031674267230659,  0.2334925365383547, 0.2491470458134029};
constexpr std::array<double, 10> kGl20X = {-0.9931285991850949, -0.9639719272779138, -0.9122344282513259,
                                           -0.8391169718222188, -0.7463319064601508, -0.6360536807265150,
                                           -0.5108670019508271, -0.3737060887154196, -0.2277858511416451,
                                           -0.07652652113349733};
constexpr std::array<double, 10> kGl20W = {0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
                                           0.08327674157670475, 0.1019301198172404,  0.1181945319615184,
                                           0.1316886384491766,  0.1420961093183821,  0.1491729864726037,
                                           0.1527533871307259};

struct GaussRule {
  const double* x;
  const double* w;
  int n;
};

GaussRule rule_for(double abs_rho) {
  if (abs_rho < 0.3) return {kGl6X.data(), kGl6W.data(), 3};
  if (abs_rho < 0.75) return {kGl12X.data(), kGl12W.data(), 6};
  return {kGl20X.data(), kGl20W.data(), 10};
}

// Upper orthant probability P(X > h, Y > k) for standard bivariate normal.
double bvn_upper(double h, double k, double r) {
  const GaussRule g = rule_for(std::abs(r));
  double hk = h * k;
  double bvn = 0.0;

  if (std::abs(r) < 0.925) {
    const double hs = (h * h + k * k) / 2.0;
    const double asr = std::asin(r);
    for (int i = 0; i < g.n; ++i) {
      double sn = std::sin(asr * (g.x[i] + 1.0) / 2.0);
      bvn += g.w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      sn = std::sin(asr * (-g.x[i] + 1.0) / 2.0);
      bvn += g.w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
    }
    return bvn * asr / (2.0 * kTwoPi) + norm_cdf(-h) * norm_cdf(-k);
  }

  if (r < 0.0) {
    k = -k;
    hk = -hk;
  }
  if (std::abs(r) < 1.0) {
    const double as = (1.0 - r) * (1.0 + r);
    double a = std::sqrt(as);
    const double bs = (h - k) * (h - k);
    const double c = (4.0 - hk) / 8.0;
    const double d = (12.0 - hk) / 16.0;
    bvn = a * std::exp(-(bs / as + hk) / 2.0) *
          (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
    if (hk > -160.0) {
      const double b = std::sqrt(bs);
      bvn -= std::exp(-hk / 2.0) * std::sqrt(kTwoPi) * norm_cdf(-b / a) * b *
             (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
    }
    a /= 2.0;
    for (int i = 0; i < g.n; ++i) {
      double xs = a * (g.x[i] + 1.0);
      xs *= xs;
      double rs = std::sqrt(1.0 - xs);
      bvn += a * g.w[i] *
             (std::exp(-bs / (2.0 * xs) - hk / (1.0 + rs)) / rs -
              std::exp(-(bs / xs + hk) / 2.0) * (1.0 + c * xs * (1.0 + d * xs)));
      xs = as * (1.0 - g.x[i]) * (1.0 - g.x[i]) / 4.0;
      rs = std::sqrt(1.0 - xs);
      bvn += a * g.w[i] * std::exp(-(bs / xs + hk) / 2.0) *
             (std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs - (1.0 + c * xs * (1.0 + d * xs)));
    }
    bvn = -bvn / kTwoPi;
  }
  if (r > 0.0) bvn += norm_cdf(-std::max(h, k));
  if (r < 0.0) bvn = -bvn + std::max(0.0, norm_cdf(-h) - norm_cdf(-k));
  return bvn;
}

// Wichura AS241 (PPND16). q = p - 1/2; `log_tail` is log(min(p, 1-p)) and is
// only consulted outside the central region.
double as241(double q, double log_tail) {
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((r * 2509.0809287301226727 + 33430.575583588128105) * r + 67265.770927008700853) * r +
                45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((r * 5226.495278852854561 + 28729.085735721942674) * r + 39307.89580009271061) * r +
                21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
  }
  double r = std::sqrt(-log_tail);
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((r * 7.7454501427834140764e-4 + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
               1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
            4.6303378461565452959) * r + 1.42343711074968357734) /
          (((((((r * 1.05075007164441684324e-9 + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
               0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
            2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((r * 2.01033439929228813265e-7 + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
               0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
            5.4637849111641143699) * r + 6.6579046435011037772) /
          (((((((r * 2.04426310338993978564e-15 + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
               7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
            0.59983220655588793769) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

}  // namespace

Correlation::Correlation(double rho) : rho_(rho) {
  if (!(std::abs(rho) < 1.0)) throw DomainError("correlation must lie strictly inside (-1, 1)");
}

double norm_pdf(double x) noexcept { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double log_norm_pdf(double x) noexcept { return -0.5 * x * x - kHalfLog2Pi; }

double norm_cdf(double x) noexcept { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

double log_norm_cdf(double x) noexcept {
  if (x == std::numeric_limits<double>::infinity()) return 0.0;
  if (x > 0.0) return std::log1p(-0.5 * std::erfc(x * std::numbers::sqrt2 / 2.0));
  if (x >= -30.0) return std::log(0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0));
  if (x == -std::numeric_limits<double>::infinity()) return x;
  // Mills-ratio series: Phi(x) ~ phi(x)/|x| * sum_k (-1)^k (2k-1)!! / x^{2k}.
  const double inv_x2 = 1.0 / (x * x);
  double term = 1.0;
  double series = 1.0;
  for (int k = 1; k <= 12; ++k) {
    term *= -(2.0 * k - 1.0) * inv_x2;
    series += term;
  }
  return -0.5 * x * x - std::log(-x) - kHalfLog2Pi + std::log(series);
}

double inv_mills(double x) noexcept {
  if (x > 5.0) return norm_pdf(x) / norm_cdf(x);
  return std::exp(log_norm_pdf(x) - log_norm_cdf(x));
}

double norm_cdf_inv(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("norm_cdf_inv: p must lie in (0, 1)");
  const double q = p - 0.5;
  const double tail = q > 0.0 ? 1.0 - p : p;
  return as241(q, std::abs(q) <= 0.425 ? 0.0 : std::log(tail));
}

double norm_cdf_inv_log(double log_p) {
  if (!(log_p < 0.0)) throw DomainError("norm_cdf_inv_log: log_p must be negative");
  const double p = std::exp(log_p);
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) return as241(q, 0.0);
  const double log_tail = q > 0.0 ? std::log(-std::expm1(log_p)) : log_p;
  double x = as241(q, log_tail);
  // The rational tail fit covers log p >= -700 or so; below that, polish by
  // Newton on log Phi(x) - log_p, whose derivative is the inverse Mills ratio.
  if (log_p < -700.0)
    for (int it = 0; it < 8; ++it) {
      const double step = (log_norm_cdf(x) - log_p) / inv_mills(x);
      x -= step;
      if (std::abs(step) <= 1e-15 * std::abs(x)) break;
    }
  return x;
}

double binorm_cdf(double x, double y, Correlation rho) noexcept {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (x == -inf || y == -inf) return 0.0;
  if (x == inf) return norm_cdf(y);
  if (y == inf) return norm_cdf(x);
  const double v = bvn_upper(-x, -y, rho.value());
  return std::clamp(v, 0.0, 1.0);
}

double binorm_cdf_closed(double x, double y, double rho) {
  if (!(rho >= -1.0 && rho <= 1.0)) throw DomainError("binorm_cdf_closed: rho must lie in [-1, 1]");
  if (rho == 1.0) return norm_cdf(std::min(x, y));
  if (rho == -1.0) return std::max(0.0, norm_cdf(x) + norm_cdf(y) - 1.0);
  return binorm_cdf(x, y, Correlation(rho));
}

}  // namespace linprobit
