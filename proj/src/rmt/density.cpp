#include <cmath>
#include <numbers>
#include <string>

#include "bnlab/error.hpp"
#include "bnlab/rmt.hpp"

namespace bnlab::rmt {

namespace {

constexpr double kPi = std::numbers::pi;

void check_m(unsigned m) {
    if (m == 0) throw DomainError("number of factor matrices must be positive");
}

double phi_max(unsigned m) { return kPi / (m + 1.0); }

// rho(phi) |dx/dphi| = -(g / pi) d(ln x)/dphi with g = sin((M+1)phi) sin(phi) / sin(M phi).
double cdf_integrand(unsigned m, double phi) {
    const double mp1 = m + 1.0, md = m;
    const double s1 = std::sin(mp1 * phi), c1 = std::cos(mp1 * phi);
    const double sp = std::sin(phi), cp = std::cos(phi);
    const double sm = std::sin(md * phi), cm = std::cos(md * phi);
    const double g = s1 * sp / sm;
    return -(mp1 * mp1 * c1 * sp / sm - g * cp / sp - md * md * g * cm / sm) / kPi;
}

double simpson(double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive(unsigned m, double a, double b, double fa, double fm, double fb, double whole, double tol,
                int depth) {
    const double mid = 0.5 * (a + b);
    const double lm = 0.5 * (a + mid), rm = 0.5 * (mid + b);
    const double flm = cdf_integrand(m, lm), frm = cdf_integrand(m, rm);
    const double left = simpson(a, mid, fa, flm, fm);
    const double right = simpson(mid, b, fm, frm, fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return adaptive(m, a, mid, fa, flm, fm, left, tol / 2.0, depth - 1) +
           adaptive(m, mid, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

// Integrand limits at the open endpoints, where the closed form is 0/0.
double integrand_at(unsigned m, double phi) {
    if (phi <= 0.0 || phi >= phi_max(m)) return 0.0;
    return cdf_integrand(m, phi);
}

double integrate_phi(unsigned m, double a, double b) {
    if (!(b > a)) return 0.0;
    const double fa = integrand_at(m, a), fb = integrand_at(m, b), fm = integrand_at(m, 0.5 * (a + b));
    return adaptive(m, a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), 1e-13, 40);
}

}  // namespace

double support_upper(unsigned m) {
    check_m(m);
    return std::pow(m + 1.0, m + 1.0) / std::pow(static_cast<double>(m), static_cast<double>(m));
}

double x_of_phi(unsigned m, double phi) {
    check_m(m);
    if (!(phi > 0.0 && phi < phi_max(m)))
        throw DomainError("phi = " + std::to_string(phi) + " outside (0, pi/(M+1))");
    const double s1 = std::sin((m + 1.0) * phi);
    return std::pow(s1, m + 1.0) / (std::sin(phi) * std::pow(std::sin(m * phi), static_cast<double>(m)));
}

double phi_of_x(unsigned m, double x) {
    const double upper = support_upper(m);
    if (!(x > 0.0 && x < upper))
        throw DomainError("x = " + std::to_string(x) + " outside the open support (0, " + std::to_string(upper) + ")");
    // x_of_phi decreases from upper to 0 across the interval.
    double lo = 0.0, hi = phi_max(m);
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (x_of_phi(m, mid) > x)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

double density(unsigned m, double x) {
    const double phi = phi_of_x(m, x);
    const double rho = std::sin((m + 1.0) * phi) * std::sin(phi) / (kPi * x * std::sin(m * phi));
    return rho > 0.0 ? rho : 0.0;
}

double cdf(unsigned m, double x) {
    const double upper = support_upper(m);
    if (!(x > 0.0)) return 0.0;
    if (x >= upper) return 1.0;
    const double v = integrate_phi(m, phi_of_x(m, x), phi_max(m));
    return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
}

double mp_density(double x) {
    if (!(x > 0.0 && x < 4.0)) throw DomainError("x outside the Marchenko-Pastur support (0, 4)");
    return std::sqrt(4.0 - x) / (2.0 * kPi * std::sqrt(x));
}

double mp_cdf(double x) {
    if (!(x > 0.0)) return 0.0;
    if (x >= 4.0) return 1.0;
    const double theta = std::asin(std::sqrt(x) / 2.0);
    return 2.0 / kPi * (theta + std::sin(theta) * std::cos(theta));
}

}  // namespace bnlab::rmt
