#include "gk/stats.hpp"
#include "gk/rng.hpp"
#include "gk/errors.hpp"

#include <algorithm>
#include <cmath>

namespace gk {

double norm_cdf(double x) {
    return 0.5 * std::erfc(-x * M_SQRT1_2);
}

// AS 241 algorithm PPND16.
double norm_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw data_error("norm_quantile: p must be in (0,1)");
    const double q = p - 0.5;
    double r;
    if (std::fabs(q) <= 0.425) {
        r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                     6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
                   1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
                 1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
               (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                     3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
                   5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
                 4.2313330701600911252e+1) * r + 1.0);
    }
    r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                    2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
                  3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
                4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
              (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                    1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                  6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
                2.05319162663775882187e+0) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                    1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                  2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
                5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
              (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                    1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                  1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                5.99832206555887937690e-1) * r + 1.0);
    }
    return (q < 0.0) ? -val : val;
}

double two_sided_p(double z) {
    return std::erfc(std::fabs(z) * M_SQRT1_2);
}

double neg_log10_two_sided_p(double z) {
    const double az = std::fabs(z);
    const double p = std::erfc(az * M_SQRT1_2);
    if (p > 0.0) return -std::log10(p);
    // erfc underflowed: -log p ~ z^2/2 + log(z) + log(sqrt(pi/2)) - log 2 (two-sided)
    const double ln_p = -0.5 * az * az - std::log(az) - 0.5 * std::log(2.0 * M_PI) + std::log(2.0);
    return -ln_p / std::log(10.0);
}

double chisq1_upper(double x) {
    if (x <= 0.0) return 1.0;
    return std::erfc(std::sqrt(0.5 * x));
}

double chisq_even_df_upper(double x, int l) {
    if (l < 1) throw data_error("chisq_even_df_upper: need df >= 2");
    if (x <= 0.0) return 1.0;
    // P(chi2_{2L} > x) = exp(-x/2) * sum_{k=0}^{L-1} (x/2)^k / k!
    const double h = 0.5 * x;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < l; ++k) {
        term *= h / k;
        sum += term;
    }
    double out = std::exp(-h) * sum;
    return std::min(1.0, out);
}

double median_inplace(std::vector<double>& v) {
    const size_t n = v.size();
    if (n == 0) throw data_error("median of empty set");
    const size_t mid = n / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (n % 2 == 1) return hi;
    double lo = *std::max_element(v.begin(), v.begin() + mid);
    return 0.5 * (lo + hi);
}

double Rng::next_normal() {
    return norm_quantile(next_double());
}

}
