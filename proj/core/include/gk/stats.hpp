#pragma once

#include <cstdint>
#include <vector>

namespace gk {

// Standard normal CDF.
double norm_cdf(double x);

// Standard normal quantile (Wichura's AS 241, double precision).
// Accepts p in (0, 1); accurate into the far tails.
double norm_quantile(double p);

// Two-sided p-value of a z statistic: P(|Z| >= |z|).
double two_sided_p(double z);

// -log10 of the two-sided p-value, with an asymptotic branch where
// erfc underflows (|z| beyond ~38).
double neg_log10_two_sided_p(double z);

// Upper tail of the chi-square distribution with 1 degree of freedom.
double chisq1_upper(double x);

// Upper tail of the chi-square distribution with 2L degrees of freedom
// (Erlang closed form; Fisher's combined test).
double chisq_even_df_upper(double x, int l);

// Median with the mean-of-middle-two convention. Consumes the buffer.
double median_inplace(std::vector<double>& v);

}
