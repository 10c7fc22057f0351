#ifndef GWKIT_STATS_HPP
#define GWKIT_STATS_HPP

namespace gwkit {

// Two-sided tail probabilities. Degrees of freedom arriving as effective
// (non-integer) values are floored, with a minimum of 1.
double t_pvalue(double t, double df);
double normal_pvalue(double z);
double f_pvalue(double f, double df1, double df2);

} // namespace gwkit

#endif
