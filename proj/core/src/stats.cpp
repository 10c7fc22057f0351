#include "gwkit/stats.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace gwkit {

double t_pvalue(double t, double df) {
    if (!std::isfinite(t)) return std::isnan(t) ? 1.0 : 0.0;
    double d = std::max(1.0, std::floor(df));
    boost::math::students_t dist(d);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

double normal_pvalue(double z) {
    if (!std::isfinite(z)) return std::isnan(z) ? 1.0 : 0.0;
    boost::math::normal dist;
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(z)));
}

double f_pvalue(double f, double df1, double df2) {
    if (!std::isfinite(f) || f <= 0.0) return 1.0;
    boost::math::fisher_f dist(std::max(1.0, df1), std::max(1.0, df2));
    return boost::math::cdf(boost::math::complement(dist, f));
}

} // namespace gwkit
