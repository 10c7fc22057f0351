#ifndef GWKIT_SYNTH_HPP
#define GWKIT_SYNTH_HPP

#include <cstdint>
#include <cstddef>
#include <string>
#include <vector>

#include <armadillo>

#include "gwkit/dataset.hpp"
#include "gwkit/rng.hpp"

namespace gwkit {

enum class SurfaceKind { Constant, LinearTrend, GaussianBump };

// Coefficient surfaces over [0, extent]^2:
//   constant(c):              beta(u, v) = c
//   linear_trend(a, b):       beta(u, v) = (a u + b v) / extent
//   gaussian_bump(cx, cy, amplitude, length_scale):
//                             beta(u, v) = amplitude exp(-r^2 / (2 ls^2))
struct SurfaceSpec {
    SurfaceKind kind = SurfaceKind::Constant;
    double a = 0.0;   // c | a | cx
    double b = 0.0;   //   | b | cy
    double amplitude = 0.0;
    double length_scale = 1.0;

    static SurfaceSpec constant(double c);
    static SurfaceSpec linear_trend(double a, double b);
    static SurfaceSpec gaussian_bump(double cx, double cy, double amplitude,
                                     double length_scale);

    double value(double u, double v, double extent) const;
};

enum class PointLayout { Grid, UniformRandom };

struct SynthSpec {
    std::size_t n = 100;
    double extent = 1000.0;
    PointLayout layout = PointLayout::Grid;
    std::vector<SurfaceSpec> surfaces;  // surfaces[0] multiplies the intercept
    double predictor_sd = 1.0;
    double noise_sd = 1.0;
    // "response" rather than "y": serialized next to x,y coordinate columns.
    std::string response_name = "response";
    std::vector<std::string> predictor_names;  // defaults to x1, x2, ...
};

struct SvcData {
    SpatialDataset dataset;
    arma::mat truth;  // n x (number of surfaces), the coefficient fields
};

// Draw order is fixed: random coordinates first (grid layouts draw none),
// then predictor columns one at a time, then the noise vector. Same seed and
// spec, same dataset, on any platform.
SvcData generate_svc(const SynthSpec& spec, std::uint64_t seed);

} // namespace gwkit

#endif
