#include "gwkit/synth.hpp"

#include <cmath>
#include <sstream>

#include "gwkit/errors.hpp"

using namespace arma;

namespace gwkit {

std::uint64_t PortableRng::next_u64() {
    // splitmix64 (public domain), the reference constants
    state_ += 0x9E3779B97f4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double PortableRng::next_uniform() {
    // top 53 bits, in [0, 1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double PortableRng::next_normal() {
    double u1 = next_uniform();
    double u2 = next_uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * datum::pi * u2);
}

SurfaceSpec SurfaceSpec::constant(double c) {
    SurfaceSpec s;
    s.kind = SurfaceKind::Constant;
    s.a = c;
    return s;
}

SurfaceSpec SurfaceSpec::linear_trend(double a, double b) {
    SurfaceSpec s;
    s.kind = SurfaceKind::LinearTrend;
    s.a = a;
    s.b = b;
    return s;
}

SurfaceSpec SurfaceSpec::gaussian_bump(double cx, double cy, double amplitude,
                                       double length_scale) {
    SurfaceSpec s;
    s.kind = SurfaceKind::GaussianBump;
    s.a = cx;
    s.b = cy;
    s.amplitude = amplitude;
    s.length_scale = length_scale;
    return s;
}

double SurfaceSpec::value(double u, double v, double extent) const {
    switch (kind) {
        case SurfaceKind::Constant:
            return a;
        case SurfaceKind::LinearTrend:
            return (a * u + b * v) / extent;
        case SurfaceKind::GaussianBump: {
            double du = u - a, dv = v - b;
            double r2 = du * du + dv * dv;
            return amplitude * std::exp(-r2 / (2.0 * length_scale * length_scale));
        }
    }
    return 0.0;
}

SvcData generate_svc(const SynthSpec& spec, std::uint64_t seed) {
    if (spec.n < 4) throw ContractError("need at least 4 synthetic points");
    if (spec.extent <= 0.0) throw ContractError("extent must be positive");
    if (spec.surfaces.empty())
        throw ContractError("need at least the intercept surface");
    if (spec.noise_sd < 0.0 || spec.predictor_sd <= 0.0)
        throw ContractError("predictor_sd must be positive and noise_sd non-negative");

    std::size_t n = spec.n;
    std::size_t m = spec.surfaces.size() - 1;  // predictors beyond the intercept

    std::vector<std::string> names = spec.predictor_names;
    if (names.empty()) {
        for (std::size_t k = 1; k <= m; ++k) names.push_back("x" + std::to_string(k));
    }
    if (names.size() != m)
        throw ContractError("predictor name count does not match the surface count");

    PortableRng rng(seed);

    mat coords(n, 2);
    if (spec.layout == PointLayout::Grid) {
        std::size_t side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
        double spacing = side > 1 ? spec.extent / static_cast<double>(side - 1) : 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            coords(i, 0) = static_cast<double>(i % side) * spacing;
            coords(i, 1) = static_cast<double>(i / side) * spacing;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            coords(i, 0) = spec.extent * rng.next_uniform();
            coords(i, 1) = spec.extent * rng.next_uniform();
        }
    }

    mat predictors(n, m);
    for (std::size_t k = 0; k < m; ++k)
        for (std::size_t i = 0; i < n; ++i)
            predictors(i, k) = spec.predictor_sd * rng.next_normal();

    mat truth(n, m + 1);
    for (std::size_t k = 0; k <= m; ++k)
        for (std::size_t i = 0; i < n; ++i)
            truth(i, k) = spec.surfaces[k].value(coords(i, 0), coords(i, 1), spec.extent);

    vec y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double signal = truth(i, 0);
        for (std::size_t k = 0; k < m; ++k) signal += truth(i, k + 1) * predictors(i, k);
        y(i) = signal;
    }
    for (std::size_t i = 0; i < n; ++i) y(i) += spec.noise_sd * rng.next_normal();

    SvcData out;
    out.dataset = SpatialDataset(std::move(coords), std::move(y), std::move(predictors),
                                 spec.response_name, names);
    out.truth = std::move(truth);
    return out;
}

} // namespace gwkit
