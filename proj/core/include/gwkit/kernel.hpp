#ifndef GWKIT_KERNEL_HPP
#define GWKIT_KERNEL_HPP

#include <cstddef>
#include <string>

#include <armadillo>

namespace gwkit {

class DistanceMatrix;

enum class KernelType { Boxcar, Bisquare, Tricube, Gaussian, Exponential };

enum class BandwidthForm { Fixed, Adaptive };

// Fixed bandwidths are distances in the coordinate units; adaptive ones are
// neighbour counts (the location itself counts as neighbour 1).
struct Bandwidth {
    BandwidthForm form = BandwidthForm::Fixed;
    double value = 0.0;

    static Bandwidth fixed(double distance) { return {BandwidthForm::Fixed, distance}; }
    static Bandwidth adaptive(double count) { return {BandwidthForm::Adaptive, count}; }
};

struct KernelSpec {
    KernelType type = KernelType::Bisquare;
    Bandwidth bandwidth;
};

const char* kernel_name(KernelType type);
KernelType kernel_from_name(const std::string& name);

// Weight of one observation at distance d for bandwidth distance b (> 0).
// Compact kernels (boxcar, bisquare, tricube) use a strict d < b window, so
// the weight at d == b is exactly 0; gaussian and exponential never vanish.
double kernel_weight(double d, double b, KernelType type);

// Weight vector for calibration location i against all n observations.
// Adaptive bandwidths are resolved to the distance of the N-th nearest
// observation, nudged up by one ulp so that the window contains exactly N
// points (otherwise the strict boundary would drop the N-th neighbour, and
// adaptive(1) would have no window at all).
//
// If min_nonzero > 0 the result is checked to carry at least that many
// positive weights; failing the check throws SingularNeighbourhoodError.
arma::vec weights_for_location(std::size_t i, const DistanceMatrix& dm,
                               const KernelSpec& spec, std::size_t min_nonzero = 0);

// Same thing for an arbitrary distance row (used for out-of-sample points).
arma::vec weights_for_distances(const arma::vec& distances, const KernelSpec& spec,
                                std::size_t min_nonzero = 0);

} // namespace gwkit

#endif
