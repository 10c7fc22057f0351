#include "gwkit/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "gwkit/dataset.hpp"
#include "gwkit/errors.hpp"

using namespace arma;

namespace gwkit {

const char* kernel_name(KernelType type) {
    switch (type) {
        case KernelType::Boxcar: return "boxcar";
        case KernelType::Bisquare: return "bisquare";
        case KernelType::Tricube: return "tricube";
        case KernelType::Gaussian: return "gaussian";
        case KernelType::Exponential: return "exponential";
    }
    return "bisquare";
}

KernelType kernel_from_name(const std::string& name) {
    if (name == "boxcar") return KernelType::Boxcar;
    if (name == "bisquare") return KernelType::Bisquare;
    if (name == "tricube") return KernelType::Tricube;
    if (name == "gaussian") return KernelType::Gaussian;
    if (name == "exponential") return KernelType::Exponential;
    throw ContractError("unknown kernel '" + name +
                        "' (expected boxcar, bisquare, tricube, gaussian or exponential)");
}

double kernel_weight(double d, double b, KernelType type) {
    if (d < 0.0) throw ContractError("kernel_weight: negative distance");
    if (b <= 0.0) throw BandwidthError("kernel_weight: bandwidth must be positive");
    switch (type) {
        case KernelType::Boxcar:
            return d < b ? 1.0 : 0.0;
        case KernelType::Bisquare: {
            if (d >= b) return 0.0;
            double u = 1.0 - (d / b) * (d / b);
            return u * u;
        }
        case KernelType::Tricube: {
            if (d >= b) return 0.0;
            double r = d / b;
            double u = 1.0 - r * r * r;
            return u * u * u;
        }
        case KernelType::Gaussian:
            return std::exp(-0.5 * (d / b) * (d / b));
        case KernelType::Exponential:
            return std::exp(-d / b);
    }
    return 0.0;
}

namespace {

double resolve_bandwidth(const vec& distances, const Bandwidth& bw) {
    if (bw.form == BandwidthForm::Fixed) {
        if (bw.value <= 0.0)
            throw BandwidthError("fixed bandwidth must be a positive distance, got " +
                                 std::to_string(bw.value));
        return bw.value;
    }
    double count = bw.value;
    if (count < 1.0 || count != std::floor(count))
        throw BandwidthError("adaptive bandwidth must be a whole number of neighbours >= 1, got " +
                             std::to_string(count));
    uword k = static_cast<uword>(count);
    if (k > distances.n_elem) k = distances.n_elem;
    vec sorted = sort(distances);
    // One ulp up so the k-th neighbour sits strictly inside the window.
    return std::nextafter(sorted(k - 1), std::numeric_limits<double>::infinity());
}

vec weights_impl(const vec& distances, const KernelSpec& spec, std::size_t min_nonzero) {
    double b = resolve_bandwidth(distances, spec.bandwidth);
    vec w(distances.n_elem);
    for (uword j = 0; j < distances.n_elem; ++j)
        w(j) = kernel_weight(distances(j), b, spec.type);
    if (min_nonzero > 0) {
        uword nonzero = accu(w > 0.0);
        if (nonzero < min_nonzero) {
            std::ostringstream msg;
            msg << "bandwidth leaves only " << nonzero << " observations with positive weight ("
                << min_nonzero << " needed)";
            throw SingularNeighbourhoodError(msg.str());
        }
    }
    return w;
}

} // namespace

vec weights_for_location(std::size_t i, const DistanceMatrix& dm, const KernelSpec& spec,
                         std::size_t min_nonzero) {
    if (i >= dm.n()) throw ContractError("weights_for_location: index out of range");
    return weights_impl(dm.row(i), spec, min_nonzero);
}

vec weights_for_distances(const vec& distances, const KernelSpec& spec,
                          std::size_t min_nonzero) {
    return weights_impl(distances, spec, min_nonzero);
}

} // namespace gwkit
