#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "rmtd/matrices.hpp"
#include "rmtd/models.hpp"

namespace rmtd {

// Marchenko-Pastur law for aspect ratio c: support edges a = (1-sqrt(c))^2,
// b = (1+sqrt(c))^2, plus a point mass at zero of 1 - 1/c when c > 1.
struct MpLaw {
    double c = 0.0;
    double a = 0.0;
    double b = 0.0;
    double mass_at_zero = 0.0;
};

// Edges and zero-mass for aspect ratio c > 0; throws std::invalid_argument
// otherwise.
MpLaw mp_support(double c);

// Absolutely continuous MP density sqrt((b-x)(x-a)) / (2*pi*x*c) on (a, b),
// zero elsewhere; excludes the point mass at zero.
double mp_density(double x, double c);

// MP distribution function including the point mass at zero. Monotone,
// mp_cdf(x <= 0-) = 0, mp_cdf(b) = 1; adaptive quadrature, absolute error
// well under 1e-8.
double mp_cdf(double x, double c);

// Binned empirical spectral distribution. When an explicit range is given,
// eigenvalues falling outside are tallied in the underflow/overflow fields,
// so counts.sum() + underflow + overflow == total always holds.
struct EsdHistogram {
    RealVector bin_edges;      // ascending, size bins + 1
    Eigen::VectorXi counts;    // size bins
    long underflow = 0;
    long overflow = 0;
    long total = 0;

    // Normalized bin heights: counts / (total * width); a sub-probability
    // density (mass can sit in under/overflow or the MP zero atom).
    RealVector density() const;
    RealVector bin_centers() const;
};

// Histogram over [min, max] of the spectrum or the given range. bin_count of
// nullopt selects the Freedman-Diaconis rule; explicit values must be >= 1.
// Empty spectra are rejected with std::invalid_argument.
EsdHistogram esd_histogram(const EigenSpectrum& eigs,
                           std::optional<int> bin_count = std::nullopt,
                           std::optional<std::pair<double, double>> range = std::nullopt);

// Outlier limit of a population spike lambda_pop: lambda + c*lambda/(lambda-1),
// defined only above the phase transition lambda_pop > 1 + sqrt(c); returns
// nullopt (not emerged) at or below it.
std::optional<double> spike_limit(double lambda_pop, double c);

// Data-side form of the outlier limit, lambda_N*c + lambda_N/(lambda_N - 1)
// for the sample-side spike lambda_N > 1 (std::invalid_argument otherwise).
// Converges to spike_limit of the matching population spike as N grows.
double spike_limit_data_side(double lambda_popN, double c);

// Predicted outlier locations for an H1 scenario: L copies of
// spike_limit(P*sigma2 + 1, c) with emergence flags. Entries of `limits` are
// NaN where not emerged. H0 scenarios are rejected (no spikes to predict).
struct SpikePrediction {
    RealVector limits;
    double phase_transition_edge = 0.0;  // 1 + sqrt(c)
    std::vector<bool> emerged;
};

SpikePrediction predicted_spikes(const Scenario& scenario);

// Kolmogorov-Smirnov distance sup_x |ECDF(x) - mp_cdf(x)| of a spectrum
// against the MP law.
double ks_distance(const EigenSpectrum& eigs, const MpLaw& law);

}  // namespace rmtd
