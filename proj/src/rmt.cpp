#include "rmtd/rmt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace rmtd {

namespace {

// Integrand of the MP density after the substitution x = a + (b-a)*sin^2(t),
// which absorbs both square-root edge factors; s2 = sin^2(t). The ratio is
// written so the c = 1 case (a = 0) cancels the s2 pole algebraically.
double mp_theta_integrand(double s2, const MpLaw& law) {
    const double width = law.b - law.a;
    const double denom_core = law.a + width * s2;
    if (law.a == 0.0)
        return width * (1.0 - s2) / (std::numbers::pi * law.c);
    return width * width * s2 * (1.0 - s2) / (std::numbers::pi * law.c * denom_core);
}

double adaptive_simpson(double (*f)(double, const MpLaw&), const MpLaw& law, double lo,
                        double hi, double flo, double fmid, double fhi, double whole,
                        double tol, int depth) {
    const double mid = (lo + hi) / 2.0;
    const double lmid = (lo + mid) / 2.0;
    const double rmid = (mid + hi) / 2.0;
    const double fl = f(std::sin(lmid) * std::sin(lmid), law);
    const double fr = f(std::sin(rmid) * std::sin(rmid), law);
    const double left = (mid - lo) / 6.0 * (flo + 4.0 * fl + fmid);
    const double right = (hi - mid) / 6.0 * (fmid + 4.0 * fr + fhi);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson(f, law, lo, mid, flo, fl, fmid, left, tol / 2.0, depth - 1) +
           adaptive_simpson(f, law, mid, hi, fmid, fr, fhi, right, tol / 2.0, depth - 1);
}

// Integral of the MP density from the lower edge to theta_hi in substituted
// coordinates, theta_hi in [0, pi/2].
double mp_partial_mass(double theta_hi, const MpLaw& law) {
    if (theta_hi <= 0.0) return 0.0;
    auto eval = [&law](double theta) {
        const double s = std::sin(theta);
        return mp_theta_integrand(s * s, law);
    };
    const double lo = 0.0;
    const double mid = theta_hi / 2.0;
    const double flo = eval(lo);
    const double fmid = eval(mid);
    const double fhi = eval(theta_hi);
    const double whole = theta_hi / 6.0 * (flo + 4.0 * fmid + fhi);
    return adaptive_simpson(mp_theta_integrand, law, lo, theta_hi, flo, fmid, fhi, whole,
                            1e-10, 48);
}

}  // namespace

MpLaw mp_support(double c) {
    if (!(c > 0.0))
        throw std::invalid_argument("mp_support: aspect ratio c must be > 0, got " +
                                    std::to_string(c));
    MpLaw law;
    law.c = c;
    const double r = std::sqrt(c);
    law.a = (1.0 - r) * (1.0 - r);
    law.b = (1.0 + r) * (1.0 + r);
    law.mass_at_zero = std::max(0.0, 1.0 - 1.0 / c);
    return law;
}

double mp_density(double x, double c) {
    const MpLaw law = mp_support(c);
    if (!(x > law.a) || !(x < law.b)) return 0.0;
    return std::sqrt((law.b - x) * (x - law.a)) / (2.0 * std::numbers::pi * x * c);
}

double mp_cdf(double x, double c) {
    const MpLaw law = mp_support(c);
    if (x < 0.0) return 0.0;
    if (x >= law.b) return 1.0;
    if (x <= law.a) return law.mass_at_zero;
    const double ratio = (x - law.a) / (law.b - law.a);
    const double theta = std::asin(std::min(1.0, std::sqrt(ratio)));
    return std::min(1.0, law.mass_at_zero + mp_partial_mass(theta, law));
}

RealVector EsdHistogram::density() const {
    RealVector d(counts.size());
    for (Eigen::Index i = 0; i < counts.size(); ++i) {
        const double width = bin_edges[i + 1] - bin_edges[i];
        d[i] = static_cast<double>(counts[i]) / (static_cast<double>(total) * width);
    }
    return d;
}

RealVector EsdHistogram::bin_centers() const {
    RealVector centers(counts.size());
    for (Eigen::Index i = 0; i < counts.size(); ++i)
        centers[i] = (bin_edges[i] + bin_edges[i + 1]) / 2.0;
    return centers;
}

namespace {

int freedman_diaconis_bins(const RealVector& sorted_asc, double lo, double hi) {
    const auto n = sorted_asc.size();
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(n - 1);
        const auto idx = static_cast<Eigen::Index>(pos);
        if (idx + 1 >= n) return sorted_asc[n - 1];
        const double frac = pos - static_cast<double>(idx);
        return sorted_asc[idx] * (1.0 - frac) + sorted_asc[idx + 1] * frac;
    };
    const double iqr = quantile(0.75) - quantile(0.25);
    const double h = 2.0 * iqr * std::pow(static_cast<double>(n), -1.0 / 3.0);
    if (!(h > 0.0)) return std::max(1, static_cast<int>(std::ceil(std::sqrt(double(n)))));
    const double raw = std::ceil((hi - lo) / h);
    return static_cast<int>(std::clamp(raw, 1.0, 1024.0));
}

}  // namespace

EsdHistogram esd_histogram(const EigenSpectrum& eigs, std::optional<int> bin_count,
                           std::optional<std::pair<double, double>> range) {
    if (eigs.values.size() == 0)
        throw std::invalid_argument("esd_histogram: empty spectrum");
    if (bin_count && *bin_count < 1)
        throw std::invalid_argument("esd_histogram: bin_count must be >= 1, got " +
                                    std::to_string(*bin_count));
    double lo, hi;
    if (range) {
        lo = range->first;
        hi = range->second;
        if (!(lo < hi))
            throw std::invalid_argument("esd_histogram: range must satisfy lo < hi");
    } else {
        lo = eigs.values.minCoeff();
        hi = eigs.values.maxCoeff();
        if (lo == hi) {
            lo -= 0.5;
            hi += 0.5;
        }
    }
    RealVector sorted_asc = eigs.values.reverse();
    std::sort(sorted_asc.begin(), sorted_asc.end());
    int bins;
    if (bin_count) {
        bins = *bin_count;
    } else {
        bins = freedman_diaconis_bins(sorted_asc, lo, hi);
    }
    EsdHistogram hist;
    hist.bin_edges.resize(bins + 1);
    const double width = (hi - lo) / static_cast<double>(bins);
    for (int i = 0; i <= bins; ++i) hist.bin_edges[i] = lo + width * static_cast<double>(i);
    hist.counts = Eigen::VectorXi::Zero(bins);
    hist.total = static_cast<long>(eigs.values.size());
    for (Eigen::Index i = 0; i < eigs.values.size(); ++i) {
        const double v = eigs.values[i];
        if (v < lo) {
            ++hist.underflow;
        } else if (v > hi) {
            ++hist.overflow;
        } else {
            const int bin = std::min(bins - 1, static_cast<int>((v - lo) / width));
            ++hist.counts[bin];
        }
    }
    return hist;
}

std::optional<double> spike_limit(double lambda_pop, double c) {
    if (!(c > 0.0))
        throw std::invalid_argument("spike_limit: aspect ratio c must be > 0");
    if (!(lambda_pop > 0.0))
        throw std::invalid_argument("spike_limit: population eigenvalue must be > 0, got " +
                                    std::to_string(lambda_pop));
    if (lambda_pop <= 1.0 + std::sqrt(c)) return std::nullopt;
    return lambda_pop + c * lambda_pop / (lambda_pop - 1.0);
}

double spike_limit_data_side(double lambda_popN, double c) {
    if (!(c > 0.0))
        throw std::invalid_argument("spike_limit_data_side: aspect ratio c must be > 0");
    if (!(lambda_popN > 1.0))
        throw std::invalid_argument(
            "spike_limit_data_side: sample-side spike must exceed 1, got " +
            std::to_string(lambda_popN));
    return lambda_popN * c + lambda_popN / (lambda_popN - 1.0);
}

SpikePrediction predicted_spikes(const Scenario& scenario) {
    scenario.validate();
    if (scenario.hypothesis == Hypothesis::H0)
        throw std::invalid_argument("predicted_spikes: H0 scenario carries no spikes");
    const double c = scenario.c();
    SpikePrediction prediction;
    prediction.phase_transition_edge = 1.0 + std::sqrt(c);
    prediction.limits.resize(scenario.L);
    prediction.emerged.assign(static_cast<std::size_t>(scenario.L), false);
    const double lambda_pop = static_cast<double>(scenario.P) * scenario.sigma2 + 1.0;
    for (int l = 0; l < scenario.L; ++l) {
        const auto limit = spike_limit(lambda_pop, c);
        prediction.emerged[static_cast<std::size_t>(l)] = limit.has_value();
        prediction.limits[l] = limit.value_or(std::numeric_limits<double>::quiet_NaN());
    }
    return prediction;
}

double ks_distance(const EigenSpectrum& eigs, const MpLaw& law) {
    const auto n = eigs.values.size();
    if (n == 0) throw std::invalid_argument("ks_distance: empty spectrum");
    RealVector sorted_asc = eigs.values.reverse();
    std::sort(sorted_asc.begin(), sorted_asc.end());
    double dist = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double f = mp_cdf(sorted_asc[i], law.c);
        const double hi = static_cast<double>(i + 1) / static_cast<double>(n);
        const double lo = static_cast<double>(i) / static_cast<double>(n);
        dist = std::max({dist, std::abs(f - hi), std::abs(f - lo)});
    }
    return dist;
}

}  // namespace rmtd
