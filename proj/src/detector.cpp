#include "rmtd/detector.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "rmtd/errors.hpp"

namespace rmtd {

namespace {

void require_aspect_ratio(double c, const char* where) {
    if (!(c > 0.0) || !(c < 1.0))
        throw UnsupportedRegimeError(std::string(where) +
                                     ": aspect ratio c must lie in (0,1), got " +
                                     std::to_string(c) +
                                     " (the closed forms involve log(1-c))");
}

// Shared leading factor of both mean formulas:
// 1 - ((c-1)/c) * log(1-c). Sharing it keeps the documented zero-signal gap
// between the two closed forms exactly log(1-c).
double lss_mean_bracket(double c) {
    return 1.0 - ((c - 1.0) / c) * std::log1p(-c);
}

}  // namespace

std::string to_string(Decision d) {
    return d == Decision::SignalPresent ? "SignalPresent" : "NoiseOnly";
}

double half_log_offset(double c) {
    require_aspect_ratio(c, "half_log_offset");
    return std::abs(std::log1p(-c));
}

double glrt_statistic(const EigenSpectrum& eigs) {
    if (eigs.values.size() == 0)
        throw std::invalid_argument("glrt_statistic: empty spectrum");
    double d = 0.0;
    for (Eigen::Index i = 0; i < eigs.values.size(); ++i) {
        const double lambda = eigs.values[i];
        if (!(lambda > 0.0))
            throw SingularMatrixError(
                "glrt_statistic: eigenvalue " + std::to_string(lambda) + " at rank " +
                std::to_string(i) +
                " is not positive; the sample covariance matrix is singular (requires N >= P)");
        d += lambda - std::log(lambda) - 1.0;
    }
    return d;
}

namespace detail {

double glrt_statistic_from_matrix_impl(const ComplexMatrix& R) {
    if (R.rows() != R.cols() || R.rows() < 1)
        throw std::invalid_argument("glrt_statistic_from_matrix: matrix must be square");
    const double trace = R.trace().real();
    const double log_det = detail::log_det_psd_impl(R);
    return trace - log_det - static_cast<double>(R.rows());
}

}  // namespace detail

GlrtAsymptotics h0_asymptotics(int P, double c) {
    if (P < 1) throw std::invalid_argument("h0_asymptotics: P must be >= 1");
    require_aspect_ratio(c, "h0_asymptotics");
    const double log1mc = std::log1p(-c);
    GlrtAsymptotics out;
    out.mu = static_cast<double>(P) * lss_mean_bracket(c) - log1mc / 2.0;
    out.sigma2 = -2.0 * log1mc - 2.0 * c;
    out.hypothesis = Hypothesis::H0;
    return out;
}

GlrtAsymptotics h1_asymptotics(int P, double c, int L, double sigma2_chan) {
    if (P < 1) throw std::invalid_argument("h1_asymptotics: P must be >= 1");
    if (L < 0) throw std::invalid_argument("h1_asymptotics: L must be >= 0");
    if (!(sigma2_chan >= 0.0))
        throw std::invalid_argument("h1_asymptotics: sigma2 must be >= 0");
    require_aspect_ratio(c, "h1_asymptotics");
    const double log1mc = std::log1p(-c);
    const double p = static_cast<double>(P);
    const double l_over_p = static_cast<double>(L) / p;
    const double rho = p * sigma2_chan + 1.0;  // spiked population eigenvalue
    GlrtAsymptotics out;
    out.mu = p * (lss_mean_bracket(c) + l_over_p * (rho - 1.0) - l_over_p * std::log(rho)) +
             log1mc / 2.0;
    out.sigma2 = -2.0 * log1mc - 2.0 * c;
    out.hypothesis = Hypothesis::H1;
    return out;
}

double q_function(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double threshold(double p_fa) {
    if (!(p_fa > 0.0) || !(p_fa < 1.0))
        throw std::invalid_argument("threshold: p_fa must lie in (0,1), got " +
                                    std::to_string(p_fa));
    double lo = -40.0, hi = 40.0;
    // q_function decreases in x; bisect until the bracket is tight, then
    // polish with Newton steps (derivative is the negative normal density).
    for (int i = 0; i < 80 && hi - lo > 1e-8; ++i) {
        const double mid = (lo + hi) / 2.0;
        if (q_function(mid) > p_fa)
            lo = mid;
        else
            hi = mid;
    }
    double x = (lo + hi) / 2.0;
    for (int i = 0; i < 4; ++i) {
        const double pdf =
            std::exp(-x * x / 2.0) / std::sqrt(2.0 * std::numbers::pi);
        if (pdf <= 0.0) break;
        x += (q_function(x) - p_fa) / pdf;
    }
    return x;
}

DetectionOutcome detect(const EigenSpectrum& eigs, double p_fa, int P, double c) {
    if (P != eigs.source_dim)
        throw std::invalid_argument("detect: P = " + std::to_string(P) +
                                    " does not match the spectrum dimension " +
                                    std::to_string(eigs.source_dim));
    const GlrtAsymptotics h0 = h0_asymptotics(P, c);
    DetectionOutcome out;
    out.p_fa_target = p_fa;
    out.gamma = threshold(p_fa);
    out.D = glrt_statistic(eigs);
    out.G_prime = (out.D - h0.mu) / std::sqrt(h0.sigma2) - out.gamma;
    out.decision = out.G_prime > 0.0 ? Decision::SignalPresent : Decision::NoiseOnly;
    return out;
}

double theoretical_miss_probability(int P, double c, int L, double sigma2_chan, double p_fa) {
    const GlrtAsymptotics h0 = h0_asymptotics(P, c);
    const GlrtAsymptotics h1 = h1_asymptotics(P, c, L, sigma2_chan);
    const double gamma = threshold(p_fa);
    return q_function((h1.mu - h0.mu) / std::sqrt(h0.sigma2) - gamma);
}

}  // namespace rmtd
