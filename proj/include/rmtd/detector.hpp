#pragma once

#include "rmtd/matrices.hpp"
#include "rmtd/models.hpp"

namespace rmtd {

// Asymptotic normal parameters of the GLRT statistic D under one hypothesis.
// Both hypotheses share the same variance -2*log(1-c) - 2c.
struct GlrtAsymptotics {
    double mu = 0.0;
    double sigma2 = 0.0;
    Hypothesis hypothesis = Hypothesis::H0;
};

// The H1 closed form carries a +log(1-c)/2 trailing term where the H0 form
// has -log(1-c)/2; the resulting |log(1-c)| gap between the two mean formulas
// at zero signal is surfaced here and flagged in experiment reports.
double half_log_offset(double c);

enum class Decision { SignalPresent, NoiseOnly };

std::string to_string(Decision d);

struct DetectionOutcome {
    double D = 0.0;        // raw statistic
    double G_prime = 0.0;  // standardized, threshold-shifted statistic
    double gamma = 0.0;    // threshold Q^{-1}(p_fa)
    Decision decision = Decision::NoiseOnly;
    double p_fa_target = 0.0;
};

// D = sum_i (lambda_i - log(lambda_i) - 1) over the spectrum of the tested
// covariance matrix; nonnegative, zero only at a unit spectrum. Any
// eigenvalue <= 0 throws SingularMatrixError.
double glrt_statistic(const EigenSpectrum& eigs);

namespace detail {
double glrt_statistic_from_matrix_impl(const ComplexMatrix& R);
}

// Same value as glrt_statistic(hermitian_eigenvalues(R)) computed as
// trace(R) - log_det_psd(R) - P, without an eigendecomposition.
template <typename Derived>
double glrt_statistic_from_matrix(const Eigen::MatrixBase<Derived>& R) {
    return detail::glrt_statistic_from_matrix_impl(R.derived());
}

// H0 closed form: mu = P*(1 - ((c-1)/c)*log(1-c)) - log(1-c)/2,
// sigma2 = -2*log(1-c) - 2c. Requires 0 < c < 1 (UnsupportedRegimeError).
GlrtAsymptotics h0_asymptotics(int P, double c);

// H1 closed form, implemented verbatim including its +log(1-c)/2 trailing
// term (see half_log_offset): mu = P*(1 + (L/P)*(P*sigma2+1) - L/P
// - (L/P)*log(P*sigma2+1) - (1-1/c)*log(1-c)) + log(1-c)/2; same variance
// as H0. Requires 0 < c < 1 and L >= 0.
GlrtAsymptotics h1_asymptotics(int P, double c, int L, double sigma2_chan);

// Upper-tail standard normal probability.
double q_function(double x);

// gamma with q_function(gamma) = p_fa to 1e-9, for p_fa in (0,1).
double threshold(double p_fa);

// Full detection chain: D from the spectrum, gamma = threshold(p_fa),
// G' = (D - mu_H0)/sigma - gamma, SignalPresent iff G' > 0. Standardization
// always uses the H0 parameters (sigma2 is unknown at decision time).
DetectionOutcome detect(const EigenSpectrum& eigs, double p_fa, int P, double c);

// P_la = Q((mu_H1 - mu_H0)/sigma - gamma): the asymptotic probability that a
// present signal is missed at the p_fa-calibrated threshold.
double theoretical_miss_probability(int P, double c, int L, double sigma2_chan,
                                    double p_fa);

}  // namespace rmtd
