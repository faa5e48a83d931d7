#pragma once

#include <Eigen/Dense>

#include "rmtd/models.hpp"
#include "rmtd/rng.hpp"

namespace rmtd {

// Diagonal covariance with L repeated spike entries followed by ones:
// diag(spike_value x L, 1 x (dim - L)).
struct SpikedCovarianceSpec {
    int dim = 0;
    int L = 0;
    double spike_value = 1.0;
    static constexpr double bulk_value = 1.0;

    void validate() const;  // throws std::invalid_argument
    RealVector diagonal() const;
};

// Real eigenvalues of a Hermitian matrix, sorted descending.
struct EigenSpectrum {
    RealVector values;
    int source_dim = 0;
};

namespace detail {
ComplexMatrix scm_impl(const ComplexMatrix& X);
double log_det_psd_impl(const ComplexMatrix& M);
EigenSpectrum hermitian_eigenvalues_impl(const ComplexMatrix& M);
}  // namespace detail

// Sample covariance matrix X*X^H/N for a P x N data matrix; explicitly
// symmetrized so the result is Hermitian to the last bit.
template <typename Derived>
ComplexMatrix scm(const Eigen::MatrixBase<Derived>& X) {
    return detail::scm_impl(X.derived());
}

// Surrogate covariance (H horizontally embedded, cross terms folded into the
// first L noise columns): (Hhat + What)(Hhat + What)^H / N where
// Hhat = [sqrt(N)*H | 0] and What = [Q^H | last N-L columns of W].
// H is P x L, Q is L x P, W is P x N.
ComplexMatrix build_surrogate(const ComplexMatrix& H, const ComplexMatrix& Q,
                              const ComplexMatrix& W);

// Spiked central Wishart Z*Sigma_N*Z^H/N with Sigma_N spike value N*sigma2+1
// on the first L diagonal entries; Z is P x N with i.i.d. CN(0,1) entries.
ComplexMatrix build_spiked_wishart(int P, int N, int L, double sigma2, RngStream& rng);

// Population-side spiked model Sigma_P^{1/2} Z Z^H Sigma_P^{1/2} / N with
// Sigma_P spike value P*sigma2+1 on the first L diagonal entries.
ComplexMatrix build_population_spiked(int P, int N, int L, double sigma2, RngStream& rng);

// All real eigenvalues, sorted descending. Throws std::invalid_argument if M
// is not square or departs from Hermitian symmetry beyond 1e-10 relative;
// throws std::runtime_error if the solver fails to converge or the computed
// spectrum does not reproduce the trace to 1e-8 relative.
template <typename Derived>
EigenSpectrum hermitian_eigenvalues(const Eigen::MatrixBase<Derived>& M) {
    return detail::hermitian_eigenvalues_impl(M.derived());
}

// log(det M) for Hermitian positive definite M via Cholesky factorization;
// the fast path for the GLRT statistic. Throws SingularMatrixError if the
// factorization fails (matrix singular or indefinite).
template <typename Derived>
double log_det_psd(const Eigen::MatrixBase<Derived>& M) {
    return detail::log_det_psd_impl(M.derived());
}

}  // namespace rmtd
