#include "rmtd/matrices.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "rmtd/errors.hpp"

namespace rmtd {

void SpikedCovarianceSpec::validate() const {
    if (dim < 1)
        throw std::invalid_argument("SpikedCovarianceSpec: dim must be >= 1, got " +
                                    std::to_string(dim));
    if (L < 0 || L > dim)
        throw std::invalid_argument("SpikedCovarianceSpec: L must be in [0, dim], got " +
                                    std::to_string(L));
    if (!(spike_value >= 1.0))
        throw std::invalid_argument("SpikedCovarianceSpec: spike_value must be >= 1, got " +
                                    std::to_string(spike_value));
}

RealVector SpikedCovarianceSpec::diagonal() const {
    validate();
    RealVector d = RealVector::Constant(dim, bulk_value);
    d.head(L).setConstant(spike_value);
    return d;
}

namespace detail {

ComplexMatrix scm_impl(const ComplexMatrix& X) {
    if (X.rows() < 1 || X.cols() < 1)
        throw std::invalid_argument("scm: data matrix must be nonempty");
    const auto P = X.rows();
    const double inv_n = 1.0 / static_cast<double>(X.cols());
    ComplexMatrix R = ComplexMatrix::Zero(P, P);
    R.selfadjointView<Eigen::Lower>().rankUpdate(X, inv_n);
    // Mirror the computed lower triangle; the result is Hermitian exactly.
    R = ComplexMatrix(R.selfadjointView<Eigen::Lower>());
    return R;
}

EigenSpectrum hermitian_eigenvalues_impl(const ComplexMatrix& M) {
    if (M.rows() != M.cols() || M.rows() < 1)
        throw std::invalid_argument("hermitian_eigenvalues: matrix must be square and nonempty");
    const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
    const double asym = (M - M.adjoint()).cwiseAbs().maxCoeff();
    if (asym > 1e-10 * scale)
        throw std::invalid_argument(
            "hermitian_eigenvalues: matrix departs from Hermitian symmetry by " +
            std::to_string(asym) + " (tolerance " + std::to_string(1e-10 * scale) + ")");
    const ComplexMatrix A = (M + M.adjoint()) / 2.0;
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(A, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("hermitian_eigenvalues: eigensolver failed to converge at dim " +
                                 std::to_string(M.rows()));
    EigenSpectrum spectrum;
    spectrum.values = solver.eigenvalues().reverse();
    spectrum.source_dim = static_cast<int>(M.rows());
    const double tr = A.trace().real();
    const double sum = spectrum.values.sum();
    if (std::abs(sum - tr) > 1e-8 * std::max(1.0, std::abs(tr)))
        throw std::runtime_error("hermitian_eigenvalues: spectrum sum " + std::to_string(sum) +
                                 " fails trace cross-check against " + std::to_string(tr));
    return spectrum;
}

double log_det_psd_impl(const ComplexMatrix& M) {
    if (M.rows() != M.cols() || M.rows() < 1)
        throw std::invalid_argument("log_det_psd: matrix must be square and nonempty");
    Eigen::LLT<ComplexMatrix> llt(M);
    if (llt.info() != Eigen::Success)
        throw SingularMatrixError(
            "log_det_psd: Cholesky factorization failed; matrix is singular or indefinite "
            "(use N >= P or a nonsingular covariance)");
    const double diag_max = M.diagonal().real().maxCoeff();
    if (!(diag_max > 0.0))
        throw SingularMatrixError("log_det_psd: matrix has no positive diagonal entry");
    // Exact rank deficiency leaves tiny positive pivots instead of an LLT
    // failure; the squared pivot is the remaining conditional variance, so
    // measure it against the diagonal scale the way a pivoted factorization
    // would stop.
    const double variance_floor = diag_max * static_cast<double>(M.rows()) *
                                  std::numeric_limits<double>::epsilon();
    double log_det = 0.0;
    const auto& factor = llt.matrixLLT();
    for (Eigen::Index i = 0; i < factor.rows(); ++i) {
        const double pivot = factor(i, i).real();
        if (!(pivot > 0.0) || pivot * pivot <= variance_floor)
            throw SingularMatrixError(
                "log_det_psd: matrix is numerically singular (pivot " + std::to_string(pivot) +
                " at index " + std::to_string(i) + ")");
        log_det += std::log(pivot);
    }
    return 2.0 * log_det;
}

}  // namespace detail

ComplexMatrix build_surrogate(const ComplexMatrix& H, const ComplexMatrix& Q,
                              const ComplexMatrix& W) {
    const auto P = H.rows();
    const auto L = H.cols();
    const auto N = W.cols();
    if (Q.rows() != L || Q.cols() != P || W.rows() != P)
        throw std::invalid_argument(
            "build_surrogate: inconsistent shapes (H is P x L, Q must be L x P, W must be P x N)");
    if (L > N) throw std::invalid_argument("build_surrogate: L must not exceed N");
    const double root_n = std::sqrt(static_cast<double>(N));
    ComplexMatrix Xhat(P, N);
    Xhat.leftCols(L) = root_n * H + Q.adjoint();
    Xhat.rightCols(N - L) = W.rightCols(N - L);
    return detail::scm_impl(Xhat);
}

ComplexMatrix build_spiked_wishart(int P, int N, int L, double sigma2, RngStream& rng) {
    if (P < 1 || N < 1) throw std::invalid_argument("build_spiked_wishart: need P, N >= 1");
    if (L < 0 || L > N)
        throw std::invalid_argument("build_spiked_wishart: L must be in [0, N]");
    if (!(sigma2 >= 0.0))
        throw std::invalid_argument("build_spiked_wishart: sigma2 must be >= 0");
    SpikedCovarianceSpec spec{N, L, static_cast<double>(N) * sigma2 + 1.0};
    spec.validate();
    ComplexMatrix Z = sample_noise(P, N, rng);
    Z.leftCols(L) *= std::sqrt(spec.spike_value);
    return detail::scm_impl(Z);
}

ComplexMatrix build_population_spiked(int P, int N, int L, double sigma2, RngStream& rng) {
    if (P < 1 || N < 1) throw std::invalid_argument("build_population_spiked: need P, N >= 1");
    if (L < 0 || L > P)
        throw std::invalid_argument("build_population_spiked: L must be in [0, P]");
    if (!(sigma2 >= 0.0))
        throw std::invalid_argument("build_population_spiked: sigma2 must be >= 0");
    SpikedCovarianceSpec spec{P, L, static_cast<double>(P) * sigma2 + 1.0};
    spec.validate();
    ComplexMatrix Z = sample_noise(P, N, rng);
    Z.topRows(L) *= std::sqrt(spec.spike_value);
    return detail::scm_impl(Z);
}

}  // namespace rmtd
