#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <string>

#include "rmtd/rng.hpp"

namespace rmtd {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;

enum class SignalLaw { Binary, Gaussian };
enum class Hypothesis { H0, H1 };

std::string to_string(SignalLaw law);
std::string to_string(Hypothesis hyp);
SignalLaw signal_law_from_string(const std::string& s);
Hypothesis hypothesis_from_string(const std::string& s);

// Full description of one generated scenario: array size P, sample count N,
// channel tap count L, per-tap channel power sigma2, transmit signal law,
// hypothesis, and the seed all randomness derives from.
struct Scenario {
    int P = 0;
    int N = 0;
    int L = 0;
    double sigma2 = 0.0;
    SignalLaw signal_law = SignalLaw::Binary;
    Hypothesis hypothesis = Hypothesis::H0;
    std::uint64_t seed = 0;

    // Aspect ratio; always derived so P, N and c cannot drift apart.
    double c() const { return static_cast<double>(P) / static_cast<double>(N); }

    // Throws std::invalid_argument on P < 1, N < 1, L outside [0, N],
    // or sigma2 < 0.
    void validate() const;
};

// SNR convention used throughout: SNR_dB = 10*log10(L * sigma2), total
// received signal power per sample per antenna over unit noise power.
double snr_db_from_sigma2(int L, double sigma2);
double sigma2_from_snr_db(int L, double snr_db);

// Transmit signal samples. The consumer decides the (N, L) split; a sequence
// of length N + L - 1 covers time indices n = -(L-1) .. N-1 so that lagged
// copies draw on real pre-roll samples instead of wrapping.
struct SignalSequence {
    SignalLaw law = SignalLaw::Binary;
    RealVector values;
};

// i.i.d. signal samples of the requested law. Binary: equiprobable +/-1.
// Gaussian: standard normal. length >= 1 or std::invalid_argument.
SignalSequence sample_signal(int length, SignalLaw law, RngStream& rng);

// L x N matrix with row l, column n equal to s(n - l), where s(k) is
// values[k + L - 1]; rows are linearly delayed copies of the signal.
// Requires s.values.size() >= N + L - 1.
ComplexMatrix lagged_signal_matrix(const SignalSequence& s, int N, int L);

// P x L channel matrix, i.i.d. CN(0, sigma2) entries.
ComplexMatrix sample_channel(int P, int L, double sigma2, RngStream& rng);

// P x N noise matrix, i.i.d. CN(0, 1) entries.
ComplexMatrix sample_noise(int P, int N, RngStream& rng);

// Received matrix: pure noise under H0, H*S_L + W under H1. All components
// come from fixed sub-streams of `rng`, so H0 output and the no-signal H1
// degenerate cases (L = 0) coincide bit for bit at equal seeds.
ComplexMatrix generate_received(const Scenario& scenario, const RngStream& rng);

// Convenience overload seeding from scenario.seed.
ComplexMatrix generate_received(const Scenario& scenario);

}  // namespace rmtd
