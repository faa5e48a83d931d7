#include "rmtd/models.hpp"

#include <cmath>
#include <stdexcept>

namespace rmtd {

std::string to_string(SignalLaw law) {
    return law == SignalLaw::Binary ? "Binary" : "Gaussian";
}

std::string to_string(Hypothesis hyp) { return hyp == Hypothesis::H0 ? "H0" : "H1"; }

SignalLaw signal_law_from_string(const std::string& s) {
    if (s == "Binary" || s == "binary") return SignalLaw::Binary;
    if (s == "Gaussian" || s == "gaussian") return SignalLaw::Gaussian;
    throw std::invalid_argument("unknown signal law: '" + s + "' (expected Binary or Gaussian)");
}

Hypothesis hypothesis_from_string(const std::string& s) {
    if (s == "H0" || s == "h0") return Hypothesis::H0;
    if (s == "H1" || s == "h1") return Hypothesis::H1;
    throw std::invalid_argument("unknown hypothesis: '" + s + "' (expected H0 or H1)");
}

void Scenario::validate() const {
    if (P < 1) throw std::invalid_argument("Scenario: P must be >= 1, got " + std::to_string(P));
    if (N < 1) throw std::invalid_argument("Scenario: N must be >= 1, got " + std::to_string(N));
    if (L < 0 || L > N)
        throw std::invalid_argument("Scenario: L must be in [0, N], got L=" + std::to_string(L) +
                                    " with N=" + std::to_string(N));
    if (!(sigma2 >= 0.0))
        throw std::invalid_argument("Scenario: sigma2 must be >= 0, got " + std::to_string(sigma2));
}

double snr_db_from_sigma2(int L, double sigma2) {
    if (L < 1) throw std::invalid_argument("snr_db_from_sigma2: L must be >= 1");
    if (!(sigma2 > 0.0)) throw std::invalid_argument("snr_db_from_sigma2: sigma2 must be > 0");
    return 10.0 * std::log10(static_cast<double>(L) * sigma2);
}

double sigma2_from_snr_db(int L, double snr_db) {
    if (L < 1) throw std::invalid_argument("sigma2_from_snr_db: L must be >= 1");
    return std::pow(10.0, snr_db / 10.0) / static_cast<double>(L);
}

SignalSequence sample_signal(int length, SignalLaw law, RngStream& rng) {
    if (length < 1)
        throw std::invalid_argument("sample_signal: length must be >= 1, got " +
                                    std::to_string(length));
    SignalSequence s;
    s.law = law;
    s.values.resize(length);
    if (law == SignalLaw::Binary) {
        for (int i = 0; i < length; ++i) s.values[i] = rng.rademacher();
    } else {
        for (int i = 0; i < length; ++i) s.values[i] = rng.gaussian();
    }
    return s;
}

ComplexMatrix lagged_signal_matrix(const SignalSequence& s, int N, int L) {
    if (N < 1 || L < 1)
        throw std::invalid_argument("lagged_signal_matrix: need N >= 1 and L >= 1");
    if (s.values.size() < N + L - 1)
        throw std::invalid_argument(
            "lagged_signal_matrix: sequence holds " + std::to_string(s.values.size()) +
            " samples, need at least N + L - 1 = " + std::to_string(N + L - 1));
    ComplexMatrix S(L, N);
    for (int l = 0; l < L; ++l)
        for (int n = 0; n < N; ++n) S(l, n) = Complex(s.values[n - l + L - 1], 0.0);
    return S;
}

ComplexMatrix sample_channel(int P, int L, double sigma2, RngStream& rng) {
    if (P < 1 || L < 1) throw std::invalid_argument("sample_channel: need P >= 1 and L >= 1");
    if (!(sigma2 >= 0.0))
        throw std::invalid_argument("sample_channel: sigma2 must be >= 0, got " +
                                    std::to_string(sigma2));
    ComplexMatrix H(P, L);
    for (int i = 0; i < P; ++i)
        for (int l = 0; l < L; ++l) H(i, l) = rng.complex_gaussian(sigma2);
    return H;
}

ComplexMatrix sample_noise(int P, int N, RngStream& rng) {
    if (P < 1 || N < 1) throw std::invalid_argument("sample_noise: need P >= 1 and N >= 1");
    ComplexMatrix W(P, N);
    for (int i = 0; i < P; ++i)
        for (int j = 0; j < N; ++j) W(i, j) = rng.complex_gaussian(1.0);
    return W;
}

ComplexMatrix generate_received(const Scenario& scenario, const RngStream& rng) {
    scenario.validate();
    RngStream noise_rng = rng.child_tag(StreamTag::Noise);
    ComplexMatrix X = sample_noise(scenario.P, scenario.N, noise_rng);
    if (scenario.hypothesis == Hypothesis::H1 && scenario.L > 0) {
        RngStream signal_rng = rng.child_tag(StreamTag::Signal);
        RngStream channel_rng = rng.child_tag(StreamTag::Channel);
        SignalSequence s =
            sample_signal(scenario.N + scenario.L - 1, scenario.signal_law, signal_rng);
        ComplexMatrix S = lagged_signal_matrix(s, scenario.N, scenario.L);
        ComplexMatrix H = sample_channel(scenario.P, scenario.L, scenario.sigma2, channel_rng);
        X.noalias() += H * S;
    }
    return X;
}

ComplexMatrix generate_received(const Scenario& scenario) {
    return generate_received(scenario, RngStream(scenario.seed));
}

}  // namespace rmtd
