#include "rmtd/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "rmtd/errors.hpp"
#include "rmtd/matrices.hpp"
#include "rmtd/rmt.hpp"

namespace rmtd {

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::EsdOverlay: return "EsdOverlay";
        case ExperimentKind::EigComparison: return "EigComparison";
        case ExperimentKind::GlrtDistribution: return "GlrtDistribution";
        case ExperimentKind::MissProbSweep: return "MissProbSweep";
        case ExperimentKind::Roc: return "Roc";
    }
    throw std::logic_error("to_string: bad ExperimentKind");
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
    if (s == "EsdOverlay") return ExperimentKind::EsdOverlay;
    if (s == "EigComparison") return ExperimentKind::EigComparison;
    if (s == "GlrtDistribution") return ExperimentKind::GlrtDistribution;
    if (s == "MissProbSweep") return ExperimentKind::MissProbSweep;
    if (s == "Roc") return ExperimentKind::Roc;
    throw std::invalid_argument("unknown experiment kind: '" + s + "'");
}

namespace {

const std::set<std::string> kAxisNames = {"N", "SNR_dB", "p_fa"};

// Deterministic sum independent of accumulation-friendly compiler choices:
// recursive pairwise halving in fixed index order.
double pairwise_sum(const double* data, std::size_t n) {
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = data[0];
        for (std::size_t i = 1; i < n; ++i) s += data[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

double pairwise_mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return pairwise_sum(v.data(), v.size()) / static_cast<double>(v.size());
}

double sample_variance(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - mean) * (v[i] - mean);
    return pairwise_sum(sq.data(), sq.size()) / static_cast<double>(v.size() - 1);
}

// Runs body(0..n-1) on the requested number of threads; results must land in
// preallocated per-index slots. The first exception thrown by any worker is
// rethrown on the calling thread.
void parallel_for(long n, int threads, const std::function<void(long)>& body) {
    if (n <= 0) return;
    const int workers = static_cast<int>(std::min<long>(threads, n));
    if (workers <= 1) {
        for (long i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<long> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto run = [&]() {
        for (;;) {
            const long i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

double normal_pdf(double x, double mu, double sigma) {
    const double z = (x - mu) / sigma;
    return std::exp(-z * z / 2.0) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

struct TableBuilder {
    std::vector<std::string> names;
    std::vector<std::vector<double>> cols;

    explicit TableBuilder(std::vector<std::string> column_names) : names(std::move(column_names)) {
        cols.resize(names.size());
    }

    void push_row(const std::vector<double>& row) {
        for (std::size_t i = 0; i < cols.size(); ++i) cols[i].push_back(row[i]);
    }

    void finish(ExperimentResult& result) const {
        result.column_names = names;
        result.columns.clear();
        for (const auto& col : cols) {
            RealVector v(static_cast<Eigen::Index>(col.size()));
            for (std::size_t i = 0; i < col.size(); ++i)
                v[static_cast<Eigen::Index>(i)] = col[i];
            result.columns.push_back(std::move(v));
        }
    }
};

nlohmann::json base_metadata(const TrialPlan& plan) {
    nlohmann::json meta;
    meta["plan"] = plan.to_json();
    meta["code_version"] = kCodeVersion;
    return meta;
}

nlohmann::json sweep_values_json(const TrialPlan& plan, int k) {
    nlohmann::json j = nlohmann::json::object();
    const auto values = plan.sweep_values_at(k);
    for (std::size_t a = 0; a < plan.sweep.size(); ++a) j[plan.sweep[a].name] = values[a];
    return j;
}

}  // namespace

void TrialPlan::validate() const {
    base_scenario.validate();
    if (n_trials < 1)
        throw std::invalid_argument("TrialPlan: n_trials must be >= 1, got " +
                                    std::to_string(n_trials));
    std::set<std::string> seen;
    for (const auto& axis : sweep) {
        if (!kAxisNames.count(axis.name))
            throw std::invalid_argument("TrialPlan: unsupported sweep axis '" + axis.name +
                                        "' (supported: N, SNR_dB, p_fa)");
        if (!seen.insert(axis.name).second)
            throw std::invalid_argument("TrialPlan: duplicate sweep axis '" + axis.name + "'");
        if (axis.values.empty())
            throw std::invalid_argument("TrialPlan: sweep axis '" + axis.name +
                                        "' has no values");
        if (axis.name == "N") {
            for (double v : axis.values)
                if (!(v >= 1.0) || v != std::floor(v))
                    throw std::invalid_argument(
                        "TrialPlan: N sweep values must be positive integers");
        } else if (axis.name == "SNR_dB") {
            if (base_scenario.L < 1)
                throw std::invalid_argument(
                    "TrialPlan: SNR_dB sweep requires L >= 1 on the base scenario");
        } else {
            for (double v : axis.values)
                if (!(v > 0.0) || !(v < 1.0))
                    throw std::invalid_argument("TrialPlan: p_fa sweep values must lie in (0,1)");
        }
    }
}

int TrialPlan::sweep_point_count() const {
    int count = 1;
    for (const auto& axis : sweep) count *= static_cast<int>(axis.values.size());
    return count;
}

std::vector<double> TrialPlan::sweep_values_at(int k) const {
    if (k < 0 || k >= sweep_point_count())
        throw std::invalid_argument("TrialPlan: sweep index out of range");
    std::vector<double> values(sweep.size());
    int rem = k;
    for (std::size_t a = sweep.size(); a-- > 0;) {
        const int size = static_cast<int>(sweep[a].values.size());
        values[a] = sweep[a].values[static_cast<std::size_t>(rem % size)];
        rem /= size;
    }
    return values;
}

Scenario TrialPlan::scenario_at(int k) const {
    Scenario scenario = base_scenario;
    const auto values = sweep_values_at(k);
    for (std::size_t a = 0; a < sweep.size(); ++a) {
        if (sweep[a].name == "N")
            scenario.N = static_cast<int>(values[a]);
        else if (sweep[a].name == "SNR_dB")
            scenario.sigma2 = sigma2_from_snr_db(scenario.L, values[a]);
    }
    scenario.validate();
    return scenario;
}

double TrialPlan::p_fa_at(int k, double fallback) const {
    const auto values = sweep_values_at(k);
    for (std::size_t a = 0; a < sweep.size(); ++a)
        if (sweep[a].name == "p_fa") return values[a];
    return fallback;
}

nlohmann::json TrialPlan::to_json() const {
    nlohmann::json j;
    j["base_scenario"] = {
        {"P", base_scenario.P},
        {"N", base_scenario.N},
        {"L", base_scenario.L},
        {"sigma2", base_scenario.sigma2},
        {"signal_law", rmtd::to_string(base_scenario.signal_law)},
        {"hypothesis", rmtd::to_string(base_scenario.hypothesis)},
        {"seed", base_scenario.seed},
    };
    j["n_trials"] = n_trials;
    j["sweep"] = nlohmann::json::array();
    for (const auto& axis : sweep)
        j["sweep"].push_back({{"name", axis.name}, {"values", axis.values}});
    j["master_seed"] = master_seed;
    return j;
}

TrialPlan TrialPlan::from_json(const nlohmann::json& j) {
    TrialPlan plan;
    const auto& s = j.at("base_scenario");
    plan.base_scenario.P = s.at("P").get<int>();
    plan.base_scenario.N = s.at("N").get<int>();
    plan.base_scenario.L = s.at("L").get<int>();
    plan.base_scenario.sigma2 = s.at("sigma2").get<double>();
    plan.base_scenario.signal_law = signal_law_from_string(s.at("signal_law").get<std::string>());
    plan.base_scenario.hypothesis = hypothesis_from_string(s.at("hypothesis").get<std::string>());
    plan.base_scenario.seed = s.at("seed").get<std::uint64_t>();
    plan.n_trials = j.at("n_trials").get<int>();
    if (j.contains("sweep")) {
        for (const auto& axis : j.at("sweep")) {
            SweepAxis a;
            a.name = axis.at("name").get<std::string>();
            a.values = axis.at("values").get<std::vector<double>>();
            plan.sweep.push_back(std::move(a));
        }
    }
    plan.master_seed = j.at("master_seed").get<std::uint64_t>();
    plan.validate();
    return plan;
}

const RealVector& ExperimentResult::column(const std::string& name) const {
    for (std::size_t i = 0; i < column_names.size(); ++i)
        if (column_names[i] == name) return columns[i];
    throw std::invalid_argument("ExperimentResult: no column named '" + name + "'");
}

int effective_thread_count(int requested) {
    if (requested < 0)
        throw std::invalid_argument("thread count must be >= 0 (0 = auto)");
    if (const char* env = std::getenv("RMT_DETECT_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end && *end == '\0' && v >= 1) return static_cast<int>(v);
    }
    if (requested >= 1) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw >= 1 ? static_cast<int>(hw) : 1;
}

ExperimentResult run_esd_overlay(const TrialPlan& plan, int threads) {
    plan.validate();
    const int workers = effective_thread_count(threads);
    const int points = plan.sweep_point_count();
    const long n = plan.n_trials;

    ExperimentResult result;
    result.kind = ExperimentKind::EsdOverlay;
    result.metadata = base_metadata(plan);
    result.metadata["points"] = nlohmann::json::array();
    TableBuilder table({"sweep_index", "bin_center", "empirical_density", "mp_density"});

    for (int k = 0; k < points; ++k) {
        Scenario scenario = plan.scenario_at(k);
        const double c = scenario.c();
        std::vector<RealVector> spectra(static_cast<std::size_t>(n));
        parallel_for(n, workers, [&](long t) {
            Scenario trial = scenario;
            trial.seed = derive_seed(plan.master_seed, static_cast<std::uint64_t>(k),
                                     static_cast<std::uint64_t>(t));
            const ComplexMatrix R = scm(generate_received(trial));
            spectra[static_cast<std::size_t>(t)] = hermitian_eigenvalues(R).values;
        });

        // Pool in fixed trial order; drop the top L eigenvalues per trial for
        // the bulk view under H1 (outliers are reported separately).
        const int drop = scenario.hypothesis == Hypothesis::H1
                             ? std::min(scenario.L, scenario.P)
                             : 0;
        EigenSpectrum pooled_all, pooled_bulk;
        pooled_all.source_dim = scenario.P;
        pooled_bulk.source_dim = scenario.P;
        pooled_all.values.resize(n * scenario.P);
        pooled_bulk.values.resize(n * (scenario.P - drop));
        for (long t = 0; t < n; ++t) {
            pooled_all.values.segment(t * scenario.P, scenario.P) =
                spectra[static_cast<std::size_t>(t)];
            pooled_bulk.values.segment(t * (scenario.P - drop), scenario.P - drop) =
                spectra[static_cast<std::size_t>(t)].tail(scenario.P - drop);
        }

        const EsdHistogram hist = esd_histogram(pooled_all);
        const RealVector centers = hist.bin_centers();
        const RealVector density = hist.density();
        for (Eigen::Index i = 0; i < centers.size(); ++i)
            table.push_row({static_cast<double>(k), centers[i], density[i],
                            mp_density(centers[i], c)});

        const double bulk_ks = ks_distance(pooled_bulk, mp_support(c));
        nlohmann::json point;
        point["sweep_index"] = k;
        point["sweep_values"] = sweep_values_json(plan, k);
        point["c"] = c;
        point["bulk_ks"] = bulk_ks;
        point["pooled_eigenvalue_count"] = pooled_all.values.size();
        if (scenario.hypothesis == Hypothesis::H1) {
            const SpikePrediction spikes = predicted_spikes(scenario);
            point["phase_transition_edge"] = spikes.phase_transition_edge;
            auto taps = nlohmann::json::array();
            for (int l = 0; l < scenario.L; ++l) {
                nlohmann::json tap;
                tap["tap"] = l;
                tap["emerged"] = static_cast<bool>(spikes.emerged[static_cast<std::size_t>(l)]);
                if (spikes.emerged[static_cast<std::size_t>(l)]) tap["limit"] = spikes.limits[l];
                taps.push_back(std::move(tap));
            }
            point["predicted_spikes"] = std::move(taps);
        }
        result.metadata["points"].push_back(std::move(point));
    }
    table.finish(result);
    return result;
}

ExperimentResult run_eig_comparison(const TrialPlan& plan, int threads) {
    plan.validate();
    if (plan.base_scenario.hypothesis != Hypothesis::H1)
        throw std::invalid_argument("run_eig_comparison: requires an H1 plan");
    const int workers = effective_thread_count(threads);
    const int points = plan.sweep_point_count();
    const long n = plan.n_trials;

    ExperimentResult result;
    result.kind = ExperimentKind::EigComparison;
    result.metadata = base_metadata(plan);
    result.metadata["points"] = nlohmann::json::array();

    const int top = std::min(plan.base_scenario.L + 5, plan.base_scenario.P);
    std::vector<std::string> names = {"sweep_index", "trial"};
    for (int i = 1; i <= top; ++i) names.push_back("rx_top_" + std::to_string(i));
    for (int i = 1; i <= top; ++i) names.push_back("rhat_top_" + std::to_string(i));
    for (int i = 1; i <= top; ++i) names.push_back("rz_top_" + std::to_string(i));
    names.insert(names.end(), {"gap_rx_rhat", "gap_rx_rz", "gap_rhat_rz"});
    TableBuilder table(names);

    auto rel_gap = [](double x, double y) { return std::abs(x - y) / ((x + y) / 2.0); };

    for (int k = 0; k < points; ++k) {
        const Scenario scenario = plan.scenario_at(k);
        const int P = scenario.P;
        const int N = scenario.N;
        const int L = scenario.L;
        std::vector<std::array<RealVector, 3>> tops(static_cast<std::size_t>(n));
        parallel_for(n, workers, [&](long t) {
            const std::uint64_t seed = derive_seed(plan.master_seed,
                                                   static_cast<std::uint64_t>(k),
                                                   static_cast<std::uint64_t>(t));
            const RngStream base(seed);
            // Draw the model components from the same sub-streams
            // generate_received uses, so R_x here matches its output exactly
            // while H, S and W stay available for the surrogate.
            RngStream noise_rng = base.child_tag(StreamTag::Noise);
            RngStream signal_rng = base.child_tag(StreamTag::Signal);
            RngStream channel_rng = base.child_tag(StreamTag::Channel);
            RngStream z_rng = base.child_tag(StreamTag::WishartZ);
            const ComplexMatrix W = sample_noise(P, N, noise_rng);
            ComplexMatrix X = W;
            ComplexMatrix H = ComplexMatrix::Zero(P, std::max(L, 1));
            ComplexMatrix S = ComplexMatrix::Zero(std::max(L, 1), N);
            if (L > 0) {
                const SignalSequence s =
                    sample_signal(N + L - 1, scenario.signal_law, signal_rng);
                S = lagged_signal_matrix(s, N, L);
                H = sample_channel(P, L, scenario.sigma2, channel_rng);
                X.noalias() += H * S;
            }
            const ComplexMatrix Q = S * W.adjoint() / std::sqrt(static_cast<double>(N));
            const ComplexMatrix Rx = scm(X);
            const ComplexMatrix Rhat = build_surrogate(H, Q, W);
            const ComplexMatrix Rz = build_spiked_wishart(P, N, L, scenario.sigma2, z_rng);
            auto& slot = tops[static_cast<std::size_t>(t)];
            slot[0] = hermitian_eigenvalues(Rx).values.head(top);
            slot[1] = hermitian_eigenvalues(Rhat).values.head(top);
            slot[2] = hermitian_eigenvalues(Rz).values.head(top);
        });

        std::vector<double> rx_max, rhat_max, rz_max;
        for (long t = 0; t < n; ++t) {
            const auto& slot = tops[static_cast<std::size_t>(t)];
            std::vector<double> row = {static_cast<double>(k), static_cast<double>(t)};
            for (int m = 0; m < 3; ++m)
                for (int i = 0; i < top; ++i) row.push_back(slot[static_cast<std::size_t>(m)][i]);
            row.push_back(rel_gap(slot[0][0], slot[1][0]));
            row.push_back(rel_gap(slot[0][0], slot[2][0]));
            row.push_back(rel_gap(slot[1][0], slot[2][0]));
            table.push_row(row);
            rx_max.push_back(slot[0][0]);
            rhat_max.push_back(slot[1][0]);
            rz_max.push_back(slot[2][0]);
        }

        const double mx = pairwise_mean(rx_max);
        const double mh = pairwise_mean(rhat_max);
        const double mz = pairwise_mean(rz_max);
        nlohmann::json point;
        point["sweep_index"] = k;
        point["sweep_values"] = sweep_values_json(plan, k);
        point["mean_largest"] = {{"rx", mx}, {"rhat", mh}, {"rz", mz}};
        point["mean_largest_gaps"] = {{"rx_rhat", rel_gap(mx, mh)},
                                      {"rx_rz", rel_gap(mx, mz)},
                                      {"rhat_rz", rel_gap(mh, mz)}};
        result.metadata["points"].push_back(std::move(point));
    }
    table.finish(result);
    return result;
}

ExperimentResult run_glrt_distribution(const TrialPlan& plan, int threads) {
    plan.validate();
    const int workers = effective_thread_count(threads);
    const int points = plan.sweep_point_count();
    const long n = plan.n_trials;

    ExperimentResult result;
    result.kind = ExperimentKind::GlrtDistribution;
    result.metadata = base_metadata(plan);
    result.metadata["points"] = nlohmann::json::array();
    TableBuilder table({"sweep_index", "bin_center", "h0_density", "h1_density",
                        "h0_theory_pdf", "h1_theory_pdf"});

    for (int k = 0; k < points; ++k) {
        const Scenario scenario = plan.scenario_at(k);
        std::vector<double> d0(static_cast<std::size_t>(n)), d1(static_cast<std::size_t>(n));
        parallel_for(n, workers, [&](long t) {
            Scenario trial = scenario;
            trial.seed = derive_seed(plan.master_seed, static_cast<std::uint64_t>(k),
                                     static_cast<std::uint64_t>(t));
            trial.hypothesis = Hypothesis::H0;
            d0[static_cast<std::size_t>(t)] =
                glrt_statistic_from_matrix(scm(generate_received(trial)));
            trial.hypothesis = Hypothesis::H1;
            d1[static_cast<std::size_t>(t)] =
                glrt_statistic_from_matrix(scm(generate_received(trial)));
        });

        const GlrtAsymptotics h0 = h0_asymptotics(scenario.P, scenario.c());
        const GlrtAsymptotics h1 =
            h1_asymptotics(scenario.P, scenario.c(), scenario.L, scenario.sigma2);
        const double sigma = std::sqrt(h0.sigma2);

        EigenSpectrum pooled;
        pooled.source_dim = scenario.P;
        pooled.values.resize(2 * n);
        for (long t = 0; t < n; ++t) {
            pooled.values[t] = d0[static_cast<std::size_t>(t)];
            pooled.values[n + t] = d1[static_cast<std::size_t>(t)];
        }
        const EsdHistogram grid = esd_histogram(pooled);
        const RealVector edges = grid.bin_edges;
        const int bins = static_cast<int>(grid.counts.size());
        std::vector<long> c0(static_cast<std::size_t>(bins), 0),
            c1(static_cast<std::size_t>(bins), 0);
        const double lo = edges[0];
        const double width = edges[1] - edges[0];
        auto tally = [&](const std::vector<double>& d, std::vector<long>& counts) {
            for (double v : d) {
                int bin = static_cast<int>((v - lo) / width);
                bin = std::clamp(bin, 0, bins - 1);
                ++counts[static_cast<std::size_t>(bin)];
            }
        };
        tally(d0, c0);
        tally(d1, c1);
        for (int i = 0; i < bins; ++i) {
            const double center = (edges[i] + edges[i + 1]) / 2.0;
            table.push_row({static_cast<double>(k), center,
                            static_cast<double>(c0[static_cast<std::size_t>(i)]) /
                                (static_cast<double>(n) * width),
                            static_cast<double>(c1[static_cast<std::size_t>(i)]) /
                                (static_cast<double>(n) * width),
                            normal_pdf(center, h0.mu, sigma),
                            normal_pdf(center, h1.mu, sigma)});
        }

        const double m0 = pairwise_mean(d0);
        const double m1 = pairwise_mean(d1);
        nlohmann::json point;
        point["sweep_index"] = k;
        point["sweep_values"] = sweep_values_json(plan, k);
        point["h0_sample_mean"] = m0;
        point["h0_sample_var"] = sample_variance(d0, m0);
        point["h1_sample_mean"] = m1;
        point["h1_sample_var"] = sample_variance(d1, m1);
        point["theory"] = {{"h0_mu", h0.mu}, {"h1_mu", h1.mu}, {"sigma2", h0.sigma2}};
        // The two mean formulas disagree by exactly log(1-c) at zero signal;
        // surfaced on every report per the documented discrepancy.
        point["half_log_offset"] = half_log_offset(scenario.c());
        point["half_log_offset_note"] =
            "H1 mean formula carries +log(1-c)/2 where H0 carries -log(1-c)/2";
        point["h0_samples"] = d0;
        point["h1_samples"] = d1;
        result.metadata["points"].push_back(std::move(point));
    }
    table.finish(result);
    return result;
}

ExperimentResult run_miss_prob_sweep(const TrialPlan& plan, int threads) {
    plan.validate();
    if (plan.base_scenario.hypothesis != Hypothesis::H1)
        throw std::invalid_argument(
            "run_miss_prob_sweep: miss probability is a signal-present quantity; use an H1 plan");
    if (plan.base_scenario.L < 1)
        throw std::invalid_argument("run_miss_prob_sweep: requires L >= 1");
    const int workers = effective_thread_count(threads);
    const int points = plan.sweep_point_count();
    const long n = plan.n_trials;

    ExperimentResult result;
    result.kind = ExperimentKind::MissProbSweep;
    result.metadata = base_metadata(plan);
    result.metadata["points"] = nlohmann::json::array();
    TableBuilder table(
        {"sweep_index", "N", "SNR_dB", "sigma2", "p_fa", "theory_miss", "empirical_miss"});

    for (int k = 0; k < points; ++k) {
        const Scenario scenario = plan.scenario_at(k);
        if (!(scenario.sigma2 > 0.0))
            throw std::invalid_argument("run_miss_prob_sweep: sigma2 must be > 0 at every point");
        const double p_fa = plan.p_fa_at(k, 0.05);
        const double c = scenario.c();
        const GlrtAsymptotics h0 = h0_asymptotics(scenario.P, c);
        const double thr = h0.mu + std::sqrt(h0.sigma2) * threshold(p_fa);

        std::vector<std::uint8_t> missed(static_cast<std::size_t>(n), 0);
        parallel_for(n, workers, [&](long t) {
            Scenario trial = scenario;
            trial.seed = derive_seed(plan.master_seed, static_cast<std::uint64_t>(k),
                                     static_cast<std::uint64_t>(t));
            const double d = glrt_statistic_from_matrix(scm(generate_received(trial)));
            missed[static_cast<std::size_t>(t)] = d > thr ? 0 : 1;
        });
        long miss_count = 0;
        for (long t = 0; t < n; ++t) miss_count += missed[static_cast<std::size_t>(t)];

        const double theory = theoretical_miss_probability(scenario.P, c, scenario.L,
                                                           scenario.sigma2, p_fa);
        const double empirical = static_cast<double>(miss_count) / static_cast<double>(n);
        table.push_row({static_cast<double>(k), static_cast<double>(scenario.N),
                        snr_db_from_sigma2(scenario.L, scenario.sigma2), scenario.sigma2, p_fa,
                        theory, empirical});

        nlohmann::json point;
        point["sweep_index"] = k;
        point["sweep_values"] = sweep_values_json(plan, k);
        point["theory_miss"] = theory;
        point["empirical_miss"] = empirical;
        point["threshold_on_D"] = thr;
        result.metadata["points"].push_back(std::move(point));
    }
    table.finish(result);

    // P_la = 0.5 crossings per swept N (or for the whole sweep when N is
    // fixed), from linear interpolation over the SNR grid.
    auto crossings = nlohmann::json::array();
    std::map<double, std::vector<long>> by_n;
    const RealVector& col_n = result.column("N");
    for (int k = 0; k < points; ++k) by_n[col_n[k]].push_back(k);
    for (const auto& [n_value, idx] : by_n) {
        std::vector<double> snr, theory, empirical;
        for (long r : idx) {
            snr.push_back(result.column("SNR_dB")[r]);
            theory.push_back(result.column("theory_miss")[r]);
            empirical.push_back(result.column("empirical_miss")[r]);
        }
        std::vector<std::size_t> order(snr.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return snr[a] < snr[b]; });
        auto pick = [&](const std::vector<double>& v) {
            std::vector<double> out(v.size());
            for (std::size_t i = 0; i < order.size(); ++i) out[i] = v[order[i]];
            return out;
        };
        const auto snr_sorted = pick(snr);
        nlohmann::json entry;
        entry["N"] = n_value;
        if (snr_sorted.size() >= 2) {
            if (auto x = crossing_at_half(snr_sorted, pick(theory))) entry["theory_crossing_db"] = *x;
            if (auto x = crossing_at_half(snr_sorted, pick(empirical)))
                entry["empirical_crossing_db"] = *x;
        }
        crossings.push_back(std::move(entry));
    }
    result.metadata["crossings"] = std::move(crossings);
    return result;
}

ExperimentResult run_roc(const TrialPlan& plan, int threads) {
    plan.validate();
    if (plan.base_scenario.hypothesis != Hypothesis::H1)
        throw std::invalid_argument("run_roc: requires an H1 plan (plus its matched H0 pool)");
    if (plan.base_scenario.L < 1) throw std::invalid_argument("run_roc: requires L >= 1");
    for (const auto& axis : plan.sweep)
        if (axis.name == "N")
            throw std::invalid_argument("run_roc: only SNR_dB and p_fa axes are supported");
    const int workers = effective_thread_count(threads);
    const long n = plan.n_trials;

    std::vector<double> snr_points;
    std::vector<double> p_grid;
    for (const auto& axis : plan.sweep) {
        if (axis.name == "SNR_dB") snr_points = axis.values;
        if (axis.name == "p_fa") p_grid = axis.values;
    }
    if (snr_points.empty())
        snr_points = {snr_db_from_sigma2(plan.base_scenario.L, plan.base_scenario.sigma2)};
    if (p_grid.empty()) {
        const double lo = std::log10(1e-3), hi = std::log10(0.5);
        for (int i = 0; i < 50; ++i)
            p_grid.push_back(std::pow(10.0, lo + (hi - lo) * static_cast<double>(i) / 49.0));
    }
    const int S = static_cast<int>(snr_points.size());

    const Scenario base = plan.base_scenario;
    const double c = base.c();
    const GlrtAsymptotics h0 = h0_asymptotics(base.P, c);
    const double sigma = std::sqrt(h0.sigma2);

    // H1 pool per SNR point (sweep indices 0..S-1), one shared H0 pool at
    // sweep index S; thresholds sweep the pools, never re-simulate.
    std::vector<std::vector<double>> d1(static_cast<std::size_t>(S),
                                        std::vector<double>(static_cast<std::size_t>(n)));
    std::vector<double> d0(static_cast<std::size_t>(n));
    for (int k = 0; k < S; ++k) {
        Scenario scenario = base;
        scenario.sigma2 = sigma2_from_snr_db(base.L, snr_points[static_cast<std::size_t>(k)]);
        scenario.validate();
        parallel_for(n, workers, [&, k](long t) {
            Scenario trial = scenario;
            trial.seed = derive_seed(plan.master_seed, static_cast<std::uint64_t>(k),
                                     static_cast<std::uint64_t>(t));
            d1[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)] =
                glrt_statistic_from_matrix(scm(generate_received(trial)));
        });
    }
    parallel_for(n, workers, [&](long t) {
        Scenario trial = base;
        trial.hypothesis = Hypothesis::H0;
        trial.seed = derive_seed(plan.master_seed, static_cast<std::uint64_t>(S),
                                 static_cast<std::uint64_t>(t));
        d0[static_cast<std::size_t>(t)] = glrt_statistic_from_matrix(scm(generate_received(trial)));
    });

    ExperimentResult result;
    result.kind = ExperimentKind::Roc;
    result.metadata = base_metadata(plan);
    TableBuilder table(
        {"sweep_index", "SNR_dB", "p_fa", "p_d_theory", "p_fa_empirical", "p_d_empirical"});

    auto exceed_fraction = [n](const std::vector<double>& pool, double thr) {
        long count = 0;
        for (double v : pool) count += v > thr ? 1 : 0;
        return static_cast<double>(count) / static_cast<double>(n);
    };

    result.metadata["points"] = nlohmann::json::array();
    for (int k = 0; k < S; ++k) {
        const double snr = snr_points[static_cast<std::size_t>(k)];
        const double sigma2_chan = sigma2_from_snr_db(base.L, snr);
        for (double p : p_grid) {
            const double thr = h0.mu + sigma * threshold(p);
            const double p_d_theory =
                1.0 - theoretical_miss_probability(base.P, c, base.L, sigma2_chan, p);
            table.push_row({static_cast<double>(k), snr, p, p_d_theory,
                            exceed_fraction(d0, thr),
                            exceed_fraction(d1[static_cast<std::size_t>(k)], thr)});
        }
        const double m1 = pairwise_mean(d1[static_cast<std::size_t>(k)]);
        nlohmann::json point;
        point["sweep_index"] = k;
        point["SNR_dB"] = snr;
        point["h1_sample_mean"] = m1;
        point["h1_sample_var"] = sample_variance(d1[static_cast<std::size_t>(k)], m1);
        point["h1_samples"] = d1[static_cast<std::size_t>(k)];
        result.metadata["points"].push_back(std::move(point));
    }
    const double m0 = pairwise_mean(d0);
    result.metadata["h0_pool"] = {{"sweep_index", S},
                                  {"sample_mean", m0},
                                  {"sample_var", sample_variance(d0, m0)}};
    result.metadata["h0_pool"]["samples"] = d0;
    result.metadata["half_log_offset"] = half_log_offset(c);
    table.finish(result);
    return result;
}

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void write_result(const ExperimentResult& result, const std::string& path, ResultFormat format) {
    for (const auto& col : result.columns)
        if (col.size() != result.row_count())
            throw std::logic_error("write_result: column lengths are not equal");
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("write_result: cannot open '" + path + "' for writing");
    if (format == ResultFormat::Csv) {
        for (std::size_t i = 0; i < result.column_names.size(); ++i) {
            if (i) out << ',';
            out << result.column_names[i];
        }
        out << '\n';
        for (long r = 0; r < result.row_count(); ++r) {
            for (std::size_t i = 0; i < result.columns.size(); ++i) {
                if (i) out << ',';
                out << format_double(result.columns[i][r]);
            }
            out << '\n';
        }
    } else {
        nlohmann::json j;
        j["kind"] = to_string(result.kind);
        j["column_order"] = result.column_names;
        j["columns"] = nlohmann::json::object();
        for (std::size_t i = 0; i < result.columns.size(); ++i) {
            auto& arr = j["columns"][result.column_names[i]] = nlohmann::json::array();
            for (long r = 0; r < result.columns[i].size(); ++r)
                arr.push_back(result.columns[i][r]);
        }
        j["metadata"] = result.metadata;
        out << j.dump(1) << '\n';
    }
    if (!out.good())
        throw std::runtime_error("write_result: I/O failure while writing '" + path + "'");
}

ExperimentResult read_result_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_result_json: cannot open '" + path + "'");
    nlohmann::json j;
    in >> j;
    ExperimentResult result;
    result.kind = experiment_kind_from_string(j.at("kind").get<std::string>());
    result.column_names = j.at("column_order").get<std::vector<std::string>>();
    for (const auto& name : result.column_names) {
        const auto values = j.at("columns").at(name).get<std::vector<double>>();
        RealVector v(static_cast<Eigen::Index>(values.size()));
        for (std::size_t i = 0; i < values.size(); ++i) v[static_cast<Eigen::Index>(i)] = values[i];
        result.columns.push_back(std::move(v));
    }
    result.metadata = j.at("metadata");
    return result;
}

std::optional<double> crossing_at_half(const std::vector<double>& snr_db,
                                       const std::vector<double>& p_la) {
    if (snr_db.size() != p_la.size() || snr_db.size() < 2)
        throw std::invalid_argument("crossing_at_half: need matched vectors of length >= 2");
    for (std::size_t i = 1; i < snr_db.size(); ++i)
        if (!(snr_db[i] > snr_db[i - 1]))
            throw std::invalid_argument("crossing_at_half: SNR grid must be strictly increasing");
    for (std::size_t i = 0; i + 1 < snr_db.size(); ++i) {
        if (p_la[i] >= 0.5 && p_la[i + 1] < 0.5) {
            const double dy = p_la[i + 1] - p_la[i];
            if (dy == 0.0) continue;
            return snr_db[i] + (0.5 - p_la[i]) * (snr_db[i + 1] - snr_db[i]) / dy;
        }
    }
    return std::nullopt;
}

}  // namespace rmtd
