#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "rmtd/detector.hpp"
#include "rmtd/models.hpp"

namespace rmtd {

inline constexpr const char* kCodeVersion = "1.0.0";

enum class ExperimentKind { EsdOverlay, EigComparison, GlrtDistribution, MissProbSweep, Roc };

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& s);

// One swept parameter. Supported names: "N" (positive integers), "SNR_dB"
// (requires L >= 1 on the base scenario), "p_fa" (probabilities in (0,1)).
struct SweepAxis {
    std::string name;
    std::vector<double> values;
};

// A full experiment specification. Sweeps form the cartesian product of the
// axes in order (last axis fastest). Trial t of flattened sweep point k draws
// its seed as derive_seed(master_seed, k, t), which makes results independent
// of execution order and thread count.
struct TrialPlan {
    Scenario base_scenario;
    int n_trials = 0;
    std::vector<SweepAxis> sweep;
    std::uint64_t master_seed = 0;

    void validate() const;  // std::invalid_argument on bad counts/axes
    nlohmann::json to_json() const;
    static TrialPlan from_json(const nlohmann::json& j);

    // Number of flattened sweep points (1 when no sweep is given).
    int sweep_point_count() const;
    // Axis values at flattened point k, in axis order.
    std::vector<double> sweep_values_at(int k) const;
    // Base scenario with point k's N / SNR_dB values applied.
    Scenario scenario_at(int k) const;
    // p_fa at point k: the "p_fa" axis value if such an axis exists,
    // otherwise fallback.
    double p_fa_at(int k, double fallback) const;
};

// Uniform long-format result table: equal-length named columns (a
// "sweep_index" column keys rows to flattened sweep points), plus a metadata
// object holding the plan echo, code version, and the irregular per-point
// outputs (spike predictions, scalar summaries, raw statistic samples).
struct ExperimentResult {
    ExperimentKind kind = ExperimentKind::EsdOverlay;
    std::vector<std::string> column_names;
    std::vector<RealVector> columns;
    nlohmann::json metadata;

    long row_count() const { return columns.empty() ? 0 : columns.front().size(); }
    const RealVector& column(const std::string& name) const;
};

// Thread count after applying the RMT_DETECT_THREADS environment override;
// requested 0 means auto-detect. Always >= 1.
int effective_thread_count(int requested);

// Pooled eigenvalue histograms vs the MP density, one block per sweep point.
// Columns: sweep_index, bin_center, empirical_density, mp_density. Metadata
// per point: pooled bulk KS distance and predicted spike locations (H1).
ExperimentResult run_esd_overlay(const TrialPlan& plan, int threads = 0);

// Top-(L+5) eigenvalues of the received-data SCM, the surrogate construction
// and the spiked Wishart at matched parameters, one row per trial, plus
// pairwise relative gaps of the largest eigenvalue.
ExperimentResult run_eig_comparison(const TrialPlan& plan, int threads = 0);

// Empirical distribution of the GLRT statistic under both hypotheses with
// the asymptotic normal curves. Columns: sweep_index, bin_center,
// h0_density, h1_density, h0_theory_pdf, h1_theory_pdf. Metadata per point:
// sample means/variances, theory parameters, the half-log-offset flag, and
// the raw statistic samples.
ExperimentResult run_glrt_distribution(const TrialPlan& plan, int threads = 0);

// Theoretical and empirical miss probability per sweep point at fixed p_fa
// (the "p_fa" axis value if present, else 0.05). Columns: sweep_index, N,
// SNR_dB, p_fa, theory_miss, empirical_miss.
ExperimentResult run_miss_prob_sweep(const TrialPlan& plan, int threads = 0);

// ROC curves: H1 statistic pools per SNR sweep point plus one shared H0 pool
// (seeded at sweep index = point count), thresholded over a p_fa grid (the
// "p_fa" axis if given, else 50 log-spaced points in [1e-3, 0.5]) without
// re-simulation. Columns: sweep_index, SNR_dB, p_fa, p_d_theory,
// p_fa_empirical, p_d_empirical.
ExperimentResult run_roc(const TrialPlan& plan, int threads = 0);

enum class ResultFormat { Csv, Json };

// CSV: header row of column names, rows at 17 significant digits. JSON: kind,
// column order, columns, metadata; numbers serialized round-trip exact.
void write_result(const ExperimentResult& result, const std::string& path,
                  ResultFormat format);

// Inverse of the JSON side of write_result.
ExperimentResult read_result_json(const std::string& path);

// First SNR (linear interpolation) at which p_la crosses 0.5 from above;
// nullopt if the curve never crosses. Inputs must be sorted ascending in SNR.
std::optional<double> crossing_at_half(const std::vector<double>& snr_db,
                                       const std::vector<double>& p_la);

}  // namespace rmtd
