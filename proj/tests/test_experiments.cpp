#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmtd/detector.hpp"
#include "rmtd/experiments.hpp"
#include "rmtd/matrices.hpp"
#include "rmtd/models.hpp"
#include "rmtd/rmt.hpp"
#include "rmtd/rng.hpp"

using namespace rmtd;

namespace {

Scenario small_h1() {
    Scenario s;
    s.P = 16;
    s.N = 64;
    s.L = 2;
    s.sigma2 = 0.2;
    s.signal_law = SignalLaw::Binary;
    s.hypothesis = Hypothesis::H1;
    s.seed = 1;
    return s;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

double normal_pdf(double x, double mu, double sigma2) {
    const double z = (x - mu) * (x - mu) / (2.0 * sigma2);
    return std::exp(-z) / std::sqrt(2.0 * std::numbers::pi * sigma2);
}

}  // namespace

TEST_CASE("experiment kind names round trip") {
    for (auto kind : {ExperimentKind::EsdOverlay, ExperimentKind::EigComparison,
                      ExperimentKind::GlrtDistribution, ExperimentKind::MissProbSweep,
                      ExperimentKind::Roc}) {
        CHECK(experiment_kind_from_string(to_string(kind)) == kind);
    }
    CHECK_THROWS_AS(experiment_kind_from_string("spectra"), std::invalid_argument);
}

TEST_CASE("trial plans reject malformed sweeps") {
    TrialPlan plan;
    plan.base_scenario = small_h1();
    plan.n_trials = 10;
    plan.validate();

    plan.n_trials = 0;
    CHECK_THROWS_WITH_AS(plan.validate(), doctest::Contains("n_trials"), std::invalid_argument);
    plan.n_trials = 10;

    plan.sweep = {{"frequency", {1.0}}};
    CHECK_THROWS_WITH_AS(plan.validate(), doctest::Contains("frequency"), std::invalid_argument);

    plan.sweep = {{"N", {64.0}}, {"N", {128.0}}};
    CHECK_THROWS_WITH_AS(plan.validate(), doctest::Contains("duplicate"), std::invalid_argument);

    plan.sweep = {{"N", {}}};
    CHECK_THROWS_WITH_AS(plan.validate(), doctest::Contains("no values"), std::invalid_argument);

    plan.sweep = {{"N", {64.5}}};
    CHECK_THROWS_AS(plan.validate(), std::invalid_argument);

    plan.sweep = {{"p_fa", {0.0}}};
    CHECK_THROWS_AS(plan.validate(), std::invalid_argument);

    plan.sweep = {{"SNR_dB", {-10.0}}};
    plan.base_scenario.L = 0;
    CHECK_THROWS_WITH_AS(plan.validate(), doctest::Contains("L >= 1"), std::invalid_argument);
}

TEST_CASE("sweep points enumerate the cartesian product, last axis fastest") {
    TrialPlan plan;
    plan.base_scenario = small_h1();
    plan.n_trials = 5;
    plan.sweep = {{"N", {128.0, 256.0}}, {"SNR_dB", {-20.0, -15.0}}};
    plan.validate();

    REQUIRE(plan.sweep_point_count() == 4);
    CHECK(plan.sweep_values_at(0) == std::vector<double>{128.0, -20.0});
    CHECK(plan.sweep_values_at(1) == std::vector<double>{128.0, -15.0});
    CHECK(plan.sweep_values_at(2) == std::vector<double>{256.0, -20.0});
    CHECK(plan.sweep_values_at(3) == std::vector<double>{256.0, -15.0});

    const Scenario at1 = plan.scenario_at(1);
    CHECK(at1.N == 128);
    CHECK(at1.sigma2 == doctest::Approx(sigma2_from_snr_db(2, -15.0)).epsilon(1e-15));
    CHECK(at1.P == plan.base_scenario.P);

    CHECK(plan.p_fa_at(2, 0.05) == 0.05);

    TrialPlan with_pfa = plan;
    with_pfa.sweep = {{"p_fa", {0.1, 0.02}}};
    with_pfa.validate();
    CHECK(with_pfa.p_fa_at(0, 0.05) == 0.1);
    CHECK(with_pfa.p_fa_at(1, 0.05) == 0.02);
    // p_fa axes do not touch the scenario.
    CHECK(with_pfa.scenario_at(1).N == plan.base_scenario.N);
}

TEST_CASE("trial plans serialize and re-validate through JSON") {
    TrialPlan plan;
    plan.base_scenario = small_h1();
    plan.n_trials = 7;
    plan.sweep = {{"SNR_dB", {-12.0, -9.0, -6.0}}};
    plan.master_seed = 99;

    const TrialPlan back = TrialPlan::from_json(plan.to_json());
    CHECK(back.base_scenario.P == plan.base_scenario.P);
    CHECK(back.base_scenario.N == plan.base_scenario.N);
    CHECK(back.base_scenario.L == plan.base_scenario.L);
    CHECK(back.base_scenario.sigma2 == plan.base_scenario.sigma2);
    CHECK(back.base_scenario.signal_law == plan.base_scenario.signal_law);
    CHECK(back.base_scenario.hypothesis == plan.base_scenario.hypothesis);
    CHECK(back.base_scenario.seed == plan.base_scenario.seed);
    CHECK(back.n_trials == 7);
    CHECK(back.master_seed == 99);
    REQUIRE(back.sweep.size() == 1);
    CHECK(back.sweep[0].name == "SNR_dB");
    CHECK(back.sweep[0].values == plan.sweep[0].values);

    CHECK_THROWS(TrialPlan::from_json(nlohmann::json::object()));
}

TEST_CASE("thread count resolution") {
    unsetenv("RMT_DETECT_THREADS");
    CHECK(effective_thread_count(1) == 1);
    CHECK(effective_thread_count(4) == 4);
    CHECK(effective_thread_count(0) >= 1);
    CHECK_THROWS_AS(effective_thread_count(-1), std::invalid_argument);

    setenv("RMT_DETECT_THREADS", "3", 1);
    CHECK(effective_thread_count(0) == 3);
    CHECK(effective_thread_count(8) == 3);
    setenv("RMT_DETECT_THREADS", "junk", 1);
    CHECK(effective_thread_count(2) == 2);
    unsetenv("RMT_DETECT_THREADS");
}

TEST_CASE("ESD overlay columns and metadata") {
    TrialPlan plan;
    plan.base_scenario = small_h1();
    plan.base_scenario.hypothesis = Hypothesis::H0;
    plan.base_scenario.L = 0;
    plan.base_scenario.sigma2 = 0.0;
    plan.n_trials = 30;
    plan.master_seed = 11;

    const ExperimentResult res = run_esd_overlay(plan, 1);
    CHECK(res.kind == ExperimentKind::EsdOverlay);
    REQUIRE(res.column_names ==
            std::vector<std::string>{"sweep_index", "bin_center", "empirical_density",
                                     "mp_density"});
    const long rows = res.row_count();
    REQUIRE(rows > 0);
    for (const auto& col : res.columns) CHECK(col.size() == rows);

    const double c = plan.base_scenario.c();
    for (long r = 0; r < rows; ++r) {
        CHECK(res.column("sweep_index")[r] == 0.0);
        CHECK(res.column("empirical_density")[r] >= 0.0);
        CHECK(res.column("mp_density")[r] ==
              doctest::Approx(mp_density(res.column("bin_center")[r], c)).epsilon(1e-12));
    }

    const auto& point = res.metadata.at("points").at(0);
    CHECK(point.at("c").get<double>() == doctest::Approx(c).epsilon(1e-15));
    CHECK(point.at("bulk_ks").get<double>() > 0.0);
    CHECK(point.at("bulk_ks").get<double>() < 0.2);
    CHECK(point.at("pooled_eigenvalue_count").get<long>() == 30L * plan.base_scenario.P);
    CHECK_FALSE(point.contains("predicted_spikes"));
    CHECK(res.metadata.at("code_version").get<std::string>() == kCodeVersion);

    TrialPlan h1_plan;
    h1_plan.base_scenario = small_h1();  // sigma2 = 0.2: spike 4.2 > 1.5
    h1_plan.n_trials = 10;
    h1_plan.master_seed = 12;
    const ExperimentResult h1_res = run_esd_overlay(h1_plan, 1);
    const auto& h1_point = h1_res.metadata.at("points").at(0);
    const auto& taps = h1_point.at("predicted_spikes");
    REQUIRE(taps.size() == 2);
    for (const auto& tap : taps) {
        CHECK(tap.at("emerged").get<bool>());
        CHECK(tap.at("limit").get<double>() ==
              doctest::Approx(*spike_limit(1.0 + 16.0 * 0.2, 0.25)).epsilon(1e-12));
    }
}

TEST_CASE("eigenvalue comparison runner lines up its three constructions") {
    TrialPlan plan;
    plan.base_scenario = small_h1();
    plan.n_trials = 25;
    plan.master_seed = 21;

    const ExperimentResult res = run_eig_comparison(plan, 1);
    CHECK(res.kind == ExperimentKind::EigComparison);
    const int top = std::min(plan.base_scenario.L + 5, plan.base_scenario.P);
    CHECK(res.column_names.size() == 2u + 3u * static_cast<unsigned>(top) + 3u);
    REQUIRE(res.row_count() == 25);

    // Largest eigenvalues hover near the shared outlier limit, so the
    // pairwise gaps stay small even at this tiny size.
    const auto& gaps = res.metadata.at("points").at(0).at("mean_largest_gaps");
    CHECK(gaps.at("rx_rhat").get<double>() < 0.25);
    CHECK(gaps.at("rx_rz").get<double>() < 0.25);
    CHECK(gaps.at("rhat_rz").get<double>() < 0.25);

    for (long r = 0; r < res.row_count(); ++r) {
        CHECK(res.column("rx_top_1")[r] >= res.column("rx_top_2")[r]);
        CHECK(res.column("gap_rx_rhat")[r] >= 0.0);
    }

    TrialPlan h0_plan = plan;
    h0_plan.base_scenario.hypothesis = Hypothesis::H0;
    CHECK_THROWS_WITH_AS(run_eig_comparison(h0_plan, 1), doctest::Contains("H1"),
                         std::invalid_argument);
}

TEST_CASE("GLRT distribution runner reports samples, histograms, and theory") {
    TrialPlan plan;
    plan.base_scenario = small_h1();
    plan.base_scenario.P = 32;
    plan.base_scenario.N = 64;
    plan.base_scenario.sigma2 = 0.05;
    plan.n_trials = 60;
    plan.master_seed = 31;

    const ExperimentResult res = run_glrt_distribution(plan, 1);
    CHECK(res.kind == ExperimentKind::GlrtDistribution);
    REQUIRE(res.column_names ==
            std::vector<std::string>{"sweep_index", "bin_center", "h0_density", "h1_density",
                                     "h0_theory_pdf", "h1_theory_pdf"});

    const auto& point = res.metadata.at("points").at(0);
    const auto h0_samples = point.at("h0_samples").get<std::vector<double>>();
    const auto h1_samples = point.at("h1_samples").get<std::vector<double>>();
    REQUIRE(h0_samples.size() == 60);
    REQUIRE(h1_samples.size() == 60);

    double acc = 0.0;
    for (double v : h0_samples) acc += v;
    CHECK(point.at("h0_sample_mean").get<double>() ==
          doctest::Approx(acc / 60.0).epsilon(1e-12));

    const double c = plan.base_scenario.c();
    const GlrtAsymptotics h0 = h0_asymptotics(32, c);
    const auto& theory = point.at("theory");
    CHECK(theory.at("h0_mu").get<double>() == doctest::Approx(h0.mu).epsilon(1e-15));
    CHECK(theory.at("sigma2").get<double>() == doctest::Approx(h0.sigma2).epsilon(1e-15));
    CHECK(point.at("half_log_offset").get<double>() ==
          doctest::Approx(half_log_offset(c)).epsilon(1e-15));

    const long r = res.row_count() / 2;
    CHECK(res.column("h0_theory_pdf")[r] ==
          doctest::Approx(normal_pdf(res.column("bin_center")[r], h0.mu, h0.sigma2))
              .epsilon(1e-12));

    // The signal shifts the statistic upward, visibly at sigma2 = 0.05.
    double acc1 = 0.0;
    for (double v : h1_samples) acc1 += v;
    CHECK(acc1 / 60.0 > acc / 60.0);
}

TEST_CASE("miss-probability sweep matches the closed form column-by-column") {
    TrialPlan plan;
    plan.base_scenario = small_h1();
    plan.n_trials = 40;
    plan.master_seed = 41;
    plan.sweep = {{"SNR_dB", {-25.0, 0.0}}};

    const ExperimentResult res = run_miss_prob_sweep(plan, 1);
    CHECK(res.kind == ExperimentKind::MissProbSweep);
    REQUIRE(res.row_count() == 2);
    for (long r = 0; r < 2; ++r) {
        const double snr = res.column("SNR_dB")[r];
        const double sigma2 = sigma2_from_snr_db(2, snr);
        CHECK(res.column("sigma2")[r] == doctest::Approx(sigma2).epsilon(1e-15));
        CHECK(res.column("p_fa")[r] == 0.05);
        CHECK(res.column("N")[r] == 64.0);
        CHECK(res.column("theory_miss")[r] ==
              doctest::Approx(theoretical_miss_probability(16, 0.25, 2, sigma2, 0.05))
                  .epsilon(1e-12));
    }
    CHECK(res.column("empirical_miss")[1] == 0.0);  // 0 dB at P=16 is unmissable
    CHECK(res.column("empirical_miss")[0] > 0.5);   // -25 dB is hopeless

    CHECK(res.metadata.at("crossings").size() == 1);

    TrialPlan h0_plan = plan;
    h0_plan.base_scenario.hypothesis = Hypothesis::H0;
    CHECK_THROWS_AS(run_miss_prob_sweep(h0_plan, 1), std::invalid_argument);
}

TEST_CASE("ROC runner thresholds shared pools over the p_fa grid") {
    TrialPlan plan;
    plan.base_scenario = small_h1();
    plan.base_scenario.L = 1;
    plan.base_scenario.sigma2 = sigma2_from_snr_db(1, -8.0);
    plan.n_trials = 80;
    plan.master_seed = 51;
    plan.sweep = {{"SNR_dB", {-10.0, -5.0}}, {"p_fa", {0.01, 0.05, 0.2}}};

    const ExperimentResult res = run_roc(plan, 1);
    CHECK(res.kind == ExperimentKind::Roc);
    REQUIRE(res.row_count() == 6);

    for (long r = 0; r < res.row_count(); ++r) {
        const double snr = res.column("SNR_dB")[r];
        const double p = res.column("p_fa")[r];
        const double sigma2 = sigma2_from_snr_db(1, snr);
        CHECK(res.column("p_d_theory")[r] ==
              doctest::Approx(1.0 - theoretical_miss_probability(16, 0.25, 1, sigma2, p))
                  .epsilon(1e-12));
        CHECK(res.column("p_fa_empirical")[r] >= 0.0);
        CHECK(res.column("p_d_empirical")[r] <= 1.0);
    }

    // Within each SNR, larger p_fa never lowers either empirical rate.
    for (long r = 0; r + 1 < res.row_count(); ++r) {
        if (res.column("sweep_index")[r] != res.column("sweep_index")[r + 1]) continue;
        CHECK(res.column("p_fa_empirical")[r + 1] >= res.column("p_fa_empirical")[r]);
        CHECK(res.column("p_d_empirical")[r + 1] >= res.column("p_d_empirical")[r]);
    }

    const auto h0_pool = res.metadata.at("h0_pool").at("samples").get<std::vector<double>>();
    CHECK(h0_pool.size() == 80);
    CHECK(res.metadata.at("half_log_offset").get<double>() ==
          doctest::Approx(half_log_offset(0.25)).epsilon(1e-15));

    TrialPlan bad = plan;
    bad.sweep = {{"N", {64.0, 128.0}}};
    CHECK_THROWS_WITH_AS(run_roc(bad, 1), doctest::Contains("axes"), std::invalid_argument);

    TrialPlan h0_plan = plan;
    h0_plan.base_scenario.hypothesis = Hypothesis::H0;
    CHECK_THROWS_AS(run_roc(h0_plan, 1), std::invalid_argument);
}

TEST_CASE("results are identical across thread counts") {
    TrialPlan plan;
    plan.base_scenario = small_h1();
    plan.n_trials = 24;
    plan.master_seed = 61;
    plan.sweep = {{"SNR_dB", {-12.0, -6.0}}};

    const ExperimentResult serial = run_glrt_distribution(plan, 1);
    const ExperimentResult threaded = run_glrt_distribution(plan, 4);

    REQUIRE(serial.column_names == threaded.column_names);
    REQUIRE(serial.row_count() == threaded.row_count());
    for (std::size_t i = 0; i < serial.columns.size(); ++i)
        for (long r = 0; r < serial.row_count(); ++r)
            CHECK(serial.columns[i][r] == threaded.columns[i][r]);

    const std::string p1 = temp_path("rmtd_serial.json");
    const std::string p2 = temp_path("rmtd_threaded.json");
    write_result(serial, p1, ResultFormat::Json);
    write_result(threaded, p2, ResultFormat::Json);
    CHECK(slurp(p1) == slurp(p2));

    const std::string c1 = temp_path("rmtd_serial.csv");
    const std::string c2 = temp_path("rmtd_threaded.csv");
    write_result(serial, c1, ResultFormat::Csv);
    write_result(threaded, c2, ResultFormat::Csv);
    CHECK(slurp(c1) == slurp(c2));

    for (const auto& p : {p1, p2, c1, c2}) std::remove(p.c_str());
}

TEST_CASE("the metadata plan echo reproduces the run") {
    TrialPlan plan;
    plan.base_scenario = small_h1();
    plan.n_trials = 15;
    plan.master_seed = 71;

    const ExperimentResult first = run_eig_comparison(plan, 2);
    const TrialPlan echoed = TrialPlan::from_json(first.metadata.at("plan"));
    const ExperimentResult second = run_eig_comparison(echoed, 1);

    REQUIRE(first.column_names == second.column_names);
    REQUIRE(first.row_count() == second.row_count());
    for (std::size_t i = 0; i < first.columns.size(); ++i)
        for (long r = 0; r < first.row_count(); ++r)
            CHECK(first.columns[i][r] == second.columns[i][r]);
}

TEST_CASE("JSON result files round trip exactly") {
    TrialPlan plan;
    plan.base_scenario = small_h1();
    plan.n_trials = 12;
    plan.master_seed = 81;

    const ExperimentResult res = run_glrt_distribution(plan, 1);
    const std::string path = temp_path("rmtd_roundtrip.json");
    write_result(res, path, ResultFormat::Json);
    const ExperimentResult back = read_result_json(path);

    CHECK(back.kind == res.kind);
    REQUIRE(back.column_names == res.column_names);
    REQUIRE(back.row_count() == res.row_count());
    for (std::size_t i = 0; i < res.columns.size(); ++i)
        for (long r = 0; r < res.row_count(); ++r)
            CHECK(back.columns[i][r] == res.columns[i][r]);

    const std::string again = temp_path("rmtd_roundtrip2.json");
    write_result(back, again, ResultFormat::Json);
    CHECK(slurp(path) == slurp(again));

    std::remove(path.c_str());
    std::remove(again.c_str());
}

TEST_CASE("CSV output carries a header even with no rows") {
    ExperimentResult res;
    res.kind = ExperimentKind::Roc;
    res.column_names = {"sweep_index", "p_fa"};
    res.columns = {RealVector(0), RealVector(0)};

    const std::string path = temp_path("rmtd_empty.csv");
    write_result(res, path, ResultFormat::Csv);
    CHECK(slurp(path) == "sweep_index,p_fa\n");
    std::remove(path.c_str());

    res.columns = {RealVector(0), RealVector(1)};
    CHECK_THROWS_AS(write_result(res, path, ResultFormat::Csv), std::logic_error);
}

TEST_CASE("interpolated half-crossing of a miss curve") {
    CHECK(crossing_at_half({0.0, 1.0, 2.0}, {0.8, 0.4, 0.2}) ==
          doctest::Approx(0.75).epsilon(1e-15));
    CHECK(crossing_at_half({-2.0, -1.0}, {0.5, 0.4}) == doctest::Approx(-2.0).epsilon(1e-15));
    CHECK_FALSE(crossing_at_half({0.0, 1.0}, {0.9, 0.8}).has_value());
    CHECK_FALSE(crossing_at_half({0.0, 1.0}, {0.4, 0.3}).has_value());

    CHECK_THROWS_AS(crossing_at_half({0.0}, {0.4}), std::invalid_argument);
    CHECK_THROWS_AS(crossing_at_half({0.0, 1.0}, {0.4}), std::invalid_argument);
    CHECK_THROWS_AS(crossing_at_half({1.0, 0.0}, {0.8, 0.4}), std::invalid_argument);
}

TEST_CASE("independent trials shrink the mean's spread as 1/sqrt(n)") {
    // Block means over the same 3200 statistics: quadrupling the block size
    // should halve the spread. Pinned seed; the ratio is checked loosely.
    const int P = 8, N = 16;
    Scenario scenario;
    scenario.P = P;
    scenario.N = N;
    scenario.hypothesis = Hypothesis::H0;

    std::vector<double> stats(3200);
    for (std::size_t t = 0; t < stats.size(); ++t) {
        Scenario s = scenario;
        s.seed = derive_seed(910u, static_cast<std::uint64_t>(t));
        stats[t] = glrt_statistic_from_matrix(scm(generate_received(s)));
    }

    auto block_sd = [&](std::size_t block) {
        const std::size_t blocks = stats.size() / block;
        std::vector<double> means(blocks);
        for (std::size_t b = 0; b < blocks; ++b) {
            double acc = 0.0;
            for (std::size_t i = 0; i < block; ++i) acc += stats[b * block + i];
            means[b] = acc / static_cast<double>(block);
        }
        double mean = 0.0;
        for (double m : means) mean += m;
        mean /= static_cast<double>(blocks);
        double var = 0.0;
        for (double m : means) var += (m - mean) * (m - mean);
        return std::sqrt(var / static_cast<double>(blocks - 1));
    };

    const double ratio = block_sd(20) / block_sd(80);
    CHECK(ratio == doctest::Approx(2.0).epsilon(0.25));
}
