// rmt-detect: spectral detection of correlated signals across large antenna
// arrays. Subcommands generate synthetic captures, run the GLRT on captured
// samples, and reproduce the Monte Carlo experiment tables.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rmtd/detector.hpp"
#include "rmtd/experiments.hpp"
#include "rmtd/matrices.hpp"
#include "rmtd/models.hpp"
#include "rmtd/rmt.hpp"
#include "rmtd/samples_io.hpp"

namespace {

using nlohmann::json;

// One subcommand's flag values plus which flags were actually passed, so
// config-file values fill in only where no flag was given.
struct Raw {
    CLI::App* cmd = nullptr;
    std::string config_path;

    int P = 0, N = 0, L = 0, trials = 0, threads = 0, pfa_count = 0;
    double sigma2 = 0, snr_db = 0, pfa = 0, c = 0;
    double snr_min = 0, snr_max = 0, snr_step = 0, pfa_min = 0, pfa_max = 0;
    std::uint64_t seed = 0;
    std::string law, hypothesis, out, format, n_list, snr_list, input;

    std::map<std::string, CLI::Option*> opts;
    json cfg = json::object();

    CLI::Option* add(const std::string& key, CLI::Option* opt) {
        opts[key] = opt;
        return opt;
    }

    void load_config() {
        if (config_path.empty()) return;
        std::ifstream in(config_path);
        if (!in)
            throw std::invalid_argument("cannot open config file '" + config_path + "'");
        try {
            in >> cfg;
        } catch (const json::exception& e) {
            throw std::invalid_argument("malformed config file '" + config_path +
                                        "': " + e.what());
        }
        if (!cfg.is_object())
            throw std::invalid_argument("config file '" + config_path +
                                        "' must hold a flat JSON object");
    }

    bool flag_given(const std::string& key) const {
        auto it = opts.find(key);
        return it != opts.end() && it->second->count() > 0;
    }

    template <typename T>
    T resolve(const std::string& key, const T& flag_value, const T& fallback) const {
        if (flag_given(key)) return flag_value;
        if (cfg.contains(key)) {
            try {
                return cfg.at(key).get<T>();
            } catch (const json::exception&) {
                throw std::invalid_argument("config key '" + key + "' has the wrong type");
            }
        }
        return fallback;
    }

    // List-valued settings accept a comma-separated string on the command
    // line and either a string or a JSON array in the config file.
    std::vector<double> resolve_list(const std::string& key, const std::string& flag_value,
                                     const std::string& fallback) const {
        std::string text = fallback;
        if (flag_given(key)) {
            text = flag_value;
        } else if (cfg.contains(key)) {
            const auto& v = cfg.at(key);
            if (v.is_array()) {
                std::vector<double> values;
                for (const auto& x : v) values.push_back(x.get<double>());
                return values;
            }
            text = v.get<std::string>();
        }
        std::vector<double> values;
        std::stringstream ss(text);
        std::string token;
        while (std::getline(ss, token, ',')) {
            if (token.empty()) continue;
            std::size_t pos = 0;
            double parsed = 0;
            try {
                parsed = std::stod(token, &pos);
            } catch (const std::exception&) {
                throw std::invalid_argument("bad numeric list entry '" + token + "' for '" +
                                            key + "'");
            }
            if (pos != token.size())
                throw std::invalid_argument("bad numeric list entry '" + token + "' for '" +
                                            key + "'");
            values.push_back(parsed);
        }
        return values;
    }
};

void add_scenario_flags(Raw& raw, int def_P, int def_N, int def_L,
                        const std::string& def_hyp) {
    auto* cmd = raw.cmd;
    raw.add("P", cmd->add_option("--P", raw.P, "array size (number of antennas)")
                     ->default_val(def_P));
    raw.add("N", cmd->add_option("--N", raw.N, "samples per antenna")->default_val(def_N));
    raw.add("L", cmd->add_option("--L", raw.L, "channel length in taps")->default_val(def_L));
    raw.add("sigma2",
            cmd->add_option("--sigma2", raw.sigma2,
                            "per-tap channel variance (linear power)")
                ->default_val(0.0));
    raw.add("snr_db", cmd->add_option("--snr-db", raw.snr_db,
                                      "SNR in dB, 10*log10(L*sigma2); overrides --sigma2"));
    raw.add("law", cmd->add_option("--law", raw.law,
                                   "transmitted symbol law: binary | gaussian")
                       ->default_val("binary"));
    raw.add("hypothesis", cmd->add_option("--hypothesis", raw.hypothesis,
                                          "H0 (noise only) or H1 (signal present)")
                              ->default_val(def_hyp));
    raw.add("seed", cmd->add_option("--seed", raw.seed, "master RNG seed")->default_val(1));
}

void add_run_flags(Raw& raw, int def_trials) {
    auto* cmd = raw.cmd;
    raw.add("trials",
            cmd->add_option("--trials", raw.trials, "Monte Carlo trials per sweep point")
                ->default_val(def_trials));
    raw.add("threads", cmd->add_option("--threads", raw.threads,
                                       "worker threads (0 = auto-detect)")
                           ->default_val(0));
    raw.add("out", cmd->add_option("--out", raw.out, "output file path"));
    raw.add("format", cmd->add_option("--format", raw.format, "output format: csv | json")
                          ->default_val("csv"));
}

rmtd::Scenario resolve_scenario(const Raw& raw) {
    rmtd::Scenario s;
    s.P = raw.resolve("P", raw.P, raw.P);
    s.N = raw.resolve("N", raw.N, raw.N);
    s.L = raw.resolve("L", raw.L, raw.L);
    s.sigma2 = raw.resolve("sigma2", raw.sigma2, raw.sigma2);
    s.signal_law = rmtd::signal_law_from_string(raw.resolve("law", raw.law, raw.law));
    s.hypothesis =
        rmtd::hypothesis_from_string(raw.resolve("hypothesis", raw.hypothesis, raw.hypothesis));
    s.seed = raw.resolve("seed", raw.seed, raw.seed);
    const bool snr_set = raw.flag_given("snr_db") || raw.cfg.contains("snr_db");
    if (snr_set) {
        if (s.L < 1)
            throw std::invalid_argument("--snr-db requires L >= 1");
        s.sigma2 = rmtd::sigma2_from_snr_db(s.L, raw.resolve("snr_db", raw.snr_db, 0.0));
    }
    s.validate();
    return s;
}

rmtd::TrialPlan resolve_plan(const Raw& raw, const rmtd::Scenario& scenario, int def_trials) {
    rmtd::TrialPlan plan;
    plan.base_scenario = scenario;
    plan.n_trials = raw.resolve("trials", raw.trials, def_trials);
    plan.master_seed = raw.resolve("seed", raw.seed, scenario.seed);
    return plan;
}

json effective_config(const rmtd::TrialPlan& plan, int threads, const std::string& out,
                      const std::string& format) {
    json j = plan.to_json();
    j["threads"] = threads;
    j["out"] = out;
    j["format"] = format;
    return j;
}

int write_experiment(rmtd::ExperimentResult result, const Raw& raw,
                     const rmtd::TrialPlan& plan, int threads,
                     const std::string& default_out) {
    const std::string format_name = raw.resolve("format", raw.format, std::string("csv"));
    rmtd::ResultFormat format;
    if (format_name == "csv")
        format = rmtd::ResultFormat::Csv;
    else if (format_name == "json")
        format = rmtd::ResultFormat::Json;
    else
        throw std::invalid_argument("unknown --format '" + format_name +
                                    "' (expected csv or json)");
    std::string out = raw.resolve("out", raw.out, std::string());
    if (out.empty())
        out = default_out + (format == rmtd::ResultFormat::Csv ? ".csv" : ".json");
    result.metadata["cli"] = effective_config(plan, threads, out, format_name);
    rmtd::write_result(result, out, format);
    std::cout << "wrote " << out << " (" << result.row_count() << " rows)\n";
    return 0;
}

int cmd_esd(Raw& raw) {
    raw.load_config();
    const rmtd::Scenario scenario = resolve_scenario(raw);
    rmtd::TrialPlan plan = resolve_plan(raw, scenario, 200);
    const auto n_values = raw.resolve_list("n_list", raw.n_list, "");
    if (!n_values.empty()) plan.sweep.push_back({"N", n_values});
    const int threads = raw.resolve("threads", raw.threads, 0);
    return write_experiment(rmtd::run_esd_overlay(plan, threads), raw, plan, threads, "esd");
}

int cmd_eig_compare(Raw& raw) {
    raw.load_config();
    rmtd::Scenario scenario = resolve_scenario(raw);
    rmtd::TrialPlan plan = resolve_plan(raw, scenario, 200);
    const int threads = raw.resolve("threads", raw.threads, 0);
    return write_experiment(rmtd::run_eig_comparison(plan, threads), raw, plan, threads,
                            "eig-compare");
}

int cmd_glrt_dist(Raw& raw) {
    raw.load_config();
    const rmtd::Scenario scenario = resolve_scenario(raw);
    rmtd::TrialPlan plan = resolve_plan(raw, scenario, 2000);
    const auto n_values = raw.resolve_list("n_list", raw.n_list, "");
    if (!n_values.empty()) plan.sweep.push_back({"N", n_values});
    const int threads = raw.resolve("threads", raw.threads, 0);
    return write_experiment(rmtd::run_glrt_distribution(plan, threads), raw, plan, threads,
                            "glrt-dist");
}

int cmd_miss_prob(Raw& raw) {
    raw.load_config();
    const rmtd::Scenario scenario = resolve_scenario(raw);
    rmtd::TrialPlan plan = resolve_plan(raw, scenario, 2000);
    const auto n_values = raw.resolve_list("n_list", raw.n_list, "");
    if (!n_values.empty()) plan.sweep.push_back({"N", n_values});
    const double lo = raw.resolve("snr_min", raw.snr_min, -22.0);
    const double hi = raw.resolve("snr_max", raw.snr_max, -10.0);
    const double step = raw.resolve("snr_step", raw.snr_step, 0.5);
    if (!(step > 0.0) || !(hi >= lo))
        throw std::invalid_argument("bad SNR grid: need snr_max >= snr_min and snr_step > 0");
    std::vector<double> grid;
    for (double v = lo; v <= hi + step / 2.0; v += step) grid.push_back(v);
    plan.sweep.push_back({"SNR_dB", grid});
    const double pfa = raw.resolve("pfa", raw.pfa, 0.05);
    plan.sweep.push_back({"p_fa", {pfa}});
    const int threads = raw.resolve("threads", raw.threads, 0);
    return write_experiment(rmtd::run_miss_prob_sweep(plan, threads), raw, plan, threads,
                            "miss-prob");
}

int cmd_roc(Raw& raw) {
    raw.load_config();
    const rmtd::Scenario scenario = resolve_scenario(raw);
    rmtd::TrialPlan plan = resolve_plan(raw, scenario, 2000);
    const auto snr_values = raw.resolve_list("snr_list", raw.snr_list, "-16,-15.5");
    plan.sweep.push_back({"SNR_dB", snr_values});
    const int count = raw.resolve("pfa_count", raw.pfa_count, 50);
    const double lo = raw.resolve("pfa_min", raw.pfa_min, 1e-3);
    const double hi = raw.resolve("pfa_max", raw.pfa_max, 0.5);
    if (count < 2 || !(lo > 0.0) || !(hi < 1.0) || !(hi > lo))
        throw std::invalid_argument(
            "bad p_fa grid: need pfa_count >= 2 and 0 < pfa_min < pfa_max < 1");
    std::vector<double> p_grid;
    for (int i = 0; i < count; ++i)
        p_grid.push_back(std::pow(
            10.0, std::log10(lo) + (std::log10(hi) - std::log10(lo)) *
                                       static_cast<double>(i) / static_cast<double>(count - 1)));
    plan.sweep.push_back({"p_fa", p_grid});
    const int threads = raw.resolve("threads", raw.threads, 0);
    return write_experiment(rmtd::run_roc(plan, threads), raw, plan, threads, "roc");
}

int cmd_generate(Raw& raw) {
    raw.load_config();
    const rmtd::Scenario scenario = resolve_scenario(raw);
    const std::string out = raw.resolve("out", raw.out, std::string("samples.csv"));
    rmtd::write_samples_csv(rmtd::generate_received(scenario), out);
    std::cout << "wrote " << out << " (" << scenario.P << " antennas x " << scenario.N
              << " samples)\n";
    return 0;
}

int cmd_detect(Raw& raw) {
    raw.load_config();
    const std::string input = raw.resolve("input", raw.input, std::string());
    if (input.empty()) throw std::invalid_argument("detect requires --input <samples.csv>");
    const double pfa = raw.resolve("pfa", raw.pfa, 0.05);
    const rmtd::ComplexMatrix X = rmtd::read_samples_csv(input);
    const int P = static_cast<int>(X.rows());
    const int N = static_cast<int>(X.cols());
    if (N <= P)
        throw std::invalid_argument("samples file '" + input + "' has P=" + std::to_string(P) +
                                    " rows and N=" + std::to_string(N) +
                                    " sample columns; the detector needs N > P");
    const rmtd::EigenSpectrum eigs = rmtd::hermitian_eigenvalues(rmtd::scm(X));
    const rmtd::DetectionOutcome outcome =
        rmtd::detect(eigs, pfa, P, static_cast<double>(P) / static_cast<double>(N));
    json verdict;
    verdict["D"] = outcome.D;
    verdict["gamma"] = outcome.gamma;
    verdict["G_prime"] = outcome.G_prime;
    verdict["decision"] = rmtd::to_string(outcome.decision);
    verdict["p_fa"] = outcome.p_fa_target;
    std::cout << verdict.dump() << "\n";
    return 0;
}

int cmd_mp_law(Raw& raw) {
    raw.load_config();
    if (!raw.flag_given("c") && !raw.cfg.contains("c"))
        throw std::invalid_argument("mp-law requires --c <aspect ratio>");
    const double c = raw.resolve("c", raw.c, 0.0);
    const rmtd::MpLaw law = rmtd::mp_support(c);
    char line[160];
    std::snprintf(line, sizeof(line), "a=%.17g b=%.17g mass=%.17g", law.a, law.b,
                  law.mass_at_zero);
    std::cout << line << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "rmt-detect: GLRT signal detection for large antenna arrays.\n"
        "Units: SNR in dB (10*log10(L*sigma2)); p_fa and densities are plain probabilities."};
    app.require_subcommand(1);

    Raw esd, eig, glrt, miss, roc, gen, det, mp;

    auto common = [&](Raw& raw, CLI::App* cmd) {
        raw.cmd = cmd;
        cmd->add_option("--config", raw.config_path,
                        "flat JSON config file; flags override config values");
    };

    common(esd, app.add_subcommand("esd", "empirical eigenvalue histogram vs the limit law"));
    add_scenario_flags(esd, 256, 512, 0, "H0");
    add_run_flags(esd, 200);
    esd.add("n_list", esd.cmd->add_option("--n-list", esd.n_list,
                                          "comma-separated N sweep values"));

    common(eig, app.add_subcommand(
                    "eig-compare",
                    "largest-eigenvalue agreement across the three matrix constructions"));
    add_scenario_flags(eig, 256, 512, 2, "H1");
    add_run_flags(eig, 200);

    common(glrt, app.add_subcommand("glrt-dist",
                                    "GLRT statistic histograms vs Gaussian asymptotics"));
    add_scenario_flags(glrt, 256, 512, 10, "H1");
    add_run_flags(glrt, 2000);
    glrt.add("n_list", glrt.cmd->add_option("--n-list", glrt.n_list,
                                            "comma-separated N sweep values"));

    common(miss, app.add_subcommand("miss-prob",
                                    "miss probability vs SNR, theory and Monte Carlo"));
    add_scenario_flags(miss, 256, 512, 10, "H1");
    add_run_flags(miss, 2000);
    miss.add("n_list", miss.cmd->add_option("--n-list", miss.n_list,
                                            "comma-separated N sweep values"));
    miss.add("snr_min", miss.cmd->add_option("--snr-min", miss.snr_min,
                                             "sweep start in dB (default -22)"));
    miss.add("snr_max", miss.cmd->add_option("--snr-max", miss.snr_max,
                                             "sweep end in dB (default -10)"));
    miss.add("snr_step", miss.cmd->add_option("--snr-step", miss.snr_step,
                                              "sweep step in dB (default 0.5)"));
    miss.add("pfa", miss.cmd->add_option("--pfa", miss.pfa,
                                         "fixed false-alarm probability (default 0.05)"));

    common(roc, app.add_subcommand("roc", "detection vs false-alarm probability curves"));
    add_scenario_flags(roc, 256, 512, 10, "H1");
    add_run_flags(roc, 2000);
    roc.add("snr_list", roc.cmd->add_option("--snr-list", roc.snr_list,
                                            "comma-separated SNR points in dB"));
    roc.add("pfa_count", roc.cmd->add_option("--pfa-count", roc.pfa_count,
                                             "p_fa grid size (default 50)"));
    roc.add("pfa_min", roc.cmd->add_option("--pfa-min", roc.pfa_min,
                                           "smallest p_fa (default 1e-3)"));
    roc.add("pfa_max", roc.cmd->add_option("--pfa-max", roc.pfa_max,
                                           "largest p_fa (default 0.5)"));

    common(gen, app.add_subcommand("generate",
                                   "write a synthetic capture as interleaved re,im CSV"));
    add_scenario_flags(gen, 256, 512, 0, "H0");
    gen.add("out", gen.cmd->add_option("--out", gen.out,
                                       "output CSV path (default samples.csv)"));

    common(det, app.add_subcommand("detect", "run the GLRT on a captured samples CSV"));
    det.add("input", det.cmd->add_option("--input", det.input,
                                         "samples CSV: one row per antenna, interleaved re,im"));
    det.add("pfa", det.cmd->add_option("--pfa", det.pfa,
                                       "false-alarm probability (default 0.05)"));

    common(mp, app.add_subcommand("mp-law", "print the limit-law support and point mass"));
    mp.add("c", mp.cmd->add_option("--c", mp.c, "aspect ratio P/N (> 0)"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (esd.cmd->parsed()) return cmd_esd(esd);
        if (eig.cmd->parsed()) return cmd_eig_compare(eig);
        if (glrt.cmd->parsed()) return cmd_glrt_dist(glrt);
        if (miss.cmd->parsed()) return cmd_miss_prob(miss);
        if (roc.cmd->parsed()) return cmd_roc(roc);
        if (gen.cmd->parsed()) return cmd_generate(gen);
        if (det.cmd->parsed()) return cmd_detect(det);
        if (mp.cmd->parsed()) return cmd_mp_law(mp);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "error: no subcommand given\n";
    return 2;
}
