// Command-line front end: simulation, filtering, merging experiments,
// observability diagnostics, and the built-in acceptance checks.

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fsl/acceptance.hpp"
#include "fsl/config.hpp"
#include "fsl/diagnostics.hpp"
#include "fsl/filters.hpp"
#include "fsl/harness.hpp"
#include "fsl/report.hpp"

namespace {

using namespace fsl;

std::string experiment_dir(const Config& cfg, const std::string& out_override) {
    return output_root(out_override) + "/" + cfg.get_string("experiment", "output");
}

int cmd_simulate(const Config& cfg, const std::string& out_override) {
    const std::string dir = experiment_dir(cfg, out_override);
    const std::string type = cfg.get_string("model", "type");
    const double T = cfg.get_double("experiment", "T");
    const double dt = cfg.get_double("experiment", "dt");
    const std::vector<long> seeds = cfg.get_ints("experiment", "seeds");
    if (type == "linear_gaussian") {
        const auto model =
            LinearGaussianModel(cfg.get_matrix("model", "A"), cfg.get_matrix("model", "B"),
                                cfg.get_matrix("model", "C"), cfg.get_matrix("model", "D"));
        const GaussianMeasure prior(cfg.get_matrix("prior_mu", "mean").col(0),
                                    cfg.get_matrix("prior_mu", "cov"));
        cfg.reject_unconsumed();
        for (long seed : seeds) {
            RngStream rng(static_cast<std::uint64_t>(seed));
            const auto [sig, obs] = simulate_linear_gaussian(model, prior, T, dt, rng);
            write_text_file(dir + "/path_seed" + std::to_string(seed) + ".csv",
                            path_to_csv(sig, obs));
        }
    } else if (type == "example12") {
        const Example12Model model(cfg.get_double("model", "lambda"));
        const double x0 = cfg.get_double("model", "x0", 1.0);
        cfg.reject_unconsumed();
        for (long seed : seeds) {
            RngStream rng(static_cast<std::uint64_t>(seed));
            const ObservationPath obs = simulate_example12(model, x0, T, dt, rng);
            SignalPath sig;
            sig.times = obs.times;
            sig.states.resize(1, obs.times.size());
            for (Eigen::Index k = 0; k < obs.times.size(); ++k)
                sig.states(0, k) = model.signal(x0, obs.times[k]);
            write_text_file(dir + "/path_seed" + std::to_string(seed) + ".csv",
                            path_to_csv(sig, obs));
        }
    } else {
        throw ConfigError("simulate: model type must be linear_gaussian or example12");
    }
    std::cout << "wrote paths to " << dir << "\n";
    return 0;
}

int cmd_filter(const Config& cfg, const std::string& out_override) {
    const std::string dir = experiment_dir(cfg, out_override);
    if (cfg.get_string("model", "type") != "linear_gaussian")
        throw ConfigError("filter: model type must be linear_gaussian");
    const auto model =
        LinearGaussianModel(cfg.get_matrix("model", "A"), cfg.get_matrix("model", "B"),
                            cfg.get_matrix("model", "C"), cfg.get_matrix("model", "D"));
    const GaussianMeasure prior(cfg.get_matrix("prior_mu", "mean").col(0),
                                cfg.get_matrix("prior_mu", "cov"));
    const double T = cfg.get_double("experiment", "T");
    const double dt = cfg.get_double("experiment", "dt");
    const std::string kind = cfg.get_string("filter", "type");
    const long particles = cfg.get_int("filter", "particles", 1000);
    const std::vector<long> seeds = cfg.get_ints("experiment", "seeds");
    cfg.reject_unconsumed();
    for (long seed : seeds) {
        RngStream rng(static_cast<std::uint64_t>(seed));
        const ObservationPath path = simulate_linear_gaussian(model, prior, T, dt, rng).second;
        if (kind == "kalman") {
            const auto states = kalman_bucy_run(model, prior, path);
            write_text_file(dir + "/filter_seed" + std::to_string(seed) + ".csv",
                            kalman_trace_to_csv(states));
        } else if (kind == "particle") {
            RngStream prng = rng.fork(1);
            const auto states = particle_filter_states(model, prior, path, particles, prng,
                                                       std::max<Eigen::Index>(1, path.steps() / 200));
            write_text_file(dir + "/filter_seed" + std::to_string(seed) + ".csv",
                            particle_trace_to_csv(states, model.state_dim()));
        } else {
            throw ConfigError("filter: type must be kalman or particle");
        }
    }
    std::cout << "wrote filter traces to " << dir << "\n";
    return 0;
}

std::vector<SummaryLine> stability_summary(const std::vector<StabilityTrace>& traces) {
    std::vector<SummaryLine> lines;
    for (const auto& trace : traces) {
        const auto& first = trace.records.front();
        const auto& last = trace.records.back();
        lines.push_back({last.bl <= first.bl,
                         "bl_decay_seed" + std::to_string(trace.seed), last.bl, first.bl,
                         "(final vs initial)"});
    }
    return lines;
}

int cmd_stability(const Config& cfg, const std::string& out_override) {
    const std::string dir = experiment_dir(cfg, out_override);
    const std::string type = cfg.get_string("model", "type");
    std::vector<StabilityTrace> traces;
    if (type == "linear_gaussian") {
        const auto experiment = load_kalman_stability(cfg);
        cfg.reject_unconsumed();
        traces = run_stability_kalman(experiment);
    } else if (type == "diffusion") {
        const auto experiment = load_particle_stability(cfg);
        cfg.reject_unconsumed();
        traces = run_stability_particle(experiment);
    } else {
        throw ConfigError("stability: model type must be linear_gaussian or diffusion");
    }
    const auto summary = stability_summary(traces);
    write_stability_outputs(dir, traces, summary);
    bool ok = true;
    for (const auto& line : summary) ok = ok && line.pass;
    std::cout << render_summary(summary) << "wrote " << dir << "\n";
    return ok ? 0 : 1;
}

int cmd_counterexample(const Config& cfg, const std::string& out_override) {
    const std::string dir = experiment_dir(cfg, out_override);
    const auto experiment = load_counterexample(cfg);
    const double residual_tol = cfg.get_double("criteria", "residual_tol", 1e-3);
    const double min_limit_gap = cfg.get_double("criteria", "min_limit_gap", 0.05);
    const double min_fraction = cfg.get_double("criteria", "min_seed_fraction", 0.9);
    cfg.reject_unconsumed();
    const auto results = run_counterexample(experiment);
    int good = 0;
    for (const auto& r : results)
        if (r.residual <= residual_tol && std::abs(r.gap_limit) > min_limit_gap) ++good;
    const double fraction = static_cast<double>(good) / static_cast<double>(results.size());
    std::vector<SummaryLine> summary = {
        {fraction >= min_fraction, "fraction_converged_nonzero_gap", fraction, min_fraction,
         "(>=)"}};
    write_counterexample_outputs(dir, results, summary);
    std::cout << render_summary(summary) << "wrote " << dir << "\n";
    return fraction >= min_fraction ? 0 : 1;
}

int cmd_predictor(const Config& cfg, const std::string& out_override) {
    const std::string dir = experiment_dir(cfg, out_override);
    const auto experiment = load_predictor_merging(cfg);
    const double decay_factor = cfg.get_double("criteria", "decay_factor", 0.1);
    cfg.reject_unconsumed();
    const auto traces = run_predictor_merging(experiment);
    std::vector<double> initial, final_bl;
    for (const auto& trace : traces) {
        initial.push_back(trace.records.front().bl);
        final_bl.push_back(trace.records.back().bl);
    }
    std::sort(initial.begin(), initial.end());
    std::sort(final_bl.begin(), final_bl.end());
    const double m0 = initial[initial.size() / 2];
    const double mN = final_bl[final_bl.size() / 2];
    std::vector<SummaryLine> summary = {
        {mN <= decay_factor * m0, "median_bl_final_vs_initial", mN, decay_factor * m0, "(<=)"}};
    write_stability_outputs(dir, traces, summary);
    std::cout << render_summary(summary) << "wrote " << dir << "\n";
    return mN <= decay_factor * m0 ? 0 : 1;
}

int cmd_convolution(const Config& cfg, const std::string& out_override) {
    const std::string dir = experiment_dir(cfg, out_override);
    const std::vector<long> ns = cfg.get_ints("experiment", "ns");
    const double xi_var = cfg.get_double("model", "xi_var", 1.0);
    const double scale = cfg.get_double("experiment", "scale", 1.0);
    cfg.reject_unconsumed();
    const auto rows = run_convolution_merging(ns, GaussianNoise::scalar(0.0, xi_var), scale);
    bool decreasing = true;
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (!(rows[i].tv_smoothed < rows[i - 1].tv_smoothed)) decreasing = false;
    std::vector<SummaryLine> summary = {
        {decreasing, "tv_convolved_decreasing", decreasing ? 1.0 : 0.0, 1.0, "(flag)"},
        {rows.front().tv_atoms == 2.0, "tv_discrete_equals_2", rows.front().tv_atoms, 2.0, "(=)"}};
    write_convolution_outputs(dir, rows, summary);
    std::cout << render_summary(summary) << "wrote " << dir << "\n";
    return decreasing ? 0 : 1;
}

int cmd_observability(const std::string& a_spec, const std::string& c_spec, double tol,
                      const std::vector<double>& times) {
    const Eigen::MatrixXd A = parse_matrix(a_spec);
    const Eigen::MatrixXd C = parse_matrix(c_spec);
    const ObservabilityReport rep = observability_matrix_rank(A, C, tol);
    std::cout << "rank: " << rep.rank << "\n";
    std::cout << "singular values:";
    for (Eigen::Index i = 0; i < rep.singular_values.size(); ++i)
        std::cout << " " << rep.singular_values[i];
    std::cout << "\nobservable: " << (rep.observable ? "yes" : "no") << "\n";
    if (!times.empty()) {
        const ReconstructionResult rec = reconstruction_matrix(A, C, times, tol);
        std::cout << "reconstruction rank: " << rec.rank_report.rank << "\n";
        if (rec.rank_report.observable)
            std::cout << "reconstruction map (pseudoinverse):\n" << rec.reconstruction << "\n";
    }
    return 0;
}

int cmd_diagnose(const Config& cfg, const std::string& out_override) {
    const std::string dir = experiment_dir(cfg, out_override);
    CsvWriter csv({"check", "value", "bound", "pass"});
    std::vector<SummaryLine> summary;

    if (cfg.has("bilipschitz", "h")) {
        const auto h = named_scalar_function(cfg.get_string("bilipschitz", "h"));
        const double lo = cfg.get_double("bilipschitz", "lo", -10.0);
        const double hi = cfg.get_double("bilipschitz", "hi", 10.0);
        const int points = static_cast<int>(cfg.get_int("bilipschitz", "points", 4001));
        const auto dec = bilipschitz_decompose_1d(h, lo, hi, points);
        summary.push_back({dec.valid, "bilipschitz_valid", dec.C, dec.eps, "(C, eps)"});
        csv.append_row({"bilipschitz_C", CsvWriter::cell(dec.C), "", dec.valid ? "yes" : "no"});
        csv.append_row({"bilipschitz_eps", CsvWriter::cell(dec.eps), CsvWriter::cell(1.0),
                        dec.eps < 1.0 ? "yes" : "no"});
        csv.append_row({"bilipschitz_grid_lip_h0", CsvWriter::cell(dec.grid_lip_h0),
                        CsvWriter::cell(dec.eps), dec.grid_lip_h0 <= dec.eps + 1e-12 ? "yes" : "no"});
    }

    if (cfg.has("sandwich", "lip_Ch0")) {
        const double lip_Ch0 = cfg.get_double("sandwich", "lip_Ch0");
        const double lip_b = cfg.get_double("sandwich", "lip_b");
        const double norm_Cinv = cfg.get_double("sandwich", "norm_Cinv");
        const double lip_h = cfg.get_double("sandwich", "lip_h");
        const double eps = cfg.get_double("sandwich", "eps", 0.0);
        const SandwichConstants sc = lemma51_constants(lip_Ch0, lip_b, norm_Cinv, lip_h, eps);
        csv.append_row({"lemma51_m", CsvWriter::cell(sc.lower), "", sc.lower > 0 ? "yes" : "no"});
        csv.append_row({"lemma51_M", CsvWriter::cell(sc.upper), "", "yes"});
        csv.append_row({"lemma51_eps0", CsvWriter::cell(sc.eps0), "", "yes"});
        summary.push_back({sc.lower > 0.0 || eps >= sc.eps0, "lemma51_constants", sc.lower,
                           sc.eps0, "(m, eps0)"});
    }

    cfg.reject_unconsumed();
    write_text_file(dir + "/checks.csv", csv.str());
    write_text_file(dir + "/summary.txt", render_summary(summary));
    std::cout << render_summary(summary) << "wrote " << dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"filter-stability laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;

    auto add_config_cmd = [&](const std::string& name, const std::string& desc) {
        CLI::App* sub = app.add_subcommand(name, desc);
        sub->add_option("--config", config_path, "experiment config file")->required();
        sub->add_option("--out", out_override, "output root (default $FSLAB_OUT or ./out)");
        return sub;
    };

    CLI::App* sim = add_config_cmd("simulate", "simulate a model and write path CSVs");
    CLI::App* flt = add_config_cmd("filter", "run a filter on simulated observations");
    CLI::App* stab = add_config_cmd("stability", "two-filter merging experiment");
    CLI::App* ctr = add_config_cmd("counterexample", "exponential-signal non-merging experiment");
    CLI::App* pred = add_config_cmd("predictor", "one-step predictor merging experiment");
    CLI::App* conv = add_config_cmd("convolution", "smoothing vs discrete TV table");
    CLI::App* diag = add_config_cmd("diagnose", "regularity and constant checks");

    CLI::App* obs = app.add_subcommand("observability", "rank test for a linear pair {A, C}");
    std::string a_spec, c_spec;
    double tol = 1e-10;
    std::vector<double> times;
    obs->add_option("--A", a_spec, "state matrix, e.g. \"0,1;0,0\"")->required();
    obs->add_option("--C", c_spec, "observation matrix, e.g. \"1,0\"")->required();
    obs->add_option("--tol", tol, "relative singular-value tolerance");
    obs->add_option("--times", times, "reconstruction times t_1..t_k");

    CLI::App* check = app.add_subcommand("check-all", "run the full acceptance suite");
    std::string check_out;
    check->add_option("--out", check_out, "output root for the suite summary");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(Config::parse_file(config_path), out_override);
        if (flt->parsed()) return cmd_filter(Config::parse_file(config_path), out_override);
        if (stab->parsed()) return cmd_stability(Config::parse_file(config_path), out_override);
        if (ctr->parsed()) return cmd_counterexample(Config::parse_file(config_path), out_override);
        if (pred->parsed()) return cmd_predictor(Config::parse_file(config_path), out_override);
        if (conv->parsed()) return cmd_convolution(Config::parse_file(config_path), out_override);
        if (diag->parsed()) return cmd_diagnose(Config::parse_file(config_path), out_override);
        if (obs->parsed()) return cmd_observability(a_spec, c_spec, tol, times);
        if (check->parsed()) {
            std::ostringstream capture;
            struct Tee : std::streambuf {
                std::streambuf *a, *b;
                Tee(std::streambuf* a_, std::streambuf* b_) : a(a_), b(b_) {}
                int overflow(int c) override {
                    if (c != EOF) {
                        a->sputc(static_cast<char>(c));
                        b->sputc(static_cast<char>(c));
                    }
                    return c;
                }
            } tee(std::cout.rdbuf(), capture.rdbuf());
            std::ostream both(&tee);
            const int rc = fsl::run_acceptance_suite(both);
            write_text_file(output_root(check_out) + "/acceptance/summary.txt", capture.str());
            return rc;
        }
    } catch (const fsl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
